"""Experiment configuration: loading, validation, and stable hashing.

Configs are single JSON files.  Generator sets are either a library name
("lps_s2", "rot_s1", "rot4_s1", "cyclic5") or an inline block of labelled
matrices with string entries "n" / "n/5^k" and an explicit involution:

    {"generators": [{"label": "az", "matrix": [["3/5","-4/5","0"], ...]},
                    ...],
     "involution": {"az": "az_inv", ...}}

All randomness is derived from the single `seed` field; there is no
ambient randomness anywhere in a run.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field

from .algebra import BUILTIN_GENERATORS, DEFAULT_BALL_CAP, GeneratorSet, RationalMatrix
from .errors import ConfigError, InputError
from .manifolds import ManifoldModel, parse_model
from .spectral import ControlFunction, ControlFunctions

DEFAULT_PROBES = ("spectrum", "cheeger", "gap", "chi")
KNOWN_PROBES = ("spectrum", "cheeger", "gap", "chi", "fingerprint")


@dataclass
class ExperimentConfig:
    model: str
    generators: object  # library name or inline dict
    t_sequence: list = field(default_factory=list)
    samples_per_region: int = 100
    seed: int = 0
    probes: tuple = DEFAULT_PROBES
    chi_radius: float = 1.0
    fingerprint_radius: int = 3
    pool_factor: int = 50
    ball_cap: int = DEFAULT_BALL_CAP
    min_edge_witness: int = 1
    certificate: dict | None = None
    out_dir: str | None = None

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["t_sequence"] = [float(t) for t in self.t_sequence]
        out["probes"] = list(self.probes)
        return out


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        raw = json.load(fh)
    return config_from_dict(raw)


def config_from_dict(raw: dict) -> ExperimentConfig:
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError([f"unknown config keys: {sorted(unknown)}"])
    if "model" not in raw or "generators" not in raw:
        raise ConfigError(["config needs at least 'model' and 'generators'"])
    cfg = ExperimentConfig(**raw)
    cfg.probes = tuple(cfg.probes)
    cfg.t_sequence = [float(t) for t in cfg.t_sequence]
    return cfg


def config_hash(cfg: ExperimentConfig) -> str:
    """Hash of the canonical JSON form; stable under key reordering."""
    canon = json.dumps(cfg.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def build_generator_set(spec) -> GeneratorSet:
    if isinstance(spec, GeneratorSet):
        return spec
    if isinstance(spec, str):
        factory = BUILTIN_GENERATORS.get(spec)
        if factory is None:
            raise InputError(
                f"unknown generator library name {spec!r}; "
                f"available: {sorted(BUILTIN_GENERATORS)}"
            )
        return factory()
    if isinstance(spec, dict):
        entries = []
        for item in spec.get("generators", []):
            label = item["label"]
            matrix = RationalMatrix.from_rows(item["matrix"])
            entries.append((label, matrix))
        involution = dict(spec.get("involution", {}))
        return GeneratorSet(tuple(entries), involution)
    raise InputError(f"cannot interpret generator spec of type {type(spec).__name__}")


def build_model(cfg: ExperimentConfig) -> ManifoldModel:
    return parse_model(cfg.model)


def build_controls(cert_block: dict | None) -> ControlFunctions:
    if not cert_block:
        return ControlFunctions.identity_pair()
    return ControlFunctions(
        rho_minus=ControlFunction.from_dict(cert_block.get("rho_minus")),
        rho_plus=ControlFunction.from_dict(cert_block.get("rho_plus")),
    )


def validate_config(cfg: ExperimentConfig) -> list:
    """Static diagnostics without heavy computation; empty list means valid."""
    diagnostics = []
    model = None
    try:
        model = build_model(cfg)
    except InputError as exc:
        diagnostics.append(f"model: {exc}")
    gens = None
    try:
        gens = build_generator_set(cfg.generators)
    except (InputError, KeyError) as exc:
        diagnostics.append(f"generators: {exc}")
    if gens is not None and model is not None and gens.generators:
        if gens.dim != model.matrix_dim:
            diagnostics.append(
                f"generators of dimension {gens.dim} cannot act on {cfg.model}"
            )
        else:
            from .algebra import verify_special_orthogonal

            for lab, mat in gens.generators:
                if not verify_special_orthogonal(mat):
                    diagnostics.append(f"generator {lab!r} is not special-orthogonal")
                elif model.kind == "torus" and mat.exponent != 0:
                    diagnostics.append(f"generator {lab!r} does not preserve the torus lattice")
    ts = cfg.t_sequence
    if any(t < 1.0 for t in ts):
        diagnostics.append("t_sequence entries must be at least 1")
    if any(t2 <= t1 for t1, t2 in zip(ts, ts[1:])):
        diagnostics.append("t_sequence not increasing")
    if cfg.samples_per_region < 100:
        diagnostics.append("samples_per_region below the contract minimum of 100")
    if cfg.pool_factor < 50:
        diagnostics.append("pool_factor below the documented minimum of 50")
    unknown_probes = set(cfg.probes) - set(KNOWN_PROBES)
    if unknown_probes:
        diagnostics.append(f"unknown probes: {sorted(unknown_probes)}")
    if cfg.chi_radius < 0:
        diagnostics.append("chi_radius must be non-negative")
    word_radius = int(6 * cfg.chi_radius)
    if gens is not None and gens.generators and word_radius > 13:
        branching = max(len(gens.generators) - 1, 1)
        if branching > 1:
            diagnostics.append(
                f"chi_radius {cfg.chi_radius} needs word balls of radius {word_radius}; "
                "infeasible for a branching generator set"
            )
    if cfg.ball_cap < 1000:
        diagnostics.append("ball_cap must be at least 1000")
    if cfg.certificate is not None:
        try:
            build_controls(cfg.certificate)
        except InputError as exc:
            diagnostics.append(f"certificate controls: {exc}")
    return diagnostics
