"""Experiment orchestration: one level per scale t, then summary blocks.

Each level builds the 1/t net, its partition, the approximating graph,
and the enabled probes (spectrum, Cheeger bounds, action gap, singular-set
fraction).  A level failure is recorded and the remaining levels continue.
Reports avoid wall-clock values except for a single `generated_at` stamp,
so identical configs produce byte-identical reports modulo that line.
"""

from __future__ import annotations

import concurrent.futures
import json
import logging
import os
from dataclasses import asdict, dataclass

import numpy as np

from . import __version__
from .config import (
    ExperimentConfig,
    build_controls,
    build_generator_set,
    build_model,
    config_hash,
    validate_config,
)
from .coarse import growth_fingerprint, singular_set
from .errors import BallSizeExceeded, ConfigError, PreconditionError
from .graphs import approx_graph, export_graph, graph_report
from .nets import (
    build_net,
    save_net_csv,
    save_partition_csv,
    save_partition_summary,
    voronoi_partition,
)
from .spectral import action_gap, cheeger_bounds, embedding_obstruction, laplacian_spectrum
from .warped import ActionSpec, WarpedLevel

log = logging.getLogger("warpcones")


def _stage_seed(base: int, level_index: int, stage: int) -> int:
    ss = np.random.SeedSequence(entropy=base, spawn_key=(level_index, stage))
    return int(ss.generate_state(1)[0])


def _fmt_t(t: float) -> str:
    return ("%g" % t).replace(".", "p")


def run_level(cfg: ExperimentConfig, t: float, level_index: int, out_dir: str | None):
    """One scale: net, partition, graph, probes.  Returns the level record."""
    model = build_model(cfg)
    gens = build_generator_set(cfg.generators)
    action = ActionSpec(model, gens)
    record = {"t": t, "error": None, "error_type": None}
    tag = _fmt_t(t)
    try:
        net = build_net(model, 1.0 / t, _stage_seed(cfg.seed, level_index, 0), cfg.pool_factor)
        record["size"] = len(net)
        record["degenerate_net"] = net.degenerate
        partition = voronoi_partition(
            net, cfg.samples_per_region * len(net), _stage_seed(cfg.seed, level_index, 1)
        )
        record["mesh"] = partition.mesh
        record["Q"] = partition.q_ratio
        graph = approx_graph(action, partition, level_t=t, min_witness=cfg.min_edge_witness)
        rep = graph_report(graph)
        record["max_degree"] = rep.max_degree
        record["mean_degree"] = rep.mean_degree
        record["component_count"] = rep.component_count
        if out_dir:
            save_net_csv(net, os.path.join(out_dir, f"net_t{tag}.csv"))
            save_partition_csv(partition, os.path.join(out_dir, f"partition_t{tag}.csv"))
            save_partition_summary(partition, os.path.join(out_dir, f"partition_t{tag}.json"))
            export_graph(graph, "edge-list", os.path.join(out_dir, f"graph_t{tag}.edges"))
            export_graph(graph, "json", os.path.join(out_dir, f"graph_t{tag}.json"))
        if "spectrum" in cfg.probes:
            spectrum = laplacian_spectrum(graph, k=min(6, len(net)))
            record["lambda2"] = spectrum.lambda2
            record["connected"] = spectrum.connected
            if out_dir:
                _save_spectrum_csv(spectrum, os.path.join(out_dir, f"spectrum_t{tag}.csv"))
        if "cheeger" in cfg.probes and rep.component_count == 1 and len(net) >= 2:
            ch = cheeger_bounds(graph)
            record["h_lower"] = ch.h_lower
            record["h_upper"] = ch.h_upper
        if "gap" in cfg.probes:
            gap = action_gap(action, partition)
            record["eps_avg"] = gap.epsilon_avg
        if "chi" in cfg.probes and gens.generators:
            chi = singular_set(action, net, t, cfg.chi_radius, cfg.ball_cap)
            record["chi_fraction"] = chi.fraction
            record["chi_radius"] = cfg.chi_radius
            if out_dir:
                _save_chi_csv(chi, os.path.join(out_dir, f"chi_t{tag}.csv"))
    except Exception as exc:  # noqa: BLE001 - level failures are data
        record["error"] = str(exc)
        record["error_type"] = type(exc).__name__
        log.warning("level t=%s failed: %s", t, exc)
    return record


def _save_spectrum_csv(spectrum, path):
    with open(path, "w") as fh:
        fh.write("index,eigenvalue,residual\n")
        for i, (v, r) in enumerate(zip(spectrum.eigenvalues, spectrum.residual_norms)):
            fh.write(f"{i},{v!r},{r!r}\n")


def _save_chi_csv(chi, path):
    with open(path, "w") as fh:
        fh.write("net_index,witness_word,displacement\n")
        for i in chi.member_indices:
            word, disp = chi.witnesses[int(i)]
            fh.write(f"{int(i)},{'.'.join(word)},{disp!r}\n")


def _certificate_block(cfg: ExperimentConfig, records: list) -> dict:
    block = dict(cfg.certificate or {})
    controls = build_controls(cfg.certificate)
    measured = None
    for rec in reversed(records):
        if rec.get("error") is None and "lambda2" in rec:
            measured = rec
            break
    p_size = block.get("P_size") or (measured and measured.get("size"))
    q_ratio = block.get("Q") or (measured and measured.get("Q"))
    degree = block.get("D") or (measured and measured.get("max_degree"))
    epsilon = block.get("epsilon") or (measured and measured.get("eps_avg"))
    if not all(v is not None for v in (p_size, q_ratio, degree, epsilon)) or (
        epsilon is not None and epsilon <= 0
    ):
        return {"status": "unavailable", "inputs": block}
    cert = embedding_obstruction(int(p_size), float(q_ratio), float(degree), float(epsilon), controls)
    out = cert.to_dict()
    out["status"] = "evaluated"
    out["source"] = "config" if cfg.certificate and "P_size" in cfg.certificate else "measured"
    return out


def _fingerprint_block(cfg: ExperimentConfig, out_dir: str | None) -> dict:
    model = build_model(cfg)
    gens = build_generator_set(cfg.generators)
    action = ActionSpec(model, gens)
    t = cfg.t_sequence[-1]
    net = build_net(model, 1.0 / t, _stage_seed(cfg.seed, len(cfg.t_sequence) - 1, 0), cfg.pool_factor)
    level = WarpedLevel(action, t)
    try:
        fp = growth_fingerprint(level, net, cfg.fingerprint_radius, cap=cfg.ball_cap)
    except PreconditionError as exc:
        return {"status": "skipped", "reason": str(exc)}
    block = {
        "status": "evaluated",
        "t": t,
        "r_max": cfg.fingerprint_radius,
        "base_index": fp.base_index,
        "margin": fp.margin,
        "deviation": fp.deviation,
        "measured_counts": [int(c) for c in fp.measured.counts],
        "product_model_counts": [int(c) for c in fp.product_model.counts],
    }
    if out_dir:
        path = os.path.join(out_dir, f"fingerprint_t{_fmt_t(t)}.csv")
        with open(path, "w") as fh:
            fh.write("radius,warped_count,product_model_count\n")
            for k, (a, b) in enumerate(zip(fp.measured.counts, fp.product_model.counts)):
                fh.write(f"{k},{int(a)},{int(b)}\n")
    return block


def run_experiment(cfg: ExperimentConfig, out_dir: str | None = None, workers: int = 1) -> dict:
    """Full pipeline; returns the report dict (also written to report.json)."""
    diagnostics = validate_config(cfg)
    if diagnostics:
        raise ConfigError(diagnostics)
    out_dir = out_dir or cfg.out_dir
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
    records = []
    if workers > 1 and len(cfg.t_sequence) > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(run_level, cfg, t, i, out_dir)
                for i, t in enumerate(cfg.t_sequence)
            ]
            records = [f.result() for f in futures]
    else:
        for i, t in enumerate(cfg.t_sequence):
            log.info("level t=%s (%d/%d)", t, i + 1, len(cfg.t_sequence))
            records.append(run_level(cfg, t, i, out_dir))
    report = {
        "config": cfg.to_dict(),
        "config_hash": config_hash(cfg),
        "versions": _versions(),
        "records": records,
        "certificate": _certificate_block(cfg, records),
        "errors": [
            {"t": r["t"], "type": r["error_type"], "message": r["error"]}
            for r in records
            if r.get("error")
        ],
    }
    if "fingerprint" in cfg.probes and cfg.t_sequence:
        report["fingerprint"] = _fingerprint_block(cfg, out_dir)
    from datetime import datetime, timezone

    report["generated_at"] = datetime.now(timezone.utc).isoformat()
    if out_dir:
        with open(os.path.join(out_dir, "report.json"), "w") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return report


def exit_code_for(report: dict) -> int:
    """0 success, 3 partial failure, 4 resource cap (config errors raise)."""
    errors = report.get("errors", [])
    if any(e["type"] == "BallSizeExceeded" for e in errors):
        return 4
    if errors:
        return 3
    return 0


def _versions() -> dict:
    import numpy
    import scipy

    return {
        "warpcones": __version__,
        "numpy": numpy.__version__,
        "scipy": scipy.__version__,
    }
