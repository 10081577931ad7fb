"""Command-line interface.

Subcommands: run, validate, net, graph, spectrum, cheeger, gap, chi,
ballcheck, fingerprint, schedule, separate.  All take --config (a JSON
experiment file) unless noted; tables land in --out as CSV, summaries as
JSON.  Exit codes: 0 success, 2 config error, 3 partial failure (some
levels failed), 4 resource cap hit.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from .coarse import (
    BallCheckConfig,
    ball_product_check,
    cardinality_schedule,
    growth_fingerprint,
    singular_set,
    subsequence_separation,
)
from .config import (
    build_controls,
    build_generator_set,
    build_model,
    load_config,
    validate_config,
)
from .errors import BallSizeExceeded, ConfigError, InputError, PreconditionError
from .graphs import approx_graph, export_graph, graph_report
from .nets import build_net, save_net_csv, save_partition_csv, save_partition_summary, voronoi_partition
from .pipeline import exit_code_for, run_experiment, run_level, _stage_seed
from .spectral import action_gap, cheeger_bounds, cheeger_exact, laplacian_spectrum
from .warped import ActionSpec, WarpedLevel, warped_graph_metric

log = logging.getLogger("warpcones")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PARTIAL = 3
EXIT_RESOURCE = 4


def _add_common(p, with_t=False):
    p.add_argument("--config", required=True, help="experiment config (JSON)")
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--cap-ball-size", type=int, default=None, help="override the word-ball cap")
    if with_t:
        p.add_argument("--t", type=float, default=None, help="level scale (default: first of t_sequence)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="warpcones",
        description="Level-set graphs of warped cones: experiments and probes.",
    )
    parser.add_argument("--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="full experiment over the config's t_sequence")
    _add_common(p)
    p.add_argument("--workers", type=int, default=1, help="parallel level workers")

    p = sub.add_parser("validate", help="static config diagnostics")
    p.add_argument("--config", required=True)

    for name, helptext in [
        ("net", "build the 1/t net and write it as CSV"),
        ("graph", "net, partition, and approximating graph at one level"),
        ("spectrum", "normalized-Laplacian spectrum of the level graph"),
        ("cheeger", "Cheeger bounds (exact value when small) of the level graph"),
        ("gap", "averaged-form action gap over the level partition"),
    ]:
        p = sub.add_parser(name, help=helptext)
        _add_common(p, with_t=True)

    p = sub.add_parser("chi", help="singular-set fraction on the level net")
    _add_common(p, with_t=True)
    p.add_argument("--radius", type=float, default=None, help="override chi radius")

    p = sub.add_parser("ballcheck", help="warped-ball vs metric-x-group product distortion")
    _add_common(p, with_t=True)
    p.add_argument("--radius", type=float, default=2.0, help="warped ball radius")

    p = sub.add_parser("fingerprint", help="growth profile against the product model")
    _add_common(p, with_t=True)
    p.add_argument("--rmax", type=int, default=None, help="override fingerprint radius")

    p = sub.add_parser("schedule", help="nets/graphs of exactly the target sizes")
    _add_common(p)
    p.add_argument("--targets", required=True, help="comma-separated increasing sizes")

    p = sub.add_parser("separate", help="thin a size sequence and certify non-equivalence")
    p.add_argument("--sizes", required=True, help="comma-separated increasing graph sizes")
    p.add_argument("--degree", type=float, required=True, help="uniform degree bound D")
    p.add_argument("--radius", type=int, required=True, help="radius r with rho_-(r) >= 1")
    p.add_argument("--out", default=None)
    return parser


def _prepare(args, with_t=False):
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if getattr(args, "cap_ball_size", None) is not None:
        cfg.ball_cap = args.cap_ball_size
    diagnostics = validate_config(cfg)
    if diagnostics:
        raise ConfigError(diagnostics)
    model = build_model(cfg)
    gens = build_generator_set(cfg.generators)
    action = ActionSpec(model, gens)
    t = None
    if with_t:
        t = args.t if args.t is not None else (cfg.t_sequence[0] if cfg.t_sequence else None)
        if t is None:
            raise ConfigError(["no level scale: give --t or a nonempty t_sequence"])
    return cfg, model, gens, action, t


def _level_net_partition(cfg, model, t):
    idx = cfg.t_sequence.index(t) if t in cfg.t_sequence else 0
    net = build_net(model, 1.0 / t, _stage_seed(cfg.seed, idx, 0), cfg.pool_factor)
    partition = voronoi_partition(
        net, cfg.samples_per_region * len(net), _stage_seed(cfg.seed, idx, 1)
    )
    return net, partition


def _outdir(args):
    out = args.out or "."
    os.makedirs(out, exist_ok=True)
    return out


def _dump(payload: dict, path: str):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")
    print(json.dumps(payload, indent=2, sort_keys=True, default=_json_default))


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, frozenset):
        return sorted(obj)
    return str(obj)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return _dispatch(args)
    except ConfigError as exc:
        for d in exc.diagnostics:
            print(f"config error: {d}", file=sys.stderr)
        return EXIT_CONFIG
    except BallSizeExceeded as exc:
        print(f"resource cap: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (InputError, PreconditionError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def _dispatch(args) -> int:
    cmd = args.command
    if cmd == "validate":
        cfg = load_config(args.config)
        diagnostics = validate_config(cfg)
        for d in diagnostics:
            print(d)
        if not diagnostics:
            print("ok")
        return EXIT_OK

    if cmd == "run":
        cfg, _, _, _, _ = _prepare(args)
        report = run_experiment(cfg, args.out or cfg.out_dir or ".", workers=args.workers)
        print(json.dumps({"records": report["records"], "certificate": report["certificate"]},
                         indent=2, sort_keys=True, default=_json_default))
        return exit_code_for(report)

    if cmd == "separate":
        sizes = [int(s) for s in args.sizes.split(",")]
        rep = subsequence_separation(sizes, args.degree, args.radius)
        payload = {
            "degree": rep.degree,
            "radius": rep.radius,
            "threshold_n0": rep.threshold,
            "selected_indices": rep.selected_indices,
            "selected_sizes": rep.selected_sizes,
            "pairs": [vars(p) for p in rep.pairs],
        }
        out = _outdir(args)
        _dump(payload, os.path.join(out, "separation.json"))
        return EXIT_OK

    if cmd == "schedule":
        cfg, model, gens, action, _ = _prepare(args)
        targets = [int(s) for s in args.targets.split(",")]
        entries = cardinality_schedule(action, targets, seed=cfg.seed, pool_factor=cfg.pool_factor)
        out = _outdir(args)
        results = []
        for e in entries:
            part = voronoi_partition(e.net, cfg.samples_per_region * e.achieved, cfg.seed + e.target)
            g = approx_graph(action, part, level_t=e.t, min_witness=cfg.min_edge_witness)
            rep = graph_report(g)
            export_graph(g, "edge-list", os.path.join(out, f"schedule_{e.target}.edges"))
            results.append(
                {
                    "target": e.target,
                    "t": e.t,
                    "achieved": e.achieved,
                    "graph_vertices": g.vertex_count,
                    "coarse_size": e.coarse_size,
                    "fine_size": e.fine_size,
                    "volume_constant": e.volume_constant,
                    "sandwich_ok": e.sandwich_ok,
                    "max_degree": rep.max_degree,
                    "components": rep.component_count,
                }
            )
        _dump({"entries": results}, os.path.join(out, "schedule.json"))
        return EXIT_OK

    cfg, model, gens, action, t = _prepare(args, with_t=True)
    out = _outdir(args)
    tag = ("%g" % t).replace(".", "p")

    if cmd == "net":
        net = build_net(model, 1.0 / t, _stage_seed(cfg.seed, 0, 0), cfg.pool_factor)
        save_net_csv(net, os.path.join(out, f"net_t{tag}.csv"))
        _dump(
            {"t": t, "size": len(net), "r": net.separation, "R": net.density_radius,
             "degenerate": net.degenerate},
            os.path.join(out, f"net_t{tag}.json"),
        )
        return EXIT_OK

    if cmd == "graph":
        net, partition = _level_net_partition(cfg, model, t)
        g = approx_graph(action, partition, level_t=t, min_witness=cfg.min_edge_witness)
        rep = graph_report(g)
        save_net_csv(net, os.path.join(out, f"net_t{tag}.csv"))
        save_partition_csv(partition, os.path.join(out, f"partition_t{tag}.csv"))
        save_partition_summary(partition, os.path.join(out, f"partition_t{tag}.json"))
        export_graph(g, "edge-list", os.path.join(out, f"graph_t{tag}.edges"))
        export_graph(g, "json", os.path.join(out, f"graph_t{tag}.json"))
        _dump(
            {"t": t, "vertices": g.vertex_count, "edges": g.edge_count,
             "max_degree": rep.max_degree, "mean_degree": rep.mean_degree,
             "components": rep.component_count},
            os.path.join(out, f"graph_report_t{tag}.json"),
        )
        return EXIT_OK

    if cmd == "spectrum":
        net, partition = _level_net_partition(cfg, model, t)
        g = approx_graph(action, partition, level_t=t, min_witness=cfg.min_edge_witness)
        spectrum = laplacian_spectrum(g, k=min(6, g.vertex_count))
        path = os.path.join(out, f"spectrum_t{tag}.csv")
        with open(path, "w") as fh:
            fh.write("index,eigenvalue,residual\n")
            for i, (v, r) in enumerate(zip(spectrum.eigenvalues, spectrum.residual_norms)):
                fh.write(f"{i},{v!r},{r!r}\n")
        _dump(
            {"t": t, "lambda2": spectrum.lambda2, "solver": spectrum.solver,
             "connected": spectrum.connected,
             "eigenvalues": [float(v) for v in spectrum.eigenvalues]},
            os.path.join(out, f"spectrum_t{tag}.json"),
        )
        return EXIT_OK

    if cmd == "cheeger":
        net, partition = _level_net_partition(cfg, model, t)
        g = approx_graph(action, partition, level_t=t, min_witness=cfg.min_edge_witness)
        report = cheeger_bounds(g)
        payload = {
            "t": t, "h_lower": report.h_lower, "h_upper": report.h_upper,
            "lambda2": report.lambda2, "witness_size": len(report.witness_set),
        }
        if g.vertex_count <= 24:
            h, witness = cheeger_exact(g)
            payload["h_exact"] = h
            payload["witness"] = sorted(witness)
        _dump(payload, os.path.join(out, f"cheeger_t{tag}.json"))
        return EXIT_OK

    if cmd == "gap":
        net, partition = _level_net_partition(cfg, model, t)
        gap = action_gap(action, partition)
        _dump(
            {"t": t, "eps_avg": gap.epsilon_avg, "solver": gap.solver,
             "lower_bound_for_max_form": gap.lower_bound_for_max_form,
             "provenance": gap.provenance},
            os.path.join(out, f"gap_t{tag}.json"),
        )
        return EXIT_OK

    if cmd == "chi":
        radius = args.radius if args.radius is not None else cfg.chi_radius
        net = build_net(model, 1.0 / t, _stage_seed(cfg.seed, 0, 0), cfg.pool_factor)
        chi = singular_set(action, net, t, radius, cfg.ball_cap)
        path = os.path.join(out, f"chi_t{tag}.csv")
        with open(path, "w") as fh:
            fh.write("net_index,witness_word,displacement\n")
            for i in chi.member_indices:
                word, disp = chi.witnesses[int(i)]
                fh.write(f"{int(i)},{'.'.join(word)},{disp!r}\n")
        _dump(
            {"t": t, "r": radius, "fraction": chi.fraction, "net_size": chi.net_size,
             "members": int(len(chi.member_indices)),
             "relation_word": list(chi.relation_word) if chi.relation_word else None},
            os.path.join(out, f"chi_t{tag}.json"),
        )
        return EXIT_OK

    if cmd == "ballcheck":
        net = build_net(model, 1.0 / t, _stage_seed(cfg.seed, 0, 0), cfg.pool_factor)
        level = WarpedLevel(action, t)
        report = ball_product_check(
            level, net, BallCheckConfig(r=args.radius), cap=cfg.ball_cap
        )
        _dump(
            {"t": t, "r": args.radius, "base_index": report.base_index,
             "margin": report.margin, "members": report.n_members,
             "pairs": report.n_pairs, "max_distortion": report.max_distortion},
            os.path.join(out, f"ballcheck_t{tag}.json"),
        )
        return EXIT_OK

    if cmd == "fingerprint":
        rmax = args.rmax if args.rmax is not None else cfg.fingerprint_radius
        net = build_net(model, 1.0 / t, _stage_seed(cfg.seed, 0, 0), cfg.pool_factor)
        level = WarpedLevel(action, t)
        fp = growth_fingerprint(level, net, rmax, cap=cfg.ball_cap)
        path = os.path.join(out, f"fingerprint_t{tag}.csv")
        with open(path, "w") as fh:
            fh.write("radius,warped_count,product_model_count\n")
            for k in range(rmax + 1):
                fh.write(f"{k},{int(fp.measured.counts[k])},{int(fp.product_model.counts[k])}\n")
        _dump(
            {"t": t, "r_max": rmax, "deviation": fp.deviation,
             "base_index": fp.base_index, "margin": fp.margin,
             "measured": [int(c) for c in fp.measured.counts],
             "product_model": [int(c) for c in fp.product_model.counts]},
            os.path.join(out, f"fingerprint_t{tag}.json"),
        )
        return EXIT_OK

    raise InputError(f"unknown command {cmd!r}")


if __name__ == "__main__":
    sys.exit(main())
