"""Command-line interface.

Subcommands: ``generate``, ``bound``, ``simulate``, ``percolate``, and
``experiment <name>``.  Each accepts ``--config``, ``--seed``, ``--out`` and
``--format``; flags override config values.  Failures exit nonzero after
printing a machine-readable error JSON to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .bounds import (
    influence_bound_any_set,
    influence_bound_uniform,
    percolation_bounds,
)
from .experiments import (
    ConfigError,
    EXPERIMENT_NAMES,
    ExperimentConfig,
    emit_report,
    format_float,
    parse_config_sections,
    run_experiment,
)
from .generators import generate
from .graph import (
    InfluencerSet,
    hazard_from_prob,
    read_edge_list,
    write_edge_list,
)
from .simulate import (
    DynamicsSpec,
    estimate_influence,
    estimate_influence_uniform,
    estimate_percolation,
)

_DYNAMICS_CHOICES = ("dtic", "rn", "ctic", "ctic-exp", "sir")


def _load_input_section(config_path):
    """Optional [input] section for the graph-driven subcommands."""
    if config_path is None:
        return {}
    with open(config_path, "r", encoding="utf-8") as fh:
        sections = parse_config_sections(fh.read(), str(config_path))
    for name, kv, _ in sections:
        if name == "input":
            return kv
    return {}


def _pick(args_value, section, key, default=None):
    if args_value is not None:
        return args_value
    if key in section:
        return section[key]
    return default


def _parse_ids(text) -> list[int]:
    if isinstance(text, (list, tuple)):
        return [int(v) for v in text]
    return [int(tok) for tok in str(text).replace(",", " ").split()]


def _emit_json(payload: dict, out) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def _emit_kv_csv(payload: dict, out) -> None:
    flat = _flatten(payload)
    lines = ["key,value"]
    lines.extend(f"{k},{_fmt_value(v)}" for k, v in sorted(flat.items()))
    text = "\n".join(lines) + "\n"
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def _fmt_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return format_float(v)
    return str(v)


def _flatten(d: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        else:
            out[key] = v
    return out


def _emit(payload: dict, fmt: str, out) -> None:
    if fmt == "csv":
        _emit_kv_csv(payload, out)
    else:
        _emit_json(payload, out)


def _cmd_generate(args) -> int:
    if args.config is None:
        raise ConfigError("generate requires --config with a [network <family>] section")
    cfg = ExperimentConfig.from_file(args.config) if _has_experiment(args.config) else None
    if cfg is not None and cfg.networks:
        spec = cfg.networks[0]
    else:
        spec = _network_only_spec(args.config)
    if args.seed is not None:
        spec.seed = args.seed
    g = generate(spec)
    out = args.out or "network.txt"
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    write_edge_list(g, out)
    _emit_json({"n": g.n, "edges": g.edge_count, "out": str(out), "spec": spec.to_json_dict()}, None)
    return 0


def _has_experiment(config_path) -> bool:
    with open(config_path, "r", encoding="utf-8") as fh:
        sections = parse_config_sections(fh.read(), str(config_path))
    return any(name == "experiment" for name, _, _ in sections)


def _network_only_spec(config_path):
    from .experiments import _network_spec  # shared section decoding

    with open(config_path, "r", encoding="utf-8") as fh:
        sections = parse_config_sections(fh.read(), str(config_path))
    for name, kv, lineno in sections:
        if name.startswith("network"):
            family = name[len("network"):].strip()
            if not family:
                raise ConfigError(f"{config_path}:{lineno}: section must name a family")
            spec, _ = _network_spec(str(config_path), family, kv, 0)
            return spec
    raise ConfigError(f"{config_path}: no [network <family>] section found")


def _require_graph(args, section):
    path = _pick(args.graph, section, "graph")
    if path is None:
        raise ConfigError("a graph is required: pass --graph or set graph= in [input]")
    return read_edge_list(path)


def _cmd_bound(args) -> int:
    section = _load_input_section(args.config)
    g = _require_graph(args, section)
    h = hazard_from_prob(g)
    uniform_n0 = _pick(args.uniform_n0, section, "uniform_n0")
    if args.percolation or str(section.get("variant", "")) == "percolation":
        payload = {"variant": "percolation", "report": percolation_bounds(h).to_json_dict()}
    elif uniform_n0 is not None:
        report = influence_bound_uniform(h, int(uniform_n0))
        payload = {"variant": "uniform_set", "report": report.to_json_dict()}
    else:
        ids = _parse_ids(_pick(args.influencers, section, "influencers", "0"))
        report = influence_bound_any_set(h, InfluencerSet(ids))
        payload = {"variant": "worst_case_set", "report": report.to_json_dict()}
    _emit(payload, args.format, args.out)
    return 0


def _dynamics_from(args, section) -> DynamicsSpec:
    kind = str(_pick(args.dynamics, section, "dynamics", "dtic"))
    beta = _pick(args.beta, section, "beta")
    delta = _pick(args.delta, section, "delta")
    beta = float(beta) if beta is not None else None
    delta = float(delta) if delta is not None else None
    if kind == "dtic":
        return DynamicsSpec.dtic()
    if kind == "rn":
        return DynamicsSpec.rn()
    if kind == "ctic":
        return DynamicsSpec.ctic_fixed_total()
    if kind == "ctic-exp":
        if beta is None or delta is None:
            raise ConfigError("ctic-exp requires --beta and --delta")
        return DynamicsSpec.ctic_exponential(beta, delta)
    if kind == "sir":
        if beta is None or delta is None:
            raise ConfigError("sir requires --beta and --delta")
        return DynamicsSpec.sir_coupled(beta, delta)
    raise ConfigError(f"unknown dynamics {kind!r}; expected one of {_DYNAMICS_CHOICES}")


def _cmd_simulate(args) -> int:
    section = _load_input_section(args.config)
    g = _require_graph(args, section)
    spec = _dynamics_from(args, section)
    trials = int(_pick(args.trials, section, "trials", 10_000))
    seed = int(_pick(args.seed, section, "seed", 0))
    uniform_n0 = _pick(args.uniform_n0, section, "uniform_n0")
    log_fh = None
    try:
        if args.dump_trials:
            Path(args.dump_trials).parent.mkdir(parents=True, exist_ok=True)
            log_fh = open(args.dump_trials, "w", encoding="utf-8", newline="\n")
        if uniform_n0 is not None:
            est = estimate_influence_uniform(
                g, int(uniform_n0), spec, trials, seed, workers=args.workers, trial_log=log_fh
            )
            mode = {"uniform_n0": int(uniform_n0)}
        else:
            ids = _parse_ids(_pick(args.influencers, section, "influencers", "0"))
            est = estimate_influence(
                g, InfluencerSet(ids), spec, trials, seed, workers=args.workers, trial_log=log_fh
            )
            mode = {"influencers": ids}
    finally:
        if log_fh is not None:
            log_fh.close()
    payload = {"estimate": est.to_json_dict(), **mode}
    _emit(payload, args.format, args.out)
    return 0


def _cmd_percolate(args) -> int:
    section = _load_input_section(args.config)
    g = _require_graph(args, section)
    trials = int(_pick(args.trials, section, "trials", 1_000))
    seed = int(_pick(args.seed, section, "seed", 0))
    report = estimate_percolation(g, trials, seed)
    _emit({"report": report.to_json_dict()}, args.format, args.out)
    return 0


def _cmd_experiment(args) -> int:
    cfg = ExperimentConfig.from_file(args.config)
    if args.name != cfg.name:
        raise ConfigError(
            f"config names experiment {cfg.name!r} but {args.name!r} was requested"
        )
    if args.seed is not None:
        cfg.master_seed = args.seed
    result = run_experiment(cfg, workers=args.workers)
    out_dir = Path(args.out or cfg.out or "results")
    out_dir.mkdir(parents=True, exist_ok=True)
    written = {}
    formats = ("csv", "json") if args.format == "both" else (args.format,)
    for fmt in formats:
        target = out_dir / f"{result.name}.{fmt}"
        emit_report(result, fmt, target)
        written[fmt] = str(target)
    if not args.no_figure:
        from .figures import render_result  # matplotlib import stays optional

        fig_path = out_dir / f"{result.name}.png"
        render_result(result, fig_path)
        written["figure"] = str(fig_path)
    _emit_json({"experiment": result.name, "rows": len(result.rows), "written": written}, None)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cascade-bounds",
        description="Spectral influence bounds and Monte Carlo cascade simulation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, default_format="json"):
        p.add_argument("--config", help="config file path")
        p.add_argument("--seed", type=int, help="master seed override")
        p.add_argument("--out", help="output path")
        p.add_argument(
            "--format", default=default_format, choices=("json", "csv", "both"),
            help="output format",
        )

    p = sub.add_parser("generate", help="generate a network and write its edge list")
    common(p)
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("bound", help="compute influence or percolation bounds")
    common(p)
    p.add_argument("--graph", help="edge-list file")
    p.add_argument("--influencers", help="comma/space separated node ids")
    p.add_argument("--uniform-n0", dest="uniform_n0", type=int, help="uniform-set size")
    p.add_argument("--percolation", action="store_true", help="component-size bounds")
    p.set_defaults(func=_cmd_bound)

    p = sub.add_parser("simulate", help="Monte Carlo influence estimation")
    common(p)
    p.add_argument("--graph", help="edge-list file")
    p.add_argument("--influencers", help="comma/space separated node ids")
    p.add_argument("--uniform-n0", dest="uniform_n0", type=int, help="uniform-set size")
    p.add_argument("--dynamics", choices=_DYNAMICS_CHOICES, help="infection dynamics")
    p.add_argument("--beta", type=float, help="transmission rate")
    p.add_argument("--delta", type=float, help="removal rate")
    p.add_argument("--trials", type=int, help="number of Monte Carlo trials")
    p.add_argument("--workers", type=int, default=1, help="parallel worker count")
    p.add_argument("--dump-trials", help="write one 'trial_index infected_count' line per trial")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("percolate", help="bond-percolation component statistics")
    common(p)
    p.add_argument("--graph", help="edge-list file")
    p.add_argument("--trials", type=int, help="number of percolation draws")
    p.set_defaults(func=_cmd_percolate)

    p = sub.add_parser("experiment", help="run a configured experiment sweep")
    p.add_argument("name", choices=[n for n in EXPERIMENT_NAMES if n != "custom"])
    common(p, default_format="both")
    p.add_argument("--workers", type=int, default=1, help="parallel worker count")
    p.add_argument("--no-figure", action="store_true", help="skip PNG rendering")
    p.set_defaults(func=_cmd_experiment)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "command", None) == "experiment" and args.config is None:
        parser.error("experiment requires --config")
    try:
        return args.func(args)
    except Exception as exc:  # single funnel: machine-readable failure output
        sys.stderr.write(
            json.dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n"
        )
        return 2


if __name__ == "__main__":
    sys.exit(main())
