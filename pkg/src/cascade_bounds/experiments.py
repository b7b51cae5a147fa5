"""Experiment harness: config parsing, sweep runners, and report emission.

Configs are flat ``key = value`` text with one ``[experiment]`` section and
one ``[network <family>]`` section per network; ``#`` starts a comment.  Every
runner returns an :class:`ExperimentResult` whose rows are plot-ready and
byte-stable: rerunning with the same config and master seed reproduces the
CSV and JSON outputs exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .bounds import (
    er_giant_fraction,
    influence_bound_any_set,
    influence_bound_uniform,
)
from .generators import CalibrationError, GeneratorSpec, calibrate_uniform_p, complete_uniform, generate
from .graph import InfluencerSet, hazard_from_prob, with_uniform_p
from .simulate import (
    DynamicsSpec,
    estimate_influence,
    estimate_influence_uniform,
    estimate_percolation,
)

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "ExperimentResult",
    "EXPERIMENT_NAMES",
    "parse_config_sections",
    "run_fig1",
    "run_fig2",
    "run_fig3",
    "run_percolation_er",
    "run_experiment",
    "emit_report",
    "format_float",
]

EXPERIMENT_NAMES = ("fig1", "fig2", "fig3_sub", "fig3_super", "percolation_er", "custom")
_ROW_SEED_STRIDE = 1_000_003
_NETWORK_SEED_STRIDE = 7_919


class ConfigError(ValueError):
    """Malformed or inconsistent experiment configuration."""


def parse_config_sections(text: str, path: str = "<config>"):
    """Parse the section/key-value grammar; errors carry line numbers."""
    sections: list[tuple[str, dict, int]] = []
    current: dict | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"{path}:{lineno}: unterminated section header {line!r}")
            name = line[1:-1].strip()
            if not name:
                raise ConfigError(f"{path}:{lineno}: empty section name")
            current = {}
            sections.append((name, current, lineno))
            continue
        if current is None:
            raise ConfigError(f"{path}:{lineno}: key-value pair outside any section")
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key = key.strip()
        if key in current:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
        current[key] = value.strip()
    return sections


def _as_int(path, section, key, value) -> int:
    try:
        return int(value)
    except ValueError:
        raise ConfigError(f"{path}: [{section}] {key} = {value!r} is not an integer") from None


def _as_float(path, section, key, value) -> float:
    try:
        return float(value)
    except ValueError:
        raise ConfigError(f"{path}: [{section}] {key} = {value!r} is not a number") from None


def _as_float_list(path, section, key, value) -> list[float]:
    try:
        out = [float(tok) for tok in value.split()]
    except ValueError:
        raise ConfigError(f"{path}: [{section}] {key} = {value!r} is not a number list") from None
    if not out:
        raise ConfigError(f"{path}: [{section}] {key} must be a nonempty list")
    if sorted(out) != out:
        raise ConfigError(f"{path}: [{section}] {key} must be sorted ascending")
    return out


_NETWORK_NUMERIC_INT = ("n", "m", "k", "rows", "cols", "influencer")


def _network_spec(path, family, raw: dict, default_seed: int):
    params: dict = {}
    seed = default_seed
    edge_probability = None
    influencers = [0]
    for key, value in raw.items():
        if key == "seed":
            seed = _as_int(path, family, key, value)
        elif key == "edge_probability":
            edge_probability = _as_float(path, family, key, value)
        elif key == "influencers":
            influencers = [int(tok) for tok in value.split()]
        elif key == "weights":
            params[key] = _as_float_list(path, family, key, value)
        elif key in _NETWORK_NUMERIC_INT:
            params[key] = _as_int(path, family, key, value)
        else:
            params[key] = _as_float(path, family, key, value)
    if family == "totally_connected":
        params.setdefault("a", 0.5)
        params.setdefault("b", 0.5)
        influencers = [int(params.get("influencer", 0))]
    spec = GeneratorSpec(family, params, edge_probability, seed)
    return spec, influencers


@dataclass
class ExperimentConfig:
    """Parsed experiment description; grids are validated nonempty and sorted."""

    name: str
    trials: int = 10_000
    master_seed: int = 0
    n0: int = 1
    rho_grid: list = field(default_factory=list)
    n_grid: list = field(default_factory=list)
    c_grid: list = field(default_factory=list)
    n: int | None = None
    out: str | None = None
    networks: list = field(default_factory=list)        # list[GeneratorSpec]
    influencer_sets: list = field(default_factory=list)  # list[list[int]]

    @classmethod
    def from_text(cls, text: str, path: str = "<config>") -> "ExperimentConfig":
        sections = parse_config_sections(text, path)
        exp_raw = None
        networks: list[GeneratorSpec] = []
        influencer_sets: list[list[int]] = []
        pending_nets: list[tuple[str, dict]] = []
        for name, kv, lineno in sections:
            if name == "experiment":
                if exp_raw is not None:
                    raise ConfigError(f"{path}:{lineno}: duplicate [experiment] section")
                exp_raw = kv
            elif name.startswith("network"):
                family = name[len("network"):].strip()
                if not family:
                    raise ConfigError(f"{path}:{lineno}: section must name a family: [network <family>]")
                pending_nets.append((family, kv))
            else:
                raise ConfigError(f"{path}:{lineno}: unknown section [{name}]")
        if exp_raw is None:
            raise ConfigError(f"{path}: missing [experiment] section")
        if "name" not in exp_raw:
            raise ConfigError(f"{path}: [experiment] requires a name")
        name = exp_raw["name"]
        if name not in EXPERIMENT_NAMES:
            raise ConfigError(
                f"{path}: unknown experiment {name!r}; expected one of {', '.join(EXPERIMENT_NAMES)}"
            )
        cfg = cls(name=name)
        if "trials" in exp_raw:
            cfg.trials = _as_int(path, "experiment", "trials", exp_raw["trials"])
        if "master_seed" in exp_raw:
            cfg.master_seed = _as_int(path, "experiment", "master_seed", exp_raw["master_seed"])
        if "n0" in exp_raw:
            cfg.n0 = _as_int(path, "experiment", "n0", exp_raw["n0"])
        if "rho_grid" in exp_raw:
            cfg.rho_grid = _as_float_list(path, "experiment", "rho_grid", exp_raw["rho_grid"])
        if "n_grid" in exp_raw:
            cfg.n_grid = [int(v) for v in _as_float_list(path, "experiment", "n_grid", exp_raw["n_grid"])]
        if "c_grid" in exp_raw:
            cfg.c_grid = _as_float_list(path, "experiment", "c_grid", exp_raw["c_grid"])
        if "n" in exp_raw:
            cfg.n = _as_int(path, "experiment", "n", exp_raw["n"])
        if "out" in exp_raw:
            cfg.out = exp_raw["out"]
        for idx, (family, kv) in enumerate(pending_nets):
            default_seed = cfg.master_seed + _NETWORK_SEED_STRIDE * (idx + 1)
            spec, influencers = _network_spec(path, family, kv, default_seed)
            networks.append(spec)
            influencer_sets.append(influencers)
        cfg.networks = networks
        cfg.influencer_sets = influencer_sets
        cfg.validate(path)
        return cfg

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_text(fh.read(), str(path))

    def validate(self, path: str = "<config>") -> None:
        if self.trials < 1:
            raise ConfigError(f"{path}: trials must be >= 1")
        if self.n0 < 1:
            raise ConfigError(f"{path}: n0 must be >= 1")
        if self.name in ("fig1", "fig2"):
            if not self.networks:
                raise ConfigError(f"{path}: {self.name} requires at least one [network] section")
            if not self.rho_grid:
                raise ConfigError(f"{path}: {self.name} requires rho_grid")
            if self.rho_grid[0] < 0:
                raise ConfigError(f"{path}: rho_grid values must be nonnegative")
        elif self.name in ("fig3_sub", "fig3_super"):
            if not self.networks:
                raise ConfigError(f"{path}: {self.name} requires at least one [network] section")
            if not self.n_grid:
                raise ConfigError(f"{path}: {self.name} requires n_grid")
            if self.n_grid[0] <= self.n0:
                raise ConfigError(
                    f"{path}: every n in n_grid must exceed n0={self.n0} "
                    f"(smallest is {self.n_grid[0]})"
                )
        elif self.name == "percolation_er":
            if not self.c_grid:
                raise ConfigError(f"{path}: percolation_er requires c_grid")
            if self.c_grid[0] <= 0:
                raise ConfigError(f"{path}: c_grid values must be positive")
            if self.n is None or self.n < 2:
                raise ConfigError(f"{path}: percolation_er requires n >= 2")

    def to_json_dict(self) -> dict:
        return {
            "name": self.name,
            "trials": self.trials,
            "master_seed": self.master_seed,
            "n0": self.n0,
            "rho_grid": list(self.rho_grid),
            "n_grid": list(self.n_grid),
            "c_grid": list(self.c_grid),
            "n": self.n,
            "out": self.out,
            "networks": [s.to_json_dict() for s in self.networks],
            "influencer_sets": [list(s) for s in self.influencer_sets],
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "ExperimentConfig":
        """Rebuild a config from the JSON echo emitted with every report."""
        cfg = cls(
            name=data["name"],
            trials=data["trials"],
            master_seed=data["master_seed"],
            n0=data["n0"],
            rho_grid=list(data.get("rho_grid") or []),
            n_grid=[int(v) for v in data.get("n_grid") or []],
            c_grid=list(data.get("c_grid") or []),
            n=data.get("n"),
            out=data.get("out"),
            networks=[
                GeneratorSpec(
                    s["family"], dict(s["params"]), s["edge_probability"], s["seed"]
                )
                for s in data.get("networks") or []
            ],
            influencer_sets=[list(s) for s in data.get("influencer_sets") or []],
        )
        cfg.validate("<echo>")
        return cfg


@dataclass
class ExperimentResult:
    """Plot-ready rows plus everything needed to reproduce them."""

    name: str
    header: list
    rows: list
    meta: dict


def _row_seed(master_seed: int, row_index: int) -> int:
    return master_seed + _ROW_SEED_STRIDE * (row_index + 1)


def _family_label(spec: GeneratorSpec, index: int, specs: list) -> str:
    # disambiguate repeated families by position
    same = [i for i, s in enumerate(specs) if s.family == spec.family]
    if len(same) == 1:
        return spec.family
    return f"{spec.family}#{same.index(index)}"


def run_fig1(cfg: ExperimentConfig, workers: int = 1) -> ExperimentResult:
    """Fixed-influencer sweep: empirical influence against the worst-case bound."""
    rows = []
    seeds = []
    failures = []
    dyn = DynamicsSpec.dtic()
    row_index = 0
    for net_idx, spec in enumerate(cfg.networks):
        label = _family_label(spec, net_idx, cfg.networks)
        topology = generate(spec)
        a = InfluencerSet(cfg.influencer_sets[net_idx])
        a.validate_for(topology.n)
        n0 = a.n0
        for rho_target in cfg.rho_grid:
            seed = _row_seed(cfg.master_seed, row_index)
            row_index += 1
            if rho_target == 0.0:
                rows.append((label, 0.0, float(n0), 0.0, float(n0)))
                seeds.append(seed)
                continue
            try:
                p = calibrate_uniform_p(topology, a, rho_target)
            except CalibrationError as exc:
                failures.append({"family": label, "rho": rho_target, "error": str(exc)})
                continue
            g = with_uniform_p(topology, p)
            report = influence_bound_any_set(hazard_from_prob(g), a)
            est = estimate_influence(g, a, dyn, cfg.trials, seed, workers=workers)
            rows.append((label, report.rho, est.mean, est.std_error, report.bound_sigma))
            seeds.append(seed)
    meta = {
        "config": cfg.to_json_dict(),
        "row_seeds": seeds,
        "failures": failures,
        "dynamics": dyn.to_json_dict(),
        "bound": "worst_case_set",
    }
    return ExperimentResult("fig1", ["family", "rho_cA", "sigma_hat", "se", "bound"], rows, meta)


def run_fig2(cfg: ExperimentConfig, workers: int = 1) -> ExperimentResult:
    """Uniform-influencer sweep against the average-case bound.

    Sub-critical rows also record the closed-form bound ``n0 / (1 - rho)``
    and whether the estimate stays under it; that is where the closed form
    is expected to be tight.
    """
    rows = []
    seeds = []
    failures = []
    closed_forms = []
    dyn = DynamicsSpec.dtic()
    row_index = 0
    for net_idx, spec in enumerate(cfg.networks):
        label = _family_label(spec, net_idx, cfg.networks)
        topology = generate(spec)
        for rho_target in cfg.rho_grid:
            seed = _row_seed(cfg.master_seed, row_index)
            row_index += 1
            if rho_target == 0.0:
                rows.append((label, 0.0, float(cfg.n0), 0.0, float(cfg.n0)))
                seeds.append(seed)
                closed_forms.append(
                    {"family": label, "closed_form": float(cfg.n0), "dominated": True}
                )
                continue
            try:
                p = calibrate_uniform_p(topology, None, rho_target)
            except CalibrationError as exc:
                failures.append({"family": label, "rho": rho_target, "error": str(exc)})
                continue
            g = with_uniform_p(topology, p)
            report = influence_bound_uniform(hazard_from_prob(g), cfg.n0)
            est = estimate_influence_uniform(g, cfg.n0, dyn, cfg.trials, seed, workers=workers)
            rows.append((label, report.rho, est.mean, est.std_error, report.bound_sigma))
            seeds.append(seed)
            closed_forms.append(
                {
                    "family": label,
                    "closed_form": report.closed_form_bound,
                    "dominated": bool(
                        report.rho >= 1.0
                        or est.mean - 3 * est.std_error <= report.closed_form_bound
                    ),
                }
            )
    meta = {
        "config": cfg.to_json_dict(),
        "row_seeds": seeds,
        "failures": failures,
        "dynamics": dyn.to_json_dict(),
        "bound": "uniform_set",
        "closed_forms": closed_forms,
    }
    return ExperimentResult(
        "fig2", ["family", "rho_c", "sigma_uniform_hat", "se", "bound"], rows, meta
    )


def _resize_spec(spec: GeneratorSpec, n: int) -> GeneratorSpec:
    params = dict(spec.params)
    if spec.family == "grid_2d":
        side = max(2, int(round(math.sqrt(n))))
        params["rows"] = side
        params["cols"] = side
    elif spec.family == "chung_lu":
        raise ConfigError("chung_lu networks have a fixed weight vector and cannot be resized")
    else:
        params["n"] = n
    return GeneratorSpec(spec.family, params, spec.edge_probability, spec.seed)


def _loglog_fit(ns, ys):
    x = np.log(np.asarray(ns, dtype=float))
    y = np.log(np.maximum(np.asarray(ys, dtype=float), 1e-300))
    slope, intercept = np.polyfit(x, y, 1)
    pred = slope * x + intercept
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return float(slope), r2


def run_fig3(cfg: ExperimentConfig, regime: str, workers: int = 1) -> ExperimentResult:
    """Influence against network size at a pinned spectral radius.

    ``regime`` selects the radius target: 0.5 (``sub``) or 1.5 (``super``).
    The fitted log-log exponents of the empirical and bound curves land in the
    summary metadata.
    """
    if regime not in ("sub", "super"):
        raise ConfigError(f"fig3 regime must be 'sub' or 'super', got {regime!r}")
    target = 0.5 if regime == "sub" else 1.5
    rows = []
    seeds = []
    failures = []
    dyn = DynamicsSpec.dtic()
    fits = {}
    row_index = 0
    for net_idx, spec in enumerate(cfg.networks):
        label = _family_label(spec, net_idx, cfg.networks)
        a = InfluencerSet(cfg.influencer_sets[net_idx])
        ns, sigmas, bound_vals = [], [], []
        for n in cfg.n_grid:
            seed = _row_seed(cfg.master_seed, row_index)
            row_index += 1
            topology = generate(_resize_spec(spec, n))
            a.validate_for(topology.n)
            try:
                p = calibrate_uniform_p(topology, a, target)
            except CalibrationError as exc:
                failures.append({"family": label, "n": n, "error": str(exc)})
                continue
            g = with_uniform_p(topology, p)
            report = influence_bound_any_set(hazard_from_prob(g), a)
            est = estimate_influence(g, a, dyn, cfg.trials, seed, workers=workers)
            rows.append((label, topology.n, est.mean, est.std_error, report.bound_sigma))
            seeds.append(seed)
            ns.append(topology.n)
            sigmas.append(est.mean)
            bound_vals.append(report.bound_sigma)
        if len(ns) >= 2:
            sig_slope, sig_r2 = _loglog_fit(ns, sigmas)
            bnd_slope, bnd_r2 = _loglog_fit(ns, bound_vals)
            fits[label] = {
                "sigma_exponent": sig_slope,
                "sigma_r2": sig_r2,
                "bound_exponent": bnd_slope,
                "bound_r2": bnd_r2,
            }
    meta = {
        "config": cfg.to_json_dict(),
        "row_seeds": seeds,
        "failures": failures,
        "dynamics": dyn.to_json_dict(),
        "rho_target": target,
        "fits": fits,
    }
    return ExperimentResult(
        f"fig3_{regime}", ["family", "n", "sigma_hat", "se", "bound"], rows, meta
    )


def run_percolation_er(cfg: ExperimentConfig, workers: int = 1) -> ExperimentResult:
    """Largest-component sweep over mean degree, with the component bound."""
    n = cfg.n
    rows = []
    seeds = []
    dominance = []
    for row_index, c in enumerate(cfg.c_grid):
        seed = _row_seed(cfg.master_seed, row_index)
        if c >= n:
            raise ConfigError(f"mean degree c={c} requires c < n={n}")
        g = complete_uniform(n, c / n)
        est = estimate_percolation(g, cfg.trials, seed)
        beta = er_giant_fraction(c)
        bound = est.bounds.bound_c1
        rows.append((c, est.mean_c1 / n, beta, bound))
        seeds.append(seed)
        dominance.append(bool(est.mean_c1 <= bound))
    meta = {
        "config": cfg.to_json_dict(),
        "row_seeds": seeds,
        "dominance": dominance,
        "all_dominated": bool(all(dominance)),
    }
    return ExperimentResult(
        "percolation_er",
        ["c", "mean_C1_over_n", "beta_c", "bound_n_sqrt_gamma3"],
        rows,
        meta,
    )


def run_experiment(cfg: ExperimentConfig, workers: int = 1) -> ExperimentResult:
    if cfg.name == "fig1":
        return run_fig1(cfg, workers)
    if cfg.name == "fig2":
        return run_fig2(cfg, workers)
    if cfg.name == "fig3_sub":
        return run_fig3(cfg, "sub", workers)
    if cfg.name == "fig3_super":
        return run_fig3(cfg, "super", workers)
    if cfg.name == "percolation_er":
        return run_percolation_er(cfg, workers)
    raise ConfigError(f"experiment {cfg.name!r} has no built-in runner")


def format_float(x: float) -> str:
    """17-significant-digit decimal form; round-trips float64 exactly."""
    return format(float(x), ".17g")


def _format_cell(v) -> str:
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, float):
        return format_float(v)
    return str(v)


def emit_report(result: ExperimentResult, fmt: str, path) -> None:
    """Write rows as CSV or the full result as JSON; output is byte-stable."""
    if fmt == "csv":
        lines = [",".join(result.header)]
        lines.extend(",".join(_format_cell(v) for v in row) for row in result.rows)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
    elif fmt == "json":
        payload = {
            "experiment": result.name,
            "header": list(result.header),
            "rows": [list(row) for row in result.rows],
            "meta": result.meta,
        }
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    else:
        raise ConfigError(f"unknown report format {fmt!r}; expected 'csv' or 'json'")
