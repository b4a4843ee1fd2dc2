"""Parameter sweeps, figure recipes and the tabular row format of the runner."""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from typing import Any, Mapping

import numpy as np

from .config import SCENARIOS, SystemConfig
from .duplex import (OverheadModel, analytic_sinr_inputs, lemma_bounds,
                     reliable_region_check)
from .errors import ValidationError
from .estimation import estimate_variances, nmse
from .rates import Combo, analytic_rate, monte_carlo_rates, setup

COLUMNS = ("axis_value", "scenario", "scheme", "filter", "link", "metric", "value",
           "mc_stderr", "seed", "trials")
METRICS = ("sum_rate_mc", "sum_rate_analytic", "nmse", "fd_hd_ratio", "coop_noncoop_ratio",
           "region_verdict", "required_power")
FILTERS = ("MF", "ZF")
LINKS = ("DL", "UL")

# axis aliases -> config fields they drive
AXES = {
    "M": ("m_tx", "m_rx"),
    "K": ("k_dl", "k_ul"),
    "T": ("total_symbols",),
    "P_r": ("p_ref_dbm",),
    "cell_radius": ("cell_radius_m",),
    "C": ("c_dl_bpshz", "c_ul_bpshz"),
    "N": ("n_cells",),
    "alpha": ("alpha_db",),
    "beta": ("beta_db",),
}
INT_FIELDS = {"n_cells", "m_tx", "m_rx", "k_dl", "k_ul", "tau_si", "tau_uu", "tau_ud",
              "total_symbols"}

DEFAULT_CONFIG = SystemConfig(n_cells=3, m_tx=16, m_rx=16, k_dl=5, k_ul=5, p_ref_dbm=40.0,
                              cell_radius_m=2000.0)


def expand_overrides(overrides: Mapping[str, Any]) -> dict[str, Any]:
    """Map axis aliases and raw field names to SystemConfig keyword changes."""
    known = {f.name for f in fields(SystemConfig)}
    out: dict[str, Any] = {}
    for name, value in overrides.items():
        targets = AXES.get(name, (name,))
        for target in targets:
            if target not in known:
                raise ValidationError(f"unknown parameter {name!r}")
            if target in INT_FIELDS and value is not None:
                if isinstance(value, bool) or float(value) != int(value):
                    raise ValidationError(f"{name} must be an integer")
                value = int(value)
            out[target] = value
    return out


@dataclass(frozen=True)
class SweepSpec:
    """One swept axis plus fixed overrides and the metrics to report.

    ``axis=None`` evaluates a single point. ``variants`` repeats the sweep
    with extra overrides (e.g. several cell radii); a variant's label is
    appended to the metric name.
    """

    axis: str | None
    values: tuple = ()
    fixed: Mapping[str, Any] = field(default_factory=dict)
    outputs: tuple[str, ...] = ("sum_rate_analytic",)
    trials: int = 2000
    scenarios: tuple[str, ...] = SCENARIOS
    filters: tuple[str, ...] = FILTERS
    links: tuple[str, ...] = LINKS
    schemes: tuple[str, ...] = ("nSPT",)
    variants: tuple[Mapping[str, Any], ...] = ({},)
    target_rate: float = 0.1

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", tuple(self.values))
        object.__setattr__(self, "outputs", tuple(self.outputs))
        object.__setattr__(self, "variants", tuple(dict(v) for v in self.variants) or ({},))
        if self.axis is None:
            if self.values:
                raise ValidationError("values given without an axis")
        else:
            if self.axis not in AXES and self.axis not in {f.name for f in fields(SystemConfig)}:
                raise ValidationError(f"unknown sweep axis {self.axis!r}")
            if not self.values:
                raise ValidationError("sweep values must be non-empty")
            diffs = np.diff(np.asarray(self.values, dtype=float))
            if not (np.all(diffs > 0) or np.all(diffs < 0)):
                raise ValidationError("sweep values must be strictly monotone")
        for name in self.outputs:
            if name not in METRICS:
                raise ValidationError(f"unknown metric {name!r}")
        for name, allowed in (("scenarios", SCENARIOS), ("filters", FILTERS),
                              ("links", LINKS), ("schemes", ("nSPT", "SPT"))):
            bad = set(getattr(self, name)) - set(allowed)
            if bad:
                raise ValidationError(f"unknown {name}: {sorted(bad)}")
        if self.trials < 0:
            raise ValidationError("trials must be >= 0")
        expand_overrides(self.fixed)
        for v in self.variants:
            expand_overrides(v)

    def points(self) -> list:
        return list(self.values) if self.axis is not None else [None]


def spec_from_mapping(doc: Mapping[str, Any]) -> SweepSpec:
    known = {f.name for f in fields(SweepSpec)}
    unknown = sorted(set(doc) - known)
    if unknown:
        raise ValidationError(f"unknown sweep field(s): {', '.join(unknown)}")
    if "axis" not in doc:
        raise ValidationError("sweep needs an axis (null for a single point)")
    kwargs = dict(doc)
    for name in ("values", "outputs", "scenarios", "filters", "links", "schemes", "variants"):
        if name in kwargs:
            if isinstance(kwargs[name], (str, bytes)) or not isinstance(kwargs[name], (list, tuple)):
                raise ValidationError(f"{name} must be a list")
            kwargs[name] = tuple(kwargs[name])
    return SweepSpec(**kwargs)


_FIG_M = (16, 32, 64, 128)

RECIPES: dict[str, SweepSpec] = {
    # analytic vs Monte Carlo sum rate over M
    "fig3": SweepSpec("M", _FIG_M, {"N": 3, "K": 5, "cell_radius": 2000.0, "P_r": 40.0},
                      ("sum_rate_mc", "sum_rate_analytic")),
    # FD/HD and cooperative/non-cooperative ratios over M
    "fig4": SweepSpec("M", _FIG_M, {"N": 3, "K": 5, "cell_radius": 2000.0, "P_r": 40.0},
                      ("fd_hd_ratio", "coop_noncoop_ratio"), trials=500, filters=("ZF",)),
    # sum rate against fronthaul capacity
    "fig5": SweepSpec("C", tuple(range(1, 41)),
                      {"N": 3, "M": 128, "cell_radius": 2000.0, "K": 5, "P_r": 40.0},
                      ("sum_rate_analytic",)),
    # power needed for 0.1 bps/Hz per link
    "fig6": SweepSpec("M", _FIG_M, {"N": 3, "K": 1, "cell_radius": 2000.0, "T": 800, "C": 20.0},
                      ("required_power",), schemes=("nSPT", "SPT")),
    # SI-channel NMSE against reference power for several radii
    "fig7": SweepSpec("P_r", tuple(range(0, 41, 5)),
                      {"M": 16, "N": 3, "K": 5, "alpha": -50.0, "beta": -50.0},
                      ("nmse",), schemes=("nSPT", "SPT"),
                      variants=({"cell_radius": 500.0}, {"cell_radius": 1000.0},
                                {"cell_radius": 2000.0})),
}


def recipe(name: str) -> SweepSpec:
    try:
        return RECIPES[name]
    except KeyError:
        raise ValidationError(f"unknown recipe {name!r}; expected one of {sorted(RECIPES)}") from None


# evaluation ------------------------------------------------------------------

@dataclass(frozen=True)
class Row:
    axis_value: Any
    scenario: str
    scheme: str
    filter: str
    link: str
    metric: str
    value: float
    mc_stderr: float | None
    seed: int
    trials: int

    def as_tuple(self) -> tuple:
        return tuple(getattr(self, c) for c in COLUMNS)


def point_config(base: SystemConfig, spec: SweepSpec, value, variant: Mapping[str, Any]) -> SystemConfig:
    changes = expand_overrides(spec.fixed)
    changes.update(expand_overrides(variant))
    if spec.axis is not None:
        changes.update(expand_overrides({spec.axis: value}))
    return base.with_(**changes) if changes else base


def _label(metric: str, variant: Mapping[str, Any]) -> str:
    if not variant:
        return metric
    return metric + "@" + ",".join(f"{k}={v:g}" if isinstance(v, float) else f"{k}={v}"
                                   for k, v in variant.items())


def _combos(spec: SweepSpec, duplexes=("FD",)) -> list[Combo]:
    return [Combo(s, f, l, d) for s in spec.scenarios for f in spec.filters
            for l in spec.links for d in duplexes]


def _fd_hd(fd: float, hd: float) -> float:
    # HD time-shares the two links, FD serves both at once
    return 2.0 * fd / hd if hd > 0 else math.nan


def _required_power(cfg: SystemConfig, profile_seed: int, scheme: str, scenario: str,
                    filter: str, link: str, target: float) -> float:
    """Smallest transmit power (dBm) reaching ``target`` bps/Hz per user on ``link``.

    Rates are overhead-adjusted when T is set. Bisection on P_r over the
    closed forms; returns the matching P_d (DL) or P_u (UL) in dBm, or nan
    when the bracket does not contain a solution.
    """
    k = cfg.k_dl if link == "DL" else cfg.k_ul
    factor = 1.0
    if cfg.total_symbols is not None:
        factor = 1.0 - cfg.overhead(scheme) / cfg.total_symbols
    goal = target * k * cfg.n_cells

    def rate(p_dbm: float) -> float:
        c = cfg.with_(p_ref_dbm=p_dbm)
        prof = setup(c, profile_seed)
        var = estimate_variances(c, prof, scheme)
        return factor * analytic_rate(c, prof, var, scenario, link, filter).sum_rate

    lo, hi = -60.0, 90.0
    if rate(hi) < goal:
        return math.nan
    if rate(lo) >= goal:
        hi = lo
    else:
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if rate(mid) >= goal:
                hi = mid
            else:
                lo = mid
            if hi - lo < 1e-6:
                break
    c = cfg.with_(p_ref_dbm=hi)
    power = c.p_dl_mw if link == "DL" else c.p_ul_mw
    return 10.0 * math.log10(power)


def evaluate_point(base: SystemConfig, spec: SweepSpec, value, seed: int) -> list[Row]:
    """All requested metrics at one axis value (all variants)."""
    rows: list[Row] = []
    for variant in spec.variants:
        cfg = point_config(base, spec, value, variant)
        prof = setup(cfg, seed)
        for metric in spec.outputs:
            label = _label(metric, variant)
            rows.extend(_METRIC_FUNCS[metric](cfg, prof, spec, value, seed, label))
    return rows


def _sum_rate_mc(cfg, prof, spec, value, seed, label):
    if spec.trials < 1:
        raise ValidationError("sum_rate_mc needs trials >= 1")
    rows = []
    for scheme in spec.schemes:
        reps = monte_carlo_rates(cfg, scheme, _combos(spec), spec.trials, seed, prof)
        for c, r in reps.items():
            rows.append(Row(value, c.scenario, scheme, c.filter, c.link, label, r.sum_rate,
                            r.sum_stderr, seed, spec.trials))
    return rows


def _sum_rate_analytic(cfg, prof, spec, value, seed, label):
    rows = []
    for scheme in spec.schemes:
        var = estimate_variances(cfg, prof, scheme)
        for c in _combos(spec):
            r = analytic_rate(cfg, prof, var, c.scenario, c.link, c.filter)
            rows.append(Row(value, c.scenario, scheme, c.filter, c.link, label, r.sum_rate,
                            None, seed, 0))
    return rows


def _nmse(cfg, prof, spec, value, seed, label):
    rows = []
    for scheme in spec.schemes:
        v = float(np.mean([nmse(cfg, prof, scheme, b).mean() for b in range(cfg.n_cells)]))
        rows.append(Row(value, "-", scheme, "-", "SI", label, v, None, seed, 0))
    return rows


def _both_links(reps: Mapping[Combo, Any], scenario: str, filter: str, duplex: str):
    return [reps[Combo(scenario, filter, link, duplex)] for link in LINKS]


def _fd_hd_ratio(cfg, prof, spec, value, seed, label):
    rows = []
    for scheme in spec.schemes:
        if spec.trials >= 1:
            reps = monte_carlo_rates(cfg, scheme, [Combo(s, f, l, d) for s in spec.scenarios
                                                   for f in spec.filters for l in LINKS
                                                   for d in ("FD", "HD")],
                                     spec.trials, seed, prof)
            get = lambda s, f, d: sum(r.sum_rate for r in _both_links(reps, s, f, d))  # noqa: E731
        else:
            fd_var = estimate_variances(cfg, prof, scheme)
            hd_var = estimate_variances(cfg, prof, "nSPT")
            get = lambda s, f, d: sum(  # noqa: E731
                analytic_rate(cfg, prof, fd_var if d == "FD" else hd_var, s, l, f, d).sum_rate
                for l in LINKS)
        for s in spec.scenarios:
            for f in spec.filters:
                rows.append(Row(value, s, scheme, f, "DL+UL", label,
                                _fd_hd(get(s, f, "FD"), get(s, f, "HD")), None, seed, spec.trials))
    return rows


def _coop_noncoop_ratio(cfg, prof, spec, value, seed, label):
    rows = []
    for scheme in spec.schemes:
        if spec.trials >= 1:
            reps = monte_carlo_rates(cfg, scheme, [Combo(s, f, l) for s in SCENARIOS
                                                   for f in spec.filters for l in LINKS],
                                     spec.trials, seed, prof)
            get = lambda s, f: sum(r.sum_rate for r in _both_links(reps, s, f, "FD"))  # noqa: E731
        else:
            var = estimate_variances(cfg, prof, scheme)
            get = lambda s, f: sum(analytic_rate(cfg, prof, var, s, l, f).sum_rate  # noqa: E731
                                   for l in LINKS)
        for f in spec.filters:
            nc = get("non-cooperative", f)
            ratio = get("cooperative", f) / nc if nc > 0 else math.nan
            rows.append(Row(value, "cooperative/non-cooperative", scheme, f, "DL+UL", label,
                            ratio, None, seed, spec.trials))
    return rows


def _region_verdict(cfg, prof, spec, value, seed, label):
    if cfg.total_symbols is None:
        raise ValidationError("region_verdict needs total_symbols (T)")
    rows = []
    hd_var = estimate_variances(cfg, prof, "nSPT")
    for scheme in spec.schemes:
        fd_var = estimate_variances(cfg, prof, scheme)
        over = OverheadModel.from_config(cfg, scheme)
        for s in spec.scenarios:
            for f in spec.filters:
                rep = lambda v, l, d: analytic_rate(cfg, prof, v, s, l, f, d)  # noqa: E731
                lemma = lemma_bounds(scheme, cfg, analytic_sinr_inputs(cfg, prof, scheme, s, f))
                verdict = reliable_region_check(rep(fd_var, "DL", "FD"), rep(fd_var, "UL", "FD"),
                                                rep(hd_var, "DL", "HD"), rep(hd_var, "UL", "HD"),
                                                over, lemma)
                flags = {"DL": verdict.dl_holds, "UL": verdict.ul_holds,
                         "joint": verdict.joint_holds}
                for link in ("DL", "UL", "joint"):
                    rows.append(Row(value, s, scheme, f, link, label, float(flags[link]),
                                    None, seed, 0))
                    rows.append(Row(value, s, scheme, f, link, label + "_margin",
                                    verdict.margins[link], None, seed, 0))
                rows.append(Row(value, s, scheme, f, "-", label + "_t_cohe_symbols",
                                lemma.t_cohe_symbols, None, seed, 0))
    return rows


def _required(cfg, prof, spec, value, seed, label):
    rows = []
    for scheme in spec.schemes:
        for c in _combos(spec):
            p = _required_power(cfg, seed, scheme, c.scenario, c.filter, c.link, spec.target_rate)
            rows.append(Row(value, c.scenario, scheme, c.filter, c.link, label, p, None, seed, 0))
    return rows


_METRIC_FUNCS = {
    "sum_rate_mc": _sum_rate_mc,
    "sum_rate_analytic": _sum_rate_analytic,
    "nmse": _nmse,
    "fd_hd_ratio": _fd_hd_ratio,
    "coop_noncoop_ratio": _coop_noncoop_ratio,
    "region_verdict": _region_verdict,
    "required_power": _required,
}


def _evaluate_args(args):
    return evaluate_point(*args)


def run_sweep(base: SystemConfig, spec: SweepSpec, seed: int, workers: int = 1) -> list[Row]:
    """Evaluate every sweep point; rows come back in axis order whatever the worker count."""
    jobs = [(base, spec, value, seed) for value in spec.points()]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_evaluate_args, jobs))
    else:
        parts = [_evaluate_args(j) for j in jobs]
    return [row for part in parts for row in part]


# serialization -----------------------------------------------------------------

def format_number(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".12g")


def to_csv(rows: list[Row]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COLUMNS)
    for row in rows:
        writer.writerow([v if isinstance(v, str) else format_number(v) for v in row.as_tuple()])
    return buf.getvalue()


def to_json(rows: list[Row]) -> str:
    def clean(v):
        if v is None or isinstance(v, str):
            return v
        if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
            return int(v)
        v = float(v)
        return v if math.isfinite(v) else format_number(v)

    doc = {"columns": list(COLUMNS),
           "rows": [{c: clean(v) for c, v in zip(COLUMNS, r.as_tuple())} for r in rows]}
    return json.dumps(doc, indent=1) + "\n"
