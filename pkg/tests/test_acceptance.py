"""Acceptance suite: nine criteria, one PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py -v`` (the lines are repeated in
the terminal summary) or directly as a script.
"""

import math

import numpy as np

from fdmimo.channel import sample_channels
from fdmimo.config import SystemConfig
from fdmimo.duplex import (OverheadModel, analytic_sinr_inputs, coherence_threshold,
                           lemma_bounds, reliable_region_check)
from fdmimo.estimation import (estimate_variances, make_pilots, nmse, perfect_estimate,
                               run_pilot_phase)
from fdmimo.rates import (Combo, analytic_rate, asymptotic_rate, instantaneous_sinr,
                          monte_carlo_rates, setup)

SEED = 1
NC, CO = "non-cooperative", "cooperative"
SCENARIOS = (NC, CO)
FILTERS = ("MF", "ZF")
LINKS = ("DL", "UL")
BASE = SystemConfig(n_cells=3, m_tx=16, m_rx=16, k_dl=5, k_ul=5, p_ref_dbm=40.0,
                    cell_radius_m=2000.0, c_dl_bpshz=20.0, c_ul_bpshz=20.0)
GRID_M = (16, 32, 64)

RESULTS: dict[int, str] = {}


def verdict(n: int, ok: bool, detail: str) -> bool:
    line = f"AC{n} {'PASS' if ok else 'FAIL'}: {detail}"
    RESULTS[n] = line
    print(line)
    return ok


def at_m(m: int, config: SystemConfig = BASE) -> SystemConfig:
    return config.with_(m_tx=m, m_rx=m)


# 1 -----------------------------------------------------------------------------

def test_ac1_analytic_matches_monte_carlo():
    trials = 2000
    combos = [Combo(s, f, l) for s in SCENARIOS for f in FILTERS for l in LINKS]
    misses, worst = [], 0.0
    for m in GRID_M:
        cfg = at_m(m)
        prof = setup(cfg, SEED)
        var = estimate_variances(cfg, prof, "nSPT")
        mc = monte_carlo_rates(cfg, "nSPT", combos, trials, SEED, prof)
        for c in combos:
            an = analytic_rate(cfg, prof, var, c.scenario, c.link, c.filter).sum_rate
            rel = abs(mc[c].sum_rate - an) / an
            worst = max(worst, rel)
            if rel > 0.10:
                misses.append(f"M={m} {c.scenario[:6]} {c.filter} {c.link} "
                              f"mc={mc[c].sum_rate:.3f} an={an:.3f} ({rel:.1%})")
    detail = f"{len(misses)}/{len(combos) * len(GRID_M)} combos beyond 10%, worst {worst:.1%}"
    if misses:
        detail += "; " + "; ".join(misses)
    assert verdict(1, not misses, detail), detail


# 2 -----------------------------------------------------------------------------

def _pilot_statistics(cfg, prof, scheme, phases):
    """Per-phase averages of normalized |g_hat|^2 and of the normalized g_hat eps* product."""
    var = estimate_variances(cfg, prof, scheme)
    pilots = make_pilots(cfg, scheme)
    hat_si = np.stack([var.si_hat(b) for b in range(cfg.n_cells)])
    err_si = np.stack([var.si_err(b) for b in range(cfg.n_cells)])
    tables = {"DL": (var.dl_hat[..., None], var.dl_err[..., None]),
              "UL": (var.ul_hat, var.ul_err),
              "SI": (hat_si, err_si)}
    power = {k: np.empty(phases) for k in tables}
    cross = {k: np.empty(phases, complex) for k in tables}
    for t in range(phases):
        real = sample_channels(prof, SEED, t)
        est = run_pilot_phase(cfg, prof, real, pilots, SEED, t, var)
        pairs = {"DL": (est.g_hat_dl, real.g_dl), "UL": (est.g_hat_ul, real.g_ul),
                 "SI": (est.g_hat_si, np.stack([real.g_bs[b, b] for b in range(cfg.n_cells)]))}
        for k, (g_hat, g) in pairs.items():
            vh, ve = tables[k]
            power[k][t] = np.mean(np.abs(g_hat) ** 2 / vh)
            keep = np.broadcast_to(ve > 0, g_hat.shape)
            norm = np.sqrt(np.broadcast_to(vh * ve, g_hat.shape)[keep])
            cross[k][t] = np.mean((g_hat * np.conj(g - g_hat))[keep] / norm)
    return var, power, cross


def _decomposition_error(prof, var) -> float:
    worst = max(np.max(np.abs(var.dl_hat + var.dl_err - prof.d_dl) / prof.d_dl),
                np.max(np.abs(var.ul_hat + var.ul_err - prof.d_ul[..., None]) / prof.d_ul[..., None]))
    for b in range(prof.n_cells):
        worst = max(worst, np.max(np.abs(var.si_hat(b) + var.si_err(b) - prof.d_si) / prof.d_si))
    return float(worst)


def test_ac2_mmse_estimator_suite():
    phases = 10_000
    failures, notes = [], []
    for m in GRID_M:
        cfg = at_m(m)
        prof = setup(cfg, SEED)
        for scheme in ("nSPT", "SPT"):
            var, power, cross = _pilot_statistics(cfg, prof, scheme, phases)
            for k in ("DL", "UL", "SI"):
                mean = power[k].mean()
                se = power[k].std(ddof=1) / math.sqrt(phases)
                z = (mean - 1.0) / se
                if abs(z) >= 3:
                    failures.append(f"M={m} {scheme} {k} var ratio {mean:.4g} ({z:+.1f} se)")
                c = cross[k]
                c_se = math.sqrt(np.mean(np.abs(c - c.mean()) ** 2) / phases)
                if abs(c.mean()) >= 3 * c_se:
                    failures.append(f"M={m} {scheme} {k} cov {abs(c.mean()):.3g} "
                                    f"({abs(c.mean()) / c_se:.1f} se)")
            dec = _decomposition_error(prof, var)
            if dec > 1e-12:
                failures.append(f"M={m} {scheme} decomposition off by {dec:.2g}")
            notes.append(f"M={m} {scheme} dec {dec:.1e}")
    detail = (f"{len(failures)} failed checks of {len(GRID_M) * 2 * 7}"
              + ("; " + "; ".join(failures) if failures else ""))
    assert verdict(2, not failures, detail), detail


# 3 -----------------------------------------------------------------------------

def test_ac3_nmse_properties():
    base = BASE.with_(alpha_db=-50.0, beta_db=-50.0)
    radii = (500.0, 1000.0, 2000.0)
    powers = tuple(float(p) for p in range(0, 41, 5))
    problems = []
    curves = {}
    for r in radii:
        for p_r in powers:
            cfg = base.with_(cell_radius_m=r, p_ref_dbm=p_r)
            prof = setup(cfg, SEED)
            assert cfg.tau_max == cfg.tau_si
            for b in range(cfg.n_cells):
                ns, sp = nmse(cfg, prof, "nSPT", b), nmse(cfg, prof, "SPT", b)
                if not np.all(sp >= ns):
                    problems.append(f"SPT < nSPT at r={r:g} P_r={p_r:g} bs={b}")
                curves.setdefault(("nSPT", r, b), []).append(ns)
                curves.setdefault(("SPT", r, b), []).append(sp)
    for p_idx in range(len(powers)):
        ref = curves[("nSPT", radii[0], 0)][p_idx]
        for r in radii[1:]:
            for b in range(base.n_cells):
                if not np.array_equal(curves[("nSPT", r, b)][p_idx], ref):
                    problems.append(f"nSPT changes with r at P_r={powers[p_idx]:g}")
    for key, seq in curves.items():
        if not np.all(np.diff(np.stack(seq), axis=0) < 0):
            problems.append(f"{key[0]} not strictly decreasing in P_r at r={key[1]:g}")
    detail = ("radius-invariant, ordered and decreasing on the grid" if not problems
              else "; ".join(sorted(set(problems))))
    assert verdict(3, not problems, detail), detail


# 4 -----------------------------------------------------------------------------

def test_ac4_zero_forcing_exactness():
    cfg = SystemConfig(n_cells=1, m_tx=8, m_rx=8, k_dl=4, k_ul=4, p_ref_dbm=40.0,
                       cell_radius_m=2000.0)
    prof = setup(cfg, SEED)
    clean, worst = 0, 0.0
    for t in range(100):
        real = sample_channels(prof, SEED, t)
        est = perfect_estimate(cfg, prof, real)
        ok = True
        for link in LINKS:
            br = instantaneous_sinr(link, NC, "ZF", real, est, cfg)
            ratio = br.terms["intra"] / br.desired
            worst = max(worst, float(ratio.max()))
            ok &= bool(np.all(ratio < 1e-18))
        clean += ok
    detail = f"{clean}/100 trials below 1e-18 on both links, worst ratio {worst:.2e}"
    assert verdict(4, clean == 100, detail), detail


# 5 -----------------------------------------------------------------------------

def _ratio_with_stderr(reps, scenario):
    fd = sum(reps[Combo(scenario, "ZF", l, "FD")].trial_sums for l in LINKS)
    hd = sum(reps[Combo(scenario, "ZF", l, "HD")].trial_sums for l in LINKS)
    ratio = 2.0 * fd.mean() / hd.mean()
    # delta method with paired (common random number) trials
    lin = 2.0 * (fd - fd.mean() / hd.mean() * hd) / hd.mean()
    return ratio, lin.std(ddof=1) / math.sqrt(fd.size)


def test_ac5_fd_hd_ratio_trend():
    trials = 1000
    ms = (16, 32, 64, 128)
    combos = [Combo(s, "ZF", l, d) for s in SCENARIOS for l in LINKS for d in ("FD", "HD")]
    series = {s: [] for s in SCENARIOS}
    for m in ms:
        cfg = at_m(m)
        reps = monte_carlo_rates(cfg, "nSPT", combos, trials, SEED, setup(cfg, SEED))
        for s in SCENARIOS:
            series[s].append(_ratio_with_stderr(reps, s))
    parts, ok = [], True
    for s, seq in series.items():
        drops = [(i, seq[i][0] - seq[i + 1][0], math.hypot(seq[i][1], seq[i + 1][1]))
                 for i in range(len(seq) - 1) if seq[i + 1][0] < seq[i][0]]
        mono = not drops or (len(drops) == 1 and drops[0][1] <= 2 * drops[0][2])
        above = seq[-1][0] > 1.0
        ok &= mono and above
        parts.append(f"{s}: " + " ".join(f"{r:.3f}" for r, _ in seq)
                     + f" (increasing={mono}, >1 at M=128: {above})")
    detail = "; ".join(parts)
    assert verdict(5, ok, detail), detail


# 6 -----------------------------------------------------------------------------

def test_ac6_coherence_ordering():
    rng = np.random.default_rng(SEED)
    bad, examples = 0, []
    for i in range(100):
        m, k = int(rng.integers(4, 129)), int(rng.integers(1, 11))
        cfg = at_m(m).with_(k_dl=k, k_ul=k)
        prof = setup(cfg, SEED + i)
        t_nspt = coherence_threshold(cfg, "nSPT")
        worst = -math.inf
        for f in FILTERS if m >= k else ("MF",):
            x = analytic_sinr_inputs(cfg, prof, "SPT", NC, f)
            worst = max(worst, coherence_threshold(cfg, "SPT", x))
        if not worst <= t_nspt:
            bad += 1
            if len(examples) < 5:
                examples.append(f"M={m} K={k}: SPT {worst:.4g} > nSPT {t_nspt:g}")
    detail = f"{100 - bad}/100 points with T_SPT <= T_nSPT" + (
        "; e.g. " + "; ".join(examples) if examples else "")
    assert verdict(6, bad == 0, detail), detail


# 7 -----------------------------------------------------------------------------

def test_ac7_cooperative_crossover():
    cfg = at_m(128)
    prof = setup(cfg, SEED)
    var = estimate_variances(cfg, prof, "nSPT")
    capacities = np.arange(1, 41)
    parts, ok = [], True
    for f in FILTERS:
        nc = sum(analytic_rate(cfg, prof, var, NC, l, f).sum_rate for l in LINKS)
        co = np.array([sum(analytic_rate(cfg.with_(c_dl_bpshz=float(c), c_ul_bpshz=float(c)),
                                         prof, var, CO, l, f).sum_rate for l in LINKS)
                       for c in capacities])
        mono = bool(np.all(np.diff(co) >= 0))
        above = co >= nc
        cross = bool(np.any(above) and np.any(~above))
        c_star = int(capacities[np.argmax(above)]) if cross else None
        ok &= mono and cross
        parts.append(f"{f}: monotone={mono}, C*={c_star} (coop {co[0]:.2f}->{co[-1]:.2f}, "
                     f"non-coop {nc:.2f})")
    detail = "; ".join(parts)
    assert verdict(7, ok, detail), detail


# 8 -----------------------------------------------------------------------------

def test_ac8_asymptotic_consistency():
    exps = range(6, 15)
    gaps = {(s, f, l): [] for s in SCENARIOS for f in FILTERS for l in LINKS}
    for e in exps:
        cfg = at_m(2 ** e)
        prof = setup(cfg, SEED)
        var = estimate_variances(cfg, prof, "nSPT")
        for (s, f, l), seq in gaps.items():
            an = analytic_rate(cfg, prof, var, s, l, f).sum_rate
            asym = asymptotic_rate(cfg, prof, var, s, l, f).sum_rate
            seq.append(abs(an - asym) / an)
    bad = []
    for (s, f, l), seq in gaps.items():
        mono = bool(np.all(np.diff(seq) < 0))
        if not (mono and seq[-1] < 0.05):
            bad.append(f"{s[:6]} {f} {l}: final {seq[-1]:.1%}, monotone={mono}")
    detail = f"{len(gaps) - len(bad)}/{len(gaps)} combos converge" + (
        "; " + "; ".join(bad) if bad else "")
    assert verdict(8, not bad, detail), detail


# 9 -----------------------------------------------------------------------------

def test_ac9_lemma_sufficiency():
    rng = np.random.default_rng(SEED)
    held = violations = 0
    for i in range(50):
        m = int(rng.integers(8, 129))
        k = int(rng.integers(1, min(m, 10) + 1))
        scheme = ("nSPT", "SPT")[i % 2]
        f = FILTERS[(i // 2) % 2]
        s = SCENARIOS[(i // 4) % 2]
        cfg = at_m(m).with_(k_dl=k, k_ul=k, p_ref_dbm=float(rng.uniform(10.0, 40.0)),
                            cell_radius_m=float(rng.uniform(500.0, 2000.0)))
        T = int(rng.integers(cfg.overhead("nSPT") + 1, 20 * cfg.overhead("nSPT")))
        cfg = cfg.with_(total_symbols=T)
        prof = setup(cfg, SEED + i)
        lem = lemma_bounds(scheme, cfg, analytic_sinr_inputs(cfg, prof, scheme, s, f))
        dl, ul = lem.holds(T, margin=0.01)
        fd_var = estimate_variances(cfg, prof, scheme)
        hd_var = estimate_variances(cfg, prof, "nSPT")
        rep = lambda v, l, d: analytic_rate(cfg, prof, v, s, l, f, d)  # noqa: E731
        region = reliable_region_check(rep(fd_var, "DL", "FD"), rep(fd_var, "UL", "FD"),
                                       rep(hd_var, "DL", "HD"), rep(hd_var, "UL", "HD"),
                                       OverheadModel.from_config(cfg, scheme))
        held += dl + ul
        violations += (dl and not region.dl_holds) + (ul and not region.ul_holds)
    detail = f"Lemma held {held} times over 50 configs, {violations} region violations"
    assert verdict(9, violations == 0 and held > 0, detail), detail


if __name__ == "__main__":
    tests = [v for k, v in sorted(globals().items()) if k.startswith("test_ac")]
    for fn in tests:
        try:
            fn()
        except AssertionError:
            pass
