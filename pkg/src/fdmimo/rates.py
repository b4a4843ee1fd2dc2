"""Per-user SINR breakdowns, Monte Carlo ergodic rates and closed forms.

Instantaneous SINRs are conditional second moments: given one channel
realization and its estimates, every labeled term of the received-signal
expansion is averaged over data symbols, Tx noise, Rx distortion,
quantization noise and thermal noise. The Monte Carlo rate then averages
log2(1 + SINR) over channel and pilot-phase draws.

Per-user arrays are shaped (N, K): cell first, user second.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .channel import FAMILY_SYMBOLS, LargeScaleProfile, build_profile, sample_channels, substream
from .config import SystemConfig, place_users
from .errors import ContractError, DomainError, ValidationError
from .estimation import (ChannelEstimate, EstimateVariances, estimate_variances, make_pilots,
                         perfect_estimate, run_pilot_phase)
from .transceivers import (Detector, Precoder, build_detector, build_precoder, global_dl,
                           global_ul, quantization_noise_power)

TERMS = ("intra", "inter", "ue_ue", "residual_si", "bs_bs", "est_error", "tx_noise",
         "rx_distortion", "quantization", "noise")
FD_ONLY = ("ue_ue", "residual_si", "bs_bs", "tx_noise", "rx_distortion")
LINKS = ("DL", "UL")
DUPLEX = ("FD", "HD")


@dataclass(frozen=True)
class SinrBreakdown:
    """Desired power and labeled interference powers, one entry per user."""

    desired: np.ndarray
    terms: dict[str, np.ndarray]

    @property
    def interference(self) -> np.ndarray:
        return sum(self.terms[t] for t in TERMS)

    @property
    def sinr(self) -> np.ndarray:
        den = self.interference
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(self.desired > 0, self.desired / den, 0.0)
        return np.where(np.isnan(out), 0.0, out)

    def user(self, cell: int, k: int) -> dict[str, float]:
        row = {t: float(self.terms[t][cell, k]) for t in TERMS}
        row["desired"] = float(self.desired[cell, k])
        row["sinr"] = float(self.sinr[cell, k])
        return row


def _breakdown(desired: np.ndarray, **terms: np.ndarray) -> SinrBreakdown:
    full = {t: np.real(terms.get(t, np.zeros_like(desired))).astype(float) for t in TERMS}
    return SinrBreakdown(np.real(desired).astype(float), full)


def _zero_fd(parts: dict[str, np.ndarray], duplex: str) -> dict[str, np.ndarray]:
    if duplex == "HD":
        for t in FD_ONLY:
            if t in parts:
                parts[t] = np.zeros_like(parts[t])
    return parts


def _rownorm2(a: np.ndarray) -> np.ndarray:
    return np.sum(np.abs(a) ** 2, axis=-1)


def _block_diag(blocks: np.ndarray) -> np.ndarray:
    n, r, c = blocks.shape
    out = np.zeros((n * r, n * c), dtype=blocks.dtype)
    for i in range(n):
        out[i * r:(i + 1) * r, i * c:(i + 1) * c] = blocks[i]
    return out


def _full_bs(g_bs: np.ndarray) -> np.ndarray:
    n, _, m_rx, m_tx = g_bs.shape
    return np.transpose(g_bs, (0, 2, 1, 3)).reshape(n * m_rx, n * m_tx)


# instantaneous SINR ----------------------------------------------------------

def _dl_noncoop(cfg, real, est, prec: Precoder, duplex):
    p_d, p_u = cfg.p_dl_mw, cfg.p_ul_mw
    g, f = real.g_dl, prec.f
    n, k = g.shape[0], g.shape[2]
    cells = np.arange(n)
    own = g[cells, cells]  # (N, K, M)
    own_hat = est.g_hat_dl[cells, cells]
    a = np.einsum("jikm,jml->jikl", g, f)  # BS j's beams seen by user (i, k)
    d_hat = np.einsum("ikm,iml->ikl", own_hat, f)
    d_err = np.einsum("ikm,iml->ikl", own - own_hat, f)
    diag = np.arange(k)
    own_a = np.abs(a[cells, cells]) ** 2  # (N, K, K)
    off = ~np.eye(k, dtype=bool)  # summed directly: subtracting the diagonal would drown ZF residues
    intra = np.where(off, own_a, 0.0).sum(-1)
    other = ~np.eye(n, dtype=bool)[:, :, None]  # [j, i] with j != i
    inter = np.where(other, (np.abs(a) ** 2).sum(-1), 0.0).sum(0)
    ue = p_u * np.sum(np.abs(real.g_ue) ** 2, axis=(1, 2))  # (N, K_DL)
    parts = dict(intra=p_d * intra, inter=p_d * inter, ue_ue=ue,
                 est_error=p_d * np.abs(d_err[:, diag, diag]) ** 2,
                 noise=np.full((n, k), cfg.noise_mw))
    return _breakdown(p_d * np.abs(d_hat[:, diag, diag]) ** 2, **_zero_fd(parts, duplex))


def _ul_noncoop(cfg, real, est, prec: Precoder, det: Detector, duplex):
    p_d, p_u, n0 = cfg.p_dl_mw, cfg.p_ul_mw, cfg.noise_mw
    a, bta = cfg.alpha, cfg.beta
    g, w, f = real.g_ul, det.w, prec.f
    n, k = g.shape[0], g.shape[2]
    cells = np.arange(n)
    diag = np.arange(k)
    b = np.einsum("ikm,icum->ikcu", w, g)  # detector of cell i on user (c, u)
    own = np.abs(b[cells, :, cells]) ** 2  # (N, K, K)
    intra = np.where(~np.eye(k, dtype=bool), own, 0.0).sum(-1)
    other = ~np.eye(n, dtype=bool)[:, None, :]  # [i, c] with c != i
    inter = np.where(other, (np.abs(b) ** 2).sum(-1), 0.0).sum(-1)
    g_own = g[cells, cells]
    hat_own = est.g_hat_ul[cells, cells]
    desired = np.abs(np.einsum("ikm,ikm->ik", w, hat_own)) ** 2
    err = np.abs(np.einsum("ikm,ikm->ik", w, g_own - hat_own)) ** 2
    resid = np.zeros((n, k))
    bsbs = np.zeros((n, k))
    txn = np.zeros((n, k))
    rxd = np.zeros((n, k))
    if duplex == "FD":
        for i in range(n):
            g_si = real.g_bs[i, i]
            si_f = g_si @ f[i]
            resid[i] = _rownorm2(w[i] @ ((g_si - est.g_hat_si[i]) @ f[i]))
            txn[i] = _rownorm2(w[i] @ si_f)
            y_pow = p_d * (1 + a) * _rownorm2(si_f) + n0  # E|y_SI,l|^2
            rxd[i] = (np.abs(w[i]) ** 2) @ y_pow
            for j in range(n):
                if j != i:
                    bsbs[i] += _rownorm2(w[i] @ (real.g_bs[i, j] @ f[j]))
    return _breakdown(p_u * desired, intra=p_u * intra, inter=p_u * inter,
                      residual_si=p_d * resid, bs_bs=p_d * bsbs, est_error=p_u * err,
                      tx_noise=a * p_d * txn, rx_distortion=bta * rxd,
                      noise=n0 * _rownorm2(w))


def _dl_coop(cfg, real, est, prec: Precoder, duplex):
    n, _, k, m = real.g_dl.shape
    p_u, n0 = cfg.p_ul_mw, cfg.noise_mw
    f = prec.f
    g = global_dl(real.g_dl)
    g_hat = global_dl(est.g_hat_dl)
    a = np.abs(g @ f) ** 2  # (NK, NK)
    diag = np.arange(n * k)
    cell = diag // k
    same = cell[:, None] == cell[None, :]
    intra = np.where(same & (diag[:, None] != diag[None, :]), a, 0).sum(-1)
    inter = np.where(same, 0, a).sum(-1)
    desired = np.abs(np.einsum("um,mu->u", g_hat, f)) ** 2
    err = np.abs(np.einsum("um,mu->u", g - g_hat, f)) ** 2
    q = [quantization_noise_power("DL", cfg.c_dl_bpshz, cfg.p_dl_mw,
                                  float(np.sum(np.abs(prec.block(b, m)) ** 2))) for b in range(n)]
    p_s = q[0].symbol_power
    sigma = np.array([x.variance for x in q])
    # sum_b sigma_b^2 ||g_{b -> (i,k)}||^2
    quant = np.einsum("b,bik->ik", sigma, _rownorm2(real.g_dl))
    ue = p_u * np.sum(np.abs(real.g_ue) ** 2, axis=(1, 2))
    parts = dict(intra=p_s * intra.reshape(n, k), inter=p_s * inter.reshape(n, k), ue_ue=ue,
                 est_error=p_s * err.reshape(n, k), quantization=quant,
                 noise=np.full((n, k), n0))
    return _breakdown(p_s * desired.reshape(n, k), **_zero_fd(parts, duplex))


def _ul_coop(cfg, real, est, prec: Precoder, det: Detector, duplex):
    n, _, k, m_rx = real.g_ul.shape
    p_u, n0, a, bta = cfg.p_ul_mw, cfg.noise_mw, cfg.alpha, cfg.beta
    w, f = det.w, prec.f
    p_s = quantization_noise_power("DL", cfg.c_dl_bpshz, cfg.p_dl_mw).symbol_power
    g = global_ul(real.g_ul)
    g_hat = global_ul(est.g_hat_ul)
    b = np.abs(w @ g) ** 2
    diag = np.arange(n * k)
    cell = diag // k
    same = cell[:, None] == cell[None, :]
    intra = np.where(same & (diag[:, None] != diag[None, :]), b, 0).sum(-1)
    inter = np.where(same, 0, b).sum(-1)
    desired = np.abs(np.einsum("um,mu->u", w, g_hat)) ** 2
    err = np.abs(np.einsum("um,mu->u", w, g - g_hat)) ** 2
    g_full = _full_bs(real.g_bs)
    g_diag = _block_diag(np.stack([real.g_bs[j, j] for j in range(n)]))
    g_off = g_full - g_diag
    diag_f = g_diag @ f  # (N M_r, N K_DL)
    fd = duplex == "FD"
    # E||y_j||^2 at each BS before quantization
    y_pow = np.empty(n)
    for j in range(n):
        rows = slice(j * m_rx, (j + 1) * m_rx)
        e = p_u * np.sum(np.abs(g[rows]) ** 2) + m_rx * n0
        if fd:
            si = np.sum(np.abs(diag_f[rows]) ** 2)
            e += p_s * np.sum(np.abs(g_off[rows] @ f) ** 2) + p_s * si
            e += a * p_s * si + bta * (p_s * (1 + a) * si + m_rx * n0)
        y_pow[j] = e
    sigma = np.array([quantization_noise_power("UL", cfg.c_ul_bpshz, e).variance for e in y_pow])
    w_blocks = np.abs(w.reshape(n * k, n, m_rx)) ** 2
    quant = w_blocks.sum(-1) @ sigma
    zeros = np.zeros(n * k)
    if fd:
        bsbs = p_s * _rownorm2(w @ (g_off @ f))
        g_si_hat = _block_diag(est.g_hat_si)
        resid = p_s * _rownorm2(w @ ((g_diag - g_si_hat) @ f))
        txn = a * p_s * _rownorm2(w @ diag_f)
        rx_pow = p_s * (1 + a) * _rownorm2(diag_f) + n0
        rxd = bta * ((np.abs(w) ** 2) @ rx_pow)
    else:
        bsbs = resid = txn = rxd = zeros
    r = lambda v: v.reshape(n, k)  # noqa: E731
    return _breakdown(r(p_u * desired), intra=r(p_u * intra), inter=r(p_u * inter),
                      bs_bs=r(bsbs), residual_si=r(resid), est_error=r(p_u * err),
                      tx_noise=r(txn), rx_distortion=r(rxd), quantization=r(quant),
                      noise=r(n0 * _rownorm2(w)))


def instantaneous_sinr(link: str, scenario: str, filter: str, realization, estimates: ChannelEstimate,
                       config: SystemConfig, duplex: str = "FD", precoder: Precoder | None = None,
                       detector: Detector | None = None) -> SinrBreakdown:
    """Labeled term powers for every user of ``link`` given one realization.

    The DL precoder also drives the SI and BS-BS terms of the UL, so both
    filters are built (with the same ``filter`` kind) unless supplied.
    """
    if link not in LINKS or duplex not in DUPLEX:
        raise ValidationError(f"unknown link/duplex {link!r}/{duplex!r}")
    if realization.g_dl.shape != estimates.g_hat_dl.shape or \
            realization.g_ul.shape != estimates.g_hat_ul.shape:
        raise ContractError("estimates do not match the channel realization")
    prec = precoder or build_precoder(estimates, filter, scenario)
    coop = scenario == "cooperative"
    if link == "DL":
        return (_dl_coop if coop else _dl_noncoop)(config, realization, estimates, prec, duplex)
    det = detector or build_detector(estimates, filter, scenario)
    return (_ul_coop if coop else _ul_noncoop)(config, realization, estimates, prec, det, duplex)


def received_terms(link: str, scenario: str, realization, estimates: ChannelEstimate,
                   config: SystemConfig, precoder: Precoder, detector: Detector | None,
                   draws: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
    """Complex per-term contributions to each user's received sample.

    ``draws`` holds one realization of ``s_dl`` (N, K_DL), ``s_ul`` (N, K_UL),
    ``psi`` (N, K_DL) and ``noise``: (N, K_DL) for the DL, (N, M_r) for the
    UL, which also needs ``delta`` (N, M_r). Only the non-cooperative
    expansions are covered. Used to check the decomposition behind
    :func:`instantaneous_sinr`.
    """
    if scenario != "non-cooperative":
        raise ValidationError("received_terms covers the non-cooperative expansions")
    p_d, p_u = config.p_dl_mw, config.p_ul_mw
    n = realization.g_dl.shape[0]
    s_d, s_u = draws["s_dl"], draws["s_ul"]
    out: dict[str, np.ndarray] = {}
    if scenario == "non-cooperative" and link == "DL":
        g, f, g_hat = realization.g_dl, precoder.f, estimates.g_hat_dl
        k = g.shape[2]
        des = np.zeros((n, k), complex)
        intra = np.zeros_like(des)
        inter = np.zeros_like(des)
        err = np.zeros_like(des)
        for i in range(n):
            for u in range(k):
                beams = g[i, i, u] @ f[i]
                des[i, u] = math.sqrt(p_d) * (g_hat[i, i, u] @ f[i][:, u]) * s_d[i, u]
                err[i, u] = math.sqrt(p_d) * ((g[i, i, u] - g_hat[i, i, u]) @ f[i][:, u]) * s_d[i, u]
                intra[i, u] = math.sqrt(p_d) * (np.delete(beams, u) @ np.delete(s_d[i], u))
                inter[i, u] = math.sqrt(p_d) * sum(g[j, i, u] @ f[j] @ s_d[j] for j in range(n) if j != i)
        ue = math.sqrt(p_u) * np.einsum("ijuk,ju->ik", realization.g_ue, s_u)
        out = dict(desired=des, intra=intra, inter=inter, ue_ue=ue, est_error=err,
                   noise=draws["noise"])
    elif scenario == "non-cooperative" and link == "UL":
        g, g_hat, f, w = realization.g_ul, estimates.g_hat_ul, precoder.f, detector.w
        k = g.shape[2]
        keys = ("desired", "intra", "inter", "residual_si", "bs_bs", "est_error", "tx_noise",
                "rx_distortion", "noise")
        out = {t: np.zeros((n, k), complex) for t in keys}
        for i in range(n):
            g_si = realization.g_bs[i, i]
            for u in range(k):
                wv = w[i, u]
                out["desired"][i, u] = math.sqrt(p_u) * (wv @ g_hat[i, i, u]) * s_u[i, u]
                out["est_error"][i, u] = math.sqrt(p_u) * (wv @ (g[i, i, u] - g_hat[i, i, u])) * s_u[i, u]
                others = [l for l in range(k) if l != u]
                out["intra"][i, u] = math.sqrt(p_u) * sum(wv @ g[i, i, l] * s_u[i, l] for l in others)
                out["inter"][i, u] = math.sqrt(p_u) * sum(
                    wv @ g[i, j].T @ s_u[j] for j in range(n) if j != i)
                out["residual_si"][i, u] = math.sqrt(p_d) * (
                    wv @ (g_si - estimates.g_hat_si[i]) @ f[i] @ s_d[i])
                out["bs_bs"][i, u] = math.sqrt(p_d) * sum(
                    wv @ realization.g_bs[i, j] @ f[j] @ s_d[j] for j in range(n) if j != i)
                out["tx_noise"][i, u] = math.sqrt(p_d) * (wv @ g_si @ f[i] @ draws["psi"][i])
                out["rx_distortion"][i, u] = wv @ draws["delta"][i]
                out["noise"][i, u] = wv @ draws["noise"][i]
    else:
        raise ValidationError(f"unknown link {link!r}")
    return out


# Monte Carlo -----------------------------------------------------------------

@dataclass(frozen=True)
class RateReport:
    """Per-user ergodic rates (bps/Hz) for one link of all N cells."""

    per_user_rate: np.ndarray
    link: str
    scenario: str
    filter: str
    source: str
    scheme: str
    duplex: str = "FD"
    trials: int | None = None
    mc_stderr: np.ndarray | None = None
    sum_stderr: float | None = None
    breakdown_means: SinrBreakdown | None = field(default=None, repr=False)
    trial_sums: np.ndarray | None = field(default=None, repr=False)

    @property
    def sum_rate(self) -> float:
        return float(np.sum(self.per_user_rate))

    def cell_sum(self, cell: int) -> float:
        return float(np.sum(self.per_user_rate[cell]))


@dataclass(frozen=True)
class Combo:
    scenario: str
    filter: str
    link: str
    duplex: str = "FD"


def _combos(scenarios, filters, links, duplexes):
    return [Combo(s, f, l, d) for s in scenarios for f in filters for l in links for d in duplexes]


def setup(config: SystemConfig, seed: int) -> LargeScaleProfile:
    """User drop and large-scale gains for ``seed`` (shared by every engine)."""
    return build_profile(config, place_users(config, seed), seed)


def monte_carlo_rates(config: SystemConfig, scheme: str, combos, trials: int, seed: int,
                      profile: LargeScaleProfile | None = None) -> dict[Combo, RateReport]:
    """Common-random-number Monte Carlo over several (scenario, filter, link, duplex) combos.

    Every combo sees the same channel and pilot-phase draws in each trial.
    HD combos use nSPT-style estimates (no SI pilot); with ``scheme='SPT'``
    they come from a separate nSPT pilot phase on the same trial substream.
    """
    if trials < 1:
        raise DomainError("trials must be >= 1")
    profile = profile if profile is not None else setup(config, seed)
    profile.check(config)
    combos = list(combos)
    var = {}
    pilots = {}
    schemes = {scheme} | ({"nSPT"} if any(c.duplex == "HD" for c in combos) and scheme != "perfect" else set())
    for s in schemes:
        if s != "perfect":
            var[s] = estimate_variances(config, profile, s)
            pilots[s] = make_pilots(config, s)
    rates = {c: [] for c in combos}
    parts = {c: [] for c in combos}
    for t in range(trials):
        real = sample_channels(profile, seed, t)
        ests = {}
        for s in schemes:
            if s == "perfect":
                ests[s] = perfect_estimate(config, profile, real)
            else:
                ests[s] = run_pilot_phase(config, profile, real, pilots[s], seed, t, var[s])
        filters = {}
        for c in combos:
            s = scheme if c.duplex == "FD" or scheme == "perfect" else "nSPT"
            key = (s, c.scenario, c.filter)
            if key not in filters:
                prec = build_precoder(ests[s], c.filter, c.scenario)
                det = build_detector(ests[s], c.filter, c.scenario) if config.k_ul else None
                filters[key] = (prec, det)
            prec, det = filters[key]
            br = instantaneous_sinr(c.link, c.scenario, c.filter, real, ests[s], config,
                                    c.duplex, prec, det)
            rates[c].append(np.log2(1.0 + br.sinr))
            parts[c].append(np.stack([br.desired] + [br.terms[x] for x in TERMS]))
    out = {}
    for c in combos:
        r = np.stack(rates[c])  # (trials, N, K)
        mean = r.mean(axis=0)
        sd = r.std(axis=0, ddof=1) if trials > 1 else np.zeros_like(mean)
        sums = r.sum(axis=(1, 2))
        sum_se = float(sums.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
        p = np.stack(parts[c]).mean(axis=0)
        means = SinrBreakdown(p[0], {x: p[i + 1] for i, x in enumerate(TERMS)})
        out[c] = RateReport(mean, c.link, c.scenario, c.filter, "monte-carlo", scheme, c.duplex,
                            trials, sd / math.sqrt(trials), sum_se, means, sums)
    return out


def monte_carlo_rate(config: SystemConfig, scheme: str, scenario: str, link: str, filter: str,
                     trials: int, seed: int, duplex: str = "FD",
                     profile: LargeScaleProfile | None = None) -> RateReport:
    combo = Combo(scenario, filter, link, duplex)
    return monte_carlo_rates(config, scheme, [combo], trials, seed, profile)[combo]


# closed forms ------------------------------------------------------------------

def _dl_mf(cfg, prof, var, fd):
    m, k = cfg.m_tx, cfg.k_dl
    p_d, p_u, n0 = cfg.p_dl_mw, cfg.p_ul_mw, cfg.noise_mw
    n = prof.n_cells
    cells = np.arange(n)
    hat = var.dl_hat[cells, cells]  # (N, K)
    err = var.dl_err[cells, cells]
    rho = prof.d_dl[cells, cells]
    sum_hat = hat.sum(axis=1, keepdims=True)
    inter = prof.d_dl.sum(axis=0) - rho
    ue = prof.d_ue.sum(axis=(1, 2)) if fd else 0.0
    interf = (p_d * m * rho * (sum_hat - hat) + p_d * m * sum_hat * inter
              + p_u * m * sum_hat * ue)
    num = p_d * hat**2 * m * (m + 1)
    return num / (interf + m * p_d * hat * err + m * sum_hat * n0)


def _dl_zf(cfg, prof, var, fd):
    m, k = cfg.m_tx, cfg.k_dl
    p_d, p_u, n0 = cfg.p_dl_mw, cfg.p_ul_mw, cfg.noise_mw
    cells = np.arange(prof.n_cells)
    hat = var.dl_hat[cells, cells]
    err = var.dl_err[cells, cells]
    inter = prof.d_dl.sum(axis=0) - prof.d_dl[cells, cells]
    ue = prof.d_ue.sum(axis=(1, 2)) if fd else 0.0
    num = p_d * hat * (m - k + 1) / k
    return num / (p_d * inter + p_u * ue + p_d * err + n0)


def _ul_fd_terms(cfg, prof, var, zf: bool) -> np.ndarray:
    """Residual SI, BS-BS, Tx-noise and Rx-distortion powers per cell (Theorem-3 form)."""
    m_t, m_r = cfg.m_tx, cfg.m_rx
    p_d, n0, a, b = cfg.p_dl_mw, cfg.noise_mw, cfg.alpha, cfg.beta
    s_tot = prof.si.total
    bs = prof.d_bs.sum(axis=1)  # diagonal is zero
    bs_term = p_d * bs if zf else p_d / m_t * m_r * bs
    scale = p_d / (m_t * m_r)
    return (bs_term + scale * var.si_err_totals + a * scale * s_tot
            + b * ((1 + a) * scale * s_tot + n0))


def _ul_mf(cfg, prof, var, fd):
    m_r = cfg.m_rx
    p_u, n0 = cfg.p_ul_mw, cfg.noise_mw
    cells = np.arange(prof.n_cells)
    hat = var.ul_hat.mean(axis=-1)[cells, cells]
    err = var.ul_err.mean(axis=-1)[cells, cells]
    rho = prof.d_ul[cells, cells]
    intra = rho.sum(axis=1, keepdims=True) - rho
    inter = prof.d_ul.sum(axis=(1, 2)) - rho.sum(axis=1)
    extra = _ul_fd_terms(cfg, prof, var, zf=False) if fd else np.zeros(prof.n_cells)
    den = p_u * intra + p_u * inter[:, None] + extra[:, None] + p_u * err + n0
    return p_u * m_r * hat / den


def _ul_zf(cfg, prof, var, fd):
    m_r, k = cfg.m_rx, cfg.k_ul
    p_u, n0 = cfg.p_ul_mw, cfg.noise_mw
    cells = np.arange(prof.n_cells)
    hat = var.ul_hat.mean(axis=-1)[cells, cells]
    err = var.ul_err.mean(axis=-1)[cells, cells]
    inter = prof.d_ul.sum(axis=(1, 2)) - prof.d_ul[cells, cells].sum(axis=1)
    extra = _ul_fd_terms(cfg, prof, var, zf=True) if fd else np.zeros(prof.n_cells)
    i_zf = p_u * inter + extra
    gain = hat * (m_r - k + 1)
    den = i_zf[:, None] / gain + p_u * err.sum(axis=1, keepdims=True) / gain + n0 / gain
    return p_u / den


def _p_s(cfg) -> float:
    return quantization_noise_power("DL", cfg.c_dl_bpshz, cfg.p_dl_mw).symbol_power


def _q_factor(capacity: float) -> float:
    return 1.0 / math.expm1(capacity * math.log(2.0))


def _dl_coop_mf(cfg, prof, var, fd):
    m, n = cfg.m_tx, prof.n_cells
    p_u, n0 = cfg.p_ul_mw, cfg.noise_mw
    p_s = _p_s(cfg)
    hat, err, d = var.dl_hat, var.dl_err, prof.d_dl  # [b, i, k]
    total = m * hat.sum()  # E||G_hat||^2
    per_bs = hat.sum(axis=(1, 2))  # sum_{c,l} hat[b, c, l]
    a_sum = hat.sum(axis=0)  # (N, K)
    num = p_s * (m**2 * a_sum**2 + m * (hat**2).sum(axis=0))
    beams = m * np.einsum("bik,b->ik", d, per_bs) - m * (d * hat).sum(axis=0)
    ue = prof.d_ue.sum(axis=(1, 2)) if fd else 0.0
    interf = p_s * beams + p_u * ue * total
    i_q = p_s * _q_factor(cfg.c_dl_bpshz) * m * np.einsum("bik,b->ik", d, m * per_bs)
    den = interf + i_q + p_s * m * (err * hat).sum(axis=0) + total * n0
    return num / den


def _dl_coop_zf(cfg, prof, var, fd):
    m, n, k = cfg.m_tx, prof.n_cells, cfg.k_dl
    p_u, n0 = cfg.p_ul_mw, cfg.noise_mw
    p_s = _p_s(cfg)
    hat_avg = var.dl_hat.mean(axis=0)
    err_avg = var.dl_err.mean(axis=0)
    sigma = p_s / n * _q_factor(cfg.c_dl_bpshz)
    quant = m * sigma * prof.d_dl.sum(axis=0)
    ue = prof.d_ue.sum(axis=(1, 2)) if fd else 0.0
    num = p_s * hat_avg * (m * n - k * n + 1) / (k * n)
    return num / (p_u * ue + quant + p_s * err_avg + n0)


def _coop_ul_sigma(cfg, prof, var, fd: bool, filter: str) -> np.ndarray:
    """Per-antenna UL fronthaul quantization variance at each BS."""
    m_t, m_r, n = cfg.m_tx, cfg.m_rx, prof.n_cells
    p_u, n0, al, be = cfg.p_ul_mw, cfg.noise_mw, cfg.alpha, cfg.beta
    p_s = _p_s(cfg)
    y_pow = p_u * m_r * prof.d_ul.sum(axis=(1, 2)) + m_r * n0
    if fd:
        if filter == "MF":
            hdl = var.dl_hat.sum(axis=(1, 2))
            f_norm = hdl / hdl.sum()  # E||F_j||^2 under matrix normalization
        else:
            f_norm = np.full(n, 1.0 / n)
        si_rx = prof.si.total * f_norm / m_t
        bs_rx = m_r * (prof.d_bs @ f_norm)
        y_pow = (y_pow + p_s * (bs_rx + si_rx) + al * p_s * si_rx
                 + be * (p_s * (1 + al) * si_rx + m_r * n0))
    return y_pow * _q_factor(cfg.c_ul_bpshz)


def _ul_coop_mf(cfg, prof, var, fd):
    m_t, m_r, n = cfg.m_tx, cfg.m_rx, prof.n_cells
    p_u, n0, al, be = cfg.p_ul_mw, cfg.noise_mw, cfg.alpha, cfg.beta
    p_s = _p_s(cfg)
    a = var.ul_hat.mean(axis=-1)  # [b, i, k]
    e = var.ul_err.mean(axis=-1)
    du = prof.d_ul
    s_tot = prof.si.total
    total = m_t * var.dl_hat.sum()
    hdl = var.dl_hat.sum(axis=(1, 2))  # DL estimate power handled by BS j
    f_norm = m_t * hdl / total  # E||F_j||^2
    a_sum = a.sum(axis=0)  # (N, K)
    w_norm = m_r * a_sum
    interf = p_u * m_r * (np.einsum("bik,b->ik", a, du.sum(axis=(1, 2))) - (a * du).sum(axis=0))
    interf = interf / w_norm
    est = p_u * (a * e).sum(axis=0) / a_sum
    den = interf + est + n0
    if fd:
        si_rx = s_tot * f_norm / m_t
        # per-unit-||w||^2 powers, mixing BS blocks by the detector weights a[b]
        bsbs = p_s * np.einsum("bik,b->ik", a, m_r * (prof.d_bs @ f_norm)) / w_norm
        resid = p_s * np.einsum("bik,b->ik", a, var.si_err_totals * f_norm / m_t) / w_norm
        txn = al * p_s * np.einsum("bik,b->ik", a, si_rx) / w_norm
        rxd = be * (1 + al) * p_s * np.einsum("bik,b->ik", a, si_rx) / w_norm + be * n0
        den = den + bsbs + resid + txn + rxd
    sigma = _coop_ul_sigma(cfg, prof, var, fd, "MF")
    den = den + np.einsum("bik,b->ik", a, sigma) / a_sum
    return p_u * m_r * a_sum / den


def _ul_coop_zf(cfg, prof, var, fd):
    m_t, m_r, n, k = cfg.m_tx, cfg.m_rx, prof.n_cells, cfg.k_ul
    p_u, n0, al, be = cfg.p_ul_mw, cfg.noise_mw, cfg.alpha, cfg.beta
    p_s = _p_s(cfg)
    hat_avg = var.ul_hat.mean(axis=-1).mean(axis=0)  # (N, K)
    err_avg = var.ul_err.mean(axis=-1).mean(axis=0)
    s_tot = prof.si.total
    den = p_u * err_avg.sum() + n0
    if fd:
        g = m_t * prof.d_bs.sum(axis=0) + var.si_err_totals / m_r
        si = p_s * s_tot / (m_t * n)
        den = (den + p_s * g.mean() / (m_t * n) + (al + be * (1 + al)) * si / m_r + be * n0)
    sigma_avg = float(np.mean(_coop_ul_sigma(cfg, prof, var, fd, "ZF")))
    num = p_u * hat_avg * (m_r * n - k * n + 1)
    return num / (den + sigma_avg)


_ANALYTIC = {
    ("non-cooperative", "DL", "MF"): _dl_mf, ("non-cooperative", "DL", "ZF"): _dl_zf,
    ("non-cooperative", "UL", "MF"): _ul_mf, ("non-cooperative", "UL", "ZF"): _ul_zf,
    ("cooperative", "DL", "MF"): _dl_coop_mf, ("cooperative", "DL", "ZF"): _dl_coop_zf,
    ("cooperative", "UL", "MF"): _ul_coop_mf, ("cooperative", "UL", "ZF"): _ul_coop_zf,
}


def analytic_sinr(config: SystemConfig, profile: LargeScaleProfile, variances: EstimateVariances,
                  scenario: str, link: str, filter: str, duplex: str = "FD") -> np.ndarray:
    """Ergodic SINR approximations (N, K) of the closed-form rate theorems."""
    key = (scenario, link, filter)
    if key not in _ANALYTIC or duplex not in DUPLEX:
        raise ValidationError(f"unsupported combination {key + (duplex,)}")
    if (link == "DL" and config.k_dl == 0) or (link == "UL" and config.k_ul == 0):
        return np.zeros((profile.n_cells, 0))
    out = _ANALYTIC[key](config, profile, variances, duplex == "FD")
    return np.maximum(np.nan_to_num(out, nan=0.0), 0.0)


def analytic_rate(config: SystemConfig, profile: LargeScaleProfile, variances: EstimateVariances,
                  scenario: str, link: str, filter: str, duplex: str = "FD") -> RateReport:
    sinr = analytic_sinr(config, profile, variances, scenario, link, filter, duplex)
    return RateReport(np.log2(1.0 + sinr), link, scenario, filter, "analytic", variances.scheme,
                      duplex)


# asymptotics -------------------------------------------------------------------

def asymptotic_sinr(config: SystemConfig, profile: LargeScaleProfile, variances: EstimateVariances,
                    scenario: str, link: str, filter: str) -> np.ndarray:
    """Large-M limits with P_d = P_u = P_r / sqrt(M), evaluated at M = config.m_tx.

    The limit expressions are written for n_0 = 1; for a general noise floor
    P_r is read as P_r / n_0. Quantities that keep growing with M (fronthaul
    quantization) are evaluated at the given M.
    """
    if config.m_tx != config.m_rx:
        raise ValidationError("asymptotic forms assume M_t = M_r = M")
    with np.errstate(divide="ignore", invalid="ignore"):
        return _asymptotic(config, profile, variances, scenario, link, filter)


def _asymptotic(config, profile, variances, scenario, link, filter):
    m = config.m_tx
    snr = config.p_ref_mw / config.noise_mw
    root = math.sqrt(m)
    n = profile.n_cells
    cells = np.arange(n)
    if scenario == "non-cooperative":
        if link == "DL":
            hat = variances.dl_hat[cells, cells]
            if filter == "MF":
                return snr * hat**2 / hat.sum(axis=1, keepdims=True) * root
            return snr * hat * root / config.k_dl
        hat = variances.ul_hat.mean(axis=-1)[cells, cells]
        return snr * hat * root / (1 + config.beta)
    kept = 1 - 2.0 ** -config.c_dl_bpshz
    if link == "DL":
        hat = variances.dl_hat  # [b, i, k]
        if filter == "MF":
            per_bs = hat.sum(axis=(1, 2))
            sigma = snr * kept * root * per_bs * _q_factor(config.c_dl_bpshz)
            num = snr * kept * hat.sum(axis=0) ** 2 * root
            return num / (np.einsum("b,bik->ik", sigma, profile.d_dl) + hat.sum())
        sigma = snr * kept / (root * n) * _q_factor(config.c_dl_bpshz)
        num = snr * kept * hat.mean(axis=0) * root / config.k_dl
        return num / (m * sigma * profile.d_dl.sum(axis=0) + 1)
    a = variances.ul_hat.mean(axis=-1)
    a_sum = a.sum(axis=0)
    sigma = _coop_ul_sigma(config, profile, variances, True, filter) / config.noise_mw
    if filter == "MF":
        quant = np.einsum("bik,b->ik", a, sigma) / a_sum
        return snr * a_sum * root / (quant + config.beta + 1)
    return snr * a_sum * root / (sigma.sum() / n + config.beta + 1)


def asymptotic_rate(config: SystemConfig, profile: LargeScaleProfile, variances: EstimateVariances,
                    scenario: str, link: str, filter: str) -> RateReport:
    sinr = asymptotic_sinr(config, profile, variances, scenario, link, filter)
    sinr = np.maximum(np.nan_to_num(sinr, nan=0.0), 0.0)
    return RateReport(np.log2(1.0 + sinr), link, scenario, filter, "asymptotic", variances.scheme)


# symbol draws for the decomposition oracle --------------------------------------

def draw_symbols(rng: np.random.Generator, shape) -> np.ndarray:
    """Unit-modulus QPSK symbols."""
    bits = rng.integers(0, 4, size=shape)
    return np.exp(1j * (math.pi / 4 + math.pi / 2 * bits))


def symbol_stream(seed: int, trial: int = 0) -> np.random.Generator:
    return substream(seed, FAMILY_SYMBOLS, trial)
