"""Pilot design, MMSE channel estimation and its closed-form statistics.

Two pilot schemes are supported. ``nSPT`` sends UL, DL (reciprocity) and SI
pilots in separate slots. ``SPT`` overlaps the SI pilot with the UL pilot in
one slot of length ``tau_max = max(tau_si, tau_uu)``; the BS estimates the SI
channel first, subtracts its reconstruction and estimates the UL channels
from what is left. DL channels are always estimated in their own slot.

All estimators are per-coefficient scalar MMSE: the large-scale gains are
known, so every coefficient is a scaled copy of one pilot-correlator output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .channel import (FAMILY_PILOT, ChannelRealization, LargeScaleProfile, crandn,
                      substream)
from .config import SystemConfig
from .errors import ValidationError

SCHEMES = ("nSPT", "SPT")


def dft_columns(tau: int, count: int) -> np.ndarray:
    """First ``count`` columns of the unitary tau-point DFT."""
    t = np.arange(tau)[:, None]
    m = np.arange(count)[None, :]
    return np.exp(-2j * math.pi * t * m / tau) / math.sqrt(tau)


def slot_columns(tau: int, count: int) -> np.ndarray:
    """First ``count`` columns of the identity: one symbol slot per user."""
    return np.eye(tau, count, dtype=complex)


@dataclass(frozen=True)
class PilotSet:
    """Unitary-column pilot blocks shared by every cell.

    UL pilots are single-slot sequences and SI pilots DFT columns, so every
    UL pilot has cross-correlation 1/tau with every SI pilot. That is what
    makes the UL-pilot leakage into the SI correlator equal to
    ``P_u * sum(gains)`` under SPT.
    """

    phi_uu: np.ndarray
    phi_ud: np.ndarray
    phi_si: np.ndarray
    scheme: str
    tau_max: int | None = None


def make_pilots(config: SystemConfig, scheme: str) -> PilotSet:
    if scheme not in SCHEMES:
        raise ValidationError(f"unknown pilot scheme {scheme!r}")
    if config.tau_si < config.m_tx or config.tau_uu < config.k_ul or config.tau_ud < config.k_dl:
        raise ValidationError("pilot lengths shorter than the number of streams")
    phi_ud = slot_columns(config.tau_ud, config.k_dl)
    if scheme == "nSPT":
        return PilotSet(slot_columns(config.tau_uu, config.k_ul), phi_ud,
                        dft_columns(config.tau_si, config.m_tx), scheme)
    tau = config.tau_max
    return PilotSet(slot_columns(tau, config.k_ul), phi_ud, dft_columns(tau, config.m_tx),
                    scheme, tau)


# closed-form statistics ------------------------------------------------------

def _contaminated(tau: int, power: float, gains: np.ndarray, noise: float) -> np.ndarray:
    """Estimate variance when every cell reuses the pilot: gains indexed [b, c, k]."""
    total = gains.sum(axis=1, keepdims=True)
    return tau * power * gains**2 / (tau * power * total + noise)


@dataclass(frozen=True)
class EstimateVariances:
    """Per-coefficient estimate (``hat``) and error (``err``) variances.

    ``dl_*`` are (N, N, K_DL) and constant over the M_t antennas. ``ul_*``
    are (N, N, K_UL, M_r); they only vary over the Rx antenna under SPT,
    through the residual SI of that antenna. SI variances are produced row
    by row because the full (M_r, M_t) table is only needed for simulation.
    """

    config: SystemConfig
    profile: LargeScaleProfile
    scheme: str
    dl_hat: np.ndarray
    dl_err: np.ndarray
    ul_hat: np.ndarray
    ul_err: np.ndarray

    # SI ---------------------------------------------------------------
    def _si_tau(self) -> int:
        return self.config.tau_si if self.scheme == "nSPT" else self.config.tau_max

    def ul_pilot_leak(self) -> np.ndarray:
        """UL-pilot power seen by each BS's SI correlator (SPT only), shape (N,)."""
        if self.scheme != "SPT":
            return np.zeros(self.profile.n_cells)
        return self.config.p_ul_mw * self.profile.d_ul.sum(axis=(1, 2))

    def si_denominator(self, bs: int, gain: np.ndarray, row_sum: np.ndarray) -> np.ndarray:
        cfg = self.config
        p_d, tau = cfg.p_dl_mw, self._si_tau()
        base = (1 + cfg.beta) * (tau * p_d * gain + cfg.alpha * p_d * row_sum + cfg.noise_mw)
        return self.ul_pilot_leak()[bs] + base

    def si_hat(self, bs: int, start: int = 0, stop: int | None = None) -> np.ndarray:
        si = self.profile.si
        stop = si.m_rx if stop is None else stop
        gain = si.rows(start, stop)
        rs = si.row_sums[start:stop, None]
        tau = self._si_tau()
        return tau * self.config.p_dl_mw * gain**2 / self.si_denominator(bs, gain, rs)

    def si_err(self, bs: int, start: int = 0, stop: int | None = None) -> np.ndarray:
        si = self.profile.si
        stop = si.m_rx if stop is None else stop
        return si.rows(start, stop) - self.si_hat(bs, start, stop)

    def si_err_row_sums(self, bs: int, chunk: int = 1024) -> np.ndarray:
        m_rx = self.profile.si.m_rx
        return np.concatenate([
            self.si_err(bs, s, min(s + chunk, m_rx)).sum(axis=1) for s in range(0, m_rx, chunk)
        ])

    @cached_property
    def si_err_totals(self) -> np.ndarray:
        """sum_{l,m} of the SI error variance per BS, shape (N,)."""
        return np.array([self.si_err_row_sums(b).sum() for b in range(self.profile.n_cells)])


def estimate_variances(config: SystemConfig, profile: LargeScaleProfile, scheme: str) -> EstimateVariances:
    """Closed-form MMSE variances for ``nSPT``, ``SPT`` or ``perfect`` CSI."""
    profile.check(config)
    p_u, n0 = config.p_ul_mw, config.noise_mw
    m_rx = config.m_rx
    if scheme == "perfect":
        ul = np.repeat(profile.d_ul[..., None], m_rx, axis=-1)
        return _PerfectVariances(config, profile, scheme, profile.d_dl.copy(),
                                 np.zeros_like(profile.d_dl), ul, np.zeros_like(ul))
    if scheme not in SCHEMES:
        raise ValidationError(f"unknown pilot scheme {scheme!r}")

    dl_hat = _contaminated(config.tau_ud, p_u, profile.d_dl, n0)
    if scheme == "nSPT":
        ul_hat = _contaminated(config.tau_uu, p_u, profile.d_ul, n0)
        ul_hat = np.repeat(ul_hat[..., None], m_rx, axis=-1)
        shell = EstimateVariances(config, profile, scheme, dl_hat, profile.d_dl - dl_hat,
                                  ul_hat, None)
    else:
        shell = EstimateVariances(config, profile, scheme, dl_hat, profile.d_dl - dl_hat,
                                  None, None)
        ul_hat = _spt_ul_hat(config, profile, shell)
    ul_err = profile.d_ul[..., None] - ul_hat
    return EstimateVariances(config, profile, scheme, dl_hat, profile.d_dl - dl_hat,
                             ul_hat, ul_err)


def _spt_ul_hat(config: SystemConfig, profile: LargeScaleProfile, shell: EstimateVariances) -> np.ndarray:
    """UL estimate variance after SI subtraction; residual SI enters per Rx antenna."""
    tau, p_u, p_d = config.tau_max, config.p_ul_mw, config.p_dl_mw
    a, b, n0 = config.alpha, config.beta, config.noise_mw
    s_row = profile.si.row_sums  # (M_r,)
    out = np.empty(profile.d_ul.shape + (config.m_rx,))
    for bs in range(profile.n_cells):
        resid = p_d * shell.si_err_row_sums(bs)  # (M_r,)
        hw = (1 + b) * (a * p_d * s_row + n0) + b * p_d * s_row
        gains = profile.d_ul[bs]  # (N, K_UL)
        contam = tau * p_u * gains.sum(axis=0)  # (K_UL,)
        den = contam[None, :, None] + (resid + hw)[None, None, :]
        out[bs] = tau * p_u * gains[..., None] ** 2 / den
    return out


class _PerfectVariances(EstimateVariances):
    def si_hat(self, bs, start=0, stop=None):
        stop = self.profile.si.m_rx if stop is None else stop
        return self.profile.si.rows(start, stop)

    def si_err(self, bs, start=0, stop=None):
        return np.zeros_like(self.si_hat(bs, start, stop))


def nmse(config: SystemConfig, profile: LargeScaleProfile, scheme: str, bs: int = 0) -> np.ndarray:
    """NMSE of the SI channel estimate per (l, m) coefficient of BS ``bs``."""
    profile.check(config)
    p_d, a, b, n0 = config.p_dl_mw, config.alpha, config.beta, config.noise_mw
    gain = profile.si.matrix()
    rs = profile.si.row_sums[:, None]
    if scheme == "nSPT":
        tau, leak = config.tau_si, 0.0
    elif scheme == "SPT":
        tau = config.tau_max
        leak = config.p_ul_mw * profile.d_ul[bs].sum()
    else:
        raise ValidationError(f"unknown pilot scheme {scheme!r}")
    hw = (1 + b) * (a * p_d * rs + n0)
    num = leak + b * tau * p_d * gain + hw
    den = leak + (1 + b) * tau * p_d * gain + hw
    return num / den


# pilot-phase simulation ------------------------------------------------------

@dataclass(frozen=True)
class ChannelEstimate:
    """Estimated channels in the same layout as :class:`ChannelRealization`.

    ``g_hat_dl`` (N, N, K_DL, M_t), ``g_hat_ul`` (N, N, K_UL, M_r) and
    ``g_hat_si`` (N, M_r, M_t); ``variances`` holds the closed-form statistics
    the estimator used.
    """

    g_hat_dl: np.ndarray
    g_hat_ul: np.ndarray
    g_hat_si: np.ndarray
    variances: EstimateVariances
    scheme: str

    def _table(self, kind: str) -> dict[str, np.ndarray]:
        v = self.variances
        si = getattr(v, f"si_{kind}")
        return {"dl": getattr(v, f"dl_{kind}"), "ul": getattr(v, f"ul_{kind}"),
                "si": np.stack([si(b) for b in range(v.profile.n_cells)])}

    @property
    def var_hat(self) -> dict[str, np.ndarray]:
        return self._table("hat")

    @property
    def var_err(self) -> dict[str, np.ndarray]:
        return self._table("err")


def _tx_noise(rng, shape, phi: np.ndarray, alpha: float) -> np.ndarray:
    # psi_t ~ CN(0, alpha diag(phi_t phi_t^H)), phi_t the t-th pilot symbol vector
    return math.sqrt(alpha) * np.abs(phi) * crandn(rng, shape)


def _rx_distortion(rng, ybar: np.ndarray, beta: float) -> np.ndarray:
    return math.sqrt(beta) * np.abs(ybar) * crandn(rng, ybar.shape)


def run_pilot_phase(config: SystemConfig, profile: LargeScaleProfile, realization: ChannelRealization,
                    pilots: PilotSet, seed: int, trial: int = 0,
                    variances: EstimateVariances | None = None) -> ChannelEstimate:
    """Simulate the pilot slots of one coherence block and apply the MMSE estimators."""
    scheme = pilots.scheme
    var = variances if variances is not None else estimate_variances(config, profile, scheme)
    rng = substream(seed, FAMILY_PILOT, trial)
    n = profile.n_cells
    p_u, p_d, n0 = config.p_ul_mw, config.p_dl_mw, config.noise_mw
    g_dl, g_ul, g_bs = realization.g_dl, realization.g_ul, realization.g_bs
    si_gain = profile.si.matrix()

    # DL via reciprocity: every cell's DL users send phi_ud, received on the Tx array
    tau = pilots.phi_ud.shape[0]
    g_hat_dl = np.zeros_like(g_dl)
    if profile.k_dl:
        for b in range(n):
            y = math.sqrt(tau * p_u) * np.einsum("ckm,tk->mt", g_dl[b], pilots.phi_ud)
            y += math.sqrt(n0) * crandn(rng, y.shape)
            corr = (y @ pilots.phi_ud.conj()).T  # (K, M_t)
            coef = math.sqrt(tau * p_u) * profile.d_dl[b] / (
                tau * p_u * profile.d_dl[b].sum(axis=0) + n0)  # (N, K)
            g_hat_dl[b] = coef[..., None] * corr[None]

    g_hat_ul = np.zeros_like(g_ul)
    g_hat_si = np.zeros((n,) + si_gain.shape, dtype=complex)
    phi_si, phi_uu = pilots.phi_si, pilots.phi_uu
    a, bta = config.alpha, config.beta
    for b in range(n):
        g_si = g_bs[b, b]
        if scheme == "nSPT":
            tau_si = phi_si.shape[0]
            psi = _tx_noise(rng, phi_si.shape, phi_si, a)
            ybar = math.sqrt(tau_si * p_d) * g_si @ (phi_si + psi).T
            ybar += math.sqrt(n0) * crandn(rng, ybar.shape)
            y_si = ybar + _rx_distortion(rng, ybar, bta)
            coef = math.sqrt(tau_si * p_d) * si_gain / var.si_denominator(
                b, si_gain, profile.si.row_sums[:, None])
            g_hat_si[b] = coef * (y_si @ phi_si.conj())
            if profile.k_ul:
                tau_uu = phi_uu.shape[0]
                y = math.sqrt(tau_uu * p_u) * np.einsum("ckm,tk->mt", g_ul[b], phi_uu)
                y += math.sqrt(n0) * crandn(rng, y.shape)
                corr = (y @ phi_uu.conj()).T
                coef = math.sqrt(tau_uu * p_u) * profile.d_ul[b] / (
                    tau_uu * p_u * profile.d_ul[b].sum(axis=0) + n0)
                g_hat_ul[b] = coef[..., None] * corr[None]
        else:
            tau_m = pilots.tau_max
            psi = _tx_noise(rng, phi_si.shape, phi_si, a)
            ybar = math.sqrt(tau_m * p_d) * g_si @ (phi_si + psi).T
            ybar += math.sqrt(n0) * crandn(rng, ybar.shape)
            y = ybar + _rx_distortion(rng, ybar, bta)
            if profile.k_ul:
                y += math.sqrt(tau_m * p_u) * np.einsum("ckm,tk->mt", g_ul[b], phi_uu)
            coef = math.sqrt(tau_m * p_d) * si_gain / var.si_denominator(
                b, si_gain, profile.si.row_sums[:, None])
            g_hat_si[b] = coef * (y @ phi_si.conj())
            if profile.k_ul:
                resid = y - math.sqrt(tau_m * p_d) * g_hat_si[b] @ phi_si.T
                corr = (resid @ phi_uu.conj()).T  # (K, M_r)
                hat = var.ul_hat[b]  # (N, K, M_r)
                coef = hat / (math.sqrt(tau_m * p_u) * profile.d_ul[b][..., None])
                g_hat_ul[b] = coef * corr[None]
    return ChannelEstimate(g_hat_dl, g_hat_ul, g_hat_si, var, scheme)


def perfect_estimate(config: SystemConfig, profile: LargeScaleProfile,
                     realization: ChannelRealization) -> ChannelEstimate:
    var = estimate_variances(config, profile, "perfect")
    n = profile.n_cells
    si = np.stack([realization.g_bs[b, b] for b in range(n)])
    return ChannelEstimate(realization.g_dl.copy(), realization.g_ul.copy(), si, var, "perfect")
