"""Linear precoders/detectors and the impairment models around them.

Non-cooperative filters are built per cell from the local estimates and
stacked along a leading cell axis. Cooperative filters are built once at the
central unit from the global estimate matrices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import crandn
from .errors import DomainError, ValidationError, SingularityError
from .estimation import ChannelEstimate

FILTERS = ("MF", "ZF")
COND_LIMIT = 1e12


def global_dl(g_dl: np.ndarray) -> np.ndarray:
    """(N, N, K, M) per-BS DL channels -> (N K, M N) global matrix.

    Row ``c K + k`` is user k of cell c; column block ``b`` is BS b.
    """
    n, _, k, m = g_dl.shape
    return np.transpose(g_dl, (1, 2, 0, 3)).reshape(n * k, n * m)


def global_ul(g_ul: np.ndarray) -> np.ndarray:
    """(N, N, K, M) per-BS UL channels -> (M N, N K) global matrix."""
    n, _, k, m = g_ul.shape
    return np.transpose(g_ul, (0, 3, 1, 2)).reshape(n * m, n * k)


def _gram_solve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve (a) x = b for Hermitian ``a`` with a conditioning guard."""
    if a.shape[0] == 0:
        return b.copy()
    cond = np.linalg.cond(a)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise SingularityError(f"Gram matrix ill-conditioned (cond={cond:.3g})")
    return np.linalg.solve(a, b)


def _mf_precoder(g_hat: np.ndarray) -> np.ndarray:
    f = g_hat.conj().T
    norm = np.linalg.norm(f)
    return f / norm if norm > 0 else f


def _zf_precoder(g_hat: np.ndarray) -> np.ndarray:
    k, m = g_hat.shape
    if m < k:
        raise SingularityError(f"ZF needs at least as many antennas as users ({m} < {k})")
    # F = G^H (G G^H)^{-1}, computed as (solve(G G^H, G))^H
    f = _gram_solve(g_hat @ g_hat.conj().T, g_hat).conj().T
    cols = np.linalg.norm(f, axis=0)
    return f / (math.sqrt(k) * cols) if k else f


def _mf_detector(g_hat: np.ndarray) -> np.ndarray:
    return g_hat.conj().T


def _zf_detector(g_hat: np.ndarray) -> np.ndarray:
    m, k = g_hat.shape
    if m < k:
        raise SingularityError(f"ZF needs at least as many antennas as users ({m} < {k})")
    # W = (G^H G)^{-1} G^H so that W G = I
    return _gram_solve(g_hat.conj().T @ g_hat, g_hat.conj().T)


@dataclass(frozen=True)
class Precoder:
    """``f`` is (N, M_t, K_DL) per cell or (M_t N, K_DL N) cooperative."""

    f: np.ndarray
    kind: str
    scenario: str

    @property
    def normalization(self) -> str:
        return "matrix" if self.kind == "MF" else "vector"

    def block(self, bs: int, m_tx: int) -> np.ndarray:
        """Rows of the precoder driven by BS ``bs`` (cooperative: M_t x K N)."""
        if self.scenario == "cooperative":
            return self.f[bs * m_tx:(bs + 1) * m_tx]
        return self.f[bs]


@dataclass(frozen=True)
class Detector:
    """``w`` is (N, K_UL, M_r) per cell or (K_UL N, M_r N) cooperative; applied as w^T y."""

    w: np.ndarray
    kind: str
    scenario: str


def _check(kind: str, scenario: str) -> None:
    if kind not in FILTERS:
        raise ValidationError(f"unknown filter {kind!r}")
    if scenario not in ("non-cooperative", "cooperative"):
        raise ValidationError(f"unknown scenario {scenario!r}")


def build_precoder(estimates: ChannelEstimate, kind: str, scenario: str) -> Precoder:
    _check(kind, scenario)
    make = _mf_precoder if kind == "MF" else _zf_precoder
    g = estimates.g_hat_dl
    if scenario == "cooperative":
        return Precoder(make(global_dl(g)), kind, scenario)
    n = g.shape[0]
    return Precoder(np.stack([make(g[i, i]) for i in range(n)]), kind, scenario)


def build_detector(estimates: ChannelEstimate, kind: str, scenario: str) -> Detector:
    _check(kind, scenario)
    make = _mf_detector if kind == "MF" else _zf_detector
    g = estimates.g_hat_ul
    if scenario == "cooperative":
        return Detector(make(global_ul(g)), kind, scenario)
    n = g.shape[0]
    # local estimate of own-cell users: (M_r, K_UL)
    return Detector(np.stack([make(g[i, i].T) for i in range(n)]), kind, scenario)


@dataclass(frozen=True)
class Quantization:
    variance: float
    symbol_power: float


def quantization_noise_power(link: str, capacity_bpshz: float, signal_power: float,
                             tx_norm_sq: float = 1.0) -> Quantization:
    """Fronthaul quantization noise per antenna.

    DL: ``signal_power`` is P_d; returns P_s = P_d (1 - 2^-C) and
    sigma^2 = P_s E||x||^2 / (2^C - 1) with E||x||^2 = ``tx_norm_sq``.
    UL: ``signal_power`` is E||y||^2 at the BS; sigma^2 = E||y||^2 / (2^C - 1).
    """
    if not capacity_bpshz > 0:
        raise DomainError("fronthaul capacity must be > 0")
    if signal_power < 0:
        raise DomainError("signal power must be >= 0")
    denom = math.expm1(capacity_bpshz * math.log(2.0))
    if link == "DL":
        p_s = signal_power * -math.expm1(-capacity_bpshz * math.log(2.0))
        return Quantization(p_s * tx_norm_sq / denom, p_s)
    if link == "UL":
        return Quantization(signal_power / denom, signal_power)
    raise ValidationError(f"unknown link {link!r}")


@dataclass(frozen=True)
class ImpairmentDraws:
    psi: np.ndarray
    delta: np.ndarray
    q_dl: np.ndarray | None = None
    q_ul: np.ndarray | None = None


def draw_impairments(tx_symbols: np.ndarray, undistorted_rx: np.ndarray, alpha: float,
                     beta: float, seed, q_dl_var: np.ndarray | None = None,
                     q_ul_var: np.ndarray | None = None) -> ImpairmentDraws:
    """Gaussian Tx noise, Rx distortion and (optionally) quantization noise.

    ``seed`` may be an int or a ``numpy.random.Generator``. Quantization
    variances are given per element of the vector to draw.
    """
    if alpha < 0 or beta < 0:
        raise DomainError("alpha and beta must be >= 0")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    s = np.asarray(tx_symbols)
    y = np.asarray(undistorted_rx)
    psi = math.sqrt(alpha) * np.abs(s) * crandn(rng, s.shape)
    delta = math.sqrt(beta) * np.abs(y) * crandn(rng, y.shape)
    q_dl = None if q_dl_var is None else np.sqrt(q_dl_var) * crandn(rng, np.shape(q_dl_var))
    q_ul = None if q_ul_var is None else np.sqrt(q_ul_var) * crandn(rng, np.shape(q_ul_var))
    return ImpairmentDraws(psi, delta, q_dl, q_ul)
