"""Half-duplex baseline, reliable-region tests and coherence-time bounds."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import LargeScaleProfile
from .config import SystemConfig
from .errors import ContractError, DomainError, ValidationError
from .estimation import estimate_variances
from .rates import RateReport, analytic_rate, analytic_sinr, monte_carlo_rate


@dataclass(frozen=True)
class OverheadModel:
    """Pilot overheads in symbols; ``T=None`` ignores overhead altogether."""

    tau_fd: int
    tau_hd: int
    T: int | None = None
    t_s: float | None = None

    def __post_init__(self) -> None:
        if self.tau_fd <= 0 or self.tau_hd <= 0:
            raise ValidationError("pilot overheads must be > 0")
        if self.T is not None and not (self.tau_fd < self.T and self.tau_hd < self.T):
            raise ValidationError("T must exceed both pilot overheads")

    @classmethod
    def from_config(cls, config: SystemConfig, scheme: str) -> "OverheadModel":
        return cls(config.overhead(scheme), config.overhead("HD"), config.total_symbols,
                   config.symbol_duration_s)

    def factor(self, tau: int) -> float:
        return 1.0 if self.T is None else 1.0 - tau / self.T


@dataclass(frozen=True)
class RegionVerdict:
    dl_holds: bool
    ul_holds: bool
    joint_holds: bool
    margins: dict[str, float]
    t_cohe_min_s: float | None = None
    max_tolerable: dict[str, np.ndarray] | None = None


def half_duplex_rate(config: SystemConfig, scenario: str, link: str, filter: str,
                     trials: int | None = None, seed: int = 0,
                     profile: LargeScaleProfile | None = None) -> RateReport:
    """HD rate: FD-only terms removed and nSPT-style (no SI pilot) estimates.

    ``trials=None`` evaluates the closed forms, otherwise Monte Carlo.
    """
    if trials is None:
        if profile is None:
            raise ValidationError("analytic half-duplex rate needs a profile")
        var = estimate_variances(config, profile, "nSPT")
        return analytic_rate(config, profile, var, scenario, link, filter, duplex="HD")
    return monte_carlo_rate(config, "nSPT", scenario, link, filter, trials, seed, "HD", profile)


def _check_pair(fd: RateReport, hd: RateReport, link: str) -> None:
    if fd.link != link or hd.link != link:
        raise ContractError(f"expected {link} reports")
    if fd.duplex != "FD" or hd.duplex != "HD":
        raise ContractError("expected one FD and one HD report per link")
    if (fd.scenario, fd.filter) != (hd.scenario, hd.filter) or \
            np.shape(fd.per_user_rate) != np.shape(hd.per_user_rate):
        raise ContractError("FD and HD reports come from different configurations")


def reliable_region_check(fd_dl: RateReport, fd_ul: RateReport, hd_dl: RateReport,
                          hd_ul: RateReport, overheads: OverheadModel,
                          lemma: "LemmaBounds | None" = None) -> RegionVerdict:
    """Overhead-adjusted FD-vs-HD comparison per link and jointly.

    FD wins a link when 2 (1 - tau_FD/T) sum R_FD >= (1 - tau_HD/T) sum R_HD.
    Passing ``lemma`` attaches its coherence threshold and interference budgets.
    """
    _check_pair(fd_dl, hd_dl, "DL")
    _check_pair(fd_ul, hd_ul, "UL")
    a_fd = 2.0 * overheads.factor(overheads.tau_fd)
    a_hd = overheads.factor(overheads.tau_hd)
    dl = a_fd * fd_dl.sum_rate - a_hd * hd_dl.sum_rate
    ul = a_fd * fd_ul.sum_rate - a_hd * hd_ul.sum_rate
    joint = a_fd * (fd_dl.sum_rate + fd_ul.sum_rate) - a_hd * (hd_dl.sum_rate + hd_ul.sum_rate)
    margins = {"DL": float(dl), "UL": float(ul), "joint": float(joint)}
    if lemma is None:
        return RegionVerdict(bool(dl >= 0), bool(ul >= 0), bool(joint >= 0), margins)
    return RegionVerdict(bool(dl >= 0), bool(ul >= 0), bool(joint >= 0), margins,
                         lemma.t_cohe_s, {"DL": lemma.max_i_fd_dl, "UL": lemma.max_i_fd_ul})


@dataclass(frozen=True)
class SinrInputs:
    """Per-user SINRs feeding the Lemma bounds.

    ``ul_fd_base`` is the FD UL SINR with the FD-induced terms removed but
    the FD scheme's channel estimates kept; it separates S/I from I^FD.
    """

    dl_fd: np.ndarray
    dl_hd: np.ndarray
    ul_fd: np.ndarray
    ul_hd: np.ndarray
    ul_fd_base: np.ndarray


def analytic_sinr_inputs(config: SystemConfig, profile: LargeScaleProfile, scheme: str,
                         scenario: str, filter: str) -> SinrInputs:
    fd_var = estimate_variances(config, profile, scheme)
    hd_var = fd_var if scheme == "nSPT" else estimate_variances(config, profile, "nSPT")
    s = lambda var, link, duplex: analytic_sinr(config, profile, var, scenario, link, filter, duplex)  # noqa: E731
    return SinrInputs(s(fd_var, "DL", "FD"), s(hd_var, "DL", "HD"), s(fd_var, "UL", "FD"),
                      s(hd_var, "UL", "HD"), s(fd_var, "UL", "HD"))


@dataclass(frozen=True)
class LemmaBounds:
    """Interference budgets in units of each user's desired power.

    ``max_i_fd_*`` is the largest tolerable FD-induced interference, ``i_fd_*``
    the actual one; ``t_cohe_symbols`` is infinite when no finite coherence
    time satisfies the UL condition.
    """

    max_i_fd_dl: np.ndarray
    max_i_fd_ul: np.ndarray
    i_fd_dl: np.ndarray
    i_fd_ul: np.ndarray
    t_cohe_symbols: float
    t_cohe_s: float | None
    t_max_ul: float | None = None

    @property
    def finite(self) -> bool:
        return math.isfinite(self.t_cohe_symbols)

    def holds(self, T: int, margin: float = 0.0) -> tuple[bool, bool]:
        """(DL, UL): T above the coherence threshold and every user inside its budget."""
        if not T > self.t_cohe_symbols:
            return False, False
        scale = 1.0 - margin
        dl = bool(np.all(self.i_fd_dl <= scale * self.max_i_fd_dl))
        ul = bool(np.all(self.i_fd_ul <= scale * self.max_i_fd_ul))
        return dl, ul


def _inv(x: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.where(x > 0, 1.0 / np.where(x > 0, x, 1.0), np.inf)


def t_max_ul(config: SystemConfig, sinr_fd: np.ndarray, sinr_hd: np.ndarray) -> float:
    """Smallest T (symbols) at which SPT UL beats HD for every user; inf if none."""
    tau_fd, tau_hd = config.overhead("SPT"), config.overhead("HD")
    worst = -math.inf
    for fd, hd in zip(np.ravel(sinr_fd), np.ravel(sinr_hd)):
        den = 2.0 * fd - hd
        num = 2.0 * tau_fd * fd - tau_hd * hd
        if den <= 0:
            if num > 0 or den < 0:
                return math.inf
            continue
        worst = max(worst, num / den)
    return worst


def lemma_bounds(scheme: str, config: SystemConfig, sinr_inputs: SinrInputs,
                 T: int | None = None) -> LemmaBounds:
    """Maximum tolerable FD interference and minimum coherence time.

    ``T`` defaults to ``config.total_symbols``; budgets need a finite T.
    """
    T = config.total_symbols if T is None else T
    if T is None:
        raise DomainError("lemma bounds need the total symbol count T")
    t_si, t_uu, t_ud, t_mx = config.tau_si, config.tau_uu, config.tau_ud, config.tau_max
    x = sinr_inputs
    i_dl = _inv(x.dl_hd)  # pre-existing DL interference with S = 1
    i_fd_dl = np.maximum(_inv(x.dl_fd) - i_dl, 0.0)
    i_ul_base = _inv(x.ul_fd_base)
    i_fd_ul = np.maximum(_inv(x.ul_fd) - i_ul_base, 0.0)
    t_ul = None
    if scheme == "nSPT":
        c_dl = (T - 2 * (t_si + t_uu) - t_ud) / (T - t_ud)
        c_ul = (T - 2 * (t_si + t_ud) - t_uu) / (T - t_uu)
        max_dl = c_dl * i_dl
        max_ul = c_ul * _inv(x.ul_hd)
        t_cohe = float(max(2 * (t_si + t_uu) + t_ud, 2 * (t_si + t_ud) + t_uu))
    elif scheme == "SPT":
        c_dl = (T - 2 * t_mx - t_ud) / (T - t_ud)
        max_dl = c_dl * i_dl
        max_ul = 2 * (T - t_mx - t_ud) / ((T - t_uu) * x.ul_hd) - i_ul_base
        t_ul = t_max_ul(config, x.ul_fd, x.ul_hd)
        t_cohe = float(max(2 * t_mx + t_ud, t_ul))
    else:
        raise ValidationError(f"unknown pilot scheme {scheme!r}")
    t_s = config.symbol_duration_s
    t_cohe_s = None if t_s is None else t_s * t_cohe
    return LemmaBounds(max_dl, max_ul, i_fd_dl, i_fd_ul, t_cohe, t_cohe_s, t_ul)


def coherence_threshold(config: SystemConfig, scheme: str, sinr_inputs: SinrInputs | None = None) -> float:
    """Minimum coherence length in symbols (nSPT needs no SINRs)."""
    if scheme == "nSPT":
        t_si, t_uu, t_ud = config.tau_si, config.tau_uu, config.tau_ud
        return float(max(2 * (t_si + t_uu) + t_ud, 2 * (t_si + t_ud) + t_uu))
    if sinr_inputs is None:
        raise ValidationError("SPT threshold needs UL SINRs")
    return float(max(2 * config.tau_max + config.tau_ud,
                     t_max_ul(config, sinr_inputs.ul_fd, sinr_inputs.ul_hd)))
