"""System configuration, cell layout and path-loss laws."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields
from typing import Any, Mapping

import numpy as np

from .errors import DomainError, ValidationError

SPEED_OF_LIGHT = 3e8

MANDATORY = ("n_cells", "m_tx", "m_rx", "k_dl", "k_ul", "p_ref_dbm", "cell_radius_m")
SCENARIOS = ("non-cooperative", "cooperative")


def dbm_to_mw(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0)


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


@dataclass(frozen=True)
class SystemConfig:
    """Scalar parameters of an N-cell full-duplex system.

    Powers are kept in dBm / dB as entered; the ``*_mw`` and linear
    properties give the values used by the numerics (milliwatts).
    """

    n_cells: int
    m_tx: int
    m_rx: int
    k_dl: int
    k_ul: int
    p_ref_dbm: float
    cell_radius_m: float
    noise_floor_dbm: float = -90.0
    alpha_db: float = -100.0
    beta_db: float = -100.0
    c_dl_bpshz: float = 20.0
    c_ul_bpshz: float = 20.0
    tau_si: int | None = None
    tau_uu: int | None = None
    tau_ud: int | None = None
    total_symbols: int | None = None
    symbol_duration_s: float | None = None
    carrier_hz: float = 2.4e9
    pathloss_exp: float = 3.8
    shadow_db: float = 8.0
    boundary_fraction: float = 0.05
    bs_antenna_spacing_m: float | None = None
    si_array_gap_m: float = 0.5
    power_scaling: bool = True
    scenario: str = "non-cooperative"

    def __post_init__(self) -> None:
        # pilot lengths default to the minimum orthogonal length
        if self.tau_si is None:
            object.__setattr__(self, "tau_si", self.m_tx)
        if self.tau_uu is None:
            object.__setattr__(self, "tau_uu", self.k_ul)
        if self.tau_ud is None:
            object.__setattr__(self, "tau_ud", self.k_dl)
        if self.bs_antenna_spacing_m is None:
            object.__setattr__(self, "bs_antenna_spacing_m", self.wavelength_m / 2)
        self._validate()

    def _validate(self) -> None:
        for name in ("n_cells", "m_tx", "m_rx"):
            if getattr(self, name) < 1:
                raise ValidationError(f"{name} must be >= 1")
        for name in ("k_dl", "k_ul"):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be >= 0")
        if self.tau_si < self.m_tx:
            raise ValidationError("tau_si >= m_tx violated (SI pilot orthogonality)")
        if self.tau_uu < self.k_ul:
            raise ValidationError("tau_uu >= k_ul violated (UL pilot orthogonality)")
        if self.tau_ud < self.k_dl:
            raise ValidationError("tau_ud >= k_dl violated (DL pilot orthogonality)")
        if not 0.0 < self.boundary_fraction <= 1.0:
            raise ValidationError("boundary_fraction must lie in (0, 1]")
        if self.cell_radius_m <= 0:
            raise ValidationError("cell_radius_m must be > 0")
        if self.c_dl_bpshz <= 0 or self.c_ul_bpshz <= 0:
            raise ValidationError("fronthaul capacities must be > 0")
        if self.scenario not in SCENARIOS:
            raise ValidationError(f"scenario must be one of {SCENARIOS}")
        if self.total_symbols is not None:
            worst = max(self.overhead("nSPT"), self.overhead("SPT"), self.overhead("HD"))
            if self.total_symbols <= worst:
                raise ValidationError(
                    f"total_symbols > pilot overhead violated ({self.total_symbols} <= {worst})"
                )

    # derived quantities -------------------------------------------------

    @property
    def wavelength_m(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_hz

    @property
    def alpha(self) -> float:
        return db_to_linear(self.alpha_db)

    @property
    def beta(self) -> float:
        return db_to_linear(self.beta_db)

    @property
    def noise_mw(self) -> float:
        return dbm_to_mw(self.noise_floor_dbm)

    @property
    def p_ref_mw(self) -> float:
        return dbm_to_mw(self.p_ref_dbm)

    @property
    def p_dl_mw(self) -> float:
        """DL transmit power P_d; scaled as P_r / sqrt(M_t) when power_scaling is on."""
        if self.power_scaling:
            return self.p_ref_mw / math.sqrt(self.m_tx)
        return self.p_ref_mw

    @property
    def p_ul_mw(self) -> float:
        return self.p_dl_mw

    @property
    def tau_max(self) -> int:
        return max(self.tau_si, self.tau_uu)

    def overhead(self, scheme: str) -> int:
        """Pilot symbols per coherence block for ``nSPT``, ``SPT`` or ``HD``."""
        if scheme == "nSPT":
            return self.tau_si + self.tau_uu + self.tau_ud
        if scheme == "SPT":
            return self.tau_max + self.tau_ud
        if scheme == "HD":
            return self.tau_uu + self.tau_ud
        raise ValidationError(f"unknown scheme {scheme!r}")

    def with_(self, **changes: Any) -> "SystemConfig":
        """Copy with overrides; pilot lengths tied to M/K follow unless given."""
        data = {f.name: getattr(self, f.name) for f in fields(self)}
        for tied, source in (("tau_si", "m_tx"), ("tau_uu", "k_ul"), ("tau_ud", "k_dl")):
            if source in changes and tied not in changes and data[tied] == data[source]:
                data[tied] = None
        if "carrier_hz" in changes and "bs_antenna_spacing_m" not in changes:
            if math.isclose(data["bs_antenna_spacing_m"], self.wavelength_m / 2):
                data["bs_antenna_spacing_m"] = None
        data.update(changes)
        return SystemConfig(**data)

    def to_dict(self) -> dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def config_from_mapping(doc: Mapping[str, Any]) -> SystemConfig:
    known = {f.name for f in fields(SystemConfig)}
    for name in MANDATORY:
        if name not in doc:
            raise ValidationError(f"{name} missing")
    unknown = sorted(set(doc) - known)
    if unknown:
        raise ValidationError(f"unknown config field(s): {', '.join(unknown)}")
    kwargs = dict(doc)
    for name in ("n_cells", "m_tx", "m_rx", "k_dl", "k_ul", "tau_si", "tau_uu",
                 "tau_ud", "total_symbols"):
        value = kwargs.get(name)
        if value is not None:
            if isinstance(value, bool) or float(value) != int(value):
                raise ValidationError(f"{name} must be an integer")
            kwargs[name] = int(value)
    try:
        return SystemConfig(**kwargs)
    except TypeError as exc:
        raise ValidationError(str(exc)) from exc


def load_config(text: str) -> SystemConfig:
    """Parse a JSON config document into a validated :class:`SystemConfig`."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ValidationError("config document must be a JSON object")
    return config_from_mapping(doc)


# geometry ------------------------------------------------------------------

@dataclass(frozen=True)
class Geometry:
    """BS and user coordinates (meters) plus the derived link distances.

    Distance arrays are indexed ``[bs, cell, user]`` for BS-user links,
    ``[dl_cell, ul_cell, k_ul, k_dl]`` for UE-UE links and ``[bs, bs]``
    between base stations.
    """

    bs_positions: np.ndarray
    dl_user_positions: np.ndarray  # (N, K_DL, 2)
    ul_user_positions: np.ndarray  # (N, K_UL, 2)
    dist_dl: np.ndarray = field(init=False)
    dist_ul: np.ndarray = field(init=False)
    dist_ue: np.ndarray = field(init=False)
    dist_bs: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        bs = self.bs_positions
        dl, ul = self.dl_user_positions, self.ul_user_positions
        object.__setattr__(self, "dist_dl", _pairwise(bs[:, None, None, :], dl[None]))
        object.__setattr__(self, "dist_ul", _pairwise(bs[:, None, None, :], ul[None]))
        # UE-UE: [dl_cell, ul_cell, k_ul, k_dl]
        ue = _pairwise(dl[:, None, None, :, :], ul[None, :, :, None, :])
        object.__setattr__(self, "dist_ue", ue)
        object.__setattr__(self, "dist_bs", _pairwise(bs[:, None, :], bs[None, :, :]))


def _pairwise(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum((a - b) ** 2, axis=-1))


def bs_layout(n_cells: int, cell_radius_m: float) -> np.ndarray:
    """BS sites on a regular N-gon with inter-site distance 2r."""
    if n_cells == 1:
        return np.zeros((1, 2))
    isd = 2.0 * cell_radius_m
    circumradius = isd / (2.0 * math.sin(math.pi / n_cells))
    angles = 2.0 * math.pi * np.arange(n_cells) / n_cells
    return circumradius * np.stack([np.cos(angles), np.sin(angles)], axis=-1)


def _ring(rng: np.random.Generator, count: int, r_in: float, r_out: float) -> np.ndarray:
    theta = rng.uniform(0.0, 2.0 * math.pi, size=count)
    radius = rng.uniform(r_in, r_out, size=count)
    return np.stack([radius * np.cos(theta), radius * np.sin(theta)], axis=-1)


def place_users(config: SystemConfig, seed: int) -> Geometry:
    """Drop K_DL + K_UL cell-boundary users per cell, deterministically in ``seed``."""
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0,)))
    bs = bs_layout(config.n_cells, config.cell_radius_m)
    r_out = config.cell_radius_m
    r_in = (1.0 - config.boundary_fraction) * r_out
    dl = np.empty((config.n_cells, config.k_dl, 2))
    ul = np.empty((config.n_cells, config.k_ul, 2))
    for c in range(config.n_cells):
        dl[c] = bs[c] + _ring(rng, config.k_dl, r_in, r_out)
        ul[c] = bs[c] + _ring(rng, config.k_ul, r_in, r_out)
    return Geometry(bs, dl, ul)


# path loss -----------------------------------------------------------------

LINK_KINDS = ("user-link", "bs-bs", "self-interference")


def pathloss_gain(distance, shadow_draw, kind: str, config: SystemConfig):
    """Power gain of a link.

    ``user-link`` and ``bs-bs`` follow z / d^v with log-normal ``shadow_draw``
    z; ``self-interference`` is the free-space gain (lambda / (4 pi d))^2 and
    ignores ``shadow_draw``. Works elementwise on arrays.
    """
    d = np.asarray(distance, dtype=float)
    if np.any(d <= 0):
        raise DomainError("pathloss_gain requires distance > 0")
    if kind in ("user-link", "bs-bs"):
        out = np.asarray(shadow_draw, dtype=float) / d ** config.pathloss_exp
    elif kind == "self-interference":
        out = (config.wavelength_m / (4.0 * math.pi * d)) ** 2
    else:
        raise ValidationError(f"unknown link kind {kind!r}")
    return out if out.ndim else float(out)


def shadowing(rng: np.random.Generator, shape, shadow_db: float) -> np.ndarray:
    """Log-normal factors z with 10 log10 z ~ N(0, shadow_db^2)."""
    return 10.0 ** (rng.normal(0.0, shadow_db, size=shape) / 10.0)
