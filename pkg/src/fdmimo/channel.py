"""Large-scale gain profiles and Rayleigh small-scale realizations.

Index conventions used throughout the package:

* ``d_dl[b, c, k]`` -- gain from BS ``b`` to DL user ``k`` of cell ``c``
* ``d_ul[b, c, k]`` -- gain from UL user ``k`` of cell ``c`` to BS ``b``
* ``d_bs[r, t]``    -- gain from BS ``t`` (Tx) to BS ``r`` (Rx), ``r != t``;
  the diagonal is zero and the self-interference block lives in ``si``
* ``d_ue[i, j, u, k]`` -- gain from UL user ``u`` of cell ``j`` to DL user
  ``k`` of cell ``i``
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np

from .config import Geometry, SystemConfig, pathloss_gain, shadowing
from .errors import ContractError

# substream families under one root seed
FAMILY_GEOMETRY = 0
FAMILY_SHADOW = 1
FAMILY_CHANNEL = 2
FAMILY_PILOT = 3
FAMILY_IMPAIRMENT = 4
FAMILY_SYMBOLS = 5


def substream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for ``(seed, *key)``; extra trials never shift earlier ones."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(key)))


def crandn(rng: np.random.Generator, shape) -> np.ndarray:
    """Circularly-symmetric CN(0, 1) samples."""
    re = rng.standard_normal(shape)
    im = rng.standard_normal(shape)
    return (re + 1j * im) / math.sqrt(2.0)


@dataclass(frozen=True)
class SiArray:
    """Self-interference gains between the Tx and Rx arrays of one BS.

    Two parallel uniform linear arrays with element spacing ``spacing`` and
    broadside separation ``gap``. The gain only depends on the index offset
    ``l - m``, which lets row sums and full reductions run without forming
    the M_r x M_t matrix. ``explicit`` overrides the geometry (tests, zeroed
    SI).
    """

    m_rx: int
    m_tx: int
    spacing: float
    gap: float
    wavelength: float
    explicit: np.ndarray | None = None

    @classmethod
    def from_config(cls, config: SystemConfig) -> "SiArray":
        return cls(config.m_rx, config.m_tx, config.bs_antenna_spacing_m,
                   config.si_array_gap_m, config.wavelength_m)

    @classmethod
    def from_matrix(cls, gains: np.ndarray) -> "SiArray":
        gains = np.asarray(gains, dtype=float)
        return cls(gains.shape[0], gains.shape[1], 0.0, 0.0, 0.0, gains)

    def _offset_gain(self) -> np.ndarray:
        offsets = np.arange(-(self.m_tx - 1), self.m_rx)
        dist = np.hypot(offsets * self.spacing, self.gap)
        return (self.wavelength / (4.0 * math.pi * dist)) ** 2

    def rows(self, start: int, stop: int) -> np.ndarray:
        if self.explicit is not None:
            return self.explicit[start:stop]
        og = self._offset_gain()
        idx = np.arange(start, stop)[:, None] - np.arange(self.m_tx)[None, :]
        return og[idx + self.m_tx - 1]

    def matrix(self) -> np.ndarray:
        return self.rows(0, self.m_rx)

    @cached_property
    def row_sums(self) -> np.ndarray:
        if self.explicit is not None:
            return self.explicit.sum(axis=1)
        csum = np.concatenate([[0.0], np.cumsum(self._offset_gain())])
        ell = np.arange(self.m_rx)
        # row l covers offsets l-(M_t-1) .. l  -> indices l .. l+M_t-1
        return csum[ell + self.m_tx] - csum[ell]

    @cached_property
    def total(self) -> float:
        return float(self.row_sums.sum())

    def reduce(self, fn: Callable[[np.ndarray, np.ndarray], np.ndarray], chunk: int = 1024) -> float:
        """Sum ``fn(gain_rows, row_sums)`` over all (l, m) in row chunks."""
        acc = 0.0
        sums = self.row_sums
        for start in range(0, self.m_rx, chunk):
            stop = min(start + chunk, self.m_rx)
            acc += float(np.sum(fn(self.rows(start, stop), sums[start:stop, None])))
        return acc


@dataclass(frozen=True)
class LargeScaleProfile:
    """All large-scale power gains for one geometry draw."""

    d_dl: np.ndarray
    d_ul: np.ndarray
    d_bs: np.ndarray
    d_ue: np.ndarray
    si: SiArray

    def __post_init__(self) -> None:
        n = self.d_bs.shape[0]
        if self.d_dl.shape[:2] != (n, n) or self.d_ul.shape[:2] != (n, n):
            raise ContractError("profile link arrays must be (N, N, K)")
        if self.d_ue.shape != (n, n, self.d_ul.shape[2], self.d_dl.shape[2]):
            raise ContractError("d_ue must be (N, N, K_UL, K_DL)")
        for name in ("d_dl", "d_ul", "d_bs", "d_ue"):
            if np.any(getattr(self, name) < 0):
                raise ContractError(f"{name} has negative gains")

    @property
    def n_cells(self) -> int:
        return self.d_bs.shape[0]

    @property
    def k_dl(self) -> int:
        return self.d_dl.shape[2]

    @property
    def k_ul(self) -> int:
        return self.d_ul.shape[2]

    @property
    def d_si(self) -> np.ndarray:
        """(M_r, M_t) SI gains, identical for every BS."""
        return self.si.matrix()

    def check(self, config: SystemConfig) -> None:
        if (self.n_cells, self.k_dl, self.k_ul) != (config.n_cells, config.k_dl, config.k_ul):
            raise ContractError("profile dimensions do not match config")
        if (self.si.m_rx, self.si.m_tx) != (config.m_rx, config.m_tx):
            raise ContractError("SI array does not match config antenna counts")


def build_profile(config: SystemConfig, geometry: Geometry, seed: int) -> LargeScaleProfile:
    """Gains for every link; fresh shadowing per link except BS-BS and SI."""
    rng = substream(seed, FAMILY_SHADOW)
    z_dl = shadowing(rng, geometry.dist_dl.shape, config.shadow_db)
    z_ul = shadowing(rng, geometry.dist_ul.shape, config.shadow_db)
    z_ue = shadowing(rng, geometry.dist_ue.shape, config.shadow_db)
    d_dl = pathloss_gain(geometry.dist_dl, z_dl, "user-link", config)
    d_ul = pathloss_gain(geometry.dist_ul, z_ul, "user-link", config)
    d_ue = pathloss_gain(geometry.dist_ue, z_ue, "user-link", config)
    n = config.n_cells
    d_bs = np.zeros((n, n))
    off = ~np.eye(n, dtype=bool)
    if n > 1:
        d_bs[off] = pathloss_gain(geometry.dist_bs[off], 1.0, "bs-bs", config)
    return LargeScaleProfile(np.asarray(d_dl), np.asarray(d_ul), d_bs, np.asarray(d_ue),
                             SiArray.from_config(config))


@dataclass(frozen=True)
class ChannelRealization:
    """Small-scale fading H for every channel family (CN(0,1) entries).

    Shapes: ``h_dl`` (N, N, K_DL, M_t), ``h_ul`` (N, N, K_UL, M_r),
    ``h_bs`` (N, N, M_r, M_t) with SI on the diagonal blocks,
    ``h_ue`` (N, N, K_UL, K_DL).
    """

    h_dl: np.ndarray
    h_ul: np.ndarray
    h_bs: np.ndarray
    h_ue: np.ndarray
    profile: LargeScaleProfile = field(repr=False)

    @cached_property
    def g_dl(self) -> np.ndarray:
        return self.h_dl * np.sqrt(self.profile.d_dl)[..., None]

    @cached_property
    def g_ul(self) -> np.ndarray:
        return self.h_ul * np.sqrt(self.profile.d_ul)[..., None]

    @cached_property
    def g_bs(self) -> np.ndarray:
        n = self.profile.n_cells
        scale = np.broadcast_to(np.sqrt(self.profile.d_bs)[:, :, None, None],
                                self.h_bs.shape).copy()
        si = np.sqrt(self.profile.d_si)
        for i in range(n):
            scale[i, i] = si
        return self.h_bs * scale

    @cached_property
    def g_ue(self) -> np.ndarray:
        return self.h_ue * np.sqrt(self.profile.d_ue)


def sample_channels(profile: LargeScaleProfile, seed: int, trial: int = 0) -> ChannelRealization:
    rng = substream(seed, FAMILY_CHANNEL, trial)
    n = profile.n_cells
    m_rx, m_tx = profile.si.m_rx, profile.si.m_tx
    return ChannelRealization(
        h_dl=crandn(rng, (n, n, profile.k_dl, m_tx)),
        h_ul=crandn(rng, (n, n, profile.k_ul, m_rx)),
        h_bs=crandn(rng, (n, n, m_rx, m_tx)),
        h_ue=crandn(rng, (n, n, profile.k_ul, profile.k_dl)),
        profile=profile,
    )


# debug dump ----------------------------------------------------------------

_MAGIC = b"FDCH"


def dump_realization(real: ChannelRealization) -> bytes:
    """Little-endian dump: magic, family count, then per family ndim, dims, complex64 data."""
    out = [_MAGIC, struct.pack("<I", 4)]
    for arr in (real.h_dl, real.h_ul, real.h_bs, real.h_ue):
        out.append(struct.pack("<I", arr.ndim))
        out.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        out.append(np.ascontiguousarray(arr, dtype="<c8").tobytes())
    return b"".join(out)


def load_realization_arrays(blob: bytes) -> list[np.ndarray]:
    if blob[:4] != _MAGIC:
        raise ContractError("not a channel dump")
    pos = 4
    (count,) = struct.unpack_from("<I", blob, pos)
    pos += 4
    arrays = []
    for _ in range(count):
        (ndim,) = struct.unpack_from("<I", blob, pos)
        pos += 4
        shape = struct.unpack_from(f"<{ndim}I", blob, pos)
        pos += 4 * ndim
        size = int(np.prod(shape)) * 8
        arrays.append(np.frombuffer(blob, dtype="<c8", count=size // 8, offset=pos).reshape(shape))
        pos += size
    return arrays
