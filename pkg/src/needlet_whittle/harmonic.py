"""Harmonic-space simulation of isotropic Gaussian fields.

Coefficients a_lm are drawn directly in harmonic space: a_l0 ~ N(0, C_l) real,
and Re/Im of a_lm ~ N(0, C_l/2) independently for m >= 1.  Only m >= 0 is
stored; negative m follows from the reality condition
a_{l,-m} = (-1)^m conj(a_lm).

Randomness is split per (seed, l): the degree-l row is a pure function of the
pair, so partial simulations, per-degree draws and parallel execution all
produce bit-identical coefficients.  Gaussians come from numpy's
``Generator.standard_normal`` (PCG64 + ziggurat), fixed for this release.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NeedletWhittleError, ResourceLimitError
from .spectrum import PowerSpectrumModel, c_l

__all__ = [
    "DEFAULT_LMAX_CAP",
    "AlmSet",
    "EmpiricalSpectrum",
    "ChatMoments",
    "alm_row",
    "simulate_alm",
    "empirical_cl",
    "chat_moments",
]

DEFAULT_LMAX_CAP = 8192

_ALM_MAGIC = b"NWALMSET"
_SPC_MAGIC = b"NWSPECTR"
_FORMAT_VERSION = 1
_HEADER = struct.Struct("<8sIIq")  # magic, version, l_max, seed


def _row_start(l: int) -> int:
    return (l - 1) * (l + 2) // 2


def _packed_size(l_max: int) -> int:
    return l_max * (l_max + 3) // 2


@dataclass
class AlmSet:
    """Packed triangular array of a_lm for 1 <= l <= l_max, 0 <= m <= l."""

    l_max: int
    seed: int
    data: np.ndarray  # complex128, length l_max*(l_max+3)/2

    def row(self, l: int) -> np.ndarray:
        """View of the (l, m >= 0) coefficients, length l + 1."""
        if not 1 <= l <= self.l_max:
            raise DomainError(f"l must be in [1, {self.l_max}]")
        s = _row_start(l)
        return self.data[s : s + l + 1]

    def coefficient(self, l: int, m: int) -> complex:
        if abs(m) > l:
            raise DomainError(f"|m| must be <= l, got m={m}, l={l}")
        if m >= 0:
            return complex(self.row(l)[m])
        return (-1) ** (-m) * complex(np.conj(self.row(l)[-m]))

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(_HEADER.pack(_ALM_MAGIC, _FORMAT_VERSION, self.l_max, self.seed))
            fh.write(np.ascontiguousarray(self.data, dtype="<c16").tobytes())

    @classmethod
    def load(cls, path) -> "AlmSet":
        with open(path, "rb") as fh:
            magic, version, l_max, seed = _HEADER.unpack(fh.read(_HEADER.size))
            if magic != _ALM_MAGIC:
                raise NeedletWhittleError(f"{path}: not an AlmSet file")
            if version != _FORMAT_VERSION:
                raise NeedletWhittleError(f"{path}: unsupported version {version}")
            data = np.frombuffer(fh.read(), dtype="<c16").astype(np.complex128)
        if data.size != _packed_size(l_max):
            raise NeedletWhittleError(f"{path}: truncated payload")
        return cls(l_max=l_max, seed=seed, data=data)


def _rng_for(seed: int, l: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((int(seed) & 0xFFFFFFFFFFFFFFFF, l)))


def alm_row(model: PowerSpectrumModel, l: int, seed: int) -> np.ndarray:
    """The degree-l coefficient row (m >= 0), deterministic in (seed, l)."""
    if l < 1:
        raise DomainError("l must be >= 1")
    z = _rng_for(seed, l).standard_normal(2 * l + 1)
    c = c_l(model, l)
    row = np.empty(l + 1, dtype=complex)
    row[0] = np.sqrt(c) * z[0]
    row[1:] = np.sqrt(c / 2.0) * (z[1::2] + 1j * z[2::2])
    return row


def simulate_alm(
    model: PowerSpectrumModel,
    l_max: int,
    seed: int,
    l_max_cap: int = DEFAULT_LMAX_CAP,
) -> AlmSet:
    """Draw a full coefficient set up to l_max."""
    if l_max < 1:
        raise DomainError("l_max must be >= 1")
    if l_max > l_max_cap:
        raise ResourceLimitError(f"l_max={l_max} exceeds cap {l_max_cap}")
    data = np.empty(_packed_size(l_max), dtype=complex)
    for l in range(1, l_max + 1):
        s = _row_start(l)
        data[s : s + l + 1] = alm_row(model, l, seed)
    return AlmSet(l_max=l_max, seed=seed, data=data)


@dataclass
class EmpiricalSpectrum:
    """Empirical angular power spectrum; ``values[l]`` is c-hat_l, values[0] unused."""

    l_max: int
    values: np.ndarray  # length l_max + 1, values[0] == 0
    seed: int = 0

    def c_hat(self, l: int) -> float:
        if not 1 <= l <= self.l_max:
            raise DomainError(f"l must be in [1, {self.l_max}]")
        return float(self.values[l])

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(_HEADER.pack(_SPC_MAGIC, _FORMAT_VERSION, self.l_max, self.seed))
            fh.write(np.ascontiguousarray(self.values[1:], dtype="<f8").tobytes())

    @classmethod
    def load(cls, path) -> "EmpiricalSpectrum":
        with open(path, "rb") as fh:
            magic, version, l_max, seed = _HEADER.unpack(fh.read(_HEADER.size))
            if magic != _SPC_MAGIC:
                raise NeedletWhittleError(f"{path}: not an EmpiricalSpectrum file")
            if version != _FORMAT_VERSION:
                raise NeedletWhittleError(f"{path}: unsupported version {version}")
            payload = np.frombuffer(fh.read(), dtype="<f8").astype(float)
        if payload.size != l_max:
            raise NeedletWhittleError(f"{path}: truncated payload")
        values = np.concatenate([[0.0], payload])
        return cls(l_max=l_max, values=values, seed=seed)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write("l,c_hat\n")
            for l in range(1, self.l_max + 1):
                fh.write(f"{l},{self.values[l]:.17g}\n")

    @classmethod
    def from_csv(cls, path) -> "EmpiricalSpectrum":
        ls, vals = [], []
        with open(path) as fh:
            header = fh.readline().strip()
            if header.split(",")[:2] != ["l", "c_hat"]:
                raise NeedletWhittleError(f"{path}: unexpected CSV header {header!r}")
            for line in fh:
                if not line.strip():
                    continue
                a, b = line.split(",")[:2]
                ls.append(int(a))
                vals.append(float(b))
        l_max = max(ls)
        values = np.zeros(l_max + 1)
        values[np.array(ls)] = vals
        return cls(l_max=l_max, values=values)


def empirical_cl(alm: AlmSet) -> EmpiricalSpectrum:
    """c-hat_l = (2l+1)^-1 sum_m |a_lm|^2, negative m expanded by reality."""
    mag = alm.data.real**2 + alm.data.imag**2
    starts = np.array([_row_start(l) for l in range(1, alm.l_max + 1)])
    sums = np.add.reduceat(mag, starts)
    ls = np.arange(1, alm.l_max + 1)
    values = np.concatenate([[0.0], (2.0 * sums - mag[starts]) / (2 * ls + 1)])
    return EmpiricalSpectrum(l_max=alm.l_max, values=values, seed=alm.seed)


@dataclass(frozen=True)
class ChatMoments:
    mean: float
    variance: float
    cum4: float


def chat_moments(model: PowerSpectrumModel, l: int) -> ChatMoments:
    """Exact sampling moments of c-hat_l: scaled chi-square with 2l+1 dof."""
    c = c_l(model, l)
    k = 2 * l + 1
    return ChatMoments(mean=c, variance=2.0 * c * c / k, cum4=48.0 * c**4 / k**3)
