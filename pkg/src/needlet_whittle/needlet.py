"""Needlet window functions and level statistics.

Two window families share one interface:

* ``MexicanWindow(p, B)`` -- squared profile f_p^2(x) = x^(4p) exp(-2 x^2),
  supported on all frequencies; sums over l are truncated where terms fall
  below double-precision relevance (see ``cutoff_x``).
* ``StandardWindow(B)``   -- compactly supported b^2 on [1/B, B] built from the
  classical C-infinity bump profile, satisfying the partition of unity
  sum_j b^2(x / B^j) = 1 for x >= 1.

On top of the windows: the normalized spectral moments ``k_j`` and their
alpha-derivatives, the level energy statistic ``lambda_hat`` and the level
range selection rule.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DomainError, TruncationError
from .harmonic import EmpiricalSpectrum

__all__ = [
    "MexicanWindow",
    "StandardWindow",
    "NeedletWindow",
    "JRange",
    "NeedletStatistics",
    "window_sq",
    "k_j",
    "k_j_deriv",
    "lambda_hat",
    "select_j_range",
    "compute_statistics",
]

MEXICAN_TAIL_RATIO = 1e-16  # terms below this fraction of the peak are dropped


@lru_cache(maxsize=None)
def _cutoff_x(p: int) -> float:
    # solve x^(4p) exp(-2x^2) = MEXICAN_TAIL_RATIO * p^(2p) exp(-2p), x > sqrt(p)
    target = math.log(MEXICAN_TAIL_RATIO) + 2 * p * math.log(p) - 2 * p
    lo, hi = math.sqrt(p), 10.0 * math.sqrt(p)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if 4 * p * math.log(mid) - 2 * mid * mid > target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class MexicanWindow:
    p: int
    B: float
    kind = "mexican"

    def __post_init__(self):
        if self.p < 1:
            raise DomainError(f"p must be >= 1, got {self.p}")
        if not self.B > 1:
            raise DomainError(f"B must exceed 1, got {self.B}")

    def window(self, x):
        x = np.asarray(x, dtype=float)
        return x ** (2 * self.p) * np.exp(-(x**2))

    def window_sq(self, x):
        x = np.asarray(x, dtype=float)
        return x ** (4 * self.p) * np.exp(-2.0 * x**2)

    @property
    def cutoff_x(self) -> float:
        return _cutoff_x(self.p)

    @property
    def peak_x(self) -> float:
        # stationary point of f_p (and of f_p^2)
        return math.sqrt(self.p)

    def effective_lmax(self, j: int, l_max: int) -> int:
        return min(l_max, int(math.ceil(self.B**j * self.cutoff_x)))

    def check_band(self, j: int, l_max: int) -> None:
        # the window peak must be resolved by the available band
        if self.B**j * self.peak_x > l_max:
            raise TruncationError(
                f"level j={j}: window peak at l~{self.B ** j * self.peak_x:.0f} "
                f"exceeds l_max={l_max}"
            )


# C-infinity bump profile machinery for the compact window -------------------

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(64)


def _bump(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    inside = np.abs(t) < 1
    out[inside] = np.exp(-1.0 / (1.0 - t[inside] ** 2))
    return out


_BUMP_NORM = float(np.sum(_GL_WEIGHTS * _bump(_GL_NODES)))


def _bump_cdf(u):
    """psi(u) = int_{-1}^{u} bump / int_{-1}^{1} bump, in [0, 1]."""
    u = np.clip(np.asarray(u, dtype=float), -1.0, 1.0)
    half = (u + 1.0) / 2.0  # map [-1, u] onto GL nodes
    t = -1.0 + half[..., None] * (_GL_NODES + 1.0)
    return np.sum(_GL_WEIGHTS * _bump(t), axis=-1) * half / _BUMP_NORM


@dataclass(frozen=True)
class StandardWindow:
    B: float
    profile: str = "bump"
    kind = "standard"

    def __post_init__(self):
        if not self.B > 1:
            raise DomainError(f"B must exceed 1, got {self.B}")
        if self.profile != "bump":
            raise DomainError(f"unknown smoothness profile {self.profile!r}")

    def _phi(self, x):
        """1 on [0, 1/B], smooth descent to 0 on [1/B, 1]."""
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        out[x <= 1.0 / self.B] = 1.0
        mid = (x > 1.0 / self.B) & (x < 1.0)
        t = 1.0 - 2.0 * self.B / (self.B - 1.0) * (x[mid] - 1.0 / self.B)
        out[mid] = _bump_cdf(t)
        return out

    def window_sq(self, x):
        x = np.asarray(x, dtype=float)
        return np.clip(self._phi(x / self.B) - self._phi(x), 0.0, None)

    def window(self, x):
        return np.sqrt(self.window_sq(x))

    def effective_lmax(self, j: int, l_max: int) -> int:
        return min(l_max, int(math.ceil(self.B ** (j + 1))) - 1)

    def check_band(self, j: int, l_max: int) -> None:
        if self.B ** (j + 1) > l_max * (1.0 + 1e-12):
            raise TruncationError(
                f"level j={j}: support end B^(j+1)={self.B ** (j + 1):.1f} "
                f"exceeds l_max={l_max}"
            )


NeedletWindow = MexicanWindow | StandardWindow


def window_sq(window: NeedletWindow, x):
    """Squared window value(s) at frequency ratio x >= 0."""
    x_arr = np.asarray(x, dtype=float)
    if np.any(x_arr < 0):
        raise DomainError("x must be >= 0")
    out = window.window_sq(x_arr)
    return out if isinstance(x, np.ndarray) else float(out)


@dataclass(frozen=True)
class JRange:
    j0: int
    jL: int
    c_b: float = 1.0

    def __post_init__(self):
        if self.j0 > self.jL:
            raise DomainError(f"empty level range: j0={self.j0} > jL={self.jL}")
        if not self.c_b > 0:
            raise DomainError("c_b must be positive")

    def levels(self) -> list[int]:
        return list(range(self.j0, self.jL + 1))

    def n_j(self, j: int, B: float) -> float:
        return self.c_b * B ** (2.0 * j)


def _level_terms(window: NeedletWindow, j: int, l_max: int):
    """(l, w_l) with w_l = window_sq(l/B^j) (2l+1), truncated per the window."""
    le = window.effective_lmax(j, l_max)
    if le < 1:
        raise TruncationError(f"level j={j}: no frequencies below l_max={l_max}")
    l = np.arange(1, le + 1, dtype=float)
    w = window.window_sq(l / window.B**j) * (2.0 * l + 1.0)
    return l, w


def _mexican_tail_check(window, j, alpha, l_max, partial, log_order, tail_tol):
    """Geometric bound on the dropped tail when l_max cuts inside the window."""
    if window.effective_lmax(j, l_max) < l_max:
        return  # truncated by the window's own cutoff, below relevance
    def term(l):
        t = window.window_sq(l / window.B**j) * (2 * l + 1) * l ** (-alpha)
        return t * abs(math.log(l)) ** log_order
    t1, t2 = term(l_max + 1.0), term(l_max + 2.0)
    if t1 == 0.0:
        return
    ratio = t2 / t1
    if ratio >= 1.0:
        raise TruncationError(
            f"level j={j}: terms still growing at l_max={l_max}; window peak unresolved"
        )
    bound = t1 / (1.0 - ratio)
    if bound > tail_tol * abs(partial):
        raise TruncationError(
            f"level j={j}: dropped tail bound {bound:.3e} exceeds "
            f"{tail_tol:.1e} of the partial sum at l_max={l_max}"
        )


def k_j(
    window: NeedletWindow,
    j: int,
    alpha: float,
    l_max: int,
    c_b: float = 1.0,
    *,
    check_tail: bool = True,
    tail_tol: float = 1e-12,
) -> float:
    """Normalized spectral moment (1/N_j) sum_l window_sq(l/B^j)(2l+1) l^-alpha.

    With ``check_tail`` the dropped tail beyond l_max must stay below
    ``tail_tol`` of the sum (geometric bound past the window peak); the
    estimator disables the check and relies on truncation consistency with
    ``lambda_hat`` instead.
    """
    window.check_band(j, l_max)
    l, w = _level_terms(window, j, l_max)
    out = float(np.sum(w * l ** (-alpha))) / (c_b * window.B ** (2.0 * j))
    if check_tail and isinstance(window, MexicanWindow):
        _mexican_tail_check(window, j, alpha, l_max, out * c_b * window.B ** (2.0 * j), 0, tail_tol)
    return out


def k_j_deriv(
    window: NeedletWindow,
    j: int,
    alpha: float,
    l_max: int,
    order: int,
    c_b: float = 1.0,
    *,
    check_tail: bool = True,
    tail_tol: float = 1e-12,
) -> float:
    """Term-wise alpha-derivative of ``k_j``: order 1 inserts -log l, order 2 log^2 l."""
    if order not in (1, 2):
        raise DomainError("order must be 1 or 2")
    window.check_band(j, l_max)
    l, w = _level_terms(window, j, l_max)
    logl = np.log(l)
    factor = -logl if order == 1 else logl**2
    raw = float(np.sum(w * l ** (-alpha) * factor))
    if check_tail and isinstance(window, MexicanWindow):
        _mexican_tail_check(window, j, alpha, l_max, raw, order, tail_tol)
    return raw / (c_b * window.B ** (2.0 * j))


def lambda_hat(
    spec: EmpiricalSpectrum,
    window: NeedletWindow,
    j: int,
    l_max: int | None = None,
) -> float:
    """Level energy statistic sum_l window_sq(l/B^j)(2l+1) c-hat_l."""
    l_max = spec.l_max if l_max is None else min(l_max, spec.l_max)
    window.check_band(j, l_max)
    l, w = _level_terms(window, j, l_max)
    return float(np.sum(w * spec.values[1 : len(l) + 1]))


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def select_j_range(
    l_max: int,
    window: NeedletWindow,
    thresholds: tuple[float, float] | None = None,
    c_b: float = 1.0,
) -> JRange:
    """Level range [J0, JL] for data banded at l_max.

    Default policy: J0 = 1 and JL = round(log_B(l_max / B)) (round half up);
    for compact windows JL is additionally clamped so the top-level support
    fits below l_max.  Custom ``thresholds = (eps1, eps2)`` instead apply the
    two ratio conditions verbatim:

        J0 = max{j : f_p(B^-(j+1)) > eps1 f_p(B^-j)},
        JL = min{j : f_p(l_max/B^j) < eps2 f_p(l_max/B^(j-1))}.
    """
    B = window.B
    if l_max < B * B:
        raise DomainError(f"l_max={l_max} must be >= B^2={B * B}")
    if thresholds is None:
        jL = _round_half_up(math.log(l_max / B) / math.log(B))
        if isinstance(window, StandardWindow):
            while jL > 1 and B ** (jL + 1) > l_max * (1.0 + 1e-12):
                jL -= 1
        return JRange(j0=1, jL=jL, c_b=c_b)
    if not isinstance(window, MexicanWindow):
        raise DomainError("threshold-based selection requires a mexican window")
    eps1, eps2 = thresholds
    f = window.window
    j0 = None
    for j in range(64, -65, -1):
        if f(1.0 / B ** (j + 1)) > eps1 * f(1.0 / B**j):
            j0 = j
            break
    jL = None
    for j in range(-64, 65):
        if f(l_max / B**j) < eps2 * f(l_max / B ** (j - 1)):
            jL = j
            break
    if j0 is None or jL is None or j0 > jL:
        raise DomainError(f"thresholds produced an empty level range: ({j0}, {jL})")
    return JRange(j0=j0, jL=jL, c_b=c_b)


@dataclass
class NeedletStatistics:
    j_range: JRange
    window: NeedletWindow
    l_max: int
    lam: np.ndarray  # lambda-hat per level, index aligned with j_range.levels()

    def n_j(self) -> np.ndarray:
        return np.array([self.j_range.n_j(j, self.window.B) for j in self.j_range.levels()])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write("j,B_pow_j,N_j,lambda_hat\n")
            for j, lam in zip(self.j_range.levels(), self.lam):
                fh.write(
                    f"{j},{self.window.B ** j:.17g},"
                    f"{self.j_range.n_j(j, self.window.B):.17g},{lam:.17g}\n"
                )


def compute_statistics(
    spec: EmpiricalSpectrum,
    window: NeedletWindow,
    j_range: JRange,
) -> NeedletStatistics:
    """Batched ``lambda_hat`` over a level range."""
    lam = np.array([lambda_hat(spec, window, j) for j in j_range.levels()])
    return NeedletStatistics(j_range=j_range, window=window, l_max=spec.l_max, lam=lam)
