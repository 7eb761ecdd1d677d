"""Whittle minimum-contrast estimation of (alpha, G) from needlet level statistics.

The amplitude is profiled out in closed form, leaving a one-dimensional
contrast in alpha:

    contrast(alpha) = log G-hat(alpha) + (1/sum N_j) sum_j N_j log K_j(alpha),
    G-hat(alpha)    = (1/sum N_j) sum_j lambda_hat_j / K_j(alpha).

Model-side moments K_j use exactly the same frequency truncation as the data
statistics, so a noise-free spectrum is recovered exactly.  Minimization is
derivative-free (coarse grid bracket + golden section); the analytic score and
hessian are diagnostics only.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import asymptotics
from .errors import (
    BoundaryWarning,
    DegenerateDataError,
    DomainError,
    NarrowBandError,
)
from .harmonic import EmpiricalSpectrum
from .needlet import (
    JRange,
    MexicanWindow,
    NeedletStatistics,
    NeedletWindow,
    StandardWindow,
    _level_terms,
    compute_statistics,
    select_j_range,
)

__all__ = [
    "SearchSettings",
    "WhittleFit",
    "PluginResult",
    "profile_g_hat",
    "contrast",
    "contrast_two_param",
    "score",
    "hessian",
    "fit_full_band",
    "fit_narrow_band",
    "plug_in",
    "fit_csv_header",
    "fit_csv_row",
]

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class SearchSettings:
    alpha_min: float = 2.001
    alpha_max: float = 10.0
    tol: float = 1e-6
    grid_points: int = 64
    max_iter: int = 200


class _KCache:
    """Per-level weight tables for fast K_j(alpha) and derivative evaluation."""

    def __init__(self, window: NeedletWindow, j_range: JRange, l_max: int):
        self.window = window
        self.j_range = j_range
        self.levels = j_range.levels()
        self.n = np.array([j_range.n_j(j, window.B) for j in self.levels])
        self.w, self.l, self.logl = [], [], []
        for j in self.levels:
            window.check_band(j, l_max)
            l, w = _level_terms(window, j, l_max)
            self.l.append(l)
            self.w.append(w)
            self.logl.append(np.log(l))

    def k(self, alpha: float, order: int = 0) -> np.ndarray:
        out = np.empty(len(self.levels))
        for i in range(len(self.levels)):
            v = self.l[i] ** (-alpha)
            if order == 1:
                v = v * -self.logl[i]
            elif order == 2:
                v = v * self.logl[i] ** 2
            out[i] = float(np.dot(self.w[i], v)) / self.n[i]
        return out


def _cache(stats: NeedletStatistics) -> _KCache:
    cache = getattr(stats, "_k_cache", None)
    if cache is None:
        cache = _KCache(stats.window, stats.j_range, stats.l_max)
        stats._k_cache = cache
    return cache


def profile_g_hat(stats: NeedletStatistics, alpha: float) -> float:
    """Closed-form amplitude profile (1/sum N_j) sum_j lambda_j / K_j(alpha)."""
    if not np.any(stats.lam > 0):
        raise DegenerateDataError("all level statistics are zero")
    c = _cache(stats)
    return float(np.sum(stats.lam / c.k(alpha))) / float(np.sum(c.n))


def contrast(stats: NeedletStatistics, alpha: float) -> float:
    """Profiled Whittle contrast; the alpha-free coefficient entropy term is
    dropped, so only contrast differences are meaningful."""
    c = _cache(stats)
    k0 = c.k(alpha)
    g = float(np.sum(stats.lam / k0)) / float(np.sum(c.n))
    if not g > 0:
        raise DegenerateDataError("profiled amplitude is not positive")
    return math.log(g) + float(np.sum(c.n * np.log(k0))) / float(np.sum(c.n))


def contrast_two_param(stats: NeedletStatistics, alpha: float, g: float) -> float:
    """Unprofiled contrast in (alpha, G); equals contrast(alpha) + 1 at the
    profile point G = profile_g_hat(alpha)."""
    if not g > 0:
        raise DomainError("g must be positive")
    c = _cache(stats)
    k0 = c.k(alpha)
    sn = float(np.sum(c.n))
    return float(np.sum(stats.lam / (g * k0)) + np.sum(c.n * np.log(g * k0))) / sn


def score(stats: NeedletStatistics, alpha: float) -> float:
    """Analytic d/dalpha of the contrast."""
    c = _cache(stats)
    k0, k1 = c.k(alpha), c.k(alpha, 1)
    sn = float(np.sum(c.n))
    phi = float(np.sum(stats.lam / k0)) / sn
    dphi = -float(np.sum(stats.lam * k1 / k0**2)) / sn
    return dphi / phi + float(np.sum(c.n * k1 / k0)) / sn


def hessian(stats: NeedletStatistics, alpha: float) -> float:
    """Analytic d^2/dalpha^2 of the contrast."""
    c = _cache(stats)
    k0, k1, k2 = c.k(alpha), c.k(alpha, 1), c.k(alpha, 2)
    sn = float(np.sum(c.n))
    phi = float(np.sum(stats.lam / k0)) / sn
    dphi = -float(np.sum(stats.lam * k1 / k0**2)) / sn
    d2phi = float(np.sum(stats.lam * (2.0 * k1**2 - k2 * k0) / k0**3)) / sn
    return (d2phi * phi - dphi * dphi) / phi**2 + float(
        np.sum(c.n * (k2 * k0 - k1**2) / k0**2)
    ) / sn


@dataclass
class WhittleFit:
    alpha_hat: float
    g_hat: float
    j_range_used: JRange
    band: str  # "full" | "narrow"
    narrow_j1: int | None
    contrast_trace: list[tuple[float, float]]
    score_at_hat: float
    hessian_at_hat: float
    converged: bool
    iterations: int

    def report(self) -> str:
        lines = [
            f"band          {self.band}",
            f"levels        [{self.j_range_used.j0}, {self.j_range_used.jL}]",
            f"alpha_hat     {self.alpha_hat:.8f}",
            f"g_hat         {self.g_hat:.8g}",
            f"score         {self.score_at_hat:.3e}",
            f"hessian       {self.hessian_at_hat:.6f}",
            f"converged     {self.converged}",
            f"iterations    {self.iterations}",
        ]
        return "\n".join(lines)


def _minimize(stats: NeedletStatistics, search: SearchSettings):
    trace: list[tuple[float, float]] = []

    def f(a: float) -> float:
        v = contrast(stats, a)
        trace.append((a, v))
        return v

    grid = np.linspace(search.alpha_min, search.alpha_max, search.grid_points)
    vals = [f(a) for a in grid]
    i = int(np.argmin(vals))
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, len(grid) - 1)]
    c = hi - _GOLDEN * (hi - lo)
    d = lo + _GOLDEN * (hi - lo)
    fc, fd = f(c), f(d)
    iters = 0
    while hi - lo > search.tol and iters < search.max_iter:
        if fc < fd:
            hi, d, fd = d, c, fc
            c = hi - _GOLDEN * (hi - lo)
            fc = f(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + _GOLDEN * (hi - lo)
            fd = f(d)
        iters += 1
    alpha_hat = 0.5 * (lo + hi)
    converged = hi - lo <= search.tol
    if (
        alpha_hat - search.alpha_min <= search.tol
        or search.alpha_max - alpha_hat <= search.tol
        or i in (0, len(grid) - 1)
    ):
        warnings.warn(
            f"alpha_hat={alpha_hat:.6f} is at or near the search boundary "
            f"[{search.alpha_min}, {search.alpha_max}]",
            BoundaryWarning,
        )
    return alpha_hat, trace, converged, iters


def _fit(stats, search, band, narrow_j1=None) -> WhittleFit:
    alpha_hat, trace, converged, iters = _minimize(stats, search)
    return WhittleFit(
        alpha_hat=alpha_hat,
        g_hat=profile_g_hat(stats, alpha_hat),
        j_range_used=stats.j_range,
        band=band,
        narrow_j1=narrow_j1,
        contrast_trace=trace,
        score_at_hat=score(stats, alpha_hat),
        hessian_at_hat=hessian(stats, alpha_hat),
        converged=converged,
        iterations=iters,
    )


def fit_full_band(
    spec: EmpiricalSpectrum,
    window: NeedletWindow,
    j_range: JRange | None = None,
    search: SearchSettings | None = None,
) -> WhittleFit:
    """Estimate (alpha, G) from all levels [J0, JL]."""
    if j_range is None:
        j_range = select_j_range(spec.l_max, window)
    search = search or SearchSettings()
    stats = compute_statistics(spec, window, j_range)
    return _fit(stats, search, band="full")


def default_g_rule(j_l: int) -> float:
    """Shrinking band fraction g = jL^-3 (degenerate below jL ~ 10 at B = 2)."""
    return float(j_l) ** -3


def fit_narrow_band(
    spec: EmpiricalSpectrum,
    window: NeedletWindow,
    j_l: int | None = None,
    g=None,
    search: SearchSettings | None = None,
    c_b: float = 1.0,
) -> WhittleFit:
    """Estimate (alpha, G) from the top slice [J1, JL] with
    B^J1 = B^JL (1 - g); J1 is rounded half-up to an integer level."""
    if j_l is None:
        j_l = select_j_range(spec.l_max, window).jL
    if g is None:
        g = default_g_rule(j_l)
    elif callable(g):
        g = g(j_l)
    if not 0.0 < g < 1.0:
        raise DomainError(f"band fraction g must be in (0, 1), got {g}")
    j1 = int(math.floor(j_l + math.log1p(-g) / math.log(window.B) + 0.5))
    if j1 >= j_l:
        raise NarrowBandError(
            f"g={g:.6g} at jL={j_l} rounds to a single level (J1={j1}); "
            "use a coarser band fraction"
        )
    if window.B**j_l - window.B**j1 < 1.0:
        raise NarrowBandError("band is narrower than one multipole")
    search = search or SearchSettings()
    stats = compute_statistics(spec, window, JRange(j0=j1, jL=j_l, c_b=c_b))
    return _fit(stats, search, band="narrow", narrow_j1=j1)


@dataclass
class PluginResult:
    alpha_standard: float
    used_mexican: bool
    alpha_final: float
    p: int
    rho0_sq: float
    sigma1_sq: float

    def report(self) -> str:
        lines = [
            f"alpha_standard   {self.alpha_standard:.8f}",
            f"p                {self.p}",
            f"used_mexican     {self.used_mexican}",
            f"alpha_final      {self.alpha_final:.8f}",
            f"rho0_sq          {self.rho0_sq:.4f}",
            f"sigma1_sq        {self.sigma1_sq:.4f}",
            f"favors_mexican   {self.sigma1_sq < self.rho0_sq}",
        ]
        return "\n".join(lines)


def plug_in(
    spec: EmpiricalSpectrum,
    p: int,
    b_std: float,
    b_mex: float,
    j_ranges: tuple[JRange, JRange] | None = None,
    search: SearchSettings | None = None,
    interpolate: bool = True,
) -> PluginResult:
    """Two-step estimate: pilot fit with the compact window, then a mexican
    refit whenever p > alpha_pilot / 4 (lower asymptotic variance regime).

    ``rho0_sq`` is the table constant at (alpha_pilot, b_std);``sigma1_sq`` is
    the mexican table column at alpha_pilot (the variance comparison the
    decision rule is based on).
    """
    std = StandardWindow(B=b_std)
    mex = MexicanWindow(p=p, B=b_mex)
    std_range = j_ranges[0] if j_ranges else None
    mex_range = j_ranges[1] if j_ranges else None
    pilot = fit_full_band(spec, std, j_range=std_range, search=search)
    used = p > pilot.alpha_hat / 4.0
    alpha_final = pilot.alpha_hat
    if used:
        alpha_final = fit_full_band(spec, mex, j_range=mex_range, search=search).alpha_hat
    return PluginResult(
        alpha_standard=pilot.alpha_hat,
        used_mexican=used,
        alpha_final=alpha_final,
        p=p,
        rho0_sq=asymptotics.table1_rho0_sq(pilot.alpha_hat, b_std, interpolate=interpolate),
        sigma1_sq=asymptotics.sigma0_sq(p, pilot.alpha_hat),
    )


def fit_csv_header() -> str:
    return "seed,band,alpha_hat,g_hat,j0,j1_or_j0,jL,score,hessian,converged,iterations"


def fit_csv_row(fit: WhittleFit, seed: int) -> str:
    j1 = fit.narrow_j1 if fit.narrow_j1 is not None else fit.j_range_used.j0
    return ",".join(
        [
            str(seed),
            fit.band,
            f"{fit.alpha_hat:.17g}",
            f"{fit.g_hat:.17g}",
            str(fit.j_range_used.j0),
            str(j1),
            str(fit.j_range_used.jL),
            f"{fit.score_at_hat:.17g}",
            f"{fit.hessian_at_hat:.17g}",
            str(int(fit.converged)),
            str(fit.iterations),
        ]
    )
