"""Mexican-needlet Whittle estimation of the spectral index of isotropic
Gaussian random fields on the sphere, with closed-form asymptotic constants
and a seeded Monte Carlo harness."""

from . import asymptotics, harness, needlet, sphere, spectrum, whittle
from .errors import (
    BandLimitError,
    BoundaryWarning,
    ConfigError,
    DegenerateDataError,
    DomainError,
    NarrowBandError,
    NeedletWhittleError,
    NumericalNoiseWarning,
    ResourceLimitError,
    TableLookupError,
    TruncationError,
)
from .harmonic import (
    AlmSet,
    ChatMoments,
    EmpiricalSpectrum,
    alm_row,
    chat_moments,
    empirical_cl,
    simulate_alm,
)
from .needlet import (
    JRange,
    MexicanWindow,
    NeedletStatistics,
    StandardWindow,
    compute_statistics,
    k_j,
    k_j_deriv,
    lambda_hat,
    select_j_range,
    window_sq,
)
from .spectrum import (
    KappaCorrection,
    NoCorrection,
    PowerSpectrumModel,
    RationalCorrection,
    c_l,
    check_regularity,
    g_of_l,
)
from .whittle import (
    PluginResult,
    SearchSettings,
    WhittleFit,
    contrast,
    fit_full_band,
    fit_narrow_band,
    hessian,
    plug_in,
    profile_g_hat,
    score,
)

__version__ = "0.1.0"

__all__ = [
    "AlmSet",
    "BandLimitError",
    "BoundaryWarning",
    "ChatMoments",
    "ConfigError",
    "DegenerateDataError",
    "DomainError",
    "EmpiricalSpectrum",
    "JRange",
    "KappaCorrection",
    "MexicanWindow",
    "NarrowBandError",
    "NeedletStatistics",
    "NeedletWhittleError",
    "NoCorrection",
    "NumericalNoiseWarning",
    "PluginResult",
    "PowerSpectrumModel",
    "RationalCorrection",
    "ResourceLimitError",
    "SearchSettings",
    "StandardWindow",
    "TableLookupError",
    "TruncationError",
    "WhittleFit",
    "alm_row",
    "asymptotics",
    "c_l",
    "chat_moments",
    "check_regularity",
    "compute_statistics",
    "contrast",
    "empirical_cl",
    "fit_full_band",
    "fit_narrow_band",
    "g_of_l",
    "harness",
    "hessian",
    "k_j",
    "k_j_deriv",
    "lambda_hat",
    "needlet",
    "plug_in",
    "profile_g_hat",
    "score",
    "select_j_range",
    "simulate_alm",
    "sphere",
    "spectrum",
    "whittle",
    "window_sq",
]
