"""Mean mixtures of multivariate normal distributions.

The family shifts a multivariate normal mean by a positive random variable
along a skewness direction:

    Y = xi + omega_diag (delta U + Z),    Z ~ N_p(0, corr - delta delta')

with ``U`` a mixing law (gamma, exponential, or truncated normal).  The
package provides densities, tensor moments, canonical forms, EM maximum
likelihood, eight multivariate skewness measures, and Monte Carlo testing
harnesses, plus the ``mmn`` command-line tool.
"""

__version__ = "0.1.0"

from .density import (
    DensityWorkspace,
    cf_y,
    check_infinite_divisibility,
    check_logconcavity,
    cond_u_moments,
    log_pdf,
    mgf_y,
    pdf,
    pdf_closed,
    pdf_generic,
    sample,
    univariate_mmne_log_pdf,
    univariate_mmne_pdf,
)
from .em import (
    FitConfig,
    FitResult,
    e_step_mmne,
    fit,
    fit_best,
    information_criteria,
    m_step,
)
from .errors import MmnError
from .mc import (
    STATISTICS,
    BiasMseStudy,
    CriticalTable,
    McConfig,
    PowerResult,
    bias_mse_study,
    critical_values,
    power_study,
)
from .mixing import (
    ExponentialMixing,
    GammaMixing,
    MixingLaw,
    TruncatedNormalMixing,
)
from .moments import (
    MomentSet,
    central_from_raw,
    central_third_affine,
    commutation,
    kron,
    moments_x,
    moments_y,
    moments_y_mmne,
    transport_affine,
    vec,
)
from .params import (
    CanonicalInfo,
    MmnParams,
    affine_transform,
    canonical_form,
    clamp_skewness,
    convolve_with_normal,
    mode,
    std_decompose,
    validate,
)
from .skewness import (
    SkewnessReport,
    bbq,
    isogai,
    kollo,
    malkovich_afifi,
    mardia,
    mori,
    population_report,
    sample_report,
    srivastava,
)

__all__ = [
    "__version__",
    "BiasMseStudy", "CanonicalInfo", "CriticalTable", "DensityWorkspace",
    "ExponentialMixing", "FitConfig", "FitResult", "GammaMixing",
    "McConfig", "MixingLaw", "MmnError", "MmnParams", "MomentSet",
    "PowerResult", "STATISTICS", "SkewnessReport", "TruncatedNormalMixing",
    "affine_transform", "bbq", "bias_mse_study", "canonical_form",
    "central_from_raw", "central_third_affine", "cf_y",
    "check_infinite_divisibility", "check_logconcavity", "clamp_skewness",
    "commutation", "cond_u_moments", "convolve_with_normal",
    "critical_values", "e_step_mmne", "fit", "fit_best",
    "information_criteria", "isogai", "kollo", "kron", "log_pdf",
    "m_step", "malkovich_afifi", "mardia", "mgf_y", "mode", "moments_x",
    "moments_y", "moments_y_mmne", "mori", "pdf", "pdf_closed",
    "pdf_generic", "population_report", "power_study", "sample",
    "sample_report", "srivastava", "std_decompose", "transport_affine",
    "univariate_mmne_log_pdf", "univariate_mmne_pdf", "validate", "vec",
]
