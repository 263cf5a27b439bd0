"""gradlab: a laboratory for nonmonotone gradient methods on strictly convex quadratics.

Everything is phrased in spectral coordinates: problems are eigenvalue lists,
runs are exact componentwise gradient recursions, and the analysis layers
certify per-step stepsize properties and audit R-linear envelopes against the
recorded iterates.
"""

from .envelope_bounds import (
    DerivedBounds,
    EnvelopeAudit,
    EnvelopeCertificate,
    RateEstimate,
    audit_envelope,
    derived_bounds,
    envelope_cor1,
    envelope_ga,
    envelope_thm1,
    envelope_thm2,
    estimate_rate,
)
from .errors import (
    ConfigError,
    ConvergenceSignal,
    DomainError,
    GradLabError,
    StructuralError,
)
from .property_lab import (
    PropertyAWitness,
    PropertyBCertificate,
    PropertyGAReport,
    certify_property_b,
    check_property_ga,
    falsify_property_a,
    scan_property_a,
    scan_property_ga,
    witness_key,
)
from .spectral_core import (
    DenseProblem,
    GradientTrajectory,
    GradientVector,
    SpectralProblem,
    SpectralizeResult,
    error_vector,
    fgap,
    gradient_step,
    spectralize,
)
from .stepsize_engine import (
    PsiSpec,
    RuleState,
    RunResult,
    StepsizeRule,
    adaptive_bb_rule,
    alternate_rule,
    aopt_rule,
    aopt_stepsize,
    bb1_rule,
    bb2_rule,
    const_opt_stepsize,
    const_rule,
    cyclic_rule,
    gmr_rule,
    mg_rule,
    mg_stepsize,
    psi_from_spec,
    psi_retard_rule,
    rule_from_spec,
    rule_stepsize,
    run_method,
    sd_rule,
    sd_stepsize,
    weighted_stepsize,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
