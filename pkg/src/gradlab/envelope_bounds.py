"""R-linear convergence envelopes and their audits against recorded runs.

Every certificate packages a rate theta in (0, 1], contraction factors
sigma_i, and constants C_i such that |g_k^(i)| <= C_i * theta^k should hold
at every recorded iteration. The constants come from a recursion over
components, ascending in i:

    C_1 = |g_0^(1)|
    C_i = max( |g_0^(i)|, |g_1^(i)|/theta, ..., |g_{J}^(i)|/theta^J,
               B_i / psi_i * sqrt(sum_{j<i} psi_j^2 C_j^2) )

where the prefix depth J and the bridge factor B_i depend on the variant:

    multi window m   J = m-1,  B_i = max(sigma_i, sigma_i^m) / theta^m
    retard r         J = r,    B_i = sigma_i^(r+1) / theta^(r+1)

Variants:

  thm1 / cor1   theta = 1 - lambda_1/M1, sigma_i = max(lambda_i/lambda_1 - 1,
                1 - lambda_i/M1); cor1 adds the retard shape and the
                multi-window reduction m = max(m_1..m_s).
  thm2          requires 1/alpha_k in [lambda_1, lambda_n] at every recorded
                step; theta = 1 - 1/kappa and sigma_i uses lambda_n for M1.
  ga            theta = max(1/2, 1 - lambda_1/M1) and the bridge root carries
                an extra dominance constant M2 inside the sum.

The weights psi_i are the property view of the rule's weight function (their
squares are the certification weights; see stepsize_engine.property_psi).

Audits compare |g_k^(i)| against C_i theta^k with a relative round-off
allowance of 1e-10, which absorbs accumulated floating-point drift over runs
of up to about 1e4 steps. Certificates are immutable once computed and audit
cells are independent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .errors import ConvergenceSignal, DomainError, StructuralError
from .spectral_core import GradientTrajectory
from .stepsize_engine import PsiSpec

# Relative audit allowance: the bounds are exact in real arithmetic.
AUDIT_REL_TOL = 1e-10
# Relative slack for the thm2 stepsize range precondition.
RANGE_REL_TOL = 1e-12

_VARIANTS = ("thm1", "cor1_retard", "cor1_multi", "thm2_retard", "thm2_multi", "ga")


@dataclass(frozen=True, eq=False)
class EnvelopeAudit:
    """Worst-case slack of a bound over all recorded (k, i) cells.

    min_slack is relative: (bound - |g|) / bound, with 0 for 0-vs-0 cells and
    -inf when a zero bound meets a nonzero component. Indices are 0-based.
    """

    min_slack: float
    argmin_k: int
    argmin_i: int
    passes: bool
    cells: int

    def to_dict(self) -> dict:
        return {
            "min_slack": self.min_slack,
            "argmin_k": self.argmin_k,
            "argmin_i": self.argmin_i,
            "pass": self.passes,
        }


@dataclass(frozen=True, eq=False)
class EnvelopeCertificate:
    """(theta, sigma_i, C_i) for one variant, plus the audit result."""

    variant: str
    theta: float
    sigma: np.ndarray
    C: np.ndarray
    m: int
    r: Optional[int]
    M1: Optional[float]
    M2: Optional[float]
    psi_values: np.ndarray
    exact_termination: bool
    audit: Optional[EnvelopeAudit]

    def bound_at(self, k: int) -> np.ndarray:
        """Componentwise envelope C_i * theta^k."""
        return self.C * self.theta**k

    def to_dict(self) -> dict:
        return {
            "variant": self.variant,
            "theta": self.theta,
            "sigma": [float(s) for s in self.sigma],
            "C": [float(c) for c in self.C],
            "m": self.m,
            "r": self.r,
            "M1": self.M1,
            "M2": self.M2,
            "exact_termination": self.exact_termination,
            "audit": self.audit.to_dict() if self.audit is not None else None,
        }


def _resolve_psi_values(traj: GradientTrajectory, psi: Optional[PsiSpec]) -> np.ndarray:
    if psi is None:
        return np.ones(traj.problem.n)
    return psi.values_for(traj.problem)


def _theta_sigma(problem, M1: float) -> tuple[float, np.ndarray]:
    lam = problem.eigenvalues
    theta = 1.0 - problem.lam1 / M1
    sigma = np.maximum(lam / problem.lam1 - 1.0, 1.0 - lam / M1)
    return theta, sigma


def _prefix_abs(traj: GradientTrajectory, depth: int) -> np.ndarray:
    """|g_j^(i)| for j = 0..depth-1; rows past the recorded run are zero.

    A run that terminated earlier than the prefix depth has reached the
    minimizer exactly, so the missing gradients are zero.
    """
    comps = np.abs(traj.component_matrix())
    have = min(depth, comps.shape[0])
    out = np.zeros((depth, traj.problem.n))
    out[:have] = comps[:have]
    return out


def _check_theta_zero(traj: GradientTrajectory, variant: str) -> None:
    comps = traj.component_matrix()
    if comps.shape[0] > 1 and np.any(comps[1:] != 0.0):
        raise DomainError(
            f"{variant}: theta = 0 but the trajectory continues with nonzero gradients; "
            f"only exact termination admits a zero-rate certificate"
        )


def _c_constants(
    prefix: np.ndarray,
    theta: float,
    sigma: np.ndarray,
    psi_values: np.ndarray,
    bridge_exponent: int,
    use_sigma_max: bool,
    M2: Optional[float],
) -> np.ndarray:
    """Run the component recursion. bridge_exponent is m (multi) or r+1 (retard)."""
    n = sigma.size
    depth = prefix.shape[0]
    C = np.zeros(n)
    C[0] = prefix[0, 0]
    theta_pows = theta ** np.arange(depth)
    for i in range(1, n):
        terms = [prefix[j, i] / theta_pows[j] for j in range(depth)]
        root_sq = float(np.sum((psi_values[:i] * C[:i]) ** 2))
        if M2 is not None:
            root_sq *= M2
        if use_sigma_max:
            coef = max(sigma[i], sigma[i] ** bridge_exponent)
        else:
            coef = sigma[i] ** bridge_exponent
        terms.append(coef / (theta**bridge_exponent * psi_values[i]) * math.sqrt(root_sq))
        C[i] = max(terms)
    return C


def _build(
    traj: GradientTrajectory,
    variant: str,
    theta: float,
    sigma: np.ndarray,
    psi_values: np.ndarray,
    m: int,
    r: Optional[int],
    M1: Optional[float],
    M2: Optional[float],
    run_audit: bool,
) -> EnvelopeCertificate:
    retarded = r is not None
    exact_termination = False
    if theta == 0.0:
        _check_theta_zero(traj, variant)
        exact_termination = True
        C = np.abs(traj.gradients[0].components).copy()
    else:
        if retarded:
            prefix = _prefix_abs(traj, r + 1)
            C = _c_constants(prefix, theta, sigma, psi_values, r + 1, False, M2)
        else:
            prefix = _prefix_abs(traj, m)
            C = _c_constants(prefix, theta, sigma, psi_values, m, True, M2)
    cert = EnvelopeCertificate(
        variant=variant,
        theta=float(theta),
        sigma=sigma,
        C=C,
        m=int(m),
        r=None if r is None else int(r),
        M1=M1,
        M2=M2,
        psi_values=psi_values,
        exact_termination=exact_termination,
        audit=None,
    )
    if run_audit:
        cert = replace(cert, audit=audit_envelope(cert, traj))
    return cert


def envelope_thm1(
    traj: GradientTrajectory,
    psi: Optional[PsiSpec],
    M1: float,
    m: int,
    run_audit: bool = True,
) -> EnvelopeCertificate:
    """Envelope with theta = 1 - lambda_1/M1 and the window-m recursion."""
    problem = traj.problem
    if M1 < problem.lam1:
        raise DomainError(f"M1 = {M1!r} is below lambda_1 = {problem.lam1!r}")
    if m < 1:
        raise StructuralError(f"window m must be >= 1, got {m}")
    psi_values = _resolve_psi_values(traj, psi)
    theta, sigma = _theta_sigma(problem, M1)
    return _build(traj, "thm1", theta, sigma, psi_values, m, None, float(M1), None, run_audit)


def envelope_cor1(
    traj: GradientTrajectory,
    psi: Optional[PsiSpec],
    M1: float,
    r: Optional[int] = None,
    windows: Optional[Sequence[int]] = None,
    run_audit: bool = True,
) -> EnvelopeCertificate:
    """Fixed-retard variant (v(k) = k-r) or multi-window variant (m = max m_i)."""
    if (r is None) == (windows is None):
        raise StructuralError("exactly one of r or windows must be given")
    problem = traj.problem
    if M1 < problem.lam1:
        raise DomainError(f"M1 = {M1!r} is below lambda_1 = {problem.lam1!r}")
    psi_values = _resolve_psi_values(traj, psi)
    theta, sigma = _theta_sigma(problem, M1)
    if r is not None:
        if r < 1:
            raise StructuralError(f"retard must be >= 1, got {r}")
        return _build(
            traj, "cor1_retard", theta, sigma, psi_values, r + 1, r, float(M1), None, run_audit
        )
    sizes = [int(w) for w in windows]
    if not sizes or min(sizes) < 1:
        raise StructuralError(f"windows must be a non-empty list of positive sizes, got {windows!r}")
    m = max(sizes)
    return _build(traj, "cor1_multi", theta, sigma, psi_values, m, None, float(M1), None, run_audit)


def _check_stepsize_range(traj: GradientTrajectory) -> None:
    problem = traj.problem
    inv = traj.inverse_stepsizes()
    low = problem.lam1 * (1.0 - RANGE_REL_TOL)
    high = problem.lamn * (1.0 + RANGE_REL_TOL)
    bad = np.nonzero((inv < low) | (inv > high))[0]
    if bad.size:
        k = int(bad[0])
        raise DomainError(
            f"inverse stepsize {float(inv[k]):g} at step {k} lies outside "
            f"[lambda_1, lambda_n] = [{problem.lam1:g}, {problem.lamn:g}]"
        )


def envelope_thm2(
    traj: GradientTrajectory,
    psi: Optional[PsiSpec],
    r: Optional[int] = None,
    m: Optional[int] = None,
    run_audit: bool = True,
) -> EnvelopeCertificate:
    """Refined envelope theta = 1 - 1/kappa for runs with 1/alpha_k in [lambda_1, lambda_n].

    The range precondition is checked against every recorded step and a
    violation is a domain error naming the step.
    """
    if (r is None) == (m is None):
        raise StructuralError("exactly one of r or m must be given")
    _check_stepsize_range(traj)
    problem = traj.problem
    psi_values = _resolve_psi_values(traj, psi)
    kappa = problem.kappa
    theta = 1.0 - 1.0 / kappa
    lam = problem.eigenvalues
    sigma = np.maximum(lam / problem.lam1 - 1.0, 1.0 - lam / problem.lamn)
    if r is not None:
        if r < 1:
            raise StructuralError(f"retard must be >= 1, got {r}")
        return _build(
            traj, "thm2_retard", theta, sigma, psi_values, r + 1, r, problem.lamn, None, run_audit
        )
    if m < 1:
        raise StructuralError(f"window m must be >= 1, got {m}")
    return _build(traj, "thm2_multi", theta, sigma, psi_values, m, None, problem.lamn, None, run_audit)


def envelope_ga(
    traj: GradientTrajectory,
    psi: Optional[PsiSpec],
    M1: float,
    M2: float,
    m: int,
    run_audit: bool = True,
) -> EnvelopeCertificate:
    """Dominance-property envelope: theta floored at 1/2, M2 inside the bridge root."""
    problem = traj.problem
    if M1 < problem.lam1:
        raise DomainError(f"M1 = {M1!r} is below lambda_1 = {problem.lam1!r}")
    if not (M2 > 0.0):
        raise DomainError(f"M2 must be positive, got {M2!r}")
    if m < 1:
        raise StructuralError(f"window m must be >= 1, got {m}")
    psi_values = _resolve_psi_values(traj, psi)
    theta_plain, sigma = _theta_sigma(problem, M1)
    theta = max(0.5, theta_plain)
    return _build(traj, "ga", theta, sigma, psi_values, m, None, float(M1), float(M2), run_audit)


def _relative_slack(bounds: np.ndarray, values: np.ndarray) -> np.ndarray:
    slack = np.empty_like(bounds)
    positive = bounds > 0.0
    slack[positive] = (bounds[positive] - values[positive]) / bounds[positive]
    zero = ~positive
    slack[zero] = np.where(values[zero] == 0.0, 0.0, -np.inf)
    return slack


def audit_envelope(cert: EnvelopeCertificate, traj: GradientTrajectory) -> EnvelopeAudit:
    """Check |g_k^(i)| <= C_i theta^k (relative allowance 1e-10) over all cells."""
    comps = np.abs(traj.component_matrix())
    ks = np.arange(comps.shape[0])
    bounds = np.power(cert.theta, ks)[:, None] * cert.C[None, :]
    slack = _relative_slack(bounds, comps)
    flat = int(np.argmin(slack))
    k, i = np.unravel_index(flat, slack.shape)
    min_slack = float(slack[k, i])
    return EnvelopeAudit(
        min_slack=min_slack,
        argmin_k=int(k),
        argmin_i=int(i),
        passes=bool(min_slack >= -AUDIT_REL_TOL),
        cells=slack.size,
    )


@dataclass(frozen=True, eq=False)
class DerivedBounds:
    """Iterate-error and objective-gap envelopes implied by a certificate.

    |e_k^(i)| <= C_i / lambda_i * theta^k and
    f(x_k) - f* <= 1/2 * (sum_i C_i^2 / lambda_i) * theta^(2k).
    """

    theta: float
    C: np.ndarray
    eigenvalues: np.ndarray
    scaled_norm_sq: float
    iterate_audit: EnvelopeAudit
    fgap_min_slack: float
    fgap_argmin_k: int
    fgap_passes: bool

    def error_bound_at(self, k: int) -> np.ndarray:
        return self.C / self.eigenvalues * self.theta**k

    def fgap_bound_at(self, k: int) -> float:
        return 0.5 * self.scaled_norm_sq * self.theta ** (2 * k)

    def to_dict(self) -> dict:
        return {
            "scaled_norm_sq": self.scaled_norm_sq,
            "iterate_audit": self.iterate_audit.to_dict(),
            "fgap_min_slack": self.fgap_min_slack,
            "fgap_argmin_k": self.fgap_argmin_k,
            "fgap_pass": self.fgap_passes,
        }


def derived_bounds(cert: EnvelopeCertificate, traj: GradientTrajectory) -> DerivedBounds:
    """Audit the iterate-error and objective-gap envelopes against the run."""
    problem = traj.problem
    lam = problem.eigenvalues
    comps = np.abs(traj.component_matrix())
    errors = comps / lam[None, :]
    ks = np.arange(comps.shape[0])
    theta_pows = np.power(cert.theta, ks)
    err_bounds = theta_pows[:, None] * (cert.C / lam)[None, :]
    err_slack = _relative_slack(err_bounds, errors)
    flat = int(np.argmin(err_slack))
    k, i = np.unravel_index(flat, err_slack.shape)
    iterate_audit = EnvelopeAudit(
        min_slack=float(err_slack[k, i]),
        argmin_k=int(k),
        argmin_i=int(i),
        passes=bool(err_slack[k, i] >= -AUDIT_REL_TOL),
        cells=err_slack.size,
    )

    scaled_norm_sq = float(np.sum(cert.C**2 / lam))
    fgap_bounds = 0.5 * scaled_norm_sq * theta_pows**2
    fgap_slack = _relative_slack(fgap_bounds, np.array(traj.fgaps))
    kk = int(np.argmin(fgap_slack))
    return DerivedBounds(
        theta=cert.theta,
        C=cert.C,
        eigenvalues=lam,
        scaled_norm_sq=scaled_norm_sq,
        iterate_audit=iterate_audit,
        fgap_min_slack=float(fgap_slack[kk]),
        fgap_argmin_k=kk,
        fgap_passes=bool(fgap_slack[kk] >= -AUDIT_REL_TOL),
    )


@dataclass(frozen=True)
class RateEstimate:
    """Observed per-iteration contraction of the gradient norm over a window.

    The comparison against a certificate's theta is reported, not asserted:
    R-linear bounds permit transient windows faster or slower than theta.
    """

    empirical_rate: float
    k0: int
    K: int
    theoretical_rate: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "empirical_rate": self.empirical_rate,
            "k0": self.k0,
            "K": self.K,
            "theoretical_rate": self.theoretical_rate,
        }


def estimate_rate(
    traj: GradientTrajectory,
    k0: Optional[int] = None,
    K: Optional[int] = None,
    theta: Optional[float] = None,
) -> RateEstimate:
    """(||g_K|| / ||g_k0||)^(1/(K-k0)); k0 defaults to ceil(K/5) to shed transients."""
    if K is None:
        K = traj.num_steps
    if k0 is None:
        k0 = math.ceil(K / 5)
    if not (0 <= k0 < K <= traj.num_steps):
        raise StructuralError(f"need 0 <= k0 < K <= {traj.num_steps}, got k0={k0}, K={K}")
    base = traj.gradients[k0].norm()
    if base == 0.0:
        raise ConvergenceSignal(f"gradient norm is zero at k0={k0}")
    rate = (traj.gradients[K].norm() / base) ** (1.0 / (K - k0))
    return RateEstimate(float(rate), int(k0), int(K), theta)
