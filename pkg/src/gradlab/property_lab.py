"""Trajectory-level certification and falsification of stepsize properties.

Two families of per-step conditions are checked against recorded runs.

The bounded-quotient condition (property B) asks, for window size m, weights
w_i and a bound M1 >= lambda_1, that every step k satisfy

    (i)  lambda_1 <= 1/alpha_k <= M1, and
    (ii) alpha_k <= sum_i w_i g_v^2 / sum_i lambda_i w_i g_v^2
         for some v in {k, k-1, ..., max(k-m+1, 0)}.

The spectral dominance condition (property A; property GA with weights)
asks that whenever the leading l weighted components of every gradient in the
recent window are uniformly small while the (l+1)-th stays comparatively
large, the inverse stepsize must be at least 2/3 * lambda_{l+1}. The
falsifier hunts for a concrete (k, l) pair where that implication breaks.

For each scanned (k, l) the falsifier instantiates the dominance premise with
the tightest usable threshold, eps = max over the window of the leading sums:
if the implication fails for any eps it fails for this one. Alongside each
witness it reports m2_sup, the largest dominance constant M2 for which the
witness stays valid, so claims quantified over "any M2" are checkable.

The scan window at step k is {max(k-m+1, 0), ..., k}, the same index set
property B draws v(k) from; with that alignment a property-B certificate
provably rules out dominance witnesses at the certificate's weights (squared)
and M2 = 2. Step 0 is never scanned: with no history the dominance premise
degenerates and would constrain the start stepsize vacuously.

All checks are pure functions over immutable trajectories; scan cells are
independent, so trajectories may be screened concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DomainError, GradLabError, StructuralError
from .spectral_core import GradientTrajectory
from .stepsize_engine import PsiSpec

# Relative slack applied to every inequality check, guarding against
# round-off flips at exact-equality boundaries.
INEQUALITY_REL_TOL = 1e-12


@dataclass(frozen=True)
class BStepRecord:
    """Outcome of the bounded-quotient check at one step."""

    k: int
    inverse_alpha: float
    pass_range: bool
    v_witness: Optional[int]
    quotient: float
    quotient_checked: bool = True


@dataclass(frozen=True, eq=False)
class PropertyBCertificate:
    """Per-step bounded-quotient audit for a whole trajectory."""

    M1: float
    m: int
    psi_values: np.ndarray
    per_step: tuple[BStepRecord, ...]
    passes: bool
    notes: tuple[str, ...]

    @property
    def num_steps(self) -> int:
        return len(self.per_step)

    def failures(self) -> tuple[BStepRecord, ...]:
        return tuple(
            s
            for s in self.per_step
            if not s.pass_range or (s.quotient_checked and s.v_witness is None)
        )

    def to_dict(self) -> dict:
        failures = self.failures()
        return {
            "type": "property_b",
            "M1": self.M1,
            "m": self.m,
            "pass": self.passes,
            "steps": self.num_steps,
            "num_failures": len(failures),
            "first_failure_k": failures[0].k if failures else None,
            "max_quotient": max(
                (s.quotient for s in self.per_step if s.quotient_checked), default=None
            ),
            "max_inverse_alpha": max((s.inverse_alpha for s in self.per_step), default=None),
            "min_inverse_alpha": min((s.inverse_alpha for s in self.per_step), default=None),
            "notes": list(self.notes),
        }


@dataclass(frozen=True)
class _DominanceWitness:
    """A concrete (k, l) violating a dominance implication.

    Validity: the leading weighted sums satisfy G(j, l) <= epsilon and the
    (l+1)-th weighted square is >= M2 * epsilon for every j in the window
    ending at k, yet 1/alpha_k < 2/3 * lambda_{l+1}. m2_sup is the supremum
    of M2 values under which the witness remains valid.
    """

    k: int
    l: int
    epsilon: float
    M2: float
    m: int
    inverse_alpha: float
    threshold: float
    m2_sup: float

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "l": self.l,
            "epsilon": self.epsilon,
            "M2": self.M2,
            "m": self.m,
            "inverse_alpha": self.inverse_alpha,
            "threshold": self.threshold,
            "m2_sup": self.m2_sup,
        }


class PropertyAWitness(_DominanceWitness):
    """Unweighted dominance witness: G is the plain leading sum P(k, l)."""


class PropertyGAReport(_DominanceWitness):
    """Weighted dominance witness, weights psi(lambda_i)."""


def witness_key(w) -> tuple:
    """Comparable content of a witness, independent of its concrete class."""
    return (w.k, w.l, w.epsilon, w.M2, w.m, w.inverse_alpha, w.threshold, w.m2_sup)


def _resolve_weights(traj: GradientTrajectory, psi: Optional[PsiSpec]) -> np.ndarray:
    if psi is None:
        return np.ones(traj.problem.n)
    return psi.values_for(traj.problem)


def certify_property_b(
    traj: GradientTrajectory,
    v_records: Optional[Sequence[Optional[int]]],
    psi: Optional[PsiSpec],
    M1: float,
    m: int,
    rel_tol: float = INEQUALITY_REL_TOL,
    quotient_from: int = 0,
) -> PropertyBCertificate:
    """Check conditions (i) and (ii) at every recorded step.

    When `v_records` supplies the rule's reference index for a step it is
    tried first; otherwise (or if it fails) all candidates in the window are
    searched nearest-to-k first and the first satisfying index is recorded.
    The stored quotient is alpha_k * sum(lambda w g_v^2)/sum(w g_v^2) at the
    recorded v, which equals 1 when the rule took the quotient with equality.

    `quotient_from` restricts condition (ii) to steps k >= quotient_from;
    earlier steps check only the range bound (i). Rules with a startup
    fallback generally violate their own weighted bound while k < r, and the
    fixed-retard envelope consumes the quotient condition only from step r.
    """
    K = traj.num_steps
    if K < 1:
        raise StructuralError("trajectory has no steps to certify")
    if m < 1:
        raise StructuralError(f"window m must be >= 1, got {m}")
    problem = traj.problem
    if M1 < problem.lam1:
        raise DomainError(f"M1 = {M1!r} is below lambda_1 = {problem.lam1!r}")
    if v_records is not None and len(v_records) != K:
        raise StructuralError(f"v_records has {len(v_records)} entries for {K} steps")
    w = _resolve_weights(traj, psi)

    comps = traj.component_matrix()
    wsums = (comps**2) @ w
    lwsums = (comps**2) @ (problem.eigenvalues * w)

    per_step = []
    all_pass = True
    for k, alpha in enumerate(traj.stepsizes):
        inv = 1.0 / alpha
        pass_range = (inv >= problem.lam1 * (1.0 - rel_tol)) and (inv <= M1 * (1.0 + rel_tol))
        if k < quotient_from:
            per_step.append(BStepRecord(k, inv, pass_range, None, math.nan, False))
            if not pass_range:
                all_pass = False
            continue
        lo = max(k - m + 1, 0)
        candidates: list[int] = []
        if v_records is not None and v_records[k] is not None:
            v = v_records[k]
            if lo <= v <= k:
                candidates.append(v)
        candidates.extend(v for v in range(k, lo - 1, -1) if v not in candidates)
        found = None
        quotient = math.inf
        for v in candidates:
            if wsums[v] == 0.0:
                continue
            q = alpha * lwsums[v] / wsums[v]
            quotient = min(quotient, q)
            if q <= 1.0 + rel_tol:
                found = v
                quotient = q
                break
        per_step.append(BStepRecord(k, inv, pass_range, found, quotient))
        if not pass_range or found is None:
            all_pass = False

    notes = []
    if problem.lam1 != 1.0:
        notes.append(
            f"lambda_1 = {problem.lam1:g} != 1: thresholds use the unnormalized spectrum"
        )
    return PropertyBCertificate(
        M1=float(M1),
        m=int(m),
        psi_values=w,
        per_step=tuple(per_step),
        passes=all_pass,
        notes=tuple(notes),
    )


def _revalidate_witness(
    traj: GradientTrajectory, weights: np.ndarray, wit, rel_tol: float
) -> bool:
    """Recompute the witness conditions from raw gradients, without numpy sums."""
    lam = traj.problem.eigenvalues
    lo = max(wit.k - wit.m + 1, 0)
    eps = wit.epsilon
    for j in range(lo, wit.k + 1):
        comps = traj.gradients[j].components
        lead = 0.0
        for i in range(wit.l):
            lead += (float(weights[i]) * float(comps[i])) ** 2
        if lead > eps:
            return False
        dom = (float(weights[wit.l]) * float(comps[wit.l])) ** 2
        if dom < wit.M2 * eps:
            return False
    threshold = (2.0 / 3.0) * float(lam[wit.l])
    return wit.inverse_alpha < threshold * (1.0 - rel_tol)


def _scan_dominance(
    traj: GradientTrajectory,
    weights: np.ndarray,
    m: int,
    M2: float,
    l_range: Optional[Sequence[int]],
    rel_tol: float,
    first_only: bool,
    make,
) -> list:
    K = traj.num_steps
    if m < 1:
        raise StructuralError(f"window m must be >= 1, got {m}")
    if K < m:
        raise StructuralError(f"trajectory has {K} steps; the window needs at least {m}")
    if not (M2 > 0.0):
        raise DomainError(f"M2 must be positive, got {M2!r}")
    problem = traj.problem
    n = problem.n
    if l_range is None:
        l_range = range(1, n)
    else:
        l_range = sorted(set(int(l) for l in l_range))
        if any(l < 1 or l > n - 1 for l in l_range):
            raise StructuralError(f"l values must lie in [1, {n - 1}]")

    comps = traj.component_matrix()
    wsq = (weights * comps) ** 2
    leading = np.cumsum(wsq, axis=1)
    inv_alpha = traj.inverse_stepsizes()
    lam = problem.eigenvalues

    found = []
    for k in range(1, K):
        lo = max(k - m + 1, 0)
        rows = slice(lo, k + 1)
        for l in l_range:
            eps = float(leading[rows, l - 1].max())
            dom_min = float(wsq[rows, l].min())
            if eps > 0.0:
                if dom_min < M2 * eps:
                    continue
                m2_sup = dom_min / eps
            else:
                # Leading components vanish identically on the window: any
                # eps in (0, dom_min/M2] satisfies the premise.
                if dom_min <= 0.0:
                    continue
                eps = dom_min / M2
                m2_sup = math.inf
            threshold = (2.0 / 3.0) * float(lam[l])
            if inv_alpha[k] < threshold * (1.0 - rel_tol):
                wit = make(
                    k=k,
                    l=l,
                    epsilon=eps,
                    M2=float(M2),
                    m=int(m),
                    inverse_alpha=float(inv_alpha[k]),
                    threshold=threshold,
                    m2_sup=m2_sup,
                )
                if not _revalidate_witness(traj, weights, wit, rel_tol):
                    raise GradLabError(
                        f"internal: witness at (k={k}, l={l}) failed independent revalidation"
                    )
                found.append(wit)
                if first_only:
                    return found
    return found


def falsify_property_a(
    traj: GradientTrajectory,
    m: int,
    M2: float,
    l_range: Optional[Sequence[int]] = None,
    rel_tol: float = INEQUALITY_REL_TOL,
) -> Optional[PropertyAWitness]:
    """First unweighted dominance witness in scan order (k, then l), or None."""
    ones = np.ones(traj.problem.n)
    hits = _scan_dominance(traj, ones, m, M2, l_range, rel_tol, True, PropertyAWitness)
    return hits[0] if hits else None


def scan_property_a(
    traj: GradientTrajectory,
    m: int,
    M2: float,
    l_range: Optional[Sequence[int]] = None,
    rel_tol: float = INEQUALITY_REL_TOL,
) -> tuple[PropertyAWitness, ...]:
    """Every unweighted dominance witness over the trajectory."""
    ones = np.ones(traj.problem.n)
    return tuple(_scan_dominance(traj, ones, m, M2, l_range, rel_tol, False, PropertyAWitness))


def check_property_ga(
    traj: GradientTrajectory,
    psi: Optional[PsiSpec],
    m: int,
    M2: float,
    l_range: Optional[Sequence[int]] = None,
    rel_tol: float = INEQUALITY_REL_TOL,
) -> Optional[PropertyGAReport]:
    """First weighted dominance witness with weights psi(lambda_i), or None.

    With the identity weight this reproduces `falsify_property_a` exactly.
    """
    w = _resolve_weights(traj, psi)
    hits = _scan_dominance(traj, w, m, M2, l_range, rel_tol, True, PropertyGAReport)
    return hits[0] if hits else None


def scan_property_ga(
    traj: GradientTrajectory,
    psi: Optional[PsiSpec],
    m: int,
    M2: float,
    l_range: Optional[Sequence[int]] = None,
    rel_tol: float = INEQUALITY_REL_TOL,
) -> tuple[PropertyGAReport, ...]:
    """Every weighted dominance witness over the trajectory."""
    w = _resolve_weights(traj, psi)
    return tuple(_scan_dominance(traj, w, m, M2, l_range, rel_tol, False, PropertyGAReport))
