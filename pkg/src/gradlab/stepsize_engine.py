"""Stepsize rules for the spectral gradient iteration.

The monotone rules use the current gradient:

    sd    alpha = g'g / g'Ag          exact line search
    mg    alpha = g'Ag / g'A^2g       minimizes the next gradient norm
    aopt  alpha = ||g|| / ||Ag||      geometric mean of sd and mg

The nonmonotone rules reference an earlier gradient. bb1 and bb2 evaluate sd
and mg at g_{k-1}. gmr(rho, r) and psi_retard(psi, r) evaluate the weighted
Rayleigh quotient

    alpha = sum_i w_i g^(i)^2 / sum_i lambda_i w_i g^(i)^2

at g_{k-r}, with weights w_i = lambda_i^rho or w_i = psi(lambda_i). cyclic
re-evaluates an inner rule every c steps and reuses the value in between;
alternate switches between two rules periodically, or adaptively by the
bb2/bb1 ratio test. Rules that need history not yet available fall back to sd
(configurable to aopt or a constant) while k < r.

Two weight views exist per rule. `certification_psi` gives the weights w
under which alpha_k <= sum(w g^2)/sum(lambda w g^2) holds at the rule's
reference index, which is what per-step certification checks. The R-linear
envelope recursions and the weighted dominance scans instead consume a
function psi with psi(lambda_i)^2 = w_i, exposed as `property_psi`; for bb2
that is sqrt(z), for gmr(rho) it is z^(rho/2).

`RuleState` is owned by a single run; rules themselves are immutable and
evaluation is pure given the state, so independent runs can proceed
concurrently.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from numpy.polynomial import polynomial as npoly

from .errors import ConfigError, ConvergenceSignal, DomainError, StructuralError
from .spectral_core import GradientTrajectory, GradientVector, SpectralProblem, fgap, gradient_step

_POSITIVITY_GRID_POINTS = 1000


@dataclass(frozen=True, eq=False)
class PsiSpec:
    """A positive weight function evaluated on the spectrum.

    Only the values psi(lambda_i) enter any computation for a diagonal
    Hessian; the symbolic forms exist for validation and reporting. The
    `identity` form is the constant function 1 (weighting every component
    equally), `power(rho)` is z^rho with rho >= 0, and `rational` is
    P(z)/Q(z) from ascending coefficient lists, optionally squared. Forms
    `power` and `rational` are additionally required to stay positive and
    finite on a 1000-point grid spanning [lambda_1, lambda_n].
    """

    form: str = "identity"
    rho: Optional[float] = None
    num: Optional[tuple[float, ...]] = None
    den: Optional[tuple[float, ...]] = None
    square: bool = False
    table: Optional[tuple[float, ...]] = None

    def __post_init__(self):
        if self.form not in ("identity", "power", "rational", "tabulated"):
            raise ConfigError(f"unknown psi form {self.form!r}")
        if self.form == "power":
            if self.rho is None or not (self.rho >= 0.0):
                raise DomainError(f"power form needs rho >= 0, got {self.rho!r}")
        if self.form == "rational":
            if not self.num or not self.den:
                raise ConfigError("rational form needs numerator and denominator coefficients")
        if self.form == "tabulated" and not self.table:
            raise ConfigError("tabulated form needs values")

    @classmethod
    def identity(cls) -> "PsiSpec":
        return cls(form="identity")

    @classmethod
    def power(cls, rho: float) -> "PsiSpec":
        return cls(form="power", rho=float(rho))

    @classmethod
    def rational(cls, num, den=None, den_power=None, square=False) -> "PsiSpec":
        if (den is None) == (den_power is None):
            raise ConfigError("rational form needs exactly one of den or den_power")
        if den_power is not None:
            if den_power < 0 or int(den_power) != den_power:
                raise ConfigError(f"den_power must be a non-negative integer, got {den_power!r}")
            den = [0.0] * int(den_power) + [1.0]
        return cls(
            form="rational",
            num=tuple(float(c) for c in num),
            den=tuple(float(c) for c in den),
            square=bool(square),
        )

    @classmethod
    def tabulated(cls, values) -> "PsiSpec":
        return cls(form="tabulated", table=tuple(float(v) for v in values))

    def evaluate(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        if self.form == "identity":
            return np.ones_like(z)
        if self.form == "power":
            return z**self.rho
        if self.form == "rational":
            vals = npoly.polyval(z, self.num) / npoly.polyval(z, self.den)
            return vals**2 if self.square else vals
        raise StructuralError("tabulated psi has no functional form to evaluate")

    def values_for(self, problem: SpectralProblem) -> np.ndarray:
        """psi evaluated at the eigenvalues; validates positivity."""
        if self.form == "tabulated":
            vals = np.array(self.table, dtype=float)
            if vals.size != problem.n:
                raise StructuralError(
                    f"tabulated psi has {vals.size} values, problem has dimension {problem.n}"
                )
        else:
            vals = self.evaluate(problem.eigenvalues)
            if self.form in ("power", "rational"):
                grid = np.linspace(problem.lam1, problem.lamn, _POSITIVITY_GRID_POINTS)
                gv = self.evaluate(grid)
                if not np.all(np.isfinite(gv)) or np.any(gv <= 0.0):
                    raise DomainError(
                        f"psi {self.describe()} is not positive and finite on the spectrum range"
                    )
        if not np.all(np.isfinite(vals)) or np.any(vals <= 0.0):
            bad = int(np.argmin(vals))
            raise DomainError(
                f"psi {self.describe()} is non-positive at eigenvalue "
                f"{problem.eigenvalues[bad]!r}: value {vals[bad]!r}"
            )
        return vals

    def sqrt_spec(self, problem: SpectralProblem) -> "PsiSpec":
        """The weight function whose square gives this one, tabulated on the spectrum."""
        if self.form == "identity":
            return PsiSpec.identity()
        if self.form == "power":
            return PsiSpec.power(self.rho / 2.0)
        return PsiSpec.tabulated(np.sqrt(self.values_for(problem)))

    def describe(self) -> str:
        if self.form == "identity":
            return "identity"
        if self.form == "power":
            return f"z^{self.rho:g}"
        if self.form == "rational":
            base = f"poly{list(self.num)}/poly{list(self.den)}"
            return f"({base})^2" if self.square else base
        return f"tabulated[{len(self.table)}]"

    def to_spec(self) -> dict:
        if self.form == "identity":
            return {"form": "identity"}
        if self.form == "power":
            return {"form": "power", "rho": self.rho}
        if self.form == "rational":
            return {"form": "rational", "num": list(self.num), "den": list(self.den), "square": self.square}
        return {"form": "tabulated", "values": list(self.table)}


def psi_from_spec(spec) -> PsiSpec:
    """Parse the psi grammar: {"form": "identity"|"power"|"rational"|"tabulated", ...}."""
    if isinstance(spec, PsiSpec):
        return spec
    if not isinstance(spec, dict):
        raise ConfigError(f"psi spec must be a mapping, got {type(spec).__name__}")
    form = spec.get("form")
    if form == "identity":
        return PsiSpec.identity()
    if form == "power":
        if "rho" not in spec:
            raise ConfigError("psi.rho is required for the power form")
        return PsiSpec.power(spec["rho"])
    if form == "rational":
        if "num" not in spec:
            raise ConfigError("psi.num is required for the rational form")
        return PsiSpec.rational(
            spec["num"],
            den=spec.get("den"),
            den_power=spec.get("den_power"),
            square=spec.get("square", False),
        )
    if form == "tabulated":
        if "values" not in spec:
            raise ConfigError("psi.values is required for the tabulated form")
        return PsiSpec.tabulated(spec["values"])
    raise ConfigError(f"psi.form must be identity|power|rational|tabulated, got {form!r}")


_KINDS = ("sd", "mg", "aopt", "bb1", "bb2", "gmr", "psi_retard", "const", "cyclic", "alternate")

# Rules whose stepsize never exceeds the unweighted Rayleigh quotient at their
# reference gradient; composites of these certify against the identity weight.
_IDENTITY_DOMINATED = {"sd", "mg", "aopt", "bb1", "bb2", "gmr"}


@dataclass(frozen=True, eq=False)
class StepsizeRule:
    """A named, parameterized map from gradient history to the next stepsize."""

    kind: str
    alpha: Optional[float] = None
    rho: Optional[float] = None
    r: int = 1
    psi: Optional[PsiSpec] = None
    cycle: Optional[int] = None
    period: int = 2
    adaptive: bool = False
    tau: float = 0.8
    members: tuple["StepsizeRule", ...] = ()
    fallback: Union[str, float, None] = "sd"
    clamp_m1: Optional[float] = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ConfigError(f"unknown rule kind {self.kind!r}")
        if self.kind == "const":
            if self.alpha is None or not (self.alpha > 0.0) or not math.isfinite(self.alpha):
                raise DomainError(f"const rule needs a positive finite alpha, got {self.alpha!r}")
        if self.kind == "gmr":
            if self.rho is None or not (self.rho >= 0.0):
                raise DomainError(f"gmr needs rho >= 0, got {self.rho!r}")
        if self.kind in ("gmr", "psi_retard"):
            if self.r < 0 or int(self.r) != self.r:
                raise ConfigError(f"retard must be a non-negative integer, got {self.r!r}")
        if self.kind == "psi_retard" and self.psi is None:
            raise ConfigError("psi_retard needs a psi spec")
        if self.kind == "cyclic":
            if self.cycle is None or self.cycle < 1:
                raise ConfigError(f"cyclic needs cycle length >= 1, got {self.cycle!r}")
            if len(self.members) != 1:
                raise ConfigError("cyclic needs exactly one inner rule")
        if self.kind == "alternate":
            if self.adaptive:
                if not (0.0 < self.tau <= 1.0):
                    raise ConfigError(f"adaptive alternate needs tau in (0, 1], got {self.tau!r}")
            else:
                if len(self.members) != 2:
                    raise ConfigError("alternate needs exactly two rules")
                if self.period < 2 or self.period % 2 != 0:
                    raise ConfigError(f"alternate period must be a positive even integer, got {self.period!r}")
        if isinstance(self.fallback, str) and self.fallback not in ("sd", "aopt"):
            raise ConfigError(f"fallback must be 'sd', 'aopt', a positive number, or None, got {self.fallback!r}")
        if isinstance(self.fallback, (int, float)) and not isinstance(self.fallback, bool):
            if not (self.fallback > 0.0):
                raise DomainError(f"constant fallback must be positive, got {self.fallback!r}")
        if self.clamp_m1 is not None and not (self.clamp_m1 > 0.0):
            raise DomainError(f"clamp_m1 must be positive, got {self.clamp_m1!r}")

    @property
    def retard(self) -> int:
        """How far back the reference gradient sits once history is available."""
        if self.kind in ("bb1", "bb2"):
            return 1
        if self.kind in ("gmr", "psi_retard"):
            return self.r
        if self.kind == "cyclic":
            return self.members[0].retard
        if self.kind == "alternate":
            return 1 if self.adaptive else max(m.retard for m in self.members)
        return 0

    @property
    def history_window(self) -> int:
        """Smallest window m with v(k) in {k, ..., max(k-m+1, 0)} at every step."""
        if self.kind in ("sd", "mg", "aopt", "const"):
            return 1
        if self.kind in ("bb1", "bb2"):
            return 2
        if self.kind in ("gmr", "psi_retard"):
            return self.r + 1
        if self.kind == "cyclic":
            # A value computed at the last refresh from g_{refresh-r} survives
            # up to cycle-1 further steps.
            return self.cycle + self.members[0].retard
        if self.kind == "alternate":
            return 2 if self.adaptive else max(m.history_window for m in self.members)
        raise AssertionError(self.kind)

    @property
    def name(self) -> str:
        if self.kind == "const":
            return f"const({self.alpha:g})"
        if self.kind == "gmr":
            return f"gmr(rho={self.rho:g},r={self.r})"
        if self.kind == "psi_retard":
            return f"psi_retard({self.psi.describe()},r={self.r})"
        if self.kind == "cyclic":
            return f"cyclic({self.members[0].name},c={self.cycle})"
        if self.kind == "alternate":
            if self.adaptive:
                return f"abbmin(tau={self.tau:g})"
            return f"alternate({self.members[0].name},{self.members[1].name},period={self.period})"
        return self.kind

    def _identity_dominated(self) -> bool:
        if self.kind in _IDENTITY_DOMINATED:
            return True
        if self.kind == "alternate" and self.adaptive:
            return True
        if self.kind in ("cyclic", "alternate"):
            return all(m._identity_dominated() for m in self.members)
        return False

    def certification_psi(self, problem: SpectralProblem) -> Optional[PsiSpec]:
        """Weights w with alpha_k <= sum(w g^2)/sum(lambda w g^2) at the reference index.

        None means no such weight is known (const rules, or mixed composites
        involving psi_retard members).
        """
        if self.kind in ("sd", "bb1", "aopt"):
            return PsiSpec.identity()
        if self.kind in ("mg", "bb2"):
            return PsiSpec.power(1.0)
        if self.kind == "gmr":
            return PsiSpec.power(self.rho)
        if self.kind == "psi_retard":
            return self.psi
        if self.kind == "cyclic":
            return self.members[0].certification_psi(problem)
        if self.kind == "alternate":
            if self._identity_dominated():
                return PsiSpec.identity()
            return None
        return None

    def property_psi(self, problem: SpectralProblem) -> Optional[PsiSpec]:
        """Weight function psi with psi(lambda_i)^2 equal to the certification weights.

        This is the view the envelope recursions and the weighted dominance
        scans consume.
        """
        cert = self.certification_psi(problem)
        if cert is None:
            return None
        return cert.sqrt_spec(problem)

    def to_spec(self) -> dict:
        d: dict = {"kind": self.kind}
        if self.kind == "const":
            d["alpha"] = self.alpha
        if self.kind == "gmr":
            d.update(rho=self.rho, r=self.r)
        if self.kind == "psi_retard":
            d.update(psi=self.psi.to_spec(), r=self.r)
        if self.kind == "cyclic":
            d.update(inner=self.members[0].to_spec(), c=self.cycle)
        if self.kind == "alternate":
            if self.adaptive:
                d.update(adaptive=True, tau=self.tau)
            else:
                d.update(rules=[m.to_spec() for m in self.members], period=self.period)
        if self.clamp_m1 is not None:
            d["clamp_m1"] = self.clamp_m1
        if self.fallback != "sd":
            d["fallback"] = self.fallback
        return d


def sd_rule() -> StepsizeRule:
    return StepsizeRule(kind="sd")


def mg_rule() -> StepsizeRule:
    return StepsizeRule(kind="mg")


def aopt_rule() -> StepsizeRule:
    return StepsizeRule(kind="aopt")


def bb1_rule() -> StepsizeRule:
    return StepsizeRule(kind="bb1")


def bb2_rule() -> StepsizeRule:
    return StepsizeRule(kind="bb2")


def gmr_rule(rho: float, r: int = 1) -> StepsizeRule:
    return StepsizeRule(kind="gmr", rho=float(rho), r=int(r))


def psi_retard_rule(psi: PsiSpec, r: int = 1) -> StepsizeRule:
    return StepsizeRule(kind="psi_retard", psi=psi, r=int(r))


def const_rule(alpha: float) -> StepsizeRule:
    return StepsizeRule(kind="const", alpha=float(alpha))


def cyclic_rule(inner: StepsizeRule, cycle: int) -> StepsizeRule:
    return StepsizeRule(kind="cyclic", cycle=int(cycle), members=(inner,))


def alternate_rule(first: StepsizeRule, second: StepsizeRule, period: int = 2) -> StepsizeRule:
    return StepsizeRule(kind="alternate", members=(first, second), period=int(period))


def adaptive_bb_rule(tau: float = 0.8) -> StepsizeRule:
    """bb2 when bb2/bb1 < tau (spread spectrum detected), bb1 otherwise."""
    return StepsizeRule(kind="alternate", adaptive=True, tau=float(tau))


def rule_from_spec(spec) -> StepsizeRule:
    """Parse the rule grammar, e.g. {"kind": "psi_retard", "psi": {...}, "r": 1}."""
    if isinstance(spec, StepsizeRule):
        return spec
    if not isinstance(spec, dict):
        raise ConfigError(f"rule spec must be a mapping, got {type(spec).__name__}")
    kind = spec.get("kind")
    if kind not in _KINDS:
        raise ConfigError(f"rule.kind must be one of {', '.join(_KINDS)}, got {kind!r}")
    common = {
        "fallback": spec.get("fallback", "sd"),
        "clamp_m1": spec.get("clamp_m1"),
    }
    if kind in ("sd", "mg", "aopt", "bb1", "bb2"):
        return StepsizeRule(kind=kind, **common)
    if kind == "const":
        if "alpha" not in spec:
            raise ConfigError("rule.alpha is required for const")
        return StepsizeRule(kind="const", alpha=float(spec["alpha"]), **common)
    if kind == "gmr":
        if "rho" not in spec:
            raise ConfigError("rule.rho is required for gmr")
        return StepsizeRule(kind="gmr", rho=float(spec["rho"]), r=int(spec.get("r", 1)), **common)
    if kind == "psi_retard":
        if "psi" not in spec:
            raise ConfigError("rule.psi is required for psi_retard")
        return StepsizeRule(
            kind="psi_retard", psi=psi_from_spec(spec["psi"]), r=int(spec.get("r", 1)), **common
        )
    if kind == "cyclic":
        if "inner" not in spec or "c" not in spec:
            raise ConfigError("rule.inner and rule.c are required for cyclic")
        return StepsizeRule(
            kind="cyclic", members=(rule_from_spec(spec["inner"]),), cycle=int(spec["c"]), **common
        )
    if kind == "alternate":
        if spec.get("adaptive"):
            return StepsizeRule(
                kind="alternate", adaptive=True, tau=float(spec.get("tau", 0.8)), **common
            )
        if "rules" not in spec or len(spec["rules"]) != 2:
            raise ConfigError("rule.rules must list exactly two rules for alternate")
        return StepsizeRule(
            kind="alternate",
            members=tuple(rule_from_spec(s) for s in spec["rules"]),
            period=int(spec.get("period", 2)),
            **common,
        )
    raise AssertionError(kind)


def _components(g) -> np.ndarray:
    if isinstance(g, GradientVector):
        return g.components
    return np.asarray(g, dtype=float)


def _require_nonzero(arr: np.ndarray) -> None:
    if not np.any(arr != 0.0):
        raise ConvergenceSignal("gradient is zero; the iteration has converged")


def _guard_quadratic_forms(num: float, den: float) -> None:
    # Squares of denormal-range components underflow to zero; the gradient is
    # then numerically at the minimizer for every quotient computed here.
    if num == 0.0 or den == 0.0:
        raise ConvergenceSignal("gradient magnitude underflows the quadratic forms")


def weighted_stepsize(g, problem: SpectralProblem, weights: np.ndarray) -> float:
    """sum(w g^2) / sum(lambda w g^2); the inverse lies in [lambda_1, lambda_n]."""
    arr = _components(g)
    _require_nonzero(arr)
    wg = weights * arr
    num = float(np.dot(wg, arr))
    den = float(np.dot(problem.eigenvalues * wg, arr))
    _guard_quadratic_forms(num, den)
    return num / den


# sd, mg and aopt share the same three quadratic forms (g'g, g'Ag, g'A^2g),
# summed identically, so aopt^2 and sd * mg agree to a few ulp.


def sd_stepsize(g, problem: SpectralProblem) -> float:
    """Exact line search stepsize g'g / g'Ag."""
    arr = _components(g)
    _require_nonzero(arr)
    ag = problem.eigenvalues * arr
    num = float(np.dot(arr, arr))
    den = float(np.dot(arr, ag))
    _guard_quadratic_forms(num, den)
    return num / den


def mg_stepsize(g, problem: SpectralProblem) -> float:
    """Gradient-norm minimizing stepsize g'Ag / g'A^2g; never exceeds sd."""
    arr = _components(g)
    _require_nonzero(arr)
    ag = problem.eigenvalues * arr
    num = float(np.dot(arr, ag))
    den = float(np.dot(ag, ag))
    _guard_quadratic_forms(num, den)
    return num / den


def aopt_stepsize(g, problem: SpectralProblem) -> float:
    """||g|| / ||Ag||, the geometric mean of the sd and mg stepsizes."""
    arr = _components(g)
    _require_nonzero(arr)
    ag = problem.eigenvalues * arr
    num = float(np.dot(arr, arr))
    den = float(np.dot(ag, ag))
    _guard_quadratic_forms(num, den)
    return math.sqrt(num / den)


def const_opt_stepsize(problem: SpectralProblem) -> float:
    """2/(lambda_1 + lambda_n): equalizes the extreme contraction factors at (kappa-1)/(kappa+1)."""
    return 2.0 / (problem.lam1 + problem.lamn)


class RuleState:
    """Mutable per-run state: a ring buffer of recent gradients plus bookkeeping.

    Owned by exactly one run. The buffer never holds more than the rule's
    history window; asking for an evicted gradient is a sequencing error.
    """

    def __init__(self, rule: StepsizeRule, problem: SpectralProblem):
        self.rule = rule
        self.problem = problem
        self._buffer: deque[GradientVector] = deque(maxlen=rule.history_window)
        self.k = -1
        self.v_used: list[Optional[int]] = []
        self._weight_cache: dict[int, np.ndarray] = {}
        self._cyclic_cache: dict[int, tuple[float, Optional[int]]] = {}

    def push(self, g: GradientVector) -> None:
        if g.k != self.k + 1:
            raise StructuralError(f"expected gradient for iteration {self.k + 1}, got {g.k}")
        self._buffer.append(g)
        self.k = g.k

    def gradient(self, v: int) -> GradientVector:
        for g in self._buffer:
            if g.k == v:
                return g
        raise StructuralError(
            f"gradient {v} is outside the retained window at iteration {self.k}"
        )

    def weights_for(self, key_rule: StepsizeRule, weights_fn) -> np.ndarray:
        key = id(key_rule)
        if key not in self._weight_cache:
            self._weight_cache[key] = weights_fn()
        return self._weight_cache[key]


def _fallback_stepsize(state: RuleState, rule: StepsizeRule, problem: SpectralProblem):
    g = state.gradient(state.k)
    if rule.fallback == "sd":
        return sd_stepsize(g, problem), state.k
    if rule.fallback == "aopt":
        return aopt_stepsize(g, problem), state.k
    if isinstance(rule.fallback, (int, float)) and not isinstance(rule.fallback, bool):
        return float(rule.fallback), None
    raise StructuralError(
        f"rule {rule.name} needs history from iteration {state.k - rule.retard} "
        f"and no startup fallback is configured"
    )


def rule_stepsize(
    state: RuleState, rule: StepsizeRule, problem: SpectralProblem
) -> tuple[float, Optional[int]]:
    """Next stepsize for the rule given the recorded history.

    Returns (alpha, v_used) where v_used is the iteration index of the
    gradient that defined alpha (None for constant values).
    """
    k = state.k
    if k < 0:
        raise StructuralError("no gradient has been pushed yet")
    kind = rule.kind
    if kind == "sd":
        alpha, v = sd_stepsize(state.gradient(k), problem), k
    elif kind == "mg":
        alpha, v = mg_stepsize(state.gradient(k), problem), k
    elif kind == "aopt":
        alpha, v = aopt_stepsize(state.gradient(k), problem), k
    elif kind == "const":
        alpha, v = rule.alpha, None
    elif kind in ("bb1", "bb2"):
        if k < 1:
            alpha, v = _fallback_stepsize(state, rule, problem)
        else:
            h = state.gradient(k - 1)
            alpha = sd_stepsize(h, problem) if kind == "bb1" else mg_stepsize(h, problem)
            v = k - 1
    elif kind in ("gmr", "psi_retard"):
        if k < rule.r:
            alpha, v = _fallback_stepsize(state, rule, problem)
        else:
            if kind == "gmr":
                w = state.weights_for(rule, lambda: problem.eigenvalues**rule.rho)
            else:
                w = state.weights_for(rule, lambda: rule.psi.values_for(problem))
            alpha, v = weighted_stepsize(state.gradient(k - rule.r), problem, w), k - rule.r
    elif kind == "cyclic":
        cache = state._cyclic_cache
        key = id(rule)
        if k % rule.cycle == 0 or key not in cache:
            cache[key] = rule_stepsize(state, rule.members[0], problem)
        alpha, v = cache[key]
    elif kind == "alternate":
        if rule.adaptive:
            if k < 1:
                alpha, v = _fallback_stepsize(state, rule, problem)
            else:
                h = state.gradient(k - 1)
                long_step = sd_stepsize(h, problem)
                short_step = mg_stepsize(h, problem)
                alpha = short_step if short_step < rule.tau * long_step else long_step
                v = k - 1
        else:
            member = rule.members[0] if (k % rule.period) * 2 < rule.period else rule.members[1]
            alpha, v = rule_stepsize(state, member, problem)
    else:
        raise AssertionError(kind)

    if rule.clamp_m1 is not None:
        # Clamp the inverse stepsize into [lambda_1, M1].
        alpha = min(max(alpha, 1.0 / rule.clamp_m1), 1.0 / problem.lam1)
    if not (alpha > 0.0) or not math.isfinite(alpha):
        raise DomainError(f"rule {rule.name} produced invalid stepsize {alpha!r}")
    return alpha, v


@dataclass(frozen=True, eq=False)
class RunResult:
    """A finished run: the trajectory, the rule, and per-step reference indices."""

    trajectory: GradientTrajectory
    rule: StepsizeRule
    v_used: tuple[Optional[int], ...]
    stop_reason: str
    warnings: tuple[str, ...]

    @property
    def num_steps(self) -> int:
        return self.trajectory.num_steps


def run_method(
    problem: SpectralProblem,
    g0,
    rule: StepsizeRule,
    max_iter: int,
    tol: float = 1e-12,
) -> RunResult:
    """Advance the gradient iteration until ||g_k|| <= tol * ||g_0|| or max_iter.

    The relative-norm stopping test stands in for exact termination, which is
    measure-zero in floating point. Deterministic: identical inputs produce a
    bit-identical trajectory.
    """
    if max_iter < 1:
        raise StructuralError(f"max_iter must be >= 1, got {max_iter}")
    if not (tol > 0.0):
        raise DomainError(f"tol must be positive, got {tol!r}")
    if isinstance(g0, GradientVector):
        g = GradientVector(g0.components, 0)
    else:
        g = GradientVector(np.asarray(g0, dtype=float), 0)
    if g.n != problem.n:
        raise StructuralError(f"g0 has dimension {g.n}, problem has dimension {problem.n}")

    state = RuleState(rule, problem)
    state.push(g)
    gradients = [g]
    fgaps = [fgap(g, problem)]
    stepsizes: list[float] = []
    v_used: list[Optional[int]] = []
    warnings: list[str] = []
    norm0 = g.norm()
    stop_reason = "max_iter"
    for _ in range(max_iter):
        current = gradients[-1]
        if current.norm() <= tol * norm0:
            stop_reason = "tol"
            break
        if not np.all(np.isfinite(current.components)):
            warnings.append(f"non-finite gradient at iteration {current.k}; run aborted")
            stop_reason = "nonfinite"
            break
        alpha, v = rule_stepsize(state, rule, problem)
        nxt = gradient_step(current, alpha, problem)
        stepsizes.append(alpha)
        v_used.append(v)
        gradients.append(nxt)
        fgaps.append(fgap(nxt, problem))
        state.push(nxt)
    else:
        stop_reason = "max_iter"
    if gradients[-1].norm() <= tol * norm0 and stop_reason == "max_iter":
        stop_reason = "tol"

    if problem.has_duplicate_eigenvalues:
        warnings.append("problem has duplicate eigenvalues; components merge in the analysis")
    traj = GradientTrajectory(problem, tuple(gradients), tuple(stepsizes), tuple(fgaps))
    return RunResult(traj, rule, tuple(v_used), stop_reason, tuple(warnings))
