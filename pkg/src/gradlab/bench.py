"""Experiment orchestration: config ingestion, runs, checks, CSV/JSON emission.

Configs are JSON (the single canonical format). A minimal example:

    {
      "label": "bb1 on a log spectrum",
      "problem": {"generator": {"n": 10, "kappa": 100, "spacing": "log", "seed": 7}},
      "start": {"random_g0": {"seed": 3}},
      "rule": {"kind": "bb1"},
      "max_iter": 1000,
      "tol": 1e-12,
      "checks": [
        {"property_b": {"M1": "lambda_n", "m": 2}},
        {"property_a": {"m": 2, "M2": 2.0, "expect": "none"}},
        {"envelope": {"variant": "thm2_retard", "r": 1}}
      ],
      "outputs": {"csv": "traj.csv", "json": "report.json"}
    }

Everything is deterministic given the config: generators use a seeded
algorithmic PRNG, CSV numbers use shortest round-trip decimals, and reports
are emitted with a fixed key order, so a rerun is byte-identical.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import envelope_bounds, property_lab
from .errors import ConfigError, ConvergenceSignal, DomainError
from .spectral_core import (
    DenseProblem,
    GradientVector,
    SpectralProblem,
    spectralize,
)
from .stepsize_engine import (
    PsiSpec,
    RunResult,
    StepsizeRule,
    psi_from_spec,
    rule_from_spec,
    run_method,
)

_SPACINGS = ("uniform", "log", "random")


def generate_spectrum(n: int, kappa: float, spacing: str = "log", seed: Optional[int] = None) -> np.ndarray:
    """Eigenvalues in [1, kappa] with exact endpoints.

    "uniform" and "log" space them evenly on the linear and log scale;
    "random" draws uniformly (seeded PCG64, never OS entropy), sorts, and
    rescales so the endpoints hit 1 and kappa exactly.
    """
    if n < 1:
        raise ConfigError(f"generator.n must be >= 1, got {n}")
    if not (kappa >= 1.0) or not math.isfinite(kappa):
        raise ConfigError(f"generator.kappa must be finite and >= 1, got {kappa!r}")
    if spacing not in _SPACINGS:
        raise ConfigError(f"generator.spacing must be one of {_SPACINGS}, got {spacing!r}")
    if n == 1:
        if kappa != 1.0:
            raise ConfigError("generator.n = 1 requires kappa = 1")
        return np.ones(1)
    if spacing == "uniform":
        lam = np.linspace(1.0, kappa, n)
    elif spacing == "log":
        lam = np.logspace(0.0, math.log10(kappa), n)
    else:
        if seed is None:
            raise ConfigError("generator.seed is required for random spacing")
        rng = np.random.default_rng(int(seed))
        draws = np.sort(rng.uniform(1.0, kappa, n))
        span = draws[-1] - draws[0]
        if span == 0.0:
            lam = np.linspace(1.0, kappa, n)
        else:
            lam = 1.0 + (draws - draws[0]) * ((kappa - 1.0) / span)
    lam[0] = 1.0
    lam[-1] = kappa
    return lam


@dataclass(frozen=True)
class CheckSpec:
    """One enabled check: kind plus its parameter map."""

    kind: str
    params: dict = field(default_factory=dict)


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    """Validated experiment description; see the module docstring for the grammar."""

    problem_eigenvalues: Optional[np.ndarray]
    problem_matrix_file: Optional[str]
    problem_generator: Optional[dict]
    start_g0: Optional[np.ndarray]
    start_x0: Optional[np.ndarray]
    start_random_seed: Optional[int]
    rule: StepsizeRule
    max_iter: int
    tol: float
    checks: tuple[CheckSpec, ...]
    csv_path: Optional[str]
    json_path: Optional[str]
    label: Optional[str]
    raw: dict

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ConfigError(f"config must be a mapping, got {type(raw).__name__}")
        problem = raw.get("problem")
        if not isinstance(problem, dict):
            raise ConfigError("config.problem is required and must be a mapping")
        sources = [key for key in ("eigenvalues", "matrix_file", "generator") if key in problem]
        if len(sources) != 1:
            raise ConfigError(
                f"config.problem must have exactly one of eigenvalues, matrix_file, generator; got {sources}"
            )
        eigenvalues = None
        matrix_file = None
        generator = None
        if "eigenvalues" in problem:
            eigenvalues = np.asarray(problem["eigenvalues"], dtype=float)
        elif "matrix_file" in problem:
            matrix_file = str(problem["matrix_file"])
        else:
            generator = dict(problem["generator"])
            for key in ("n", "kappa"):
                if key not in generator:
                    raise ConfigError(f"config.problem.generator.{key} is required")

        start = raw.get("start")
        if not isinstance(start, dict):
            raise ConfigError("config.start is required and must be a mapping")
        starts = [key for key in ("g0", "x0", "random_g0") if key in start]
        if len(starts) != 1:
            raise ConfigError(
                f"config.start must have exactly one of g0, x0, random_g0; got {starts}"
            )
        g0 = np.asarray(start["g0"], dtype=float) if "g0" in start else None
        x0 = np.asarray(start["x0"], dtype=float) if "x0" in start else None
        random_seed = None
        if "random_g0" in start:
            spec = start["random_g0"]
            if not isinstance(spec, dict) or "seed" not in spec:
                raise ConfigError("config.start.random_g0 must be a mapping with a seed")
            random_seed = int(spec["seed"])

        if "rule" not in raw:
            raise ConfigError("config.rule is required")
        try:
            rule = rule_from_spec(raw["rule"])
        except (ConfigError, DomainError) as exc:
            raise ConfigError(f"config.rule: {exc}") from exc

        max_iter = raw.get("max_iter", 1000)
        if not isinstance(max_iter, int) or max_iter < 1:
            raise ConfigError(f"config.max_iter must be an integer >= 1, got {max_iter!r}")
        tol = raw.get("tol", 1e-12)
        if not isinstance(tol, (int, float)) or not (tol > 0.0):
            raise ConfigError(f"config.tol must be positive, got {tol!r}")

        checks = []
        for idx, entry in enumerate(raw.get("checks", [])):
            if not isinstance(entry, dict) or len(entry) != 1:
                raise ConfigError(f"config.checks[{idx}] must be a single-key mapping")
            kind, params = next(iter(entry.items()))
            if kind not in ("property_b", "property_a", "property_ga", "envelope", "rate"):
                raise ConfigError(f"config.checks[{idx}]: unknown check {kind!r}")
            if not isinstance(params, dict):
                raise ConfigError(f"config.checks[{idx}].{kind} must be a mapping")
            checks.append(CheckSpec(kind, dict(params)))

        outputs = raw.get("outputs", {})
        if not isinstance(outputs, dict):
            raise ConfigError("config.outputs must be a mapping")
        return cls(
            problem_eigenvalues=eigenvalues,
            problem_matrix_file=matrix_file,
            problem_generator=generator,
            start_g0=g0,
            start_x0=x0,
            start_random_seed=random_seed,
            rule=rule,
            max_iter=max_iter,
            tol=float(tol),
            checks=tuple(checks),
            csv_path=outputs.get("csv"),
            json_path=outputs.get("json"),
            label=raw.get("label"),
            raw=raw,
        )

    @classmethod
    def from_file(cls, path: str) -> "ExperimentConfig":
        with open(path, "r", encoding="utf-8") as fh:
            try:
                raw = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
        return cls.from_dict(raw)


def read_matrix_file(path: str) -> DenseProblem:
    """Parse the dense-matrix format: first line n, then n whitespace-separated rows."""
    with open(path, "r", encoding="utf-8") as fh:
        tokens = fh.read().split()
    if not tokens:
        raise ConfigError(f"{path}: empty matrix file")
    try:
        n = int(tokens[0])
    except ValueError as exc:
        raise ConfigError(f"{path}: first token must be the dimension, got {tokens[0]!r}") from exc
    need = 1 + n * n
    if len(tokens) < need:
        raise ConfigError(f"{path}: expected {n * n} entries for an {n}x{n} matrix")
    try:
        values = [float(t) for t in tokens[1:need]]
    except ValueError as exc:
        raise ConfigError(f"{path}: non-numeric matrix entry: {exc}") from exc
    matrix = np.array(values).reshape(n, n)
    return DenseProblem(matrix, np.zeros(n))


def _resolve_problem(config: ExperimentConfig):
    """Returns (problem, spectralize_result_or_None, warnings)."""
    warnings = []
    if config.problem_eigenvalues is not None:
        lam = np.sort(np.asarray(config.problem_eigenvalues, dtype=float))
        problem = SpectralProblem(lam)
        basis = None
    elif config.problem_generator is not None:
        gen = config.problem_generator
        lam = generate_spectrum(
            int(gen["n"]),
            float(gen["kappa"]),
            gen.get("spacing", "log"),
            gen.get("seed"),
        )
        problem = SpectralProblem(lam)
        basis = None
    else:
        dense = read_matrix_file(config.problem_matrix_file)
        basis = spectralize(dense)
        problem = basis.problem
    if problem.has_duplicate_eigenvalues:
        warnings.append("problem has duplicate eigenvalues; components merge in the analysis")
    return problem, basis, warnings


def _resolve_start(config: ExperimentConfig, problem: SpectralProblem, basis) -> GradientVector:
    if config.start_g0 is not None:
        vec = config.start_g0
        if vec.size != problem.n:
            raise ConfigError(f"config.start.g0 has length {vec.size}, problem dimension is {problem.n}")
        if basis is not None:
            return GradientVector(basis.to_spectral(vec), 0)
        return GradientVector(vec, 0)
    if config.start_x0 is not None:
        vec = config.start_x0
        if vec.size != problem.n:
            raise ConfigError(f"config.start.x0 has length {vec.size}, problem dimension is {problem.n}")
        if basis is not None:
            return basis.initial_gradient(vec)
        # Spectral coordinates with b = 0: the gradient is lambda_i * x_i.
        return GradientVector(problem.eigenvalues * vec, 0)
    rng = np.random.default_rng(config.start_random_seed)
    return GradientVector(rng.standard_normal(problem.n), 0)


def _check_psi(params: dict, rule: StepsizeRule, problem: SpectralProblem, view: str) -> Optional[PsiSpec]:
    """Resolve a check's psi: explicit spec, or the rule's own weight view."""
    spec = params.get("psi", "rule")
    if isinstance(spec, dict):
        return psi_from_spec(spec)
    if spec != "rule":
        raise ConfigError(f"psi must be 'rule' or a psi mapping, got {spec!r}")
    psi = rule.certification_psi(problem) if view == "certification" else rule.property_psi(problem)
    return psi if psi is not None else PsiSpec.identity()


def _resolve_m1(value, problem: SpectralProblem) -> float:
    if value == "lambda_n" or value is None:
        return problem.lamn
    if isinstance(value, (int, float)):
        return float(value)
    raise ConfigError(f"M1 must be a number or 'lambda_n', got {value!r}")


@dataclass(frozen=True, eq=False)
class CheckResult:
    kind: str
    passes: Optional[bool]  # None = informational
    detail: dict

    def to_dict(self) -> dict:
        return {"kind": self.kind, "pass": self.passes, **self.detail}


@dataclass(frozen=True, eq=False)
class RunReport:
    """Everything a run produced: summary, stepsizes, check outcomes, warnings."""

    label: Optional[str]
    problem: SpectralProblem
    result: RunResult
    rate: Optional[envelope_bounds.RateEstimate]
    checks: tuple[CheckResult, ...]
    warnings: tuple[str, ...]
    envelope_certs: tuple[envelope_bounds.EnvelopeCertificate, ...]
    property_a_witnesses: tuple = ()
    property_b_cert: Optional[property_lab.PropertyBCertificate] = None

    @property
    def trajectory(self):
        return self.result.trajectory

    @property
    def has_failures(self) -> bool:
        return any(c.passes is False for c in self.checks)

    def to_dict(self) -> dict:
        traj = self.result.trajectory
        problem = self.problem
        d: dict = {"label": self.label}
        d["problem"] = {
            "n": problem.n,
            "kappa": problem.kappa,
            "lambda_1": problem.lam1,
            "lambda_n": problem.lamn,
        }
        if problem.n <= 20:
            d["problem"]["eigenvalues"] = [float(x) for x in problem.eigenvalues]
        d["rule"] = self.result.rule.to_spec()
        d["run"] = {
            "steps": traj.num_steps,
            "stop_reason": self.result.stop_reason,
            "final_gnorm": traj.gradients[-1].norm(),
            "final_fgap": traj.fgaps[-1],
        }
        d["stepsizes"] = [float(a) for a in traj.stepsizes]
        d["rate"] = self.rate.to_dict() if self.rate is not None else None
        d["checks"] = [c.to_dict() for c in self.checks]
        d["warnings"] = list(self.warnings)
        return d


def _float_repr(x: float) -> str:
    """Shortest decimal that round-trips to the same double."""
    return repr(float(x))


def write_trajectory_csv(
    path: str,
    report: RunReport,
) -> None:
    """Emit k, alpha, g_norm, fgap, per-component columns (n <= 20), envelope bounds."""
    traj = report.trajectory
    n = traj.problem.n
    cert = report.envelope_certs[0] if report.envelope_certs else None
    per_component = n <= 20
    header = ["k", "alpha", "g_norm", "fgap"]
    if per_component:
        header += [f"g_{i}" for i in range(1, n + 1)]
    if cert is not None:
        if per_component:
            header += [f"bound_{i}" for i in range(1, n + 1)]
        else:
            header += ["bound_norm"]
    lines = [",".join(header)]
    norm_c = float(np.linalg.norm(cert.C)) if cert is not None else 0.0
    for k, g in enumerate(traj.gradients):
        row = [str(k)]
        row.append(_float_repr(traj.stepsizes[k]) if k < traj.num_steps else "")
        row.append(_float_repr(g.norm()))
        row.append(_float_repr(traj.fgaps[k]))
        if per_component:
            row.extend(_float_repr(x) for x in g.components)
        if cert is not None:
            if per_component:
                row.extend(_float_repr(b) for b in cert.bound_at(k))
            else:
                row.append(_float_repr(norm_c * cert.theta**k))
        lines.append(",".join(row))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def read_trajectory_csv(path: str) -> dict:
    """Parse an emitted CSV back into numpy arrays keyed by column name."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln for ln in fh.read().splitlines() if ln]
    header = lines[0].split(",")
    columns: dict[str, list] = {name: [] for name in header}
    for ln in lines[1:]:
        for name, tok in zip(header, ln.split(",")):
            columns[name].append(float(tok) if tok != "" else math.nan)
    return {name: np.array(vals) for name, vals in columns.items()}


def report_to_json(report: RunReport) -> str:
    return json.dumps(report.to_dict(), indent=2)


def _run_checks(
    config_checks: Sequence[CheckSpec],
    result: RunResult,
    problem: SpectralProblem,
    warnings: list,
):
    traj = result.trajectory
    rule = result.rule
    checks: list[CheckResult] = []
    certs: list[envelope_bounds.EnvelopeCertificate] = []
    a_witnesses: tuple = ()
    b_cert = None
    for spec in config_checks:
        params = spec.params
        if spec.kind == "property_b":
            psi = _check_psi(params, rule, problem, "certification")
            m1 = _resolve_m1(params.get("M1"), problem)
            m = int(params.get("m", rule.history_window))
            cert = property_lab.certify_property_b(
                traj,
                result.v_used,
                psi,
                m1,
                m,
                quotient_from=int(params.get("quotient_from", 0)),
            )
            b_cert = cert
            checks.append(CheckResult("property_b", cert.passes, cert.to_dict()))
        elif spec.kind in ("property_a", "property_ga"):
            m = int(params.get("m", rule.history_window))
            m2 = float(params.get("M2", 2.0))
            if spec.kind == "property_a":
                wits = property_lab.scan_property_a(traj, m, m2)
            else:
                psi = _check_psi(params, rule, problem, "property")
                wits = property_lab.scan_property_ga(traj, psi, m, m2)
            expect = params.get("expect")
            if expect == "none":
                passes: Optional[bool] = len(wits) == 0
            elif expect == "witness":
                passes = len(wits) > 0
            elif expect is None:
                passes = None
            else:
                raise ConfigError(f"{spec.kind}.expect must be 'none', 'witness' or omitted")
            if spec.kind == "property_a":
                a_witnesses = wits
            detail = {
                "m": m,
                "M2": m2,
                "num_witnesses": len(wits),
                "witness_ks": sorted({w.k for w in wits}),
                "first_witness": wits[0].to_dict() if wits else None,
            }
            checks.append(CheckResult(spec.kind, passes, detail))
        elif spec.kind == "envelope":
            variant = params.get("variant", "auto")
            psi = _check_psi(params, rule, problem, "property")
            if variant == "auto":
                variant = "thm2_retard" if rule.retard >= 1 else "thm2_multi"
            try:
                cert = _build_envelope_check(variant, params, traj, psi, rule, problem)
            except DomainError as exc:
                # Zero-rate refusals and stepsize range violations are check
                # outcomes, not run failures.
                warnings.append(f"envelope {variant}: {exc}")
                checks.append(
                    CheckResult("envelope", False, {"variant": variant, "error": str(exc)})
                )
                continue
            certs.append(cert)
            detail = cert.to_dict()
            if params.get("derived", False):
                detail["derived"] = envelope_bounds.derived_bounds(cert, traj).to_dict()
            checks.append(CheckResult("envelope", cert.audit.passes, detail))
        elif spec.kind == "rate":
            k0 = params.get("k0")
            est = envelope_bounds.estimate_rate(traj, k0=k0)
            checks.append(CheckResult("rate", None, est.to_dict()))
        else:
            raise AssertionError(spec.kind)
    return checks, certs, a_witnesses, b_cert


def _build_envelope_check(variant, params, traj, psi, rule, problem):
    if variant == "thm1":
        return envelope_bounds.envelope_thm1(
            traj, psi, _resolve_m1(params.get("M1"), problem), int(params.get("m", rule.history_window))
        )
    if variant == "cor1_retard":
        return envelope_bounds.envelope_cor1(
            traj, psi, _resolve_m1(params.get("M1"), problem), r=int(params.get("r", max(rule.retard, 1)))
        )
    if variant == "cor1_multi":
        return envelope_bounds.envelope_cor1(
            traj,
            psi,
            _resolve_m1(params.get("M1"), problem),
            windows=params.get("windows", [rule.history_window]),
        )
    if variant == "thm2_retard":
        return envelope_bounds.envelope_thm2(traj, psi, r=int(params.get("r", max(rule.retard, 1))))
    if variant == "thm2_multi":
        return envelope_bounds.envelope_thm2(traj, psi, m=int(params.get("m", rule.history_window)))
    if variant == "ga":
        return envelope_bounds.envelope_ga(
            traj,
            psi,
            _resolve_m1(params.get("M1"), problem),
            float(params.get("M2", 2.0)),
            int(params.get("m", rule.history_window)),
        )
    raise ConfigError(f"envelope.variant {variant!r} is not recognized")


def run_experiment(config: ExperimentConfig) -> RunReport:
    """Run one configured experiment, attach its checks, write any outputs."""
    problem, basis, warnings = _resolve_problem(config)
    g0 = _resolve_start(config, problem, basis)
    result = run_method(problem, g0, config.rule, config.max_iter, config.tol)
    warnings.extend(result.warnings)
    if problem.lam1 != 1.0 and any(
        c.kind in ("property_a", "property_b", "property_ga") for c in config.checks
    ):
        warnings.append(
            f"lambda_1 = {problem.lam1:g} != 1: property thresholds use the unnormalized spectrum"
        )

    checks, certs, a_wits, b_cert = _run_checks(config.checks, result, problem, warnings)

    rate = None
    if result.num_steps >= 2:
        try:
            rate = envelope_bounds.estimate_rate(result.trajectory)
        except ConvergenceSignal:
            rate = None

    # Deduplicate while preserving first occurrence.
    seen = set()
    unique_warnings = []
    for w in warnings:
        if w not in seen:
            seen.add(w)
            unique_warnings.append(w)

    report = RunReport(
        label=config.label,
        problem=problem,
        result=result,
        rate=rate,
        checks=tuple(checks),
        warnings=tuple(unique_warnings),
        envelope_certs=tuple(certs),
        property_a_witnesses=a_wits,
        property_b_cert=b_cert,
    )
    if config.csv_path:
        write_trajectory_csv(config.csv_path, report)
    if config.json_path:
        with open(config.json_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(report_to_json(report) + "\n")
    return report


def example1_config(epsilon: float = 1.0, max_iter: int = 8, csv_path=None, json_path=None) -> ExperimentConfig:
    """The 3-d counterexample scenario: diag(1, 8, 16), retarded rational-weight rule.

    The start point scales with sqrt(epsilon); every stepsize is scale
    invariant, so the alpha sequence is independent of epsilon.
    """
    if not (epsilon > 0.0):
        raise ConfigError(f"epsilon must be positive, got {epsilon!r}")
    root = math.sqrt(epsilon)
    root40 = math.sqrt(40.0 * epsilon)
    raw = {
        "label": f"example1(epsilon={epsilon:g})",
        "problem": {"eigenvalues": [1.0, 8.0, 16.0]},
        "start": {"x0": [root, root40 / 8.0, root40 / 16.0]},
        "rule": {
            "kind": "psi_retard",
            "psi": {"form": "rational", "num": [1.0, 2.0], "den_power": 2, "square": True},
            "r": 1,
        },
        "max_iter": max_iter,
        "tol": 1e-12,
        "checks": [
            {"property_a": {"m": 2, "M2": 2.0, "expect": "witness"}},
            {"property_b": {"M1": 16.0, "m": 2}},
        ],
        "outputs": {k: v for k, v in (("csv", csv_path), ("json", json_path)) if v},
    }
    return ExperimentConfig.from_dict(raw)


def example1_scenario(
    epsilon: float = 1.0,
    max_iter: int = 8,
    csv_path: Optional[str] = None,
    json_path: Optional[str] = None,
) -> RunReport:
    """Run the 3-d counterexample and attach the dominance scan and the quotient certificate."""
    return run_experiment(example1_config(epsilon, max_iter, csv_path, json_path))


@dataclass(frozen=True, eq=False)
class ComparisonRow:
    label: str
    steps_to_tol: Optional[int]
    empirical_rate: Optional[float]
    envelope_theta: Optional[float]


@dataclass(frozen=True, eq=False)
class ComparisonTable:
    rows: tuple[ComparisonRow, ...]
    reports: tuple[RunReport, ...]

    def to_csv_text(self) -> str:
        lines = ["rule,steps_to_tol,empirical_rate,envelope_theta"]
        for row in self.rows:
            lines.append(
                ",".join(
                    [
                        row.label,
                        "" if row.steps_to_tol is None else str(row.steps_to_tol),
                        "" if row.empirical_rate is None else _float_repr(row.empirical_rate),
                        "" if row.envelope_theta is None else _float_repr(row.envelope_theta),
                    ]
                )
            )
        return "\n".join(lines) + "\n"

    def to_text(self) -> str:
        headers = ["rule", "steps_to_tol", "empirical_rate", "envelope_theta"]
        cells = [headers]
        for row in self.rows:
            cells.append(
                [
                    row.label,
                    "-" if row.steps_to_tol is None else str(row.steps_to_tol),
                    "-" if row.empirical_rate is None else f"{row.empirical_rate:.6f}",
                    "-" if row.envelope_theta is None else f"{row.envelope_theta:.6f}",
                ]
            )
        widths = [max(len(r[i]) for r in cells) for i in range(len(headers))]
        lines = ["  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip() for row in cells]
        return "\n".join(lines) + "\n"


def compare_rules(configs: Sequence[ExperimentConfig]) -> ComparisonTable:
    """Run several configs sharing a problem and start; one summary row per rule."""
    if len(configs) < 2:
        raise ConfigError(f"compare needs at least two configs, got {len(configs)}")
    reports = [run_experiment(c) for c in configs]
    base = reports[0]
    base_lam = base.problem.eigenvalues
    base_g0 = base.trajectory.gradients[0].components
    for rep in reports[1:]:
        if rep.problem.n != base.problem.n or not np.array_equal(rep.problem.eigenvalues, base_lam):
            raise ConfigError("compare: all configs must share the same problem")
        if not np.array_equal(rep.trajectory.gradients[0].components, base_g0):
            raise ConfigError("compare: all configs must share the same start")
    rows = []
    for rep in reports:
        steps = rep.trajectory.num_steps if rep.result.stop_reason == "tol" else None
        passing = [c.theta for c in rep.envelope_certs if c.audit is not None and c.audit.passes]
        rows.append(
            ComparisonRow(
                label=rep.label or rep.result.rule.name,
                steps_to_tol=steps,
                empirical_rate=rep.rate.empirical_rate if rep.rate else None,
                envelope_theta=min(passing) if passing else None,
            )
        )
    return ComparisonTable(tuple(rows), tuple(reports))
