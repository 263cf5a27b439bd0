import json

import numpy as np
import pytest

from gradlab import ConfigError
from gradlab.bench import (
    ComparisonTable,
    ExperimentConfig,
    compare_rules,
    example1_scenario,
    generate_spectrum,
    read_matrix_file,
    read_trajectory_csv,
    run_experiment,
)
from gradlab.cli import main


def base_config(**overrides):
    raw = {
        "label": "test",
        "problem": {"eigenvalues": [1.0, 2.0]},
        "start": {"g0": [1.0, 0.0]},
        "rule": {"kind": "sd"},
        "max_iter": 5,
        "tol": 1e-12,
        "checks": [],
    }
    raw.update(overrides)
    return ExperimentConfig.from_dict(raw)


class TestGenerateSpectrum:
    @pytest.mark.parametrize("spacing", ["uniform", "log", "random"])
    def test_exact_endpoints(self, spacing):
        lam = generate_spectrum(10, 100.0, spacing, seed=7)
        assert lam[0] == 1.0
        assert lam[-1] == 100.0
        assert np.all(np.diff(lam) >= 0.0)

    def test_log_spacing_geometry(self):
        lam = generate_spectrum(5, 16.0, "log")
        assert np.allclose(lam, [1.0, 2.0, 4.0, 8.0, 16.0], rtol=1e-12)

    def test_seeded_reproducibility(self):
        a = generate_spectrum(20, 1000.0, "random", seed=3)
        b = generate_spectrum(20, 1000.0, "random", seed=3)
        assert np.array_equal(a, b)
        c = generate_spectrum(20, 1000.0, "random", seed=4)
        assert not np.array_equal(a, c)

    def test_validation(self):
        with pytest.raises(ConfigError):
            generate_spectrum(0, 10.0)
        with pytest.raises(ConfigError):
            generate_spectrum(5, 0.5)
        with pytest.raises(ConfigError):
            generate_spectrum(5, 10.0, "banana")
        with pytest.raises(ConfigError):
            generate_spectrum(5, 10.0, "random")  # missing seed
        with pytest.raises(ConfigError):
            generate_spectrum(1, 2.0)


class TestConfigValidation:
    def test_requires_single_problem_source(self):
        with pytest.raises(ConfigError, match="problem"):
            ExperimentConfig.from_dict(
                {
                    "problem": {"eigenvalues": [1.0], "generator": {"n": 2, "kappa": 2}},
                    "start": {"g0": [1.0]},
                    "rule": {"kind": "sd"},
                }
            )

    def test_requires_single_start(self):
        with pytest.raises(ConfigError, match="start"):
            ExperimentConfig.from_dict(
                {
                    "problem": {"eigenvalues": [1.0]},
                    "start": {"g0": [1.0], "x0": [1.0]},
                    "rule": {"kind": "sd"},
                }
            )

    def test_field_errors_name_the_field(self):
        with pytest.raises(ConfigError, match="max_iter"):
            base_config(max_iter=0)
        with pytest.raises(ConfigError, match="tol"):
            base_config(tol=0.0)
        with pytest.raises(ConfigError, match="rule"):
            ExperimentConfig.from_dict(
                {"problem": {"eigenvalues": [1.0]}, "start": {"g0": [1.0]}}
            )
        with pytest.raises(ConfigError, match="checks"):
            base_config(checks=[{"nope": {}}])

    def test_generator_fields_required(self):
        with pytest.raises(ConfigError, match="generator"):
            ExperimentConfig.from_dict(
                {
                    "problem": {"generator": {"n": 4}},
                    "start": {"random_g0": {"seed": 1}},
                    "rule": {"kind": "sd"},
                }
            )


class TestRunExperiment:
    def test_single_component_terminates_in_one_step(self):
        report = run_experiment(base_config())
        traj = report.trajectory
        assert traj.num_steps == 1
        assert traj.gradients[-1].norm() == 0.0
        assert report.result.stop_reason == "tol"

    def test_x0_start_in_spectral_coordinates(self):
        config = base_config(start={"x0": [2.0, 3.0]})
        report = run_experiment(config)
        g0 = report.trajectory.gradients[0].components
        assert np.array_equal(g0, np.array([2.0, 6.0]))  # lambda_i * x_i

    def test_random_start_seeded(self):
        cfg = base_config(
            problem={"generator": {"n": 6, "kappa": 50.0, "spacing": "log"}},
            start={"random_g0": {"seed": 11}},
            max_iter=3,
        )
        a = run_experiment(cfg).trajectory.gradients[0].components
        b = run_experiment(cfg).trajectory.gradients[0].components
        assert np.array_equal(a, b)

    def test_checks_yield_one_entry_each(self):
        cfg = base_config(
            problem={"eigenvalues": [1.0, 4.0, 9.0]},
            start={"g0": [1.0, 1.0, 1.0]},
            rule={"kind": "bb1"},
            max_iter=60,
            checks=[
                {"property_b": {"M1": "lambda_n", "m": 2}},
                {"property_a": {"m": 2, "M2": 2.0, "expect": "none"}},
                {"envelope": {"variant": "thm2_retard", "r": 1}},
                {"rate": {}},
            ],
        )
        report = run_experiment(cfg)
        assert [c.kind for c in report.checks] == ["property_b", "property_a", "envelope", "rate"]
        assert not report.has_failures

    def test_expectation_violation_fails(self):
        cfg = base_config(
            problem={"eigenvalues": [1.0, 4.0, 9.0]},
            start={"g0": [1.0, 1.0, 1.0]},
            rule={"kind": "bb1"},
            max_iter=60,
            checks=[{"property_a": {"m": 2, "M2": 2.0, "expect": "witness"}}],
        )
        report = run_experiment(cfg)
        assert report.has_failures

    def test_duplicate_eigenvalue_warning(self):
        cfg = base_config(problem={"eigenvalues": [1.0, 1.0, 2.0]}, start={"g0": [1.0, 0.5, 0.2]})
        report = run_experiment(cfg)
        assert any("duplicate" in w for w in report.warnings)


class TestExample1Scenario:
    def test_alpha_sequence(self):
        report = example1_scenario(1.0)
        alphas = report.trajectory.stepsizes
        expected = [0.0843, 0.2958, 0.7056]
        for got, want in zip(alphas, expected):
            assert abs(got - want) < 5e-4
        assert abs(1.0 / alphas[2] - 1.4172) < 5e-4
        assert abs(1.0 / alphas[3] - 4.8320) < 5e-4

    def test_witnesses_and_certificate(self):
        report = example1_scenario(1.0)
        ks = {w.k for w in report.property_a_witnesses}
        assert {2, 3} <= ks
        assert report.property_b_cert.passes
        assert not report.has_failures

    def test_epsilon_scaling_exact(self):
        # sqrt(4) = 2 scales the start exactly; every quotient is unchanged.
        a = example1_scenario(1.0).trajectory.stepsizes
        b = example1_scenario(4.0).trajectory.stepsizes
        assert a == b

    def test_gradient_values_match_reference(self):
        report = example1_scenario(1.0)
        comps = report.trajectory.component_matrix()
        expected = {
            1: [0.9157, 2.0599, -2.2047],
            2: [0.6448, -2.8148, 8.2300],
            3: [0.1898, 13.0744, -84.6846],
        }
        for k, vals in expected.items():
            assert np.max(np.abs(comps[k] - np.array(vals))) < 5e-4

    def test_invalid_epsilon(self):
        with pytest.raises(ConfigError):
            example1_scenario(0.0)


class TestOutputsAndDeterminism:
    def test_csv_round_trip(self, tmp_path):
        csv_path = tmp_path / "traj.csv"
        cfg = base_config(
            problem={"eigenvalues": [1.0, 3.0, 7.0]},
            start={"g0": [0.3, -1.7, 2.9]},
            rule={"kind": "bb1"},
            max_iter=40,
            checks=[{"envelope": {"variant": "thm2_retard", "r": 1}}],
            outputs={"csv": str(csv_path)},
        )
        report = run_experiment(cfg)
        cols = read_trajectory_csv(str(csv_path))
        traj = report.trajectory
        for k, alpha in enumerate(traj.stepsizes):
            assert cols["alpha"][k] == alpha
        for i in range(3):
            for k, g in enumerate(traj.gradients):
                assert cols[f"g_{i + 1}"][k] == g.components[i]
        assert "bound_1" in cols

    def test_reruns_are_byte_identical(self, tmp_path):
        def emit(tag):
            csv_path = tmp_path / f"{tag}.csv"
            json_path = tmp_path / f"{tag}.json"
            cfg = base_config(
                problem={"generator": {"n": 10, "kappa": 100.0, "spacing": "random", "seed": 7}},
                start={"random_g0": {"seed": 7}},
                rule={"kind": "bb2"},
                max_iter=200,
                checks=[
                    {"property_b": {"M1": "lambda_n", "m": 2}},
                    {"envelope": {"variant": "thm2_retard", "r": 1}},
                ],
                outputs={"csv": str(csv_path), "json": str(json_path)},
            )
            run_experiment(cfg)
            return csv_path.read_bytes(), json_path.read_bytes()

        csv1, json1 = emit("a")
        csv2, json2 = emit("b")
        assert csv1 == csv2
        assert json1 == json2

    def test_json_report_structure(self, tmp_path):
        json_path = tmp_path / "rep.json"
        cfg = base_config(
            rule={"kind": "sd"},
            checks=[{"property_b": {"M1": 2.0, "m": 1}}],
            outputs={"json": str(json_path)},
        )
        run_experiment(cfg)
        payload = json.loads(json_path.read_text())
        assert payload["problem"]["n"] == 2
        assert payload["run"]["steps"] == 1
        assert payload["checks"][0]["kind"] == "property_b"
        assert payload["checks"][0]["pass"] is True

    def test_alpha_sequence_invariant_to_start_scaling(self):
        cfg1 = base_config(
            problem={"eigenvalues": [1.0, 5.0, 9.0]},
            start={"g0": [1.0, -2.0, 0.5]},
            rule={"kind": "bb1"},
            max_iter=30,
        )
        cfg2 = base_config(
            problem={"eigenvalues": [1.0, 5.0, 9.0]},
            start={"g0": [2.0, -4.0, 1.0]},
            rule={"kind": "bb1"},
            max_iter=30,
        )
        assert run_experiment(cfg1).trajectory.stepsizes == run_experiment(cfg2).trajectory.stepsizes


class TestCompareRules:
    def _configs(self):
        problem = {"eigenvalues": [1.0, 10.0]}
        start = {"g0": [1.0, 1.0]}
        shared = dict(problem=problem, start=start, max_iter=500, tol=1e-300)
        sd = base_config(label="sd", rule={"kind": "sd"}, **shared)
        const = base_config(
            label="const-opt", rule={"kind": "const", "alpha": 2.0 / 11.0}, **shared
        )
        return sd, const

    def test_both_hit_extremal_rate(self):
        table = compare_rules(self._configs())
        assert isinstance(table, ComparisonTable)
        for row in table.rows:
            assert abs(row.empirical_rate - 9.0 / 11.0) < 1e-3

    def test_table_renderings(self):
        table = compare_rules(self._configs())
        text = table.to_text()
        assert "rule" in text and "sd" in text and "const-opt" in text
        csv_text = table.to_csv_text()
        assert csv_text.startswith("rule,steps_to_tol,empirical_rate,envelope_theta")

    def test_single_config_rejected(self):
        sd, _ = self._configs()
        with pytest.raises(ConfigError):
            compare_rules([sd])

    def test_mismatched_problem_rejected(self):
        sd, _ = self._configs()
        other = base_config(
            label="other",
            problem={"eigenvalues": [1.0, 9.0]},
            start={"g0": [1.0, 1.0]},
            rule={"kind": "sd"},
        )
        with pytest.raises(ConfigError, match="problem"):
            compare_rules([sd, other])

    def test_mismatched_start_rejected(self):
        sd, _ = self._configs()
        other = base_config(
            label="other",
            problem={"eigenvalues": [1.0, 10.0]},
            start={"g0": [2.0, 1.0]},
            rule={"kind": "sd"},
        )
        with pytest.raises(ConfigError, match="start"):
            compare_rules([sd, other])


MATRIX_FILE = """3
4.0 1.0 0.0
1.0 3.0 0.5
0.0 0.5 2.0
"""


class TestMatrixFileAndSpectralizeCLI:
    def test_read_matrix_file(self, tmp_path):
        path = tmp_path / "m.txt"
        path.write_text(MATRIX_FILE)
        dense = read_matrix_file(str(path))
        assert dense.n == 3
        assert dense.matrix[1, 2] == 0.5

    def test_matrix_problem_run(self, tmp_path):
        path = tmp_path / "m.txt"
        path.write_text(MATRIX_FILE)
        cfg = base_config(
            problem={"matrix_file": str(path)},
            start={"g0": [1.0, 1.0, 1.0]},
            rule={"kind": "bb1"},
            max_iter=80,
        )
        report = run_experiment(cfg)
        expected = np.sort(np.linalg.eigvalsh(np.array([[4, 1, 0], [1, 3, 0.5], [0, 0.5, 2]])))
        assert np.allclose(report.problem.eigenvalues, expected, rtol=1e-10)
        assert report.result.stop_reason == "tol"

    def test_cli_spectralize(self, tmp_path, capsys):
        path = tmp_path / "m.txt"
        path.write_text(MATRIX_FILE)
        assert main(["spectralize", str(path)]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["n"] == 3
        assert payload["kappa"] > 1.0

    def test_cli_spectralize_rejects_asymmetric(self, tmp_path, capsys):
        path = tmp_path / "bad.txt"
        path.write_text("2\n1.0 0.5\n0.1 1.0\n")
        assert main(["spectralize", str(path)]) == 1

    def test_bad_matrix_file(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("2\n1.0 0.5\n")
        with pytest.raises(ConfigError):
            read_matrix_file(str(path))


class TestCLI:
    def test_example1_verb(self, capsys):
        assert main(["example1", "--epsilon", "1.0"]) == 0
        out = capsys.readouterr().out
        assert "alpha_0" in out and "property_a" in out

    def test_run_verb(self, tmp_path, capsys):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(
            json.dumps(
                {
                    "problem": {"eigenvalues": [1.0, 2.0]},
                    "start": {"g0": [1.0, 0.0]},
                    "rule": {"kind": "sd"},
                    "max_iter": 5,
                    "checks": [{"property_b": {"M1": 2.0, "m": 1}}],
                }
            )
        )
        assert main(["run", str(cfg_path)]) == 0

    def test_run_check_failure_exits_2(self, tmp_path):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(
            json.dumps(
                {
                    "problem": {"eigenvalues": [1.0, 2.0]},
                    "start": {"g0": [1.0, 1.0]},
                    "rule": {"kind": "const", "alpha": 10.0},
                    "max_iter": 4,
                    "tol": 1e-300,
                    "checks": [{"property_b": {"M1": 2.0, "m": 1}}],
                }
            )
        )
        assert main(["run", str(cfg_path)]) == 2

    def test_missing_config_exits_3(self):
        assert main(["run", "/nonexistent/cfg.json"]) == 3

    def test_invalid_json_exits_1(self, tmp_path):
        cfg_path = tmp_path / "bad.json"
        cfg_path.write_text("{not json")
        assert main(["run", str(cfg_path)]) == 1

    def test_invalid_config_exits_1(self, tmp_path):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps({"problem": {}, "start": {}, "rule": {"kind": "sd"}}))
        assert main(["run", str(cfg_path)]) == 1

    def test_compare_verb(self, tmp_path, capsys):
        paths = []
        for label, rule in (("sd", {"kind": "sd"}), ("const", {"kind": "const", "alpha": 2.0 / 11.0})):
            p = tmp_path / f"{label}.json"
            p.write_text(
                json.dumps(
                    {
                        "label": label,
                        "problem": {"eigenvalues": [1.0, 10.0]},
                        "start": {"g0": [1.0, 1.0]},
                        "rule": rule,
                        "max_iter": 500,
                        "tol": 1e-300,
                    }
                )
            )
            paths.append(str(p))
        out_csv = tmp_path / "summary.csv"
        assert main(["compare", *paths, "--csv", str(out_csv)]) == 0
        assert "sd" in capsys.readouterr().out
        assert out_csv.read_text().startswith("rule,")


class TestCheckDegradation:
    def test_envelope_range_violation_recorded_not_raised(self):
        # const alpha = 2 puts the inverse stepsize below lambda_1: thm2 is
        # inapplicable and the check records the refusal.
        cfg = base_config(
            problem={"eigenvalues": [1.0, 4.0]},
            start={"g0": [1.0, 1.0]},
            rule={"kind": "const", "alpha": 2.0},
            max_iter=3,
            tol=1e-300,
            checks=[{"envelope": {"variant": "thm2_retard", "r": 1}}],
        )
        report = run_experiment(cfg)
        assert report.has_failures
        entry = report.checks[0]
        assert entry.kind == "envelope" and entry.passes is False
        assert "step 0" in entry.detail["error"]
        assert any("envelope" in w for w in report.warnings)

    def test_wide_problem_csv_uses_norm_columns(self, tmp_path):
        csv_path = tmp_path / "wide.csv"
        cfg = base_config(
            problem={"generator": {"n": 25, "kappa": 10.0, "spacing": "log"}},
            start={"random_g0": {"seed": 0}},
            rule={"kind": "bb1"},
            max_iter=30,
            checks=[{"envelope": {"variant": "thm2_retard", "r": 1}}],
            outputs={"csv": str(csv_path)},
        )
        run_experiment(cfg)
        header = csv_path.read_text().splitlines()[0].split(",")
        assert header == ["k", "alpha", "g_norm", "fgap", "bound_norm"]
