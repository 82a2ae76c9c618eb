"""End-to-end tests of the command line surface."""

import csv
import json
import time
import xml.etree.ElementTree as ET

import numpy as np
import pytest
from jsonschema import validate

from corrbasis.cli import main
from corrbasis.figures import parse_curves

FIT_JSON_SCHEMA = {
    "type": "object",
    "required": ["command", "model", "n", "estimates", "diagnostics"],
    "properties": {
        "command": {"const": "fit"},
        "n": {"type": "integer", "minimum": 1},
        "model": {
            "type": "object",
            "required": ["family", "basis", "phi", "knots", "y_column",
                         "coord_columns", "x_columns"],
        },
        "estimates": {
            "type": "object",
            "required": ["coefficients", "sigma2_eps", "sigma2_alpha", "phi",
                         "loglik", "converged", "level"],
            "properties": {
                "coefficients": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "required": ["name", "estimate", "se", "ci_low", "ci_high"],
                    },
                },
                "sigma2_eps": {"type": "number", "minimum": 0},
                "sigma2_alpha": {"type": "number", "minimum": 0},
                "loglik": {"type": "number"},
                "converged": {"type": "boolean"},
            },
        },
        "diagnostics": {
            "type": "object",
            "required": ["residual_acf", "collinearity_r2",
                         "max_pairwise_basis_r2", "condition_number"],
        },
    },
}


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def column(path, name):
    rows = read_rows(path)
    j = rows[0].index(name)
    return np.array([float(r[j]) for r in rows[1:]])


class TestSimulate:
    def test_row_count_and_header(self, tmp_path):
        out = tmp_path / "sim.csv"
        code = main(["simulate", "--output", str(out), "--n", "100",
                     "--seed", "1", "--family", "ar1", "--phi", "0.5"])
        assert code == 0
        rows = read_rows(out)
        assert rows[0] == ["coord", "y"]
        assert len(rows) == 101

    def test_same_seed_byte_identical(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        for out in (a, b):
            main(["simulate", "--output", str(out), "--n", "50", "--seed", "9",
                  "--family", "exponential", "--phi", "2.0",
                  "--beta", "1.0,0.5", "--trend"])
        assert a.read_bytes() == b.read_bytes()

    def test_round_trip_refit_recovers_decay(self, tmp_path):
        sim = tmp_path / "sim.csv"
        fit = tmp_path / "fit.json"
        main(["simulate", "--output", str(sim), "--n", "150", "--seed", "4",
              "--family", "exponential", "--phi", "2.0", "--extent", "30",
              "--sigma2-eps", "0.1", "--sigma2-alpha", "2.0", "--beta", "3"])
        assert main(["fit", "--input", str(sim), "--output", str(fit),
                     "--family", "exponential"]) == 0
        payload = json.loads(fit.read_text())
        assert 0.4 < payload["estimates"]["phi"] < 10.0
        assert payload["estimates"]["sigma2_alpha"] > payload["estimates"]["sigma2_eps"]

    def test_binary_output_is_zero_one(self, tmp_path):
        out = tmp_path / "b.csv"
        main(["simulate", "--output", str(out), "--n", "40", "--seed", "2",
              "--family", "exponential", "--phi", "2.0", "--dim", "2",
              "--binary"])
        y = column(out, "y")
        assert set(np.unique(y)) <= {0.0, 1.0}

    def test_group_column(self, tmp_path):
        out = tmp_path / "g.csv"
        main(["simulate", "--output", str(out), "--n", "30", "--seed", "3",
              "--n-groups", "3"])
        rows = read_rows(out)
        assert "group" in rows[0]


class TestDecompose:
    def test_reference_spectral_basis(self, tmp_path):
        src = tmp_path / "times.csv"
        src.write_text("coord\n1\n2\n3\n")
        out = tmp_path / "z.csv"
        assert main(["decompose", "--input", str(src), "--output", str(out),
                     "--family", "ar1", "--phi", "0.5"]) == 0
        z = np.column_stack([column(out, "z1"), column(out, "z2"),
                             column(out, "z3")])
        expected = np.array([[0.74, 0.61, 0.29], [0.87, 0.0, 0.49],
                             [0.74, 0.61, 0.29]])
        np.testing.assert_allclose(np.abs(z), expected, atol=0.01)
        summary = json.loads((tmp_path / "z.json").read_text())
        np.testing.assert_allclose(summary["eigenvalues"], [1.84, 0.75, 0.41],
                                   atol=0.005)
        assert summary["reconstruction_max_abs_diff"] < 1e-10

    def test_tiny_phi_gives_identity(self, tmp_path):
        src = tmp_path / "pts.csv"
        src.write_text("coord\n0\n5\n10\n15\n")
        out = tmp_path / "z.csv"
        main(["decompose", "--input", str(src), "--output", str(out),
              "--family", "gaussian", "--phi", "0.001"])
        z = np.column_stack([column(out, f"z{j}") for j in range(1, 5)])
        np.testing.assert_allclose(np.abs(z), np.eye(4), atol=1e-8)


class TestFit:
    def _simulate_trend(self, tmp_path, seed=11):
        sim = tmp_path / "sim.csv"
        main(["simulate", "--output", str(sim), "--n", "43", "--seed", str(seed),
              "--family", "ar1", "--phi", "0.7", "--beta", "20,-1.0", "--trend",
              "--extent", "43", "--sigma2-eps", "2.0", "--sigma2-alpha", "4.0"])
        return sim

    def test_ols_slope_matches_normal_equations(self, tmp_path):
        sim = self._simulate_trend(tmp_path)
        fit = tmp_path / "fit.json"
        assert main(["fit", "--input", str(sim), "--output", str(fit),
                     "--x", "x1"]) == 0
        payload = json.loads(fit.read_text())
        t = column(sim, "x1")
        y = column(sim, "y")
        design = np.column_stack([np.ones(43), t])
        oracle = np.linalg.solve(design.T @ design, design.T @ y)
        got = [c["estimate"] for c in payload["estimates"]["coefficients"]]
        np.testing.assert_allclose(got, oracle, atol=1e-8)

    def test_json_schema_and_determinism(self, tmp_path):
        sim = self._simulate_trend(tmp_path)
        f1, f2 = tmp_path / "f1.json", tmp_path / "f2.json"
        for out in (f1, f2):
            main(["fit", "--input", str(sim), "--output", str(out),
                  "--x", "x1", "--family", "ar1"])
        validate(json.loads(f1.read_text()), FIT_JSON_SCHEMA)
        assert f1.read_bytes() == f2.read_bytes()
        assert (tmp_path / "f1.fitted.csv").read_bytes() == \
            (tmp_path / "f2.fitted.csv").read_bytes()

    def test_noiseless_input_zero_residuals(self, tmp_path):
        src = tmp_path / "exact.csv"
        t = np.arange(20.0)
        lines = ["coord,x1,y"] + [f"{v},{v},{2 + 3 * v}" for v in t]
        src.write_text("\n".join(lines) + "\n")
        fit = tmp_path / "fit.json"
        main(["fit", "--input", str(src), "--output", str(fit), "--x", "x1"])
        resid = column(tmp_path / "fit.fitted.csv", "residual")
        assert np.abs(resid).max() < 1e-6

    def test_rank_deficient_design_is_usage_error(self, tmp_path):
        src = tmp_path / "bad.csv"
        rows = ["coord,x1,x2,y"] + [f"{i},{i},{2 * i},{i}" for i in range(12)]
        src.write_text("\n".join(rows) + "\n")
        code = main(["fit", "--input", str(src), "--output",
                     str(tmp_path / "f.json"), "--x", "x1,x2"])
        assert code == 2

    def test_missing_column_is_usage_error(self, tmp_path):
        sim = self._simulate_trend(tmp_path)
        code = main(["fit", "--input", str(sim), "--output",
                     str(tmp_path / "f.json"), "--y", "nope"])
        assert code == 2

    def test_missing_file_is_io_error(self, tmp_path):
        code = main(["fit", "--input", str(tmp_path / "absent.csv"),
                     "--output", str(tmp_path / "f.json")])
        assert code == 4

    def test_unknown_flag_is_usage_exit(self):
        with pytest.raises(SystemExit) as err:
            main(["fit", "--nonsense"])
        assert err.value.code == 2

    def test_collinearity_surfaces_in_diagnostics(self, tmp_path):
        """An AR(1) fit on a yearly trend reports the hidden year/basis overlap."""
        sim = self._simulate_trend(tmp_path)
        fit = tmp_path / "fit.json"
        main(["fit", "--input", str(sim), "--output", str(fit), "--x", "x1",
              "--family", "ar1", "--phi", "0.9"])
        payload = json.loads(fit.read_text())
        assert payload["diagnostics"]["max_collinearity_r2"] > 0.5


class TestFitProbit:
    def _simulate_binary(self, tmp_path, n=80):
        sim = tmp_path / "bin.csv"
        main(["simulate", "--output", str(sim), "--n", str(n), "--seed", "7",
              "--family", "exponential", "--phi", "3.0", "--dim", "2",
              "--beta", "0.2,0.8", "--binary"])
        return sim

    def test_same_seed_identical_json(self, tmp_path):
        sim = self._simulate_binary(tmp_path)
        f1, f2 = tmp_path / "p1.json", tmp_path / "p2.json"
        for out in (f1, f2):
            code = main(["fit-probit", "--input", str(sim), "--output", str(out),
                         "--coords", "coord1,coord2", "--x", "x1",
                         "--iters", "400", "--burn", "100", "--seed", "21",
                         "--grid", "6"])
            assert code == 0
        assert f1.read_bytes() == f2.read_bytes()
        assert (tmp_path / "p1.pred.csv").read_bytes() == \
            (tmp_path / "p2.pred.csv").read_bytes()

    def test_prediction_surface_in_unit_interval(self, tmp_path):
        sim = self._simulate_binary(tmp_path)
        out = tmp_path / "p.json"
        main(["fit-probit", "--input", str(sim), "--output", str(out),
              "--coords", "coord1,coord2", "--x", "x1", "--iters", "400",
              "--burn", "100", "--seed", "3", "--grid", "5"])
        probs = column(tmp_path / "p.pred.csv", "probability")
        assert probs.size == 25
        assert probs.min() >= 0.0 and probs.max() <= 1.0

    def test_nonbinary_response_usage_error(self, tmp_path):
        sim = tmp_path / "cont.csv"
        main(["simulate", "--output", str(sim), "--n", "30", "--seed", "2",
              "--family", "exponential", "--phi", "1.0", "--dim", "2"])
        code = main(["fit-probit", "--input", str(sim), "--output",
                     str(tmp_path / "p.json"), "--coords", "coord1,coord2",
                     "--iters", "50", "--burn", "10"])
        assert code == 2

    def test_reduced_rank_speedup(self, tmp_path):
        """Fifty knots beat the full-rank sampler by a wide margin at n = 1000."""
        sim = self._simulate_binary(tmp_path, n=1000)
        full, red = tmp_path / "full.json", tmp_path / "red.json"
        args = ["--input", str(sim), "--coords", "coord1,coord2", "--x", "x1",
                "--iters", "300", "--burn", "50", "--seed", "5", "--grid", "0",
                "--phi-grid", "1.0:8.0:5"]
        t0 = time.time()
        assert main(["fit-probit", *args, "--output", str(full)]) == 0
        t_full = time.time() - t0
        t0 = time.time()
        assert main(["fit-probit", *args, "--output", str(red),
                     "--knots", "50"]) == 0
        t_red = time.time() - t0
        assert t_full / t_red >= 5.0


class TestPredictCommand:
    def test_predictions_match_fitted_at_training_points(self, tmp_path):
        sim = tmp_path / "sim.csv"
        main(["simulate", "--output", str(sim), "--n", "60", "--seed", "5",
              "--family", "gaussian", "--phi", "2.0", "--sigma2-eps", "0.3",
              "--beta", "4"])
        fit = tmp_path / "fit.json"
        main(["fit", "--input", str(sim), "--output", str(fit),
              "--family", "gaussian"])
        pred = tmp_path / "pred.csv"
        assert main(["predict", "--input", str(sim), "--fit", str(fit),
                     "--at", str(sim), "--output", str(pred)]) == 0
        got = column(pred, "prediction")
        fitted = column(tmp_path / "fit.fitted.csv", "fitted")
        np.testing.assert_allclose(got, fitted, atol=1e-8)

    def test_ols_prediction_is_linear_formula(self, tmp_path):
        src = tmp_path / "d.csv"
        src.write_text("coord,x1,y\n0,1,3\n1,2,5\n2,3,7\n3,4,9\n4,5,11\n")
        fit = tmp_path / "fit.json"
        main(["fit", "--input", str(src), "--output", str(fit), "--x", "x1"])
        at = tmp_path / "new.csv"
        at.write_text("coord,x1\n10,6\n")
        out = tmp_path / "p.csv"
        main(["predict", "--input", str(src), "--fit", str(fit),
              "--at", str(at), "--output", str(out)])
        np.testing.assert_allclose(column(out, "prediction"), [13.0], atol=1e-6)


class TestPlotCommand:
    def _fit(self, tmp_path, extra):
        sim = tmp_path / "sim.csv"
        main(["simulate", "--output", str(sim), "--n", "51", "--seed", "8",
              "--family", "gaussian", "--phi", "4.0", "--extent", "40",
              "--sigma2-eps", "0.2", "--sigma2-alpha", "3.0", "--beta", "10"])
        fit = tmp_path / "fit.json"
        assert main(["fit", "--input", str(sim), "--output", str(fit),
                     *extra]) == 0
        return sim, fit

    def test_svg_is_well_formed_with_requested_curves(self, tmp_path):
        sim, fit = self._fit(tmp_path, ["--basis", "gauss-kernel",
                                        "--knots", "9"])
        out = tmp_path / "fig.svg"
        assert main(["plot", "--input", str(sim), "--fit", str(fit),
                     "--output", str(out)]) == 0
        root = ET.fromstring(out.read_text())
        ns = "{http://www.w3.org/2000/svg}"
        paths = [el.attrib["class"] for el in root.iter(f"{ns}path")]
        assert paths.count("fitted-curve") == 1
        assert paths.count("component-curve") == 10  # intercept + 9 kernels
        assert len(list(root.iter(f"{ns}circle"))) == 51

    def test_component_curves_sum_to_fitted(self, tmp_path):
        sim, fit = self._fit(tmp_path, ["--family", "gaussian"])
        out = tmp_path / "fig.svg"
        main(["plot", "--input", str(sim), "--fit", str(fit), "--output",
              str(out)])
        fitted, comps = parse_curves(out.read_text())
        total = np.sum([c[1] for c in comps], axis=0)
        assert np.abs(np.asarray(fitted[1]) - total).max() < 1e-6

    def test_limited_curves_keep_sum_via_remainder(self, tmp_path):
        sim, fit = self._fit(tmp_path, ["--basis", "eigen", "--family",
                                        "gaussian"])
        out = tmp_path / "fig.svg"
        main(["plot", "--input", str(sim), "--fit", str(fit), "--output",
              str(out), "--curves", "4"])
        fitted, comps = parse_curves(out.read_text())
        assert len(comps) == 5  # four kept plus the remainder
        total = np.sum([c[1] for c in comps], axis=0)
        assert np.abs(np.asarray(fitted[1]) - total).max() < 1e-6

    def test_quadratic_parameterizations_produce_identical_curves(self, tmp_path):
        """Monomial and shifted-squared fits give the same fitted path."""
        sim = tmp_path / "depth.csv"
        main(["simulate", "--output", str(sim), "--n", "51", "--seed", "12",
              "--extent", "4000", "--sigma2-eps", "4.0", "--beta", "15"])
        # add a quadratic signal deterministically
        rows = read_rows(sim)
        idx = rows[0].index("coord")
        out_rows = [rows[0]]
        for r in rows[1:]:
            x = float(r[idx])
            y = float(r[-1]) + 0.01 * x - 2.5e-6 * x**2
            out_rows.append([r[idx], f"{y:.12g}"])
        sim.write_text("\n".join(",".join(r) for r in out_rows) + "\n")

        fit_a = tmp_path / "a.json"
        fit_b = tmp_path / "b.json"
        main(["fit", "--input", str(sim), "--output", str(fit_a),
              "--basis", "poly", "--degree", "2", "--fixed-basis"])
        knotfile = tmp_path / "knots.csv"
        knotfile.write_text("coord\n1140\n2620\n3420\n")
        main(["fit", "--input", str(sim), "--output", str(fit_b),
              "--basis", "shifted-quadratic", "--knots", str(knotfile),
              "--fixed-basis"])
        svg_a, svg_b = tmp_path / "a.svg", tmp_path / "b.svg"
        main(["plot", "--input", str(sim), "--fit", str(fit_a), "--output",
              str(svg_a)])
        main(["plot", "--input", str(sim), "--fit", str(fit_b), "--output",
              str(svg_b)])
        fitted_a, _ = parse_curves(svg_a.read_text())
        fitted_b, _ = parse_curves(svg_b.read_text())
        np.testing.assert_allclose(fitted_a[1], fitted_b[1], atol=1e-6)

    def test_missing_fit_file_is_io_error(self, tmp_path):
        sim, _ = self._fit(tmp_path, [])
        code = main(["plot", "--input", str(sim), "--fit",
                     str(tmp_path / "absent.json"), "--output",
                     str(tmp_path / "f.svg")])
        assert code == 4
