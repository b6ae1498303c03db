import json
import subprocess
import sys

import numpy as np
import pytest

from modelkit.causal import confounder_model, random_model
from modelkit.cli import main
from modelkit.data_model import Dataset, load_csv, save_csv


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def report(capsys, *argv):
    code, out, err = run(capsys, *argv)
    assert code == 0, err
    return json.loads(out)


def table(rep, name):
    return rep["tables"][name]


class TestGen:
    def test_round_trip(self, capsys, tmp_path):
        out = tmp_path / "d.csv"
        rep = report(capsys, "gen", "--p", 5, "--m", 2, "--n", 100, "--seed", 7, "--out", out)
        assert rep["schema"] == "modelkit/1"
        d = load_csv(out)
        assert (d.n, d.p) == (100, 5)
        side = json.loads(out.with_suffix(".json").read_text())
        assert np.array(side["sigma_x"]).shape == (5, 5)
        assert np.array(side["phi"]).shape == (5, 2)

    @pytest.mark.parametrize("model", ["population", "envelope"])
    def test_deterministic(self, capsys, tmp_path, model):
        texts = []
        for name in ("a", "b"):
            out = tmp_path / f"{name}.csv"
            run(capsys, "gen", "--model", model, "--p", 4, "--m", 2, "--n", 30, "--seed", 3, "--out", out)
            texts.append((out.read_bytes(), out.with_suffix(".json").read_bytes()))
        assert texts[0] == texts[1]

    def test_m_exceeds_p(self, capsys, tmp_path):
        with pytest.raises(SystemExit) as info:
            main(["gen", "--p", "2", "--m", "3", "--n", "10", "--out", str(tmp_path / "x.csv")])
        assert info.value.code == 2
        assert "--m" in capsys.readouterr().err


class TestFit:
    def test_cv_recovers_rank_two(self, capsys, tmp_path):
        hits = 0
        for seed in range(50):
            out = tmp_path / f"g{seed}.csv"
            run(capsys, "gen", "--p", 20, "--m", 2, "--n", 200, "--noise", 1, "--seed", seed, "--out", out)
            rep = report(capsys, "fit", "--data", out, "--seed", seed)
            hits += table(rep, "fit")[0]["m"] == 2
        assert hits >= 45

    def test_report_contents(self, capsys, tmp_path):
        out = tmp_path / "g.csv"
        run(capsys, "gen", "--p", 6, "--m", 2, "--n", 80, "--seed", 1, "--out", out)
        rep = report(capsys, "fit", "--data", out)
        assert len(table(rep, "press")) >= 2
        assert len(table(rep, "beta_hat")) == 6
        assert table(rep, "truth")[0]["relative_error"] < 0.5
        assert all(dg["pass"] for dg in rep["diagnostics"])

    def test_fixed_m_omits_press(self, capsys, tmp_path):
        out = tmp_path / "g.csv"
        run(capsys, "gen", "--p", 5, "--m", 2, "--n", 50, "--seed", 1, "--out", out)
        rep = report(capsys, "fit", "--data", out, "--m", 3)
        assert "press" not in rep["tables"]
        assert table(rep, "fit")[0]["m"] == 3

    def test_ols_collinear(self, capsys, tmp_path):
        rng = np.random.default_rng(0)
        c = rng.standard_normal(20)
        save_csv(Dataset(np.column_stack([c, -c]), rng.standard_normal(20)), tmp_path / "c.csv")
        code, out, err = run(capsys, "fit", "--data", tmp_path / "c.csv", "--method", "ols")
        assert code == 1 and out == ""
        assert "collinear design" in err

    def test_ols_ok(self, capsys, tmp_path):
        out = tmp_path / "g.csv"
        run(capsys, "gen", "--p", 3, "--m", 1, "--n", 40, "--seed", 2, "--out", out)
        rep = report(capsys, "fit", "--data", out, "--method", "ols")
        assert rep["diagnostics"][0]["pass"]

    def test_missing_file(self, capsys, tmp_path):
        code, _, err = run(capsys, "fit", "--data", tmp_path / "none.csv")
        assert code == 1 and "missing file" in err


class TestEquivalence:
    def test_agree(self, capsys):
        rep = report(capsys, "equivalence", "--p", 6, "--relevant", 3, "--reps", 100, "--seed", 0)
        assert table(rep, "summary")[0]["agree_rate"] == 1.0
        assert {r["krylov_dim"] for r in table(rep, "instances")} == {3}

    def test_p_one(self, capsys):
        rep = report(capsys, "equivalence", "--p", 1, "--relevant", 1, "--reps", 5)
        for r in table(rep, "instances"):
            assert (r["krylov_dim"], r["relevant_group_count"], r["pls_stop"]) == (1, 1, 1)

    def test_zero_beta(self, capsys):
        rep = report(capsys, "equivalence", "--p", 4, "--relevant", 0, "--reps", 5)
        for r in table(rep, "instances"):
            assert (r["krylov_dim"], r["relevant_group_count"], r["pls_stop"]) == (0, 0, 0)

    def test_relevant_exceeds_p(self, capsys):
        with pytest.raises(SystemExit):
            main(["equivalence", "--p", "2", "--relevant", "3"])


class TestConfidence:
    def test_pass(self, capsys):
        rep = report(capsys, "confidence", "--reps", 2000, "--seed", 0)
        for row in table(rep, "uniformity"):
            assert row["ks"] < 0.04

    def test_negative_control(self, capsys):
        code, out, err = run(capsys, "confidence", "--reps", 2000, "--sigma-factor", 2)
        assert code == 1
        assert "diagnostic failed: ks normal_mean" in err
        assert json.loads(out)["tables"]["uniformity"][0]["ks"] > 0.1

    def test_min_reps(self, capsys):
        with pytest.raises(SystemExit):
            main(["confidence", "--reps", "50"])


class TestCausal:
    def write(self, tmp_path, model):
        path = tmp_path / "m.json"
        path.write_text(json.dumps(model.to_json()))
        return path

    def test_independent(self, capsys, tmp_path):
        model = random_model(np.random.default_rng(0), 3, 2, 2, independent=True)
        rep = report(capsys, "causal", "--model", self.write(tmp_path, model))
        assert table(rep, "summary")[0]["max_tv"] <= 1e-12

    def test_confounder(self, capsys, tmp_path):
        rep = report(capsys, "causal", "--model", self.write(tmp_path, confounder_model()))
        assert abs(table(rep, "summary")[0]["max_tv"] - 10.29 / 41) <= 1e-12

    def test_malformed(self, capsys, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"f_b": [0.5, 0.5], "f_c_given_b": [[0.5, 0.7], [0.5, 0.3]],
                                    "f_r_given_cb": [[[0.5, 0.5], [0.5, 0.5]], [[0.5, 0.5], [0.5, 0.6]]]}))
        code, _, err = run(capsys, "causal", "--model", path)
        assert code == 1
        assert "f_r_given_cb[:, c=1, b=1]" in err

    def test_undefined_column_fails_diagnostic(self, capsys, tmp_path):
        path = tmp_path / "z.json"
        path.write_text(json.dumps({"f_b": [1.0], "f_c_given_b": [[1.0], [0.0]],
                                    "f_r_given_cb": [[[1.0], [1.0]]]}))
        code, _, err = run(capsys, "causal", "--model", path)
        assert code == 1 and "conditional defined for every c" in err


class TestQuantum:
    def test_spin_hadamard(self, capsys):
        rep = report(capsys, "quantum", "--demo", "spin", "--d", 2)
        ax = [[row[k] for k in sorted(row) if k != "row"] for row in table(rep, "a_x_real")]
        np.testing.assert_allclose(ax, [[0, 1], [1, 0]], atol=1e-12)
        px = [[row[k] for k in sorted(row) if k != "row"] for row in table(rep, "qa_projector_x_real")]
        np.testing.assert_allclose(px, [[0.5, 0.5], [0.5, 0.5]], atol=1e-12)
        measured = [r["value"] for r in table(rep, "pure_z_measure_x")]
        np.testing.assert_allclose(measured, [0.5, 0.5], atol=1e-12)

    def test_decision_no_attraction(self, capsys):
        rep = report(capsys, "quantum", "--demo", "decision", "--d", 4, "--seed", 5)
        for row in table(rep, "prospects"):
            assert row["probability"] == row["utility"]

    def test_decision_with_attraction(self, capsys):
        rep = report(capsys, "quantum", "--demo", "decision", "--d", 3, "--attraction", 0.5)
        rows = table(rep, "prospects")
        assert abs(sum(r["probability"] for r in rows) - 1) <= 1e-12

    @pytest.mark.parametrize("argv", [["--d", "0"], ["--attraction", "1.5"]])
    def test_usage_errors(self, capsys, argv):
        with pytest.raises(SystemExit) as info:
            main(["quantum", "--demo", "spin", *argv])
        assert info.value.code == 2


def test_out_flag(capsys, tmp_path):
    out = tmp_path / "r.json"
    code, stdout, _ = run(capsys, "quantum", "--demo", "spin", "--d", 3, "--out", out)
    assert code == 0 and stdout == ""
    assert json.loads(out.read_text())["command"] == "quantum"


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "modelkit", "quantum", "--demo", "spin"],
                         capture_output=True, text=True, check=False)
    assert res.returncode == 0
    assert json.loads(res.stdout)["schema"] == "modelkit/1"
