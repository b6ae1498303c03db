import json
from fractions import Fraction
from itertools import product

import numpy as np
import pytest

from modelkit.causal import (
    DiscreteCausalModel, UndefinedConditionalError, conditional_r_given_c, confounder_model,
    divergence, intervention_r_given_c, joint, load_model, random_model,
)
from modelkit.errors import DataError

# exact enumeration on the confounder model, computed by hand before the build
CONFOUNDER_TV = (10.29 / 41, 0.51 / 0.59 - 0.69)


def brute_force(model):
    """Exact rational joint, conditioning and intervention tables by enumeration."""
    fb = [Fraction(v).limit_denominator(10**9) for v in model.f_b]
    fcb = [[Fraction(v).limit_denominator(10**9) for v in row] for row in model.f_c_given_b]
    frcb = [[[Fraction(v).limit_denominator(10**9) for v in row] for row in plane]
            for plane in model.f_r_given_cb]
    R, C, B = model.r_card, model.c_card, model.b_card
    J = {(r, c, b): frcb[r][c][b] * fcb[c][b] * fb[b] for r, c, b in product(range(R), range(C), range(B))}
    cond, interv = {}, {}
    for c in range(C):
        fc = sum(J[r, c, b] for r in range(R) for b in range(B))
        for r in range(R):
            cond[r, c] = sum(J[r, c, b] for b in range(B)) / fc if fc else None
            interv[r, c] = sum(frcb[r][c][b] * fb[b] for b in range(B))
    return J, cond, interv


def uniform_binary():
    return DiscreteCausalModel(np.full(2, 0.5), np.full((2, 2), 0.5), np.full((2, 2, 2), 0.5))


def chain():
    """C copies B and R copies C."""
    f_rcb = np.zeros((2, 2, 2))
    for c, b in product(range(2), range(2)):
        f_rcb[c, c, b] = 1.0
    return DiscreteCausalModel([0.4, 0.6], np.eye(2), f_rcb)


class TestJoint:
    def test_uniform(self):
        np.testing.assert_array_equal(joint(uniform_binary()), np.full((2, 2, 2), 0.125))

    def test_chain_diagonal(self):
        J = joint(chain())
        for r, c, b in product(range(2), repeat=3):
            assert (J[r, c, b] > 0) == (r == c == b)
        assert J[0, 0, 0] == pytest.approx(0.4) and J[1, 1, 1] == pytest.approx(0.6)

    @pytest.mark.parametrize("seed", range(10))
    def test_matches_enumeration(self, seed):
        model = random_model(np.random.default_rng(seed), 3, 2, 4)
        J, _, _ = brute_force(model)
        table = joint(model)
        for k, v in J.items():
            assert table[k] == pytest.approx(float(v), abs=1e-15)
        assert abs(table.sum() - 1) <= 1e-12


class TestConditioningAndIntervention:
    def test_confounder_signature(self):
        model = confounder_model()
        cond = conditional_r_given_c(model).table
        interv = intervention_r_given_c(model)
        assert abs(cond[1, 0] - cond[1, 1]) > 0.4
        np.testing.assert_allclose(interv[:, 0], interv[:, 1], atol=1e-15)
        np.testing.assert_allclose(interv[1], [0.69, 0.69], atol=1e-15)

    def test_confounder_divergence(self):
        d = divergence(confounder_model())
        np.testing.assert_allclose(d.per_c, CONFOUNDER_TV, atol=1e-12)
        assert abs(d.max_tv - 10.29 / 41) <= 1e-12

    @pytest.mark.parametrize("seed", range(10))
    def test_matches_enumeration(self, seed):
        model = random_model(np.random.default_rng(100 + seed), 3, 3, 2)
        _, cond, interv = brute_force(model)
        c_tab = conditional_r_given_c(model).table
        i_tab = intervention_r_given_c(model)
        for (r, c), v in cond.items():
            assert c_tab[r, c] == pytest.approx(float(v), abs=1e-12)
            assert i_tab[r, c] == pytest.approx(float(interv[r, c]), abs=1e-12)
        tv = [sum(abs(cond[r, c] - interv[r, c]) for r in range(2)) / 2 for c in range(3)]
        np.testing.assert_allclose(divergence(model).per_c, [float(t) for t in tv], atol=1e-12)

    def test_uniform(self):
        m = uniform_binary()
        np.testing.assert_allclose(intervention_r_given_c(m), 0.5, atol=1e-15)
        np.testing.assert_allclose(conditional_r_given_c(m).table, 0.5, atol=1e-15)

    def test_response_ignores_background(self):
        rng = np.random.default_rng(3)
        col = rng.dirichlet(np.ones(3), size=2).T  # [r, c]
        f_rcb = np.repeat(col[:, :, None], 4, axis=2)
        model = DiscreteCausalModel(rng.dirichlet(np.ones(4)), rng.dirichlet(np.ones(2), size=4).T,
                                    f_rcb / f_rcb.sum(axis=0))
        np.testing.assert_allclose(intervention_r_given_c(model), col, atol=1e-12)

    def test_single_response_value(self):
        model = random_model(np.random.default_rng(4), 3, 2, 1)
        assert divergence(model).max_tv == 0.0

    def test_undefined_column(self):
        f_rcb = np.full((2, 3, 2), 0.5)
        model = DiscreteCausalModel([0.5, 0.5], [[0.5, 0.5], [0.5, 0.5], [0.0, 0.0]], f_rcb)
        cond = conditional_r_given_c(model)
        assert list(cond.defined) == [True, True, False]
        assert np.all(np.isnan(cond.table[:, 2]))
        np.testing.assert_allclose(cond.table[:, :2].sum(axis=0), 1.0, atol=1e-12)
        np.testing.assert_allclose(intervention_r_given_c(model).sum(axis=0), 1.0, atol=1e-12)
        with pytest.raises(UndefinedConditionalError, match=r"c in \[2\]"):
            divergence(model)


@pytest.mark.parametrize("seed", range(50))
def test_independence_gives_no_divergence(seed):
    rng = np.random.default_rng(seed)
    model = random_model(rng, *rng.integers(1, 5, size=3), independent=True)
    assert divergence(model).max_tv <= 1e-12


@pytest.mark.parametrize("seed", range(30))
def test_tables_stochastic_and_consistent(seed):
    rng = np.random.default_rng(500 + seed)
    model = random_model(rng, *rng.integers(1, 6, size=3))
    cond = conditional_r_given_c(model)
    assert np.all(cond.defined)
    np.testing.assert_allclose(cond.table.sum(axis=0), 1.0, atol=1e-12)
    np.testing.assert_allclose(intervention_r_given_c(model).sum(axis=0), 1.0, atol=1e-12)
    J = joint(model).sum(axis=2)
    np.testing.assert_allclose(cond.table, J / J.sum(axis=0), atol=1e-12)


class TestValidation:
    def test_round_trip(self):
        m = confounder_model()
        back = DiscreteCausalModel.from_json(json.dumps(m.to_json()))
        np.testing.assert_array_equal(back.f_r_given_cb, m.f_r_given_cb)

    def test_column_sum_names_slice(self):
        with pytest.raises(DataError, match=r"f_c_given_b\[:, b=0\] sums to 1.1"):
            DiscreteCausalModel([0.5, 0.5], [[0.6, 0.5], [0.5, 0.5]], np.full((1, 2, 2), 1.0))

    def test_response_slice(self):
        f_rcb = np.full((2, 2, 2), 0.5)
        f_rcb[0, 1, 0] = 0.4
        with pytest.raises(DataError, match=r"f_r_given_cb\[:, c=1, b=0\]"):
            DiscreteCausalModel([0.5, 0.5], np.full((2, 2), 0.5), f_rcb)

    def test_negative_entry(self):
        with pytest.raises(DataError, match="not a probability"):
            DiscreteCausalModel([1.2, -0.2], np.full((1, 2), 1.0), np.full((1, 1, 2), 1.0))

    def test_f_b_sum(self):
        with pytest.raises(DataError, match="f_b sums"):
            DiscreteCausalModel([0.5, 0.4], np.full((1, 2), 1.0), np.full((1, 1, 2), 1.0))

    def test_shapes(self):
        with pytest.raises(DataError, match="shape"):
            DiscreteCausalModel([1.0], np.full((1, 2), 1.0), np.full((1, 1, 1), 1.0))

    def test_missing_key_and_ragged(self):
        with pytest.raises(DataError, match="missing f_r_given_cb"):
            DiscreteCausalModel.from_json({"f_b": [1.0], "f_c_given_b": [[1.0]]})
        with pytest.raises(DataError, match="ragged"):
            DiscreteCausalModel.from_json({"f_b": [1.0], "f_c_given_b": [[1.0], [1.0, 0.0]],
                                           "f_r_given_cb": [[[1.0]]]})

    def test_load_model_errors(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json", encoding="utf-8")
        with pytest.raises(DataError, match="invalid JSON"):
            load_model(bad)
        with pytest.raises(DataError, match="cannot read"):
            load_model(tmp_path / "missing.json")
