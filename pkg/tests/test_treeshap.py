from fractions import Fraction

import numpy as np
import pytest

from roshap.dataset import REGRESSION
from roshap.errors import ConfigError, DataError
from roshap.trees import GbdtParams, Tree, TreeEnsemble, fit_gbdt
from roshap.treeshap import (Attribution, _brute_force_exact, brute_force_shapley,
                             expected_value, shap_matrix, tree_shap,
                             write_attribution_csv)

from conftest import random_dataset, random_small_ensemble
from test_trees import make_stump


def single_leaf_ensemble(value=2.0, cover=5.0, base=0.0, n_features=3):
    tree = Tree(feature=np.array([-1], np.int32), threshold=np.zeros(1),
                left=np.array([-1], np.int32), right=np.array([-1], np.int32),
                value=np.array([value]), cover=np.array([cover]),
                gain=np.zeros(1))
    return TreeEnsemble([tree], base, 1.0, "squared-error", n_features)


class TestExpectedValue:
    def test_single_leaf(self):
        assert expected_value(single_leaf_ensemble(value=2.0)) == 2.0

    def test_stump_weighted_mean(self):
        ens = make_stump(left_value=2.0, right_value=4.0,
                         left_cover=1.0, right_cover=3.0)
        assert expected_value(ens) == (1 * 2 + 3 * 4) / 4

    def test_matches_training_mean_for_unit_hessians(self):
        # squared error => hessian 1 per row, so covers are row counts and the
        # cover-weighted mean equals the plain mean margin over training rows
        rng = np.random.default_rng(2)
        ds = random_dataset(rng, n=80, p=4, task=REGRESSION)
        ens = fit_gbdt(ds, GbdtParams(num_rounds=7, max_depth=3))
        direct = ens.predict_margins(ds.features).mean()
        assert expected_value(ens) == pytest.approx(direct, abs=1e-9)


class TestTreeShap:
    def test_constant_model_all_zero(self):
        ens = single_leaf_ensemble(value=1.5, base=0.25)
        at = tree_shap(ens, np.zeros(3))
        assert at.phi.tolist() == [0.0, 0.0, 0.0]
        assert at.base == expected_value(ens) == 1.75

    def test_stump_closed_form(self):
        a, b = -1.0, 1.0
        ca, cb = 1.0, 3.0
        ens = make_stump(left_value=a, right_value=b, left_cover=ca, right_cover=cb)
        at = tree_shap(ens, np.array([0.2, 7.0]))
        expected_phi0 = a - (ca * a + cb * b) / (ca + cb)
        assert at.phi[0] == pytest.approx(expected_phi0, abs=1e-12)
        assert at.phi[1] == 0.0

    def test_local_accuracy_on_trained_models(self):
        rng = np.random.default_rng(7)
        for _ in range(6):
            ens, ds = random_small_ensemble(rng)
            margins = ens.predict_margins(ds.features[:25])
            phi = shap_matrix(ens, ds.features[:25])
            base = expected_value(ens)
            err = np.abs(base + phi.sum(axis=1) - margins).max()
            assert err <= 1e-8

    def test_missingness_exact_zero(self, small_sim):
        ens = fit_gbdt(small_sim, GbdtParams(num_rounds=4, max_depth=2))
        used = set()
        for t in ens.trees:
            used |= set(t.feature[t.feature >= 0].tolist())
        unused = sorted(set(range(small_sim.n_features)) - used)
        assert unused, "fixture needs at least one untouched feature"
        phi = shap_matrix(ens, small_sim.features[:10])
        assert (phi[:, unused] == 0.0).all()

    def test_additivity_across_trees(self):
        rng = np.random.default_rng(11)
        ds = random_dataset(rng, n=90, p=5)
        ens = fit_gbdt(ds, GbdtParams(num_rounds=2, max_depth=3))
        both = ens
        first = TreeEnsemble(ens.trees[:1], ens.base_score, ens.learning_rate,
                             ens.objective, ens.n_features)
        second = TreeEnsemble(ens.trees[1:], ens.base_score, ens.learning_rate,
                              ens.objective, ens.n_features)
        for x in ds.features[:15]:
            lhs = tree_shap(both, x)
            f, s = tree_shap(first, x), tree_shap(second, x)
            np.testing.assert_allclose(lhs.phi, f.phi + s.phi, atol=1e-10)
            # bases add relative to the shared base_score
            assert lhs.base == pytest.approx(
                f.base + s.base - ens.base_score, abs=1e-10)

    def test_dimension_mismatch(self):
        ens = make_stump()
        with pytest.raises(DataError):
            tree_shap(ens, np.zeros(9))

    def test_oracle_equivalence_random_cases(self):
        rng = np.random.default_rng(42)
        worst = 0.0
        for _ in range(40):
            ens, ds = random_small_ensemble(rng)
            for _ in range(3):
                x = ds.features[int(rng.integers(0, ds.n_rows))]
                fast = tree_shap(ens, x)
                slow = brute_force_shapley(ens, x)
                worst = max(worst, float(np.abs(fast.phi - slow.phi).max()))
        assert worst <= 1e-10


class TestBruteForce:
    def test_efficiency_axiom_exact(self):
        rng = np.random.default_rng(19)
        for _ in range(5):
            ens, ds = random_small_ensemble(rng, p_max=5, t_max=3, depth_max=3)
            x = ds.features[0]
            phi, v0, vfull = _brute_force_exact(ens, x)
            assert sum(phi, Fraction(0)) == vfull - v0

    def test_symmetry_axiom(self):
        # depth-2 tree splitting on feature 0 then feature 1 with mirrored
        # thresholds/covers/values makes the two features interchangeable
        tree = Tree(
            feature=np.array([0, 1, 1, -1, -1, -1, -1], np.int32),
            threshold=np.array([0.0, 0.0, 0.0, 0, 0, 0, 0]),
            left=np.array([1, 3, 5, -1, -1, -1, -1], np.int32),
            right=np.array([2, 4, 6, -1, -1, -1, -1], np.int32),
            value=np.array([0, 0, 0, 0.0, 1.0, 1.0, 4.0]),
            cover=np.array([8, 4, 4, 2, 2, 2, 2.0]),
            gain=np.zeros(7))
        ens = TreeEnsemble([tree], 0.0, 1.0, "squared-error", 2)
        at = brute_force_shapley(ens, np.array([1.0, 1.0]))
        assert at.phi[0] == at.phi[1]

    def test_stump_closed_form(self):
        ens = make_stump(left_value=-2.0, right_value=3.0,
                         left_cover=2.0, right_cover=2.0)
        at = brute_force_shapley(ens, np.array([0.1, 0.0]))
        # one-player game: phi = v(N) - v(empty)
        assert at.phi[0] == pytest.approx(-2.0 - 0.5, abs=1e-12)
        assert at.base == pytest.approx(0.5, abs=1e-12)

    def test_guard_on_large_p(self):
        ens = TreeEnsemble([], 0.0, 1.0, "squared-error", 25)
        with pytest.raises(ConfigError, match="2\\^p"):
            brute_force_shapley(ens, np.zeros(25))


class TestAttributionDump:
    def test_schema(self, tmp_path):
        import csv
        phi = np.array([[0.5, -0.25], [0.0, 1.0]])
        p = tmp_path / "attr.csv"
        write_attribution_csv(p, [10, 11], phi, 0.125, ("a", "b"))
        with open(p, newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["instance_id", "feature", "phi"]
        assert rows[1] == ["10", "__base__", "0.125"]
        assert rows[2] == ["10", "a", "0.5"]
        by_inst = {}
        for inst, feat, val in rows[1:]:
            by_inst.setdefault(inst, []).append(feat)
        assert by_inst["11"] == ["__base__", "a", "b"]
