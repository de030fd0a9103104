import numpy as np
import pytest

from plasso.cv import CvResult, evaluate, k_fold_cv
from plasso.model import Dataset, PliableFit, objective


def cv_data(rng, n=70, p=5, k=2):
    X = rng.standard_normal((n, p))
    Z = rng.standard_normal((n, k))
    mu = 2.0 * X[:, 0] + X[:, 0] * Z[:, 0] - X[:, 1]
    y = mu + 0.7 * rng.standard_normal(n)
    return Dataset(y, X, Z)


class TestEvaluate:
    def test_zero_fit_is_mean_square(self):
        y = np.array([1.0, -2.0, 3.0])
        data = Dataset(y, np.zeros((3, 1)), None)
        assert evaluate(PliableFit.zeros(1, 0), data) == \
            pytest.approx(float(y @ y) / 3)

    def test_is_twice_the_objective_loss(self):
        rng = np.random.default_rng(31)
        data = cv_data(rng, n=30)
        fit = PliableFit(0.3, np.array([0.1, -0.2]),
                         np.array([1.0, 0, 0, 0, 0.5]),
                         {0: np.array([0.4, 0.0])})
        parts = objective(fit, data, lam=0.2, alpha=0.5)
        assert evaluate(fit, data) == pytest.approx(2.0 * parts.loss, rel=1e-12)


class TestKFoldCv:
    def test_one_se_index_never_exceeds_min_index(self):
        rng = np.random.default_rng(32)
        for seed in range(5):
            res = k_fold_cv(cv_data(rng), n_folds=5, seed=seed, n_lambda=20)
            assert res.idx_1se <= res.idx_min
            assert res.lam_1se >= res.lam_min
            assert res.cv_mean.shape == res.cv_se.shape == (20,)
            assert np.all(res.cv_se >= 0)

    def test_deterministic_given_seed(self):
        data = cv_data(np.random.default_rng(33))
        a = k_fold_cv(data, n_folds=5, seed=7, n_lambda=15)
        b = k_fold_cv(data, n_folds=5, seed=7, n_lambda=15)
        np.testing.assert_array_equal(a.cv_mean, b.cv_mean)
        assert a.idx_min == b.idx_min and a.idx_1se == b.idx_1se

    def test_seed_changes_folds(self):
        data = cv_data(np.random.default_rng(34))
        a = k_fold_cv(data, n_folds=5, seed=0, n_lambda=15)
        b = k_fold_cv(data, n_folds=5, seed=1, n_lambda=15)
        assert not np.array_equal(a.cv_mean, b.cv_mean)
        # the full-data path does not depend on the folds
        for f1, f2 in zip(a.path.fits, b.path.fits):
            np.testing.assert_array_equal(f1.beta, f2.beta)

    def test_explicit_folds_respected(self):
        data = cv_data(np.random.default_rng(35), n=40)
        ids = np.arange(40) % 4
        res = k_fold_cv(data, folds=ids, n_lambda=10)
        res2 = k_fold_cv(data, folds=ids, n_lambda=10)
        np.testing.assert_array_equal(res.cv_mean, res2.cv_mean)
        with pytest.raises(ValueError, match="one fold id per row"):
            k_fold_cv(data, folds=ids[:-1], n_lambda=10)
        with pytest.raises(ValueError, match="two folds"):
            k_fold_cv(data, folds=np.zeros(40, dtype=int), n_lambda=10)

    def test_fold_count_validated(self):
        data = cv_data(np.random.default_rng(36), n=20)
        with pytest.raises(ValueError, match="n_folds"):
            k_fold_cv(data, n_folds=1)
        with pytest.raises(ValueError, match="n_folds"):
            k_fold_cv(data, n_folds=21)

    def test_duplicated_rows_leave_selection_index_stable(self):
        # doubling every row with paired folds gives identical fold fits,
        # so the selected index on the common grid must not move
        rng = np.random.default_rng(37)
        data = cv_data(rng, n=40)
        ids = np.arange(40) % 4
        X2 = np.vstack([data.X, data.X])
        Z2 = np.vstack([data.Z, data.Z])
        y2 = np.concatenate([data.y, data.y])
        ids2 = np.concatenate([ids, ids])
        a = k_fold_cv(data, folds=ids, n_lambda=12)
        b = k_fold_cv(Dataset(y2, X2, Z2), folds=ids2, n_lambda=12)
        np.testing.assert_allclose(a.lambdas, b.lambdas, rtol=1e-12)
        np.testing.assert_allclose(a.cv_mean, b.cv_mean, rtol=1e-6)
        assert a.idx_min == b.idx_min

    def test_pure_noise_prefers_heavy_penalty(self):
        # with no signal the one-SE pick should sit at (or right next to)
        # the all-zero end of the grid most of the time
        rng = np.random.default_rng(38)
        near_empty = 0
        runs = 25
        for _ in range(runs):
            n = 40
            X = rng.standard_normal((n, 4))
            Z = rng.standard_normal((n, 2))
            y = rng.standard_normal(n)
            res = k_fold_cv(Dataset(y, X, Z), n_folds=4, n_lambda=12,
                            seed=0)
            if res.idx_1se <= 2:
                near_empty += 1
        assert near_empty >= 0.8 * runs

    def test_signal_recovered_at_selected_lambda(self):
        rng = np.random.default_rng(39)
        data = cv_data(rng, n=100)
        res = k_fold_cv(data, n_folds=5, n_lambda=25)
        fit = res.path.fits[res.idx_min]
        assert 0 in fit.active_groups
        assert fit.beta[0] != 0.0

    def test_result_invariants(self):
        data = cv_data(np.random.default_rng(40), n=50)
        res = k_fold_cv(data, n_folds=5, n_lambda=10)
        assert isinstance(res, CvResult)
        assert res.lam_min == float(res.lambdas[res.idx_min])
        assert res.lam_1se == float(res.lambdas[res.idx_1se])
        assert res.path.n_lambdas == 10
