import numpy as np
import pytest
from sklearn.base import clone

from beacon_amc.estimators import EarlyExitClassifier, RecoverabilityPredictor


@pytest.fixture(scope="module")
def fitted_classifier(tiny_dataset):
    x, y, _ = tiny_dataset.arrays_for("train")
    clf = EarlyExitClassifier(exit_point=1, epochs=16, exit_epochs=30, random_state=7)
    return clf.fit(x, y), x, y


class TestEarlyExitClassifier:
    def test_get_set_params_and_clone(self):
        clf = EarlyExitClassifier(exit_point=2, epochs=3)
        params = clf.get_params()
        assert params["exit_point"] == 2
        assert params["epochs"] == 3
        cloned = clone(clf)
        assert cloned.get_params() == params
        clf.set_params(exit_point=3)
        assert clf.exit_point == 3

    def test_fit_predict_shapes(self, fitted_classifier):
        clf, x, y = fitted_classifier
        proba = clf.predict_proba(x[:10])
        assert proba.shape == (10, 10)
        np.testing.assert_allclose(proba.sum(axis=1), 1.0, atol=1e-6)
        preds = clf.predict(x[:10])
        assert preds.shape == (10,)
        assert set(preds) <= set(range(10))
        np.testing.assert_array_equal(clf.classes_, np.arange(10))

    def test_exit_head_surface(self, fitted_classifier):
        clf, x, _ = fitted_classifier
        p_e = clf.exit_proba(x[:6])
        assert p_e.shape == (6, 10)
        np.testing.assert_array_equal(clf.predict_exit(x[:6]), np.argmax(p_e, axis=1))

    def test_better_than_chance_on_train(self, fitted_classifier):
        clf, x, y = fitted_classifier
        assert np.mean(clf.predict(x) == y) > 0.15

    def test_cost_profile_attribute(self, fitted_classifier):
        clf, _, _ = fitted_classifier
        assert clf.cost_profile_.macs_lbap == 2720

    def test_input_validation(self, fitted_classifier):
        clf, _, _ = fitted_classifier
        with pytest.raises(ValueError):
            clf.predict(np.zeros((4, 3, 128)))
        with pytest.raises(ValueError):
            EarlyExitClassifier(epochs=1).fit(np.zeros((4, 2, 128)), np.array([0, 1, 2, 11]))


class TestRecoverabilityPredictor:
    def _data(self, n=2000, seed=0):
        rng = np.random.default_rng(seed)
        P = rng.dirichlet(np.ones(10), size=n)
        y = (np.argmax(P, axis=1) == 4).astype(int)
        return P, y

    def test_sklearn_protocol(self):
        est = RecoverabilityPredictor(max_epochs=5)
        cloned = clone(est)
        assert cloned.get_params() == est.get_params()

    def test_fit_predict(self):
        P, y = self._data()
        est = RecoverabilityPredictor(max_epochs=60, random_state=1).fit(P, y)
        scores = est.score_samples(P)
        assert scores.shape == (2000,)
        assert np.all((scores > 0) & (scores < 1))
        proba = est.predict_proba(P[:5])
        np.testing.assert_allclose(proba.sum(axis=1), 1.0)
        acc = np.mean(est.predict(P) == y)
        assert acc > 0.9

    def test_rejects_non_simplex(self):
        est = RecoverabilityPredictor(max_epochs=2)
        with pytest.raises(ValueError):
            est.fit(np.ones((50, 10)), np.zeros(50, dtype=int))

    def test_rejects_non_binary_labels(self):
        P, _ = self._data(100)
        with pytest.raises(ValueError):
            RecoverabilityPredictor(max_epochs=2).fit(P, np.full(100, 2))
