import numpy as np
import pytest

from deltanet.errors import DataError
from deltanet.learners import (
    LabeledDataset,
    ModelSpec,
    auc,
    build_estimator,
    cross_validate,
    pair_folds,
    permutation_importance,
    scores,
    train,
)
from deltanet.synth import gen_labeled_dataset, permute_pair_labels
from oracles import brute_force_auc


def dataset_from_arrays(X, y, prefix="f"):
    n = len(y)
    assert n % 2 == 0
    pair_ids = tuple(f"pr{i // 2:04d}" for i in range(n))
    users = tuple(f"u{i}" for i in range(n))
    names = tuple(f"{prefix}{j}" for j in range(X.shape[1]))
    return LabeledDataset(feature_names=names, pair_ids=pair_ids, users=users, X=X, y=y)


class TestAuc:
    def test_perfect_separation(self):
        assert auc([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]) == 1.0

    def test_all_ties(self):
        assert auc([0.5, 0.5, 0.5, 0.5], [0, 1, 0, 1]) == 0.5

    def test_frozen_mixed_case(self):
        values = [0.1, 0.4, 0.35, 0.8]
        labels = [0, 0, 1, 1]
        assert auc(values, labels) == 0.75
        assert auc(values, labels) == brute_force_auc(values, labels)

    def test_single_class_raises(self):
        with pytest.raises(DataError):
            auc([0.1, 0.2], [1, 1])

    def test_matches_brute_force_on_random_cases(self):
        rng = np.random.default_rng(5)
        for _ in range(500):
            n = int(rng.integers(2, 9))
            labels = rng.integers(0, 2, size=n)
            if labels.min() == labels.max():
                labels[0] = 1 - labels[0]
            values = rng.choice([0.0, 0.25, 0.5, 0.75, 1.0], size=n)
            assert auc(values, labels) == brute_force_auc(values, labels)

    def test_invariant_under_monotone_transform(self):
        rng = np.random.default_rng(11)
        values = rng.normal(size=40)
        labels = rng.integers(0, 2, size=40)
        labels[0], labels[1] = 0, 1
        base = auc(values, labels)
        assert auc(np.exp(values), labels) == pytest.approx(base, abs=1e-12)
        assert auc(3.0 * values + 7.0, labels) == pytest.approx(base, abs=1e-12)


class TestTrain:
    def test_separable_logistic_training_auc(self):
        data = gen_labeled_dataset(n_pairs=50, n_features=2, n_informative=2,
                                   separation=6.0, seed=1)
        model = train(ModelSpec("logistic_regression", seed=1), data)
        assert auc(scores(model, data.X), data.y) == 1.0

    def test_same_seed_identical_predictions(self):
        data = gen_labeled_dataset(n_pairs=80, n_features=5, separation=1.0, seed=2)
        m1 = train(ModelSpec("random_forest", seed=9), data)
        m2 = train(ModelSpec("random_forest", seed=9), data)
        assert np.array_equal(scores(m1, data.X), scores(m2, data.X))

    def test_single_class_raises(self):
        data = gen_labeled_dataset(n_pairs=10, seed=3)
        bad = LabeledDataset(feature_names=data.feature_names, pair_ids=data.pair_ids,
                             users=data.users, X=data.X, y=np.ones(len(data), dtype=int))
        with pytest.raises(DataError):
            train(ModelSpec("gaussian_nb"), bad)

    def test_every_family_fits_and_scores(self):
        data = gen_labeled_dataset(n_pairs=40, n_features=4, separation=2.0, seed=4)
        for family in ("decision_tree", "random_forest", "adaboost",
                       "logistic_regression", "gaussian_nb"):
            model = train(ModelSpec(family, seed=4), data)
            s = scores(model, data.X)
            assert s.shape == (len(data),)
            assert np.all((0.0 <= s) & (s <= 1.0))

    def test_informative_feature_has_highest_split_frequency(self):
        rng = np.random.default_rng(6)
        n = 500
        X = rng.normal(size=(n, 5))
        y = (X[:, 0] + 0.3 * rng.normal(size=n) > 0).astype(int)
        data = dataset_from_arrays(X, y)
        model = train(ModelSpec("random_forest", seed=8), data)
        forest = model.named_steps["clf"]
        counts = np.zeros(5)
        for tree in forest.estimators_:
            used, tallies = np.unique(
                tree.tree_.feature[tree.tree_.feature >= 0], return_counts=True
            )
            counts[used] += tallies
        assert counts.argmax() == 0

    def test_forest_with_one_full_tree_equals_decision_tree(self):
        data = gen_labeled_dataset(n_pairs=60, n_features=4, separation=1.0, seed=7)
        forest_spec = ModelSpec(
            "random_forest",
            hyperparameters={"n_estimators": 1, "max_features": None, "bootstrap": False},
            seed=13,
        )
        tree_spec = ModelSpec("decision_tree", seed=13)
        forest = train(forest_spec, data)
        tree = train(tree_spec, data)
        assert np.array_equal(scores(forest, data.X), scores(tree, data.X))

    def test_gaussian_nb_affine_invariance(self):
        data = gen_labeled_dataset(n_pairs=60, n_features=3, separation=1.5, seed=10)
        scale = np.array([2.5, -0.7, 400.0])
        shift = np.array([-3.0, 11.0, 0.02])
        rescaled = LabeledDataset(
            feature_names=data.feature_names, pair_ids=data.pair_ids, users=data.users,
            X=data.X * scale + shift, y=data.y,
        )
        m1 = train(ModelSpec("gaussian_nb", seed=0), data)
        m2 = train(ModelSpec("gaussian_nb", seed=0), rescaled)
        s1 = scores(m1, data.X)
        s2 = scores(m2, rescaled.X)
        assert np.allclose(s1, s2, atol=1e-9)

    def test_nan_features_imputed_inside_pipeline(self):
        data = gen_labeled_dataset(n_pairs=30, n_features=3, separation=3.0, seed=12)
        X = data.X.copy()
        X[::7, 1] = np.nan
        noisy = LabeledDataset(feature_names=data.feature_names, pair_ids=data.pair_ids,
                               users=data.users, X=X, y=data.y)
        model = train(ModelSpec("logistic_regression", seed=1), noisy)
        assert np.isfinite(scores(model, noisy.X)).all()


class TestCrossValidate:
    def test_pairs_never_split_across_folds(self):
        data = gen_labeled_dataset(n_pairs=23, seed=14)
        folds = pair_folds(data.pair_ids, k=5, seed=14)
        assert sorted(i for fold in folds for i in fold) == list(range(len(data)))
        for fold in folds:
            pids = [data.pair_ids[i] for i in fold]
            for pid in set(pids):
                assert pids.count(pid) == 2

    def test_too_few_pairs_raises(self):
        data = gen_labeled_dataset(n_pairs=3, seed=15)
        with pytest.raises(DataError):
            cross_validate(ModelSpec("decision_tree"), data, k=5, seed=0)

    def test_report_shape_and_determinism(self):
        data = gen_labeled_dataset(n_pairs=40, n_features=4, separation=2.0, seed=16)
        r1 = cross_validate(ModelSpec("gaussian_nb", seed=5), data, k=5, seed=5,
                            feature_set="all")
        r2 = cross_validate(ModelSpec("gaussian_nb", seed=5), data, k=5, seed=5,
                            feature_set="all")
        assert r1 == r2
        assert len(r1.fold_aucs) == 5
        assert 0.0 <= min(r1.fold_aucs) and max(r1.fold_aucs) <= 1.0
        assert r1.mean == pytest.approx(float(np.mean(r1.fold_aucs)))

    def test_separable_data_scores_high(self):
        data = gen_labeled_dataset(n_pairs=100, n_features=5, n_informative=2,
                                   separation=6.0, seed=17)
        report = cross_validate(ModelSpec("logistic_regression", seed=2), data, k=5, seed=2)
        assert report.mean >= 0.99

    def test_permuted_labels_score_near_chance(self):
        data = gen_labeled_dataset(n_pairs=150, n_features=5, n_informative=2,
                                   separation=6.0, seed=18)
        shuffled = permute_pair_labels(data, seed=18)
        report = cross_validate(ModelSpec("gaussian_nb", seed=3), shuffled, k=5, seed=3)
        assert 0.35 <= report.mean <= 0.65

    def test_informative_feature_lifts_auc(self):
        rng = np.random.default_rng(19)
        n_pairs = 150
        noise = gen_labeled_dataset(n_pairs=n_pairs, n_features=4, n_informative=0,
                                    separation=0.0, seed=20)
        spec = ModelSpec("random_forest", seed=21)
        base = cross_validate(spec, noise, k=5, seed=21).mean
        X = noise.X.copy()
        X[:, 0] = np.where(noise.y == 1, 1.0, -1.0) + 0.1 * rng.normal(size=len(noise))
        strong = LabeledDataset(feature_names=noise.feature_names, pair_ids=noise.pair_ids,
                                users=noise.users, X=X, y=noise.y)
        lifted = cross_validate(spec, strong, k=5, seed=21).mean
        assert lifted - base > 0.3


class TestPermutationImportance:
    def test_single_feature_share_is_one(self):
        data = gen_labeled_dataset(n_pairs=60, n_features=1, n_informative=1,
                                   separation=4.0, seed=22)
        model = train(ModelSpec("logistic_regression", seed=1), data)
        report = permutation_importance(model, data.X, data.y, data.feature_names,
                                        repeats=5, seed=1)
        assert report.shares[data.feature_names[0]] == 1.0

    def test_ignored_feature_gets_no_share(self):
        data = gen_labeled_dataset(n_pairs=120, n_features=3, n_informative=1,
                                   separation=5.0, seed=23)
        # column 2 is pure noise; a model fit on informative columns ignores it
        model = train(ModelSpec("logistic_regression", seed=2), data)
        report = permutation_importance(model, data.X, data.y, data.feature_names,
                                        repeats=10, seed=2)
        assert report.shares["f2"] < 0.05
        assert report.shares["f0"] > 0.5

    def test_shares_sum_to_one(self):
        data = gen_labeled_dataset(n_pairs=80, n_features=4, n_informative=2,
                                   separation=3.0, seed=24)
        model = train(ModelSpec("random_forest", seed=3), data)
        report = permutation_importance(model, data.X, data.y, data.feature_names,
                                        repeats=5, seed=3)
        assert sum(report.shares.values()) == pytest.approx(1.0, abs=1e-9)
        assert all(s >= 0.0 for s in report.shares.values())

    def test_degenerate_holdout_raises(self):
        data = gen_labeled_dataset(n_pairs=20, seed=25)
        model = train(ModelSpec("decision_tree", seed=1), data)
        with pytest.raises(DataError):
            permutation_importance(model, data.X, np.ones(len(data), dtype=int),
                                   data.feature_names)

    def test_unknown_family_rejected(self):
        with pytest.raises(DataError):
            ModelSpec("neural_net")
        spec = ModelSpec("random_forest")
        assert build_estimator(spec) is not None
