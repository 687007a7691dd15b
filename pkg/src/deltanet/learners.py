"""Classifier families, pair-grouped cross-validation, AUC, and importances.

The five model families are standard scikit-learn estimators behind a fixed
hyperparameter surface; everything evaluative (Mann-Whitney AUC, grouped
folds, permutation importance) is implemented here so its contracts stay
explicit. Matched rows always share a fold: a pair is never split between
train and test. All randomness flows from one master seed through
numpy SeedSequence spawning, so parallel or sequential execution produces
identical numbers.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any, Sequence

import numpy as np
from sklearn.ensemble import AdaBoostClassifier, RandomForestClassifier
from sklearn.impute import SimpleImputer
from sklearn.linear_model import LogisticRegression
from sklearn.naive_bayes import GaussianNB
from sklearn.pipeline import Pipeline
from sklearn.preprocessing import StandardScaler
from sklearn.tree import DecisionTreeClassifier

from .errors import DataError

FAMILIES = (
    "decision_tree",
    "random_forest",
    "adaboost",
    "logistic_regression",
    "gaussian_nb",
)

FEATURE_SETS = ("language", "network", "all")


@dataclass(frozen=True)
class ModelSpec:
    family: str
    hyperparameters: dict[str, Any] = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise DataError(f"unknown model family {self.family!r}")


@dataclass
class LabeledDataset:
    """Matched-pair rows: every pair_id appears twice, once per label."""

    feature_names: tuple[str, ...]
    pair_ids: tuple[str, ...]
    users: tuple[str, ...]
    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.y = np.asarray(self.y, dtype=int)
        if self.X.shape != (len(self.pair_ids), len(self.feature_names)):
            raise DataError("feature matrix shape does not match row/feature counts")
        if self.y.shape != (len(self.pair_ids),):
            raise DataError("label vector length does not match row count")

    def __len__(self) -> int:
        return len(self.pair_ids)

    def validate_pairs(self) -> None:
        seen: dict[str, list[int]] = {}
        for pid, label in zip(self.pair_ids, self.y):
            seen.setdefault(pid, []).append(int(label))
        bad = [pid for pid, labels in seen.items() if sorted(labels) != [0, 1]]
        if bad:
            raise DataError(f"pairs without exactly one 0 and one 1 row: {sorted(bad)[:5]}")

    def subset(self, indices: Sequence[int]) -> "LabeledDataset":
        idx = list(indices)
        return LabeledDataset(
            feature_names=self.feature_names,
            pair_ids=tuple(self.pair_ids[i] for i in idx),
            users=tuple(self.users[i] for i in idx),
            X=self.X[idx],
            y=self.y[idx],
        )

    def select_features(self, names: Sequence[str]) -> "LabeledDataset":
        missing = [n for n in names if n not in self.feature_names]
        if missing:
            raise DataError(f"unknown features requested: {missing}")
        cols = [self.feature_names.index(n) for n in names]
        return LabeledDataset(
            feature_names=tuple(names),
            pair_ids=self.pair_ids,
            users=self.users,
            X=self.X[:, cols],
            y=self.y,
        )


def _sub_seed(*entropy: int) -> int:
    """Fixed splittable scheme: derive a 32-bit seed from integer context."""
    return int(np.random.SeedSequence(list(entropy)).generate_state(1, dtype=np.uint32)[0])


def build_estimator(spec: ModelSpec) -> Pipeline:
    """Assemble the configured family behind a median imputer."""
    hp = dict(spec.hyperparameters)
    rs = _sub_seed(spec.seed)
    steps: list[tuple[str, Any]] = [
        ("impute", SimpleImputer(strategy="median", keep_empty_features=True))
    ]
    if spec.family == "decision_tree":
        clf = DecisionTreeClassifier(criterion=hp.pop("criterion", "gini"),
                                     max_depth=hp.pop("max_depth", None),
                                     random_state=rs, **hp)
    elif spec.family == "random_forest":
        clf = RandomForestClassifier(
            n_estimators=hp.pop("n_estimators", 100),
            max_features=hp.pop("max_features", "sqrt"),
            criterion=hp.pop("criterion", "gini"),
            max_depth=hp.pop("max_depth", None),
            bootstrap=hp.pop("bootstrap", True),
            random_state=rs,
            n_jobs=1,
            **hp,
        )
    elif spec.family == "adaboost":
        clf = AdaBoostClassifier(
            estimator=DecisionTreeClassifier(max_depth=hp.pop("stump_depth", 1)),
            n_estimators=hp.pop("n_estimators", 100),
            random_state=rs,
            **hp,
        )
    elif spec.family == "logistic_regression":
        steps.append(("scale", StandardScaler()))
        clf = LogisticRegression(
            penalty="l2",
            C=hp.pop("C", 1.0 / 1e-4),
            tol=hp.pop("tol", 1e-8),
            max_iter=hp.pop("max_iter", 10000),
            random_state=rs,
            **hp,
        )
    elif spec.family == "gaussian_nb":
        steps.append(("scale", StandardScaler()))
        clf = GaussianNB(var_smoothing=hp.pop("var_smoothing", 1e-9), **hp)
    else:  # pragma: no cover - guarded in ModelSpec
        raise DataError(f"unknown model family {spec.family!r}")
    steps.append(("clf", clf))
    return Pipeline(steps)


def train(spec: ModelSpec, data: LabeledDataset) -> Pipeline:
    """Fit the configured model; deterministic given the spec seed."""
    classes, counts = np.unique(data.y, return_counts=True)
    if len(classes) < 2:
        raise DataError("training data contains a single class")
    if counts.min() < 2:
        raise DataError("need at least 2 rows per class to train")
    model = build_estimator(spec)
    model.fit(data.X, data.y)
    return model


def scores(model: Pipeline, X: np.ndarray) -> np.ndarray:
    """Probability-like score of the positive class."""
    proba = model.predict_proba(np.asarray(X, dtype=float))
    positive_col = list(model.classes_).index(1)
    return proba[:, positive_col]


def auc(score_values: Sequence[float], labels: Sequence[int]) -> float:
    """Mann-Whitney AUC: P(random positive outscores random negative), ties 1/2."""
    s = np.asarray(score_values, dtype=float)
    y = np.asarray(labels, dtype=int)
    if s.shape != y.shape or s.ndim != 1:
        raise DataError("scores and labels must be equal-length vectors")
    n_pos = int((y == 1).sum())
    n_neg = int((y == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise DataError("AUC needs both classes present")
    order = np.argsort(s, kind="mergesort")
    ranks = np.empty(len(s), dtype=float)
    i = 0
    while i < len(s):
        j = i
        while j + 1 < len(s) and s[order[j + 1]] == s[order[i]]:
            j += 1
        midrank = (i + j) / 2.0 + 1.0
        ranks[order[i : j + 1]] = midrank
        i = j + 1
    u_stat = ranks[y == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u_stat / (n_pos * n_neg))


@dataclass
class CvReport:
    family: str
    feature_set: str
    fold_aucs: tuple[float, ...]
    mean: float
    sd: float
    k: int
    seed: int

    def as_dict(self) -> dict:
        return {
            "family": self.family,
            "feature_set": self.feature_set,
            "folds": list(self.fold_aucs),
            "mean": self.mean,
            "sd": self.sd,
            "k": self.k,
            "seed": self.seed,
        }


def pair_folds(pair_ids: Sequence[str], k: int, seed: int) -> list[list[int]]:
    """Partition row indices into k folds keeping matched rows together."""
    unique_pairs = sorted(set(pair_ids))
    if len(unique_pairs) < k:
        raise DataError(f"need at least {k} pairs for {k}-fold CV, got {len(unique_pairs)}")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xF01D]))
    shuffled = list(rng.permutation(unique_pairs))
    rows_by_pair: dict[str, list[int]] = {}
    for i, pid in enumerate(pair_ids):
        rows_by_pair.setdefault(pid, []).append(i)
    folds = []
    for chunk in np.array_split(shuffled, k):
        fold = []
        for pid in chunk:
            fold.extend(rows_by_pair[pid])
        folds.append(sorted(fold))
    return folds


def cross_validate(
    spec: ModelSpec,
    data: LabeledDataset,
    k: int = 5,
    seed: int = 0,
    feature_set: str = "all",
) -> CvReport:
    """k-fold CV over pairs; per-fold AUC on the held-out rows."""
    data.validate_pairs()
    folds = pair_folds(data.pair_ids, k, seed)
    fold_seeds = [_sub_seed(seed, 0xCF0, i) for i in range(k)]
    all_rows = set(range(len(data)))
    fold_aucs = []
    for i, test_rows in enumerate(folds):
        train_rows = sorted(all_rows - set(test_rows))
        model = train(replace(spec, seed=fold_seeds[i]), data.subset(train_rows))
        test = data.subset(test_rows)
        fold_aucs.append(auc(scores(model, test.X), test.y))
    arr = np.asarray(fold_aucs)
    return CvReport(
        family=spec.family,
        feature_set=feature_set,
        fold_aucs=tuple(float(a) for a in fold_aucs),
        mean=float(arr.mean()),
        sd=float(arr.std(ddof=1)) if k > 1 else 0.0,
        k=k,
        seed=seed,
    )


@dataclass
class ImportanceReport:
    feature_names: tuple[str, ...]
    importances: dict[str, float]
    shares: dict[str, float]
    baseline_auc: float
    repeats: int
    seed: int

    def as_rows(self) -> list[tuple[str, float, float]]:
        return [(f, self.importances[f], self.shares[f]) for f in self.feature_names]


def permutation_importance(
    model: Pipeline,
    X: np.ndarray,
    y: np.ndarray,
    feature_names: Sequence[str],
    repeats: int = 10,
    seed: int = 0,
) -> ImportanceReport:
    """Mean AUC drop from shuffling each feature column on held-out rows.

    Shares clamp negative importances to zero and normalize the rest to sum
    to one over the evaluated feature group.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    if len(np.unique(y)) < 2:
        raise DataError("degenerate holdout: needs both classes")
    if X.shape[1] != len(feature_names):
        raise DataError("feature_names length does not match matrix width")
    baseline = auc(scores(model, X), y)
    importances = {}
    for j, name in enumerate(feature_names):
        drops = []
        for r in range(repeats):
            rng = np.random.default_rng(np.random.SeedSequence([seed, 0x1329, j, r]))
            perm = rng.permutation(X.shape[0])
            X_perm = X.copy()
            X_perm[:, j] = X[perm, j]
            drops.append(baseline - auc(scores(model, X_perm), y))
        importances[name] = float(np.mean(drops))
    clamped = {f: max(v, 0.0) for f, v in importances.items()}
    total = sum(clamped.values())
    shares = {f: (v / total if total > 0 else 0.0) for f, v in clamped.items()}
    return ImportanceReport(
        feature_names=tuple(feature_names),
        importances=importances,
        shares=shares,
        baseline_auc=float(baseline),
        repeats=repeats,
        seed=seed,
    )
