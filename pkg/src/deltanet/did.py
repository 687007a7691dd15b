"""Before/after centrality panels and the 2x2 difference-in-differences fit.

Each matched pair contributes four observations per centrality: treated and
control users, measured on the snapshot strictly before the award (period 0)
and on the end-of-conversation graph (period 1). The estimator is classical
OLS of y on [1, T, G, T*G]; the interaction coefficient is the treatment
effect of recognition on that centrality.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy import linalg as sla
from scipy import stats as sstats

from .corpus import Corpus, DeltaRules, Discussion, MatchedPair, detect_deltas
from .errors import DataError
from .network import CENTRALITY_NAMES, GraphOptions, build_reply_graph, centrality_table

VARIANTS = ("main", "exclude_winning_replies", "unweighted")

DESIGN_COLUMNS = ("intercept", "T", "G", "T_x_G")


@dataclass(frozen=True)
class PanelObservation:
    pair_id: str
    user: str
    G: int
    T: int
    y: float
    centrality_name: str
    variant: str
    isolated: bool = False


@dataclass
class DidResult:
    beta: tuple[float, float, float, float]
    se: tuple[float, float, float, float]
    t_stats: tuple[float, float, float, float]
    p_values: tuple[float, float, float, float]
    n_obs: int
    centrality_name: str
    variant: str
    clustered: bool = False

    @property
    def did_effect(self) -> float:
        return self.beta[3]

    def stars(self, index: int = 3) -> str:
        return significance_stars(self.p_values[index])

    def as_dict(self) -> dict:
        return {
            "centrality": self.centrality_name,
            "variant": self.variant,
            "n_obs": self.n_obs,
            "clustered": self.clustered,
            **{f"beta_{name}": b for name, b in zip(DESIGN_COLUMNS, self.beta)},
            **{f"se_{name}": s for name, s in zip(DESIGN_COLUMNS, self.se)},
            **{f"t_{name}": t for name, t in zip(DESIGN_COLUMNS, self.t_stats)},
            **{f"p_{name}": p for name, p in zip(DESIGN_COLUMNS, self.p_values)},
            "stars": self.stars(),
        }


def significance_stars(p: float) -> str:
    if p < 0.001:
        return "***"
    if p < 0.01:
        return "**"
    if p < 0.05:
        return "*"
    return ""


def ols(
    X: np.ndarray, y: np.ndarray, names: Sequence[str] | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """OLS coefficients and classical standard errors via QR.

    Raises a DataError naming the collinear columns when X is rank deficient.
    sigma^2 is RSS/(n-p); an exactly-determined system yields zero SEs.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
        raise DataError("design matrix and outcome vector shapes are inconsistent")
    n, p = X.shape
    if n < p:
        raise DataError(f"need at least {p} observations, got {n}")
    names = list(names) if names is not None else [f"x{j}" for j in range(p)]
    Q, R = np.linalg.qr(X)
    diag = np.abs(np.diag(R))
    tol = max(n, p) * np.finfo(float).eps * (diag.max() if diag.size else 0.0)
    collinear = [names[j] for j in range(p) if diag[j] <= tol]
    if collinear:
        raise DataError(f"rank-deficient design: collinear columns {collinear}")
    beta = sla.solve_triangular(R, Q.T @ y)
    residuals = y - X @ beta
    rss = float(residuals @ residuals)
    dof = n - p
    sigma2 = rss / dof if dof > 0 else 0.0
    r_inv = sla.solve_triangular(R, np.eye(p))
    xtx_inv = r_inv @ r_inv.T
    se = np.sqrt(np.maximum(sigma2 * np.diag(xtx_inv), 0.0))
    return beta, se


def _clustered_se(
    X: np.ndarray, residuals: np.ndarray, clusters: Sequence[str]
) -> np.ndarray:
    """CR1 cluster-robust standard errors grouped by pair."""
    n, p = X.shape
    xtx_inv = np.linalg.inv(X.T @ X)
    meat = np.zeros((p, p))
    by_cluster: dict[str, list[int]] = {}
    for i, c in enumerate(clusters):
        by_cluster.setdefault(c, []).append(i)
    n_clusters = len(by_cluster)
    if n_clusters < 2:
        raise DataError("clustered SEs need at least 2 clusters")
    for rows in by_cluster.values():
        xg = X[rows]
        eg = residuals[rows]
        score = xg.T @ eg
        meat += np.outer(score, score)
    correction = (n_clusters / (n_clusters - 1)) * ((n - 1) / (n - p))
    cov = correction * xtx_inv @ meat @ xtx_inv
    return np.sqrt(np.maximum(np.diag(cov), 0.0))


def did_estimate(panel: Iterable[PanelObservation], clustered: bool = False) -> DidResult:
    """Fit y = b0 + b1*T + b2*G + b3*(T*G) on a balanced 4-per-pair panel."""
    obs = list(panel)
    if not obs:
        raise DataError("empty panel")
    centrality = obs[0].centrality_name
    variant = obs[0].variant
    cells: dict[str, set[tuple[int, int]]] = {}
    for o in obs:
        if o.centrality_name != centrality or o.variant != variant:
            raise DataError("panel mixes centralities or variants")
        cells.setdefault(o.pair_id, set()).add((o.G, o.T))
    bad = [pid for pid, c in cells.items() if c != {(0, 0), (0, 1), (1, 0), (1, 1)}]
    if bad:
        raise DataError(f"unbalanced panel for pairs: {sorted(bad)[:5]}")

    X = np.array([[1.0, o.T, o.G, o.T * o.G] for o in obs])
    y = np.array([o.y for o in obs])
    beta, se = ols(X, y, names=DESIGN_COLUMNS)
    if clustered:
        residuals = y - X @ beta
        se = _clustered_se(X, residuals, [o.pair_id for o in obs])
        dof = len(cells) - 1
    else:
        dof = len(obs) - X.shape[1]
    with np.errstate(divide="ignore", invalid="ignore"):
        t_stats = np.where(se > 0, beta / se, np.inf * np.sign(beta))
    p_values = 2.0 * sstats.t.sf(np.abs(t_stats), dof)
    p_values = np.nan_to_num(p_values, nan=0.0)
    return DidResult(
        beta=tuple(float(b) for b in beta),
        se=tuple(float(s) for s in se),
        t_stats=tuple(float(t) for t in t_stats),
        p_values=tuple(float(p) for p in p_values),
        n_obs=len(obs),
        centrality_name=centrality,
        variant=variant,
        clustered=clustered,
    )


def group_mean_double_difference(panel: Iterable[PanelObservation]) -> float:
    """(treated after - before) minus (control after - before) from cell means."""
    sums: dict[tuple[int, int], float] = {}
    counts: dict[tuple[int, int], int] = {}
    for o in panel:
        key = (o.G, o.T)
        sums[key] = sums.get(key, 0.0) + o.y
        counts[key] = counts.get(key, 0) + 1
    if set(counts) != {(0, 0), (0, 1), (1, 0), (1, 1)}:
        raise DataError("double difference needs all four (G, T) cells")
    mean = {k: sums[k] / counts[k] for k in counts}
    return (mean[(1, 1)] - mean[(1, 0)]) - (mean[(0, 1)] - mean[(0, 0)])


# ---------------------------------------------------------------------------
# Panel construction from a corpus and its matched pairs
# ---------------------------------------------------------------------------


def _award_for_pair(d: Discussion, pair: MatchedPair, rules: DeltaRules):
    for a in detect_deltas(d, rules):
        if a.from_op and a.recipient == pair.treated_user and a.award_time == pair.cutoff_time:
            return a
    raise DataError(
        f"no OP award found for pair {pair.pair_id!r}; "
        "pairs and corpus were built with different delta rules"
    )


def build_panel(
    pairs: Sequence[MatchedPair],
    corpus: Corpus,
    centrality_name: str,
    variant: str = "main",
    rules: DeltaRules | None = None,
) -> list[PanelObservation]:
    """Four observations per pair for one centrality under one variant.

    Variant semantics: ``exclude_winning_replies`` drops, in the after graph
    only, edges that reply to the awarded comment; ``unweighted`` collapses
    edge weights in both periods. Users isolated in a snapshot keep a zero
    centrality and are flagged, never dropped, so the panel stays balanced.
    """
    if variant not in VARIANTS:
        raise DataError(f"unknown variant {variant!r}, expected one of {VARIANTS}")
    if centrality_name not in CENTRALITY_NAMES:
        raise DataError(f"unknown centrality {centrality_name!r}")
    if not pairs:
        raise DataError("no matched pairs supplied")
    rules = rules or DeltaRules()
    by_id = {d.id: d for d in corpus.discussions}
    weighted = variant != "unweighted"

    table_cache: dict[tuple, dict] = {}

    def snapshot(d, cutoff, options):
        key = (d.id, cutoff, options)
        if key not in table_cache:
            g = build_reply_graph(d, cutoff, options)
            table_cache[key] = centrality_table(d, list(g.nodes), cutoff, options, graph=g)
        return table_cache[key]

    observations = []
    for pair in pairs:
        d = by_id.get(pair.discussion_id)
        if d is None:
            raise DataError(f"pair references unknown discussion {pair.discussion_id!r}")
        before_opts = GraphOptions(weighted=weighted)
        if variant == "exclude_winning_replies":
            award = _award_for_pair(d, pair, rules)
            after_opts = GraphOptions(
                weighted=weighted, exclude_replies_to_comment=award.awarded_comment_id
            )
        else:
            after_opts = before_opts
        before = snapshot(d, pair.cutoff_time, before_opts)
        after = snapshot(d, math.inf, after_opts)
        for user in (pair.treated_user, pair.control_user):
            for table, label in ((before, "before"), (after, "after")):
                if user not in table:
                    raise DataError(
                        f"user {user!r} missing from the {label} snapshot of {d.id!r}"
                    )
        for g_dummy, user in ((1, pair.treated_user), (0, pair.control_user)):
            for t_dummy, table in ((0, before), (1, after)):
                vec = table[user]
                isolated = vec.degenerate or (vec.in_degree == 0 and vec.out_degree == 0)
                observations.append(
                    PanelObservation(
                        pair_id=pair.pair_id,
                        user=user,
                        G=g_dummy,
                        T=t_dummy,
                        y=getattr(vec, centrality_name),
                        centrality_name=centrality_name,
                        variant=variant,
                        isolated=isolated,
                    )
                )
    return observations
