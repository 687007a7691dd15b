"""Weighted directed reply graphs and the six node centralities.

A snapshot graph contains one node per user active strictly before the
cutoff and one weighted edge per (replier, replied-to) user pair. HITS runs
as a dense power iteration with per-step L2 normalization; betweenness is
Brandes' algorithm over unweighted directed shortest paths, reported as
unnormalized pair counts.
"""

from __future__ import annotations

import heapq
import math
from collections import deque
from dataclasses import dataclass, fields

import numpy as np

from .corpus import Discussion
from .errors import DataError, IneligibleUserError


@dataclass(frozen=True)
class GraphOptions:
    weighted: bool = True
    exclude_replies_to_comment: str | None = None


@dataclass
class ReplyGraph:
    nodes: tuple[str, ...]  # sorted
    edges: dict[tuple[str, str], int]
    options: GraphOptions
    dropped_self_replies: int = 0

    def __contains__(self, user: str) -> bool:
        return user in self._node_set()

    def _node_set(self) -> set[str]:
        return set(self.nodes)

    def n_edges(self) -> int:
        return len(self.edges)

    def total_weight(self) -> int:
        return sum(self.edges.values())

    def in_degrees(self) -> dict[str, float]:
        deg = {u: 0.0 for u in self.nodes}
        for (_, v), w in self.edges.items():
            deg[v] += w
        return deg

    def out_degrees(self) -> dict[str, float]:
        deg = {u: 0.0 for u in self.nodes}
        for (u, _), w in self.edges.items():
            deg[u] += w
        return deg

    def successors(self) -> dict[str, list[tuple[str, int]]]:
        adj: dict[str, list[tuple[str, int]]] = {u: [] for u in self.nodes}
        for (u, v), w in sorted(self.edges.items()):
            adj[u].append((v, w))
        return adj


def build_reply_graph(
    d: Discussion, cutoff: float = math.inf, options: GraphOptions | None = None
) -> ReplyGraph:
    """Reply graph over comments strictly before the cutoff.

    Each reply adds one unit of weight from its author to the parent comment's
    author (the OP for direct replies to the post). Self-replies are dropped
    and counted; orphaned comments contribute no edge because their true
    parent author is unknown. ``exclude_replies_to_comment`` drops replies
    whose parent is the named comment (robustness variant), and
    ``weighted=False`` collapses all weights to 1 without changing the node
    or edge sets.
    """
    options = options or GraphOptions()
    cmap = d.comment_map()
    weights: dict[tuple[str, str], int] = {}
    dropped_self = 0
    for c in d.comments:
        if c.created_at >= cutoff:
            continue
        parent = d.parent_of(c, cmap)
        if parent is None:
            continue
        if options.exclude_replies_to_comment is not None and parent.id == options.exclude_replies_to_comment:
            continue
        if parent.author == c.author:
            dropped_self += 1
            continue
        key = (c.author, parent.author)
        weights[key] = weights.get(key, 0) + 1
    if not options.weighted:
        weights = {k: 1 for k in weights}
    return ReplyGraph(
        nodes=tuple(sorted(d.participants(cutoff))),
        edges=weights,
        options=options,
        dropped_self_replies=dropped_self,
    )


def degree_centralities(g: ReplyGraph, user: str) -> tuple[float, float, float]:
    """(in-degree, out-degree, out/max(in, 1)) for one node."""
    if user not in g:
        raise DataError(f"unknown user {user!r} in reply graph")
    in_d = sum(w for (_, v), w in g.edges.items() if v == user)
    out_d = sum(w for (u, _), w in g.edges.items() if u == user)
    return (float(in_d), float(out_d), out_d / max(in_d, 1))


@dataclass
class HitsScores:
    authority: dict[str, float]
    hub: dict[str, float]
    iterations: int
    converged: bool
    degenerate: bool


def hits(g: ReplyGraph, tol: float = 1e-10, max_iter: int = 1000) -> HitsScores:
    """Weighted HITS by two-step power iteration with L2 normalization.

    Per iteration: a <- W^T h then normalize, h <- W a then normalize;
    stops when the largest component change of either vector drops below
    ``tol``. Edgeless graphs yield all-zero scores flagged degenerate.
    """
    n = len(g.nodes)
    if n == 0 or not g.edges:
        zero = {u: 0.0 for u in g.nodes}
        return HitsScores(authority=dict(zero), hub=dict(zero), iterations=0,
                          converged=True, degenerate=True)

    index = {u: i for i, u in enumerate(g.nodes)}
    W = np.zeros((n, n))
    for (u, v), w in g.edges.items():
        W[index[u], index[v]] = w

    h = np.full(n, 1.0 / math.sqrt(n))
    a = np.zeros(n)
    iterations = 0
    converged = False
    for iterations in range(1, max_iter + 1):
        a_new = W.T @ h
        norm = np.linalg.norm(a_new)
        if norm > 0:
            a_new /= norm
        h_new = W @ a_new
        norm = np.linalg.norm(h_new)
        if norm > 0:
            h_new /= norm
        delta = max(np.max(np.abs(a_new - a)), np.max(np.abs(h_new - h)))
        a, h = a_new, h_new
        if delta < tol:
            converged = True
            break

    return HitsScores(
        authority={u: float(a[index[u]]) for u in g.nodes},
        hub={u: float(h[index[u]]) for u in g.nodes},
        iterations=iterations,
        converged=converged,
        degenerate=False,
    )


def betweenness(g: ReplyGraph, distance: str = "hop") -> dict[str, float]:
    """Brandes betweenness over directed shortest paths, unnormalized.

    ``distance="hop"`` (default) treats every edge as length 1 regardless of
    weight; ``distance="inverse_weight"`` uses 1/weight edge lengths via
    Dijkstra, provided only as a sensitivity check.
    """
    if distance not in ("hop", "inverse_weight"):
        raise DataError(f"unknown distance mode {distance!r}")
    adj = g.successors()
    bc = {u: 0.0 for u in g.nodes}
    for s in g.nodes:
        if distance == "hop":
            order, preds, sigma = _bfs_shortest_paths(s, adj)
        else:
            order, preds, sigma = _dijkstra_shortest_paths(s, adj)
        delta = {u: 0.0 for u in order}
        while order:
            w = order.pop()
            for v in preds[w]:
                delta[v] += (sigma[v] / sigma[w]) * (1.0 + delta[w])
            if w != s:
                bc[w] += delta[w]
    return bc


def _bfs_shortest_paths(s, adj):
    dist = {s: 0}
    sigma = {s: 1.0}
    preds: dict[str, list[str]] = {s: []}
    order = []
    queue = deque([s])
    while queue:
        v = queue.popleft()
        order.append(v)
        for w, _ in adj[v]:
            if w not in dist:
                dist[w] = dist[v] + 1
                sigma[w] = 0.0
                preds[w] = []
                queue.append(w)
            if dist[w] == dist[v] + 1:
                sigma[w] += sigma[v]
                preds[w].append(v)
    return order, preds, sigma


def _dijkstra_shortest_paths(s, adj):
    dist: dict[str, float] = {}
    sigma = {s: 1.0}
    preds: dict[str, list[str]] = {s: []}
    order = []
    seen = {s: 0.0}
    heap = [(0.0, s, s)]
    while heap:
        d_v, _, v = heapq.heappop(heap)
        if v in dist:
            continue
        dist[v] = d_v
        order.append(v)
        for w, weight in adj[v]:
            d_w = d_v + 1.0 / weight
            if w not in dist and (w not in seen or d_w < seen[w]):
                seen[w] = d_w
                sigma[w] = sigma[v]
                preds[w] = [v]
                heapq.heappush(heap, (d_w, w, w))
            elif w not in dist and d_w == seen.get(w):
                sigma[w] += sigma[v]
                preds[w].append(v)
    return order, preds, sigma


@dataclass(frozen=True)
class CentralityVector:
    in_degree: float
    out_degree: float
    degree_ratio: float
    authority: float
    hub: float
    betweenness: float
    degenerate: bool = False

    def as_dict(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in CENTRALITY_NAMES}


CENTRALITY_NAMES: tuple[str, ...] = tuple(
    f.name for f in fields(CentralityVector) if f.name != "degenerate"
)


def centrality_table(
    d: Discussion,
    users: list[str],
    cutoff: float = math.inf,
    options: GraphOptions | None = None,
    graph: ReplyGraph | None = None,
) -> dict[str, CentralityVector]:
    """All six centralities for several users off one snapshot graph."""
    g = graph if graph is not None else build_reply_graph(d, cutoff, options)
    node_set = set(g.nodes)
    for u in users:
        if u not in node_set:
            raise IneligibleUserError(
                f"user {u!r} has no activity before cutoff {cutoff} in {d.id!r}"
            )
    in_deg = g.in_degrees()
    out_deg = g.out_degrees()
    scores = hits(g)
    bc = betweenness(g)
    table = {}
    for u in users:
        table[u] = CentralityVector(
            in_degree=in_deg[u],
            out_degree=out_deg[u],
            degree_ratio=out_deg[u] / max(in_deg[u], 1.0),
            authority=scores.authority[u],
            hub=scores.hub[u],
            betweenness=bc[u],
            degenerate=scores.degenerate,
        )
    return table


def centrality_snapshot(
    d: Discussion, user: str, cutoff: float = math.inf, options: GraphOptions | None = None
) -> CentralityVector:
    """Convenience wrapper computing the full vector for a single user."""
    return centrality_table(d, [user], cutoff, options)[user]


def edge_list_lines(g: ReplyGraph) -> list[str]:
    """Tab-separated "from to weight" lines in deterministic order."""
    return [f"{u}\t{v}\t{w}" for (u, v), w in sorted(g.edges.items())]
