"""Synthetic corpora, panels, and labeled feature sets with known ground truth.

Discussions grow by preferential attachment: each new comment replies to the
post or an earlier comment with probability proportional to
(1 + replies already received by the target's author) ** strength, so
strength 0 is uniform attachment and larger values concentrate replies.
Award markers are injected per discussion, either on a random challenger or
on the challenger with the highest current degree ratio, which plants a
network signal in the persuasion labels. Every generator is a pure function
of its parameters; the same seed reproduces identical bytes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .corpus import Comment, Corpus, Discussion, IngestReport
from .did import PanelObservation
from .errors import DataError
from .learners import LabeledDataset

DELTA_MODES = ("random", "degree_ratio")

_MARKERS = ("∆", "Δ", "!delta")


@dataclass(frozen=True)
class SynthParams:
    n_discussions: int = 20
    comments_per_discussion: int = 30
    reply_preferential_strength: float = 1.0
    delta_probability: float = 0.85
    delta_mode: str = "random"
    second_delta_probability: float = 0.25
    op_reply_probability: float = 0.1
    op_vocab_size: int = 120
    op_overlap: float = 0.35
    body_words_low: int = 20
    body_words_high: int = 50
    planted_effects: dict[str, float] = field(default_factory=dict)
    noise_sd: float = 0.0
    baseline_beta: tuple[float, float, float] = (1.0, 0.5, 0.3)
    n_pairs: int = 500
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.delta_probability <= 1.0:
            raise DataError("delta_probability must be in [0, 1]")
        if not 0.0 <= self.op_overlap <= 1.0:
            raise DataError("op_overlap must be in [0, 1]")
        if self.reply_preferential_strength < 0:
            raise DataError("reply_preferential_strength must be >= 0")
        if self.delta_mode not in DELTA_MODES:
            raise DataError(f"delta_mode must be one of {DELTA_MODES}")
        if self.comments_per_discussion < 5:
            raise DataError("comments_per_discussion must be at least 5")


def _load_vocabulary() -> tuple[str, ...]:
    text = (resources.files("deltanet") / "lexicons" / "synth_vocabulary.txt").read_text(
        encoding="utf-8"
    )
    words = [w.strip() for w in text.splitlines() if w.strip() and not w.startswith("#")]
    return tuple(words)


_VOCAB: tuple[str, ...] | None = None


def _vocab() -> tuple[str, ...]:
    global _VOCAB
    if _VOCAB is None:
        _VOCAB = _load_vocabulary()
    return _VOCAB


def _sentences(words: list[str]) -> str:
    chunks = [" ".join(words[i : i + 10]) for i in range(0, len(words), 10)]
    return ". ".join(chunks) + "."


def _body_words(rng, n, op_vocab, overlap):
    vocab = _vocab()
    words = []
    for _ in range(n):
        if rng.random() < overlap:
            words.append(op_vocab[rng.integers(len(op_vocab))])
        else:
            words.append(vocab[rng.integers(len(vocab))])
    return words


def _gen_discussion(index: int, params: SynthParams, seed_seq) -> tuple[Discussion, list[dict]]:
    rng = np.random.default_rng(seed_seq)
    m = params.comments_per_discussion
    op = f"d{index:03d}_op"
    n_challengers = max(4, min(12, m // 3))
    challengers = [f"d{index:03d}_u{j:02d}" for j in range(n_challengers)]
    post_id = f"p{index:05d}"
    t0 = 1_500_000_000 + index * 1_000_000

    op_vocab = [_vocab()[i] for i in rng.choice(len(_vocab()), size=params.op_vocab_size, replace=False)]
    title = " ".join(op_vocab[i % len(op_vocab)] for i in range(8))
    body_words = []
    while sum(len(w) + 1 for w in body_words) < 520:
        body_words.append(op_vocab[rng.integers(len(op_vocab))])
    post = Comment(id=post_id, author=op, parent_id="", post_id=post_id,
                   created_at=t0, body=_sentences(body_words))

    award_steps: set[int] = set()
    if rng.random() < params.delta_probability:
        n_awards = 1 + (1 if rng.random() < params.second_delta_probability else 0)
        lo = max(2, m // 2)
        pool = np.arange(lo, m)
        n_awards = min(n_awards, len(pool))
        award_steps = set(int(s) for s in rng.choice(pool, size=n_awards, replace=False))

    comments: list[Comment] = []
    in_rep: dict[str, int] = {op: 0, **{u: 0 for u in challengers}}
    out_rep: dict[str, int] = {op: 0, **{u: 0 for u in challengers}}
    first_step: dict[str, int] = {}
    awarded: set[str] = set()
    truth: list[dict] = []

    def pick_parent(rng) -> Comment:
        candidates = [post] + comments
        strength = params.reply_preferential_strength
        weights = np.array([(1.0 + in_rep[c.author]) ** strength for c in candidates])
        probs = weights / weights.sum()
        return candidates[int(rng.choice(len(candidates), p=probs))]

    for k in range(m):
        t = t0 + (k + 1) * 60
        cid = f"{post_id}c{k:04d}"
        commented = [u for u in challengers if u in first_step]
        eligible = [u for u in commented if u not in awarded]

        if k in award_steps and len(eligible) >= 2:
            # OP award: needs a recipient plus at least one remaining control
            if params.delta_mode == "degree_ratio":
                recipient = max(
                    eligible,
                    key=lambda u: (out_rep[u] / max(in_rep[u], 1), -first_step[u], u),
                )
            else:
                recipient = eligible[int(rng.integers(len(eligible)))]
            target = max(
                (c for c in comments if c.author == recipient),
                key=lambda c: (c.created_at, c.id),
            )
            marker = _MARKERS[int(rng.integers(len(_MARKERS)))]
            words = _body_words(rng, int(rng.integers(8, 16)), op_vocab, params.op_overlap)
            comments.append(
                Comment(id=cid, author=op, parent_id=target.id, post_id=post_id,
                        created_at=t, body=f"{marker} {_sentences(words)}")
            )
            in_rep[recipient] += 1
            out_rep[op] += 1
            awarded.add(recipient)
            truth.append(
                {"discussion_id": post_id, "recipient": recipient, "award_comment_id": cid,
                 "awarded_comment_id": target.id, "award_time": t, "mode": params.delta_mode}
            )
            continue

        if comments and rng.random() < params.op_reply_probability:
            author = op
        else:
            author = challengers[int(rng.integers(n_challengers))]
        parent = pick_parent(rng)
        n_words = int(rng.integers(params.body_words_low, params.body_words_high + 1))
        words = _body_words(rng, n_words, op_vocab, params.op_overlap)
        comments.append(
            Comment(id=cid, author=author, parent_id=parent.id, post_id=post_id,
                    created_at=t, body=_sentences(words))
        )
        if parent.author != author:
            in_rep[parent.author] += 1
            out_rep[author] += 1
        if author != op and author not in first_step:
            first_step[author] = k

    discussion = Discussion(post=post, title=title, comments=tuple(comments))
    return discussion, truth


def gen_corpus(params: SynthParams) -> tuple[Corpus, dict]:
    """Corpus plus a ground-truth sidecar describing every injected award."""
    master = np.random.SeedSequence([params.seed, 0x5E5])
    children = master.spawn(params.n_discussions)
    discussions = []
    awards = []
    for i in range(params.n_discussions):
        d, truth = _gen_discussion(i, params, children[i])
        discussions.append(d)
        awards.extend(truth)
    report = IngestReport(
        total_lines=sum(1 + len(d.comments) for d in discussions),
        posts=len(discussions),
        comments=sum(len(d.comments) for d in discussions),
    )
    ground_truth = {
        "n_discussions": params.n_discussions,
        "comments_per_discussion": params.comments_per_discussion,
        "delta_mode": params.delta_mode,
        "seed": params.seed,
        "awards": awards,
    }
    return Corpus(discussions=discussions, report=report), ground_truth


@dataclass
class PanelTruth:
    observations: list[PanelObservation]
    beta: tuple[float, float, float, float]


def gen_did_panel(params: SynthParams) -> dict[str, PanelTruth]:
    """Balanced 2x2 panels with planted interaction effects, one per centrality."""
    if not params.planted_effects:
        raise DataError("planted_effects is empty; nothing to generate")
    out: dict[str, PanelTruth] = {}
    b0, b1, b2 = params.baseline_beta
    for idx, name in enumerate(sorted(params.planted_effects)):
        b3 = params.planted_effects[name]
        rng = np.random.default_rng(np.random.SeedSequence([params.seed, 0xD1D, idx]))
        observations = []
        for j in range(params.n_pairs):
            pid = f"synth{j:05d}"
            for g in (1, 0):
                user = f"{pid}_{'t' if g else 'c'}"
                for t in (0, 1):
                    y = b0 + b1 * t + b2 * g + b3 * t * g
                    if params.noise_sd > 0:
                        y += rng.normal(0.0, params.noise_sd)
                    observations.append(
                        PanelObservation(pair_id=pid, user=user, G=g, T=t, y=float(y),
                                         centrality_name=name, variant="main")
                    )
        out[name] = PanelTruth(observations=observations, beta=(b0, b1, b2, b3))
    return out


def gen_labeled_dataset(
    n_pairs: int,
    n_features: int = 6,
    n_informative: int = 2,
    separation: float = 2.0,
    seed: int = 0,
    feature_prefix: str = "f",
) -> LabeledDataset:
    """Matched-pair rows where informative columns shift by +-separation/2."""
    if n_informative > n_features:
        raise DataError("n_informative cannot exceed n_features")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x1AB]))
    names = tuple(f"{feature_prefix}{j}" for j in range(n_features))
    pair_ids = []
    users = []
    X = np.empty((2 * n_pairs, n_features))
    y = np.empty(2 * n_pairs, dtype=int)
    for j in range(n_pairs):
        pid = f"pair{j:05d}"
        base = rng.normal(0.0, 1.0, size=(2, n_features))
        base[0, :n_informative] += separation / 2.0
        base[1, :n_informative] -= separation / 2.0
        X[2 * j] = base[0]
        X[2 * j + 1] = base[1]
        y[2 * j] = 1
        y[2 * j + 1] = 0
        pair_ids.extend([pid, pid])
        users.extend([f"{pid}_t", f"{pid}_c"])
    return LabeledDataset(feature_names=names, pair_ids=tuple(pair_ids),
                          users=tuple(users), X=X, y=y)


def permute_pair_labels(data: LabeledDataset, seed: int = 0) -> LabeledDataset:
    """Break the feature-label link by re-flipping each pair's labels at random."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x9E9]))
    rows_by_pair: dict[str, list[int]] = {}
    for i, pid in enumerate(data.pair_ids):
        rows_by_pair.setdefault(pid, []).append(i)
    y = data.y.copy()
    for pid in sorted(rows_by_pair):
        if rng.random() < 0.5:
            rows = rows_by_pair[pid]
            y[rows] = 1 - y[rows]
    return LabeledDataset(feature_names=data.feature_names, pair_ids=data.pair_ids,
                          users=data.users, X=data.X.copy(), y=y)
