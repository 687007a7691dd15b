"""Threaded-discussion corpus ingestion, Δ-award detection, and pair matching.

The external format is UTF-8 line-delimited JSON with two record kinds:

    {"kind": "post", "id", "author", "created_utc", "title", "selftext"}
    {"kind": "comment", "id", "author", "parent_id", "post_id", "created_utc", "body"}

Parsing is tolerant: malformed lines and comments pointing at unknown posts
are counted in a skip report instead of aborting, and comments whose parent
was deleted are kept under a synthetic orphan root. Serialization back to
lines is canonical so that parse/serialize round-trips are exact.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Iterator

from .errors import DataError
from .textfeat import tokenize

MIN_POST_CHARS = 500

POST_FIELDS = ("id", "author", "created_utc", "title", "selftext")
COMMENT_FIELDS = ("id", "author", "parent_id", "post_id", "created_utc", "body")


@dataclass(frozen=True)
class Comment:
    id: str
    author: str
    parent_id: str  # empty string on the opening post itself
    post_id: str
    created_at: int
    body: str


@dataclass(frozen=True)
class Discussion:
    """One opening post plus its comment forest, ordered by (created_at, id)."""

    post: Comment
    title: str
    comments: tuple[Comment, ...]
    orphan_ids: frozenset[str] = frozenset()

    @property
    def id(self) -> str:
        return self.post.id

    @property
    def op_author(self) -> str:
        return self.post.author

    def op_text(self) -> str:
        return f"{self.title}\n\n{self.post.body}" if self.title else self.post.body

    def comment_map(self) -> dict[str, Comment]:
        return {c.id: c for c in self.comments}

    def parent_of(self, c: Comment, cmap: dict[str, Comment] | None = None) -> Comment | None:
        """Parent comment, the post, or None when the parent is unknown (orphan)."""
        if c.parent_id == self.post.id:
            return self.post
        cmap = cmap if cmap is not None else self.comment_map()
        return cmap.get(c.parent_id)

    def participants(self, cutoff: float = math.inf) -> set[str]:
        """Authors active strictly before the cutoff, including the OP once posted."""
        users = {c.author for c in self.comments if c.created_at < cutoff}
        if self.post.created_at < cutoff:
            users.add(self.op_author)
        return users


@dataclass(frozen=True)
class DeltaAward:
    discussion_id: str
    awarder: str
    recipient: str
    awarded_comment_id: str
    award_comment_id: str
    award_time: int
    from_op: bool


@dataclass(frozen=True)
class MatchedPair:
    discussion_id: str
    treated_user: str
    control_user: str
    cutoff_time: int
    match_similarity: float

    @property
    def pair_id(self) -> str:
        return f"{self.discussion_id}|{self.treated_user}|{self.cutoff_time}"


@dataclass
class IngestReport:
    """Skip/anomaly tallies from a parse run; serialized as the skip report."""

    total_lines: int = 0
    posts: int = 0
    comments: int = 0
    orphan_comments: int = 0
    skipped: dict[str, int] = field(default_factory=dict)

    def skip(self, reason: str) -> None:
        self.skipped[reason] = self.skipped.get(reason, 0) + 1

    @property
    def total_skipped(self) -> int:
        return sum(self.skipped.values())

    def as_dict(self) -> dict:
        return {
            "total_lines": self.total_lines,
            "posts": self.posts,
            "comments": self.comments,
            "orphan_comments": self.orphan_comments,
            "total_skipped": self.total_skipped,
            "skipped": dict(sorted(self.skipped.items())),
        }


@dataclass
class Corpus:
    discussions: list[Discussion]
    report: IngestReport

    def __iter__(self) -> Iterator[Discussion]:
        return iter(self.discussions)

    def __len__(self) -> int:
        return len(self.discussions)


def _coerce_time(value) -> int:
    return int(float(value))


def parse_corpus(lines: Iterable[str], validate_posts: bool = False) -> Corpus:
    """Parse line-delimited JSON into discussions.

    Malformed lines are tallied, never fatal. With ``validate_posts`` enabled,
    posts whose body is shorter than 500 characters are dropped (community
    rule), together with their comments.
    """
    report = IngestReport()
    posts: dict[str, dict] = {}
    comments_by_post: dict[str, dict[str, dict]] = {}

    for raw in lines:
        line = raw.strip()
        if not line:
            continue
        report.total_lines += 1
        try:
            obj = json.loads(line)
        except json.JSONDecodeError:
            report.skip("bad_json")
            continue
        if not isinstance(obj, dict):
            report.skip("bad_json")
            continue
        kind = obj.get("kind")
        if kind == "post":
            if any(f not in obj for f in POST_FIELDS):
                report.skip("post_missing_field")
                continue
            try:
                obj["created_utc"] = _coerce_time(obj["created_utc"])
            except (TypeError, ValueError):
                report.skip("post_bad_timestamp")
                continue
            if obj["id"] in posts:
                report.skip("duplicate_post_id")
                continue
            if validate_posts and len(obj["selftext"]) < MIN_POST_CHARS:
                report.skip("post_too_short")
                continue
            posts[obj["id"]] = obj
        elif kind == "comment":
            if any(f not in obj for f in COMMENT_FIELDS):
                report.skip("comment_missing_field")
                continue
            try:
                obj["created_utc"] = _coerce_time(obj["created_utc"])
            except (TypeError, ValueError):
                report.skip("comment_bad_timestamp")
                continue
            bucket = comments_by_post.setdefault(obj["post_id"], {})
            if obj["id"] in bucket:
                report.skip("duplicate_comment_id")
                continue
            bucket[obj["id"]] = obj
        else:
            report.skip("unknown_kind")

    discussions = []
    for post_id in sorted(posts):
        p = posts[post_id]
        post = Comment(
            id=p["id"], author=p["author"], parent_id="", post_id=p["id"],
            created_at=p["created_utc"], body=p["selftext"],
        )
        raw_comments = comments_by_post.pop(post_id, {})
        known_ids = set(raw_comments) | {post_id}
        orphans = set()
        comments = []
        for c in raw_comments.values():
            if c["parent_id"] not in known_ids:
                orphans.add(c["id"])
                report.orphan_comments += 1
            comments.append(
                Comment(
                    id=c["id"], author=c["author"], parent_id=c["parent_id"],
                    post_id=post_id, created_at=c["created_utc"], body=c["body"],
                )
            )
        comments.sort(key=lambda c: (c.created_at, c.id))
        discussions.append(
            Discussion(post=post, title=p["title"], comments=tuple(comments),
                       orphan_ids=frozenset(orphans))
        )
        report.posts += 1
        report.comments += len(comments)

    for stranded in comments_by_post.values():
        for _ in stranded:
            report.skip("comment_unknown_post")

    return Corpus(discussions=discussions, report=report)


def discussion_to_lines(d: Discussion) -> list[str]:
    """Canonical line-delimited JSON for one discussion (post first)."""
    lines = [
        json.dumps(
            {"kind": "post", "id": d.post.id, "author": d.post.author,
             "created_utc": d.post.created_at, "title": d.title, "selftext": d.post.body},
            ensure_ascii=False, sort_keys=True, separators=(",", ":"),
        )
    ]
    for c in d.comments:
        lines.append(
            json.dumps(
                {"kind": "comment", "id": c.id, "author": c.author, "parent_id": c.parent_id,
                 "post_id": c.post_id, "created_utc": c.created_at, "body": c.body},
                ensure_ascii=False, sort_keys=True, separators=(",", ":"),
            )
        )
    return lines


def corpus_to_lines(corpus: Corpus) -> list[str]:
    lines = []
    for d in corpus.discussions:
        lines.extend(discussion_to_lines(d))
    return lines


# ---------------------------------------------------------------------------
# Δ-award detection
# ---------------------------------------------------------------------------

DEFAULT_DELTA_MARKERS = ("∆", "Δ", "!delta")


@dataclass(frozen=True)
class DeltaRules:
    """Configurable award-marker patterns; quoted lines are stripped first."""

    markers: tuple[str, ...] = DEFAULT_DELTA_MARKERS
    strip_quoted_lines: bool = True


@lru_cache(maxsize=32)
def _marker_pattern(markers: tuple[str, ...]) -> re.Pattern:
    parts = []
    for m in markers:
        if m and not m[0].isalnum() and len(m) > 1:
            # token markers like "!delta" match as standalone tokens
            parts.append(re.escape(m) + r"(?![\w])")
        else:
            parts.append(re.escape(m))
    return re.compile("|".join(parts), re.IGNORECASE)


def body_has_delta(body: str, rules: DeltaRules) -> bool:
    if rules.strip_quoted_lines:
        body = "\n".join(
            line for line in body.splitlines() if not line.lstrip().startswith(">")
        )
    return bool(_marker_pattern(rules.markers).search(body))


def detect_deltas(d: Discussion, rules: DeltaRules | None = None) -> list[DeltaAward]:
    """One award per reply whose body carries a Δ marker.

    The recipient is the author of the parent comment (the OP when the reply
    targets the post directly). Self-awards are dropped, as are replies whose
    timestamp precedes the awarded comment's (clock skew would otherwise break
    the award-after-argument ordering).
    """
    rules = rules or DeltaRules()
    cmap = d.comment_map()
    awards = []
    for c in d.comments:
        if not body_has_delta(c.body, rules):
            continue
        parent = d.parent_of(c, cmap)
        if parent is None:
            continue
        if parent.author == c.author:
            continue
        if c.created_at < parent.created_at:
            continue
        awards.append(
            DeltaAward(
                discussion_id=d.id,
                awarder=c.author,
                recipient=parent.author,
                awarded_comment_id=parent.id,
                award_comment_id=c.id,
                award_time=c.created_at,
                from_op=c.author == d.op_author,
            )
        )
    return awards


# ---------------------------------------------------------------------------
# Matched pairs
# ---------------------------------------------------------------------------


@dataclass
class MatchOutcome:
    pairs: list[MatchedPair]
    dropped_awards: int = 0


def _user_vocabulary(d: Discussion, user: str, cutoff: float) -> set[str]:
    tokens: set[str] = set()
    for c in d.comments:
        if c.author == user and c.created_at < cutoff:
            tokens.update(tokenize(c.body).tokens)
    return tokens


def match_challengers(d: Discussion, awards: Iterable[DeltaAward]) -> MatchOutcome:
    """Pair each OP-awarded challenger with its most lexically similar control.

    ``awards`` should be the discussion's full award list (OP and challenger
    awards alike): OP awards define the treated side, and any recipient is
    barred from the control pool. Controls must have commented at least once
    strictly before the cutoff; similarity is the Jaccard overlap of the two
    users' pre-cutoff vocabularies. Ties break on earliest first-comment
    time, then user id, so the pairing is deterministic. Awards with no
    eligible control are dropped and counted.
    """
    awards = list(awards)
    op_awards = [a for a in awards if a.from_op]
    for a in awards:
        if a.discussion_id != d.id:
            raise DataError(f"award for discussion {a.discussion_id!r} passed to {d.id!r}")
    awarded_ever = {a.recipient for a in awards}

    first_comment: dict[str, int] = {}
    for c in d.comments:
        if c.author not in first_comment or c.created_at < first_comment[c.author]:
            first_comment[c.author] = c.created_at

    outcome = MatchOutcome(pairs=[])
    vocab_cache: dict[tuple[str, int], set[str]] = {}

    def vocab(user: str, cutoff: int) -> set[str]:
        key = (user, cutoff)
        if key not in vocab_cache:
            vocab_cache[key] = _user_vocabulary(d, user, cutoff)
        return vocab_cache[key]

    seen_pairs: set[tuple[str, int]] = set()
    for award in sorted(op_awards, key=lambda a: (a.award_time, a.award_comment_id)):
        cutoff = award.award_time
        treated = award.recipient
        if (treated, cutoff) in seen_pairs:
            continue
        seen_pairs.add((treated, cutoff))
        if not any(c.author == treated and c.created_at < cutoff for c in d.comments):
            outcome.dropped_awards += 1
            continue
        candidates = sorted(
            (
                u
                for u in d.participants(cutoff)
                if u not in awarded_ever and u != d.op_author and u != treated
                and u in first_comment and first_comment[u] < cutoff
            ),
            key=lambda u: (first_comment[u], u),
        )
        if not candidates:
            outcome.dropped_awards += 1
            continue
        treated_vocab = vocab(treated, cutoff)
        best_user = None
        best_sim = -1.0
        for u in candidates:
            cand_vocab = vocab(u, cutoff)
            union = treated_vocab | cand_vocab
            sim = len(treated_vocab & cand_vocab) / len(union) if union else 0.0
            if sim > best_sim:
                best_user, best_sim = u, sim
        outcome.pairs.append(
            MatchedPair(
                discussion_id=d.id,
                treated_user=treated,
                control_user=best_user,
                cutoff_time=cutoff,
                match_similarity=best_sim,
            )
        )
    return outcome


# ---------------------------------------------------------------------------
# Corpus summary
# ---------------------------------------------------------------------------


@dataclass
class CorpusSummary:
    n_posts: int
    n_comments: int
    n_challengers: int
    n_posts_with_op_delta: int
    frac_posts_with_op_delta: float
    mean_replies_before_first_delta: float
    sd_replies_before_first_delta: float
    mean_replies_after_first_delta: float
    sd_replies_after_first_delta: float
    n_op_awards: int
    n_challenger_awards: int

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def _mean_sd(values: list[int]) -> tuple[float, float]:
    if not values:
        return (0.0, 0.0)
    n = len(values)
    mean = sum(values) / n
    if n == 1:
        return (mean, 0.0)
    var = sum((v - mean) ** 2 for v in values) / (n - 1)
    return (mean, math.sqrt(var))


def corpus_stats(corpus: Corpus, rules: DeltaRules | None = None) -> CorpusSummary:
    """Headline corpus counts plus reply volume around the first OP award."""
    rules = rules or DeltaRules()
    challengers: set[str] = set()
    n_comments = 0
    n_with_delta = 0
    n_op_awards = 0
    n_challenger_awards = 0
    before: list[int] = []
    after: list[int] = []

    for d in corpus.discussions:
        n_comments += len(d.comments)
        challengers.update(c.author for c in d.comments if c.author != d.op_author)
        awards = detect_deltas(d, rules)
        op_awards = [a for a in awards if a.from_op]
        n_op_awards += len(op_awards)
        n_challenger_awards += len(awards) - len(op_awards)
        if op_awards:
            n_with_delta += 1
            t_first = min(a.award_time for a in op_awards)
            first_ids = {a.award_comment_id for a in op_awards if a.award_time == t_first}
            before.append(
                sum(1 for c in d.comments if c.created_at < t_first and c.id not in first_ids)
            )
            after.append(
                sum(1 for c in d.comments if c.created_at >= t_first and c.id not in first_ids)
            )

    mean_before, sd_before = _mean_sd(before)
    mean_after, sd_after = _mean_sd(after)
    n_posts = len(corpus.discussions)
    return CorpusSummary(
        n_posts=n_posts,
        n_comments=n_comments,
        n_challengers=len(challengers),
        n_posts_with_op_delta=n_with_delta,
        frac_posts_with_op_delta=(n_with_delta / n_posts) if n_posts else 0.0,
        mean_replies_before_first_delta=mean_before,
        sd_replies_before_first_delta=sd_before,
        mean_replies_after_first_delta=mean_after,
        sd_replies_after_first_delta=sd_after,
        n_op_awards=n_op_awards,
        n_challenger_awards=n_challenger_awards,
    )
