import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from deltanet.corpus import Comment, Discussion
from deltanet.synth import SynthParams, gen_corpus
from deltanet.textfeat import LexiconSet


def make_discussion(comments, op="op", post_id="p1", t0=1000, title="a view", body=None):
    """Build a Discussion from (id, author, parent_id, dt, body) tuples."""
    body = body if body is not None else "x" * 600
    post = Comment(id=post_id, author=op, parent_id="", post_id=post_id,
                   created_at=t0, body=body)
    built = tuple(
        sorted(
            (
                Comment(id=cid, author=author, parent_id=parent, post_id=post_id,
                        created_at=t0 + dt, body=text)
                for cid, author, parent, dt, text in comments
            ),
            key=lambda c: (c.created_at, c.id),
        )
    )
    known = {post_id} | {c.id for c in built}
    orphans = frozenset(c.id for c in built if c.parent_id not in known)
    return Discussion(post=post, title=title, comments=built, orphan_ids=orphans)


@pytest.fixture(scope="session")
def lexicons():
    return LexiconSet.bundled()


@pytest.fixture(scope="session")
def small_corpus():
    corpus, truth = gen_corpus(SynthParams(n_discussions=20, comments_per_discussion=30, seed=7))
    return corpus, truth
