"""Language features for a challenger's pre-cutoff text.

Everything here is a pure function over immutable inputs: tokenization,
entropy, a coarse rule-based part-of-speech tagger, Flesch-Kincaid
readability, vocabulary-overlap measures, and the full per-user feature
vector. Lexicons are plain text files (one lowercase entry per line,
"#" comments, multiword phrases allowed) bundled with the package and
replaceable via configuration.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass, fields
from importlib import resources
from pathlib import Path
from typing import Iterable, TYPE_CHECKING

from .errors import DataError, IneligibleUserError

if TYPE_CHECKING:  # pragma: no cover
    from .corpus import Discussion

URL_RE = re.compile(r"https?://\S+|www\.\S+", re.IGNORECASE)
WORD_RE = re.compile(r"[^\W_]+", re.UNICODE)
SENTENCE_SPLIT_RE = re.compile(r"[.!?…]+")
VOWEL_GROUP_RE = re.compile(r"[aeiouy]+")
SILENT_E_RE = re.compile(r"[^aeiouy]e$")

URL_TOKEN = "URL"
QUESTION_CHARS = "?"
# Straight apostrophes are deliberately excluded: they are mostly contractions.
QUOTE_CHARS = "\"“”‘’«»"


@dataclass(frozen=True)
class TokenSeq:
    """Tokenized text plus the punctuation tallies the features need."""

    tokens: tuple[str, ...]
    punctuation_counts: dict[str, int]
    sentence_count: int

    @property
    def n_urls(self) -> int:
        return sum(1 for t in self.tokens if t == URL_TOKEN)


def tokenize(text: str) -> TokenSeq:
    """Lowercased Unicode word tokens; URLs become single URL tokens.

    Question and quotation marks are counted on the URL-stripped text so
    punctuation inside links does not leak into the counts. Sentences are
    maximal runs between ``.!?…`` terminators that contain a word; any
    nonempty token sequence yields at least one sentence.
    """
    tokens: list[str] = []
    pos = 0
    for m in URL_RE.finditer(text):
        tokens.extend(w.lower() for w in WORD_RE.findall(text[pos : m.start()]))
        tokens.append(URL_TOKEN)
        pos = m.end()
    tokens.extend(w.lower() for w in WORD_RE.findall(text[pos:]))

    stripped = URL_RE.sub(" ", text)
    sentences = sum(1 for seg in SENTENCE_SPLIT_RE.split(stripped) if WORD_RE.search(seg))
    if tokens and sentences == 0:
        sentences = 1

    punct = {
        "question_mark": sum(stripped.count(c) for c in QUESTION_CHARS),
        "quotation_mark": sum(stripped.count(c) for c in QUOTE_CHARS),
    }
    return TokenSeq(tokens=tuple(tokens), punctuation_counts=punct, sentence_count=sentences)


def shannon_entropy(items: Iterable) -> float:
    """Shannon entropy in bits of the label frequency distribution.

    Summation runs over sorted counts so the result is bit-identical for any
    permutation of the input multiset.
    """
    counts = Counter(items)
    total = sum(counts.values())
    if total == 0:
        return 0.0
    return -sum((c / total) * math.log2(c / total) for c in sorted(counts.values()))


def count_syllables(word: str) -> int:
    """Vowel-group syllable count with a silent-e rule, minimum 1."""
    w = word.lower()
    n = len(VOWEL_GROUP_RE.findall(w))
    if n > 1 and SILENT_E_RE.search(w) and not w.endswith("le"):
        n -= 1
    return max(1, n)


def flesch_kincaid(text: str) -> tuple[float, float]:
    """(grade level, reading ease) for a text; (nan, nan) when it has no words."""
    ts = tokenize(text)
    return _flesch_kincaid_from_tokens(ts)


def _flesch_kincaid_from_tokens(ts: TokenSeq) -> tuple[float, float]:
    words = len(ts.tokens)
    if words == 0:
        return (float("nan"), float("nan"))
    sentences = max(1, ts.sentence_count)
    syllables = sum(count_syllables(t) for t in ts.tokens)
    wps = words / sentences
    spw = syllables / words
    grade = 0.39 * wps + 11.8 * spw - 15.59
    ease = 206.835 - 1.015 * wps - 84.6 * spw
    return (grade, ease)


def interplay_features(a: set[str], o: set[str]) -> tuple[int, float, float, float]:
    """Overlap of an argument's token set A with the original post's set O.

    Returns (common word count, |A∩O|/|A|, |A∩O|/|O|, |A∩O|/|A∪O|) with
    zero in place of any undefined ratio.
    """
    common = len(a & o)
    union = len(a | o)
    reply_fraction = common / len(a) if a else 0.0
    op_fraction = common / len(o) if o else 0.0
    jaccard = common / union if union else 0.0
    return (common, reply_fraction, op_fraction, jaccard)


# ---------------------------------------------------------------------------
# Lexicons
# ---------------------------------------------------------------------------

Phrase = tuple[str, ...]

_LEXICON_FILES = {
    "positive": "positive.txt",
    "negative": "negative.txt",
    "hedges": "hedges.txt",
    "examples": "examples.txt",
    "first_person": "first_person.txt",
    "first_person_plural": "first_person_plural.txt",
    "definite_articles": "definite_articles.txt",
    "indefinite_articles": "indefinite_articles.txt",
}
_TAGGER_FILES = {
    "pronouns": "pos_pronouns.txt",
    "determiners": "pos_determiners.txt",
    "prepositions": "pos_prepositions.txt",
    "conjunctions": "pos_conjunctions.txt",
    "auxiliaries": "pos_auxiliaries.txt",
    "verbs": "pos_verbs.txt",
}


def parse_lexicon_text(text: str) -> tuple[Phrase, ...]:
    """One entry per line; '#' starts a comment; entries tokenize to phrases."""
    phrases = []
    for line in text.splitlines():
        entry = line.split("#", 1)[0].strip().lower()
        if not entry:
            continue
        toks = tuple(w.lower() for w in WORD_RE.findall(entry))
        if toks:
            phrases.append(toks)
    return tuple(dict.fromkeys(phrases))


@dataclass(frozen=True)
class LexiconSet:
    """All configurable word lists used by the feature extractor and tagger."""

    positive: tuple[Phrase, ...]
    negative: tuple[Phrase, ...]
    hedges: tuple[Phrase, ...]
    examples: tuple[Phrase, ...]
    first_person: tuple[Phrase, ...]
    first_person_plural: tuple[Phrase, ...]
    definite_articles: tuple[Phrase, ...]
    indefinite_articles: tuple[Phrase, ...]
    pronouns: frozenset[str]
    determiners: frozenset[str]
    prepositions: frozenset[str]
    conjunctions: frozenset[str]
    auxiliaries: frozenset[str]
    verbs: frozenset[str]

    @classmethod
    def from_texts(cls, texts: dict[str, str]) -> "LexiconSet":
        missing = (set(_LEXICON_FILES) | set(_TAGGER_FILES)) - set(texts)
        if missing:
            raise DataError(f"missing lexicon files: {sorted(missing)}")
        kwargs: dict = {name: parse_lexicon_text(texts[name]) for name in _LEXICON_FILES}
        for name in _TAGGER_FILES:
            words = frozenset(w for phrase in parse_lexicon_text(texts[name]) for w in phrase)
            kwargs[name] = words
        return cls(**kwargs)

    @classmethod
    def from_dir(cls, directory: str | Path) -> "LexiconSet":
        directory = Path(directory)
        texts = {}
        for name, fname in {**_LEXICON_FILES, **_TAGGER_FILES}.items():
            path = directory / fname
            if not path.is_file():
                raise DataError(f"lexicon file not found: {path}")
            texts[name] = path.read_text(encoding="utf-8")
        return cls.from_texts(texts)

    @classmethod
    def bundled(cls) -> "LexiconSet":
        root = resources.files("deltanet") / "lexicons"
        texts = {
            name: (root / fname).read_text(encoding="utf-8")
            for name, fname in {**_LEXICON_FILES, **_TAGGER_FILES}.items()
        }
        return cls.from_texts(texts)


_BUNDLED: LexiconSet | None = None


def default_lexicons() -> LexiconSet:
    global _BUNDLED
    if _BUNDLED is None:
        _BUNDLED = LexiconSet.bundled()
    return _BUNDLED


def count_phrases(tokens: tuple[str, ...], phrases: tuple[Phrase, ...]) -> int:
    """Total non-overlapping occurrences of each phrase in the token sequence."""
    unigrams = {p[0] for p in phrases if len(p) == 1}
    multi = [p for p in phrases if len(p) > 1]
    total = 0
    if unigrams:
        total += sum(1 for t in tokens if t in unigrams)
    for phrase in multi:
        k = len(phrase)
        i = 0
        while i <= len(tokens) - k:
            if tokens[i : i + k] == phrase:
                total += 1
                i += k
            else:
                i += 1
    return total


# ---------------------------------------------------------------------------
# Coarse part-of-speech tagging
# ---------------------------------------------------------------------------

TAG_URL = "URL"
TAG_NUM = "NUM"
TAG_PRON = "PRON"
TAG_DET = "DET"
TAG_PREP = "PREP"
TAG_CONJ = "CONJ"
TAG_AUX = "VERB-AUX"
TAG_VERB = "VERB"
TAG_ADV = "ADV"
TAG_NOUN = "NOUN"


def coarse_pos_tags(ts: TokenSeq, lexicons: LexiconSet | None = None) -> list[str]:
    """Deterministic coarse tags from closed-class lists plus suffix rules."""
    lex = lexicons or default_lexicons()
    tags = []
    for tok in ts.tokens:
        if tok == URL_TOKEN:
            tags.append(TAG_URL)
        elif tok.isdigit():
            tags.append(TAG_NUM)
        elif tok in lex.pronouns:
            tags.append(TAG_PRON)
        elif tok in lex.determiners:
            tags.append(TAG_DET)
        elif tok in lex.prepositions:
            tags.append(TAG_PREP)
        elif tok in lex.conjunctions:
            tags.append(TAG_CONJ)
        elif tok in lex.auxiliaries:
            tags.append(TAG_AUX)
        elif tok in lex.verbs:
            tags.append(TAG_VERB)
        elif tok.endswith("ly"):
            tags.append(TAG_ADV)
        elif tok.endswith(("ing", "ed")):
            tags.append(TAG_VERB)
        else:
            tags.append(TAG_NOUN)
    return tags


# ---------------------------------------------------------------------------
# Full language feature vector
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LanguageFeatureVector:
    n_words: int
    n_sentences: int
    n_positive: int
    n_negative: int
    n_examples: int
    n_hedges: int
    n_definite_articles: int
    n_indefinite_articles: int
    n_first_person: int
    n_first_person_plural: int
    n_question_marks: int
    n_quotation_marks: int
    n_urls: int
    word_entropy: float
    token_type_entropy: float
    fk_grade: float
    fk_ease: float
    n_common_words: int
    reply_fraction: float
    op_fraction: float
    jaccard: float

    def as_dict(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in LANGUAGE_FEATURES}


LANGUAGE_FEATURES: tuple[str, ...] = tuple(f.name for f in fields(LanguageFeatureVector))


def user_pre_cutoff_text(d: "Discussion", user: str, cutoff: float) -> str:
    """Concatenated bodies of the user's comments strictly before the cutoff.

    The opening post itself is never part of a user's argument text; it is
    the comparison target O of the overlap measures.
    """
    bodies = [c.body for c in d.comments if c.author == user and c.created_at < cutoff]
    if not bodies:
        raise IneligibleUserError(f"user {user!r} has no comments before cutoff {cutoff}")
    return "\n\n".join(bodies)


def extract_language_features(
    user: str,
    d: "Discussion",
    cutoff: float,
    lexicons: LexiconSet | None = None,
) -> LanguageFeatureVector:
    """All language features of the user's pre-cutoff text within a discussion.

    Counts are case-insensitive token/phrase matches; overlap measures compare
    the user's token set with the original post's (title plus body). Every
    field is additive over comment order, so concatenation order is irrelevant.
    """
    lex = lexicons or default_lexicons()
    text = user_pre_cutoff_text(d, user, cutoff)
    ts = tokenize(text)
    tags = coarse_pos_tags(ts, lex)
    grade, ease = _flesch_kincaid_from_tokens(ts)
    op_tokens = set(tokenize(d.op_text()).tokens)
    common, reply_frac, op_frac, jac = interplay_features(set(ts.tokens), op_tokens)
    return LanguageFeatureVector(
        n_words=len(ts.tokens),
        n_sentences=ts.sentence_count,
        n_positive=count_phrases(ts.tokens, lex.positive),
        n_negative=count_phrases(ts.tokens, lex.negative),
        n_examples=count_phrases(ts.tokens, lex.examples),
        n_hedges=count_phrases(ts.tokens, lex.hedges),
        n_definite_articles=count_phrases(ts.tokens, lex.definite_articles),
        n_indefinite_articles=count_phrases(ts.tokens, lex.indefinite_articles),
        n_first_person=count_phrases(ts.tokens, lex.first_person),
        n_first_person_plural=count_phrases(ts.tokens, lex.first_person_plural),
        n_question_marks=ts.punctuation_counts["question_mark"],
        n_quotation_marks=ts.punctuation_counts["quotation_mark"],
        n_urls=ts.n_urls,
        word_entropy=shannon_entropy(ts.tokens),
        token_type_entropy=shannon_entropy(tags),
        fk_grade=grade,
        fk_ease=ease,
        n_common_words=common,
        reply_fraction=reply_frac,
        op_fraction=op_frac,
        jaccard=jac,
    )
