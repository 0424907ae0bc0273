"""Trait scoring from review text via a category lexicon and weight table.

A lexicon file has one category per line: ``category_name: word1 word2 word3*``
(a trailing ``*`` matches any completion). A weights file holds whitespace
separated ``trait category weight`` triples. Trait scores are linear:
score(trait) = sum over that trait's categories of weight * category
proportion of the user's tokens.

The proprietary dictionary of the original tool is not shipped; a small demo
lexicon (20 categories with example words) and a 0/1 default weight table
stand in. Absolute scores are therefore not comparable to published outputs;
only relative and cluster behavior is meaningful.
"""

from __future__ import annotations

import collections
import csv
import re
from dataclasses import dataclass

import numpy as np

TRAIT_ORDER = ["O", "C", "E", "A", "N"]

_TOKEN_RE = re.compile(r"[a-z0-9]+")


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


# ---------------------------------------------------------------------------
# Lexicon and weight parsing

DEMO_LEXICON_TEXT = """\
anger: hate kill pissed
metaphysical_issues: god heaven coffin
friends: buddy friend neighbour
family_members: mom brother cousin
past_tense_verbs: walked were had
references_to_friends: pal buddy coworker
positive_emotions: love nice sweet
negative_emotions: hurt ugly nasty
sadness: crying grief sad
prepositions: to with above
family: daughter husband
humans: adult baby boy
physical_state: ache breast sleep
cognitive_process: cause know ought
tentative: maybe perhaps guess
insight: think consider
social_processes: talk us friend
achievement: hero win earn
inclusive_words: with and include
motion: arrive car go
"""

# 0/1 default weights: each trait gets weight 1 on the demo-lexicon categories
# associated with it; everything else is 0 and omitted.
DEMO_WEIGHTS_TEXT = """\
O achievement 1
O anger 1
O family 1
O friends 1
O motion 1
C anger 1
C prepositions 1
C negative_emotions 1
E friends 1
E positive_emotions 1
E family 1
A anger 1
A negative_emotions 1
A positive_emotions 1
A family 1
A motion 1
A achievement 1
N anger 1
N family 1
N friends 1
N negative_emotions 1
N prepositions 1
"""


def parse_lexicon_text(text: str) -> dict[str, list[str]]:
    lexicon: dict[str, list[str]] = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if ":" not in line:
            raise ValueError(f"lexicon line {line_no}: expected 'category: words'")
        name, _, words_part = line.partition(":")
        name = name.strip()
        words = words_part.split()
        if not name:
            raise ValueError(f"lexicon line {line_no}: empty category name")
        if name in lexicon:
            raise ValueError(f"lexicon line {line_no}: duplicate category {name!r}")
        if not words:
            raise ValueError(f"lexicon line {line_no}: category {name!r} has no words")
        lexicon[name] = words
    return lexicon


def load_lexicon(path) -> dict[str, list[str]]:
    with open(path, encoding="utf-8") as fh:
        return parse_lexicon_text(fh.read())


def parse_weights_text(text: str) -> dict[str, list[tuple[str, float]]]:
    weights: dict[str, list[tuple[str, float]]] = {t: [] for t in TRAIT_ORDER}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 3:
            raise ValueError(f"weights line {line_no}: expected 'trait category weight'")
        trait, category, weight = parts
        if trait not in TRAIT_ORDER:
            raise ValueError(f"weights line {line_no}: unknown trait {trait!r}")
        weights[trait].append((category, float(weight)))
    return weights


def load_weights(path) -> dict[str, list[tuple[str, float]]]:
    with open(path, encoding="utf-8") as fh:
        return parse_weights_text(fh.read())


DEMO_LEXICON = parse_lexicon_text(DEMO_LEXICON_TEXT)
DEMO_WEIGHTS = parse_weights_text(DEMO_WEIGHTS_TEXT)


# ---------------------------------------------------------------------------
# Scoring


def categorize(text: str, lexicon: dict[str, list[str]]) -> dict[str, float]:
    """Per-category proportion of tokens matching that category's words."""
    tokens = tokenize(text)
    if not tokens:
        return {cat: 0.0 for cat in lexicon}
    proportions = {}
    for cat, words in lexicon.items():
        exact = {w for w in words if not w.endswith("*")}
        stems = [w[:-1] for w in words if w.endswith("*")]
        matched = sum(
            1
            for tok in tokens
            if tok in exact or any(tok.startswith(s) for s in stems)
        )
        proportions[cat] = matched / len(tokens)
    return proportions


def trait_score(
    X: dict[str, float], weights: dict[str, list[tuple[str, float]]]
) -> dict[str, float]:
    """Linear combination of category proportions, one score per trait."""
    scores = {t: 0.0 for t in TRAIT_ORDER}
    for trait, pairs in weights.items():
        for category, w in pairs:
            if category not in X:
                raise ValueError(f"weights reference unknown category {category!r}")
            scores[trait] += w * X[category]
    return scores


@dataclass
class PersonalityProfile:
    user: str
    scores: dict[str, float]
    dominant: str


def dominant_trait(scores: dict[str, float]) -> str:
    best = max(scores[t] for t in TRAIT_ORDER)
    for t in TRAIT_ORDER:  # declared tie order
        if scores[t] == best:
            return t
    raise AssertionError("unreachable")


def profile_user(
    user: str,
    reviews: list[str],
    lexicon: dict[str, list[str]],
    weights: dict[str, list[tuple[str, float]]],
) -> PersonalityProfile | None:
    """Concatenate reviews, categorize, score. None when there is no text."""
    texts = [r for r in reviews if r and r.strip()]
    if not texts:
        return None
    X = categorize(" ".join(texts), lexicon)
    scores = trait_score(X, weights)
    return PersonalityProfile(user=user, scores=scores, dominant=dominant_trait(scores))


def profile_all(
    interactions,
    lexicon: dict[str, list[str]],
    weights: dict[str, list[tuple[str, float]]],
) -> dict[str, PersonalityProfile]:
    reviews: dict[str, list[str]] = collections.defaultdict(list)
    order: list[str] = []
    for e in interactions:
        if e.user not in reviews:
            order.append(e.user)
        if e.review:
            reviews[e.user].append(e.review)
        else:
            reviews.setdefault(e.user, [])
    profiles = {}
    for user in order:
        prof = profile_user(user, reviews[user], lexicon, weights)
        if prof is not None:
            profiles[user] = prof
    return profiles


# ---------------------------------------------------------------------------
# Similarity matrix over users


@dataclass
class SimilarityMatrix:
    users: list[str]
    matrix: np.ndarray  # symmetric binary, zero diagonal


def build_L(profiles: list[PersonalityProfile]) -> SimilarityMatrix:
    """L[j,k] = 1 iff users j and k share a dominant trait (j != k)."""
    if not profiles:
        raise ValueError("need at least one profile")
    n = len(profiles)
    L = np.zeros((n, n))
    for j in range(n):
        for k in range(n):
            if j != k and profiles[j].dominant == profiles[k].dominant:
                L[j, k] = 1.0
    return SimilarityMatrix(users=[p.user for p in profiles], matrix=L)


# ---------------------------------------------------------------------------
# Knowledge levels from helpfulness votes


@dataclass
class KnowledgeLevel:
    user: str
    domain: str
    kl: float
    kl_normalized: float
    defined: bool


def knowledge_levels(interactions, domain: str = "default") -> dict[str, KnowledgeLevel]:
    """Mean helpfulness votes per user, min-max normalized across users.

    Users with no reviewed interaction get kl 0, normalized 0, defined=False.
    A constant column (everyone equal, or a single reviewer) normalizes to 0.5.
    """
    votes: dict[str, list[int]] = collections.defaultdict(list)
    seen: list[str] = []
    for e in interactions:
        if e.user not in votes:
            seen.append(e.user)
            votes.setdefault(e.user, [])
        if e.review:
            votes[e.user].append(e.helpful or 0)
    raw = {u: (float(np.mean(v)) if v else None) for u, v in votes.items()}
    defined_vals = [v for v in raw.values() if v is not None]
    out = {}
    lo = min(defined_vals) if defined_vals else 0.0
    hi = max(defined_vals) if defined_vals else 0.0
    for u in seen:
        v = raw[u]
        if v is None:
            out[u] = KnowledgeLevel(u, domain, 0.0, 0.0, defined=False)
        elif hi == lo:
            out[u] = KnowledgeLevel(u, domain, v, 0.5, defined=True)
        else:
            out[u] = KnowledgeLevel(u, domain, v, (v - lo) / (hi - lo), defined=True)
    return out


# ---------------------------------------------------------------------------
# Profiles CSV


def profiles_to_csv(profiles: list[PersonalityProfile], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["user"] + TRAIT_ORDER + ["dominant"])
        for p in profiles:
            w.writerow([p.user] + [p.scores[t] for t in TRAIT_ORDER] + [p.dominant])


def profiles_from_csv(path) -> list[PersonalityProfile]:
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            scores = {t: float(row[t]) for t in TRAIT_ORDER}
            out.append(
                PersonalityProfile(user=row["user"], scores=scores, dominant=row["dominant"])
            )
    return out
