"""Interaction logs, sessions, splits, negative sampling, synthetic corpora.

A session is everything one user did in one calendar day, ordered by
timestamp. Long-term context for session t is the deduplicated union of the
user's earlier sessions; short-term context is session t itself, order kept.
"""

from __future__ import annotations

import collections
import csv
import datetime
from dataclasses import dataclass, field

import numpy as np

SECONDS_PER_DAY = 86_400

ACTIONS = {"view", "click", "cart", "wishlist", "purchase", "checkin", "rate"}

CSV_COLUMNS = ["user", "item", "timestamp", "action", "rating", "review", "helpful"]


@dataclass(frozen=True)
class Interaction:
    user: str
    item: str
    timestamp: int
    action: str = "view"
    rating: float | None = None
    review: str | None = None
    helpful: int | None = None


@dataclass(frozen=True)
class RowError:
    line: int
    message: str


@dataclass
class Session:
    user: str
    t: int  # ordinal among this user's sessions, 0-based
    day: int  # epoch-day bucket
    items: list[str]


@dataclass
class TestInstance:
    user: str
    day: int
    t: int
    context: list[str]  # session items minus the held-out target, order kept
    target: str


@dataclass
class Split:
    train: list[Session]
    test: list[TestInstance]
    policy: str
    warnings: list[str] = field(default_factory=list)


def _parse_timestamp(text: str) -> int:
    s = text.strip()
    try:
        return int(s)
    except ValueError:
        pass
    try:
        dt = datetime.datetime.fromisoformat(s)
    except ValueError:
        raise ValueError(f"unparseable timestamp {text!r}")
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=datetime.timezone.utc)
    return int(dt.timestamp())


def ingest_csv(path, schema: dict[str, str] | None = None):
    """Parse a CSV of interactions.

    Returns (interactions, row_errors). Malformed rows become RowError
    records instead of being dropped silently. `schema` maps the logical
    column names (user, item, timestamp, action, rating, review, helpful)
    to the actual header names.
    """
    mapping = {c: c for c in CSV_COLUMNS}
    if schema:
        mapping.update(schema)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ValueError(f"{path}: empty file, no header")
        for logical in ("user", "item", "timestamp"):
            if mapping[logical] not in reader.fieldnames:
                raise ValueError(
                    f"{path}: required column {mapping[logical]!r} not in header"
                )
        rows: list[Interaction] = []
        errors: list[RowError] = []
        for line_no, row in enumerate(reader, start=2):
            def col(logical):
                value = row.get(mapping[logical])
                return value.strip() if value is not None else ""

            try:
                user, item = col("user"), col("item")
                if not user:
                    raise ValueError("empty user id")
                if not item:
                    raise ValueError("empty item id")
                ts = _parse_timestamp(col("timestamp"))
                if ts < 0:
                    raise ValueError("negative timestamp")
                action = col("action") or "view"
                if action not in ACTIONS:
                    raise ValueError(f"unknown action {action!r}")
                rating_text = col("rating")
                rating = float(rating_text) if rating_text else None
                if (action == "rate") != (rating is not None):
                    raise ValueError("rating must be present exactly when action is rate")
                if rating is not None and not (1.0 <= rating <= 5.0):
                    raise ValueError(f"rating {rating} outside [1, 5]")
                helpful_text = col("helpful")
                helpful = int(helpful_text) if helpful_text else None
                if helpful is not None and helpful < 0:
                    raise ValueError("negative helpfulness votes")
                review = col("review") or None
                rows.append(
                    Interaction(user, item, ts, action, rating, review, helpful)
                )
            except ValueError as exc:
                errors.append(RowError(line=line_no, message=str(exc)))
    return rows, errors


def write_csv(path, interactions) -> None:
    """Serialize interactions in the canonical column order."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for e in interactions:
            w.writerow(
                [
                    e.user,
                    e.item,
                    e.timestamp,
                    e.action,
                    "" if e.rating is None else e.rating,
                    e.review or "",
                    "" if e.helpful is None else e.helpful,
                ]
            )


def sessionize(events, bucket: str = "calendar-day") -> list[Session]:
    """One session per (user, day), items in timestamp order, duplicates kept."""
    if bucket != "calendar-day":
        raise ValueError(f"unknown bucket {bucket!r}")
    ordered = sorted(events, key=lambda e: (e.user, e.timestamp))
    sessions: list[Session] = []
    counters: dict[str, int] = collections.defaultdict(int)
    for e in ordered:
        day = e.timestamp // SECONDS_PER_DAY
        if sessions and sessions[-1].user == e.user and sessions[-1].day == day:
            sessions[-1].items.append(e.item)
        else:
            sessions.append(Session(user=e.user, t=counters[e.user], day=day, items=[e.item]))
            counters[e.user] += 1
    return sessions


def filter_dataset(
    sessions: list[Session], min_session_len: int, min_item_support: int
) -> list[Session]:
    """Drop short sessions and rare items, iterated to a fixed point.

    Removing a rare item can push a session under the length threshold, and
    removing that session lowers other items' support, so one pass is not
    enough.
    """
    current = [Session(s.user, s.t, s.day, list(s.items)) for s in sessions]
    while True:
        counts = collections.Counter(it for s in current for it in s.items)
        keep_items = {it for it, c in counts.items() if c >= min_item_support}
        nxt = []
        for s in current:
            items = [it for it in s.items if it in keep_items]
            if len(items) >= max(min_session_len, 1):
                nxt.append(Session(s.user, s.t, s.day, items))
        if [(s.user, s.day, s.items) for s in nxt] == [
            (s.user, s.day, s.items) for s in current
        ]:
            break
        current = nxt
    counters: dict[str, int] = collections.defaultdict(int)
    for s in current:
        s.t = counters[s.user]
        counters[s.user] += 1
    return current


def ordered_dedup(items) -> list:
    seen = set()
    out = []
    for it in items:
        if it not in seen:
            seen.add(it)
            out.append(it)
    return out


def build_long_short(user_sessions: list[Session], t: int):
    """(long-term item list, short-term item list) for 1-based session ordinal t.

    The long-term side is a set in spirit; it is returned as a list ordered
    by first interaction so convolution-style consumers have a stable order.
    """
    ordered = sorted(user_sessions, key=lambda s: s.t)
    if not 1 <= t <= len(ordered):
        raise ValueError(f"session ordinal {t} out of range 1..{len(ordered)}")
    long_term = ordered_dedup(it for s in ordered[: t - 1] for it in s.items)
    short_term = list(ordered[t - 1].items)
    return long_term, short_term


def long_term_before(user_sessions: list[Session], day: int) -> list[str]:
    """Deduplicated items of the user's sessions strictly before `day`."""
    ordered = sorted(user_sessions, key=lambda s: (s.day, s.t))
    return ordered_dedup(it for s in ordered if s.day < day for it in s.items)


def split(sessions: list[Session], policy: str, rng, test_fraction: float = 0.2) -> Split:
    """Carve test sessions out and hold one target item out of each.

    random-80-20 samples test sessions uniformly among the eligible ones
    (length >= 2, user has >= 2 sessions); last-week takes the final seven
    calendar days. Users whose only appearance is a single one-item session
    are excluded from the test side with a warning.
    """
    warnings: list[str] = []
    per_user = collections.Counter(s.user for s in sessions)

    if policy == "random-80-20":
        eligible = [
            idx
            for idx, s in enumerate(sessions)
            if len(s.items) >= 2 and per_user[s.user] >= 2
        ]
        for s in sessions:
            if per_user[s.user] == 1 and len(s.items) == 1:
                warnings.append(
                    f"user {s.user}: single one-item session, excluded from test"
                )
        n_test = min(len(eligible), max(1, round(test_fraction * len(sessions))))
        if not eligible:
            raise ValueError("no session is eligible for the test side")
        chosen = set(
            int(i) for i in rng.choice(len(eligible), size=n_test, replace=False)
        )
        test_idx = {eligible[i] for i in chosen}
    elif policy == "last-week":
        max_day = max((s.day for s in sessions), default=None)
        if max_day is None:
            raise ValueError("cannot split an empty session list")
        test_idx = {i for i, s in enumerate(sessions) if s.day > max_day - 7}
        if len(test_idx) == len(sessions):
            raise ValueError("last-week split leaves the training side empty")
    else:
        raise ValueError(f"unknown split policy {policy!r}")

    train: list[Session] = []
    test: list[TestInstance] = []
    for idx, s in enumerate(sessions):
        if idx not in test_idx:
            train.append(s)
            continue
        if len(s.items) < 2:
            warnings.append(
                f"user {s.user}: test session on day {s.day} has a single item, "
                "cannot hold out a target; excluded"
            )
            if policy == "last-week":
                continue  # too recent for train, too short for test
            train.append(s)
            continue
        hold = int(rng.integers(len(s.items)))
        context = s.items[:hold] + s.items[hold + 1 :]
        test.append(
            TestInstance(user=s.user, day=s.day, t=s.t, context=context, target=s.items[hold])
        )
    return Split(train=train, test=test, policy=policy, warnings=warnings)


def sample_negatives(history, universe, n: int, rng) -> list:
    """n items uniformly without replacement from universe minus history."""
    candidates = sorted(set(universe) - set(history))
    if len(candidates) < n:
        raise ValueError(
            f"asked for {n} negatives but only {len(candidates)} candidates exist"
        )
    picked = rng.choice(len(candidates), size=n, replace=False)
    return [candidates[int(i)] for i in picked]


def training_instances(train_sessions: list[Session]) -> list[TestInstance]:
    """One instance per session position: that item held out, the rest as context."""
    out = []
    for s in train_sessions:
        for p in range(len(s.items)):
            out.append(
                TestInstance(
                    user=s.user,
                    day=s.day,
                    t=s.t,
                    context=s.items[:p] + s.items[p + 1 :],
                    target=s.items[p],
                )
            )
    return out


def train_histories(sessions: list[Session]) -> dict:
    """user -> set of every item the user touched in these sessions."""
    hist: dict[str, set] = {}
    for s in sessions:
        hist.setdefault(s.user, set()).update(s.items)
    return hist


def prepared_instances(split: Split, dataset) -> list:
    """Index-space training instances for the sequential trainers.

    One tuple (user_idx, long_idx, context_idx, target_idx, negative_pool)
    per held-out position; the long-term side is the user's earlier-day
    train sessions and the pool excludes the user's full train history.
    """
    sessions_by_user: dict[str, list[Session]] = {}
    for s in split.train:
        sessions_by_user.setdefault(s.user, []).append(s)
    complement = {
        u: np.array(
            sorted(set(range(dataset.n_items)) - {dataset.item_index[i] for i in items}),
            dtype=np.int64,
        )
        for u, items in train_histories(split.train).items()
    }
    long_cache: dict[tuple, list] = {}
    prepared = []
    for inst in training_instances(split.train):
        key = (inst.user, inst.day)
        if key not in long_cache:
            toks = long_term_before(sessions_by_user[inst.user], inst.day)
            long_cache[key] = [dataset.item_index[i] for i in toks]
        prepared.append(
            (
                dataset.user_index[inst.user],
                long_cache[key],
                [dataset.item_index[i] for i in inst.context],
                dataset.item_index[inst.target],
                complement[inst.user],
            )
        )
    return prepared


# ---------------------------------------------------------------------------
# Synthetic corpora


def item_token(j: int) -> str:
    return f"i{j:03d}"


def user_token(u: int) -> str:
    return f"u{u:03d}"


def make_successor_map(n_items: int, rng) -> dict[str, str]:
    """A single n-cycle over the item vocabulary."""
    tokens = [item_token(j) for j in range(n_items)]
    order = rng.permutation(n_items)
    return {tokens[order[x]]: tokens[order[(x + 1) % n_items]] for x in range(n_items)}


def synth_sequential(
    n_items: int,
    n_users: int,
    n_sessions_per_user: int,
    transition: dict[str, str],
    noise_rate: float,
    rng,
    session_len: int = 5,
) -> list[Session]:
    """Sessions that walk a planted successor map with per-step noise."""
    tokens = [item_token(j) for j in range(n_items)]
    sessions = []
    for u in range(n_users):
        for t in range(n_sessions_per_user):
            items = [tokens[int(rng.integers(n_items))]]
            for _ in range(session_len - 1):
                if rng.random() < noise_rate:
                    items.append(tokens[int(rng.integers(n_items))])
                else:
                    items.append(transition[items[-1]])
            sessions.append(Session(user=user_token(u), t=t, day=t, items=items))
    return sessions


def sessions_to_interactions(sessions: list[Session], action: str = "view"):
    out = []
    for s in sessions:
        for pos, item in enumerate(s.items):
            out.append(
                Interaction(
                    user=s.user,
                    item=item,
                    timestamp=s.day * SECONDS_PER_DAY + pos,
                    action=action,
                )
            )
    return out


TRAITS = ["O", "C", "E", "A", "N"]

# One dedicated lexicon category per trait for planted-cluster corpora. The
# shipped default weight table is deliberately NOT used here: it links
# overlapping category sets to several traits, which cannot plant a strict
# argmax winner for every trait.
PLANTED_TRAIT_CATEGORIES = {
    "O": "insight",
    "C": "achievement",
    "E": "social_processes",
    "A": "positive_emotions",
    "N": "sadness",
}

BACKGROUND_CATEGORIES = ["prepositions", "humans", "past_tense_verbs"]


@dataclass(frozen=True)
class ClusterInfo:
    cluster: int
    trait: str


def planted_cluster_weights() -> dict[str, list[tuple[str, float]]]:
    """Weight table that makes each planted trait the strict argmax."""
    return {t: [(cat, 1.0)] for t, cat in PLANTED_TRAIT_CATEGORIES.items()}


def synth_personality_clusters(
    n_clusters: int,
    users_per_cluster: int,
    items_per_cluster: int,
    lexicon: dict[str, list[str]] | None = None,
    rng=None,
    rating_density: float = 0.6,
):
    """Rated interactions with review text, planted in personality clusters.

    Users of one cluster rate only that cluster's items (zero co-rated items
    across clusters) and write reviews dominated by one lexicon category, so
    trait scoring separates the clusters. Returns (interactions, truth) with
    truth mapping user token -> ClusterInfo.
    """
    if n_clusters < 2:
        raise ValueError("need at least 2 clusters")
    if rng is None:
        raise ValueError("an explicit rng is required for reproducibility")
    if lexicon is None:
        from .personality import DEMO_LEXICON

        lexicon = DEMO_LEXICON

    def words_of(category: str) -> list[str]:
        return [w.rstrip("*") for w in lexicon[category]]

    interactions: list[Interaction] = []
    truth: dict[str, ClusterInfo] = {}
    for c in range(n_clusters):
        trait = TRAITS[c % len(TRAITS)]
        own_words = words_of(PLANTED_TRAIT_CATEGORIES[trait])
        other_words = [
            w
            for t, cat in PLANTED_TRAIT_CATEGORIES.items()
            if t != trait
            for w in words_of(cat)
        ]
        background = [w for cat in BACKGROUND_CATEGORIES for w in words_of(cat)]
        item_ids = [f"c{c}_i{j:03d}" for j in range(items_per_cluster)]
        base_quality = rng.uniform(1.2, 4.8, size=items_per_cluster)
        for k in range(users_per_cluster):
            user = f"c{c}_u{k:03d}"
            truth[user] = ClusterInfo(cluster=c, trait=trait)
            offset = rng.normal(0.0, 0.2)
            n_rated = max(1, round(rating_density * items_per_cluster))
            rated = rng.choice(items_per_cluster, size=n_rated, replace=False)
            day = c * users_per_cluster + k
            for pos, j in enumerate(sorted(int(x) for x in rated)):
                rating = float(
                    np.clip(base_quality[j] + offset + rng.normal(0.0, 0.25), 1.0, 5.0)
                )
                review_words = []
                for _ in range(8):
                    r = rng.random()
                    if r < 0.6:
                        pool = own_words
                    elif r < 0.7:
                        pool = other_words
                    else:
                        pool = background
                    review_words.append(pool[int(rng.integers(len(pool)))])
                interactions.append(
                    Interaction(
                        user=user,
                        item=item_ids[j],
                        timestamp=day * SECONDS_PER_DAY + pos,
                        action="rate",
                        rating=rating,
                        review=" ".join(review_words),
                        helpful=int(rng.integers(0, 6)),
                    )
                )
    return interactions, truth


def _items_by_user(interactions):
    by_user: dict[str, set] = collections.defaultdict(set)
    for e in interactions:
        by_user[e.user].add(e.item)
    return by_user


def dsw_degree(interactions) -> float:
    """Fraction of users sharing no interacted item with any other user."""
    by_user = _items_by_user(interactions)
    holders: dict[str, int] = collections.Counter()
    for items in by_user.values():
        for it in items:
            holders[it] += 1
    if not by_user:
        return 0.0
    isolated = sum(
        1 for items in by_user.values() if all(holders[it] == 1 for it in items)
    )
    return isolated / len(by_user)


def cross_cluster_disjointness(interactions, labels: dict[str, int]) -> float:
    """Fraction of users sharing no item with any user of another cluster."""
    by_user = _items_by_user(interactions)
    item_clusters: dict[str, set] = collections.defaultdict(set)
    for user, items in by_user.items():
        for it in items:
            item_clusters[it].add(labels[user])
    if not by_user:
        return 0.0
    disjoint = sum(
        1
        for user, items in by_user.items()
        if all(item_clusters[it] == {labels[user]} for it in items)
    )
    return disjoint / len(by_user)


# ---------------------------------------------------------------------------
# Explicit-rating view


@dataclass
class RatingMatrix:
    """Observed (user, item, rating) triplets with dense index maps."""

    users: list[str]
    items: list[str]
    user_index: dict[str, int]
    item_index: dict[str, int]
    triplets: list[tuple[int, int, float]]

    @property
    def n_users(self) -> int:
        return len(self.users)

    @property
    def n_items(self) -> int:
        return len(self.items)

    @classmethod
    def from_interactions(cls, interactions) -> "RatingMatrix":
        users: list[str] = []
        items: list[str] = []
        uidx: dict[str, int] = {}
        iidx: dict[str, int] = {}
        latest: dict[tuple[int, int], tuple[int, int, float]] = {}
        for order, e in enumerate(interactions):
            if e.action != "rate" or e.rating is None:
                continue
            if e.user not in uidx:
                uidx[e.user] = len(users)
                users.append(e.user)
            if e.item not in iidx:
                iidx[e.item] = len(items)
                items.append(e.item)
            key = (uidx[e.user], iidx[e.item])
            stamp = (e.timestamp, order)
            if key not in latest or stamp >= latest[key][:2]:
                latest[key] = (e.timestamp, order, e.rating)
        triplets = [(u, i, r) for (u, i), (_, _, r) in sorted(latest.items())]
        return cls(users, items, uidx, iidx, triplets)

    def dense(self):
        W = np.zeros((self.n_users, self.n_items))
        mask = np.zeros_like(W, dtype=bool)
        for u, i, r in self.triplets:
            W[u, i] = r
            mask[u, i] = True
        return W, mask


def split_ratings(matrix: RatingMatrix, test_fraction: float, rng):
    """Per-user random holdout of rating triplets; single-rating users stay in train."""
    by_user: dict[int, list[tuple[int, int, float]]] = collections.defaultdict(list)
    for trip in matrix.triplets:
        by_user[trip[0]].append(trip)
    train: list[tuple[int, int, float]] = []
    test: list[tuple[int, int, float]] = []
    for u in sorted(by_user):
        trips = by_user[u]
        if len(trips) < 2:
            train.extend(trips)
            continue
        n_test = min(len(trips) - 1, max(1, round(test_fraction * len(trips))))
        chosen = set(int(i) for i in rng.choice(len(trips), size=n_test, replace=False))
        for pos, trip in enumerate(trips):
            (test if pos in chosen else train).append(trip)
    return train, test


# ---------------------------------------------------------------------------
# Indexed dataset used by trainers and the evaluator


@dataclass
class Dataset:
    """Interactions plus interned token maps and their sessions."""

    interactions: list[Interaction]
    users: list[str]
    items: list[str]
    user_index: dict[str, int]
    item_index: dict[str, int]
    sessions: list[Session]

    @classmethod
    def from_interactions(cls, interactions) -> "Dataset":
        users: list[str] = []
        items: list[str] = []
        uidx: dict[str, int] = {}
        iidx: dict[str, int] = {}
        for e in interactions:
            if e.user not in uidx:
                uidx[e.user] = len(users)
                users.append(e.user)
            if e.item not in iidx:
                iidx[e.item] = len(items)
                items.append(e.item)
        return cls(
            interactions=list(interactions),
            users=users,
            items=items,
            user_index=uidx,
            item_index=iidx,
            sessions=sessionize(interactions),
        )

    @classmethod
    def from_csv(cls, path, schema=None):
        rows, errors = ingest_csv(path, schema)
        return cls.from_interactions(rows), errors

    @property
    def n_users(self) -> int:
        return len(self.users)

    @property
    def n_items(self) -> int:
        return len(self.items)

    def item_indices(self, tokens) -> list[int]:
        return [self.item_index[t] for t in tokens]
