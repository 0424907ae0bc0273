"""Non-personalized and matrix-factorization reference scorers.

Top, Random, UserMean, and ItemMean need no training loop; the pairwise
matrix-factorization ranker (`train_bpr`) is the only learned baseline.
All ranking scorers follow the `score_items(user, long_items, short_items)
-> (n_items,) array` protocol the evaluator expects.
"""

from dataclasses import dataclass, field

import numpy as np

from .numeric import make_rng, sigmoid


# ---------------------------------------------------------------------------
# Popularity


@dataclass
class TopScorer:
    counts: np.ndarray  # training interaction count per item index

    def score_items(self, user, long_items, short_items):
        return self.counts.astype(np.float64)


def top_scorer(train_sessions, item_index, n_items) -> TopScorer:
    counts = np.zeros(n_items)
    for s in train_sessions:
        for it in s.items:
            j = item_index.get(it)
            if j is not None:
                counts[j] += 1
    return TopScorer(counts=counts)


# ---------------------------------------------------------------------------
# Random


@dataclass
class RandomScorer:
    rng: np.random.Generator
    n_items: int
    seed: int | None = None  # kept so the scorer can be checkpointed

    def score_items(self, user, long_items, short_items):
        return self.rng.random(self.n_items)


def random_scorer(rng, n_items, seed=None) -> RandomScorer:
    return RandomScorer(rng=rng, n_items=n_items, seed=seed)


# ---------------------------------------------------------------------------
# Mean-rating predictors


@dataclass
class MeanPredictor:
    by: str  # "user" or "item"
    table: dict
    global_mean: float

    def predict_rating(self, user, item) -> float:
        key = user if self.by == "user" else item
        return self.table.get(key, self.global_mean)


def _mean_predictor(triplets, pos: int, by: str) -> MeanPredictor:
    triplets = list(triplets)
    if not triplets:
        raise ValueError("no ratings to average")
    sums: dict = {}
    ns: dict = {}
    for t in triplets:
        k = t[pos]
        sums[k] = sums.get(k, 0.0) + t[2]
        ns[k] = ns.get(k, 0) + 1
    table = {k: sums[k] / ns[k] for k in sums}
    global_mean = sum(t[2] for t in triplets) / len(triplets)
    return MeanPredictor(by=by, table=table, global_mean=global_mean)


def user_mean(triplets) -> MeanPredictor:
    return _mean_predictor(triplets, 0, "user")


def item_mean(triplets) -> MeanPredictor:
    return _mean_predictor(triplets, 1, "item")


# ---------------------------------------------------------------------------
# Pairwise-ranking matrix factorization


@dataclass
class BprConfig:
    d: int = 16
    lr: float = 0.05
    l2: float = 0.01
    epochs: int = 20
    seed: int = 0
    init_std: float = 0.1


@dataclass
class BprState:
    P: np.ndarray  # n_users x d
    Q: np.ndarray  # n_items x d
    trace: list = field(default_factory=list)  # mean pairwise loss per epoch
    config: BprConfig | None = None

    def score_items(self, user, long_items, short_items):
        return self.P[user] @ self.Q.T

    def predict_rating(self, user, item) -> float:
        return float(self.P[user] @ self.Q[item])


def bpr_loss_and_grad(P, Q, triples, l2):
    """Summed pairwise loss and gradients over (user, pos, neg) triples.

    Per triple: softplus(-p_u·(q_i - q_j)) + l2(|p_u|^2 + |q_i|^2 + |q_j|^2),
    matching the per-step objective the trainer descends.
    """
    loss = 0.0
    gP = np.zeros_like(P)
    gQ = np.zeros_like(Q)
    for u, i, j in triples:
        pu, qi, qj = P[u], Q[i], Q[j]
        x = pu @ (qi - qj)
        loss += np.logaddexp(0.0, -x)
        loss += l2 * (pu @ pu + qi @ qi + qj @ qj)
        s = sigmoid(x) - 1.0  # dloss/dx
        gP[u] += s * (qi - qj) + 2 * l2 * pu
        gQ[i] += s * pu + 2 * l2 * qi
        gQ[j] += -s * pu + 2 * l2 * qj
    return float(loss), [gP, gQ]


def init_bpr(n_users, n_items, config: BprConfig, rng=None) -> BprState:
    if rng is None:
        rng = make_rng(config.seed)
    return BprState(
        P=rng.normal(0.0, config.init_std, size=(n_users, config.d)),
        Q=rng.normal(0.0, config.init_std, size=(n_items, config.d)),
        config=config,
    )


def pairs_from_sessions(sessions, user_index, item_index):
    """Flatten sessions into implicit (user_idx, item_idx) training pairs."""
    return [
        (user_index[s.user], item_index[it])
        for s in sessions
        for it in s.items
        if s.user in user_index and it in item_index
    ]


def train_bpr(pairs, n_users, n_items, config: BprConfig) -> BprState:
    """SGD with one uniform negative per positive, drawn outside the user's history."""
    rng = make_rng(config.seed)
    state = init_bpr(n_users, n_items, config, rng)
    P, Q = state.P, state.Q

    history: dict[int, set] = {}
    for u, i in pairs:
        history.setdefault(u, set()).add(i)
    complement = {
        u: np.array(sorted(set(range(n_items)) - seen), dtype=np.int64)
        for u, seen in history.items()
    }

    pairs = np.asarray(pairs, dtype=np.int64)
    lr, l2 = config.lr, config.l2
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(config.epochs):
            order = rng.permutation(len(pairs))
            total, n_seen = 0.0, 0
            for idx in order:
                u, i = pairs[idx]
                pool = complement[u]
                if pool.size == 0:
                    continue
                j = pool[rng.integers(pool.size)]
                pu, qi, qj = P[u], Q[i], Q[j]
                x = pu @ (qi - qj)
                total += np.logaddexp(0.0, -x)
                n_seen += 1
                s = sigmoid(x) - 1.0
                gp = s * (qi - qj) + 2 * l2 * pu
                gqi = s * pu + 2 * l2 * qi
                gqj = -s * pu + 2 * l2 * qj
                P[u] = pu - lr * gp
                Q[i] = qi - lr * gqi
                Q[j] = qj - lr * gqj
            epoch_loss = total / max(n_seen, 1)
            if not np.isfinite(epoch_loss):
                raise FloatingPointError(f"training diverged (epoch loss {epoch_loss})")
            state.trace.append(float(epoch_loss))
    return state
