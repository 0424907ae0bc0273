"""Sequential recommender mixing long- and short-term interest via attention.

Items and users live in sigmoid-squashed embedding tables. Two attention
heads summarize the user's long-term item set and current session into
one vector each; a relu mixture layer fuses them, and a per-item output
layer scores the whole catalog at once. Training is pairwise binary
cross-entropy against sampled negatives.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import data, metrics
from .numeric import (
    init_normal,
    init_uniform_attention,
    make_rng,
    sigmoid,
    softmax,
    softmax_backward,
)

PARAM_NAMES = ("W1", "W2", "w_alpha", "w_beta", "W", "b", "Wout", "bout")


@dataclass
class DasConfig:
    k: int = 100
    lr: float = 0.001
    lam_uv: float = 1e-5
    lam_at: float = 1e-5
    batch: int = 50
    epochs: int = 10
    seed: int = 0
    reg_dense: bool = False  # also penalize the dense layers W, Wout
    init_std: float = 0.01
    dense_init_std: float = 0.1


@dataclass
class DasState:
    W1: np.ndarray  # k x n_items, sigmoid-ed per column to get h_i
    W2: np.ndarray  # k x n_users
    w_alpha: np.ndarray  # long-term attention scorer, length k
    w_beta: np.ndarray  # short-term attention scorer, length k
    W: np.ndarray  # mixture layer, k x 2k
    b: np.ndarray
    Wout: np.ndarray  # per-item output layer, n_items x 2k
    bout: np.ndarray
    config: DasConfig
    trace: list = field(default_factory=list)

    def params(self) -> list:
        return [getattr(self, n) for n in PARAM_NAMES]

    @classmethod
    def from_params(cls, plist, config: DasConfig) -> "DasState":
        return cls(*plist, config=config)

    @property
    def n_items(self) -> int:
        return self.W1.shape[1]

    def score_items(self, user, long_items, short_items) -> np.ndarray:
        k = self.config.k
        u_long = (
            attend(sigmoid(self.W1[:, list(long_items)]), self.w_alpha)[0]
            if len(long_items)
            else np.zeros(k)
        )
        u_short = (
            attend(sigmoid(self.W1[:, list(short_items)]), self.w_beta)[0]
            if len(short_items)
            else np.zeros(k)
        )
        return score_all(self, mixture(self, u_long, u_short), user)


def init_das(n_users: int, n_items: int, config: DasConfig, rng=None) -> DasState:
    if rng is None:
        rng = make_rng(config.seed)
    k = config.k
    return DasState(
        W1=init_normal(k, n_items, 0.0, config.init_std, rng),
        W2=init_normal(k, n_users, 0.0, config.init_std, rng),
        w_alpha=init_uniform_attention(1, k, k, rng)[0],
        w_beta=init_uniform_attention(1, k, k, rng)[0],
        W=init_normal(k, 2 * k, 0.0, config.dense_init_std, rng),
        b=np.zeros(k),
        Wout=init_normal(n_items, 2 * k, 0.0, config.dense_init_std, rng),
        bout=np.zeros(n_items),
        config=config,
    )


# ---------------------------------------------------------------------------
# Forward pieces


def embed_item(state: DasState, item: int) -> np.ndarray:
    return sigmoid(state.W1[:, item])


def embed_user(state: DasState, user: int) -> np.ndarray:
    return sigmoid(state.W2[:, user])


def attend(H: np.ndarray, w: np.ndarray):
    """Weighted sum of H's columns; weights = softmax of w·column scores."""
    if H.ndim != 2 or H.shape[1] == 0:
        raise ValueError("attention needs at least one embedding column")
    alpha = softmax(w @ H)
    return H @ alpha, alpha


def mixture(state: DasState, u_long: np.ndarray, u_short: np.ndarray) -> np.ndarray:
    pre = state.W @ np.concatenate([u_long, u_short]) + state.b
    return np.maximum(pre, 0.0)


def score_all(state: DasState, u_mixture: np.ndarray, user: int) -> np.ndarray:
    z = np.concatenate([u_mixture, embed_user(state, user)])
    return state.Wout @ z + state.bout


# ---------------------------------------------------------------------------
# Loss and gradients


@dataclass
class Batch:
    users: list
    longs: list  # per instance: long-term item indices (may be empty)
    shorts: list  # per instance: context item indices (duplicates allowed)
    positives: list
    negatives: list  # per instance: list of negative item indices


def _attention_backward(H, w, alpha, d_out, gw):
    """Backprop d_out through (H @ softmax(w @ H)).

    Accumulates dL/dw into gw in place and returns dL/dH; the caller
    applies the sigmoid derivative before scattering into the item table.
    """
    d_alpha = H.T @ d_out
    dH = np.outer(d_out, alpha)
    d_logits = softmax_backward(alpha, d_alpha)
    gw += H @ d_logits
    dH += np.outer(w, d_logits)
    return dH


def loss_and_grads(state: DasState, batch: Batch):
    """Batch pairwise cross-entropy + L2, with gradients in params() order.

    Regularization enters once per call, so this is the exact objective a
    single SGD step descends.
    """
    cfg = state.config
    k = cfg.k
    n_items = state.n_items
    grads = [np.zeros_like(p) for p in state.params()]
    gW1, gW2, gwa, gwb, gW, gb, gWout, gbout = grads
    total = 0.0

    for user, G, S, pos, negs in zip(
        batch.users, batch.longs, batch.shorts, batch.positives, batch.negatives
    ):
        if G:
            HG = sigmoid(state.W1[:, G])
            u_long, alpha = attend(HG, state.w_alpha)
        else:
            u_long = np.zeros(k)
        if S:
            HS = sigmoid(state.W1[:, S])
            u_short, beta = attend(HS, state.w_beta)
        else:
            u_short = np.zeros(k)
        x = np.concatenate([u_long, u_short])
        pre = state.W @ x + state.b
        u_mix = np.maximum(pre, 0.0)
        h_u = sigmoid(state.W2[:, user])
        z = np.concatenate([u_mix, h_u])
        R = state.Wout @ z + state.bout
        sig = np.clip(sigmoid(R), 1e-12, 1.0 - 1e-12)

        negs = list(negs)
        total += -np.log(sig[pos]) - np.log(1.0 - sig[negs]).sum()

        dR = np.zeros(n_items)
        dR[pos] += sig[pos] - 1.0
        np.add.at(dR, negs, sig[negs])

        gWout += np.outer(dR, z)
        gbout += dR
        dz = state.Wout.T @ dR
        du_mix, dh_u = dz[:k], dz[k:]
        gW2[:, user] += dh_u * h_u * (1.0 - h_u)
        dpre = du_mix * (pre > 0)
        gW += np.outer(dpre, x)
        gb += dpre
        dx = state.W.T @ dpre
        du_long, du_short = dx[:k], dx[k:]
        if G:
            dHG = _attention_backward(HG, state.w_alpha, alpha, du_long, gwa)
            np.add.at(gW1, (slice(None), G), dHG * HG * (1.0 - HG))
        if S:
            dHS = _attention_backward(HS, state.w_beta, beta, du_short, gwb)
            np.add.at(gW1, (slice(None), S), dHS * HS * (1.0 - HS))

    total += cfg.lam_uv * ((state.W1**2).sum() + (state.W2**2).sum())
    total += cfg.lam_at * ((state.w_alpha**2).sum() + (state.w_beta**2).sum())
    gW1 += 2.0 * cfg.lam_uv * state.W1
    gW2 += 2.0 * cfg.lam_uv * state.W2
    gwa += 2.0 * cfg.lam_at * state.w_alpha
    gwb += 2.0 * cfg.lam_at * state.w_beta
    if cfg.reg_dense:
        total += cfg.lam_uv * ((state.W**2).sum() + (state.Wout**2).sum())
        gW += 2.0 * cfg.lam_uv * state.W
        gWout += 2.0 * cfg.lam_uv * state.Wout
    return float(total), grads


# ---------------------------------------------------------------------------
# Training


def train_das(split: data.Split, dataset: data.Dataset, config: DasConfig) -> DasState:
    """Minibatch SGD over per-position holdout instances of the train sessions.

    One uniform negative per positive, resampled each epoch from outside
    the user's full train history. Long-term context is the union of the
    user's strictly-earlier-day train sessions.
    """
    rng = make_rng(config.seed)
    state = init_das(dataset.n_users, dataset.n_items, config, rng)
    prepared = data.prepared_instances(split, dataset)
    plist = state.params()
    with np.errstate(over="ignore", invalid="ignore"):
        for epoch in range(config.epochs):
            order = rng.permutation(len(prepared))
            epoch_total, n_batches = 0.0, 0
            for lo in range(0, len(order), config.batch):
                chunk = order[lo : lo + config.batch]
                batch = Batch(users=[], longs=[], shorts=[], positives=[], negatives=[])
                for idx in chunk:
                    u, G, S, pos, pool = prepared[idx]
                    if pool.size == 0:
                        continue
                    batch.users.append(u)
                    batch.longs.append(G)
                    batch.shorts.append(S)
                    batch.positives.append(pos)
                    batch.negatives.append([int(pool[rng.integers(pool.size)])])
                if not batch.users:
                    continue
                try:
                    loss, grads = loss_and_grads(state, batch)
                except ValueError as exc:
                    if any(not np.all(np.isfinite(p)) for p in plist):
                        raise FloatingPointError(
                            f"epoch {epoch}: parameters diverged ({exc})"
                        ) from exc
                    raise
                if not np.isfinite(loss):
                    raise FloatingPointError(f"epoch {epoch}: loss is {loss}")
                for p, g in zip(plist, grads):
                    p -= config.lr * g
                epoch_total += loss
                n_batches += 1
            state.trace.append(epoch_total / max(n_batches, 1))
    return state


def recommend_das(
    state: DasState, user: int, long_items, short_items, n: int, exclude_context=False
):
    """Top-n (item, score) pairs; optionally drops the short-term context items."""
    scores = state.score_items(user, long_items, short_items)
    order = metrics.rank_items(scores)
    if exclude_context:
        drop = set(short_items)
        order = [i for i in order if i not in drop]
    if n > len(order):
        warnings.warn(f"asked for {n} items but only {len(order)} are rankable")
        n = len(order)
    return [(int(i), float(scores[i])) for i in list(order)[:n]]
