"""Convolutional purpose encoder with personalized attention scoring.

The long-term item list runs through a 1-D convolution (zero-padded,
odd window) into contextual vectors; a user-conditioned attention head
collapses them into one purpose vector m. Each short-term item is
re-encoded through two small layers, attended against m, and the
weighted sum u scores the catalog by inner product with an output item
table. Training is pairwise BPR with inverted dropout on the conv
outputs.
"""

from dataclasses import dataclass, field

import numpy as np

from . import data
from .numeric import (
    init_normal,
    init_uniform_attention,
    make_rng,
    sigmoid,
    softmax,
    softmax_backward,
)

_PARAM_BASE = ("E", "U", "K_w", "b_w", "W1", "b1", "W2", "b2", "W3", "b3", "W4", "b4")


@dataclass
class CanConfig:
    D: int = 100  # item embedding width
    D_u: int = 100  # user embedding width
    N_f: int = 400  # conv kernels / attention width
    window: int = 3  # conv window, odd
    D_p: int = 200  # purpose query width
    D_q: int = 200  # preference query width
    dropout: float = 0.2
    lr: float = 0.01
    lam_uv: float = 1e-5
    lam_a: float = 1e-5
    batch: int = 50
    epochs: int = 10
    seed: int = 0
    tie_embeddings: bool = False  # V_out is E itself; requires N_f == D
    disable_purpose: bool = False  # ablation: m = 0 always
    disable_preference: bool = False  # ablation: u = m directly

    def validate(self) -> "CanConfig":
        if self.window < 1 or self.window % 2 == 0:
            raise ValueError("conv window must be odd and positive")
        if self.tie_embeddings and self.N_f != self.D:
            raise ValueError("tied output table needs N_f == D")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout rate must be in [0, 1)")
        return self


@dataclass
class CanState:
    E: np.ndarray  # n_items x D
    U: np.ndarray  # D_u x n_users
    K_w: np.ndarray  # N_f x window*D
    b_w: np.ndarray
    W1: np.ndarray  # D_p x D_u
    b1: np.ndarray
    W2: np.ndarray  # N_f x D_p
    b2: np.ndarray
    W3: np.ndarray  # D_q x D
    b3: np.ndarray
    W4: np.ndarray  # N_f x D_q
    b4: np.ndarray
    V_out: np.ndarray  # n_items x N_f (alias of E when tied)
    config: CanConfig
    trace: list = field(default_factory=list)

    def params(self) -> list:
        names = _PARAM_BASE if self.config.tie_embeddings else _PARAM_BASE + ("V_out",)
        return [getattr(self, n) for n in names]

    @classmethod
    def from_params(cls, plist, config: CanConfig) -> "CanState":
        if config.tie_embeddings:
            return cls(*plist, V_out=plist[0], config=config)
        return cls(*plist, config=config)

    def score_items(self, user, long_items, short_items) -> np.ndarray:
        return self.V_out @ user_vector(self, user, long_items, short_items)


def init_can(n_users: int, n_items: int, config: CanConfig, rng=None) -> CanState:
    config.validate()
    if rng is None:
        rng = make_rng(config.seed)
    E = init_normal(n_items, config.D, 0.0, 0.01, rng)
    U = init_normal(config.D_u, n_users, 0.0, 0.01, rng)
    wd = config.window * config.D

    def attn(rows, cols):
        return init_uniform_attention(rows, cols, cols, rng)

    V_out = E if config.tie_embeddings else init_normal(n_items, config.N_f, 0.0, 0.01, rng)
    return CanState(
        E=E,
        U=U,
        K_w=attn(config.N_f, wd),
        b_w=np.zeros(config.N_f),
        W1=attn(config.D_p, config.D_u),
        b1=np.zeros(config.D_p),
        W2=attn(config.N_f, config.D_p),
        b2=np.zeros(config.N_f),
        W3=attn(config.D_q, config.D),
        b3=np.zeros(config.D_q),
        W4=attn(config.N_f, config.D_q),
        b4=np.zeros(config.N_f),
        V_out=V_out,
        config=config,
    )


# ---------------------------------------------------------------------------
# Forward pieces


def _windows(state: CanState, items) -> np.ndarray:
    """Row i = concatenated embeddings of positions i-K..i+K, zero-padded."""
    cfg = state.config
    K = (cfg.window - 1) // 2
    X = state.E[list(items)]
    if K:
        pad = np.zeros((K, cfg.D))
        X = np.vstack([pad, X, pad])
    n = len(items)
    return np.stack([X[i : i + cfg.window].ravel() for i in range(n)])


def conv_context(state: CanState, items) -> np.ndarray:
    """relu(K_w · window_i + b_w) for each position of the ordered item list."""
    if not len(items):
        raise ValueError("convolution needs at least one item")
    pre = _windows(state, items) @ state.K_w.T + state.b_w
    return np.maximum(pre, 0.0)


def purpose_vector(state: CanState, user: int) -> np.ndarray:
    return np.maximum(state.W1 @ state.U[:, user] + state.b1, 0.0)


def purpose_encode(state: CanState, C: np.ndarray, p: np.ndarray):
    """Attention over contextual rows of C, queried by the user's purpose p."""
    t = np.tanh(state.W2 @ p + state.b2)
    alpha = softmax(C @ t)
    return C.T @ alpha, alpha


def preference_encode(state: CanState, short_items, m: np.ndarray):
    """Re-encode short-term items and attend them against the purpose vector."""
    Es = state.E[list(short_items)]
    PD = np.maximum(Es @ state.W3.T + state.b3, 0.0)
    Q = np.tanh(PD @ state.W4.T + state.b4)
    ap = softmax(Q @ m)
    return Q.T @ ap, ap


def can_score(state: CanState, u: np.ndarray, item: int) -> float:
    u = np.asarray(u, dtype=np.float64)
    if u.shape != (state.V_out.shape[1],):
        raise ValueError(f"user vector has shape {u.shape}, output table wants "
                         f"({state.V_out.shape[1]},)")
    return float(state.V_out[item] @ u)


def dropout_mask(rng, shape, rate: float) -> np.ndarray:
    """Inverted-dropout mask: entries are 0 or 1/(1-rate), expectation 1."""
    if rate <= 0.0:
        return np.ones(shape)
    return (rng.random(shape) >= rate) / (1.0 - rate)


def user_vector(state: CanState, user: int, long_items, short_items) -> np.ndarray:
    """Inference-path user representation (no dropout)."""
    cfg = state.config
    if len(long_items) and not cfg.disable_purpose:
        C = conv_context(state, long_items)
        m, _ = purpose_encode(state, C, purpose_vector(state, user))
    else:
        m = np.zeros(cfg.N_f)
    if cfg.disable_preference or not len(short_items):
        return m
    u, _ = preference_encode(state, short_items, m)
    return u


# ---------------------------------------------------------------------------
# Loss and gradients


@dataclass
class Batch:
    users: list
    longs: list
    shorts: list
    positives: list
    negatives: list  # one negative item index per instance (pairwise loss)


def loss_and_grads(state: CanState, batch: Batch, rng=None):
    """Pairwise BPR loss + L2, gradients aligned with state.params().

    Pass a generator to enable dropout on the conv outputs (training);
    with rng=None the forward is the deterministic inference path.
    """
    cfg = state.config
    names = _PARAM_BASE if cfg.tie_embeddings else _PARAM_BASE + ("V_out",)
    g = {n: np.zeros_like(getattr(state, n)) for n in names}
    gV = g["E"] if cfg.tie_embeddings else g["V_out"]
    vout = state.V_out
    K = (cfg.window - 1) // 2
    total = 0.0

    for user, G, S, pos, neg in zip(
        batch.users, batch.longs, batch.shorts, batch.positives, batch.negatives
    ):
        use_purpose = bool(len(G)) and not cfg.disable_purpose
        use_pref = bool(len(S)) and not cfg.disable_preference
        if use_purpose:
            Wins = _windows(state, G)
            pre_c = Wins @ state.K_w.T + state.b_w
            C = np.maximum(pre_c, 0.0)
            M = dropout_mask(rng, C.shape, cfg.dropout) if rng is not None else 1.0
            Cd = C * M
            u_emb = state.U[:, user]
            pre1 = state.W1 @ u_emb + state.b1
            p = np.maximum(pre1, 0.0)
            pre2 = state.W2 @ p + state.b2
            t = np.tanh(pre2)
            alpha = softmax(Cd @ t)
            m = Cd.T @ alpha
        else:
            m = np.zeros(cfg.N_f)
        if use_pref:
            Es = state.E[S]
            pre_pd = Es @ state.W3.T + state.b3
            PD = np.maximum(pre_pd, 0.0)
            pre_q = PD @ state.W4.T + state.b4
            Q = np.tanh(pre_q)
            ap = softmax(Q @ m)
            u = Q.T @ ap
        else:
            u = m

        x = u @ (vout[pos] - vout[neg])
        total += -np.log(np.clip(sigmoid(x), 1e-12, 1.0 - 1e-12))

        s = sigmoid(x) - 1.0  # d(-ln sigma(x))/dx
        gV[pos] += s * u
        gV[neg] -= s * u
        du = s * (vout[pos] - vout[neg])

        if use_pref:
            dap = Q @ du
            dQ = np.outer(ap, du)
            dl = softmax_backward(ap, dap)
            dm = Q.T @ dl
            dQ += np.outer(dl, m)
            dpre_q = dQ * (1.0 - Q**2)
            g["W4"] += dpre_q.T @ PD
            g["b4"] += dpre_q.sum(axis=0)
            dPD = dpre_q @ state.W4
            dpre_pd = dPD * (pre_pd > 0)
            g["W3"] += dpre_pd.T @ Es
            g["b3"] += dpre_pd.sum(axis=0)
            np.add.at(g["E"], S, dpre_pd @ state.W3)
        else:
            dm = du

        if use_purpose:
            dalpha = Cd @ dm
            dCd = np.outer(alpha, dm)
            dl = softmax_backward(alpha, dalpha)
            dt = Cd.T @ dl
            dCd += np.outer(dl, t)
            dpre2 = dt * (1.0 - t**2)
            g["W2"] += np.outer(dpre2, p)
            g["b2"] += dpre2
            dp = state.W2.T @ dpre2
            dpre1 = dp * (pre1 > 0)
            g["W1"] += np.outer(dpre1, u_emb)
            g["b1"] += dpre1
            g["U"][:, user] += state.W1.T @ dpre1
            dC = dCd * M
            dpre_c = dC * (pre_c > 0)
            g["K_w"] += dpre_c.T @ Wins
            g["b_w"] += dpre_c.sum(axis=0)
            dWins = dpre_c @ state.K_w
            n = len(G)
            dXp = np.zeros((n + 2 * K, cfg.D))
            for i in range(n):
                dXp[i : i + cfg.window] += dWins[i].reshape(cfg.window, cfg.D)
            np.add.at(g["E"], G, dXp[K : K + n] if K else dXp)

    total += cfg.lam_uv * ((state.E**2).sum() + (state.U**2).sum())
    g["E"] += 2.0 * cfg.lam_uv * state.E
    g["U"] += 2.0 * cfg.lam_uv * state.U
    if not cfg.tie_embeddings:
        total += cfg.lam_uv * (state.V_out**2).sum()
        g["V_out"] += 2.0 * cfg.lam_uv * state.V_out
    for n_ in ("K_w", "b_w", "W1", "b1", "W2", "b2", "W3", "b3", "W4", "b4"):
        arr = getattr(state, n_)
        total += cfg.lam_a * (arr**2).sum()
        g[n_] += 2.0 * cfg.lam_a * arr
    return float(total), [g[n_] for n_ in names]


# ---------------------------------------------------------------------------
# Training


def train_can(split: data.Split, dataset: data.Dataset, config: CanConfig) -> CanState:
    """Minibatch BPR over per-position holdout instances (one negative each).

    Dropout applies on conv outputs during training only; the stored
    state scores deterministically.
    """
    config.validate()
    rng = make_rng(config.seed)
    state = init_can(dataset.n_users, dataset.n_items, config, rng)
    prepared = data.prepared_instances(split, dataset)
    plist = state.params()
    drop_rng = rng if config.dropout > 0 else None

    with np.errstate(over="ignore", invalid="ignore"):
        for epoch in range(config.epochs):
            order = rng.permutation(len(prepared))
            epoch_total, n_batches = 0.0, 0
            for lo in range(0, len(order), config.batch):
                batch = Batch(users=[], longs=[], shorts=[], positives=[], negatives=[])
                for idx in order[lo : lo + config.batch]:
                    u, G, S, pos, pool = prepared[idx]
                    if pool.size == 0:
                        continue
                    batch.users.append(u)
                    batch.longs.append(G)
                    batch.shorts.append(S)
                    batch.positives.append(pos)
                    batch.negatives.append(int(pool[rng.integers(pool.size)]))
                if not batch.users:
                    continue
                try:
                    loss, grads = loss_and_grads(state, batch, drop_rng)
                except ValueError as exc:
                    # conv activations are unbounded, so intermediates can
                    # overflow while the parameters are still finite
                    raise FloatingPointError(
                        f"epoch {epoch}: training diverged ({exc})"
                    ) from exc
                if not np.isfinite(loss):
                    raise FloatingPointError(f"epoch {epoch}: loss is {loss}")
                for p, gr in zip(plist, grads):
                    p -= config.lr * gr
                epoch_total += loss
                n_batches += 1
            state.trace.append(epoch_total / max(n_batches, 1))
    return state
