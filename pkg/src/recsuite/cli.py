"""Command-line front end.

Subcommands cover the whole workflow: ``synth`` writes reproducible
synthetic corpora, ``ingest`` normalizes raw interaction logs,
``profile`` scores trait profiles from review text, ``train`` fits any
model to a corpus, ``eval`` scores a checkpoint against a corpus, and
``recommend`` prints a ranked item list for one user.

Options resolve in one fixed order: command-line flag, then the
``--config`` file (a ``[command]``-scoped ``key = value`` entry wins
over a bare one), then the built-in default. Every artifact-producing
run writes a JSON manifest (seed, resolved config and its hash, input
file hashes, package version, wall time) next to its outputs, and the
same inputs with the same seed produce byte-identical artifacts.
"""

import collections
import hashlib
import json
import os
import time
from dataclasses import asdict

import click
import numpy as np

from . import __version__, apar, baselines, can, checkpoint, das, data, metrics, personality
from .numeric import make_rng

MODELS = ("apar", "das", "can", "top", "random", "usermean", "itemmean", "bpr")
RATING_MODELS = ("apar", "usermean", "itemmean")
METRIC_NAMES = ("precision", "recall", "mcan", "auc", "mae", "rmse")

_BOOL_WORDS = {
    "true": True, "yes": True, "on": True, "1": True,
    "false": False, "no": False, "off": False, "0": False,
}


# ---------------------------------------------------------------------------
# Config-file resolution


def _load_config_file(path):
    """Parse a key=value file with optional [section] scoping."""
    values = {"": {}}
    section = ""
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if line.startswith("[") and line.endswith("]"):
                section = line[1:-1].strip()
                values.setdefault(section, {})
                continue
            if "=" not in line:
                raise click.ClickException(
                    f"{path}:{line_no}: expected key = value, got {line!r}"
                )
            key, val = line.split("=", 1)
            values[section][key.strip().replace("-", "_")] = val.strip()
    return values


class _Resolver:
    """Applies the flag > config-file > default precedence."""

    def __init__(self, command: str, config_path):
        self.command = command
        self.values = _load_config_file(config_path) if config_path else {"": {}}

    def get(self, name, flag_value, cast):
        if flag_value is not None:
            return flag_value
        key = name.replace("-", "_")
        raw = self.values.get(self.command, {}).get(key)
        if raw is None:
            raw = self.values[""].get(key)
        if raw is None:
            return None
        if cast is bool:
            if raw.lower() not in _BOOL_WORDS:
                raise click.ClickException(
                    f"config value {name}={raw!r} is not a boolean"
                )
            return _BOOL_WORDS[raw.lower()]
        try:
            return cast(raw)
        except ValueError:
            raise click.ClickException(
                f"config value {name}={raw!r} is not a valid {cast.__name__}"
            )


# ---------------------------------------------------------------------------
# Shared plumbing


def common_options(fn):
    fn = click.option("--seed", type=int, default=None, help="rng seed [default: 0]")(fn)
    fn = click.option(
        "--config", "config_path", type=click.Path(exists=True, dir_okay=False),
        default=None, help="key=value config file; flags override it",
    )(fn)
    return fn


def out_option(required=True):
    def deco(fn):
        return click.option(
            "--out", "out_dir", type=click.Path(file_okay=False),
            required=required, help="output directory",
        )(fn)
    return deco


def _sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(out_dir, command, seed, config, inputs, wall_time_s, extra=None):
    config_json = json.dumps(config, sort_keys=True)
    record = {
        "command": command,
        "seed": seed,
        "config": config,
        "config_hash": hashlib.sha256(config_json.encode("utf-8")).hexdigest(),
        "inputs": {str(p): _sha256_file(p) for p in inputs},
        "version": __version__,
        "wall_time_s": round(wall_time_s, 6),
    }
    if extra:
        record.update(extra)
    path = os.path.join(out_dir, f"{command}_manifest.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(record, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _read_corpus(path):
    """Canonical-format interactions; per-row problems go to stderr."""
    try:
        interactions, errors = data.ingest_csv(path)
    except (ValueError, OSError) as exc:
        raise click.ClickException(str(exc))
    for err in errors:
        click.echo(f"row {err.line}: {err.message}", err=True)
    if not interactions:
        raise click.ClickException(f"{path}: no valid interaction rows")
    return interactions


def _ranking_context(interactions, policy, seed):
    ds = data.Dataset.from_interactions(interactions)
    sp = data.split(ds.sessions, policy, make_rng(seed))
    return ds, sp


def _rating_context(interactions, test_fraction, seed):
    matrix = data.RatingMatrix.from_interactions(interactions)
    if not matrix.triplets:
        raise click.ClickException("input has no explicit ratings")
    train_trips, test_trips = data.split_ratings(matrix, test_fraction, make_rng(seed))
    return matrix, train_trips, test_trips


def _aligned_L(sim: personality.SimilarityMatrix, users) -> np.ndarray:
    """Expand a similarity matrix over profiled users to the full user list."""
    pos = {u: i for i, u in enumerate(sim.users)}
    L = np.zeros((len(users), len(users)))
    for a, ua in enumerate(users):
        for b, ub in enumerate(users):
            if a != b and ua in pos and ub in pos:
                L[a, b] = sim.matrix[pos[ua], pos[ub]]
    return L


@click.group()
def main():
    """Recommender-systems engine: data, personality profiles, models, metrics."""


# ---------------------------------------------------------------------------
# synth


@main.command()
@click.option("--kind", type=click.Choice(["sequential", "personality"]),
              default="sequential", show_default=True)
@click.option("--items", type=int, default=None, help="sequential: catalog size [50]")
@click.option("--users", type=int, default=None, help="sequential: user count [20]")
@click.option("--sessions-per-user", type=int, default=None, help="[100]")
@click.option("--session-len", type=int, default=None, help="[5]")
@click.option("--noise", type=float, default=None,
              help="sequential: per-step random-jump rate [0.1]")
@click.option("--clusters", type=int, default=None, help="personality: [2]")
@click.option("--users-per-cluster", type=int, default=None, help="[20]")
@click.option("--items-per-cluster", type=int, default=None, help="[10]")
@click.option("--rating-density", type=float, default=None, help="[0.6]")
@common_options
@out_option()
def synth(kind, items, users, sessions_per_user, session_len, noise, clusters,
          users_per_cluster, items_per_cluster, rating_density, seed, config_path,
          out_dir):
    """Write a reproducible synthetic corpus."""
    t0 = time.perf_counter()
    r = _Resolver("synth", config_path)
    seed = r.get("seed", seed, int) or 0
    os.makedirs(out_dir, exist_ok=True)
    corpus_path = os.path.join(out_dir, "corpus.csv")
    rng = make_rng(seed)

    if kind == "sequential":
        items = r.get("items", items, int) or 50
        users = r.get("users", users, int) or 20
        spu = r.get("sessions_per_user", sessions_per_user, int) or 100
        slen = r.get("session_len", session_len, int) or 5
        noise = r.get("noise", noise, float)
        noise = 0.1 if noise is None else noise
        transition = data.make_successor_map(items, rng)
        sessions = data.synth_sequential(items, users, spu, transition, noise, rng,
                                         session_len=slen)
        interactions = data.sessions_to_interactions(sessions)
        data.write_csv(corpus_path, interactions)
        click.echo(
            f"wrote {corpus_path}: {len(interactions)} events, "
            f"{len(sessions)} sessions, {items} items"
        )
        cfg = {"kind": kind, "items": items, "users": users,
               "sessions_per_user": spu, "session_len": slen, "noise": noise}
    else:
        clusters = r.get("clusters", clusters, int) or 2
        upc = r.get("users_per_cluster", users_per_cluster, int) or 20
        ipc = r.get("items_per_cluster", items_per_cluster, int) or 10
        density = r.get("rating_density", rating_density, float)
        density = 0.6 if density is None else density
        interactions, truth = data.synth_personality_clusters(
            clusters, upc, ipc, rng=rng, rating_density=density
        )
        data.write_csv(corpus_path, interactions)
        labels_path = os.path.join(out_dir, "clusters.csv")
        with open(labels_path, "w", encoding="utf-8") as fh:
            fh.write("user,cluster,trait\n")
            for user, info in truth.items():
                fh.write(f"{user},{info.cluster},{info.trait}\n")
        separation = data.cross_cluster_disjointness(
            interactions, {u: info.cluster for u, info in truth.items()}
        )
        isolated = data.dsw_degree(interactions)
        click.echo(f"wrote {corpus_path}: {len(interactions)} events")
        click.echo(f"cluster separation (no items shared across clusters): "
                   f"{100 * separation:.1f}%")
        click.echo(f"fully isolated users (no items shared with anyone): "
                   f"{100 * isolated:.1f}%")
        cfg = {"kind": kind, "clusters": clusters, "users_per_cluster": upc,
               "items_per_cluster": ipc, "rating_density": density}

    _write_manifest(out_dir, "synth", seed, cfg, [], time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# ingest


@main.command()
@click.argument("input_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--column", "columns", multiple=True, metavar="LOGICAL=ACTUAL",
              help="map a logical column (user, item, timestamp, action, rating, "
                   "review, helpful) to the input header name; repeatable")
@common_options
@out_option()
def ingest(input_path, columns, seed, config_path, out_dir):
    """Normalize a raw interaction CSV and write it with its index maps."""
    t0 = time.perf_counter()
    r = _Resolver("ingest", config_path)
    seed = r.get("seed", seed, int) or 0
    schema = {}
    for pair in columns:
        if "=" not in pair:
            raise click.BadParameter(f"--column needs LOGICAL=ACTUAL, got {pair!r}")
        logical, actual = pair.split("=", 1)
        schema[logical.strip()] = actual.strip()

    try:
        interactions, errors = data.ingest_csv(input_path, schema or None)
    except (ValueError, OSError) as exc:
        raise click.ClickException(str(exc))
    for err in errors:
        click.echo(f"row {err.line}: {err.message}", err=True)
    if not interactions:
        raise click.ClickException(f"{input_path}: no valid interaction rows")

    ds = data.Dataset.from_interactions(interactions)
    os.makedirs(out_dir, exist_ok=True)
    data.write_csv(os.path.join(out_dir, "interactions.csv"), interactions)
    for fname, tokens in (("users.txt", ds.users), ("items.txt", ds.items)):
        with open(os.path.join(out_dir, fname), "w", encoding="utf-8") as fh:
            fh.write("\n".join(tokens) + "\n")
    avg_len = sum(len(s.items) for s in ds.sessions) / max(len(ds.sessions), 1)
    click.echo(
        f"users={len(ds.users)} items={len(ds.items)} "
        f"sessions={len(ds.sessions)} avg-session-len={avg_len:.2f}"
    )
    if errors:
        click.echo(f"skipped {len(errors)} malformed rows", err=True)
    _write_manifest(out_dir, "ingest", seed, {"columns": schema}, [input_path],
                    time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# profile


@main.command()
@click.argument("input_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--lexicon", "lexicon_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="category lexicon file [built-in demo]")
@click.option("--weights", "weights_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="trait weight file [built-in demo]")
@common_options
@out_option()
def profile(input_path, lexicon_path, weights_path, seed, config_path, out_dir):
    """Score five-trait profiles from the review text in a corpus."""
    t0 = time.perf_counter()
    r = _Resolver("profile", config_path)
    seed = r.get("seed", seed, int) or 0
    lexicon_path = r.get("lexicon", lexicon_path, str)
    weights_path = r.get("weights", weights_path, str)
    interactions = _read_corpus(input_path)
    try:
        lexicon = (personality.load_lexicon(lexicon_path)
                   if lexicon_path else personality.DEMO_LEXICON)
        weights = (personality.load_weights(weights_path)
                   if weights_path else personality.DEMO_WEIGHTS)
        profiles = personality.profile_all(interactions, lexicon, weights)
    except (ValueError, OSError) as exc:
        raise click.ClickException(str(exc))
    total_users = len({e.user for e in interactions})
    os.makedirs(out_dir, exist_ok=True)
    personality.profiles_to_csv(list(profiles.values()),
                                os.path.join(out_dir, "profiles.csv"))
    click.echo(f"profiled {len(profiles)} users "
               f"({total_users - len(profiles)} with no usable text)")
    inputs = [p for p in (input_path, lexicon_path, weights_path) if p]
    _write_manifest(out_dir, "profile", seed, {"lexicon": lexicon_path,
                    "weights": weights_path}, inputs, time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# train


def _build_model_config(model, p):
    """Per-model config from the shared flag namespace; None means default."""

    def fill(cls, mapping):
        return cls(**{k: v for k, v in mapping.items() if v is not None})

    if model == "das":
        return fill(das.DasConfig, {
            "k": p["k"], "lr": p["lr"], "epochs": p["epochs"], "batch": p["batch"],
            "lam_uv": p["lam_uv"], "lam_at": p["lam_at"], "seed": p["seed"],
        })
    if model == "can":
        mapping = {
            "window": p["window"], "dropout": p["dropout"], "lr": p["lr"],
            "epochs": p["epochs"], "batch": p["batch"], "lam_uv": p["lam_uv"],
            "lam_a": p["lam_at"], "seed": p["seed"],
            "tie_embeddings": p["tie_embeddings"],
        }
        if p["k"] is not None:  # one knob scales every width
            mapping.update(D=p["k"], D_u=p["k"], N_f=p["k"], D_p=p["k"], D_q=p["k"])
        return fill(can.CanConfig, mapping)
    if model == "bpr":
        return fill(baselines.BprConfig, {
            "d": p["k"], "lr": p["lr"], "l2": p["l2"], "epochs": p["epochs"],
            "seed": p["seed"],
        })
    if model == "apar":
        return fill(apar.AparConfig, {
            "d": p["k"], "alpha1": p["alpha1"], "alpha2": p["alpha2"],
            "lam": p["lam"], "beta": p["beta"], "gamma_override": p["gamma"],
            "max_iters": p["epochs"], "seed": p["seed"],
        })
    return None


@main.command()
@click.argument("input_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--model", type=click.Choice(MODELS), required=True)
@click.option("--k", type=int, default=None, help="latent dimension / model width")
@click.option("--lr", type=float, default=None, help="learning rate")
@click.option("--epochs", type=int, default=None,
              help="training epochs (iteration cap for apar)")
@click.option("--batch", type=int, default=None, help="minibatch size")
@click.option("--l2", type=float, default=None, help="bpr: L2 penalty")
@click.option("--lam-uv", type=float, default=None, help="embedding-table penalty")
@click.option("--lam-at", type=float, default=None, help="attention-layer penalty")
@click.option("--alpha1", type=float, default=None, help="apar: user-factor penalty")
@click.option("--alpha2", type=float, default=None, help="apar: item-factor penalty")
@click.option("--lam", type=float, default=None, help="apar: trait-similarity penalty")
@click.option("--beta", type=float, default=None, help="apar: blend-weight floor")
@click.option("--gamma", type=float, default=None, help="apar: global blend override")
@click.option("--window", type=int, default=None, help="can: conv window (odd)")
@click.option("--dropout", type=float, default=None, help="can: dropout rate")
@click.option("--tie-embeddings/--no-tie-embeddings", default=None,
              help="can: share the output table with the item embeddings")
@click.option("--split-policy", type=str, default=None,
              help="session split policy [random-80-20]")
@click.option("--test-fraction", type=float, default=None,
              help="rating models: held-out fraction [0.2]")
@common_options
@out_option()
def train(input_path, model, k, lr, epochs, batch, l2, lam_uv, lam_at, alpha1,
          alpha2, lam, beta, gamma, window, dropout, tie_embeddings, split_policy,
          test_fraction, seed, config_path, out_dir):
    """Fit a model to a corpus and write checkpoint, trace, and manifest."""
    t0 = time.perf_counter()
    r = _Resolver("train", config_path)
    p = {
        "seed": r.get("seed", seed, int) or 0,
        "k": r.get("k", k, int),
        "lr": r.get("lr", lr, float),
        "epochs": r.get("epochs", epochs, int),
        "batch": r.get("batch", batch, int),
        "l2": r.get("l2", l2, float),
        "lam_uv": r.get("lam_uv", lam_uv, float),
        "lam_at": r.get("lam_at", lam_at, float),
        "alpha1": r.get("alpha1", alpha1, float),
        "alpha2": r.get("alpha2", alpha2, float),
        "lam": r.get("lam", lam, float),
        "beta": r.get("beta", beta, float),
        "gamma": r.get("gamma", gamma, float),
        "window": r.get("window", window, int),
        "dropout": r.get("dropout", dropout, float),
        "tie_embeddings": r.get("tie_embeddings", tie_embeddings, bool),
    }
    policy = r.get("split_policy", split_policy, str) or "random-80-20"
    test_frac = r.get("test_fraction", test_fraction, float)
    test_frac = 0.2 if test_frac is None else test_frac
    seed = p["seed"]

    interactions = _read_corpus(input_path)
    cfg = _build_model_config(model, p)
    try:
        if model in RATING_MODELS:
            matrix, train_trips, _ = _rating_context(interactions, test_frac, seed)
            users, items = matrix.users, matrix.items
            if model == "usermean":
                state = baselines.user_mean(train_trips)
            elif model == "itemmean":
                state = baselines.item_mean(train_trips)
            else:
                profiles = personality.profile_all(
                    interactions, personality.DEMO_LEXICON, personality.DEMO_WEIGHTS
                )
                sim = personality.build_L(list(profiles.values()))
                L = _aligned_L(sim, matrix.users)
                kl_map = {
                    u: lvl.kl_normalized
                    for u, lvl in personality.knowledge_levels(interactions).items()
                }
                gamma_vec = apar.gamma_vector(
                    matrix.users, kl_map, cfg.beta, cfg.gamma_override
                )
                W = np.zeros((matrix.n_users, matrix.n_items))
                mask = np.zeros_like(W, dtype=bool)
                for u, i, rating in train_trips:
                    W[u, i] = rating
                    mask[u, i] = True
                state = apar.train_apar(W, mask, L, gamma_vec, cfg)
        else:
            ds, sp = _ranking_context(interactions, policy, seed)
            users, items = ds.users, ds.items
            if model == "das":
                state = das.train_das(sp, ds, cfg)
            elif model == "can":
                state = can.train_can(sp, ds, cfg)
            elif model == "bpr":
                pairs = baselines.pairs_from_sessions(
                    sp.train, ds.user_index, ds.item_index
                )
                state = baselines.train_bpr(pairs, ds.n_users, ds.n_items, cfg)
            elif model == "top":
                state = baselines.top_scorer(sp.train, ds.item_index, ds.n_items)
            else:  # random
                state = baselines.random_scorer(make_rng(seed), ds.n_items, seed=seed)
    except (ValueError, FloatingPointError) as exc:
        raise click.ClickException(f"training failed: {exc}")

    os.makedirs(out_dir, exist_ok=True)
    ck_path = os.path.join(out_dir, f"{model}.npz")
    checkpoint.save_checkpoint(ck_path, state, users, items)
    trace = getattr(state, "trace", [])
    with open(os.path.join(out_dir, f"{model}_trace.csv"), "w",
              encoding="utf-8") as fh:
        fh.write("epoch,value\n")
        for i, v in enumerate(trace):
            fh.write(f"{i},{v:.17g}\n")

    cfg_record = {"model": model, "split_policy": policy,
                  "test_fraction": test_frac}
    if cfg is not None:
        cfg_record.update(asdict(cfg))
    _write_manifest(out_dir, "train", seed, cfg_record, [input_path],
                    time.perf_counter() - t0)
    click.echo(f"wrote {ck_path}"
               + (f" (trace: {len(trace)} rows)" if trace else ""))


# ---------------------------------------------------------------------------
# eval


@main.command("eval")
@click.argument("checkpoint_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("input_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--cutoffs", type=str, default=None,
              help="comma-separated ranking cutoffs [5,10,20]")
@click.option("--k", type=int, default=None, help="single-cutoff shorthand")
@click.option("--metrics", "metrics_filter", type=str, default=None,
              help=f"only report these (comma-separated from "
                   f"{','.join(METRIC_NAMES)})")
@click.option("--include-context", is_flag=True, default=False,
              help="keep current-session items rankable instead of excluding them")
@click.option("--auc-negatives", type=click.Choice(["all", "sampled-100"]),
              default=None, help="[all]")
@click.option("--split-policy", type=str, default=None, help="[random-80-20]")
@click.option("--test-fraction", type=float, default=None, help="[0.2]")
@common_options
@out_option()
def eval_cmd(checkpoint_path, input_path, cutoffs, k, metrics_filter,
             include_context, auc_negatives, split_policy, test_fraction, seed,
             config_path, out_dir):
    """Evaluate a checkpoint on a corpus; writes report.csv and report.txt."""
    t0 = time.perf_counter()
    r = _Resolver("eval", config_path)
    seed = r.get("seed", seed, int) or 0
    cutoffs = r.get("cutoffs", cutoffs, str) or "5,10,20"
    k = r.get("k", k, int)
    policy = r.get("split_policy", split_policy, str) or "random-80-20"
    test_frac = r.get("test_fraction", test_fraction, float)
    test_frac = 0.2 if test_frac is None else test_frac
    negatives = r.get("auc_negatives", auc_negatives, str) or "all"
    metrics_filter = r.get("metrics", metrics_filter, str)

    try:
        cutoff_list = [int(c) for c in cutoffs.split(",") if c.strip()]
    except ValueError:
        raise click.BadParameter(f"--cutoffs must be integers, got {cutoffs!r}")
    if k is not None:
        cutoff_list = [k]
    wanted = None
    if metrics_filter:
        wanted = {m.strip() for m in metrics_filter.split(",") if m.strip()}
        unknown = wanted - set(METRIC_NAMES)
        if unknown:
            raise click.BadParameter(
                f"unknown metrics: {', '.join(sorted(unknown))}"
            )

    try:
        ck = checkpoint.load_checkpoint(checkpoint_path)
    except (ValueError, OSError) as exc:
        raise click.ClickException(str(exc))
    interactions = _read_corpus(input_path)

    try:
        if ck.kind in RATING_MODELS:
            matrix, _, test_trips = _rating_context(interactions, test_frac, seed)
            checkpoint.verify_compatible(ck, matrix.users, matrix.items)
            report = metrics.evaluate_ratings(ck.state, test_trips, ck.kind)
        else:
            ds = data.Dataset.from_interactions(interactions)
            checkpoint.verify_compatible(ck, ds.users, ds.items)
            sp = data.split(ds.sessions, policy, make_rng(seed))
            report = metrics.evaluate(
                ck.state, ds, sp, cutoff_list, ck.kind,
                exclude_context=not include_context,
                auc_negatives=negatives, rng=make_rng(seed),
            )
    except ValueError as exc:
        raise click.ClickException(str(exc))

    if wanted is not None:
        report.rows = [row for row in report.rows if row[0] in wanted]
    os.makedirs(out_dir, exist_ok=True)
    report.to_csv(os.path.join(out_dir, "report.csv"))
    text = report.to_text()
    with open(os.path.join(out_dir, "report.txt"), "w", encoding="utf-8") as fh:
        fh.write(text + "\n")
    click.echo(text)
    for failure in report.failures:
        click.echo(f"instance failed: {failure}", err=True)
    _write_manifest(
        out_dir, "eval", seed,
        {"cutoffs": cutoff_list, "metrics": sorted(wanted) if wanted else "all",
         "split_policy": policy, "test_fraction": test_frac,
         "auc_negatives": negatives, "exclude_context": not include_context},
        [checkpoint_path, input_path], time.perf_counter() - t0,
    )


# ---------------------------------------------------------------------------
# recommend


@main.command()
@click.argument("checkpoint_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("input_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--user", required=True, help="user token as it appears in the corpus")
@click.option("-n", "count", type=int, default=10, show_default=True,
              help="list length")
@common_options
@out_option(required=False)
def recommend(checkpoint_path, input_path, user, count, seed, config_path, out_dir):
    """Print the top-N items for one user as rank,item,score lines."""
    t0 = time.perf_counter()
    r = _Resolver("recommend", config_path)
    seed = r.get("seed", seed, int) or 0
    try:
        ck = checkpoint.load_checkpoint(checkpoint_path)
    except (ValueError, OSError) as exc:
        raise click.ClickException(str(exc))
    interactions = _read_corpus(input_path)

    try:
        if ck.kind in RATING_MODELS:
            matrix = data.RatingMatrix.from_interactions(interactions)
            checkpoint.verify_compatible(ck, matrix.users, matrix.items)
            items = matrix.items
            u_idx = matrix.user_index.get(user)
            if u_idx is None:
                raise click.ClickException(f"unknown user {user!r}")
            if ck.kind == "apar":
                scores = np.asarray(ck.state.score_items(u_idx, [], []))
            else:
                scores = np.array([
                    ck.state.predict_rating(u_idx, j) for j in range(len(items))
                ])
        else:
            ds = data.Dataset.from_interactions(interactions)
            checkpoint.verify_compatible(ck, ds.users, ds.items)
            items = ds.items
            u_idx = ds.user_index.get(user)
            if u_idx is None:
                raise click.ClickException(f"unknown user {user!r}")
            mine = sorted(
                (s for s in ds.sessions if s.user == user), key=lambda s: (s.day, s.t)
            )
            short = mine[-1].items if mine else []
            long_tokens = data.ordered_dedup(
                [it for s in mine[:-1] for it in s.items]
            )
            scores = np.asarray(ck.state.score_items(
                u_idx,
                [ds.item_index[t] for t in long_tokens],
                [ds.item_index[t] for t in short],
            ))
    except ValueError as exc:
        raise click.ClickException(str(exc))

    order = metrics.rank_items(scores)
    if count > len(order):
        click.echo(
            f"asked for {count} items but the catalog holds {len(order)}; "
            "returning all of them", err=True,
        )
        count = len(order)
    for rank, j in enumerate(order[:count], start=1):
        click.echo(f"{rank},{items[j]},{scores[j]:.17g}")
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        _write_manifest(out_dir, "recommend", seed, {"user": user, "n": count},
                        [checkpoint_path, input_path], time.perf_counter() - t0)


if __name__ == "__main__":
    main()
