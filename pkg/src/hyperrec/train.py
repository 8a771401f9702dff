"""Training engine: epoch loop, evaluation cadence, artifacts, sweeps.

An epoch is ceil(n_train / batch_size) sampled batches of batch_size
triplets; each batch performs one synchronous parameter update. The
validation split is scored every eval_every epochs (and at the final
epoch); the test metrics reported in the run summary come from the
best-validation parameters after a round trip through the embedding text
serialization, so re-evaluating the persisted checkpoint reproduces them
bit for bit.
"""

from __future__ import annotations

import io
import json
import math
import os
from dataclasses import dataclass
from typing import Any, Callable

import numpy as np

from .baselines import euclidean_triplet_grad, euclidean_triplet_loss, to_tangent
from .config import TrainConfig
from .data import (Dataset, TEST, VALIDATION, build_candidate_cache, build_dataset,
                   load_interactions, sample_triplets, save_candidates)
from .errors import ConfigError
from .evaluation import EvalResult, evaluate, format_metrics_line
from .model import (EmbeddingStore, InitConfig, Variant, dump_embeddings_text,
                    init_embeddings, load_embeddings, save_embeddings)
from .objective import LossConfig, TripletGrad, loss_and_grads
from .optimizer import OptimConfig, apply_batch

# Sub-stream tags so initialization, training noise, and candidate
# sampling never share a generator.
_TRAIN_STREAM = 101


@dataclass
class RunResult:
    summary: dict[str, Any]
    best_store: EmbeddingStore
    final_store: EmbeddingStore
    loss_rows: list[tuple[int, float, float, float]]
    metrics_lines: list[str]


def _loss_config(cfg: TrainConfig) -> LossConfig:
    return LossConfig(margin=cfg.margin, gamma=cfg.gamma, curvature=cfg.curvature,
                      variant=Variant.coerce(cfg.variant))


def _optim_config(cfg: TrainConfig) -> OptimConfig:
    return OptimConfig(learning_rate=cfg.learning_rate, curvature=cfg.curvature,
                       grad_clip=cfg.grad_clip,
                       use_metric_rescale=(cfg.optimizer == "rsgd"),
                       generalized_rescale=cfg.generalized_rescale)


def _apply_dropout(rows: np.ndarray, rate: float, rng: np.random.Generator
                   ) -> tuple[np.ndarray, np.ndarray]:
    mask = (rng.random(rows.shape) >= rate).astype(np.float64)
    return rows * mask, mask


def _batch_step(store: EmbeddingStore, ds: Dataset, batch_size: int,
                lcfg: LossConfig, ocfg: OptimConfig, rng: np.random.Generator,
                dropout: float) -> tuple[float, float]:
    """Sample one batch, update the store, return (hinge sum, distortion sum)."""
    users, pos, neg = sample_triplets(ds, batch_size, rng)
    u = store.user_vectors[users]
    p = store.item_vectors[pos]
    n = store.item_vectors[neg]
    variant = store.variant
    if variant is Variant.TANGENT:
        u, p, n = (to_tangent(x, store.curvature) for x in (u, p, n))
    masks = None
    if dropout > 0.0:
        u, mu = _apply_dropout(u, dropout, rng)
        p, mp = _apply_dropout(p, dropout, rng)
        n, mn = _apply_dropout(n, dropout, rng)
        masks = (mu, mp, mn)
    if variant is Variant.TANGENT:
        hinge = euclidean_triplet_loss(u, p, n, lcfg.margin)
        grads = euclidean_triplet_grad(u, p, n, lcfg.margin)
        dist_vals = np.zeros_like(hinge)
    else:
        hinge, dist_vals, grads = loss_and_grads(u, p, n, lcfg)
    if masks is not None:
        grads = TripletGrad(grads.g_user * masks[0], grads.g_pos * masks[1],
                            grads.g_neg * masks[2])
    apply_batch(store, users, pos, neg, grads, ocfg)
    return float(hinge.sum()), float(dist_vals.sum())


def fit(ds: Dataset, cfg: TrainConfig,
        val_cache: np.ndarray | None = None,
        test_cache: np.ndarray | None = None,
        progress: Callable[[str], None] | None = None) -> RunResult:
    """Train one model on a prebuilt dataset and return stores plus summary."""
    cfg.validate()
    variant = Variant.coerce(cfg.variant)
    init = InitConfig(dim=cfg.dim, beta=cfg.beta, seed=cfg.seed)
    store = init_embeddings(ds.n_users, ds.n_items, init, variant, cfg.curvature)
    if val_cache is None:
        val_cache = build_candidate_cache(ds, VALIDATION, cfg.n_negatives, cfg.seed)
    if test_cache is None:
        test_cache = build_candidate_cache(ds, TEST, cfg.n_negatives, cfg.seed)
    lcfg = _loss_config(cfg)
    ocfg = _optim_config(cfg)
    rng = np.random.default_rng([cfg.seed, _TRAIN_STREAM])
    batches = max(1, math.ceil(ds.n_train / cfg.batch_size))
    denom = batches * cfg.batch_size

    loss_rows: list[tuple[int, float, float, float]] = []
    metrics_lines: list[str] = []
    best_ndcg = -1.0
    best_epoch = 0
    best_store = store.copy()

    for epoch in range(1, cfg.epochs + 1):
        hinge_sum = 0.0
        dist_sum = 0.0
        for _ in range(batches):
            h, d = _batch_step(store, ds, cfg.batch_size, lcfg, ocfg, rng, cfg.dropout)
            hinge_sum += h
            dist_sum += d
        hinge_mean = hinge_sum / denom
        dist_mean = dist_sum / denom
        total_mean = hinge_mean + cfg.gamma * dist_mean
        loss_rows.append((epoch, total_mean, hinge_mean, dist_mean))
        if epoch % cfg.eval_every == 0 or epoch == cfg.epochs:
            val = evaluate(store, ds, VALIDATION, cfg.k, cfg.n_negatives, cfg.seed,
                           cache=val_cache)
            metrics_lines.append(format_metrics_line(epoch, val))
            if progress:
                progress(f"epoch {epoch}: loss {total_mean:.5f} "
                         f"val HR@{cfg.k} {val.hr_at_k:.5f} nDCG@{cfg.k} {val.ndcg_at_k:.5f}")
            if val.ndcg_at_k > best_ndcg:
                best_ndcg = val.ndcg_at_k
                best_epoch = epoch
                best_store = store.copy()
                test_now = evaluate(store, ds, TEST, cfg.k, cfg.n_negatives,
                                    cfg.seed, cache=test_cache)
                metrics_lines.append(format_metrics_line(epoch, test_now))

    # Round-trip the best parameters through the text serialization so the
    # summary matches a later evaluation of the persisted checkpoint exactly.
    text = dump_embeddings_text(best_store, ds.user_ids, ds.item_ids)
    persisted, _, _ = load_embeddings(io.StringIO(text))
    val_persisted = evaluate(persisted, ds, VALIDATION, cfg.k, cfg.n_negatives,
                             cfg.seed, cache=val_cache)
    test_persisted = evaluate(persisted, ds, TEST, cfg.k, cfg.n_negatives,
                              cfg.seed, cache=test_cache)

    summary = {
        "config": cfg.to_dict(),
        "dataset": {"n_users": ds.n_users, "n_items": ds.n_items, "n_train": ds.n_train},
        "best_epoch": best_epoch,
        "best_validation": {"hr": val_persisted.hr_at_k, "ndcg": val_persisted.ndcg_at_k,
                            "k": cfg.k},
        "test_at_best": {"hr": test_persisted.hr_at_k, "ndcg": test_persisted.ndcg_at_k,
                         "k": cfg.k},
        "final_losses": {"total": loss_rows[-1][1], "pull_push": loss_rows[-1][2],
                         "distortion": loss_rows[-1][3]},
    }
    return RunResult(summary=summary, best_store=best_store, final_store=store,
                     loss_rows=loss_rows, metrics_lines=metrics_lines)


def summary_json(summary: dict[str, Any]) -> str:
    return json.dumps(summary, sort_keys=True, indent=2) + "\n"


def run_train(cfg: TrainConfig, progress: Callable[[str], None] | None = None) -> RunResult:
    """Full training run with on-disk artifacts.

    Writes losses.tsv, metrics.tsv, candidate files, best.emb, final.emb,
    and run_summary.json into cfg.output_dir.
    """
    cfg.validate()
    if not cfg.input_path:
        raise ConfigError("input_path: required")
    if not os.path.isfile(cfg.input_path):
        raise ConfigError(f"input_path: no such file: {cfg.input_path}")
    if not cfg.output_dir:
        raise ConfigError("output_dir: required")
    os.makedirs(cfg.output_dir, exist_ok=True)

    interactions = load_interactions(cfg.input_path, cfg.delimiter, cfg.header)
    ds = build_dataset(interactions, cfg.min_interactions, cfg.k_core)
    val_cache = build_candidate_cache(ds, VALIDATION, cfg.n_negatives, cfg.seed)
    test_cache = build_candidate_cache(ds, TEST, cfg.n_negatives, cfg.seed)
    result = fit(ds, cfg, val_cache, test_cache, progress)

    out = cfg.output_dir
    with open(os.path.join(out, "losses.tsv"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write("# epoch\ttotal\tpull_push\tdistortion\n")
        for epoch, total, hinge, dist in result.loss_rows:
            fh.write(f"{epoch}\t{total:.6g}\t{hinge:.6g}\t{dist:.6g}\n")
    with open(os.path.join(out, "metrics.tsv"), "w", encoding="utf-8", newline="\n") as fh:
        for line in result.metrics_lines:
            fh.write(line + "\n")
    save_candidates(os.path.join(out, "candidates_validation.tsv"), ds, val_cache)
    save_candidates(os.path.join(out, "candidates_test.tsv"), ds, test_cache)
    save_embeddings(result.best_store, os.path.join(out, "best.emb"),
                    ds.user_ids, ds.item_ids)
    save_embeddings(result.final_store, os.path.join(out, "final.emb"),
                    ds.user_ids, ds.item_ids)
    with open(os.path.join(out, "run_summary.json"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(summary_json(result.summary))
    return result


def run_eval(checkpoint_path: str, cfg: TrainConfig, split: str) -> EvalResult:
    """Score a persisted checkpoint against a freshly rebuilt dataset.

    The dataset is rebuilt from cfg.input_path with the same filtering
    flags used during training; candidate lists derive from cfg.seed, so a
    matching seed reproduces training-time metrics exactly.
    """
    cfg.validate()
    if not os.path.isfile(cfg.input_path):
        raise ConfigError(f"input_path: no such file: {cfg.input_path}")
    interactions = load_interactions(cfg.input_path, cfg.delimiter, cfg.header)
    ds = build_dataset(interactions, cfg.min_interactions, cfg.k_core)
    store, user_ids, item_ids = load_embeddings(checkpoint_path)
    if store.n_users != ds.n_users or store.n_items != ds.n_items or store.dim != cfg.dim:
        raise ConfigError(
            f"checkpoint shape ({store.n_users} users x {store.n_items} items, dim "
            f"{store.dim}) does not match dataset ({ds.n_users} x {ds.n_items}), dim {cfg.dim}"
        )
    try:
        user_order = np.array([ds.user_index[u] for u in user_ids])
        item_order = np.array([ds.item_index[i] for i in item_ids])
    except KeyError as exc:
        raise ConfigError(f"checkpoint id {exc} not present in the rebuilt dataset") from None
    reordered = EmbeddingStore(
        user_vectors=store.user_vectors[np.argsort(user_order)],
        item_vectors=store.item_vectors[np.argsort(item_order)],
        dim=store.dim, curvature=store.curvature, variant=store.variant,
    )
    return evaluate(reordered, ds, split, cfg.k, cfg.n_negatives, cfg.seed)


# Parameters that run_sweep may vary, with their accepted aliases.
SWEEP_PARAMS = {
    "c": "curvature",
    "curvature": "curvature",
    "gamma": "gamma",
    "m": "margin",
    "margin": "margin",
    "lr": "learning_rate",
    "learning_rate": "learning_rate",
}


def run_sweep(cfg: TrainConfig, sweep_spec: dict[str, list[float]],
              repeats: int = 1, out_path: str | None = None,
              progress: Callable[[str], None] | None = None) -> list[dict[str, Any]]:
    """Grid sweep over one or two of {c, gamma, m, lr}.

    Every grid point trains on the shared dataset and candidate caches;
    with repeats > 1 each point averages over seeds cfg.seed .. cfg.seed +
    repeats - 1 and reports standard deviations. Failures are recorded in
    the row's status and the sweep continues.
    """
    cfg.validate()
    if not sweep_spec or len(sweep_spec) > 2:
        raise ConfigError("sweep: specify values for exactly one or two of c, gamma, m, lr")
    if repeats < 1:
        raise ConfigError(f"repeats: must be >= 1, got {repeats}")
    resolved: dict[str, list[float]] = {}
    for name, values in sweep_spec.items():
        if name not in SWEEP_PARAMS:
            raise ConfigError(f"sweep: unknown parameter {name!r}; "
                              f"choose from {sorted(set(SWEEP_PARAMS))}")
        field = SWEEP_PARAMS[name]
        if field in resolved:
            raise ConfigError(f"sweep: parameter {field!r} given twice")
        if not values:
            raise ConfigError(f"sweep: empty value list for {name!r}")
        resolved[field] = [float(v) for v in values]

    if not os.path.isfile(cfg.input_path):
        raise ConfigError(f"input_path: no such file: {cfg.input_path}")
    interactions = load_interactions(cfg.input_path, cfg.delimiter, cfg.header)
    ds = build_dataset(interactions, cfg.min_interactions, cfg.k_core)
    caches: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    def caches_for(seed: int) -> tuple[np.ndarray, np.ndarray]:
        if seed not in caches:
            caches[seed] = (build_candidate_cache(ds, VALIDATION, cfg.n_negatives, seed),
                            build_candidate_cache(ds, TEST, cfg.n_negatives, seed))
        return caches[seed]

    names = list(resolved)
    grids = [resolved[n] for n in names]
    points = [(a,) for a in grids[0]] if len(names) == 1 else \
        [(a, b) for a in grids[0] for b in grids[1]]

    rows: list[dict[str, Any]] = []
    for point in points:
        overrides = dict(zip(names, point))
        row: dict[str, Any] = dict(overrides)
        try:
            vals = {"best_val_ndcg": [], "test_ndcg": [], "test_hr": []}
            for r in range(repeats):
                seed = cfg.seed + r
                point_cfg = cfg.replace(seed=seed, **overrides).validate()
                val_cache, test_cache = caches_for(seed)
                result = fit(ds, point_cfg, val_cache, test_cache)
                vals["best_val_ndcg"].append(result.summary["best_validation"]["ndcg"])
                vals["test_ndcg"].append(result.summary["test_at_best"]["ndcg"])
                vals["test_hr"].append(result.summary["test_at_best"]["hr"])
            for key, seq in vals.items():
                row[key] = float(np.mean(seq))
                if repeats > 1:
                    row[key + "_std"] = float(np.std(seq, ddof=1))
            row["status"] = "ok"
        except Exception as exc:  # sweep keeps going past individual failures
            row["status"] = f"error: {exc}"
        rows.append(row)
        if progress:
            progress(f"sweep point {overrides}: {row['status']}")

    if out_path is not None:
        metric_cols = ["best_val_ndcg", "test_ndcg", "test_hr"]
        if repeats > 1:
            metric_cols += [m + "_std" for m in ["best_val_ndcg", "test_ndcg", "test_hr"]]
        header = names + metric_cols + ["status"]
        with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\t".join(header) + "\n")
            for row in rows:
                cells = [f"{row[n]:g}" for n in names]
                for m in metric_cols:
                    cells.append(f"{row[m]:.5f}" if m in row else "")
                cells.append(row["status"])
                fh.write("\t".join(cells) + "\n")
    return rows
