"""Trainers: contrastive divergence, perceptron-loss search training, exact
candidate-set gradients, and a per-label logistic-regression baseline.

All trainers run shuffled mini-batch SGD with early stopping on the
validation task error. Randomness is organized as per-case streams keyed by
(seed, epoch, dataset case index), so a case's chain does not depend on
which batch it lands in; duplicating cases in a batch leaves the averaged
gradient unchanged, and batches can be evaluated in parallel in principle.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, logsumexp

from .inference import cd_chain_batch, mean_field_batch, predict_marginal_modes, stochastic_search_batch
from .model import (
    CrbmParams,
    Gradients,
    conditional_over_set,
    conditioned_biases,
    free_energy,
    save_params,
    softplus,
)
from .spectral_hash import retrieve

MODEL_KINDS = ("cd", "percloss", "hashcrbm", "logreg")

# stream tags keeping init / shuffling / per-case sampling independent
_INIT_STREAM = 0
_SHUFFLE_STREAM = 1
_CASE_STREAM = 2


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float
    batch_size: int = 128
    max_epochs: int = 100
    gibbs_k: int = 1
    patience: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be non-negative")
        if self.batch_size < 1 or self.max_epochs < 1 or self.gibbs_k < 1:
            raise ValueError("batch_size, max_epochs and gibbs_k must be >= 1")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")


@dataclass
class TrainReport:
    train_loss: list = field(default_factory=list)   # per-epoch objective proxy
    valid_error: list = field(default_factory=list)  # per-epoch task error (%)
    best_epoch: int = -1
    stop_reason: str = ""

    @property
    def best_valid_error(self):
        return self.valid_error[self.best_epoch]


def case_stream(seed, epoch, case_index):
    """Fresh generator for one training case; a pure function of its key."""
    return np.random.default_rng([seed, _CASE_STREAM, epoch, case_index])


def init_params(n_visible, n_cond, n_hidden, rng, has_uv=True, has_uh=True, scale=0.01):
    """Small symmetric Gaussian weights, zero biases."""
    return CrbmParams(
        w_vh=rng.normal(0.0, scale, (n_visible, n_hidden)),
        w_uv=rng.normal(0.0, scale, (n_cond, n_visible)),
        w_uh=rng.normal(0.0, scale, (n_cond, n_hidden)),
        b_v=np.zeros(n_visible),
        b_h=np.zeros(n_hidden),
        has_uv=has_uv,
        has_uh=has_uh,
    )


def sgd_step(params, grad, learning_rate):
    """One gradient-descent step; inactive blocks are left untouched."""
    updates = {
        "w_vh": params.w_vh - learning_rate * grad.w_vh,
        "b_v": params.b_v - learning_rate * grad.b_v,
        "b_h": params.b_h - learning_rate * grad.b_h,
    }
    if params.has_uv:
        updates["w_uv"] = params.w_uv - learning_rate * grad.w_uv
    if params.has_uh:
        updates["w_uh"] = params.w_uh - learning_rate * grad.w_uh
    return params.replace(**updates)


def _check_batch(inputs, targets, params):
    inputs = np.asarray(inputs, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if inputs.ndim != 2 or targets.ndim != 2 or len(inputs) != len(targets):
        raise ValueError("batch inputs/targets must be aligned 2-D arrays")
    if len(inputs) == 0:
        raise ValueError("batch is empty")
    if targets.shape[1] != params.n_visible or inputs.shape[1] != params.n_cond:
        raise ValueError("batch dimensions do not match the parameters")
    return inputs, targets


def _hidden_field(inputs, params):
    if params.has_uh:
        return params.b_h + inputs @ params.w_uh
    return np.broadcast_to(params.b_h, (len(inputs), params.n_hidden))


def _contrast_grads(inputs, v_pos, v_neg, params):
    """Mean over the batch of grad F(v_pos) - grad F(v_neg)."""
    n = len(inputs)
    a_h = _hidden_field(inputs, params)
    s_pos = expit(a_h + v_pos @ params.w_vh)
    s_neg = expit(a_h + v_neg @ params.w_vh)
    g = Gradients.zeros_like(params)
    g.w_vh[...] = -(v_pos.T @ s_pos - v_neg.T @ s_neg) / n
    g.b_h[...] = -(s_pos - s_neg).mean(axis=0)
    g.b_v[...] = -(v_pos - v_neg).mean(axis=0)
    if params.has_uh:
        g.w_uh[...] = -(inputs.T @ (s_pos - s_neg)) / n
    if params.has_uv:
        g.w_uv[...] = -(inputs.T @ (v_pos - v_neg)) / n
    return g


def _cd_batch(inputs, targets, k, params, rngs):
    inputs, targets = _check_batch(inputs, targets, params)
    v_k = cd_chain_batch(targets, inputs, k, params, rngs).astype(np.float64)
    grads = _contrast_grads(inputs, targets, v_k, params)
    loss = float(np.mean(free_energy(targets, inputs, params) - free_energy(v_k, inputs, params)))
    return grads, loss


def cd_update(inputs, targets, k, params, rngs):
    """CD-k gradient: contrast the data with the k-step Gibbs reconstruction.

    ``rngs`` is one generator per case (or a single shared generator).
    """
    return _cd_batch(inputs, targets, k, params, rngs)[0]


def _percloss_batch(inputs, targets, k, params, rngs):
    inputs, targets = _check_batch(inputs, targets, params)
    v_hat, f_hat, _, _, _ = stochastic_search_batch(inputs, k, params, rngs)
    v_hat = v_hat.astype(np.float64)
    grads = _contrast_grads(inputs, targets, v_hat, params)
    loss = float(np.mean(free_energy(targets, inputs, params) - f_hat))
    return grads, loss


def percloss_update(inputs, targets, k, params, rngs):
    """Perceptron-loss gradient: contrast the data with the model's own
    stochastic-search prediction (treated as a constant)."""
    return _percloss_batch(inputs, targets, k, params, rngs)[0]


def _hash_crbm_batch(inputs, targets, index, params, ensure_target=True):
    inputs, targets = _check_batch(inputs, targets, params)
    total = Gradients.zeros_like(params)
    loss = 0.0
    for u, v in zip(inputs, targets):
        cands = retrieve(u, index)
        if ensure_target:
            cands = cands.union(v.astype(np.uint8))
        elif len(cands) == 0:
            raise ValueError("empty retrieval with guaranteed inclusion disabled")
        members = cands.members.astype(np.float64)
        f_members = free_energy(members, u, params)
        probs = conditional_over_set(u, cands, params)
        # hidden unit means for the target and for every candidate
        a_h = (params.b_h + u @ params.w_uh) if params.has_uh else params.b_h
        s_v = expit(a_h + v @ params.w_vh)
        s_members = expit(a_h + members @ params.w_vh)
        e_s = probs @ s_members
        e_v = probs @ members
        e_vs = members.T @ (probs[:, None] * s_members)
        total.w_vh -= np.outer(v, s_v) - e_vs
        total.b_h -= s_v - e_s
        total.b_v -= v - e_v
        if params.has_uh:
            total.w_uh -= np.outer(u, s_v - e_s)
        if params.has_uv:
            total.w_uv -= np.outer(u, v - e_v)
        loss += float(free_energy(v, u, params) + logsumexp(-f_members))
    n = len(inputs)
    total.scale(1.0 / n)
    return total, loss / n


def hash_crbm_update(inputs, targets, index, params, ensure_target=True):
    """Exact gradient of the candidate-restricted conditional likelihood.

    Per case the candidate set is retrieve(u) unioned with the true target
    (unless ``ensure_target`` is disabled, in which case an empty retrieval
    is an error). Deterministic.
    """
    return _hash_crbm_batch(inputs, targets, index, params, ensure_target)[0]


def _logreg_batch(inputs, targets, params):
    inputs, targets = _check_batch(inputs, targets, params)
    n = len(inputs)
    a_v, _ = conditioned_biases(inputs, params)
    a_v = np.asarray(a_v)
    sig = expit(a_v)
    g = Gradients.zeros_like(params)
    g.b_v[...] = (sig - targets).mean(axis=0)
    if params.has_uv:
        g.w_uv[...] = inputs.T @ (sig - targets) / n
    loss = float(np.mean((softplus(a_v) - targets * a_v).sum(axis=1)))
    return g, loss


def logreg_update(inputs, targets, params):
    """Cross-entropy gradient of the per-label logistic model sigma(b_v + u w_uv);
    touches only b_v and w_uv."""
    return _logreg_batch(inputs, targets, params)[0]


def cd_loss_metric(inputs, targets, k, params, rngs):
    """Diagnostic only: mean F(v, u) - F(v_k, u). Small values do not imply
    good predictions, which is exactly why it is never optimized directly."""
    return _cd_batch(inputs, targets, k, params, rngs)[1]


def logistic_predict(inputs, params):
    """Threshold the logistic component sigma(b_v + u w_uv) at 0.5 (ties -> 1)."""
    a_v, _ = conditioned_biases(np.atleast_2d(np.asarray(inputs, dtype=np.float64)), params)
    return (expit(np.asarray(a_v)) >= 0.5).astype(np.uint8)


def predict_for_kind(model_kind, params, inputs, k, index=None, chunk=256):
    """The deterministic test-time predictor that matches each trainer.

    cd/percloss use mean-field; hashcrbm uses candidate marginal modes with a
    logistic fallback on empty retrievals; logreg thresholds its logistic
    component.
    """
    inputs = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
    if model_kind == "logreg":
        return logistic_predict(inputs, params)
    if model_kind in ("cd", "percloss"):
        parts = []
        for lo in range(0, len(inputs), chunk):
            bits, _, _, _ = mean_field_batch(inputs[lo:lo + chunk], k, params)
            parts.append(bits)
        return np.concatenate(parts, axis=0)
    if model_kind == "hashcrbm":
        if index is None:
            raise ValueError("hashcrbm prediction needs a spectral-hash index")
        out = np.empty((len(inputs), params.n_visible), dtype=np.uint8)
        for i, u in enumerate(inputs):
            cands = retrieve(u, index)
            if len(cands) == 0:
                out[i] = logistic_predict(u[None, :], params)[0]
            else:
                out[i] = predict_marginal_modes(u, cands, params)
        return out
    raise ValueError(f"unknown model kind {model_kind!r}")


def task_error_percent(predictions, targets):
    """Mean per-bit disagreement in percent (per-label or per-pixel error)."""
    predictions = np.asarray(predictions)
    targets = np.asarray(targets)
    return float(100.0 * np.mean(predictions != targets))


def train(model_kind, train_pairs, valid_pairs, config, n_hidden=64,
          index=None, has_uv=True, has_uh=True):
    """Mini-batch SGD with early stopping on validation task error.

    ``train_pairs`` / ``valid_pairs`` are (inputs, targets) array pairs.
    Returns (best parameters, TrainReport); the best epoch is the earliest
    one attaining the minimum validation error, and training stops after
    ``config.patience`` consecutive epochs without improvement.
    """
    if model_kind not in MODEL_KINDS:
        raise ValueError(f"unknown model kind {model_kind!r}")
    if model_kind == "hashcrbm" and index is None:
        raise ValueError("hashcrbm training needs a fitted spectral-hash index")
    tr_inputs = np.asarray(train_pairs[0], dtype=np.float64)
    tr_targets = np.asarray(train_pairs[1], dtype=np.float64)
    va_inputs = np.asarray(valid_pairs[0], dtype=np.float64)
    va_targets = np.asarray(valid_pairs[1], dtype=np.uint8)
    if len(tr_inputs) == 0:
        raise ValueError("training set is empty")
    n_cases = len(tr_inputs)
    nv, nu = tr_targets.shape[1], tr_inputs.shape[1]
    rng_init = np.random.default_rng([config.seed, _INIT_STREAM])
    params = init_params(nv, nu, 0 if model_kind == "logreg" else n_hidden,
                         rng_init, has_uv=has_uv, has_uh=has_uh)

    report = TrainReport()
    best_params = params
    best_error = np.inf
    stale = 0
    for epoch in range(config.max_epochs):
        order = np.random.default_rng([config.seed, _SHUFFLE_STREAM, epoch]).permutation(n_cases)
        epoch_loss = 0.0
        for lo in range(0, n_cases, config.batch_size):
            cases = order[lo:lo + config.batch_size]
            b_in, b_tg = tr_inputs[cases], tr_targets[cases]
            if model_kind == "cd":
                rngs = [case_stream(config.seed, epoch, int(c)) for c in cases]
                grads, loss = _cd_batch(b_in, b_tg, config.gibbs_k, params, rngs)
            elif model_kind == "percloss":
                rngs = [case_stream(config.seed, epoch, int(c)) for c in cases]
                grads, loss = _percloss_batch(b_in, b_tg, config.gibbs_k, params, rngs)
            elif model_kind == "hashcrbm":
                grads, loss = _hash_crbm_batch(b_in, b_tg, index, params)
            else:
                grads, loss = _logreg_batch(b_in, b_tg, params)
            params = sgd_step(params, grads, config.learning_rate)
            epoch_loss += loss * len(cases)
        report.train_loss.append(epoch_loss / n_cases)
        preds = predict_for_kind(model_kind, params, va_inputs, config.gibbs_k, index=index)
        err = task_error_percent(preds, va_targets)
        report.valid_error.append(err)
        if err < best_error:
            best_error = err
            best_params = params
            report.best_epoch = epoch
            stale = 0
        else:
            stale += 1
            if stale >= config.patience:
                report.stop_reason = "early_stop"
                break
    if not report.stop_reason:
        report.stop_reason = "max_epochs"
    return best_params, report


def save_checkpoint(path, params, meta):
    """Binary parameters plus a line-oriented key=value sidecar at <path>.meta."""
    save_params(path, params)
    lines = []
    for key, value in meta.items():
        if isinstance(value, (list, tuple, np.ndarray)):
            value = ",".join(repr(float(x)) for x in value)
        lines.append(f"{key}={value}")
    with open(f"{path}.meta", "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_checkpoint(path):
    """Returns (params, meta dict of raw strings)."""
    from .model import load_params

    params = load_params(path)
    meta = {}
    with open(f"{path}.meta", "r", encoding="utf-8") as fh:
        for line in fh.read().splitlines():
            if line.strip():
                key, _, value = line.partition("=")
                meta[key] = value
    return params, meta


def report_meta(model_kind, config, report, **extra):
    """Flatten run configuration and report into a sidecar-ready mapping."""
    meta = {
        "model": model_kind,
        "learning_rate": repr(config.learning_rate),
        "batch_size": config.batch_size,
        "max_epochs": config.max_epochs,
        "gibbs_k": config.gibbs_k,
        "patience": config.patience,
        "seed": config.seed,
        "train_loss": report.train_loss,
        "valid_error": report.valid_error,
        "best_epoch": report.best_epoch,
        "stop_reason": report.stop_reason,
    }
    meta.update(extra)
    return meta
