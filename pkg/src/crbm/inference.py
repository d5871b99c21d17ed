"""Sampling and deterministic inference for conditional RBMs.

Single-case operations take a numpy Generator and are reproducible from the
seed; batched variants take one generator per case (or a single shared one)
and consume randomness per case in exactly the same order as the scalar
path, so a batch of one is bit-identical to the scalar call.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .model import (
    CandidateSet,
    conditional_over_set,
    conditioned_biases,
    free_energy,
    hidden_probs,
    softplus,
    visible_probs,
)


@dataclass
class PredictionTrace:
    """Visible iterates of a prediction run with their free energies.

    ``chosen_index`` is the argmin of ``free_energies`` (lowest index on
    ties); ``iterates[chosen_index]`` is the configuration the prediction
    was derived from.
    """

    iterates: np.ndarray       # (k, n_visible) float64
    free_energies: np.ndarray  # (k,)
    chosen_index: int


def _require_steps(k):
    if k < 1:
        raise ValueError("number of steps k must be >= 1")


def _rng_list(rngs, n_cases):
    if isinstance(rngs, np.random.Generator):
        return [rngs] * n_cases
    rngs = list(rngs)
    if len(rngs) != n_cases:
        raise ValueError(f"got {len(rngs)} generators for {n_cases} cases")
    return rngs


def gibbs_step(v, u, params, rng):
    """One block Gibbs update: sample h from (v, u), then v' from (h, u)."""
    ph = hidden_probs(v, u, params)
    h = (rng.random(params.n_hidden) < ph).astype(np.uint8)
    pv = visible_probs(h, u, params)
    v_new = (rng.random(params.n_visible) < pv).astype(np.uint8)
    return v_new, h


def cd_chain_batch(v0, inputs, k, params, rngs):
    """Run k Gibbs rounds from the data for every case; return the final visibles.

    ``v0`` is (B, nv) binary, ``inputs`` (B, nu). Randomness is drawn per
    case, h-block then v-block within each round.
    """
    _require_steps(k)
    v0 = np.asarray(v0, dtype=np.float64)
    inputs = np.asarray(inputs, dtype=np.float64)
    n_cases = v0.shape[0]
    rngs = _rng_list(rngs, n_cases)
    nh, nv = params.n_hidden, params.n_visible
    a_v, a_h = conditioned_biases(inputs, params)
    v = v0
    for t in range(k):
        rand_h = np.empty((n_cases, nh))
        rand_v = np.empty((n_cases, nv))
        for i, g in enumerate(rngs):
            rand_h[i] = g.random(nh)
            rand_v[i] = g.random(nv)
        h = (rand_h < expit(a_h + v @ params.w_vh)).astype(np.float64)
        v = (rand_v < expit(a_v + h @ params.w_vh.T)).astype(np.float64)
    return v.astype(np.uint8)


def cd_negative_sample(v, u, k, params, rng):
    """The visible state after a k-step Gibbs chain started at the data v."""
    v_k = cd_chain_batch(np.atleast_2d(np.asarray(v)), np.atleast_2d(np.asarray(u, dtype=np.float64)),
                         k, params, [rng])
    return v_k[0]


def _search_init(inputs, a_v, params, rngs, sample):
    """Initial visible configuration for the search/mean-field procedures.

    With an active u->v block this is the logistic-regression probabilities
    sigma(b_v + u W_uv), used as real values; without it, fair coins when
    ``sample`` else the constant 0.5 vector.
    """
    n_cases, nv = inputs.shape[0], params.n_visible
    if params.has_uv:
        return expit(np.asarray(a_v))
    if sample:
        draws = np.empty((n_cases, nv))
        for i, g in enumerate(rngs):
            draws[i] = g.random(nv)
        return (draws < 0.5).astype(np.float64)
    return np.full((n_cases, nv), 0.5)


def stochastic_search_batch(inputs, k, params, rngs):
    """Gibbs-based search for low free-energy outputs, batched over cases.

    Returns (chosen bits (B, nv) uint8, chosen free energies (B,),
    iterates (k, B, nv) uint8, free energies (k, B), chosen index (B,)).
    The initial configuration seeds the chain but is never a candidate.
    """
    _require_steps(k)
    inputs = np.asarray(inputs, dtype=np.float64)
    n_cases = inputs.shape[0]
    rngs = _rng_list(rngs, n_cases)
    nh, nv = params.n_hidden, params.n_visible
    a_v, a_h = conditioned_biases(inputs, params)
    v = _search_init(inputs, a_v, params, rngs, sample=True)
    act = a_h + v @ params.w_vh
    iters = np.empty((k, n_cases, nv), dtype=np.uint8)
    energies = np.empty((k, n_cases))
    for t in range(k):
        rand_h = np.empty((n_cases, nh))
        rand_v = np.empty((n_cases, nv))
        for i, g in enumerate(rngs):
            rand_h[i] = g.random(nh)
            rand_v[i] = g.random(nv)
        h = (rand_h < expit(act)).astype(np.float64)
        v = (rand_v < expit(a_v + h @ params.w_vh.T)).astype(np.float64)
        act = a_h + v @ params.w_vh
        iters[t] = v.astype(np.uint8)
        energies[t] = -softplus(act).sum(axis=-1) - (v * np.asarray(a_v)).sum(axis=-1)
    chosen = energies.argmin(axis=0)
    cols = np.arange(n_cases)
    return iters[chosen, cols], energies[chosen, cols], iters, energies, chosen


def stochastic_search_predict(u, k, params, rng):
    """Predict by keeping the lowest-free-energy state seen along a Gibbs run."""
    bits, _, iters, energies, chosen = stochastic_search_batch(
        np.atleast_2d(np.asarray(u, dtype=np.float64)), k, params, [rng]
    )
    trace = PredictionTrace(
        iterates=iters[:, 0].astype(np.float64),
        free_energies=energies[:, 0].copy(),
        chosen_index=int(chosen[0]),
    )
    return bits[0], trace


def mean_field_batch(inputs, k, params):
    """Deterministic mean-field analogue of the stochastic search, batched.

    Returns (predicted bits (B, nv) uint8, iterates (k, B, nv) float64,
    free energies (k, B), chosen index (B,)). The best real-valued iterate
    is thresholded at 0.5 (exact ties predict 1).
    """
    _require_steps(k)
    inputs = np.asarray(inputs, dtype=np.float64)
    n_cases, nv = inputs.shape[0], params.n_visible
    a_v, a_h = conditioned_biases(inputs, params)
    mu_v = _search_init(inputs, a_v, params, rngs=None, sample=False)
    act = a_h + mu_v @ params.w_vh
    iters = np.empty((k, n_cases, nv))
    energies = np.empty((k, n_cases))
    for t in range(k):
        mu_h = expit(act)
        mu_v = expit(np.asarray(a_v) + mu_h @ params.w_vh.T)
        act = a_h + mu_v @ params.w_vh
        iters[t] = mu_v
        energies[t] = -softplus(act).sum(axis=-1) - (mu_v * np.asarray(a_v)).sum(axis=-1)
    chosen = energies.argmin(axis=0)
    cols = np.arange(n_cases)
    bits = (iters[chosen, cols] >= 0.5).astype(np.uint8)
    return bits, iters, energies, chosen


def mean_field_predict(u, k, params):
    """Deterministic prediction from k rounds of mean-field updates."""
    bits, iters, energies, chosen = mean_field_batch(
        np.atleast_2d(np.asarray(u, dtype=np.float64)), k, params
    )
    trace = PredictionTrace(
        iterates=iters[:, 0].copy(),
        free_energies=energies[:, 0].copy(),
        chosen_index=int(chosen[0]),
    )
    return bits[0], trace


def predict_global_mode(u, candidates, params):
    """The candidate with the smallest free energy (canonical order on ties)."""
    if len(candidates) == 0:
        raise ValueError("candidate set is empty")
    f = free_energy(candidates.members.astype(np.float64), u, params)
    return candidates.members[int(np.argmin(f))].copy()


def predict_marginal_modes(u, candidates, params):
    """Per-coordinate modes of the candidate-restricted conditional.

    Coordinate i is 1 iff the restricted marginal p(v_i = 1 | u) is >= 0.5;
    the result need not be a member of the candidate set.
    """
    probs = conditional_over_set(u, candidates, params)
    marginals = probs @ candidates.members.astype(np.float64)
    return (marginals >= 0.5).astype(np.uint8)
