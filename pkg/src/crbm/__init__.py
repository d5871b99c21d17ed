"""Conditional restricted Boltzmann machines for structured output prediction.

Provides the CRBM energy model, Gibbs/mean-field inference, three trainers
(contrastive divergence, perceptron-loss training with stochastic search,
and exact-gradient training over spectral-hash candidate sets), plus data
pipelines and a CLI harness for multi-label and image-denoising experiments.
"""

from .model import (
    CandidateSet,
    CrbmParams,
    Gradients,
    all_bit_vectors,
    brute_force_conditional,
    conditional_over_set,
    energy,
    free_energy,
    free_energy_grad,
    hidden_probs,
    load_params,
    save_params,
    visible_probs,
)

__all__ = [
    "CandidateSet",
    "CrbmParams",
    "Gradients",
    "all_bit_vectors",
    "brute_force_conditional",
    "conditional_over_set",
    "energy",
    "free_energy",
    "free_energy_grad",
    "hidden_probs",
    "load_params",
    "save_params",
    "visible_probs",
]

__version__ = "0.1.0"
