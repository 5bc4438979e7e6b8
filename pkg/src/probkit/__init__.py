"""Monadic probabilistic modeling with compiled autodiff and HMC inference.

The pieces compose bottom-up: a splittable linear-congruential RNG
(`probkit.rng`), dual-number forward differentiation (`probkit.forward`),
a taped reverse-mode graph compiled to fast kernels (`probkit.graph`),
distributions with support transforms (`probkit.distributions`), a
random-variable monad that builds log-density graphs (`probkit.model`),
Hamiltonian Monte Carlo with dual-averaging warmup (`probkit.hmc`), and
chain diagnostics (`probkit.diagnostics`). `probkit.cli` wires the
example models to a command-line interface.
"""

from . import distributions
from .diagnostics import (
    ChainSummary,
    DegenerateSeriesError,
    ParamSummary,
    autocorrelation,
    effective_sample_size,
    histogram,
    summarize,
)
from .forward import Dual, grad_forward
from .graph import CompiledGraph, Expr, GraphDomainError, Tape
from .hmc import Chain, HmcConfig, InitializationError, hmc_step, leapfrog_step, sample
from .model import (
    CompiledModel,
    RandomVariable,
    compile_model,
    dirichlet_via_gammas,
    fit_rv,
    param,
    predictor,
    pure,
    traverse,
)
from .rng import GenState, Rand, chain_seed, lcg_step, rand_double, std_normal

__all__ = [
    "Chain",
    "ChainSummary",
    "CompiledGraph",
    "CompiledModel",
    "DegenerateSeriesError",
    "Dual",
    "Expr",
    "GenState",
    "GraphDomainError",
    "HmcConfig",
    "InitializationError",
    "ParamSummary",
    "Rand",
    "RandomVariable",
    "Tape",
    "autocorrelation",
    "chain_seed",
    "compile_model",
    "dirichlet_via_gammas",
    "distributions",
    "effective_sample_size",
    "fit_rv",
    "grad_forward",
    "histogram",
    "hmc_step",
    "lcg_step",
    "leapfrog_step",
    "param",
    "pure",
    "rand_double",
    "sample",
    "std_normal",
    "summarize",
]

__version__ = "0.1.0"
