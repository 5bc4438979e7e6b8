"""Composable Bayesian models over the compute graph.

A ``RandomVariable`` is a deferred recipe: running it against a build
context creates parameter input nodes, accumulates log-density terms
(priors, Jacobians, likelihoods) on a fresh tape, and yields a value.
``flat_map`` sequences recipes, so models compose exactly like the
``Rand`` computations in ``rng``, except the effect is graph building
rather than state threading.

Bounded parameters are reparameterized onto the real line through their
prior's support (exp for positive, logistic for the unit interval), with
the log-Jacobian folded into the density. HMC then explores an
unconstrained space while reported draws stay on the natural scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Callable, Generic, Iterable, Sequence, TypeVar

import numpy as np

from . import distributions as dists
from .distributions import ContinuousDist, Distribution
from .graph import CompiledGraph, Expr, Tape
from .rng import GenState

A = TypeVar("A")
B = TypeVar("B")


@dataclass(frozen=True)
class ParamEntry:
    """One registered model parameter, in first-encounter order."""

    name: str
    slot: int  # index into the unconstrained vector
    node: int  # tape node of the input
    support: Any
    prior: ContinuousDist


class _BuildContext:
    def __init__(self):
        self.tape = Tape()
        self.terms: list[Expr] = []
        self.entries: list[ParamEntry] = []
        self._name_counts: dict[str, int] = {}

    def _unique_name(self, base: str) -> str:
        count = self._name_counts.get(base)
        if count is None:
            self._name_counts[base] = 0
            return base
        self._name_counts[base] = count + 1
        return f"{base}_{count + 1}"

    def register(self, prior: ContinuousDist, name: str | None) -> Expr:
        u = self.tape.input()
        support = prior.support
        value = support.constrain(u)
        self.entries.append(
            ParamEntry(
                name=self._unique_name(name if name is not None else f"p{len(self.entries)}"),
                slot=len(self.entries),
                node=u.i,
                support=support,
                prior=prior,
            )
        )
        self.terms.append(prior.log_pdf(value, tape=self.tape))
        jac = support.log_jacobian(u)
        if jac is not None:
            self.terms.append(jac)
        return value


class RandomVariable(Generic[A]):
    """A model fragment: builds graph state, yields a value."""

    __slots__ = ("_run",)

    def __init__(self, run: Callable[[_BuildContext], A]):
        self._run = run

    def map(self, f: Callable[[A], B]) -> "RandomVariable[B]":
        return RandomVariable(lambda ctx: f(self._run(ctx)))

    def flat_map(self, f: Callable[[A], "RandomVariable[B]"]) -> "RandomVariable[B]":
        return RandomVariable(lambda ctx: f(self._run(ctx))._run(ctx))

    def zip(self, other: "RandomVariable[B]") -> "RandomVariable[tuple[A, B]]":
        return self.flat_map(lambda a: other.map(lambda b: (a, b)))


def pure(value: A) -> RandomVariable[A]:
    return RandomVariable(lambda ctx: value)


def param(prior: ContinuousDist, name: str | None = None) -> RandomVariable[Expr]:
    """A new parameter with the given prior; yields its constrained value."""
    if not isinstance(prior, ContinuousDist):
        raise TypeError("param needs a continuous prior distribution")
    return RandomVariable(lambda ctx: ctx.register(prior, name))


def fit_rv(d: Distribution, ys) -> RandomVariable[None]:
    """Observe data under a distribution; adds the likelihood, yields nothing."""
    if isinstance(ys, (int, float)):
        ys = [ys]
    ys = list(ys)
    if not ys:
        raise ValueError("fit needs at least one observation")

    def run(ctx: _BuildContext) -> None:
        ctx.terms.append(dists.fit(d, ys, tape=ctx.tape))
        return None

    return RandomVariable(run)


def traverse(rvs: Iterable[RandomVariable[A]]) -> RandomVariable[list[A]]:
    """Sequence fragments left to right, collecting their values."""
    rvs = list(rvs)
    return RandomVariable(lambda ctx: [rv._run(ctx) for rv in rvs])


def dirichlet_via_gammas(n: int, shape: float, name: str = "theta_raw") -> RandomVariable[list[Expr]]:
    """Simplex weights as n normalized Gamma(shape, 1) parameters."""
    if n < 2:
        raise ValueError(f"need at least 2 weights, got {n}")
    gammas = traverse(dists.Gamma(shape, 1.0).param(f"{name}_{i}") for i in range(n))

    def normalize(raw: list[Expr]) -> list[Expr]:
        total = raw[0]
        for g in raw[1:]:
            total = total + g
        return [g / total for g in raw]

    return gammas.map(normalize)


@dataclass(frozen=True)
class Predictor:
    """Covariate-indexed family of distributions, e.g. x -> Normal(a+b*x, s)."""

    link: Callable[[Any], Distribution]

    def fit(self, data: Sequence[tuple[Any, Any]]) -> RandomVariable[None]:
        pairs = list(data)
        if not pairs:
            raise ValueError("predictor fit needs at least one (x, y) pair")

        def run(ctx: _BuildContext) -> None:
            for x, y in pairs:
                d = self.link(x)
                ctx.terms.append(d._log_term(y, ctx.tape))
            return None

        return RandomVariable(run)


def predictor(link: Callable[[Any], Distribution]) -> Predictor:
    return Predictor(link)


class CompiledModel:
    """A model frozen for inference.

    ``density``/``gradient`` act on the unconstrained parameter vector;
    ``to_constrained`` maps a vector back to named natural-scale values
    in registry order.
    """

    def __init__(self, value: Any, entries: list[ParamEntry], tape: Tape, graph: CompiledGraph):
        self.value = value
        self.entries = entries
        self.tape = tape
        self._graph = graph
        self.dim = len(entries)
        self.names = [e.name for e in entries]

    def density(self, x) -> float:
        return self._graph.density(x)

    def gradient(self, x) -> np.ndarray:
        return self._graph.gradient(x)

    def value_and_gradient(self, x) -> tuple[float, np.ndarray]:
        return self._graph.value_and_gradient(x)

    def to_constrained(self, x) -> dict[str, float]:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.dim,):
            raise ValueError(f"expected {self.dim} values, got shape {x.shape}")
        return {e.name: e.support.constrain_value(float(x[e.slot])) for e in self.entries}

    def prior_draw_unconstrained(self, state: GenState) -> tuple[GenState, np.ndarray]:
        """Ancestral draw from the priors, mapped to unconstrained space.

        Later parameters may have priors whose parameters depend on
        earlier ones, so each prior's parameters are evaluated against
        the draws made so far.
        """
        x = np.zeros(self.dim)
        for e in self.entries:
            values = e.prior.numeric_params(
                value_of=lambda expr: self.tape.value_of(expr, x)
            )
            state, v = e.prior._make_sampler(values).run(state)
            x[e.slot] = e.support.unconstrain_value(v)
        return state, x


def compile_model(rv: RandomVariable) -> CompiledModel:
    """Run the recipe on a fresh tape and freeze the joint log density."""
    ctx = _BuildContext()
    value = rv._run(ctx)
    if not ctx.entries:
        raise ValueError("model has no parameters")
    total = ctx.terms[0]
    for term in ctx.terms[1:]:
        total = total + term
    ctx.tape.set_output(total)
    return CompiledModel(value, ctx.entries, ctx.tape, ctx.tape.compile())
