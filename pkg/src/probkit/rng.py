"""Deterministic pseudo-random generation as explicit state threading.

The generator state is a single unsigned 64-bit word advanced by a linear
congruential step. A random computation (``Rand``) is a pure function from
state to ``(state, value)``; composing computations threads the state, and
nothing draws until ``run`` is applied to a concrete seed. Equal seeds give
equal results, always.
"""

from __future__ import annotations

import math
from typing import Callable, Generic, TypeVar

A = TypeVar("A")
B = TypeVar("B")

# Knuth's MMIX multiplier/increment, modulus 2**64.
LCG_MULTIPLIER = 6364136223846793005
LCG_INCREMENT = 1442695040888963407
_MASK64 = (1 << 64) - 1

# Generator state: an int in [0, 2**64). Plain ints keep the threading cheap.
GenState = int


def lcg_step(state: GenState) -> GenState:
    """Advance the generator one step."""
    return (LCG_MULTIPLIER * state + LCG_INCREMENT) & _MASK64


def to_unit_double(state: GenState) -> float:
    """Map a state word to [0, 1) using its top 53 bits."""
    return (state >> 11) * 2.0**-53


class Rand(Generic[A]):
    """A random computation: ``run`` maps a state to ``(new_state, value)``.

    Values compose with ``map`` and ``flat_map`` without touching any
    hidden global; the caller owns the seed.
    """

    __slots__ = ("run",)

    def __init__(self, run: Callable[[GenState], tuple[GenState, A]]):
        self.run = run

    def map(self, f: Callable[[A], B]) -> "Rand[B]":
        def step(state: GenState) -> tuple[GenState, B]:
            state1, a = self.run(state)
            return state1, f(a)

        return Rand(step)

    def flat_map(self, f: Callable[[A], "Rand[B]"]) -> "Rand[B]":
        def step(state: GenState) -> tuple[GenState, B]:
            state1, a = self.run(state)
            return f(a).run(state1)

        return Rand(step)


def pure(value: A) -> Rand[A]:
    """Lift a plain value; the state passes through untouched."""
    return Rand(lambda state: (state, value))


def _next_double(state: GenState) -> tuple[GenState, float]:
    state = lcg_step(state)
    return state, to_unit_double(state)


#: One uniform draw from [0, 1).
rand_double: Rand[float] = Rand(_next_double)


def rand_int(lo: int, hi: int) -> Rand[int]:
    """Uniform integer in [lo, hi), by scaling a unit draw."""
    if lo >= hi:
        raise ValueError(f"rand_int: empty range [{lo}, {hi})")
    return rand_double.map(lambda u: math.floor(u * (hi - lo) + lo))


#: Fair coin flip.
rand_bool: Rand[bool] = rand_double.map(lambda u: u > 0.5)


def box_muller(u1: float, u2: float) -> float:
    """One standard normal from two unit uniforms.

    Only the cosine branch is kept; the sine partner is discarded so that
    consumption stays at exactly two uniforms per normal.
    """
    return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)


def _next_std_normal(state: GenState) -> tuple[GenState, float]:
    state, u1 = _next_double(state)
    while u1 == 0.0:  # log(0) guard, redraw
        state, u1 = _next_double(state)
    state, u2 = _next_double(state)
    return state, box_muller(u1, u2)


#: Standard normal draw via Box-Muller.
std_normal: Rand[float] = Rand(_next_std_normal)


def chain_seed(seed: int, chain_index: int) -> GenState:
    """Seed for an indexed chain, spread far apart in the state space."""
    return (seed + chain_index * ((1 << 32) + 1)) & _MASK64
