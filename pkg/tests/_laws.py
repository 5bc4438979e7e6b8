"""Shared hypothesis suites for the monad laws.

Defined here (without ``test_`` prefixes) so both the unit tests and the
acceptance suite can run the same generators.
"""

from __future__ import annotations

from hypothesis import given, settings, strategies as st

from probkit import distributions as dists
from probkit import rng
from probkit.model import compile_model, pure as rv_pure

seeds = st.integers(min_value=0, max_value=(1 << 64) - 1)
values = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False)


def _k_double(x: float) -> rng.Rand:
    return rng.pure(x * 2.0)


def _k_offset_uniform(x: float) -> rng.Rand:
    return rng.rand_double.map(lambda u: u + x)


def _k_normal_shift(x: float) -> rng.Rand:
    return rng.std_normal.map(lambda z: z - x)


def _k_two_stage(x: float) -> rng.Rand:
    return rng.rand_double.flat_map(lambda u: rng.rand_int(0, 5).map(lambda k: u * k + x))


KLEISLI = [_k_double, _k_offset_uniform, _k_normal_shift, _k_two_stage]

BASE = [
    rng.rand_double,
    rng.std_normal,
    rng.pure(1.5),
    rng.rand_int(0, 11).map(float),
]


@settings(max_examples=200, deadline=None)
@given(seed=seeds, x=values, fi=st.integers(0, len(KLEISLI) - 1))
def rand_left_identity(seed, x, fi):
    f = KLEISLI[fi]
    assert rng.pure(x).flat_map(f).run(seed) == f(x).run(seed)


@settings(max_examples=200, deadline=None)
@given(seed=seeds, mi=st.integers(0, len(BASE) - 1))
def rand_right_identity(seed, mi):
    m = BASE[mi]
    assert m.flat_map(rng.pure).run(seed) == m.run(seed)


@settings(max_examples=200, deadline=None)
@given(
    seed=seeds,
    mi=st.integers(0, len(BASE) - 1),
    fi=st.integers(0, len(KLEISLI) - 1),
    gi=st.integers(0, len(KLEISLI) - 1),
)
def rand_associativity(seed, mi, fi, gi):
    m, f, g = BASE[mi], KLEISLI[fi], KLEISLI[gi]
    lhs = m.flat_map(f).flat_map(g)
    rhs = m.flat_map(lambda x: f(x).flat_map(g))
    assert lhs.run(seed) == rhs.run(seed)


def run_rand_law_suite():
    """Run all three Rand law suites (used by the acceptance tests)."""
    rand_left_identity()
    rand_right_identity()
    rand_associativity()


# Model-side laws. Equality of model fragments means: after compiling,
# same parameter count and names, and same joint log density at a fixed
# set of points in unconstrained space.

model_values = st.floats(min_value=-100.0, max_value=100.0, allow_nan=False)


def _rv_k_shift(a):
    return dists.Normal(a, 1.0).param("w")


def _rv_k_noise_scale(a):
    return dists.Exponential(1.5).param("r").flat_map(
        lambda r: dists.Normal(a, r).fit([0.4, -0.2]).map(lambda _: r)
    )


def _rv_k_scaled(a):
    return dists.Gamma(2.0, 1.0).param("g").map(lambda g: g * a)


RV_KLEISLI = [_rv_k_shift, _rv_k_noise_scale, _rv_k_scaled]

RV_BASE = [
    dists.Normal(0.0, 1.0).param("a"),
    dists.Beta(3.0, 3.0).param("b"),
    dists.Normal(0.0, 2.0).param("m").flat_map(
        lambda m: dists.Normal(m, 1.0).fit([0.3, 0.7]).map(lambda _: m)
    ),
]


def models_agree(lhs, rhs):
    m1 = compile_model(lhs)
    m2 = compile_model(rhs)
    assert m1.dim == m2.dim
    assert m1.names == m2.names
    state = 424242
    for _ in range(10):
        xs = []
        for _ in range(m1.dim):
            state, z = rng.std_normal.run(state)
            xs.append(z)
        d1 = m1.density(xs)
        d2 = m2.density(xs)
        assert abs(d1 - d2) <= 1e-12 * max(1.0, abs(d1), abs(d2))


@settings(max_examples=200, deadline=None)
@given(x=model_values, fi=st.integers(0, len(RV_KLEISLI) - 1))
def rv_left_identity(x, fi):
    f = RV_KLEISLI[fi]
    models_agree(rv_pure(x).flat_map(f), f(x))


@settings(max_examples=200, deadline=None)
@given(mi=st.integers(0, len(RV_BASE) - 1))
def rv_right_identity(mi):
    m = RV_BASE[mi]
    models_agree(m.flat_map(rv_pure), m)


@settings(max_examples=200, deadline=None)
@given(
    mi=st.integers(0, len(RV_BASE) - 1),
    fi=st.integers(0, len(RV_KLEISLI) - 1),
    gi=st.integers(0, len(RV_KLEISLI) - 1),
)
def rv_associativity(mi, fi, gi):
    m, f, g = RV_BASE[mi], RV_KLEISLI[fi], RV_KLEISLI[gi]
    lhs = m.flat_map(f).flat_map(g)
    rhs = m.flat_map(lambda x: f(x).flat_map(g))
    models_agree(lhs, rhs)


def run_rv_law_suite():
    """Run all three RandomVariable law suites (used by the acceptance tests)."""
    rv_left_identity()
    rv_right_identity()
    rv_associativity()
