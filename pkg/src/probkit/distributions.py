"""Distribution families as graph expressions plus matching samplers.

Each family does two jobs. ``log_pdf`` / ``log_pmf`` build the log-density
as an expression on a tape, so parameters may be either plain numbers or
expressions produced by other parts of a model. ``sample`` is the same
distribution as a ``Rand`` value, used for data simulation and for
drawing initial points; it needs concrete numeric parameters.

Supports describe the bijection between a distribution's domain and the
real line; the model layer uses them to reparameterize bounded
parameters.
"""

from __future__ import annotations

import math
from typing import Sequence

from . import rng
from .graph import Expr, Tape, maximum
from .rng import Rand

_TWO_PI = 2.0 * math.pi


class _Unbounded:
    name = "unbounded"

    def constrain(self, u: Expr) -> Expr:
        return u

    def log_jacobian(self, u: Expr) -> Expr | None:
        return None

    def constrain_value(self, u: float) -> float:
        return u

    def unconstrain_value(self, v: float) -> float:
        return v


class _Positive:
    name = "positive"

    def constrain(self, u: Expr) -> Expr:
        return u.exp()

    def log_jacobian(self, u: Expr) -> Expr | None:
        return u

    def constrain_value(self, u: float) -> float:
        try:
            return math.exp(u)
        except OverflowError:
            return math.inf

    def unconstrain_value(self, v: float) -> float:
        if v <= 0.0:
            raise ValueError(f"positive support needs v > 0, got {v}")
        return math.log(v)


class _UnitInterval:
    name = "unit_interval"

    def constrain(self, u: Expr) -> Expr:
        return u.sigmoid()

    def log_jacobian(self, u: Expr) -> Expr | None:
        return -(u.softplus() + (-u).softplus())

    def constrain_value(self, u: float) -> float:
        if u >= 0.0:
            return 1.0 / (1.0 + math.exp(-u))
        e = math.exp(u)
        return e / (1.0 + e)

    def unconstrain_value(self, v: float) -> float:
        if not 0.0 < v < 1.0:
            raise ValueError(f"unit-interval support needs 0 < v < 1, got {v}")
        return math.log(v / (1.0 - v))


UNBOUNDED = _Unbounded()
POSITIVE = _Positive()
UNIT_INTERVAL = _UnitInterval()


def _require_positive(name: str, v) -> None:
    if isinstance(v, (int, float)) and v <= 0.0:
        raise ValueError(f"{name} must be positive, got {v}")


def _resolve_tape(tape, *values) -> Tape:
    if tape is not None:
        return tape
    for v in values:
        if isinstance(v, Expr):
            return v.tape
    raise ValueError(
        "all arguments are plain numbers; pass tape= to build the expression"
    )


class Distribution:
    _params: tuple = ()

    def numeric_params(self, value_of=None) -> list[float]:
        """Parameter values as floats, resolving expressions via value_of."""
        out = []
        for p in self._params:
            if isinstance(p, Expr):
                if value_of is None:
                    raise ValueError(
                        f"{type(self).__name__} has expression parameters; "
                        "supply value_of to resolve them"
                    )
                out.append(float(value_of(p)))
            else:
                out.append(float(p))
        return out

    def _make_sampler(self, values: list[float]) -> Rand:
        raise NotImplementedError

    @property
    def sample(self) -> Rand:
        """The distribution as a random computation (numeric parameters only)."""
        return self._make_sampler(self.numeric_params())

    def fit(self, ys):
        """Observe data under this distribution, as a model step."""
        from .model import fit_rv

        return fit_rv(self, ys)


class ContinuousDist(Distribution):
    support = UNBOUNDED

    def log_pdf(self, y, tape: Tape | None = None) -> Expr:
        raise NotImplementedError

    def _log_term(self, y, tape):
        return self.log_pdf(y, tape)

    def param(self, name: str | None = None):
        """Use this distribution as a prior over a new model parameter."""
        from .model import param as _param

        return _param(self, name)


class DiscreteDist(Distribution):
    def log_pmf(self, k, tape: Tape | None = None) -> Expr:
        raise NotImplementedError

    def _log_term(self, y, tape):
        return self.log_pmf(y, tape)

    def param(self, name: str | None = None):
        raise TypeError(f"{type(self).__name__} is discrete; param needs a continuous prior")


def _check_obs_positive(dist_name: str, y) -> None:
    if isinstance(y, (int, float)) and y <= 0.0:
        raise ValueError(f"{dist_name} observation must be positive, got {y}")


def _check_obs_unit(dist_name: str, y) -> None:
    if isinstance(y, (int, float)) and not 0.0 < y < 1.0:
        raise ValueError(f"{dist_name} observation must lie in (0, 1), got {y}")


def _check_count(dist_name: str, k, upper=None) -> int:
    if isinstance(k, Expr):
        raise TypeError(f"{dist_name} observations must be plain integers")
    if not float(k).is_integer() or k < 0:
        raise ValueError(f"{dist_name} observation must be a non-negative integer, got {k}")
    k = int(k)
    if upper is not None and k > upper:
        raise ValueError(f"{dist_name} observation {k} exceeds the trial count {upper}")
    return k


class Normal(ContinuousDist):
    """Gaussian with mean mu and standard deviation sigma."""

    support = UNBOUNDED

    def __init__(self, mu, sigma):
        _require_positive("sigma", sigma)
        self.mu = mu
        self.sigma = sigma
        self._params = (mu, sigma)

    def log_pdf(self, y, tape=None) -> Expr:
        tape = _resolve_tape(tape, self.mu, self.sigma, y)
        mu = tape.lift(self.mu)
        sigma = tape.lift(self.sigma)
        y = tape.lift(y)
        two_var = 2.0 * (sigma * sigma)
        norm = -0.5 * (two_var * math.pi).log()
        diff = y - mu
        return norm - diff * diff / two_var

    def _make_sampler(self, values):
        mu, sigma = values
        _require_positive("sigma", sigma)
        return rng.std_normal.map(lambda z: mu + sigma * z)


class Exponential(ContinuousDist):
    """Exponential with the given rate; mean is 1/rate."""

    support = POSITIVE

    def __init__(self, rate):
        _require_positive("rate", rate)
        self.rate = rate
        self._params = (rate,)

    def log_pdf(self, y, tape=None) -> Expr:
        _check_obs_positive("Exponential", y)
        tape = _resolve_tape(tape, self.rate, y)
        rate = tape.lift(self.rate)
        y = tape.lift(y)
        return rate.log() - rate * y

    def _make_sampler(self, values):
        (rate,) = values
        _require_positive("rate", rate)
        # 1 - u is in (0, 1], so the log never sees zero
        return rng.rand_double.map(lambda u: -math.log1p(-u) / rate)


class Gamma(ContinuousDist):
    """Gamma in the shape/scale parameterization; mean is shape * scale."""

    support = POSITIVE

    def __init__(self, shape, scale):
        _require_positive("shape", shape)
        _require_positive("scale", scale)
        self.shape = shape
        self.scale = scale
        self._params = (shape, scale)

    def log_pdf(self, y, tape=None) -> Expr:
        _check_obs_positive("Gamma", y)
        tape = _resolve_tape(tape, self.shape, self.scale, y)
        k = tape.lift(self.shape)
        theta = tape.lift(self.scale)
        y = tape.lift(y)
        return (k - 1.0) * y.log() - y / theta - k * theta.log() - k.lgamma()

    def _make_sampler(self, values):
        shape, scale = values
        _require_positive("shape", shape)
        _require_positive("scale", scale)
        return Rand(lambda state: _gamma_draw(state, shape, scale))


class Beta(ContinuousDist):
    """Beta on (0, 1) with shape parameters a and b."""

    support = UNIT_INTERVAL

    def __init__(self, a, b):
        _require_positive("a", a)
        _require_positive("b", b)
        self.a = a
        self.b = b
        self._params = (a, b)

    def log_pdf(self, y, tape=None) -> Expr:
        _check_obs_unit("Beta", y)
        tape = _resolve_tape(tape, self.a, self.b, y)
        a = tape.lift(self.a)
        b = tape.lift(self.b)
        y = tape.lift(y)
        log_beta = a.lgamma() + b.lgamma() - (a + b).lgamma()
        return (a - 1.0) * y.log() + (b - 1.0) * (1.0 - y).log() - log_beta

    def _make_sampler(self, values):
        a, b = values

        def draw(state):
            state, x = _gamma_draw(state, a, 1.0)
            state, y = _gamma_draw(state, b, 1.0)
            return state, x / (x + y)

        return Rand(draw)


class Uniform01(ContinuousDist):
    """Uniform on the unit interval."""

    support = UNIT_INTERVAL

    def __init__(self):
        self._params = ()

    def log_pdf(self, y, tape=None) -> Expr:
        _check_obs_unit("Uniform01", y)
        tape = _resolve_tape(tape, y)
        return tape.constant(0.0)

    def _make_sampler(self, values):
        return rng.rand_double


class Binomial(DiscreteDist):
    """Number of successes in n independent trials with probability p."""

    def __init__(self, p, n: int):
        if not isinstance(n, int) or n < 0:
            raise ValueError(f"n must be a non-negative int, got {n}")
        if isinstance(p, (int, float)) and not 0.0 <= p <= 1.0:
            raise ValueError(f"p must lie in [0, 1], got {p}")
        self.p = p
        self.n = n
        self._params = (p,)

    def log_pmf(self, k, tape=None) -> Expr:
        k = _check_count("Binomial", k, upper=self.n)
        tape = _resolve_tape(tape, self.p)
        p = tape.lift(self.p)
        choose = math.lgamma(self.n + 1) - math.lgamma(k + 1) - math.lgamma(self.n - k + 1)
        term = tape.constant(choose)
        if k > 0:
            term = term + float(k) * p.log()
        if k < self.n:
            term = term + float(self.n - k) * (1.0 - p).log()
        return term

    def _make_sampler(self, values):
        (p,) = values
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"p must lie in [0, 1], got {p}")
        n = self.n

        def draw(state):
            hits = 0
            for _ in range(n):
                state, u = rng.rand_double.run(state)
                if u < p:
                    hits += 1
            return state, hits

        return Rand(draw)


class Poisson(DiscreteDist):
    """Poisson counts with the given mean."""

    def __init__(self, mean):
        _require_positive("mean", mean)
        self.mean = mean
        self._params = (mean,)

    def log_pmf(self, k, tape=None) -> Expr:
        k = _check_count("Poisson", k)
        tape = _resolve_tape(tape, self.mean)
        lam = tape.lift(self.mean)
        term = -lam - math.lgamma(k + 1)
        if k > 0:
            term = float(k) * lam.log() + term
        return term

    def _make_sampler(self, values):
        (lam,) = values
        _require_positive("mean", lam)
        if lam <= 10.0:
            return Rand(lambda state: _poisson_inversion(state, lam))
        return Rand(lambda state: _poisson_ptrs(state, lam))


class Mixture(ContinuousDist):
    """Weighted mixture of continuous components.

    The density is evaluated as a log-sum-exp with the running maximum
    subtracted, so a point far into one component's tail cannot zero out
    the whole sum.
    """

    def __init__(self, components: Sequence[tuple[ContinuousDist, object]]):
        components = list(components)
        if not components:
            raise ValueError("mixture needs at least one component")
        self.components = components
        weights = [w for _, w in components]
        numeric = [w for w in weights if isinstance(w, (int, float))]
        if len(numeric) == len(weights):
            if any(w <= 0 for w in numeric):
                raise ValueError("mixture weights must be positive")
            if abs(sum(numeric) - 1.0) > 1e-9:
                raise ValueError(f"mixture weights must sum to 1, got {sum(numeric)}")
        self._params = tuple(weights)

    @property
    def support(self):
        kinds = {type(c.support) for c, _ in self.components}
        if len(kinds) != 1:
            raise TypeError("mixture components have differing supports")
        return self.components[0][0].support

    def log_pdf(self, y, tape=None) -> Expr:
        exprs = [w for _, w in self.components if isinstance(w, Expr)]
        dist_exprs = [p for c, _ in self.components for p in c._params if isinstance(p, Expr)]
        tape = _resolve_tape(tape, y, *exprs, *dist_exprs)
        terms = []
        for comp, w in self.components:
            if isinstance(w, Expr):
                log_w = w.log()
            else:
                log_w = tape.constant(math.log(w))
            terms.append(log_w + comp.log_pdf(y, tape))
        peak = terms[0]
        for t in terms[1:]:
            peak = maximum(peak, t)
        total = (terms[0] - peak).exp()
        for t in terms[1:]:
            total = total + (t - peak).exp()
        return peak + total.log()

    def _make_sampler(self, values):
        weights = list(values)
        samplers = [c.sample for c, _ in self.components]
        cumulative = []
        acc = 0.0
        for w in weights:
            acc += w
            cumulative.append(acc)

        def draw(state):
            state, u = rng.rand_double.run(state)
            scaled = u * acc  # tolerate tiny drift from exact 1
            for edge, s in zip(cumulative, samplers):
                if scaled < edge:
                    return s.run(state)
            return samplers[-1].run(state)

        return Rand(draw)


def fit(d: Distribution, ys, tape: Tape | None = None) -> Expr:
    """Sum of log densities over the observations, in collection order."""
    if isinstance(ys, (int, float)):
        ys = [ys]
    ys = list(ys)
    if not ys:
        raise ValueError("fit needs at least one observation")
    total = d._log_term(ys[0], tape)
    for y in ys[1:]:
        total = total + d._log_term(y, tape if tape is not None else total.tape)
    return total


# sampler internals


def _gamma_draw(state, shape: float, scale: float):
    """Marsaglia-Tsang squeeze; shapes below one are boosted and rescaled."""
    if shape < 1.0:
        state, g = _gamma_draw(state, shape + 1.0, 1.0)
        state, u = rng.rand_double.run(state)
        while u == 0.0:
            state, u = rng.rand_double.run(state)
        return state, g * u ** (1.0 / shape) * scale
    d = shape - 1.0 / 3.0
    c = 1.0 / math.sqrt(9.0 * d)
    while True:
        state, z = rng.std_normal.run(state)
        t = 1.0 + c * z
        if t <= 0.0:
            continue
        v = t * t * t
        state, u = rng.rand_double.run(state)
        if u == 0.0:
            continue
        if math.log(u) < 0.5 * z * z + d - d * v + d * math.log(v):
            return state, d * v * scale


def _poisson_inversion(state, lam: float):
    """Product-of-uniforms inversion, fine for small means."""
    limit = math.exp(-lam)
    k = 0
    prod = 1.0
    while True:
        state, u = rng.rand_double.run(state)
        prod *= u
        if prod <= limit:
            return state, k
        k += 1


def _poisson_ptrs(state, lam: float):
    """Hormann's transformed rejection for larger means."""
    b = 0.931 + 2.53 * math.sqrt(lam)
    a = -0.059 + 0.02483 * b
    inv_alpha = 1.1239 + 1.1328 / (b - 3.4)
    v_r = 0.9277 - 3.6224 / (b - 2.0)
    log_lam = math.log(lam)
    while True:
        state, u1 = rng.rand_double.run(state)
        state, v = rng.rand_double.run(state)
        u = u1 - 0.5
        us = 0.5 - abs(u)
        if us <= 0.0:
            continue
        k = math.floor((2.0 * a / us + b) * u + lam + 0.43)
        if us >= 0.07 and v <= v_r:
            return state, int(k)
        if k < 0 or (us < 0.013 and v > us):
            continue
        cut = k * log_lam - lam - math.lgamma(k + 1.0)
        if math.log(v * inv_alpha / (a / (us * us) + b)) <= cut:
            return state, int(k)
