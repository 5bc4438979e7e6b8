"""Expression corpus for cross-checking AD modes against each other and
against central finite differences.

Every function takes a list of scalar-like values supporting the operator
protocol plus .exp/.log/.sin/.cos/.sqrt methods, so the same lambdas run on
Dual numbers, graph expressions, and the plain-float Box below.
"""

from __future__ import annotations

import math


class Box:
    """Float carrier with the Dual/Expr method surface, for oracle evaluation."""

    __slots__ = ("v",)

    def __init__(self, v):
        self.v = float(v)

    @staticmethod
    def _of(x):
        return x if isinstance(x, Box) else Box(x)

    def __add__(self, o):
        return Box(self.v + Box._of(o).v)

    __radd__ = __add__

    def __sub__(self, o):
        return Box(self.v - Box._of(o).v)

    def __rsub__(self, o):
        return Box(Box._of(o).v - self.v)

    def __mul__(self, o):
        return Box(self.v * Box._of(o).v)

    __rmul__ = __mul__

    def __truediv__(self, o):
        return Box(self.v / Box._of(o).v)

    def __rtruediv__(self, o):
        return Box(Box._of(o).v / self.v)

    def __neg__(self):
        return Box(-self.v)

    def __pow__(self, k):
        return Box(math.pow(self.v, k))

    def exp(self):
        return Box(math.exp(self.v))

    def log(self):
        return Box(math.log(self.v))

    def sin(self):
        return Box(math.sin(self.v))

    def cos(self):
        return Box(math.cos(self.v))

    def sqrt(self):
        return Box(math.sqrt(self.v))


# (name, arity, fn, per-variable domains). Domains keep values and gradients
# well scaled so the finite-difference comparison stays meaningful.
CORPUS = [
    ("quadratic", 1, lambda v: v[0] * v[0] + 2 * v[0] + 5, [(-3.0, 3.0)]),
    ("prod_plus_square", 2, lambda v: v[0] * v[1] + v[0] * v[0], [(-2.0, 2.0), (-2.0, 2.0)]),
    ("rational", 2, lambda v: (v[0] + 2 * v[1]) / (v[0] * v[1]), [(0.5, 3.0), (0.5, 3.0)]),
    ("exp_sum", 2, lambda v: v[0].exp() + (-v[1]).exp(), [(-1.5, 1.5), (-1.5, 1.5)]),
    ("log_scale", 2, lambda v: v[0].log() * v[1], [(0.3, 4.0), (-2.0, 2.0)]),
    ("trig_mix", 2, lambda v: v[0].sin() * v[1].cos() + v[1].sin(), [(-2.0, 2.0), (-2.0, 2.0)]),
    ("exp_of_poly", 1, lambda v: (v[0].sin() + v[0] * v[0]).exp(), [(-1.2, 1.2)]),
    ("radius", 2, lambda v: (v[0] * v[0] + v[1] * v[1]).sqrt(), [(0.5, 2.5), (0.5, 2.5)]),
    ("frac_power", 2, lambda v: v[0] ** 1.7 + v[1], [(0.2, 3.0), (-1.0, 1.0)]),
    ("int_powers", 1, lambda v: v[0] ** 3 - 4 * v[0] ** -2, [(0.4, 2.5)]),
    ("damped", 2, lambda v: v[0] / (1 + v[1] * v[1]), [(-3.0, 3.0), (-2.0, 2.0)]),
    ("logistic", 1, lambda v: 1 / (1 + (-v[0]).exp()), [(-4.0, 4.0)]),
    ("gauss_kernel", 2, lambda v: (-((v[0] - v[1]) ** 2) / 2).exp(), [(-2.0, 2.0), (-2.0, 2.0)]),
    ("soft_quad", 1, lambda v: (1 + v[0] * v[0]).log(), [(-3.0, 3.0)]),
    ("waves", 2, lambda v: (2 * v[0]).cos() + (3 * v[1]).sin(), [(-2.0, 2.0), (-2.0, 2.0)]),
    ("triple", 3, lambda v: v[0] * v[1] * v[2] + (v[2] * v[2]).log(), [(-2.0, 2.0), (-2.0, 2.0), (0.5, 2.0)]),
    (
        "scaled_residual",
        2,
        lambda v: -(v[1].log()) - (v[0] / v[1]) ** 2 / 2,
        [(-2.0, 2.0), (0.5, 2.0)],
    ),
]


def sample_points(domains, count, seed):
    """Deterministic evaluation points, uniform over the given domains."""
    from probkit import rng

    state = seed
    points = []
    for _ in range(count):
        pt = []
        for lo, hi in domains:
            state, u = rng.rand_double.run(state)
            pt.append(lo + (hi - lo) * u)
        points.append(pt)
    return points


def fd_gradient(fn, xs, h=1e-6):
    """Central finite differences on the Box protocol."""
    grads = []
    for i in range(len(xs)):
        up = [Box(x + (h if j == i else 0.0)) for j, x in enumerate(xs)]
        dn = [Box(x - (h if j == i else 0.0)) for j, x in enumerate(xs)]
        grads.append((fn(up).v - fn(dn).v) / (2 * h))
    return grads


def rel_close(a, b, tol):
    return abs(a - b) <= tol * max(1.0, abs(a), abs(b))
