"""Forward-mode automatic differentiation with dual numbers.

A ``Dual`` carries a value and a tangent (the coefficient of an
infinitesimal whose square is zero). Arithmetic on duals applies the chain
rule mechanically, so evaluating ``f(Dual(x, 1.0))`` yields ``f(x)`` and
``f'(x)`` in one pass. Gradients need one pass per input; that asymmetry
versus the reverse-mode tape is the point of having both.
"""

from __future__ import annotations

import math
from typing import Callable, Sequence


class Dual:
    __slots__ = ("val", "dot")

    def __init__(self, val: float, dot: float = 0.0):
        self.val = float(val)
        self.dot = float(dot)

    @staticmethod
    def lift(x) -> "Dual":
        if isinstance(x, Dual):
            return x
        if isinstance(x, (int, float)):
            return Dual(x)
        raise TypeError(f"cannot treat {type(x).__name__} as a dual number")

    # arithmetic

    def __add__(self, other):
        o = Dual.lift(other)
        return Dual(self.val + o.val, self.dot + o.dot)

    __radd__ = __add__

    def __sub__(self, other):
        o = Dual.lift(other)
        return Dual(self.val - o.val, self.dot - o.dot)

    def __rsub__(self, other):
        return Dual.lift(other) - self

    def __mul__(self, other):
        o = Dual.lift(other)
        return Dual(self.val * o.val, self.dot * o.val + self.val * o.dot)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = Dual.lift(other)
        if o.val == 0.0:
            raise ZeroDivisionError("dual division by zero value")
        return Dual(
            self.val / o.val,
            (self.dot * o.val - self.val * o.dot) / (o.val * o.val),
        )

    def __rtruediv__(self, other):
        return Dual.lift(other) / self

    def __neg__(self):
        return Dual(-self.val, -self.dot)

    def __pow__(self, k):
        if isinstance(k, int) or (isinstance(k, float) and k.is_integer()):
            return self._int_pow(int(k))
        if self.val <= 0.0:
            raise ValueError(f"x**{k} needs a positive value, got {self.val}")
        v = math.pow(self.val, k)
        return Dual(v, k * math.pow(self.val, k - 1.0) * self.dot)

    def _int_pow(self, k: int) -> "Dual":
        # integer powers by repeated multiplication, exact for exact inputs
        if k < 0:
            return Dual(1.0) / self._int_pow(-k)
        out = Dual(1.0)
        for _ in range(k):
            out = out * self
        return out

    # elementary functions

    def exp(self) -> "Dual":
        v = math.exp(self.val)
        return Dual(v, v * self.dot)

    def log(self) -> "Dual":
        if self.val <= 0.0:
            raise ValueError(f"log of non-positive value {self.val}")
        return Dual(math.log(self.val), self.dot / self.val)

    def sin(self) -> "Dual":
        return Dual(math.sin(self.val), math.cos(self.val) * self.dot)

    def cos(self) -> "Dual":
        return Dual(math.cos(self.val), -math.sin(self.val) * self.dot)

    def sqrt(self) -> "Dual":
        if self.val < 0.0:
            raise ValueError(f"sqrt of negative value {self.val}")
        v = math.sqrt(self.val)
        if v == 0.0 and self.dot != 0.0:
            raise ZeroDivisionError("sqrt tangent undefined at zero")
        return Dual(v, 0.0 if self.dot == 0.0 else self.dot / (2.0 * v))

    def __eq__(self, other):
        if not isinstance(other, (Dual, int, float)):
            return NotImplemented
        o = Dual.lift(other)
        return self.val == o.val and self.dot == o.dot

    def __hash__(self):
        return hash((self.val, self.dot))

    def __repr__(self):
        return f"Dual({self.val!r}, {self.dot!r})"


def derivative(f: Callable[[Dual], Dual], x: float) -> float:
    """d f / d x at a point, by seeding a unit tangent."""
    return f(Dual(x, 1.0)).dot


def grad_forward(
    f: Callable[[Sequence[Dual]], Dual], xs: Sequence[float]
) -> tuple[float, list[float]]:
    """Value and full gradient of ``f`` at ``xs``.

    Runs one forward pass per input, seeding each coordinate's tangent in
    turn.
    """
    if not xs:
        raise ValueError("grad_forward needs at least one input")
    grads = []
    value = 0.0
    for i in range(len(xs)):
        args = [Dual(x, 1.0 if j == i else 0.0) for j, x in enumerate(xs)]
        out = f(args)
        value = out.val
        grads.append(out.dot)
    return value, grads
