"""Reverse-mode automatic differentiation on an append-only tape.

Expressions live in an arena (the ``Tape``): every node records its op
kind, at most two parent indices, and an optional payload (constant value
or exponent). Children always follow their parents, so a single forward
sweep in index order evaluates the graph, and a single reverse sweep
accumulates every input's partial derivative at once. That reverse sweep
is what makes gradient cost independent of the input count, in contrast
to the one-pass-per-input duals in ``forward``.

Structurally identical nodes are interned on append, so repeated
subexpressions (a shared variance term across five hundred likelihood
rows, say) occupy one slot.

``forward_eval``/``backward`` form the readable reference evaluator;
``compile`` lowers the same arrays onto the kernels in ``_kernels`` for
the hot loops. Both produce the same numbers.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from . import _kernels
from ._kernels import (
    ADD,
    CONST,
    COS,
    DIV,
    EXP,
    INPUT,
    LGAMMA,
    LOG,
    MAX,
    MUL,
    NEG,
    OP_NAMES,
    POW,
    SIGMOID,
    SIN,
    SOFTPLUS,
    SQRT,
    SUB,
    backward_pass,
    forward_pass,
)
from ._special import digamma

_TWO_PARENT = {ADD, SUB, MUL, DIV, MAX}


class GraphDomainError(ValueError):
    """A node was evaluated outside its domain (log of a non-positive
    value and friends). Carries the offending node index."""

    def __init__(self, node: int, op: str, detail: str):
        self.node = node
        self.op = op
        super().__init__(f"node {node} ({op}): {detail}")


class Expr:
    """Handle to one tape node. Cheap to copy, never mutated."""

    __slots__ = ("tape", "i")

    def __init__(self, tape: "Tape", i: int):
        self.tape = tape
        self.i = i

    def _lift(self, other) -> "Expr":
        return self.tape.lift(other)

    def __add__(self, other):
        o = self._lift(other)
        return Expr(self.tape, self.tape._push(ADD, self.i, o.i))

    __radd__ = __add__

    def __sub__(self, other):
        o = self._lift(other)
        return Expr(self.tape, self.tape._push(SUB, self.i, o.i))

    def __rsub__(self, other):
        o = self._lift(other)
        return Expr(self.tape, self.tape._push(SUB, o.i, self.i))

    def __mul__(self, other):
        o = self._lift(other)
        return Expr(self.tape, self.tape._push(MUL, self.i, o.i))

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._lift(other)
        return Expr(self.tape, self.tape._push(DIV, self.i, o.i))

    def __rtruediv__(self, other):
        o = self._lift(other)
        return Expr(self.tape, self.tape._push(DIV, o.i, self.i))

    def __neg__(self):
        return Expr(self.tape, self.tape._push(NEG, self.i))

    def __pow__(self, k):
        if isinstance(k, Expr):
            raise TypeError("expression exponents: write (k * x.log()).exp()")
        return Expr(self.tape, self.tape._push(POW, self.i, aux=float(k)))

    def exp(self):
        return Expr(self.tape, self.tape._push(EXP, self.i))

    def log(self):
        return Expr(self.tape, self.tape._push(LOG, self.i))

    def sin(self):
        return Expr(self.tape, self.tape._push(SIN, self.i))

    def cos(self):
        return Expr(self.tape, self.tape._push(COS, self.i))

    def sqrt(self):
        return Expr(self.tape, self.tape._push(SQRT, self.i))

    def sigmoid(self):
        return Expr(self.tape, self.tape._push(SIGMOID, self.i))

    def softplus(self):
        return Expr(self.tape, self.tape._push(SOFTPLUS, self.i))

    def lgamma(self):
        return Expr(self.tape, self.tape._push(LGAMMA, self.i))

    def __repr__(self):
        return f"Expr(node={self.i}, op={OP_NAMES[self.tape._ops[self.i]]})"


def maximum(a, b) -> Expr:
    """Pointwise max of two expressions (subgradient picks the left arm on ties)."""
    if not isinstance(a, Expr):
        a, b = b, a
    if not isinstance(a, Expr):
        raise TypeError("maximum needs at least one Expr")
    o = a.tape.lift(b)
    return Expr(a.tape, a.tape._push(MAX, a.i, o.i))


class Tape:
    """Append-only arena of scalar nodes.

    Interleaves building (``input``/``constant``/operators) with
    evaluation (``forward_eval`` then ``backward``) and freezing
    (``compile``). Building is single-threaded per tape; compiled
    functions are stateless and may be shared.
    """

    def __init__(self):
        self._ops: list[int] = []
        self._pa: list[int] = []
        self._pb: list[int] = []
        self._aux: list[float] = []
        self._intern: dict = {}
        self.input_slots: list[int] = []
        self.output: Expr | None = None
        self._prim: list[float] | None = None
        self._lpa: list[float] | None = None
        self._lpb: list[float] | None = None
        self.forward_count = 0
        self.backward_count = 0

    def __len__(self) -> int:
        return len(self._ops)

    @property
    def n_inputs(self) -> int:
        return len(self.input_slots)

    def _push(self, op: int, a: int = -1, b: int = -1, aux: float = 0.0, intern: bool = True) -> int:
        if intern:
            key = (op, a, b, aux)
            hit = self._intern.get(key)
            if hit is not None:
                return hit
        idx = len(self._ops)
        self._ops.append(op)
        self._pa.append(a)
        self._pb.append(b)
        self._aux.append(aux)
        if intern:
            self._intern[key] = idx
        return idx

    def input(self) -> Expr:
        """Fresh input node; its slot is the current input count."""
        slot = len(self.input_slots)
        idx = self._push(INPUT, a=slot, intern=False)
        self.input_slots.append(idx)
        return Expr(self, idx)

    def constant(self, value: float) -> Expr:
        return Expr(self, self._push(CONST, aux=float(value)))

    def lift(self, x) -> Expr:
        if isinstance(x, Expr):
            if x.tape is not self:
                raise ValueError("expressions from different tapes cannot mix")
            return x
        if isinstance(x, (int, float)):
            return self.constant(float(x))
        raise TypeError(f"cannot lift {type(x).__name__} onto the tape")

    def set_output(self, e: Expr) -> None:
        if e.tape is not self:
            raise ValueError("output expression belongs to a different tape")
        self.output = e

    # interpreted reference evaluator

    def _eval_node(self, i: int, x: Sequence[float], prim, lpa, lpb) -> None:
        op = self._ops[i]
        a_i, b_i = self._pa[i], self._pb[i]
        if op == INPUT:
            prim[i] = x[a_i]
        elif op == CONST:
            prim[i] = self._aux[i]
        elif op == ADD:
            prim[i] = prim[a_i] + prim[b_i]
            lpa[i] = 1.0
            lpb[i] = 1.0
        elif op == SUB:
            prim[i] = prim[a_i] - prim[b_i]
            lpa[i] = 1.0
            lpb[i] = -1.0
        elif op == MUL:
            a, b = prim[a_i], prim[b_i]
            prim[i] = a * b
            lpa[i] = b
            lpb[i] = a
        elif op == DIV:
            a, b = prim[a_i], prim[b_i]
            if b == 0.0:
                raise GraphDomainError(i, "div", "division by zero")
            q = a / b
            prim[i] = q
            lpa[i] = 1.0 / b
            # -q / b, not -a / (b*b): b*b can underflow to zero for
            # subnormal-range b and would divide by zero here.
            lpb[i] = -q / b
        elif op == NEG:
            prim[i] = -prim[a_i]
            lpa[i] = -1.0
        elif op == EXP:
            try:
                v = math.exp(prim[a_i])
            except OverflowError:
                v = math.inf
            prim[i] = v
            lpa[i] = v
        elif op == LOG:
            a = prim[a_i]
            if a <= 0.0:
                raise GraphDomainError(i, "log", f"log of non-positive value {a}")
            prim[i] = math.log(a)
            lpa[i] = 1.0 / a
        elif op == POW:
            a, k = prim[a_i], self._aux[i]
            whole = k == math.floor(k)
            if a < 0.0 and not whole:
                raise GraphDomainError(i, "pow", f"{a}**{k} with fractional exponent")
            if a == 0.0 and k < 0.0:
                raise GraphDomainError(i, "pow", f"zero base with negative exponent {k}")
            try:
                prim[i] = a**k
            except OverflowError:
                prim[i] = math.inf if (a > 0.0 or int(k) % 2 == 0) else -math.inf
            if a == 0.0 and k < 1.0:
                lpa[i] = math.inf if k != 0.0 else 0.0
            elif a == 0.0 and k == 1.0:
                lpa[i] = 1.0
            else:
                try:
                    lpa[i] = k * a ** (k - 1.0)
                except OverflowError:
                    lpa[i] = math.copysign(math.inf, k)
        elif op == SIN:
            prim[i] = math.sin(prim[a_i])
            lpa[i] = math.cos(prim[a_i])
        elif op == COS:
            prim[i] = math.cos(prim[a_i])
            lpa[i] = -math.sin(prim[a_i])
        elif op == SQRT:
            a = prim[a_i]
            if a < 0.0:
                raise GraphDomainError(i, "sqrt", f"sqrt of negative value {a}")
            v = math.sqrt(a)
            prim[i] = v
            lpa[i] = math.inf if v == 0.0 else 0.5 / v
        elif op == SIGMOID:
            a = prim[a_i]
            if a >= 0.0:
                s = 1.0 / (1.0 + math.exp(-a))
            else:
                e = math.exp(a)
                s = e / (1.0 + e)
            prim[i] = s
            lpa[i] = s * (1.0 - s)
        elif op == SOFTPLUS:
            a = prim[a_i]
            if a > 35.0:
                prim[i] = a
            elif a < -35.0:
                prim[i] = math.exp(a)
            else:
                prim[i] = math.log1p(math.exp(a))
            if a >= 0.0:
                lpa[i] = 1.0 / (1.0 + math.exp(-a))
            else:
                e = math.exp(a)
                lpa[i] = e / (1.0 + e)
        elif op == LGAMMA:
            a = prim[a_i]
            if a <= 0.0:
                raise GraphDomainError(i, "lgamma", f"lgamma needs a positive argument, got {a}")
            try:
                prim[i] = math.lgamma(a)
            except OverflowError:
                prim[i] = math.inf
            lpa[i] = digamma(a)
        elif op == MAX:
            a, b = prim[a_i], prim[b_i]
            if a >= b:
                prim[i] = a
                lpa[i] = 1.0
                lpb[i] = 0.0
            else:
                prim[i] = b
                lpa[i] = 0.0
                lpb[i] = 1.0
        else:  # pragma: no cover
            raise AssertionError(f"unknown op {op}")

    def _run_forward(self, upto: int, x: Sequence[float]):
        n = upto + 1
        prim = [0.0] * n
        lpa = [0.0] * n
        lpb = [0.0] * n
        for i in range(n):
            self._eval_node(i, x, prim, lpa, lpb)
        return prim, lpa, lpb

    def forward_eval(self, x: Sequence[float]) -> float:
        """Evaluate up to the designated output, keeping local partials
        around for ``backward``."""
        if self.output is None:
            raise RuntimeError("no output designated; call set_output first")
        if len(x) != self.n_inputs:
            raise ValueError(f"expected {self.n_inputs} input values, got {len(x)}")
        self._prim, self._lpa, self._lpb = self._run_forward(self.output.i, x)
        self.forward_count += 1
        return self._prim[self.output.i]

    def backward(self) -> list[float]:
        """One reverse sweep; returns every input's partial, in slot order."""
        if self._prim is None or self.output is None:
            raise RuntimeError("backward needs a preceding forward_eval")
        out = self.output.i
        adj = [0.0] * (out + 1)
        adj[out] = 1.0
        for i in range(out, -1, -1):
            a = adj[i]
            if a == 0.0:
                continue
            op = self._ops[i]
            if op <= CONST:
                continue
            adj[self._pa[i]] += a * self._lpa[i]
            if op in _TWO_PARENT:
                adj[self._pb[i]] += a * self._lpb[i]
        self.backward_count += 1
        return [adj[s] if s <= out else 0.0 for s in self.input_slots]

    def value_of(self, e: Expr, x: Sequence[float] = ()) -> float:
        """Plain value of one expression; does not disturb backward state."""
        if e.tape is not self:
            raise ValueError("expression belongs to a different tape")
        if len(x) != self.n_inputs:
            raise ValueError(f"expected {self.n_inputs} input values, got {len(x)}")
        prim, _, _ = self._run_forward(e.i, x)
        return prim[e.i]

    def compile(self, output: Expr | None = None) -> "CompiledGraph":
        """Freeze the tape into a stateless density/gradient pair."""
        if output is not None:
            self.set_output(output)
        if self.output is None:
            raise RuntimeError("no output designated; call set_output first")
        return CompiledGraph(self, self.output.i)

    def dump(self) -> str:
        """One line per node: index, op, parents, last primal (or -)."""
        lines = []
        for i, op in enumerate(self._ops):
            if op == INPUT:
                parents = f"x[{self._pa[i]}]"
            elif op == CONST:
                parents = repr(self._aux[i])
            elif op in _TWO_PARENT:
                parents = f"({self._pa[i]}, {self._pb[i]})"
            elif op == POW:
                parents = f"({self._pa[i]})**{self._aux[i]}"
            else:
                parents = f"({self._pa[i]})"
            primal = "-"
            if self._prim is not None and i < len(self._prim):
                primal = repr(self._prim[i])
            lines.append(f"{i:5d}  {OP_NAMES[op]:<9} {parents:<24} {primal}")
        return "\n".join(lines)


class CompiledGraph:
    """Density/gradient functions over a frozen snapshot of a tape.

    Buffers are allocated per call, so instances are thread-safe and the
    same compiled graph can serve any number of chains.
    """

    def __init__(self, tape: Tape, out_idx: int):
        n = out_idx + 1
        self._ops = np.asarray(tape._ops[:n], dtype=np.int32)
        self._pa = np.asarray(tape._pa[:n], dtype=np.int32)
        self._pb = np.asarray(tape._pb[:n], dtype=np.int32)
        self._aux = np.asarray(tape._aux[:n], dtype=np.float64)
        self._out = out_idx
        self._slots = np.asarray([s for s in tape.input_slots], dtype=np.int64)
        if np.any(self._slots > out_idx):
            raise ValueError("an input node lies beyond the output; graph is malformed")
        self.n_inputs = len(self._slots)

    def _check(self, x) -> np.ndarray:
        arr = np.asarray(x, dtype=np.float64)
        if arr.shape != (self.n_inputs,):
            raise ValueError(f"expected {self.n_inputs} input values, got shape {arr.shape}")
        return arr

    def _forward(self, x):
        n = self._out + 1
        prim = np.empty(n)
        lpa = np.empty(n)
        lpb = np.empty(n)
        bad = forward_pass(self._ops, self._pa, self._pb, self._aux, x, prim, lpa, lpb, self._out)
        if bad >= 0:
            op = OP_NAMES[int(self._ops[bad])]
            raise GraphDomainError(int(bad), op, "argument outside the op's domain")
        return prim, lpa, lpb

    def density(self, x) -> float:
        x = self._check(x)
        prim, _, _ = self._forward(x)
        return float(prim[self._out])

    def gradient(self, x) -> np.ndarray:
        return self.value_and_gradient(x)[1]

    def value_and_gradient(self, x) -> tuple[float, np.ndarray]:
        x = self._check(x)
        prim, lpa, lpb = self._forward(x)
        adj = np.zeros(self._out + 1)
        backward_pass(self._ops, self._pa, self._pb, lpa, lpb, adj, self._out)
        return float(prim[self._out]), adj[self._slots]
