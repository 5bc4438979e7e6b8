"""Flat-array evaluation kernels behind ``Tape.compile``.

The tape is lowered to parallel int32/float64 arrays (op code, parent
indices, payload) and interpreted by two tight loops: a forward value pass
that also stores each node's local partials, and a reverse accumulation
pass. With numba present the loops are jitted; without it they run as
plain Python with identical semantics, just slower.

Op codes double as the only dispatch table; keep them in sync with the
names in ``graph.py``.
"""

import math

from ._special import digamma as _digamma_py

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(f):
            return f

        return wrap


INPUT = 0
CONST = 1
ADD = 2
SUB = 3
MUL = 4
DIV = 5
NEG = 6
EXP = 7
LOG = 8
POW = 9
SIN = 10
COS = 11
SQRT = 12
SIGMOID = 13
SOFTPLUS = 14
LGAMMA = 15
MAX = 16

OP_NAMES = {
    INPUT: "input",
    CONST: "const",
    ADD: "add",
    SUB: "sub",
    MUL: "mul",
    DIV: "div",
    NEG: "neg",
    EXP: "exp",
    LOG: "log",
    POW: "pow",
    SIN: "sin",
    COS: "cos",
    SQRT: "sqrt",
    SIGMOID: "sigmoid",
    SOFTPLUS: "softplus",
    LGAMMA: "lgamma",
    MAX: "max",
}

digamma = njit(cache=True)(_digamma_py)

_INF = float("inf")


@njit(cache=True)
def forward_pass(ops, pa, pb, aux, x, prim, lpa, lpb, out_idx):
    """Evaluate nodes 0..out_idx; return -1 or the first bad node index."""
    for i in range(out_idx + 1):
        o = ops[i]
        if o == INPUT:
            prim[i] = x[pa[i]]
        elif o == CONST:
            prim[i] = aux[i]
        elif o == ADD:
            prim[i] = prim[pa[i]] + prim[pb[i]]
            lpa[i] = 1.0
            lpb[i] = 1.0
        elif o == SUB:
            prim[i] = prim[pa[i]] - prim[pb[i]]
            lpa[i] = 1.0
            lpb[i] = -1.0
        elif o == MUL:
            a = prim[pa[i]]
            b = prim[pb[i]]
            prim[i] = a * b
            lpa[i] = b
            lpb[i] = a
        elif o == DIV:
            a = prim[pa[i]]
            b = prim[pb[i]]
            if b == 0.0:
                return i
            q = a / b
            prim[i] = q
            lpa[i] = 1.0 / b
            # -q / b, not -a / (b*b): b*b can underflow to zero for
            # subnormal-range b and would divide by zero here.
            lpb[i] = -q / b
        elif o == NEG:
            prim[i] = -prim[pa[i]]
            lpa[i] = -1.0
        elif o == EXP:
            v = math.exp(prim[pa[i]])
            prim[i] = v
            lpa[i] = v
        elif o == LOG:
            a = prim[pa[i]]
            if a <= 0.0:
                return i
            prim[i] = math.log(a)
            lpa[i] = 1.0 / a
        elif o == POW:
            a = prim[pa[i]]
            k = aux[i]
            whole = k == math.floor(k)
            if (a < 0.0 and not whole) or (a == 0.0 and k < 0.0):
                return i
            prim[i] = a**k
            if a == 0.0 and k < 1.0:
                lpa[i] = _INF if k != 0.0 else 0.0
            elif a == 0.0 and k == 1.0:
                lpa[i] = 1.0
            else:
                lpa[i] = k * a ** (k - 1.0)
        elif o == SIN:
            a = prim[pa[i]]
            prim[i] = math.sin(a)
            lpa[i] = math.cos(a)
        elif o == COS:
            a = prim[pa[i]]
            prim[i] = math.cos(a)
            lpa[i] = -math.sin(a)
        elif o == SQRT:
            a = prim[pa[i]]
            if a < 0.0:
                return i
            v = math.sqrt(a)
            prim[i] = v
            lpa[i] = _INF if v == 0.0 else 0.5 / v
        elif o == SIGMOID:
            a = prim[pa[i]]
            if a >= 0.0:
                s = 1.0 / (1.0 + math.exp(-a))
            else:
                e = math.exp(a)
                s = e / (1.0 + e)
            prim[i] = s
            lpa[i] = s * (1.0 - s)
        elif o == SOFTPLUS:
            a = prim[pa[i]]
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
        elif o == LGAMMA:
            a = prim[pa[i]]
            if a <= 0.0:
                return i
            prim[i] = math.lgamma(a)
            lpa[i] = digamma(a)
        else:  # MAX
            a = prim[pa[i]]
            b = prim[pb[i]]
            if a >= b:
                prim[i] = a
                lpa[i] = 1.0
                lpb[i] = 0.0
            else:
                prim[i] = b
                lpa[i] = 0.0
                lpb[i] = 1.0
    return -1


@njit(cache=True)
def backward_pass(ops, pa, pb, lpa, lpb, adj, out_idx):
    """Accumulate adjoints from out_idx down to node 0. One sweep, all inputs."""
    adj[out_idx] = 1.0
    for i in range(out_idx, -1, -1):
        a = adj[i]
        if a == 0.0:
            continue
        o = ops[i]
        if o <= CONST:
            continue
        adj[pa[i]] += a * lpa[i]
        if o == ADD or o == SUB or o == MUL or o == DIV or o == MAX:
            adj[pb[i]] += a * lpb[i]
