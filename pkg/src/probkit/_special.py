"""Scalar special functions shared by the graph evaluators.

Written against plain ``math`` so the same source works interpreted and
under numba's nopython mode.
"""

import math


def digamma(x: float) -> float:
    """Logarithmic derivative of the gamma function, for x > 0.

    Recurrence pushes the argument above 6, then the asymptotic series in
    1/x**2 takes over; good to ~1e-12 there.
    """
    acc = 0.0
    while x < 6.0:
        acc -= 1.0 / x
        x += 1.0
    f = 1.0 / (x * x)
    tail = f * (
        1.0 / 12.0
        - f * (1.0 / 120.0 - f * (1.0 / 252.0 - f * (1.0 / 240.0 - f * (1.0 / 132.0))))
    )
    return acc + math.log(x) - 0.5 / x - tail
