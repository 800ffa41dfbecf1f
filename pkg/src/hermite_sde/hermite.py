"""Space-time (2D) Hermite polynomials.

The family is defined by the three-term recursion

    (n + 1) H_{n+1}(x, t) = x H_n(x, t) - t H_{n-1}(x, t),   H_0 = 1, H_{-1} = 0,

which coincides with ``t**(n/2) / n! * He_n(x / sqrt(t))`` for ``t > 0`` and
degenerates to ``x**n / n!`` at ``t = 0``. Evaluated on a Wiener path,
``H_n(W_t, t)`` is a martingale with ``dH_{n+1} = H_n dW``.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ConfigurationError, DomainError

DEFAULT_MAX_ORDER = 32
ORDER_CEILING = 40

__all__ = [
    "HermiteEval",
    "GaussianWeight",
    "eval_hermite",
    "eval_hermite_row",
    "generating_partial_sum",
    "DEFAULT_MAX_ORDER",
    "ORDER_CEILING",
]


class GaussianWeight:
    """Density of N(0, t), the weight of the space-time inner product.

    At ``t = 0`` the weight is a point mass at the origin; :meth:`density`
    is then undefined and raises.
    """

    def __init__(self, t: float):
        if not t >= 0:
            raise DomainError(f"variance t must be >= 0, got {t!r}")
        self.t = float(t)

    @property
    def is_point_mass(self) -> bool:
        return self.t == 0.0

    def density(self, x):
        if self.is_point_mass:
            raise DomainError("weight at t=0 is a point mass at 0")
        x = np.asarray(x, dtype=float)
        return np.exp(-x * x / (2.0 * self.t)) / math.sqrt(2.0 * math.pi * self.t)

    def __repr__(self):
        return f"GaussianWeight(t={self.t})"


class HermiteEval:
    """Evaluator for the space-time Hermite family up to ``max_order``.

    Parameters
    ----------
    max_order : int
        Highest evaluable order. Orders above ``ORDER_CEILING`` are rejected
        since the ``t**(n/2)/n!`` scaling leaves them numerically meaningless
        in double precision.
    """

    def __init__(self, max_order: int = DEFAULT_MAX_ORDER):
        if isinstance(max_order, bool) or not isinstance(max_order, (int, np.integer)):
            raise ConfigurationError(f"max_order must be an integer, got {max_order!r}", "max_order")
        if max_order < 0 or max_order > ORDER_CEILING:
            raise ConfigurationError(
                f"max_order must lie in [0, {ORDER_CEILING}], got {max_order}", "max_order"
            )
        self.max_order = int(max_order)

    def _check(self, n, t):
        if n < 0 or n > self.max_order:
            raise DomainError(f"order {n} outside [0, {self.max_order}]")
        if np.any(np.asarray(t) < 0):
            raise DomainError(f"time must be >= 0, got {t!r}")

    def row(self, N: int, x, t):
        """All orders 0..N in one recursion pass.

        Returns an array of shape ``(N + 1,) + broadcast(x, t).shape``.
        """
        self._check(N, t)
        x = np.asarray(x, dtype=float)
        t = np.asarray(t, dtype=float)
        shape = np.broadcast(x, t).shape
        out = np.empty((N + 1,) + shape)
        out[0] = 1.0
        if N >= 1:
            out[1] = x
        for n in range(1, N):
            out[n + 1] = (x * out[n] - t * out[n - 1]) / (n + 1)
        return out

    def eval(self, n: int, x, t):
        r = self.row(n, x, t)[n]
        return float(r) if r.ndim == 0 else r

    __call__ = eval

    def generating_partial_sum(self, lam: float, x, t, N: int):
        """``sum_{n<=N} lam**n H_n(x, t)``; tends to ``exp(lam x - lam**2 t / 2)``."""
        r = self.row(N, x, t)
        powers = lam ** np.arange(N + 1, dtype=float)
        s = np.tensordot(powers, r, axes=(0, 0))
        return float(s) if np.ndim(s) == 0 else s


_default = HermiteEval()


def eval_hermite(n, x, t):
    return _default.eval(n, x, t)


def eval_hermite_row(N, x, t):
    return _default.row(N, x, t)


def generating_partial_sum(lam, x, t, N):
    return _default.generating_partial_sum(lam, x, t, N)
