"""Gauss-Hermite expectations over W_t ~ N(0, t).

Rules use the physicists' weight ``exp(-u**2)``; the substitution
``x = sqrt(2 t) u`` together with the factor ``1/sqrt(pi)`` turns them into
expectations against the N(0, t) density. That substitution lives only here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial.hermite import hermgauss

from .errors import ConfigurationError, DomainError, EvaluationError
from .hermite import eval_hermite

DEFAULT_ORDER = 40
MAX_ORDER = 200
_SQRT_PI = math.sqrt(math.pi)

__all__ = [
    "QuadratureRule",
    "build_rule",
    "expect",
    "project_coefficient",
    "gaussian_nodes",
    "normalized_projections",
    "DEFAULT_ORDER",
]


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    order: int
    nodes: np.ndarray
    weights: np.ndarray

    @property
    def probability_weights(self) -> np.ndarray:
        """Weights normalized to sum to one."""
        return self.weights / _SQRT_PI


@lru_cache(maxsize=None)
def build_rule(Q: int = DEFAULT_ORDER) -> QuadratureRule:
    """Q-point Gauss-Hermite rule for the weight ``exp(-u**2)``.

    Cached per order; the returned arrays are read-only.
    """
    if isinstance(Q, bool) or not isinstance(Q, (int, np.integer)) or not 1 <= Q <= MAX_ORDER:
        raise ConfigurationError(f"quadrature order must be an integer in [1, {MAX_ORDER}], got {Q!r}", "Q")
    u, w = hermgauss(int(Q))
    # hermgauss leaves tiny asymmetries; symmetrize so odd integrands vanish exactly
    u = 0.5 * (u - u[::-1])
    w = 0.5 * (w + w[::-1])
    if Q % 2:
        u[Q // 2] = 0.0
    u.setflags(write=False)
    w.setflags(write=False)
    return QuadratureRule(int(Q), u, w)


def gaussian_nodes(t: float, rule: QuadratureRule) -> np.ndarray:
    """Nodes of ``rule`` mapped onto the N(0, t) scale."""
    return math.sqrt(2.0 * t) * rule.nodes


def _check_finite(values, x, t):
    values = np.asarray(values, dtype=float)
    if values.shape != x.shape:
        values = np.broadcast_to(values, x.shape)
    bad = ~np.isfinite(values)
    if bad.any():
        k = int(np.argmax(bad))
        raise EvaluationError(
            f"non-finite integrand value {values[k]!r} at node x={x[k]!r} (t={t})",
            node=float(x[k]),
            time=t,
        )
    return values


def expect(f, t: float, rule: QuadratureRule | None = None) -> float:
    """Approximate E[f(W_t)] for W_t ~ N(0, t).

    ``f`` is called once with the array of transformed nodes. The result is
    exact when ``f`` is a polynomial of degree at most ``2 Q - 1``.
    """
    if rule is None:
        rule = build_rule()
    if not t > 0:
        raise DomainError(f"expectation requires t > 0, got {t!r}")
    x = gaussian_nodes(t, rule)
    values = _check_finite(f(x), x, t)
    return float(np.dot(rule.weights, values) / _SQRT_PI)


def project_coefficient(n: int, X, t: float, rule: QuadratureRule | None = None) -> float:
    """Expansion coefficient ``a_n(t) = n!/t**n * E[X(W_t, t) H_n(W_t, t)]``."""
    if not t > 0:
        raise DomainError("projection is undefined at t=0; use the model's initial data")
    e = expect(lambda x: X(x, t) * eval_hermite(n, x, t), t, rule)
    return math.factorial(n) / t**n * e


def normalized_projections(values, t: float, N: int, rule: QuadratureRule) -> np.ndarray:
    """Vector ``c_n = n!/t**n * E[H_n(W_t, t) v(W_t)]`` for n = 0..N.

    ``values`` holds ``v`` at :func:`gaussian_nodes`. The computation runs the
    probabilists' recursion on standardized nodes and applies ``t**(-n/2)``
    analytically, which avoids forming ``n!/t**n`` and ``H_n`` separately.
    """
    z = math.sqrt(2.0) * rule.nodes
    wv = rule.probability_weights * np.asarray(values, dtype=float)
    out = np.empty(N + 1)
    he_prev = np.zeros_like(z)
    he = np.ones_like(z)
    for n in range(N + 1):
        out[n] = np.dot(wv, he)
        he, he_prev = z * he - n * he_prev, he
    return out * t ** (-0.5 * np.arange(N + 1))
