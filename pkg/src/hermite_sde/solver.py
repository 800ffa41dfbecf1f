"""Hermite-expansion solver for path-independent SDEs.

The solution is represented as ``X_N(W_t, t) = sum_{n<=N} a_n(t) H_n(W_t, t)``
and the coefficients follow the deterministic system

    a_0' = E[F(X_N, t)]
    a_n' = n!/t**n (E[H_n F(X_N, t)] + E[H_{n-1} G(X_N, t)]) - n/t a_n,   n >= 1,

with every expectation taken by Gauss-Hermite quadrature. The system is
singular at ``t = 0``: initial values come from a limit evaluated on the
Euler proxy ``X0 + F(X0, 0) t + G(X0, 0) x``, the first node ``t = h`` comes
from an implicit-in-``n/t`` Euler step, and RK2 takes over from there.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from .errors import (
    ConfigurationError,
    DomainError,
    EvaluationError,
    SolverError,
    StartupError,
    StiffnessError,
)
from .hermite import ORDER_CEILING, eval_hermite_row
from .quadrature import DEFAULT_ORDER, build_rule, expect, gaussian_nodes, normalized_projections

Field = Callable[[np.ndarray, float], np.ndarray]

RK2_VARIANTS = ("heun", "midpoint")
STARTUP_PROXIES = ("euler", "sequential")
STIFFNESS_LIMIT = 1e12
# Absolute rounding budget for the startup limit; sets a per-order floor on
# the evaluation time since the limit divides by t**((n-1)/2).
STARTUP_ROUNDOFF = 1e-8

__all__ = [
    "SdeProblem",
    "SolverConfig",
    "CoefficientState",
    "ExpansionSolution",
    "Moments",
    "initial_coefficients",
    "startup_step",
    "rhs",
    "integrate",
    "evaluate",
    "moments",
    "higher_moment",
]


@dataclass(frozen=True)
class SdeProblem:
    """Scalar Ito SDE ``dX = F(X, t) dt + G(X, t) dW`` on ``[0, T]``.

    ``drift`` and ``diffusion`` must accept a numpy array of states and a
    scalar time. When ``state_floor`` is set, the diffusion argument is
    clamped from below at that value (square-root type diffusions).
    """

    drift: Field
    diffusion: Field
    x0: float
    T: float
    state_floor: float | None = None
    name: str = "custom"

    def __post_init__(self):
        if not (self.T > 0 and math.isfinite(self.T)):
            raise ConfigurationError(f"horizon T must be positive and finite, got {self.T!r}", "T")
        if not math.isfinite(self.x0):
            raise ConfigurationError(f"X0 must be finite, got {self.x0!r}", "X0")

    def F(self, x, t):
        return np.asarray(self.drift(np.asarray(x, dtype=float), t), dtype=float)

    def G(self, x, t, counter: dict | None = None):
        x = np.asarray(x, dtype=float)
        if self.state_floor is not None:
            below = x < self.state_floor
            if below.any():
                if counter is not None:
                    counter["clamp_count"] = counter.get("clamp_count", 0) + int(below.sum())
                x = np.where(below, self.state_floor, x)
        return np.asarray(self.diffusion(x, t), dtype=float)


@dataclass(frozen=True)
class SolverConfig:
    N: int = 8
    M: int = 100
    Q: int = DEFAULT_ORDER
    startup_epsilon: float = 1e-6
    rk2_variant: str = "heun"
    startup_proxy: str = "euler"

    def __post_init__(self):
        for name in ("N", "M", "Q"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, np.integer)):
                raise ConfigurationError(f"{name} must be an integer, got {v!r}", name)
        if not 1 <= self.N <= ORDER_CEILING:
            raise ConfigurationError(f"N must lie in [1, {ORDER_CEILING}], got {self.N}", "N")
        if self.M < 2:
            raise ConfigurationError(f"M must be >= 2, got {self.M}", "M")
        if self.Q < self.N + 2:
            raise ConfigurationError(f"Q must be >= N + 2 = {self.N + 2}, got {self.Q}", "Q")
        if not (self.startup_epsilon > 0 and math.isfinite(self.startup_epsilon)):
            raise ConfigurationError("startup_epsilon must be positive", "startup_epsilon")
        if self.rk2_variant not in RK2_VARIANTS:
            raise ConfigurationError(
                f"rk2_variant must be one of {RK2_VARIANTS}, got {self.rk2_variant!r}", "rk2_variant"
            )
        if self.startup_proxy not in STARTUP_PROXIES:
            raise ConfigurationError(
                f"startup_proxy must be one of {STARTUP_PROXIES}, got {self.startup_proxy!r}",
                "startup_proxy",
            )

    @property
    def rule(self):
        return build_rule(self.Q)


@dataclass(frozen=True)
class CoefficientState:
    t: float
    a: np.ndarray

    def __post_init__(self):
        a = np.array(self.a, dtype=float)
        if not np.all(np.isfinite(a)):
            raise SolverError(f"non-finite coefficients at t={self.t}", time=self.t)
        a.setflags(write=False)
        object.__setattr__(self, "a", a)


class Moments(NamedTuple):
    mean: float
    second_moment: float
    variance: float


def _euler_proxy(problem: SdeProblem, counter=None):
    f0 = float(problem.F(problem.x0, 0.0))
    g0 = float(problem.G(problem.x0, 0.0, counter))
    return lambda x, t: problem.x0 + f0 * t + g0 * x


def _projected_fields(problem, X, t, rule, N, counter):
    """Normalized projections of F(X(x), t) and G(X(x), t) at time t."""
    x = gaussian_nodes(t, rule)
    states = X(x, t)
    Fv = problem.F(states, t)
    Gv = problem.G(states, t, counter)
    for label, v in (("drift", Fv), ("diffusion", Gv)):
        bad = ~np.isfinite(v)
        if bad.any():
            k = int(np.argmax(bad))
            raise EvaluationError(
                f"{label} non-finite at node x={x[k]:.6g} (state {states[k]:.6g}, t={t:.6g})",
                node=float(x[k]),
                time=t,
            )
    cF = normalized_projections(np.broadcast_to(Fv, x.shape), t, N, rule)
    cG = normalized_projections(np.broadcast_to(Gv, x.shape), t, N, rule)
    return cF, cG


def _startup_time(n: int, eps: float) -> float:
    # the order-n limit carries rounding ~ 1e-16 sqrt((n-1)!) t**(-(n-1)/2)
    if n < 2:
        return eps
    budget = STARTUP_ROUNDOFF * math.sqrt(math.factorial(n - 1))
    return max(eps, budget ** (2.0 / (n - 1)))


def initial_coefficients(problem: SdeProblem, config: SolverConfig, diagnostics: dict | None = None) -> CoefficientState:
    """Coefficients at ``t = 0``.

    ``a_0(0) = X0``. For ``n >= 1`` the limit ``t -> 0`` of
    ``(n-1)!/t**(n-1) (E[H_n F(Xhat)] + E[H_{n-1} G(Xhat)])`` is estimated by
    linear Richardson extrapolation from ``t = eps`` and ``t = eps/2``.
    For orders where rounding would dominate at ``startup_epsilon``, ``eps``
    is raised to ``(STARTUP_ROUNDOFF * sqrt((n-1)!))**(2/(n-1))``.

    With ``startup_proxy="euler"`` the state inside the limit is the Euler
    proxy ``X0 + F(X0, 0) t + G(X0, 0) x``, which only resolves ``a_1`` and
    ``a_2``; higher orders start at zero and relax during integration.
    ``"sequential"`` adds ``sum_{1<=k<n} a_k(0) H_k(x, t)`` with the orders
    already found, which gives the exact limit for smooth fields.
    """
    diag = {} if diagnostics is None else diagnostics
    N, rule = config.N, config.rule
    f0 = float(problem.F(problem.x0, 0.0))
    a = np.zeros(N + 1)
    a[0] = problem.x0
    a[1] = float(problem.G(problem.x0, 0.0, diag))
    euler = _euler_proxy(problem)
    cache = {}

    def proxy(n):
        if config.startup_proxy == "euler":
            return euler
        low = a[1:n].copy()

        def X_hat(x, t):
            return problem.x0 + f0 * t + low @ eval_hermite_row(n - 1, x, t)[1:]

        return X_hat

    def limit_expr(n, t):
        key = (n if config.startup_proxy == "sequential" else 0, t)
        if key not in cache:
            cache[key] = _projected_fields(problem, proxy(n), t, rule, N, diag)
        cF, cG = cache[key]
        return t / n * cF[n] + cG[n - 1]

    times = []
    for n in range(1, N + 1):
        eps = _startup_time(n, config.startup_epsilon)
        times.append(eps)
        try:
            est = 2.0 * limit_expr(n, 0.5 * eps) - limit_expr(n, eps)
        except EvaluationError as exc:
            raise StartupError(f"initial coefficient a_{n}(0): {exc}", order=n) from exc
        if not math.isfinite(est):
            raise StartupError(f"initial coefficient a_{n}(0) limit is not finite", order=n)
        a[n] = est
    diag["startup_times"] = times
    return CoefficientState(0.0, a)


def startup_step(problem: SdeProblem, config: SolverConfig, state0: CoefficientState,
                 h: float | None = None, diagnostics: dict | None = None) -> CoefficientState:
    """First node ``t = h`` from the Euler startup formula.

    ``a_0(h) = a_0(0) + h E[F(Xhat)]`` and, for ``n >= 1``,
    ``a_n(h) = (n!/h**(n-1) (E[H_n F(Xhat)] + E[H_{n-1} G(Xhat)]) + a_n(0)) / (n + 1)``.
    ``Xhat`` is the Euler proxy, or the full expansion of ``state0`` plus
    the drift term when ``config.startup_proxy == "sequential"``.
    """
    diag = {} if diagnostics is None else diagnostics
    if h is None:
        h = problem.T / config.M
    N = config.N
    if config.startup_proxy == "euler":
        X_hat = _euler_proxy(problem)
    else:
        f0 = float(problem.F(problem.x0, 0.0))
        tail = np.array(state0.a[1:])

        def X_hat(x, t):
            return problem.x0 + f0 * t + tail @ eval_hermite_row(N, x, t)[1:]

    try:
        cF, cG = _projected_fields(problem, X_hat, h, config.rule, N, diag)
    except EvaluationError as exc:
        raise SolverError(f"startup step failed: {exc}", time=h, stage="startup") from exc
    a0 = state0.a
    a = np.empty(N + 1)
    a[0] = a0[0] + h * cF[0]
    n = np.arange(1, N + 1)
    a[1:] = (h * cF[1:] + n * cG[:-1] + a0[1:]) / (n + 1)
    return CoefficientState(h, a)


def rhs(state: CoefficientState, problem: SdeProblem, config: SolverConfig, diagnostics: dict | None = None) -> np.ndarray:
    """Time derivative of the coefficient vector at ``state.t > 0``."""
    t = state.t
    if not t > 0:
        raise DomainError("rhs is singular at t=0")
    a = np.asarray(state.a, dtype=float)
    N = a.size - 1

    def X_N(x, tt):
        return a @ eval_hermite_row(N, x, tt)

    cF, cG = _projected_fields(problem, X_N, t, config.rule, N, diagnostics)
    out = np.empty(N + 1)
    out[0] = cF[0]
    n = np.arange(1, N + 1)
    out[1:] = cF[1:] + n / t * (cG[:-1] - a[1:])
    peak = np.max(np.abs(out))
    if not peak <= STIFFNESS_LIMIT:
        raise StiffnessError(
            f"|rhs| = {peak:.3g} exceeds {STIFFNESS_LIMIT:.0e} at t={t:.6g}; reduce h or N",
            time=t,
            stage="rhs",
        )
    return out


@dataclass(frozen=True, eq=False)
class ExpansionSolution:
    """Coefficient grid on ``t_i = i h`` plus evaluation and moment services."""

    times: np.ndarray
    coefficients: np.ndarray
    problem: SdeProblem
    config: SolverConfig
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        for arr in (self.times, self.coefficients):
            arr.setflags(write=False)

    @property
    def grid(self) -> list[CoefficientState]:
        return [CoefficientState(t, a) for t, a in zip(self.times, self.coefficients)]

    @property
    def N(self) -> int:
        return self.coefficients.shape[1] - 1

    def evaluate(self, x, i: int):
        return evaluate(self, x, i)

    def moments(self, i: int) -> Moments:
        return moments(self, i)

    def higher_moment(self, i: int, k: int) -> float:
        return higher_moment(self, i, k)


def _step(f, t, a, h, variant):
    k1 = f(t, a)
    if variant == "heun":
        k2 = f(t + h, a + h * k1)
        return a + 0.5 * h * (k1 + k2)
    k2 = f(t + 0.5 * h, a + 0.5 * h * k1)
    return a + h * k2


def integrate(problem: SdeProblem, config: SolverConfig) -> ExpansionSolution:
    """Integrate the coefficient system over ``[0, T]`` on ``M`` uniform steps."""
    M, N = config.M, config.N
    h = problem.T / M
    times = np.arange(M + 1) * h
    times[-1] = problem.T
    diag = {"clamp_count": 0, "rhs_evaluations": 0}
    coeffs = np.empty((M + 1, N + 1))
    coeffs[0] = initial_coefficients(problem, config, diag).a
    coeffs[1] = startup_step(problem, config, CoefficientState(0.0, coeffs[0]), times[1], diag).a

    def f(t, a):
        diag["rhs_evaluations"] += 1
        return rhs(CoefficientState(t, a), problem, config, diag)

    for i in range(1, M):
        try:
            a_next = _step(f, times[i], coeffs[i], times[i + 1] - times[i], config.rk2_variant)
        except SolverError:
            raise
        except EvaluationError as exc:
            raise SolverError(f"step from t={times[i]:.6g} failed: {exc}", time=times[i], stage="rk2") from exc
        if not np.all(np.isfinite(a_next)):
            raise SolverError(f"non-finite coefficients at t={times[i + 1]:.6g}", time=times[i + 1], stage="rk2")
        coeffs[i + 1] = a_next
    return ExpansionSolution(times, coeffs, problem, config, diag)


def evaluate(solution: ExpansionSolution, x, i: int):
    """Truncated solution surface ``sum_n a_n(t_i) H_n(x, t_i)``."""
    a = solution.coefficients[i]
    v = a @ eval_hermite_row(solution.N, x, solution.times[i])
    return float(v) if np.ndim(v) == 0 else v


def moments(solution: ExpansionSolution, i: int) -> Moments:
    """Mean and second moment from the coefficients (Parseval)."""
    t = float(solution.times[i])
    a = solution.coefficients[i]
    n = np.arange(a.size)
    scale = np.array([t**k / math.factorial(k) for k in n])
    mean = float(a[0])
    second = float(np.sum(scale * a * a))
    return Moments(mean, second, second - mean * mean)


def higher_moment(solution: ExpansionSolution, i: int, k: int) -> float:
    """``E[X_N(W_t, t)**k]`` by direct quadrature (k = 3, 4 in practice)."""
    if isinstance(k, bool) or not isinstance(k, (int, np.integer)) or not 1 <= k <= 4:
        raise DomainError(f"moment order must be 1..4, got {k!r}")
    t = float(solution.times[i])
    if not t > 0:
        raise DomainError("direct moment quadrature needs t > 0")
    order = max(solution.config.Q, math.ceil((k * solution.N + 2) / 2))
    rule = build_rule(order)
    a = solution.coefficients[i]
    return expect(lambda x: (a @ eval_hermite_row(solution.N, x, t)) ** k, t, rule)
