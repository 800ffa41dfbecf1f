"""Built-in SDE models with exact solution maps, and the path-independence test.

Every model returns a :class:`ModelSpec`. Exact maps are written as
``phi(t, w)`` so that ``X_t = phi(t, W_t)``; a model whose expansion is solved
on a transformed (companion) equation also carries the map back to the
original state.
"""

from __future__ import annotations

import inspect
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import sympy
from scipy.integrate import simpson

from .errors import ConfigurationError
from .solver import SdeProblem

__all__ = [
    "TimeFunction",
    "ModelSpec",
    "PathIndependenceReport",
    "gbm",
    "cir_special",
    "cir_instance",
    "arctan_model",
    "custom",
    "MODELS",
    "build_model",
    "check_path_independence",
    "probe_grid",
]

_t, _x, _w = sympy.symbols("t x w")
_SIMPSON_INTERVALS = 200


def _vectorized(f):
    def g(*args):
        args = [np.asarray(a, dtype=float) for a in args]
        shape = np.broadcast(*args).shape
        return np.broadcast_to(np.asarray(f(*args), dtype=float), shape) + 0.0

    return g


def _lambdify(symbols, expr):
    return _vectorized(sympy.lambdify(symbols, expr, "numpy"))


@dataclass(frozen=True)
class TimeFunction:
    """Deterministic function of time with optional closed forms.

    ``integral(t)`` is ``int_0^t f(s) ds``; when it is not supplied a composite
    Simpson rule on ``[0, t]`` stands in. ``derivative`` falls back to a
    central difference.
    """

    fn: Callable
    closed_integral: Callable | None = None
    closed_derivative: Callable | None = None
    text: str = ""

    def __call__(self, t):
        return self.fn(t)

    def integral(self, t):
        if self.closed_integral is not None:
            return self.closed_integral(t)
        t = np.asarray(t, dtype=float)
        out = np.empty(t.shape)
        for idx, tv in np.ndenumerate(t):
            s = np.linspace(0.0, tv, _SIMPSON_INTERVALS + 1)
            out[idx] = simpson(np.broadcast_to(self.fn(s), s.shape), x=s) if tv > 0 else 0.0
        return out if out.ndim else float(out)

    def derivative(self, t):
        if self.closed_derivative is not None:
            return self.closed_derivative(t)
        t = np.asarray(t, dtype=float)
        d = 1e-6 * np.maximum(1.0, np.abs(t))
        return (self.fn(t + d) - self.fn(t - d)) / (2.0 * d)

    @classmethod
    def parse(cls, spec) -> "TimeFunction":
        """From a number, an expression string in ``t``, or a TimeFunction."""
        if isinstance(spec, TimeFunction):
            return spec
        if callable(spec):
            return cls(_vectorized(spec), text=getattr(spec, "__name__", "callable"))
        if isinstance(spec, bool) or not isinstance(spec, (int, float, str)):
            raise ConfigurationError(f"cannot interpret {spec!r} as a function of t")
        try:
            expr = sympy.sympify(spec, locals={"t": _t})
        except (sympy.SympifyError, SyntaxError, TypeError) as exc:
            raise ConfigurationError(f"bad time expression {spec!r}: {exc}") from exc
        if expr.free_symbols - {_t}:
            raise ConfigurationError(f"time expression {spec!r} may only use the symbol t")
        antideriv = sympy.integrate(expr, (_t, 0, _t))
        integral = None if antideriv.has(sympy.Integral) else _lambdify(_t, antideriv)
        return cls(_lambdify(_t, expr), integral, _lambdify(_t, sympy.diff(expr, _t)), str(spec))


@dataclass(frozen=True)
class ModelSpec:
    name: str
    params: dict
    make_problem: Callable[[float], SdeProblem]
    exact: Callable | None = None
    companion: "ModelSpec | None" = None
    from_companion: Callable | None = None
    exact_coefficients: Callable | None = None
    diffusion_dx: Callable | None = None
    probe_domain: tuple = ((-2.0, 2.0), (0.1, 2.0))

    def problem(self, T: float) -> SdeProblem:
        return self.make_problem(T)

    @property
    def solve_target(self) -> "ModelSpec":
        """The model the expansion solver runs on."""
        return self.companion if self.companion is not None else self


def gbm(mu=0.0, sigma: float = 0.5, x0: float = 1.0) -> ModelSpec:
    """Geometric Brownian motion ``dX = mu(t) X dt + sigma X dW``.

    Exact map ``x0 exp(sigma w + int_0^t mu - sigma**2 t / 2)`` and exact
    coefficients ``a_n(t) = x0 sigma**n exp(int_0^t mu)``.
    """
    mu_f = TimeFunction.parse(mu)
    sigma, x0 = float(sigma), float(x0)

    def make(T):
        return SdeProblem(lambda x, t: mu_f(t) * x, lambda x, t: sigma * x, x0, T, name="gbm")

    def exact(t, w):
        t = np.asarray(t, dtype=float)
        return x0 * np.exp(sigma * np.asarray(w) + mu_f.integral(t) - 0.5 * sigma**2 * t)

    def coefficients(t, N):
        growth = x0 * np.exp(mu_f.integral(np.asarray(t, dtype=float)))
        return np.multiply.outer(growth, sigma ** np.arange(N + 1))

    return ModelSpec(
        "gbm", {"mu": mu_f.text or mu, "sigma": sigma, "x0": x0}, make, exact,
        exact_coefficients=coefficients,
        diffusion_dx=lambda x, t: np.full_like(np.asarray(x, dtype=float), sigma),
        probe_domain=((0.2, 3.0), (0.1, 2.0)),
    )


def _cir_from_scale(name, params, s: TimeFunction, x0: float) -> ModelSpec:
    """Square-root model driven by a positive scale ``s(t)``.

    Companion ``dU = (s'/s) U dt + s dW`` with ``U0 = sqrt(x0)`` has
    ``U = (s/s0)(sqrt(x0) + s0 w)``; the direct equation for ``X = U**2`` is
    ``dX = (2 s'/s X + s**2) dt + 2 s sqrt(X) dW``.
    """
    if not x0 > 0:
        raise ConfigurationError(f"x0 must be positive, got {x0}", "x0")
    s0 = float(s(0.0))
    if not s0 > 0:
        raise ConfigurationError("scale function must be positive at t=0", "sigma")
    u0 = math.sqrt(x0)

    def rate(t):
        return s.derivative(t) / s(t)

    def make_u(T):
        return SdeProblem(lambda u, t: rate(t) * u, lambda u, t: s(t) + 0.0 * u, u0, T, name=f"{name}_langevin")

    def exact_u(t, w):
        return s(t) / s0 * (u0 + s0 * np.asarray(w))

    def coeff_u(t, N):
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape + (N + 1,))
        out[..., 0] = s(t) / s0 * u0
        if N >= 1:
            out[..., 1] = s(t)
        return out

    companion = ModelSpec(
        f"{name}_langevin", params, make_u, exact_u, exact_coefficients=coeff_u,
        diffusion_dx=lambda u, t: np.zeros_like(np.asarray(u, dtype=float)),
        probe_domain=((-2.0, 3.0), (0.1, 2.0)),
    )

    def make_x(T):
        return SdeProblem(
            lambda x, t: 2.0 * rate(t) * x + s(t) ** 2,
            lambda x, t: 2.0 * s(t) * np.sqrt(x),
            x0, T, state_floor=0.0, name=name,
        )

    return ModelSpec(
        name, params, make_x, lambda t, w: exact_u(t, w) ** 2,
        companion=companion, from_companion=np.square,
        probe_domain=((0.5, 4.0), (0.1, 2.0)),
    )


def cir_special(K: float, sigma_t, x0: float) -> ModelSpec:
    """Special-case CIR model with scale ``sigma(t)**K`` and ``sigma(0) = 1``.

    Solved through its Langevin companion ``dU = K sigma'/sigma U dt +
    sigma**K dW`` whose solution is ``sigma**K(t) (sqrt(x0) + w)``.
    """
    sig = TimeFunction.parse(sigma_t)
    if not math.isclose(float(sig(0.0)), 1.0, rel_tol=0, abs_tol=1e-12):
        raise ConfigurationError(f"sigma(0) must equal 1, got {float(sig(0.0))}", "sigma")
    K = float(K)
    scale = TimeFunction(
        lambda t: sig(t) ** K,
        closed_derivative=lambda t: K * sig(t) ** (K - 1.0) * sig.derivative(t),
        text=f"({sig.text})**{K}",
    )
    return _cir_from_scale("cir_special", {"variant": "template", "K": K, "sigma": sig.text, "x0": float(x0)},
                           scale, float(x0))


def cir_instance(x0: float = 1.0) -> ModelSpec:
    """``dX = (X/(t+1) + (t+1)/16) dt + sqrt((t+1) X)/2 dW``.

    Exact ``X_t = (t+1) (sqrt(x0) + W_t/4)**2`` via ``U = sqrt(X)``, which
    obeys ``dU = U/(2(t+1)) dt + sqrt(t+1)/4 dW``.
    """
    scale = TimeFunction(
        lambda t: 0.25 * np.sqrt(np.asarray(t, dtype=float) + 1.0),
        closed_derivative=lambda t: 0.125 / np.sqrt(np.asarray(t, dtype=float) + 1.0),
        text="sqrt(t+1)/4",
    )
    return _cir_from_scale("cir_special", {"variant": "instance", "x0": float(x0)}, scale, float(x0))


def arctan_model(a: float = 1.0, x0: float = 0.0) -> ModelSpec:
    """``dX = -a**2 sin X cos**3 X dt + a cos**2 X dW`` with ``X = arctan(a w + tan x0)``."""
    a, x0 = float(a), float(x0)
    if not abs(x0) < math.pi / 2:
        raise ConfigurationError(f"x0 must lie in (-pi/2, pi/2), got {x0}", "x0")
    c = math.tan(x0)

    def make(T):
        return SdeProblem(
            lambda x, t: -a * a * np.sin(x) * np.cos(x) ** 3,
            lambda x, t: a * np.cos(x) ** 2,
            x0, T, name="arctan",
        )

    return ModelSpec(
        "arctan", {"a": a, "x0": x0}, make,
        lambda t, w: np.arctan(a * np.asarray(w, dtype=float) + c) + 0.0 * np.asarray(t, dtype=float),
        diffusion_dx=lambda x, t: -2.0 * a * np.cos(x) * np.sin(x),
        probe_domain=((-1.2, 1.2), (0.1, 2.0)),
    )


def custom(drift: str, diffusion: str, x0: float, exact: str | None = None,
           state_floor: float | None = None) -> ModelSpec:
    """Model from expression strings; ``drift``/``diffusion`` in ``x, t``, ``exact`` in ``t, w``."""

    def parse(text, symbols, label):
        try:
            expr = sympy.sympify(text, locals={str(s): s for s in symbols})
        except (sympy.SympifyError, SyntaxError, TypeError) as exc:
            raise ConfigurationError(f"bad {label} expression {text!r}: {exc}", label) from exc
        extra = expr.free_symbols - set(symbols)
        if extra:
            raise ConfigurationError(f"{label} uses unknown symbols {sorted(map(str, extra))}", label)
        return expr

    F = parse(drift, (_x, _t), "drift")
    G = parse(diffusion, (_x, _t), "diffusion")
    f, g = _lambdify((_x, _t), F), _lambdify((_x, _t), G)
    phi = _lambdify((_t, _w), parse(exact, (_t, _w), "exact")) if exact is not None else None
    x0 = float(x0)

    def make(T):
        return SdeProblem(f, g, x0, T, state_floor=state_floor, name="custom")

    return ModelSpec(
        "custom", {"drift": drift, "diffusion": diffusion, "x0": x0, "exact": exact, "state_floor": state_floor},
        make, phi, diffusion_dx=_lambdify((_x, _t), sympy.diff(G, _x)),
    )


def _cir_registry(variant: str = "instance", x0: float = 1.0, K: float | None = None, sigma=None):
    if variant == "instance":
        if K is not None or sigma is not None:
            raise ConfigurationError("K and sigma apply only to variant 'template'", "variant")
        return cir_instance(x0)
    if variant == "template":
        if K is None or sigma is None:
            raise ConfigurationError("variant 'template' needs K and sigma", "K" if K is None else "sigma")
        return cir_special(K, sigma, x0)
    raise ConfigurationError(f"unknown cir_special variant {variant!r}", "variant")


MODELS: dict[str, Callable[..., ModelSpec]] = {
    "gbm": gbm,
    "cir_special": _cir_registry,
    "arctan": arctan_model,
    "custom": custom,
}


def build_model(name: str, params: dict | None = None) -> ModelSpec:
    """Instantiate a registered model; unknown parameter names are rejected."""
    if name not in MODELS:
        raise ConfigurationError(f"unknown model {name!r}; choose from {sorted(MODELS)}", "model.name")
    factory = MODELS[name]
    params = dict(params or {})
    allowed = set(inspect.signature(factory).parameters)
    unknown = sorted(set(params) - allowed)
    if unknown:
        raise ConfigurationError(f"unknown parameter(s) {unknown} for model {name!r}", f"model.params.{unknown[0]}")
    try:
        return factory(**params)
    except TypeError as exc:
        raise ConfigurationError(f"model {name!r}: {exc}", "model.params") from exc


@dataclass(frozen=True, eq=False)
class PathIndependenceReport:
    points: np.ndarray
    residuals: np.ndarray
    bounds: np.ndarray
    failures: list = field(default_factory=list)
    tol: float = 1e-4

    @property
    def max_residual(self) -> float:
        r = np.abs(self.residuals)
        return float(np.nanmax(r)) if np.isfinite(r).any() else math.nan

    @property
    def argmax(self) -> tuple[float, float]:
        k = int(np.nanargmax(np.abs(self.residuals)))
        return float(self.points[k, 0]), float(self.points[k, 1])

    @property
    def passed(self) -> bool:
        ok = np.isfinite(self.residuals)
        return bool(ok.any()) and not self.failures and bool(np.all(np.abs(self.residuals[ok]) <= self.bounds[ok]))

    def as_dict(self) -> dict:
        out = {
            "verdict": "path-independent" if self.passed else "not path-independent",
            "max_residual": self.max_residual,
            "tol": self.tol,
            "points": int(len(self.points)),
            "failures": self.failures,
        }
        if np.isfinite(self.residuals).any():
            out["max_residual_at"] = {"x": self.argmax[0], "t": self.argmax[1]}
        return out


def probe_grid(domain=((-2.0, 2.0), (0.1, 2.0)), nx: int = 9, nt: int = 7) -> np.ndarray:
    (xlo, xhi), (tlo, thi) = domain
    X, T = np.meshgrid(np.linspace(xlo, xhi, nx), np.linspace(tlo, thi, nt), indexing="ij")
    return np.column_stack([X.ravel(), T.ravel()])


def check_path_independence(problem: SdeProblem, grid=None, tol: float = 1e-4) -> PathIndependenceReport:
    """Residual of ``G F_x - F G_x - G_t - G**2/2 G_xx`` on sample points.

    Partial derivatives are central differences with steps
    ``1e-5 max(1, |x|)`` in x and ``1e-5 max(1, t)`` in t (one-sided in t
    when the point is closer to 0 than the step). A point passes when
    ``|R| <= tol (1 + |F| + |G|)``; evaluation failures are recorded per point.
    """
    pts = probe_grid() if grid is None else np.atleast_2d(np.asarray(grid, dtype=float))
    F = lambda x, t: float(problem.drift(np.asarray(x, dtype=float), t))
    G = lambda x, t: float(problem.diffusion(np.asarray(x, dtype=float), t))
    res = np.full(len(pts), np.nan)
    bounds = np.full(len(pts), np.nan)
    failures = []
    for k, (x, t) in enumerate(pts):
        dx = 1e-5 * max(1.0, abs(x))
        dt = 1e-5 * max(1.0, t)
        try:
            with np.errstate(all="raise"):
                f, g = F(x, t), G(x, t)
                fx = (F(x + dx, t) - F(x - dx, t)) / (2 * dx)
                gp, gm = G(x + dx, t), G(x - dx, t)
                gx = (gp - gm) / (2 * dx)
                gxx = (gp - 2 * g + gm) / (dx * dx)
                if t - dt >= 0:
                    gt = (G(x, t + dt) - G(x, t - dt)) / (2 * dt)
                else:
                    gt = (G(x, t + dt) - g) / dt
            r = g * fx - f * gx - gt - 0.5 * g * g * gxx
            if not math.isfinite(r):
                raise FloatingPointError("non-finite residual")
        except (ArithmeticError, ValueError) as exc:
            failures.append({"x": float(x), "t": float(t), "error": str(exc)})
            continue
        res[k] = r
        bounds[k] = tol * (1.0 + abs(f) + abs(g))
    return PathIndependenceReport(pts, res, bounds, failures, tol)
