"""Reference stochastic integrators on shared, reproducible Brownian paths.

Increments come from a Philox counter-based generator: step ``j`` of path
``p`` is drawn from a fixed counter position determined by ``(seed, p, j)``,
so any subset of paths can be regenerated independently and every scheme
consumes exactly the same array.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.special import ndtri

from .errors import ConfigurationError
from .solver import SdeProblem

__all__ = [
    "PathEnsemble",
    "SchemeResult",
    "MCMoments",
    "standard_normals",
    "generate_paths",
    "euler_maruyama",
    "milstein",
    "mc_moments",
]

_LANES = 4  # 64-bit outputs per Philox4x64 counter block


def standard_normals(seed: int, M: int, first_path: int = 0, n_paths: int = 1) -> np.ndarray:
    """N(0, 1) draws of shape ``(n_paths, M)`` for paths ``first_path, ...``.

    Uniforms are taken from the top 53 bits of the raw stream and mapped
    through the inverse normal CDF, so each draw is tied to one counter slot.
    """
    blocks = -(-M // _LANES)
    bitgen = np.random.Philox(key=int(seed) & (2**64 - 1), counter=first_path * blocks)
    raw = bitgen.random_raw(n_paths * blocks * _LANES).reshape(n_paths, blocks * _LANES)[:, :M]
    u = ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53
    return ndtri(u)


@dataclass(frozen=True, eq=False)
class PathEnsemble:
    seed: int
    paths: int
    steps: int
    T: float
    increments: np.ndarray

    @property
    def h(self) -> float:
        return self.T / self.steps

    @property
    def times(self) -> np.ndarray:
        t = np.arange(self.steps + 1) * self.h
        t[-1] = self.T
        return t

    @property
    def W(self) -> np.ndarray:
        """Brownian values at the grid, shape ``(paths, steps + 1)``."""
        out = np.zeros((self.paths, self.steps + 1))
        np.cumsum(self.increments, axis=1, out=out[:, 1:])
        return out

    def coarsen(self, factor: int) -> "PathEnsemble":
        """Same Brownian paths observed on every ``factor``-th node."""
        if factor < 1 or self.steps % factor:
            raise ConfigurationError(f"cannot coarsen {self.steps} steps by {factor}", "factor")
        inc = self.increments.reshape(self.paths, self.steps // factor, factor).sum(axis=2)
        return PathEnsemble(self.seed, self.paths, self.steps // factor, self.T, inc)


def generate_paths(seed: int, P: int, M: int, T: float) -> PathEnsemble:
    if P < 1 or M < 1:
        raise ConfigurationError(f"need P >= 1 and M >= 1, got P={P}, M={M}", "paths" if P < 1 else "M")
    if not T > 0:
        raise ConfigurationError(f"T must be positive, got {T}", "T")
    z = standard_normals(seed, M, 0, P)
    inc = math.sqrt(T / M) * z
    inc.setflags(write=False)
    return PathEnsemble(int(seed), int(P), int(M), float(T), inc)


@dataclass(frozen=True, eq=False)
class SchemeResult:
    terminal: np.ndarray
    trajectories: np.ndarray | None = None
    failed_paths: tuple = ()
    clamp_counts: np.ndarray | None = None
    diagnostics: dict = field(default_factory=dict)


class MCMoments(NamedTuple):
    mean: float
    variance: float
    mean_stderr: float
    variance_stderr: float
    paths: int


def _diffusion(problem, x, t):
    """Diffusion with the full-truncation guard; returns values and clamp mask."""
    if problem.state_floor is None:
        return np.asarray(problem.diffusion(x, t), dtype=float), None
    below = x < problem.state_floor
    g = problem.diffusion(np.where(below, problem.state_floor, x), t)
    return np.asarray(g, dtype=float), below


def _run(problem: SdeProblem, ensemble: PathEnsemble, correction=None, keep_paths: bool = True,
         predictor_corrector: bool = False) -> SchemeResult:
    P, M, h = ensemble.paths, ensemble.steps, ensemble.h
    times = ensemble.times
    dW = ensemble.increments
    x = np.full(P, float(problem.x0))
    alive = np.ones(P, dtype=bool)
    clamps = np.zeros(P, dtype=np.int64)
    traj = np.empty((P, M + 1)) if keep_paths else None
    if keep_paths:
        traj[:, 0] = x
    failure_times = {}
    with np.errstate(all="ignore"):
        for i in range(M):
            t = times[i]
            idx = np.flatnonzero(alive)
            xa = x[idx]
            f = np.broadcast_to(problem.F(xa, t), xa.shape)
            g, below = _diffusion(problem, xa, t)
            g = np.broadcast_to(g, xa.shape)
            if below is not None:
                clamps[idx] += below
            dw = dW[idx, i]
            if predictor_corrector:
                pred = xa + f * h + g * dw
                f = 0.5 * (f + np.broadcast_to(problem.F(pred, times[i + 1]), xa.shape))
            new = xa + f * h + g * dw
            if correction is not None:
                new = new + correction(xa, t, g, dw, h)
            bad = ~np.isfinite(new)
            if bad.any():
                for p in idx[bad]:
                    failure_times[int(p)] = float(times[i + 1])
                new[bad] = np.nan
                alive[idx[bad]] = False
            x[idx] = new
            if keep_paths:
                traj[:, i + 1] = x
    return SchemeResult(
        terminal=x,
        trajectories=traj,
        failed_paths=tuple(sorted(failure_times)),
        clamp_counts=clamps,
        diagnostics={"failure_times": failure_times},
    )


def euler_maruyama(problem: SdeProblem, ensemble: PathEnsemble, *, predictor_corrector: bool = False,
                   keep_paths: bool = True) -> SchemeResult:
    """``X_{i+1} = X_i + F h + G dW_i`` on every path of ``ensemble``.

    With ``predictor_corrector`` the drift is averaged between the current
    state and an Euler predictor; the diffusion term stays explicit.
    A path whose state turns non-finite is frozen at NaN and listed in
    ``failed_paths``; the remaining paths continue.
    """
    return _run(problem, ensemble, None, keep_paths, predictor_corrector)


def milstein(problem: SdeProblem, ensemble: PathEnsemble, gx=None, *, keep_paths: bool = True) -> SchemeResult:
    """Euler-Maruyama plus ``0.5 G G_x (dW**2 - h)``.

    ``gx(x, t)`` supplies the x-derivative of the diffusion; without it a
    central difference with step ``1e-6 * max(1, |x|)`` is used.
    """

    def correction(x, t, g, dw, h):
        if gx is not None:
            dg = np.broadcast_to(np.asarray(gx(x, t), dtype=float), x.shape)
        else:
            step = 1e-6 * np.maximum(1.0, np.abs(x))
            up, _ = _diffusion(problem, x + step, t)
            dn, _ = _diffusion(problem, x - step, t)
            dg = (up - dn) / (2.0 * step)
        return 0.5 * g * dg * (dw * dw - h)

    return _run(problem, ensemble, correction, keep_paths)


def mc_moments(result: SchemeResult | np.ndarray) -> MCMoments:
    """Sample mean and variance of terminal values, with standard errors.

    Failed (NaN) paths are excluded. The variance standard error uses the
    fourth central moment, ``sqrt((m4 - s**4) / P)``.
    """
    x = np.asarray(result.terminal if isinstance(result, SchemeResult) else result, dtype=float)
    x = x[np.isfinite(x)]
    P = x.size
    if P < 2:
        raise ConfigurationError(f"need at least 2 finite paths, got {P}", "paths")
    mean = float(x.mean())
    d = x - mean
    var = float(d @ d / (P - 1))
    m4 = float(np.mean(d**4))
    return MCMoments(mean, var, math.sqrt(var / P), math.sqrt(max(m4 - var * var, 0.0) / P), P)
