"""Equilibrium price search: damped global Newton with a pattern-search fallback.

Every solver entry point takes a *field*: a callable mapping a price vector
to an excess-demand vector that exposes a ``query_count`` attribute.
Plain callables can be wrapped with :class:`CountingField`.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .domain import euclidean_norm


@dataclass(frozen=True)
class SolverConfig:
    norm_threshold: float = 80.0
    max_controller_iterations: int = 10
    min_improvement: float = 1.0
    p_min: float = 1e-2
    p_max: float = 1e6
    newton_max_steps: int = 100
    newton_tol: float = 1e-6
    fd_rel_step: float = 1e-4
    fd_abs_step: float = 1e-3
    damping: float = 1.0
    max_halvings: int = 6
    max_condition: float = 1e12
    pattern_initial_mesh: float = 1.5  # log-price units: first polls at p*e^{+-1.5}
    pattern_shrink: float = 0.5
    pattern_expand: float = 2.0
    pattern_plateau_expand: float = 1.5  # differs from expand/shrink so steps never cycle
    pattern_max_evals: int | None = None  # None -> 100 * n
    pattern_tol: float = 1e-6

    def __post_init__(self):
        if self.norm_threshold <= 0:
            raise ValueError("norm_threshold must be > 0")
        if self.max_controller_iterations < 1:
            raise ValueError("max_controller_iterations must be >= 1")
        if self.p_min <= 0 or self.p_max <= self.p_min:
            raise ValueError("price bounds must satisfy 0 < p_min < p_max")
        if not 0 < self.damping <= 1:
            raise ValueError("damping must lie in (0, 1]")
        if not 0 < self.pattern_shrink < 1:
            raise ValueError("pattern_shrink must lie in (0, 1)")
        if self.pattern_initial_mesh <= 0:
            raise ValueError("pattern_initial_mesh must be > 0")

    def with_(self, **kw) -> "SolverConfig":
        return replace(self, **kw)


@dataclass
class SolverResult:
    price: np.ndarray
    residual_norm: float
    queries: int
    controller_iterations: int
    stage: str  # "newton", "pattern", or "mixed" when the controller used both
    accepted: bool
    xi: np.ndarray = None


class CountingField:
    """Wrap a plain ``p -> xi`` function with a query counter."""

    def __init__(self, fn: Callable):
        self.fn = fn
        self.query_count = 0

    def __call__(self, p):
        self.query_count += 1
        return np.atleast_1d(np.asarray(self.fn(np.asarray(p, dtype=float)), dtype=float))


def _as_field(field):
    return field if hasattr(field, "query_count") else CountingField(field)


def _clip(p, cfg: SolverConfig) -> np.ndarray:
    p = np.where(np.isfinite(p), p, cfg.p_max)
    return np.clip(p, cfg.p_min, cfg.p_max)


class _Best:
    def __init__(self, p, xi):
        self.p, self.xi, self.norm = p.copy(), xi.copy(), euclidean_norm(xi)

    def offer(self, p, xi) -> bool:
        nrm = euclidean_norm(xi)
        if nrm < self.norm:
            self.p, self.xi, self.norm = p.copy(), xi.copy(), nrm
            return True
        return False


def _eval(field, p):
    xi = np.asarray(field(p), dtype=float)
    if not np.all(np.isfinite(xi)):
        return xi, np.inf
    return xi, euclidean_norm(xi)


def fd_jacobian(field, p, cfg: SolverConfig = SolverConfig(), xi0=None) -> np.ndarray:
    """Forward-difference Jacobian; n+1 field queries (n when ``xi0`` is given).

    Near the upper price bound the step is taken backwards instead.
    Non-finite entries are zeroed, which pushes the caller to its fallback.
    """
    field = _as_field(field)
    p = np.asarray(p, dtype=float)
    f0 = np.asarray(field(p), dtype=float) if xi0 is None else np.asarray(xi0, dtype=float)
    n = len(p)
    J = np.empty((len(f0), n))
    for j in range(n):
        h = max(cfg.fd_rel_step * abs(p[j]), cfg.fd_abs_step)
        if p[j] + h > cfg.p_max:
            h = -h
        q = p.copy()
        q[j] += h
        J[:, j] = (np.asarray(field(q), dtype=float) - f0) / h
    J[~np.isfinite(J)] = 0.0
    return J


def esgn_solve(field, p0, cfg: SolverConfig = SolverConfig(), xi0=None) -> SolverResult:
    """Damped Newton iteration on the excess demand, with backtracking.

    Stops on convergence, a singular Jacobian, a failed line search, a
    vanishing step, or ``newton_max_steps``; always returns the best price seen.
    """
    field = _as_field(field)
    start = field.query_count
    p = _clip(np.asarray(p0, dtype=float), cfg)
    if xi0 is None:
        xi, nrm = _eval(field, p)
    else:
        xi = np.asarray(xi0, dtype=float)
        nrm = euclidean_norm(xi)
    best = _Best(p, xi) if np.isfinite(nrm) else None

    for _ in range(cfg.newton_max_steps):
        if not np.isfinite(nrm) or nrm <= cfg.newton_tol:
            break
        J = fd_jacobian(field, p, cfg, xi0=xi)
        if not np.all(np.isfinite(J)) or np.linalg.cond(J) > cfg.max_condition:
            break
        try:
            delta = np.linalg.solve(J, -xi)
        except np.linalg.LinAlgError:
            break
        lam = cfg.damping
        moved = False
        for _ in range(cfg.max_halvings + 1):
            trial = _clip(p + lam * delta, cfg)
            if np.array_equal(trial, p):
                break
            xt, nt = _eval(field, trial)
            if nt < nrm:
                p, xi, nrm = trial, xt, nt
                best.offer(p, xi)
                moved = True
                break
            lam *= 0.5
        if not moved:
            break

    if best is None:
        return SolverResult(p, np.inf, field.query_count - start, 1, "newton", False, xi)
    return SolverResult(best.p, best.norm, field.query_count - start, 1, "newton",
                        best.norm <= cfg.newton_tol, best.xi)


def _poll_directions(n: int) -> np.ndarray:
    # uniform price level first: with substitutes, single-price moves mostly shift demand around
    axes = ([np.ones(n)] if n > 1 else []) + list(np.eye(n))
    return np.array([s * d for d in axes for s in (1.0, -1.0)])


def pattern_search(field, p0, cfg: SolverConfig = SolverConfig(), xi0=None) -> SolverResult:
    """Bound-constrained pattern search minimising the residual norm.

    Polls run in log-price along both signs of every coordinate axis and of
    the uniform price-level direction; each signed direction keeps its own
    step. The first improving poll is taken and its step grows. A poll that
    changes nothing (a plateau of the residual) grows its step too, until
    the step spans the whole price range, after which that direction only
    shrinks; any other failed poll halves its step. Stops once every step
    is below ``pattern_tol`` or the evaluation budget is spent.
    """
    field = _as_field(field)
    start = field.query_count
    n = len(np.atleast_1d(p0))
    max_evals = cfg.pattern_max_evals if cfg.pattern_max_evals is not None else 100 * n
    span = np.log(cfg.p_max / cfg.p_min)
    p = _clip(np.asarray(p0, dtype=float), cfg)
    if xi0 is None:
        xi, f = _eval(field, p)
    else:
        xi = np.asarray(xi0, dtype=float)
        f = euclidean_norm(xi)
    dirs = _poll_directions(n)
    mesh = np.full(len(dirs), cfg.pattern_initial_mesh)
    exhausted = np.zeros(len(dirs), dtype=bool)

    j = 0
    while f > 0 and field.query_count - start < max_evals and np.any(mesh >= cfg.pattern_tol):
        while mesh[j] < cfg.pattern_tol:
            j = (j + 1) % len(dirs)
        trial = _clip(p * np.exp(mesh[j] * dirs[j]), cfg)
        if np.array_equal(trial, p):
            mesh[j] *= cfg.pattern_shrink
            j = (j + 1) % len(dirs)
            continue
        xt, ft = _eval(field, trial)
        if ft < f:
            p, xi, f = trial, xt, ft
            mesh[j] *= cfg.pattern_expand
            continue
        if ft == f and not exhausted[j]:
            if mesh[j] >= span:
                exhausted[j] = True
                mesh[j] *= cfg.pattern_shrink
            else:
                mesh[j] *= cfg.pattern_plateau_expand
        else:
            mesh[j] *= cfg.pattern_shrink
        j = (j + 1) % len(dirs)

    return SolverResult(p, f, field.query_count - start, 1, "pattern", f <= cfg.newton_tol, xi)


def find_equilibrium(field, p0, cfg: SolverConfig = SolverConfig()) -> SolverResult:
    """Newton first; while the residual stays above ``norm_threshold``, alternate
    pattern-search passes and Newton restarts.

    The loop also ends after ``max_controller_iterations`` Newton runs or
    when a pattern pass improves the residual by no more than
    ``min_improvement``. The best price seen overall is returned.
    """
    field = _as_field(field)
    start = field.query_count
    res = esgn_solve(field, p0, cfg)
    best, stage = res, "newton"
    iterations = 1
    last_gain = None
    while (best.residual_norm >= cfg.norm_threshold
           and iterations < cfg.max_controller_iterations
           and (last_gain is None or last_gain > cfg.min_improvement)):
        before = best.residual_norm
        ps = pattern_search(field, best.price, cfg, xi0=best.xi)
        last_gain = before - ps.residual_norm
        stage = "mixed"
        if ps.residual_norm < best.residual_norm:
            best = ps
        ns = esgn_solve(field, best.price, cfg, xi0=best.xi)
        iterations += 1
        if ns.residual_norm < best.residual_norm:
            best = ns

    return SolverResult(best.price, best.residual_norm, field.query_count - start, iterations,
                        stage, best.residual_norm < cfg.norm_threshold, best.xi)
