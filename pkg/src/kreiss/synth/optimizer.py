"""Nonsmooth local minimization of max-type functions.

The oracle contract is ``oracle(x, eps) -> (f, pieces)`` where ``f`` is the
function value (``inf`` outside the domain) and ``pieces`` lists the smooth
branches ``(value, gradient)`` whose values lie within a relative ``eps`` of
``f``. Each step takes the least-norm element of the convex hull of the
active gradients in the metric of a BFGS inverse Hessian, and moves along
its negative with a weak Wolfe line search. When that stalls, gradients
sampled in a small ball around the iterate are added to the bundle and an
Armijo step is tried along the least-norm element of their hull (gradient
sampling); only if that fails too is the activity threshold ``eps`` reduced
tenfold.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from ..errors import StationarityReport

__all__ = ["OptimizerState", "min_norm_element", "local_step", "sampling_step",
           "minimize_max"]


def min_norm_element(G, H=None):
    """Least ``H``-norm point of the convex hull of the rows of ``G``.

    Returns ``(weights, g)`` with ``g = weights @ G``.
    """
    G = np.atleast_2d(G)
    k = G.shape[0]
    HG = G if H is None else G @ H
    Q = HG @ G.T
    if k == 1:
        return np.ones(1), G[0].copy()
    if k == 2:
        a, b, c = Q[0, 0], Q[0, 1], Q[1, 1]
        den = a - 2 * b + c
        t = 0.5 if den <= 0 else min(max((a - b) / den, 0.0), 1.0)
        lam = np.array([1.0 - t, t])
        return lam, lam @ G
    scale = max(float(np.max(np.abs(np.diag(Q)))), 1e-300)
    Qs = Q / scale
    lam0 = np.full(k, 1.0 / k)
    res = minimize(lambda l: l @ Qs @ l, lam0, jac=lambda l: 2 * Qs @ l, method="SLSQP",
                   bounds=[(0.0, 1.0)] * k,
                   constraints=[{"type": "eq", "fun": lambda l: l.sum() - 1.0,
                                 "jac": lambda l: np.ones_like(l)}],
                   options={"ftol": 1e-15, "maxiter": 200})
    lam = np.clip(res.x, 0.0, None)
    lam /= lam.sum()
    # keep the vertex if the QP did worse than the best single gradient
    i = int(np.argmin(np.diag(Q)))
    if Q[i, i] < lam @ Q @ lam:
        lam = np.zeros(k)
        lam[i] = 1.0
    return lam, lam @ G


@dataclass
class OptimizerState:
    """Iterate, BFGS inverse Hessian and bookkeeping for :func:`local_step`."""

    x: np.ndarray
    f: float
    pieces: list
    H: np.ndarray
    eps: float = 1e-3
    n_iter: int = 0
    n_eval: int = 0
    scaled: bool = False
    history: list = field(default_factory=list)


def _max_grad(pieces):
    v, g = max(pieces, key=lambda p: p[0])
    return np.ravel(g)


def _wolfe(oracle, x, f, d, slope, eps, t0, c1=1e-4, c2=0.9, max_iter=40):
    """Weak Wolfe bracketing line search (Lewis-Overton).

    Returns ``(t, f_t, pieces_t, n_eval)``; ``t = 0`` signals failure.
    """
    lo, hi = 0.0, np.inf
    t = t0
    best = None
    for k in range(max_iter):
        ft, pt = oracle(x + t * d, eps)
        if not np.isfinite(ft) or ft > f + c1 * t * slope:
            hi = t
        else:
            if best is None or ft < best[1]:
                best = (t, ft, pt)
            gt = _max_grad(pt) if pt else None
            if gt is None or gt @ d >= c2 * slope:
                return t, ft, pt, k + 1
            lo = t
        t = 0.5 * (lo + hi) if np.isfinite(hi) else 2.0 * t
        if np.isfinite(hi) and hi - lo <= 1e-16 * max(1.0, t):
            break
    if best is not None:
        return best[0], best[1], best[2], max_iter
    return 0.0, f, None, max_iter


def local_step(state, oracle, gtol=1e-10, max_step=None):
    """One descent iteration; updates and returns ``state``.

    Raises
    ------
    StationarityReport
        When the least-norm direction is zero at the current ``eps`` or the
        line search finds no decrease.
    """
    G = np.array([np.ravel(g) for _, g in state.pieces])
    lam, g = min_norm_element(G, state.H)
    d = -state.H @ g
    slope = float(g @ d)
    if -slope <= gtol**2 * max(1.0, abs(state.f)) ** 2:
        raise StationarityReport(f"stationary at eps={state.eps:.1e}")
    t0 = 1.0
    if not state.scaled:
        cap = max_step if max_step is not None else 0.1 * max(1.0, np.linalg.norm(state.x))
        t0 = min(1.0, cap / np.linalg.norm(d))
    t, ft, pt, ne = _wolfe(oracle, state.x, state.f, d, slope, state.eps, t0)
    state.n_eval += ne
    if t == 0.0 or not pt:
        raise StationarityReport("line search found no decrease")
    s = t * d
    y = _max_grad(pt) - g
    sy = float(s @ y)
    if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
        if not state.scaled:
            state.H = np.eye(len(s)) * (sy / float(y @ y))
            state.scaled = True
        rho = 1.0 / sy
        Hy = state.H @ y
        state.H = (state.H - rho * (np.outer(s, Hy) + np.outer(Hy, s))
                   + (rho * rho * float(y @ Hy) + rho) * np.outer(s, s))
    state.x = state.x + s
    state.f, state.pieces = ft, pt
    state.n_iter += 1
    state.history.append(ft)
    return state


def sampling_step(state, oracle, radius, rng, n_samples=None, beta=1e-6):
    """One gradient-sampling step with Armijo backtracking.

    Gradients are taken at ``n_samples`` (default ``dim + 1``) points drawn
    uniformly from the ball of ``radius`` around ``state.x``. Returns True
    and updates ``state`` when a decrease was found.
    """
    n = state.x.size
    m = n_samples or n + 1
    G = [np.ravel(g) for _, g in state.pieces]
    for _ in range(m):
        u = rng.standard_normal(n)
        u *= radius * rng.random() ** (1.0 / n) / np.linalg.norm(u)
        fi, pi = oracle(state.x + u, state.eps)
        state.n_eval += 1
        if np.isfinite(fi) and pi:
            G.append(_max_grad(pi))
    _, g = min_norm_element(np.array(G))
    gg = float(g @ g)
    if gg <= 1e-300:
        return False
    d = -g
    t = min(1.0, radius / np.sqrt(gg)) * 10.0
    for _ in range(60):
        ft, pt = oracle(state.x + t * d, state.eps)
        state.n_eval += 1
        if np.isfinite(ft) and pt and ft < state.f - beta * t * gg:
            state.x = state.x + t * d
            state.f, state.pieces = ft, pt
            state.H = np.eye(n)
            state.scaled = False
            state.n_iter += 1
            state.history.append(ft)
            return True
        t *= 0.5
    return False


def minimize_max(oracle, x0, max_iter=200, eps0=1e-3, eps_min=1e-7, gtol=1e-10,
                 ftol=1e-9, window=20, stop=None, max_step=None, seed=0):
    """Minimize a max-type function from ``x0``.

    Parameters
    ----------
    oracle : callable
        ``oracle(x, eps) -> (f, pieces)``, see the module docstring.
    stop : callable, optional
        ``stop(x, f)`` returning True ends the run early.
    seed : int
        Seed of the sampling generator; runs are deterministic.

    Returns
    -------
    OptimizerState
        Best iterate found; ``f(result) <= f(x0)``.
    """
    x0 = np.asarray(x0, float).ravel()
    f0, p0 = oracle(x0, eps0)
    if not np.isfinite(f0):
        raise ValueError("objective is not finite at the starting point")
    state = OptimizerState(x0.copy(), f0, p0, np.eye(x0.size), eps0, n_eval=1, history=[f0])
    if x0.size == 0:
        return state
    rng = np.random.default_rng(seed)
    while state.n_iter < max_iter:
        if stop is not None and stop(state.x, state.f):
            break
        try:
            local_step(state, oracle, gtol=gtol, max_step=max_step)
        except StationarityReport:
            radius = 10.0 * state.eps * max(1.0, np.linalg.norm(state.x))
            if sampling_step(state, oracle, radius, rng):
                continue
            if state.eps <= eps_min:
                break
            state.eps /= 10.0
            state.H = np.eye(x0.size) * (np.mean(np.diag(state.H)) if state.scaled else 1.0)
            state.f, state.pieces = oracle(state.x, state.eps)
            state.n_eval += 1
            continue
        h = state.history
        if len(h) > window and h[-window - 1] - h[-1] <= ftol * max(1.0, abs(h[-1])):
            break
    return state
