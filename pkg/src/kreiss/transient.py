"""Transient-growth analysis: abscissae, norms and the Kreiss constant.

The Kreiss constant is computed as a worst-case H-infinity norm over the
one-parameter family ``(1-delta)/(1+delta) A - I``, ``delta in [-1, 1]``.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import product

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import DimensionError, NotHurwitzError, NumericalFailure
from .matcore import (
    as_matrix,
    expm,
    hamiltonian_frequencies,
    sigma_max_many,
    solve_lyapunov,
)
from .sysmodel import _as_J, kreiss_scale

__all__ = [
    "KreissReport",
    "TransientProfile",
    "EpsProfile",
    "spectral_abscissa",
    "numerical_abscissa",
    "transient_growth",
    "hinf_norm",
    "kreiss_constant",
    "kreiss_family_norm",
    "chebyshev_grid",
    "golden_max",
    "pseudospectral_abscissa",
    "kreiss_via_eps",
    "h2_norm",
    "worst_case_energy",
]

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class KreissReport:
    """Certified (restricted) Kreiss constant with its maximizer."""

    value: float
    delta_star: float
    omega_star: float
    profile: tuple = field(repr=False)
    tol: float = 1e-4

    @property
    def s_star(self):
        """Maximizing point ``s = x + j y`` of ``Re(s) ||(sI - A)^{-1}||``."""
        c = kreiss_scale(self.delta_star)
        if c == 0 or not np.isfinite(c):
            return complex(np.inf if c == 0 else 0.0, 0.0)
        return complex(1.0 / c, self.omega_star / c)


@dataclass(frozen=True)
class TransientProfile:
    """Sampled envelope ``||J^T e^{At} J||`` and its supremum."""

    times: np.ndarray = field(repr=False)
    gains: np.ndarray = field(repr=False)
    peak: float
    t_peak: float
    horizon: float
    certified: bool = True


@dataclass(frozen=True)
class EpsProfile:
    epsilons: np.ndarray = field(repr=False)
    alphas: np.ndarray = field(repr=False)
    ratio_peak: float
    eps_star: float


def spectral_abscissa(A):
    """Largest real part of the eigenvalues of ``A``."""
    A = as_matrix(A, "A", square=True)
    if A.shape[0] == 0:
        return -np.inf
    return float(np.max(np.linalg.eigvals(A).real))


def numerical_abscissa(A):
    """Largest eigenvalue of the symmetric part ``(A + A^T)/2``."""
    A = as_matrix(A, "A", square=True)
    if A.shape[0] == 0:
        return -np.inf
    return float(np.linalg.eigvalsh(0.5 * (A + A.T))[-1])


def _require_hurwitz(A, what="A"):
    alpha = spectral_abscissa(A)
    if alpha >= 0:
        raise NotHurwitzError(
            f"{what} is not Hurwitz (spectral abscissa {alpha:.6g})", abscissa=alpha)
    return alpha


# ----------------------------------------------------------------------------
# transient growth


def _sweep(A, J, dt, n_steps, first_exact, block=1024):
    """Uniform sweep of ``t_k = k dt``, k = 0..n_steps, by repeated products.

    Exact spectral norms of ``J^T e^{A t_k} J`` are computed for every sample
    with ``t_k <= first_exact`` and, later on, only where the Frobenius norm
    (an upper bound) reaches 95% of the running peak. Returns the exactly
    evaluated ``(times, gains)`` and ``max_k ||J^T e^{A t_k}||``.
    """
    n = A.shape[0]
    E = expm(A, dt)
    B = min(block, n_steps + 1)
    P = np.empty((B, n, n))
    P[0] = np.eye(n)
    for k in range(1, B):
        P[k] = E @ P[k - 1]
    EB = E @ P[B - 1]
    times, gains = [], []
    running = 0.0
    left_max = 0.0
    M = np.eye(n)
    for start in range(0, n_steps + 1, B):
        stop = min(start + B, n_steps + 1)
        k = np.arange(start, stop)
        S = np.matmul(P[: stop - start], M)
        JS = J.T @ S
        fro_l = np.sqrt(np.sum(JS * JS, axis=(1, 2)))
        sel_l = fro_l >= left_max
        if np.any(sel_l):
            left_max = max(left_max, float(np.max(np.linalg.norm(JS[sel_l], ord=2, axis=(1, 2)))))
        SJ = JS @ J
        fro = np.sqrt(np.sum(SJ * SJ, axis=(1, 2)))
        sel = (k * dt <= first_exact) | (fro >= 0.95 * running)
        if np.any(sel):
            g = np.linalg.norm(SJ[sel], ord=2, axis=(1, 2))
            times.append(k[sel] * dt)
            gains.append(g)
            running = max(running, float(np.max(g)))
        M = EB @ M
    return np.concatenate(times), np.concatenate(gains), left_max


def transient_growth(A, J=None, tol=1e-6, n_min=4000, max_steps=5_000_000):
    """Peak of ``||J^T e^{At} J||`` over ``t >= 0``.

    A geometric scan fixes the horizon ``T``: the first time with
    ``||e^{AT}|| <= 1`` and ``||e^{AT} J|| * max_[0,T] ||J^T e^{At}|| <= peak``.
    Writing ``t = r + kT + T`` with ``r in [0, T)`` shows that no later time
    can exceed the peak. ``[0, T]`` is then swept uniformly with a step resolving the
    fastest oscillation (20 samples per period of the largest eigenvalue
    modulus), and the largest local maxima are polished with a bounded
    scalar search.

    ``times``/``gains`` of the returned profile hold every sample up to a
    few multiples of the peak time and, beyond that, the samples that were
    candidates for the peak.
    """
    A = as_matrix(A, "A", square=True)
    alpha = _require_hurwitz(A)
    N = A.shape[0]
    Jm = _as_J(J, N)
    lam = np.linalg.eigvals(A)
    rho = max(float(np.max(np.abs(lam))), 1e-12)
    t_fast = 1.0 / max(np.linalg.norm(A, 2), abs(alpha))
    T_spec = 10.0 / abs(alpha)

    def gains_at(t):
        E = expm(A, t)
        return (np.linalg.norm(Jm.T @ E @ Jm, 2), np.linalg.norm(E, 2),
                np.linalg.norm(E @ Jm, 2), np.linalg.norm(Jm.T @ E, 2))

    geo = np.concatenate([[0.0], np.geomspace(1e-3 * t_fast, 100.0 * T_spec, 600)])
    g = np.array([gains_at(t) for t in geo])
    peak_geo = float(np.max(g[:, 0]))
    t_geo = float(geo[int(np.argmax(g[:, 0]))])
    run_left = np.maximum.accumulate(g[:, 3])
    ok = (g[:, 1] <= 1.0) & (g[:, 2] * run_left <= peak_geo) & (geo > 0)
    idx = np.flatnonzero(ok)
    certified = idx.size > 0
    T = float(geo[idx[0]]) if certified else float(geo[-1])
    T = max(T, 2.0 * t_geo, 10.0 * t_fast)

    dt = min(0.1 * np.pi / rho, T / n_min)
    n_steps = int(np.ceil(T / dt))
    if n_steps > max_steps:
        n_steps = max_steps
        certified = False
    dt = T / n_steps
    times, gJ, left_max = _sweep(A, Jm, dt, n_steps, first_exact=10.0 * max(t_geo, t_fast))
    if not np.all(np.isfinite(gJ)):
        raise NumericalFailure("matrix exponential overflowed while sampling")

    peak = float(np.max(gJ))
    if certified:
        tail = gains_at(T)
        certified = tail[1] <= 1.0 + 1e-12 and tail[2] * left_max <= peak * (1 + 1e-9)

    def neg_gain(t):
        return -np.linalg.norm(Jm.T @ expm(A, t) @ Jm, 2)

    # local maxima among consecutive exact samples
    contiguous = np.isclose(np.diff(times), dt, rtol=1e-6)
    inner = np.flatnonzero(contiguous[:-1] & contiguous[1:]) + 1
    is_max = (gJ[inner] >= gJ[inner - 1]) & (gJ[inner] >= gJ[inner + 1])
    cands = inner[is_max]
    cands = cands[np.argsort(gJ[cands])[::-1][:5]]
    t_peak = float(times[int(np.argmax(gJ))])
    for i in cands:
        lo, hi = times[i - 1], times[i + 1]
        res = minimize_scalar(neg_gain, bounds=(lo, hi), method="bounded",
                              options={"xatol": max(tol * times[i], 1e-14)})
        if -res.fun > peak:
            peak, t_peak = float(-res.fun), float(res.x)
    if peak_geo > peak:
        peak, t_peak = peak_geo, t_geo
    return TransientProfile(times, gJ, peak, t_peak, T, bool(certified))


# ----------------------------------------------------------------------------
# H-infinity norm


def _hinf(A, B, C, D, tol, max_iter=100):
    """Level-set bracketing of the H-infinity norm (Boyd-Balakrishnan /
    Bruinsma-Steinbuch). Returns ``(lower bound, frequency)`` with the true
    norm below ``(1 + tol) * lower bound``."""
    n = A.shape[0]
    sd = float(np.linalg.norm(D, 2)) if D.size else 0.0
    if n == 0 or B.shape[1] == 0 or C.shape[0] == 0:
        return sd, np.inf
    lam = np.linalg.eigvals(A)
    cand = np.unique(np.concatenate([[0.0], np.abs(lam.imag), np.abs(lam)]))
    vals = sigma_max_many(A, B, C, D, cand)
    i = int(np.argmax(vals))
    g_lb, w_lb = float(vals[i]), float(cand[i])
    if sd > g_lb:
        g_lb, w_lb = sd, np.inf
    if g_lb == 0.0:
        return 0.0, 0.0
    for _ in range(max_iter):
        gamma = (1.0 + tol) * g_lb
        ws = hamiltonian_frequencies(A, B, C, D, gamma)
        if ws.size == 0:
            break
        grid = np.concatenate([[0.0], ws])
        mids = 0.5 * (grid[:-1] + grid[1:])
        mids = np.concatenate([mids, ws])
        vals = sigma_max_many(A, B, C, D, mids)
        j = int(np.argmax(vals))
        if vals[j] <= g_lb:
            break
        g_lb, w_lb = float(vals[j]), float(mids[j])
    return g_lb, w_lb


def hinf_norm(sys, tol=1e-6):
    """H-infinity norm of a stable system and a frequency attaining it.

    Returns
    -------
    value : float
        Lower bound ``g`` attained at ``omega`` with the true norm at most
        ``(1 + tol) * g``.
    omega : float
        Peak frequency (``inf`` if the feedthrough dominates).
    """
    A, B, C, D = sys.A, sys.B, sys.C, sys.D
    if A.shape[0]:
        _require_hurwitz(A, "system matrix")
    return _hinf(A, B, C, D, tol)


# ----------------------------------------------------------------------------
# Kreiss constant


def chebyshev_grid(n):
    """``n`` Chebyshev-Lobatto points on ``[-1, 1]``, ascending, endpoints included."""
    if n < 2:
        raise ValueError("need at least two grid points")
    return np.cos(np.pi * np.arange(n - 1, -1, -1) / (n - 1))


def golden_max(f, lo, hi, xtol=1e-8, max_iter=80, f_lo=None, f_hi=None):
    """Golden-section maximization of a scalar function on ``[lo, hi]``.

    Returns ``(x, f(x))`` for the best point evaluated, endpoints included
    when their values are supplied.
    """
    best = [(f_lo, lo), (f_hi, hi)]
    best = [(v, x) for v, x in best if v is not None]
    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    best += [(fc, c), (fd, d)]
    for _ in range(max_iter):
        if b - a <= xtol:
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
            best.append((fc, c))
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
            best.append((fd, d))
    v, x = max(best, key=lambda p: (p[0], -abs(p[1] - 0.5 * (lo + hi))))
    return x, v


def kreiss_family_norm(A, J, delta, tol=1e-6):
    """``|| J^T (sI - ((1-delta)/(1+delta) A - I))^{-1} J ||_inf`` and its peak frequency.

    ``delta = -1`` contributes zero.
    """
    if delta <= -1.0:
        return 0.0, 0.0
    c = kreiss_scale(delta)
    N = A.shape[0]
    Ad = c * A - np.eye(N)
    return _hinf(Ad, J, J.T, np.zeros((J.shape[1], J.shape[1])), tol)


def _map(fn, items, workers):
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(fn, items))
    return [fn(x) for x in items]


def kreiss_constant(A, J=None, tol=1e-4, n_grid=101, workers=1):
    """Kreiss constant (or its J-restricted version) of a Hurwitz matrix.

    ``K = max_{delta in [-1,1]} || J^T (sI - ((1-delta)/(1+delta) A - I))^{-1} J ||_inf``.

    The outer maximization scans a Chebyshev grid in delta and refines every
    grid-local maximum by golden-section search. Grid evaluations are
    independent; with ``workers > 1`` they run on a thread pool and are
    reduced deterministically (first index wins ties).

    Returns
    -------
    KreissReport
    """
    A = as_matrix(A, "A", square=True)
    _require_hurwitz(A)
    Jm = _as_J(J, A.shape[0])
    inner_tol = tol / 10.0
    grid = chebyshev_grid(n_grid)
    results = _map(lambda d: kreiss_family_norm(A, Jm, d, inner_tol), grid, workers)
    vals = np.array([r[0] for r in results])
    profile = [(float(d), float(v)) for d, v in zip(grid, vals)]
    i_best = int(np.argmax(vals))
    best = (float(vals[i_best]), float(grid[i_best]), float(results[i_best][1]))

    cache = {}

    def h(d):
        if d not in cache:
            cache[d] = kreiss_family_norm(A, Jm, d, inner_tol)
        return cache[d][0]

    peaks = [i for i in range(1, n_grid)
             if vals[i] >= vals[i - 1] and (i == n_grid - 1 or vals[i] >= vals[i + 1])]
    for i in peaks:
        lo = grid[i - 1]
        hi = grid[min(i + 1, n_grid - 1)]
        if hi <= lo:
            continue
        x, v = golden_max(h, lo, hi, xtol=1e-9 * max(1.0, hi - lo),
                          f_lo=vals[i - 1], f_hi=vals[min(i + 1, n_grid - 1)])
        if v > best[0]:
            w = cache[x][1] if x in cache else kreiss_family_norm(A, Jm, x, inner_tol)[1]
            best = (float(v), float(x), float(w))
    profile += [(float(d), float(r[0])) for d, r in cache.items()]
    profile.sort()
    return KreissReport(best[0], best[1], best[2], tuple(profile), tol)


# ----------------------------------------------------------------------------
# pseudospectra


def _sigma_min(z, A):
    n = A.shape[0]
    return float(np.linalg.svd(z * np.eye(n) - A, compute_uv=False)[-1])


def _horizontal(A, eps, y, tol):
    """Largest x with sigma_min((x + iy) I - A) = eps, or None."""
    n = A.shape[0]
    I = np.eye(n)
    Ay = A - 1j * y * I
    H = np.block([[Ay, eps * I], [eps * I, Ay.conj().T]])
    lam = np.linalg.eigvals(H)
    real = lam[np.abs(lam.imag) <= 1e-8 * (1.0 + np.abs(lam))].real
    for x in np.sort(real)[::-1]:
        s = _sigma_min(x + 1j * y, A)
        if abs(s - eps) <= 1e-6 * max(eps, 1e-300) + tol:
            return float(x)
    return None


def _vertical(A, eps, x):
    """Sorted y with some singular value of (x + iy) I - A equal to eps."""
    n = A.shape[0]
    I = np.eye(n)
    Ax = A - x * I
    H = np.block([[Ax, eps * I], [-eps * I, -Ax.conj().T]])
    lam = np.linalg.eigvals(H)
    y = lam[np.abs(lam.real) <= 1e-8 * (1.0 + np.abs(lam))].imag
    y = np.sort(y)
    if y.size:
        keep = np.concatenate([[True], np.diff(y) > 1e-12 * (1.0 + np.abs(y[1:]))])
        y = y[keep]
    return y


def pseudospectral_abscissa(A, eps, tol=1e-8, max_iter=100):
    """Rightmost real part of the eps-pseudospectrum by criss-cross iteration.

    Alternates vertical-line Hamiltonian searches, which find the segments of
    a vertical line inside the pseudospectrum, with horizontal searches from
    the midpoints of those segments (Burke, Lewis and Overton).
    """
    A = as_matrix(A, "A", square=True)
    if eps <= 0:
        raise ValueError("eps must be positive")
    lam = np.linalg.eigvals(A)
    order = np.argsort(-lam.real)
    x = None
    for k in order[: max(1, min(len(order), 4))]:
        xk = _horizontal(A, eps, lam[k].imag, tol)
        if xk is not None and (x is None or xk > x):
            x = xk
    if x is None:
        x = float(lam[order[0]].real) + eps
    for _ in range(max_iter):
        ys = _vertical(A, eps, x)
        mids = []
        for y0, y1 in zip(ys[:-1], ys[1:]):
            ym = 0.5 * (y0 + y1)
            if _sigma_min(x + 1j * ym, A) < eps:
                mids.append(ym)
        if not mids:
            return x
        xs = [_horizontal(A, eps, ym, tol) for ym in mids]
        xs = [v for v in xs if v is not None]
        x_new = max(xs) if xs else x
        if x_new <= x + tol:
            return max(x, x_new)
        x = x_new
    raise NumericalFailure(f"criss-cross did not converge in {max_iter} iterations")


def kreiss_via_eps(A, eps_grid=None, workers=1):
    """Lower bound ``max_eps alpha_eps(A)/eps`` over a grid of epsilons."""
    A = as_matrix(A, "A", square=True)
    _require_hurwitz(A)
    if eps_grid is None:
        eps_grid = np.logspace(-8, 1, 181)
    eps_grid = np.sort(np.asarray(eps_grid, float))
    alphas = np.array(_map(lambda e: pseudospectral_abscissa(A, e), eps_grid, workers))
    ratios = alphas / eps_grid
    i = int(np.argmax(ratios))
    return EpsProfile(eps_grid, alphas, float(ratios[i]), float(eps_grid[i]))


# ----------------------------------------------------------------------------
# H2 and worst-case energy


def h2_norm(sys):
    """H2 norm ``sqrt(trace(C X C^T))`` with ``A X + X A^T + B B^T = 0``."""
    if np.any(sys.D != 0):
        raise ValueError("H2 norm is infinite for a system with nonzero D")
    if sys.n_states == 0:
        return 0.0
    _require_hurwitz(sys.A, "system matrix")
    X = solve_lyapunov(sys.A.T, sys.B @ sys.B.T)
    return float(np.sqrt(max(np.trace(sys.C @ X @ sys.C.T), 0.0)))


def worst_case_energy(A_cl, J=None, max_states=20, chunk=1 << 15):
    """Largest output energy ``||J^T e^{A t} J v||_2`` over the cube ``||v||_inf <= 1``.

    A convex quadratic attains its maximum over a polytope at a vertex, so
    enumerating ``{-1, 1}^n`` (modulo the sign symmetry) is exact.

    Returns
    -------
    value : float
    vertex : ndarray
        Maximizing vertex, first entry normalized to +1.
    """
    A_cl = as_matrix(A_cl, "A_cl", square=True)
    _require_hurwitz(A_cl, "A_cl")
    Jm = _as_J(J, A_cl.shape[0])
    n = Jm.shape[1]
    if n > max_states:
        raise DimensionError(
            f"vertex enumeration over 2^{n} vertices exceeds the guard (n <= {max_states})")
    Y = solve_lyapunov(A_cl, Jm @ Jm.T)
    M = Jm.T @ Y @ Jm
    best_val, best_v = -np.inf, None
    tails = product((1.0, -1.0), repeat=n - 1)
    while True:
        rows = [t for _, t in zip(range(chunk), tails)]
        if not rows:
            break
        V = np.hstack([np.ones((len(rows), 1)), np.array(rows).reshape(len(rows), n - 1)])
        q = np.einsum("ij,jk,ik->i", V, M, V)
        k = int(np.argmax(q))
        if q[k] > best_val:
            best_val, best_v = float(q[k]), V[k].copy()
    return float(np.sqrt(max(best_val, 0.0))), best_v
