"""Simulation of the two-state non-normal system with a norm-dependent
rotation, ``x' = A x + ||x|| B_x x + B u``, in open and closed loop."""

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .errors import DivergenceError, NoThresholdError
from .fixtures import nl_matrices
from .sysmodel import Controller

__all__ = ["NonlinearSystem", "Trajectory", "simulate", "threshold_search", "classify"]

ORIGIN_TOL = 1e-9
REMOTE_MIN = 1e-2
FIELD_TOL = 1e-8
BLOWUP = 1e8


@dataclass(frozen=True, eq=False)
class NonlinearSystem:
    """``x' = A x + ||x|| B_x x + B u``, ``y = C x``."""

    A: np.ndarray
    B_x: np.ndarray
    B: np.ndarray
    C: np.ndarray
    R: float = 25.0

    @classmethod
    def default(cls, R=25.0, linear=False):
        A, Bx, B, C = nl_matrices(R)
        return cls(A, np.zeros_like(Bx) if linear else Bx, B, C, R)

    @property
    def n(self):
        return self.A.shape[0]

    def field(self, x, u=None):
        f = self.A @ x + np.linalg.norm(x) * (self.B_x @ x)
        if u is not None:
            f = f + self.B @ u
        return f

    def rhs(self, K=None):
        """Right-hand side on the joint state ``[x; x_K]``."""
        n = self.n
        if K is None:
            return lambda t, z: self.field(z)

        def f(t, z):
            x, xk = z[:n], z[n:]
            y = self.C @ x
            u = K.C_K @ xk + K.D_K @ y
            return np.concatenate([self.field(x, u), K.A_K @ xk + K.B_K @ y])
        return f

    def linearization(self, K=None):
        """Closed-loop state matrix at the origin (where ``||x|| B_x x`` is second order)."""
        if K is None:
            return self.A.copy()
        A, B, C = self.A, self.B, self.C
        return np.block([[A + B @ K.D_K @ C, B @ K.C_K], [K.B_K @ C, K.A_K]])


@dataclass
class Trajectory:
    """Integrated trajectory; ``states`` holds plant then controller states."""

    times: np.ndarray
    states: np.ndarray
    norms: np.ndarray
    classification: str
    n_plant: int
    field_norm: float = np.nan
    info: dict = field(default_factory=dict)

    @property
    def final(self):
        return self.states[:, -1]

    def is_monotone(self, rtol=1e-8, atol=1e-14):
        """``||x(t)||`` nonincreasing up to a relative slack."""
        d = np.diff(self.norms)
        return bool(np.all(d <= rtol * self.norms[:-1] + atol))

    def to_csv(self, path):
        """Write ``t, x1..xN, norm`` rows."""
        N = self.states.shape[0]
        names = [f"x{i + 1}" for i in range(self.n_plant)]
        names += [f"xk{i + 1}" for i in range(N - self.n_plant)]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t"] + names + ["norm"])
            for k in range(len(self.times)):
                w.writerow([repr(float(self.times[k]))]
                           + [repr(float(v)) for v in self.states[:, k]]
                           + [repr(float(self.norms[k]))])


def classify(sys, z_end, K=None):
    """``origin``, ``remote`` or ``undecided`` from the terminal state.

    Returns the label and the vector-field norm at ``z_end``.
    """
    n = sys.n
    f = sys.rhs(K)(0.0, z_end)
    fn = float(np.linalg.norm(f))
    nx = float(np.linalg.norm(z_end[:n]))
    if nx < ORIGIN_TOL:
        lin = sys.linearization(K)
        stable = lin.size == 0 or np.max(np.linalg.eigvals(lin).real) < 0
        return ("origin" if stable else "undecided"), fn
    if nx > REMOTE_MIN and fn < FIELD_TOL:
        return "remote", fn
    return "undecided", fn


def simulate(sys, K=None, x0=None, T=2000.0, tol=1e-10):
    """Integrate from plant state ``x0`` (controller state starts at zero).

    Uses the Dormand-Prince 5(4) pair with relative local error ``tol`` and
    absolute error ``1e-6 * tol``.

    Raises
    ------
    DivergenceError
        Integration failure or ``||x||`` exceeding ``1e8``.
    """
    x0 = np.asarray(x0 if x0 is not None else np.zeros(sys.n), float).ravel()
    if x0.shape != (sys.n,) or not np.all(np.isfinite(x0)):
        raise ValueError(f"x0 must be a finite vector of length {sys.n}")
    if not T > 0:
        raise ValueError("T must be positive")
    if K is not None and not isinstance(K, Controller):
        raise TypeError("K must be a Controller or None")
    nk = 0 if K is None else K.n_K
    z0 = np.concatenate([x0, np.zeros(nk)])
    n = sys.n

    def blowup(t, z):
        return BLOWUP - np.linalg.norm(z[:n])
    blowup.terminal = True

    sol = solve_ivp(sys.rhs(K), (0.0, T), z0, method="RK45", rtol=tol, atol=1e-6 * tol,
                    events=blowup)
    if sol.status == -1:
        raise DivergenceError(f"integration failed from x0={x0.tolist()}: {sol.message}")
    if sol.status == 1:
        raise DivergenceError(f"trajectory from x0={x0.tolist()} blew up at t={sol.t[-1]:.4g}")
    norms = np.linalg.norm(sol.y[:n], axis=0)
    label, fn = classify(sys, sol.y[:, -1], K)
    return Trajectory(sol.t, sol.y, norms, label, n, fn, {"nfev": sol.nfev})


def threshold_search(sys, K=None, direction=(0.0, 1.0), bracket=(1e-5, 1e-2), rtol=1e-6,
                     T=2000.0, tol=1e-10):
    """Critical amplitude along ``direction`` separating origin from remote.

    Geometric bisection on the amplitude until ``hi/lo - 1 <= rtol``.

    Raises
    ------
    NoThresholdError
        Both bracket ends give the same terminal classification.
    """
    d = np.asarray(direction, float)
    d = d / np.linalg.norm(d)
    lo, hi = map(float, bracket)
    if not 0 < lo < hi:
        raise ValueError("bracket must satisfy 0 < low < high")

    def label(a):
        return simulate(sys, K, a * d, T, tol).classification

    c_lo, c_hi = label(lo), label(hi)
    if c_lo == c_hi:
        raise NoThresholdError(f"both bracket ends classify as {c_lo!r}")
    while hi / lo - 1.0 > rtol:
        mid = np.sqrt(lo * hi)
        c = label(mid)
        if c == "undecided":
            c = simulate(sys, K, mid * d, 4 * T, tol).classification
        if c == c_lo:
            lo = mid
        else:
            hi = mid
    return float(np.sqrt(lo * hi))
