"""Objective values and gradient pieces for the four synthesis casts.

Every objective is a max of smooth functions of the packed controller
``K_a``. :func:`objective_pieces` returns the branches whose value lies
within a relative ``eps`` of the maximum, each with its gradient, which is
what the local optimizer needs to assemble a descent direction.

All gradients flow through ``A_cl = A_a + B_a K_a C_a``: a perturbation
``tr(M dA_cl)`` maps to the controller gradient ``(C_a M B_a)^T``.
"""

import numpy as np
import scipy.linalg

from ..errors import NotHurwitzError
from ..matcore import hamiltonian_frequencies, sigma_max_many, solve_lyapunov
from ..sysmodel import augmented_matrices, close_loop, kreiss_scale
from ..transient import (
    _hinf,
    kreiss_constant,
    numerical_abscissa,
    worst_case_energy,
)

__all__ = ["LoopModel", "objective_pieces", "objective_value", "region_pieces"]


class LoopModel:
    """Augmented plant data for one synthesis problem."""

    def __init__(self, problem):
        self.problem = problem
        self.Aa, self.Ba, self.Ca = augmented_matrices(problem.plant, problem.order)
        self.J = problem.J
        self.N = self.Aa.shape[0]
        self.Ar = problem.reference

    def acl(self, Ka):
        return self.Aa + self.Ba @ Ka @ self.Ca

    def grad(self, M):
        """Controller gradient of ``Re tr(M dA_cl)``."""
        return np.real(self.Ca @ M @ self.Ba).T


# ----------------------------------------------------------------------------
# kreiss


def _peak_frequencies(Ad, J, g, w, eps):
    """Peak frequencies of ``sigma_max(J^T (jw - Ad)^{-1} J)`` within ``eps`` of ``g``.

    Intervals where the gain exceeds ``(1 - eps) g`` come from the
    Hamiltonian test; each interval not containing ``w`` is scanned on a
    fine uniform grid, twice, for its local peak.
    """
    out = [(g, w)]
    level = (1.0 - eps) * g
    D = np.zeros((J.shape[1], J.shape[1]))
    try:
        ws = hamiltonian_frequencies(Ad, J, J.T, D, level)
    except ValueError:
        return out
    if ws.size == 0:
        return out
    edges = np.concatenate([[0.0], ws])
    mids = 0.5 * (edges[:-1] + edges[1:])
    above = sigma_max_many(Ad, J, J.T, D, mids) >= level
    for a, b, up in zip(edges[:-1], edges[1:], above):
        if not up or b <= a or a <= w <= b:
            continue
        for _ in range(2):
            x = np.linspace(a, b, 33)
            v = sigma_max_many(Ad, J, J.T, D, x)
            k = int(np.argmax(v))
            a, b = x[max(k - 1, 0)], x[min(k + 1, 32)]
        if v[k] >= level:
            out.append((float(v[k]), float(x[k])))
    return out


def _kreiss_branches(model, Acl, delta, eps, with_grad=True):
    J = model.J
    N = model.N
    c = kreiss_scale(delta)
    if not np.isfinite(c):
        return [(0.0, np.zeros(model.problem.shape))]
    Ad = c * Acl - np.eye(N)
    D = np.zeros((J.shape[1], J.shape[1]))
    g, w = _hinf(Ad, J, J.T, D, 1e-8)
    if not with_grad:
        return [(g, None)]
    out = []
    for gi, wi in _peak_frequencies(Ad, J, g, w, eps):
        R = np.linalg.inv(1j * wi * np.eye(N) - Ad)
        U, S, Vh = np.linalg.svd(J.T @ R @ J)
        for k in range(len(S)):
            if S[k] < (1.0 - eps) * S[0]:
                break
            u, v = U[:, k], Vh[k].conj()
            M = c * (R @ J @ np.outer(v, u.conj()) @ J.T @ R)
            out.append((float(S[k]), model.grad(M)))
    return out


# ----------------------------------------------------------------------------
# numerical abscissa, H2 model matching, worst-case energy


def _numabs_branches(model, Acl, eps):
    J = model.J
    S = J.T @ Acl @ J
    lam, V = np.linalg.eigh(0.5 * (S + S.T))
    top = lam[-1]
    out = []
    for k in range(len(lam) - 1, -1, -1):
        if lam[k] < top - eps * max(1.0, abs(top)):
            break
        Jv = J @ V[:, k]
        out.append((float(lam[k]), model.grad(np.outer(Jv, Jv))))
    return out


def _h2match_branches(model, Acl):
    J, Ar = model.J, model.Ar
    N, n = model.N, Ar.shape[0]
    Ae = scipy.linalg.block_diag(Acl, Ar)
    Be = np.vstack([J, np.eye(n)])
    Ce = np.hstack([J.T, -np.eye(n)])
    X = solve_lyapunov(Ae.T, Be @ Be.T)
    Y = solve_lyapunov(Ae, Ce.T @ Ce)
    f2 = max(float(np.trace(Ce @ X @ Ce.T)), 0.0)
    f = np.sqrt(f2)
    if f == 0.0:
        return [(0.0, np.zeros(model.problem.shape))]
    M = 2.0 * (X @ Y)[:N, :N]
    return [(f, model.grad(M) / (2.0 * f))]


def _wcenergy_branches(model, Acl, eps):
    J = model.J
    n = J.shape[1]
    Y = solve_lyapunov(Acl, J @ J.T)
    W = J.T @ Y @ J
    verts = np.array(np.meshgrid(*([[1.0, -1.0]] * (n - 1)), indexing="ij")).reshape(n - 1, -1).T
    V = np.hstack([np.ones((verts.shape[0], 1)), verts])
    q = np.einsum("ij,jk,ik->i", V, W, V)
    f = np.sqrt(np.maximum(q, 0.0))
    top = f.max()
    out = []
    for i in np.argsort(-f):
        if f[i] < (1.0 - eps) * top or len(out) >= 8:
            break
        Jv = J @ V[i]
        Xv = solve_lyapunov(Acl.T, np.outer(Jv, Jv))
        out.append((float(f[i]), model.grad(2.0 * Xv @ Y) / (2.0 * max(f[i], 1e-300))))
    return out


# ----------------------------------------------------------------------------
# region constraint


def _eig_grads(model, Acl):
    lam, vl, vr = scipy.linalg.eig(Acl, left=True, right=True)
    out = []
    for k in range(len(lam)):
        if lam[k].imag < -1e-12 * (1 + abs(lam[k])):
            continue
        x, y = vr[:, k], vl[:, k]
        M = np.outer(x, y.conj()) / (y.conj() @ x)
        out.append((lam[k], M))
    return out


def region_pieces(model, Acl, region, eps):
    """Branches of ``alpha(A_cl) + decay`` and ``rho(A_cl) - radius``.

    Returns two lists of ``(value, gradient)`` pairs, one per constraint,
    each holding the eigenvalues within ``eps`` of the constraint's maximum.
    """
    eg = _eig_grads(model, Acl)
    re = np.array([l.real for l, _ in eg])
    mod = np.array([abs(l) for l, _ in eg])
    a_max, r_max = re.max(), mod.max()
    alpha = [(float(l.real + region.min_decay), model.grad(M))
             for l, M in eg if l.real >= a_max - eps * (region.min_decay + abs(a_max))]
    radius = [(float(abs(l) - region.radius), model.grad(M * np.conj(l) / max(abs(l), 1e-300)))
              for l, M in eg if abs(l) >= r_max - eps * r_max]
    return alpha, radius


# ----------------------------------------------------------------------------


def objective_pieces(model, Ka, scenarios, eps=1e-3):
    """Value and eps-active gradient branches of the multi-scenario objective.

    Returns ``(value, pieces)`` with ``value = inf`` and no pieces when the
    closed loop is not Hurwitz.
    """
    Acl = model.acl(Ka)
    if np.max(np.linalg.eigvals(Acl).real) >= 0:
        return np.inf, []
    kind = model.problem.objective
    if kind == "kreiss":
        pieces = []
        for d in scenarios:
            pieces += _kreiss_branches(model, Acl, d, eps)
    elif kind == "numabs":
        pieces = _numabs_branches(model, Acl, eps)
    elif kind == "h2match":
        pieces = _h2match_branches(model, Acl)
    else:
        pieces = _wcenergy_branches(model, Acl, eps)
    f = max(v for v, _ in pieces)
    pieces = [(v, g) for v, g in pieces if v >= f - eps * max(1.0, abs(f))]
    return f, pieces


def objective_value(kind, problem, K, tol=1e-4):
    """Certified value of objective ``kind`` for the closed loop of ``K``.

    ``kreiss`` returns the restricted Kreiss constant over the full delta
    range; the other kinds do not depend on delta.
    """
    sys = close_loop(problem.plant, K)
    A, J = sys.A, sys.B
    if np.max(np.linalg.eigvals(A).real) >= 0:
        raise NotHurwitzError("controller does not stabilize the plant")
    if kind == "kreiss":
        return kreiss_constant(A, J, tol=tol).value
    if kind == "numabs":
        return numerical_abscissa(J.T @ A @ J)
    if kind == "h2match":
        model = LoopModel(problem)
        return _h2match_branches(model, A)[0][0]
    if kind == "wcenergy":
        return worst_case_energy(A, J)[0]
    raise ValueError(f"unknown objective {kind!r}")
