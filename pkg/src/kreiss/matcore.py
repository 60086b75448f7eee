"""Dense numerical kernels: matrix exponential, Lyapunov solves and the
Hamiltonian imaginary-axis test behind H-infinity level-set methods."""

import numpy as np
import scipy.linalg

from .errors import DimensionError, NotHurwitzError

__all__ = [
    "as_matrix",
    "expm",
    "solve_lyapunov",
    "imaginary_axis_crossings",
    "hamiltonian_frequencies",
    "sigma_max",
    "sigma_max_many",
    "freqresp",
    "IMAG_TOL",
]

# Hamiltonian eigenvalue lam counts as imaginary when |Re lam| <= IMAG_TOL*(1+|lam|).
IMAG_TOL = 1e-8

# Higham (2005) backward-error thresholds for the [m/m] Pade approximants.
_PADE_THETA = {
    3: 1.495585217958292e-2,
    5: 2.539398330063230e-1,
    7: 9.504178996162932e-1,
    9: 2.097847961257068e0,
    13: 5.371920351148152e0,
}

_PADE_COEFFS = {
    3: (120.0, 60.0, 12.0, 1.0),
    5: (30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0),
    7: (17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0),
    9: (17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0,
        2162160.0, 110880.0, 3960.0, 90.0, 1.0),
    13: (64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
         1187353796428800.0, 129060195264000.0, 10559470521600.0,
         670442572800.0, 33522128640.0, 1323241920.0, 40840800.0,
         960960.0, 16380.0, 182.0, 1.0),
}


def as_matrix(a, name="A", square=False, dtype=float):
    """Coerce `a` to a finite 2-D array, optionally checking squareness."""
    a = np.atleast_2d(np.asarray(a, dtype=dtype))
    if a.ndim != 2:
        raise DimensionError(f"{name} must be a 2-D matrix, got ndim={a.ndim}")
    if square and a.shape[0] != a.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has non-finite entries")
    return a


def _pade(A, m):
    n = A.shape[0]
    b = _PADE_COEFFS[m]
    ident = np.eye(n)
    A2 = A @ A
    if m == 13:
        A4 = A2 @ A2
        A6 = A2 @ A4
        U = A @ (A6 @ (b[13] * A6 + b[11] * A4 + b[9] * A2)
                 + b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * ident)
        V = (A6 @ (b[12] * A6 + b[10] * A4 + b[8] * A2)
             + b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * ident)
    else:
        powers = [ident, A2]
        for _ in range(2, m // 2 + 1):
            powers.append(powers[-1] @ A2)
        U = sum(b[2 * k + 1] * powers[k] for k in range(m // 2 + 1))
        U = A @ U
        V = sum(b[2 * k] * powers[k] for k in range(m // 2 + 1))
    return scipy.linalg.solve(V - U, V + U)


def expm(A, t=1.0):
    """Matrix exponential ``e^{A t}`` by scaling and squaring.

    The Pade degree is the smallest of 3, 5, 7, 9, 13 whose threshold covers
    ``||A t||_1``; otherwise the matrix is scaled by ``2^-s`` so the degree-13
    approximant applies and the result is squared ``s`` times.

    Parameters
    ----------
    A : (n, n) array_like
        Real square matrix.
    t : float
        Non-negative time.

    Returns
    -------
    (n, n) ndarray
    """
    A = as_matrix(A, "A", square=True)
    if not np.isfinite(t) or t < 0:
        raise ValueError(f"t must be finite and non-negative, got {t}")
    At = A * t
    n = At.shape[0]
    if n == 0:
        return At.copy()
    norm1 = np.linalg.norm(At, 1)
    for m in (3, 5, 7, 9):
        if norm1 <= _PADE_THETA[m]:
            return _pade(At, m)
    s = 0
    if norm1 > _PADE_THETA[13]:
        s = int(np.ceil(np.log2(norm1 / _PADE_THETA[13])))
    F = _pade(At / 2.0**s, 13)
    for _ in range(s):
        F = F @ F
    return F


def solve_lyapunov(A, Q):
    """Solve ``A^T X + X A + Q = 0`` for symmetric ``X``.

    Bartels-Stewart on the complex Schur form ``A = U T U^H``: the
    transformed equation ``T^H Y + Y T = -U^H Q U`` is lower-triangular in
    each column of ``Y`` and solved by forward substitution column by column.
    """
    A = as_matrix(A, "A", square=True)
    Q = as_matrix(Q, "Q", square=True)
    if A.shape != Q.shape:
        raise DimensionError(f"A {A.shape} and Q {Q.shape} must have the same shape")
    n = A.shape[0]
    if n == 0:
        return np.zeros((0, 0))
    T, U = scipy.linalg.schur(A, output="complex")
    alpha = np.max(np.diag(T).real)
    if alpha >= 0:
        raise NotHurwitzError(
            f"Lyapunov equation needs a Hurwitz A (spectral abscissa {alpha:.3e})",
            abscissa=alpha)
    Qt = U.conj().T @ Q @ U
    TH = T.conj().T
    Y = np.zeros((n, n), dtype=complex)
    ident = np.eye(n)
    for j in range(n):
        rhs = -Qt[:, j] - Y[:, :j] @ T[:j, j]
        Y[:, j] = scipy.linalg.solve_triangular(TH + T[j, j] * ident, rhs, lower=True)
    X = (U @ Y @ U.conj().T).real
    return 0.5 * (X + X.T)


def freqresp(A, B, C, D, omega):
    """Transfer matrix ``C (j omega I - A)^{-1} B + D`` at a single frequency."""
    n = A.shape[0]
    if n == 0:
        return D.astype(complex)
    X = np.linalg.solve(1j * omega * np.eye(n) - A, B)
    return C @ X + D


def sigma_max(A, B, C, D, omega):
    """Largest singular value of the transfer matrix at ``j omega``."""
    G = freqresp(A, B, C, D, omega)
    if G.size == 0:
        return 0.0
    return float(np.linalg.norm(G, 2))


def sigma_max_many(A, B, C, D, omegas):
    """Largest singular values at several frequencies (batched solves)."""
    omegas = np.asarray(omegas, float).ravel()
    n = A.shape[0]
    if omegas.size == 0:
        return np.zeros(0)
    if n == 0:
        return np.full(omegas.size, np.linalg.norm(D, 2) if D.size else 0.0)
    W = 1j * omegas[:, None, None] * np.eye(n) - A
    X = np.linalg.solve(W, np.broadcast_to(B.astype(complex), (omegas.size,) + B.shape))
    G = C @ X + D
    if G.shape[1] == 0 or G.shape[2] == 0:
        return np.zeros(omegas.size)
    return np.linalg.svd(G, compute_uv=False)[:, 0]


def _unpack(sys):
    return (np.asarray(sys.A, float), np.asarray(sys.B, float),
            np.asarray(sys.C, float), np.asarray(sys.D, float))


def hamiltonian_frequencies(A, B, C, D, gamma):
    """Raw non-negative frequencies where *some* singular value equals gamma.

    These are the imaginary parts of the purely imaginary eigenvalues of the
    2n x 2n Hamiltonian associated with level ``gamma``. Returned sorted and
    deduplicated; callers that need only crossings of the largest singular
    value should filter (see :func:`imaginary_axis_crossings`).
    """
    n = A.shape[0]
    m = B.shape[1]
    p = C.shape[0]
    if n == 0:
        return np.zeros(0)
    DtD = D.T @ D
    sd = np.linalg.norm(D, 2) if D.size else 0.0
    if gamma <= sd:
        raise ValueError(
            f"gamma={gamma} must exceed the feedthrough singular value {sd}")
    R = gamma**2 * np.eye(m) - DtD
    Rinv = np.linalg.inv(R)
    Ah = A + B @ Rinv @ D.T @ C
    H = np.block([
        [Ah, B @ Rinv @ B.T],
        [-C.T @ (np.eye(p) + D @ Rinv @ D.T) @ C, -Ah.T],
    ])
    lam = np.linalg.eigvals(H)
    imag = np.abs(lam.real) <= IMAG_TOL * (1.0 + np.abs(lam))
    w = np.abs(lam[imag].imag)
    if w.size == 0:
        return w
    w = np.sort(w)
    keep = np.concatenate([[True], np.diff(w) > 1e-10 * (1.0 + w[1:])])
    return w[keep]


def imaginary_axis_crossings(sys, gamma):
    """Frequencies ``omega >= 0`` where the largest singular value equals gamma.

    Parameters
    ----------
    sys : StateSpace-like
        Object with ``A, B, C, D`` attributes and Hurwitz ``A``.
    gamma : float
        Level, strictly above the feedthrough singular value.

    Returns
    -------
    list of float
        Empty when the H-infinity norm is strictly below ``gamma``.
    """
    A, B, C, D = _unpack(sys)
    if A.shape[0]:
        alpha = np.max(np.linalg.eigvals(A).real)
        if alpha >= 0:
            raise NotHurwitzError(
                f"system is not stable (spectral abscissa {alpha:.3e})", abscissa=alpha)
    w = hamiltonian_frequencies(A, B, C, D, gamma)
    vals = sigma_max_many(A, B, C, D, w)
    return [float(wi) for wi, v in zip(w, vals) if abs(v / gamma - 1.0) <= 1e-6]
