"""State-space and LFT plumbing.

Conventions
-----------
A :class:`TwoPortPlant` orders its inputs as ``[w_delta, w, u]`` and its
outputs as ``[z_delta, z, y]``. Closing ``w_delta = delta * z_delta`` is the
upper LFT; closing ``u = K_a y`` is the lower LFT.

For the augmented plant of a dynamic controller of order ``n_K`` the control
channel is ordered controller-state inputs first, then physical inputs::

    u = [u_K; u_plant]     (n_K + m entries)
    y = [x_K; y_plant]     (n_K + p entries)

so that the packed controller ``K_a = [[A_K, B_K], [C_K, D_K]]`` maps ``y``
to ``u`` by plain matrix multiplication.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, WellPosednessError
from .matcore import as_matrix, freqresp

__all__ = [
    "StateSpace",
    "TwoPortPlant",
    "Controller",
    "ProjectionJ",
    "Block",
    "star",
    "close_static",
    "kreiss_scale",
    "build_kreiss_plant",
    "close_loop",
    "augment",
    "augmented_matrices",
    "q_template",
    "WELLPOSED_COND",
]

WELLPOSED_COND = 1e12


def kreiss_scale(delta):
    """Map ``delta in (-1, 1]`` to the resolvent scale ``(1 - delta)/(1 + delta)``."""
    if delta <= -1.0:
        return np.inf
    return (1.0 - delta) / (1.0 + delta)


@dataclass(frozen=True, eq=False)
class StateSpace:
    """Real continuous-time LTI system ``(A, B, C, D)``."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        A = as_matrix(self.A, "A", square=True)
        n = A.shape[0]
        B = self._coerce(self.B, "B", n, rows=True)
        C = self._coerce(self.C, "C", n, rows=False)
        D = np.asarray(self.D, float)
        if D.ndim == 2:
            D = as_matrix(D, "D") if D.size else D
        elif D.size:
            D = as_matrix(D, "D")
        else:
            D = np.zeros((C.shape[0], B.shape[1]))
        if B.shape[0] != n:
            raise DimensionError(f"B has {B.shape[0]} rows, expected {n}")
        if C.shape[1] != n:
            raise DimensionError(f"C has {C.shape[1]} columns, expected {n}")
        if D.shape != (C.shape[0], B.shape[1]):
            raise DimensionError(
                f"D has shape {D.shape}, expected {(C.shape[0], B.shape[1])}")
        for name, val in zip("ABCD", (A, B, C, D)):
            val = val.copy()
            val.setflags(write=False)
            object.__setattr__(self, name, val)

    @staticmethod
    def _coerce(val, name, n, rows):
        val = np.asarray(val, float)
        if val.ndim == 2:
            return as_matrix(val, name) if val.size else val
        if val.size == 0:
            return np.zeros((n, 0)) if rows else np.zeros((0, n))
        val = val.reshape(n, -1) if rows else val.reshape(-1, n)
        return as_matrix(val, name)

    @property
    def n_states(self):
        return self.A.shape[0]

    @property
    def n_inputs(self):
        return self.B.shape[1]

    @property
    def n_outputs(self):
        return self.C.shape[0]

    def evaluate(self, s):
        """Transfer matrix at complex frequency ``s``."""
        n = self.n_states
        if n == 0:
            return self.D.astype(complex)
        return self.C @ np.linalg.solve(s * np.eye(n) - self.A, self.B) + self.D

    def freqresp(self, omega):
        return freqresp(self.A, self.B, self.C, self.D, omega)

    def poles(self):
        return np.linalg.eigvals(self.A)

    def is_hurwitz(self):
        return self.n_states == 0 or np.max(self.poles().real) < 0

    def __repr__(self):
        return (f"StateSpace(n={self.n_states}, inputs={self.n_inputs}, "
                f"outputs={self.n_outputs})")


@dataclass(frozen=True, eq=False)
class TwoPortPlant:
    """Partitioned plant with uncertainty, performance and control channels."""

    inner: StateSpace
    n_delta: int
    n_w: int
    n_z: int
    n_u: int = 0
    n_y: int = 0

    def __post_init__(self):
        if self.inner.n_inputs != self.n_delta + self.n_w + self.n_u:
            raise DimensionError("input channels do not partition the plant inputs")
        if self.inner.n_outputs != self.n_delta + self.n_z + self.n_y:
            raise DimensionError("output channels do not partition the plant outputs")

    def close_controller(self, Ka):
        """Lower LFT ``P star K_a`` with a static (packed) gain; drops u/y."""
        Ka = np.atleast_2d(np.asarray(Ka, float))
        if Ka.shape != (self.n_u, self.n_y):
            raise DimensionError(f"K_a has shape {Ka.shape}, expected {(self.n_u, self.n_y)}")
        if self.n_u == 0 and self.n_y == 0:
            return self
        closed = close_static(self.inner, Ka, self.n_u, self.n_y, side="lower")
        return TwoPortPlant(closed, self.n_delta, self.n_w, self.n_z)

    def close_delta(self, delta):
        """Upper LFT ``delta I star P``; returns the remaining [w,u] -> [z,y] system.

        At ``delta = -1`` the interconnection is the zero system by convention.
        """
        nd = self.n_delta
        if delta <= -1.0:
            sys = self.inner
            n_in = sys.n_inputs - nd
            n_out = sys.n_outputs - nd
            return StateSpace(np.zeros((0, 0)), np.zeros((0, n_in)),
                              np.zeros((n_out, 0)), np.zeros((n_out, n_in)))
        return close_static(self.inner, delta * np.eye(nd), nd, nd, side="upper")

    def transfer(self, delta, omega, Ka=None):
        """Evaluate ``(delta I star P star K_a)(j omega)`` on the w -> z channel."""
        plant = self if Ka is None else self.close_controller(Ka)
        sys = plant.close_delta(delta)
        G = sys.freqresp(omega)
        return G[: self.n_z, : self.n_w]


@dataclass(frozen=True)
class ProjectionJ:
    """Embedding of the plant states into the closed-loop state, ``[I_n; 0]``."""

    n: int
    n_K: int = 0

    @property
    def matrix(self):
        return np.vstack([np.eye(self.n), np.zeros((self.n_K, self.n))])

    @property
    def total(self):
        return self.n + self.n_K


def _as_J(J, N):
    """Accept ``ProjectionJ``, an explicit matrix or ``None`` (identity)."""
    if J is None:
        return np.eye(N)
    if isinstance(J, ProjectionJ):
        if J.total != N:
            raise DimensionError(f"J covers {J.total} states, matrix has {N}")
        return J.matrix
    J = np.atleast_2d(np.asarray(J, float))
    if J.shape[0] != N:
        raise DimensionError(f"J has {J.shape[0]} rows, expected {N}")
    return J


@dataclass(frozen=True, eq=False)
class Controller:
    """Static gain (``n_K = 0``) or dynamic output-feedback controller."""

    A_K: np.ndarray
    B_K: np.ndarray
    C_K: np.ndarray
    D_K: np.ndarray

    def __post_init__(self):
        D = np.atleast_2d(np.asarray(self.D_K, float))
        m, p = D.shape
        A = np.atleast_2d(np.asarray(self.A_K, float)) if np.size(self.A_K) else np.zeros((0, 0))
        nk = A.shape[0]
        B = np.asarray(self.B_K, float).reshape(nk, p)
        C = np.asarray(self.C_K, float).reshape(m, nk)
        if A.shape != (nk, nk):
            raise DimensionError("A_K must be square")
        for name, val in zip(("A_K", "B_K", "C_K", "D_K"), (A, B, C, D)):
            if not np.all(np.isfinite(val)):
                raise ValueError(f"{name} has non-finite entries")
            val = val.copy()
            val.setflags(write=False)
            object.__setattr__(self, name, val)

    @classmethod
    def static(cls, K):
        K = np.atleast_2d(np.asarray(K, float))
        m, p = K.shape
        return cls(np.zeros((0, 0)), np.zeros((0, p)), np.zeros((m, 0)), K)

    @classmethod
    def from_packed(cls, Ka, n_K, m, p):
        Ka = np.asarray(Ka, float).reshape(n_K + m, n_K + p)
        return cls(Ka[:n_K, :n_K], Ka[:n_K, n_K:], Ka[n_K:, :n_K], Ka[n_K:, n_K:])

    @classmethod
    def zeros(cls, n_K, m, p):
        return cls.from_packed(np.zeros((n_K + m, n_K + p)), n_K, m, p)

    @property
    def kind(self):
        return "static" if self.n_K == 0 else "dynamic"

    @property
    def n_K(self):
        return self.A_K.shape[0]

    @property
    def n_u(self):
        return self.D_K.shape[0]

    @property
    def n_y(self):
        return self.D_K.shape[1]

    @property
    def packed(self):
        """``K_a = [[A_K, B_K], [C_K, D_K]]``."""
        return np.block([[self.A_K, self.B_K], [self.C_K, self.D_K]])

    def to_vector(self):
        return self.packed.ravel().copy()

    @classmethod
    def from_vector(cls, theta, n_K, m, p):
        return cls.from_packed(np.asarray(theta, float), n_K, m, p)

    def __repr__(self):
        return f"Controller(kind={self.kind}, n_K={self.n_K}, m={self.n_u}, p={self.n_y})"


@dataclass(frozen=True, eq=False)
class Block:
    """A matrix partitioned as ``[[M11, M12], [M21, M22]]``.

    ``rows`` and ``cols`` give the sizes of the first block row/column.
    """

    mat: np.ndarray
    rows: int
    cols: int

    def __post_init__(self):
        mat = np.atleast_2d(np.asarray(self.mat))
        if not (0 <= self.rows <= mat.shape[0] and 0 <= self.cols <= mat.shape[1]):
            raise DimensionError("partition sizes exceed the matrix shape")
        object.__setattr__(self, "mat", mat)

    @classmethod
    def from_blocks(cls, M11, M12, M21, M22):
        M11, M12, M21, M22 = (np.atleast_2d(np.asarray(x)) for x in (M11, M12, M21, M22))
        return cls(np.block([[M11, M12], [M21, M22]]), M11.shape[0], M11.shape[1])

    @property
    def M11(self):
        return self.mat[: self.rows, : self.cols]

    @property
    def M12(self):
        return self.mat[: self.rows, self.cols:]

    @property
    def M21(self):
        return self.mat[self.rows:, : self.cols]

    @property
    def M22(self):
        return self.mat[self.rows:, self.cols:]


def _loop_inverse(X, what):
    if X.shape[0] == 0:
        return X.copy()
    if np.linalg.cond(X) > WELLPOSED_COND:
        raise WellPosednessError(f"interconnection is not well posed: {what} is singular")
    return np.linalg.inv(X)


def star(M, N):
    """Redheffer star product ``M star N``.

    Both arguments are :class:`Block` for the full product. If ``N`` is a
    plain matrix the result is the lower LFT ``M11 + M12 N (I - M22 N)^{-1} M21``;
    if ``M`` is a plain matrix it is the upper LFT
    ``N22 + N21 M (I - N11 M)^{-1} N12``.
    """
    if isinstance(M, Block) and isinstance(N, Block):
        if M.M22.shape != (N.M11.shape[1], N.M11.shape[0]):
            raise DimensionError("M22 and N11 are not conformable")
        k = M.M22.shape[0]
        l = N.M11.shape[0]
        inv_NM = _loop_inverse(np.eye(l) - N.M11 @ M.M22, "I - N11 M22")
        inv_MN = _loop_inverse(np.eye(k) - M.M22 @ N.M11, "I - M22 N11")
        R11 = M.M11 + M.M12 @ N.M11 @ inv_MN @ M.M21
        R12 = M.M12 @ inv_NM @ N.M12
        R21 = N.M21 @ inv_MN @ M.M21
        R22 = N.M22 + N.M21 @ M.M22 @ inv_NM @ N.M12
        return Block.from_blocks(R11, R12, R21, R22)
    if isinstance(M, Block):
        N = np.atleast_2d(np.asarray(N))
        if N.shape != (M.M22.shape[1], M.M22.shape[0]):
            raise DimensionError("N is not conformable with M22")
        inv = _loop_inverse(np.eye(M.M22.shape[0]) - M.M22 @ N, "I - M22 N")
        return M.M11 + M.M12 @ N @ inv @ M.M21
    if isinstance(N, Block):
        M = np.atleast_2d(np.asarray(M))
        if M.shape != (N.M11.shape[1], N.M11.shape[0]):
            raise DimensionError("M is not conformable with N11")
        inv = _loop_inverse(np.eye(N.M11.shape[0]) - N.M11 @ M, "I - N11 M")
        return N.M22 + N.M21 @ M @ inv @ N.M12
    raise TypeError("at least one argument of star() must be a Block")


def q_template(n=1):
    """Constant matrix realizing ``(1 - delta)/(1 + delta) = delta star Q``."""
    I = np.eye(n)
    r2 = np.sqrt(2.0)
    return Block.from_blocks(-I, r2 * I, -r2 * I, I)


def close_static(sys, gain, n_in, n_out, side="lower"):
    """Close a static gain around one channel of a state-space system.

    ``side='lower'`` closes the *last* ``n_in`` inputs with the *last*
    ``n_out`` outputs (``u = gain @ y``); ``side='upper'`` closes the first ones.
    """
    gain = np.atleast_2d(np.asarray(gain, float))
    if gain.shape != (n_in, n_out):
        raise DimensionError(f"gain has shape {gain.shape}, expected {(n_in, n_out)}")
    A, B, C, D = sys.A, sys.B, sys.C, sys.D
    mi, po = B.shape[1], C.shape[0]
    if side == "lower":
        i1, i2 = slice(0, mi - n_in), slice(mi - n_in, mi)
        o1, o2 = slice(0, po - n_out), slice(po - n_out, po)
    elif side == "upper":
        i2, i1 = slice(0, n_in), slice(n_in, mi)
        o2, o1 = slice(0, n_out), slice(n_out, po)
    else:
        raise ValueError(f"side must be 'lower' or 'upper', got {side!r}")
    B1, B2 = B[:, i1], B[:, i2]
    C1, C2 = C[o1, :], C[o2, :]
    D11, D12, D21, D22 = D[o1, i1], D[o1, i2], D[o2, i1], D[o2, i2]
    L = _loop_inverse(np.eye(n_in) - gain @ D22, "I - K D22") @ gain
    return StateSpace(A + B2 @ L @ C2, B1 + B2 @ L @ D21,
                      C1 + D12 @ L @ C2, D11 + D12 @ L @ D21)


def build_kreiss_plant(A, J=None):
    """Plant P(s) whose upper LFT with ``delta I`` gives the Kreiss resolvent.

    ``(delta I star P)(s) = J^T (s I - ((1-delta)/(1+delta) A - I))^{-1} J``.
    """
    A = as_matrix(A, "A", square=True)
    N = A.shape[0]
    J = _as_J(J, N)
    n = J.shape[1]
    r2 = np.sqrt(2.0)
    B = np.hstack([r2 * np.eye(N), J])
    C = np.vstack([-r2 * A, J.T])
    D = np.block([[-np.eye(N), np.zeros((N, n))], [np.zeros((n, N)), np.zeros((n, n))]])
    return TwoPortPlant(StateSpace(A - np.eye(N), B, C, D), n_delta=N, n_w=n, n_z=n)


def _check_synthesis_plant(plant):
    if not isinstance(plant, StateSpace):
        raise TypeError("plant must be a StateSpace")
    if np.any(plant.D != 0):
        raise DimensionError("synthesis plants must have D = 0")


def close_loop(plant, K):
    """Closed loop of ``plant`` (D = 0) with a static or dynamic controller.

    Returns the closed-loop system with state matrix ``A_cl`` and the
    plant-state channels ``B = J``, ``C = J^T``.
    """
    _check_synthesis_plant(plant)
    A, B, C = plant.A, plant.B, plant.C
    if (K.n_u, K.n_y) != (plant.n_inputs, plant.n_outputs):
        raise DimensionError(
            f"controller maps {K.n_y} -> {K.n_u}, plant has "
            f"{plant.n_outputs} outputs and {plant.n_inputs} inputs")
    Acl = np.block([
        [A + B @ K.D_K @ C, B @ K.C_K],
        [K.B_K @ C, K.A_K],
    ])
    J = ProjectionJ(plant.n_states, K.n_K).matrix
    return StateSpace(Acl, J, J.T, np.zeros((J.shape[1], J.shape[1])))


def augmented_matrices(plant, n_K):
    """State augmentation ``(A_a, B_a, C_a)`` for an order-``n_K`` controller."""
    _check_synthesis_plant(plant)
    A, B, C = plant.A, plant.B, plant.C
    n, m, p = plant.n_states, plant.n_inputs, plant.n_outputs
    Aa = np.block([[A, np.zeros((n, n_K))], [np.zeros((n_K, n)), np.zeros((n_K, n_K))]])
    Ba = np.block([[np.zeros((n, n_K)), B], [np.eye(n_K), np.zeros((n_K, m))]])
    Ca = np.block([[np.zeros((n_K, n)), np.eye(n_K)], [C, np.zeros((p, n_K))]])
    return Aa, Ba, Ca


def augment(plant, n_K):
    """Augmented Kreiss plant ``P_a`` so that ``delta I star P_a star K_a`` is
    the closed-loop restricted Kreiss transfer."""
    if n_K < 0:
        raise ValueError("n_K must be non-negative")
    Aa, Ba, Ca = augmented_matrices(plant, n_K)
    n = plant.n_states
    N = n + n_K
    nu, ny = Ba.shape[1], Ca.shape[0]
    J = ProjectionJ(n, n_K).matrix
    r2 = np.sqrt(2.0)
    A_P = Aa - np.eye(N)
    B_P = np.hstack([r2 * np.eye(N), J, Ba])
    C_P = np.vstack([-r2 * Aa, J.T, Ca])
    D_P = np.zeros((N + n + ny, N + n + nu))
    D_P[:N, :N] = -np.eye(N)
    D_P[:N, N + n:] = -r2 * Ba
    return TwoPortPlant(StateSpace(A_P, B_P, C_P, D_P), n_delta=N, n_w=n, n_z=n,
                        n_u=nu, n_y=ny)
