import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st
from scipy.integrate import solve_ivp
from scipy.optimize import minimize

from kreiss.errors import DimensionError, NotHurwitzError
from kreiss.fixtures import example_controller, example_plant, grcar, nl_matrices
from kreiss.matcore import expm
from kreiss.sysmodel import ProjectionJ, StateSpace, close_loop
from kreiss.transient import (
    chebyshev_grid,
    h2_norm,
    hinf_norm,
    kreiss_constant,
    kreiss_via_eps,
    numerical_abscissa,
    pseudospectral_abscissa,
    spectral_abscissa,
    transient_growth,
    worst_case_energy,
)

from conftest import random_stable

SEEDS = st.integers(0, 2**32 - 1)


def tf_ss(num, den):
    """Controllable canonical realization of a SISO strictly proper transfer function."""
    den = np.asarray(den, float)
    num = np.asarray(num, float)
    n = len(den) - 1
    A = np.zeros((n, n))
    A[0, :] = -den[1:] / den[0]
    A[1:, :-1] = np.eye(n - 1)
    B = np.zeros((n, 1))
    B[0, 0] = 1.0
    C = np.zeros((1, n))
    C[0, n - len(num):] = num / den[0]
    return StateSpace(A, B, C, np.zeros((1, 1)))


def resolvent_grid_kreiss(A):
    """sup over Re s > 0 of Re(s)||(sI - A)^{-1}|| by 2-D grid plus local polish."""
    n = A.shape[0]
    scale = max(1.0, np.linalg.norm(A, 2))
    xs = np.logspace(-4, 4, 161) * scale / 10
    ys = np.concatenate([[0.0], np.logspace(-4, 4, 200) * scale / 10])
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    S = (X + 1j * Y).ravel()
    M = S[:, None, None] * np.eye(n) - A
    smin = np.linalg.svd(M, compute_uv=False)[:, -1]
    vals = S.real / smin
    k = int(np.argmax(vals))

    def neg(p):
        s = np.exp(p[0]) + 1j * p[1]
        return -s.real / np.linalg.svd(s * np.eye(n) - A, compute_uv=False)[-1]

    res = minimize(neg, [np.log(S[k].real), S[k].imag], method="Nelder-Mead",
                   options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 4000})
    return max(vals[k], -res.fun)


def grid_pseudo_abscissa(A, eps):
    """Rightmost point of {s : sigma_min(sI - A) <= eps} by a horizontal-scan grid."""
    n = A.shape[0]
    lam = np.linalg.eigvals(A)
    x_hi = numerical_abscissa(A) + eps + 1e-3
    x_lo = lam.real.min() - eps
    y_lo, y_hi = lam.imag.min() - 2 * eps - 1, lam.imag.max() + 2 * eps + 1

    def smin(z):
        z = np.atleast_1d(z)
        return np.linalg.svd(z[:, None, None] * np.eye(n) - A, compute_uv=False)[:, -1]

    xs = np.linspace(x_lo, x_hi, 1201)

    def rightmost(y):
        inside = smin(xs + 1j * y) <= eps
        if not inside.any():
            return -np.inf
        i = int(np.nonzero(inside)[0].max())
        a, b = xs[i], xs[min(i + 1, len(xs) - 1)]
        for _ in range(50):
            m = 0.5 * (a + b)
            a, b = (m, b) if smin(m + 1j * y)[0] <= eps else (a, m)
        return a

    ys = np.linspace(y_lo, y_hi, 601)
    vals = np.array([rightmost(y) for y in ys])
    k = int(np.argmax(vals))
    lo, hi = ys[max(k - 1, 0)], ys[min(k + 1, len(ys) - 1)]
    best = vals[k]
    for y in np.linspace(lo, hi, 81):
        best = max(best, rightmost(y))
    return best


def random_normal_stable(rng, n):
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    k = n // 2
    D = np.zeros((n, n))
    i = 0
    for _ in range(k):
        a, b = -rng.uniform(0.1, 3.0), rng.uniform(0.1, 3.0)
        D[i:i + 2, i:i + 2] = [[a, b], [-b, a]]
        i += 2
    if i < n:
        D[i, i] = -rng.uniform(0.1, 3.0)
    return Q @ D @ Q.T


def random_loop(rng, n=3, m=2, p=2, nk=1):
    """Random plant closed with a random stabilizing dynamic controller."""
    from kreiss.sysmodel import Controller
    while True:
        A = rng.standard_normal((n, n))
        plant = StateSpace(A, rng.standard_normal((n, m)), rng.standard_normal((p, n)),
                           np.zeros((p, m)))
        Ka = rng.standard_normal((nk + m, nk + p))
        Acl = close_loop(plant, Controller.from_packed(Ka, nk, m, p)).A
        if spectral_abscissa(Acl) < -0.05:
            return Acl, ProjectionJ(n, nk).matrix


# ---------------------------------------------------------------------------
# abscissas


class TestAbscissas:
    def test_spectral_examples(self):
        assert spectral_abscissa(np.diag([-1.0, -3.0])) == pytest.approx(-1.0)
        assert spectral_abscissa([[-2.0, 0.0], [3.0, -1.0]]) == pytest.approx(-1.0)
        assert spectral_abscissa(grcar(10)) < 0

    def test_numerical_examples(self):
        assert numerical_abscissa(-np.eye(3)) == pytest.approx(-1.0)
        assert numerical_abscissa([[-2.0, 0.0], [3.0, -1.0]]) == pytest.approx(
            (-3 + np.sqrt(10)) / 2, rel=1e-12)
        assert numerical_abscissa(example_plant().A) == pytest.approx(680.4, rel=1e-3)

    def test_non_finite(self):
        with pytest.raises(ValueError):
            spectral_abscissa([[np.nan]])


# ---------------------------------------------------------------------------
# transient growth


class TestTransientGrowth:
    def test_contraction(self):
        prof = transient_growth(-np.eye(3))
        assert prof.peak == pytest.approx(1.0, abs=1e-12)
        assert prof.t_peak == pytest.approx(0.0, abs=1e-12)
        assert prof.gains[0] == pytest.approx(1.0)
        assert np.all(np.diff(prof.times) > 0)

    def test_restricted_example(self):
        A = np.array([[-2.0, 0.0], [3.0, -1.0]])
        prof = transient_growth(A, np.array([[1.0], [0.0]]))
        assert prof.peak == pytest.approx(1.0, abs=1e-9)
        assert transient_growth(A).peak > 1.0

    def test_scalar_decay_and_jordan_block(self):
        # e^{At} for [[-1, a], [0, -1]] has norm e^{-t} * ||[[1, a t], [0, 1]]||
        a = 10.0
        A = np.array([[-1.0, a], [0.0, -1.0]])
        t = np.linspace(0, 20, 200_001)
        x = a * t
        oracle = np.exp(-t) * (x + np.sqrt(x**2 + 4)) / 2
        assert transient_growth(A).peak == pytest.approx(oracle.max(), rel=1e-8)

    def test_open_loop_plant_against_expm_grid(self):
        A = example_plant().A
        t = np.linspace(0.3, 1.0, 701)
        grid = max(np.linalg.norm(scipy.linalg.expm(A * ti), 2) for ti in t)
        prof = transient_growth(A)
        assert prof.certified
        assert prof.peak >= grid * (1 - 1e-9)
        assert prof.peak == pytest.approx(grid, rel=1e-4)

    def test_restricted_below_full(self):
        plant = example_plant()
        Acl = close_loop(plant, example_controller("kreiss")).A
        J = ProjectionJ(7, 3).matrix
        assert transient_growth(Acl, J).peak <= transient_growth(Acl).peak * (1 + 1e-9)

    def test_rejects_unstable(self):
        with pytest.raises(NotHurwitzError):
            transient_growth(np.eye(2))

    def test_peak_dominates_samples(self, rng):
        prof = transient_growth(random_stable(rng, 5))
        assert prof.peak >= prof.gains.max()


# ---------------------------------------------------------------------------
# H-infinity and H2


class TestNorms:
    def test_first_order(self):
        val, w = hinf_norm(tf_ss([1.0], [1.0, 1.0]))
        assert val == pytest.approx(1.0, rel=1e-6)
        assert w == pytest.approx(0.0, abs=1e-3)

    def test_resonance(self):
        w = np.linspace(0.9, 1.1, 2_000_001)
        mag = 1 / np.sqrt((1 - w**2) ** 2 + 0.01 * w**2)
        val, wp = hinf_norm(tf_ss([1.0], [1.0, 0.1, 1.0]), tol=1e-8)
        assert val == pytest.approx(mag.max(), rel=1e-7)
        assert val == pytest.approx(10.0125, rel=1e-4)
        assert wp == pytest.approx(w[np.argmax(mag)], abs=1e-4)

    @settings(max_examples=100, deadline=None)
    @given(seed=SEEDS)
    def test_hinf_against_grid(self, seed):
        r = np.random.default_rng(seed)
        A = random_stable(r, 4)
        sys = StateSpace(A, r.standard_normal((4, 2)), r.standard_normal((2, 4)),
                         np.zeros((2, 2)))
        tol = 1e-6
        val, wpk = hinf_norm(sys, tol=tol)
        rho = np.abs(np.linalg.eigvals(A)).max()
        w = np.concatenate([[0.0], np.logspace(-4, 3, 20_000) * max(rho, 1.0)])
        from kreiss.matcore import sigma_max_many
        grid = sigma_max_many(sys.A, sys.B, sys.C, sys.D, w).max()
        assert grid <= val * (1 + tol)
        assert val <= grid * (1 + 1e-3)       # grid resolution slack
        from kreiss.matcore import sigma_max
        assert sigma_max(sys.A, sys.B, sys.C, sys.D, wpk) == pytest.approx(val, rel=tol)

    def test_h2_examples(self):
        assert h2_norm(tf_ss([1.0], [1.0, 1.0])) == pytest.approx(1 / np.sqrt(2), rel=1e-12)
        sys = StateSpace(np.diag([-1.0, -2.0]), np.eye(2), np.eye(2), np.zeros((2, 2)))
        assert h2_norm(sys) == pytest.approx(np.sqrt(0.5 + 0.25), rel=1e-12)

    def test_h2_rejects_feedthrough(self):
        with pytest.raises(ValueError):
            h2_norm(StateSpace([[-1.0]], [[1.0]], [[1.0]], [[1.0]]))

    def test_h2_against_quadrature(self, rng):
        for _ in range(5):
            n, m, p = 3, 2, 2
            A = random_stable(rng, n, margin=0.5)
            B, C = rng.standard_normal((n, m)), rng.standard_normal((p, n))
            sys = StateSpace(A, B, C, np.zeros((p, m)))

            def rhs(t, z):
                X = z[:-1].reshape(n, m)
                return np.concatenate([(A @ X).ravel(), [np.sum((C @ X) ** 2)]])

            z0 = np.concatenate([B.ravel(), [0.0]])
            T = 60.0 / 0.5
            sol = solve_ivp(rhs, (0, T), z0, rtol=1e-11, atol=1e-13, method="DOP853")
            assert h2_norm(sys) == pytest.approx(np.sqrt(sol.y[-1, -1]), rel=1e-4)


# ---------------------------------------------------------------------------
# Kreiss constant


class TestKreissConstant:
    def test_scalar(self):
        assert kreiss_constant([[-1.0]]).value == pytest.approx(1.0, rel=1e-4)

    def test_dissipative_nonnormal(self):
        assert kreiss_constant([[-2.0, 3.0], [0.0, -2.0]]).value == pytest.approx(1.0, rel=1e-4)

    def test_grcar_10(self):
        assert kreiss_constant(grcar(10)).value == pytest.approx(1.1855, rel=5e-3)

    def test_nonlinear_open_loop(self):
        A = nl_matrices(25.0)[0]
        assert kreiss_constant(A).value == pytest.approx(4.36, rel=1e-2)

    def test_report_invariants(self, rng):
        rep = kreiss_constant(random_stable(rng, 4), tol=1e-5)
        assert -1 <= rep.delta_star <= 1 and rep.omega_star >= 0
        deltas, vals = np.array(rep.profile).T
        assert np.all(vals <= rep.value * (1 + 1e-5))
        assert np.all((deltas >= -1) & (deltas <= 1))
        assert rep.value >= 1 - 1e-5

    def test_value_matches_family_norm_at_delta_star(self, rng):
        from kreiss.transient import kreiss_family_norm
        A = random_stable(rng, 4)
        rep = kreiss_constant(A, tol=1e-6)
        hv, _ = kreiss_family_norm(A, np.eye(4), rep.delta_star, tol=1e-8)
        assert hv == pytest.approx(rep.value, rel=1e-5)

    def test_rejects_unstable(self):
        with pytest.raises(NotHurwitzError):
            kreiss_constant([[0.5]])

    def test_chebyshev_grid(self):
        g = chebyshev_grid(101)
        assert g[0] == -1 and g[-1] == 1 and len(g) == 101 and np.all(np.diff(g) > 0)

    @settings(max_examples=100, deadline=None)
    @given(seed=SEEDS)
    def test_against_resolvent_grid(self, seed):
        A = random_stable(np.random.default_rng(seed), 3)
        K = kreiss_constant(A, tol=1e-6).value
        oracle = resolvent_grid_kreiss(A)
        assert oracle <= K * (1 + 1e-5)
        assert K == pytest.approx(oracle, rel=1e-2)


# ---------------------------------------------------------------------------
# pseudospectra


class TestPseudospectra:
    def test_normal(self):
        assert pseudospectral_abscissa(np.diag([-1.0, -2.0]), 0.1) == pytest.approx(-0.9, abs=1e-8)

    def test_small_eps_limit(self, rng):
        for _ in range(5):
            A = rng.standard_normal((4, 4))
            assert pseudospectral_abscissa(A, 1e-9) == pytest.approx(spectral_abscissa(A),
                                                                     abs=1e-6)

    def test_against_grid(self, rng):
        for _ in range(3):
            A = rng.standard_normal((3, 3))
            assert pseudospectral_abscissa(A, 0.5) == pytest.approx(
                grid_pseudo_abscissa(A, 0.5), abs=1e-3)

    @settings(max_examples=100, deadline=None)
    @given(seed=SEEDS)
    def test_monotone_in_eps(self, seed):
        A = np.random.default_rng(seed).standard_normal((4, 4))
        eps = np.logspace(-4, 0, 6)
        a = [pseudospectral_abscissa(A, e) for e in eps]
        assert np.all(np.diff(a) >= -1e-8)

    def test_identity_ratio(self):
        prof = kreiss_via_eps(-np.eye(3), np.logspace(-3, 3, 61))
        assert prof.ratio_peak <= 1.0
        assert np.all(np.diff(prof.alphas) >= -1e-8)
        assert prof.ratio_peak == pytest.approx(np.max(prof.alphas / prof.epsilons))

    def test_lower_bound_of_kreiss(self, rng):
        for _ in range(5):
            A = random_stable(rng, 4)
            prof = kreiss_via_eps(A, np.logspace(-4, 2, 61))
            assert prof.ratio_peak <= kreiss_constant(A).value * 1.01


# ---------------------------------------------------------------------------
# worst-case energy


class TestWorstCaseEnergy:
    def test_scalar(self):
        val, v = worst_case_energy([[-1.0]])
        assert val == pytest.approx(1 / np.sqrt(2))
        assert abs(v[0]) == 1

    def test_sign_symmetry_and_brute_force(self):
        plant = example_plant()
        Acl = close_loop(plant, example_controller("wcenergy")).A
        J = ProjectionJ(7, 3).matrix
        val, v = worst_case_energy(Acl, J)
        per = []
        from itertools import product
        for signs in product((1.0, -1.0), repeat=7):
            x0 = J @ np.array(signs)
            per.append(h2_norm(StateSpace(Acl, x0[:, None], J.T, np.zeros((7, 1)))))
        assert val == pytest.approx(max(per), rel=1e-8)
        vneg = h2_norm(StateSpace(Acl, (J @ -v)[:, None], J.T, np.zeros((7, 1))))
        vpos = h2_norm(StateSpace(Acl, (J @ v)[:, None], J.T, np.zeros((7, 1))))
        assert vneg == pytest.approx(vpos, rel=1e-12)

    @settings(max_examples=100, deadline=None)
    @given(seed=SEEDS)
    def test_random_against_vertex_lyapunov(self, seed):
        r = np.random.default_rng(seed)
        Acl, J = random_loop(r)
        val, _ = worst_case_energy(Acl, J)
        from itertools import product
        best = 0.0
        for signs in product((1.0, -1.0), repeat=J.shape[1]):
            x0 = J @ np.array(signs)
            X = scipy.linalg.solve_continuous_lyapunov(Acl, -np.outer(x0, x0))
            best = max(best, np.sqrt(np.trace(J.T @ X @ J)))
        assert val == pytest.approx(best, rel=1e-8)

    def test_guard(self):
        with pytest.raises(DimensionError):
            worst_case_energy(-np.eye(21))


# ---------------------------------------------------------------------------
# invariants


class TestInvariants:
    @settings(max_examples=100, deadline=None)
    @given(seed=SEEDS, n=st.integers(2, 8))
    def test_kreiss_sandwich(self, seed, n):
        A = random_stable(np.random.default_rng(seed), n)
        K = kreiss_constant(A).value
        M0 = transient_growth(A).peak
        assert K <= M0 * 1.01
        assert M0 <= np.e * n * K * 1.01

    @settings(max_examples=100, deadline=None)
    @given(seed=SEEDS)
    def test_restricted_sandwich(self, seed):
        Acl, J = random_loop(np.random.default_rng(seed))
        K = kreiss_constant(Acl, J).value
        M0 = transient_growth(Acl, J).peak
        n = J.shape[1]
        assert K <= M0 * 1.01
        assert M0 <= np.e * n * K * 1.01
        assert K <= kreiss_constant(Acl).value * (1 + 1e-4)

    @settings(max_examples=100, deadline=None)
    @given(seed=SEEDS, n=st.integers(2, 6))
    def test_kreiss_at_least_one(self, seed, n):
        A = random_stable(np.random.default_rng(seed), n)
        assert kreiss_constant(A).value >= 1 - 1e-4

    @settings(max_examples=100, deadline=None)
    @given(seed=SEEDS, n=st.integers(1, 6))
    def test_kreiss_normal_is_one(self, seed, n):
        A = random_normal_stable(np.random.default_rng(seed), n)
        assert kreiss_constant(A).value == pytest.approx(1.0, rel=1e-4)

    @settings(max_examples=100, deadline=None)
    @given(seed=SEEDS, n=st.integers(2, 6), dissipative=st.booleans())
    def test_unit_peak_iff_contractive(self, seed, n, dissipative):
        r = np.random.default_rng(seed)
        A = random_stable(r, n)
        w = numerical_abscissa(A)
        if dissipative:
            A = A - (w + r.uniform(1e-3, 1.0)) * np.eye(n)
        elif w <= 0:
            # build a stable matrix with positive numerical abscissa
            A = A + np.triu(r.standard_normal((n, n)), 1) * 5 + 0.0
            if spectral_abscissa(A) >= 0 or numerical_abscissa(A) <= 1e-3:
                return
        peak = transient_growth(A).peak
        w = numerical_abscissa(A)
        assert (abs(peak - 1.0) <= 1e-6) == (w <= 1e-9)

    @settings(max_examples=100, deadline=None)
    @given(seed=SEEDS, n=st.integers(2, 6))
    def test_growth_below_omega_exponential(self, seed, n):
        A = random_stable(np.random.default_rng(seed), n)
        prof = transient_growth(A)
        w = numerical_abscissa(A)
        assert np.all(prof.gains <= np.exp(w * prof.times) * (1 + 1e-9))

    @settings(max_examples=100, deadline=None)
    @given(seed=SEEDS, n=st.integers(2, 6))
    def test_initial_slope_is_numerical_abscissa(self, seed, n):
        A = np.random.default_rng(seed).standard_normal((n, n))
        w = numerical_abscissa(A)
        hs = [1e-4, 1e-5, 1e-6]
        slopes = [(np.linalg.norm(expm(A, h), 2) - 1) / h for h in hs]
        errs = [abs(s - w) for s in slopes]
        scale = 1 + np.linalg.norm(A, 2) ** 2
        for h, e in zip(hs, errs):
            assert e <= 2 * scale * h + 1e-8
        # Richardson: 2 f(h/2) - f(h) is second order, so it beats f(h)
        rich = 2 * (np.linalg.norm(expm(A, 5e-5), 2) - 1) / 5e-5 - slopes[0]
        assert abs(rich - w) <= errs[0] + 1e-8
