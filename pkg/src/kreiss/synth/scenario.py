"""Worst-scenario min-max synthesis loop.

Each restart alternates a multi-scenario design over the current scenario
set with two global searches over ``delta in [-1, 1]``: the most
destabilizing scenario and the worst-performance scenario. The worst one
is added to the set until it no longer degrades the design by more than
the relative tolerance; the final loop is then certified over the whole
delta range.
"""

import itertools
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..errors import InfeasibleError, NonConvergenceError, NotHurwitzError
from ..sysmodel import Controller, kreiss_scale
from ..transient import chebyshev_grid, golden_max, kreiss_constant, spectral_abscissa
from .objectives import LoopModel, objective_pieces, objective_value, region_pieces
from .optimizer import minimize_max
from .problem import ScenarioRecord, ScenarioState, SynthesisResult

__all__ = ["multimodel_min", "destabilize", "degrade", "scenario_loop", "run_restart",
           "verify_family"]

# delta = -1 sends (1 - delta)/(1 + delta) to infinity; searches stop just short of it
_DELTA_MIN = -1.0 + 1e-9
_MAX_ESCALATIONS = 6


def _packed(problem, K):
    if isinstance(K, Controller):
        return K.packed
    return np.asarray(K, float).reshape(problem.shape)


class _Embed:
    """Map between the free-parameter vector and the packed controller."""

    def __init__(self, problem, Ka0):
        self.mask = problem.mask
        self.base = np.array(Ka0, float)

    def __call__(self, theta):
        Ka = self.base.copy()
        Ka[self.mask] = theta
        return Ka

    def theta(self, Ka):
        return np.asarray(Ka)[self.mask].copy()


def _combine(terms, eps):
    """Pieces of a sum of max-functions: sums over the product of active branches."""
    out = []
    for combo in itertools.product(*terms):
        out.append((sum(v for v, _ in combo), sum(g for _, g in combo)))
    f = max(v for v, _ in out)
    return f, [p for p in out if p[0] >= f - eps * max(1.0, abs(f))]


def _plus(pieces, shape):
    """Branches of ``max(0, max_i v_i)``."""
    return list(pieces) + [(0.0, np.zeros(shape))]


def _region_oracle(model, embed, region):
    def oracle(theta, eps):
        Ka = embed(theta)
        a, r = region_pieces(model, model.acl(Ka), region, eps)
        pieces = a + r
        f = max(v for v, _ in pieces)
        return f, [(v, g[embed.mask]) for v, g in pieces
                   if v >= f - eps * (region.min_decay + abs(f))]
    return oracle


def _penalty_oracle(model, embed, scenarios, region, mu):
    shape = model.problem.shape

    def oracle(theta, eps):
        Ka = embed(theta)
        f, pieces = objective_pieces(model, Ka, scenarios, eps)
        if not np.isfinite(f):
            return np.inf, []
        a, r = region_pieces(model, model.acl(Ka), region, eps)
        terms = [pieces,
                 [(mu * v, mu * g) for v, g in _plus(a, shape)],
                 [(mu * v, mu * g) for v, g in _plus(r, shape)]]
        # constraint branches count as active on the objective's scale, so the
        # line search sees the disk boundary before it crosses it
        window = eps * max(1.0, abs(f))
        a_max = max(0.0, max(v for v, _ in a))
        r_max = max(0.0, max(v for v, _ in r))
        terms[1] = [p for p in terms[1] if p[0] >= mu * a_max - window]
        terms[2] = [p for p in terms[2] if p[0] >= mu * r_max - window]
        total, combos = _combine(terms, eps)
        return total, [(v, g[embed.mask]) for v, g in combos]
    return oracle


def _stabilize(problem, model, embed, theta0, region):
    """Drive the closed-loop spectrum strictly inside ``region``."""
    oracle = _region_oracle(model, embed, region)
    target = -0.1 * region.min_decay
    st = minimize_max(oracle, theta0, max_iter=10 * problem.max_iter, eps_min=1e-9,
                      stop=lambda x, f: f <= target)
    if st.f > 0:
        raise InfeasibleError(
            f"no controller found with spectrum in the region (violation {st.f:.3e})",
            history=st.history)
    return st.x


def multimodel_min(problem, scenarios, K0, model=None):
    """Locally minimize the max over ``scenarios`` of the objective from ``K0``.

    The region constraint enters as an exact penalty whose weight grows
    tenfold while the result violates it. When ``K0`` lies outside the
    region a stabilization phase runs first.

    Returns
    -------
    controller : Controller
    h_lower : float
        Objective value at the returned controller; never above the value
        at a feasible ``K0``.
    """
    if not scenarios:
        raise ValueError("need at least one scenario")
    model = model or LoopModel(problem)
    Ka0 = _packed(problem, K0)
    embed = _Embed(problem, Ka0)
    region = problem.region
    inner = region.tightened()
    theta = embed.theta(Ka0)
    if not region.contains(np.linalg.eigvals(model.acl(Ka0))):
        theta = _stabilize(problem, model, embed, theta, inner)
    Ka = embed(theta)
    f0 = objective_pieces(model, Ka, scenarios)[0]
    best = (f0, Ka)
    if theta.size == 0:
        return problem.controller(Ka), float(f0)
    mu = max(1.0, abs(f0))
    x = theta
    for _ in range(_MAX_ESCALATIONS):
        st = minimize_max(_penalty_oracle(model, embed, scenarios, inner, mu), x,
                          max_iter=problem.max_iter)
        Ka = embed(st.x)
        if region.contains(np.linalg.eigvals(model.acl(Ka))):
            f = objective_pieces(model, Ka, scenarios)[0]
            if f < best[0]:
                best = (f, Ka)
            break
        mu *= 10.0
        x = st.x
    return problem.controller(best[1]), float(best[0])


def _grid_refine_max(fun, grid):
    vals = np.array([fun(d) for d in grid])
    i = int(np.argmax(vals))
    best = (float(grid[i]), float(vals[i]))
    n = len(grid)
    for i in range(n):
        lo, hi = max(i - 1, 0), min(i + 1, n - 1)
        if vals[i] < vals[lo] or vals[i] < vals[hi] or hi == lo:
            continue
        x, v = golden_max(fun, grid[lo], grid[hi], xtol=1e-10, f_lo=vals[lo], f_hi=vals[hi])
        if v > best[1]:
            best = (float(x), float(v))
    return best


def _family_abscissa(Acl, delta):
    c = kreiss_scale(max(delta, _DELTA_MIN))
    return spectral_abscissa(c * Acl - np.eye(Acl.shape[0]))


def destabilize(problem, K, n_grid=201):
    """Most destabilizing scenario: ``max_delta alpha(c(delta) A_cl - I)``.

    Returns ``(delta_star, alpha_star)``.
    """
    Acl = LoopModel(problem).acl(_packed(problem, K))
    grid = np.maximum(chebyshev_grid(n_grid), _DELTA_MIN)
    return _grid_refine_max(lambda d: _family_abscissa(Acl, d), grid)


def verify_family(problem, K, n_grid=10_000):
    """Largest family spectral abscissa on a uniform ``delta`` grid."""
    Acl = LoopModel(problem).acl(_packed(problem, K))
    grid = np.maximum(np.linspace(-1.0, 1.0, n_grid), _DELTA_MIN)
    return max(_family_abscissa(Acl, d) for d in grid)


def degrade(problem, K, n_grid=201):
    """Worst-performance scenario ``(delta_star, h_star)`` over ``[-1, 1]``.

    Objectives other than ``kreiss`` do not depend on delta; for them the
    nominal scenario ``delta = 0`` is returned with the objective value.
    """
    model = LoopModel(problem)
    Ka = _packed(problem, K)
    Acl = model.acl(Ka)
    if spectral_abscissa(Acl) >= 0:
        raise NotHurwitzError("scenario family is not uniformly stable")
    if problem.objective == "kreiss":
        rep = kreiss_constant(Acl, model.J, tol=1e-6, n_grid=n_grid)
        return rep.delta_star, rep.value
    return 0.0, objective_pieces(model, Ka, [0.0])[0]


@dataclass
class RestartOutcome:
    restart: int
    packed: np.ndarray
    value: float
    certified: float
    kreiss: object
    state: ScenarioState
    error: str = ""


def run_restart(problem, r):
    """Scenario loop from the starting point of restart ``r``."""
    model = LoopModel(problem)
    state = ScenarioState()
    K = problem.controller(problem.initial_controller(r))
    while True:
        K, h_low = multimodel_min(problem, list(state.scenarios), K, model)
        d_a, a_star = destabilize(problem, K)
        if a_star >= 0:
            state.records.append(ScenarioRecord(tuple(state.scenarios), h_low, d_a, a_star,
                                                np.nan, np.inf))
            if not state.add(d_a):
                raise NonConvergenceError("destabilizing scenario repeats", history=state)
            continue
        d_w, h_up = degrade(problem, K)
        state.records.append(ScenarioRecord(tuple(state.scenarios), h_low, d_a, a_star,
                                            d_w, h_up))
        if h_up < (1.0 + problem.tol) * h_low:
            break
        if len(state.scenarios) - 1 >= problem.max_scenarios:
            state.status = "failed"
            raise NonConvergenceError(
                f"scenario cap {problem.max_scenarios} reached", history=state)
        if not state.add(d_w):
            break
    state.status = "converged"
    Acl = model.acl(K.packed)
    report = kreiss_constant(Acl, model.J, tol=1e-4)
    if problem.objective == "kreiss":
        certified = report.value
    else:
        certified = objective_value(problem.objective, problem, K)
    state.status = "certified"
    return RestartOutcome(r, K.packed, h_low, float(certified), report, state)


def _safe_restart(args):
    problem, r = args
    try:
        return run_restart(problem, r)
    except (InfeasibleError, NonConvergenceError) as exc:
        return RestartOutcome(r, None, np.inf, np.inf, None, getattr(exc, "history", None),
                              error=f"{type(exc).__name__}: {exc}")


def scenario_loop(problem, workers=1):
    """Best-of-restarts scenario synthesis.

    Restarts are independent; with ``workers > 1`` they run in separate
    processes. The winner is the restart with the smallest certified value,
    lowest index first on ties, so the result does not depend on
    ``workers``.

    Raises
    ------
    InfeasibleError
        No restart found a controller inside the region.
    NonConvergenceError
        Every feasible restart hit the scenario cap.
    """
    t0 = time.perf_counter()
    jobs = [(problem, r) for r in range(problem.restarts)]
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            outcomes = list(ex.map(_safe_restart, jobs))
    else:
        outcomes = [_safe_restart(j) for j in jobs]
    ok = [o for o in outcomes if o.packed is not None]
    if not ok:
        errors = "; ".join(o.error for o in outcomes)
        if all(o.error.startswith("NonConvergence") for o in outcomes):
            raise NonConvergenceError(errors, history=[o.state for o in outcomes])
        raise InfeasibleError(errors, history=[o.state for o in outcomes])
    win = min(ok, key=lambda o: (o.certified, o.restart))
    return SynthesisResult(
        controller=problem.controller(win.packed),
        packed=win.packed,
        objective=problem.objective,
        value=win.value,
        certified=win.certified,
        kreiss=win.kreiss,
        history=win.state,
        restart=win.restart,
        restart_values=tuple(o.certified for o in outcomes),
        elapsed=time.perf_counter() - t0,
    )
