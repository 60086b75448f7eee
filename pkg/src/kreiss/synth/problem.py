"""Problem, region and result records for structured controller synthesis."""

from dataclasses import dataclass, field

import numpy as np

from ..errors import DimensionError
from ..sysmodel import Controller, ProjectionJ, StateSpace

OBJECTIVES = ("kreiss", "numabs", "h2match", "wcenergy")


@dataclass(frozen=True)
class DiskRegion:
    """Closed-loop spectrum constraint ``Re(l) <= -min_decay`` and ``|l| <= radius``."""

    min_decay: float = 1e-3
    radius: float = 100.0

    def __post_init__(self):
        if not (self.min_decay > 0 and self.radius > 0):
            raise ValueError("min_decay and radius must be positive")
        if self.min_decay >= self.radius:
            raise ValueError("min_decay must be smaller than radius")

    def violation(self, eigs):
        """Largest constraint violation (<= 0 when the spectrum is inside)."""
        eigs = np.asarray(eigs, complex)
        if eigs.size == 0:
            return -np.inf
        return float(max(np.max(eigs.real) + self.min_decay,
                         np.max(np.abs(eigs)) - self.radius))

    def contains(self, eigs):
        return self.violation(eigs) <= 0.0

    def tightened(self, rel=5e-3):
        """Slightly smaller region used internally so penalized optima land
        strictly inside the nominal one."""
        return DiskRegion(self.min_decay * (1.0 + rel), self.radius * (1.0 - rel * 1e-2))


@dataclass(frozen=True, eq=False)
class SynthesisProblem:
    """Fixed-order output-feedback synthesis for a plant with ``D = 0``.

    Parameters
    ----------
    plant : StateSpace
    order : int
        Controller order ``n_K`` (0 for a static gain).
    objective : {"kreiss", "numabs", "h2match", "wcenergy"}
    region : DiskRegion
    restarts : int
        Number of starting points. Restart 0 is the zero controller, the
        others are ``0.1 * N(0, 1)`` draws from ``default_rng([seed, r])``.
    tol : float
        Relative stopping tolerance of the scenario loop.
    reference : array_like, optional
        ``A_r`` of the model-matching objective, default ``-I``.
    mask : array_like of bool, optional
        Free entries of the packed controller ``K_a``; fixed entries stay at
        their starting value (zero for the default restarts).
    """

    plant: StateSpace
    order: int = 0
    objective: str = "kreiss"
    region: DiskRegion = field(default_factory=DiskRegion)
    restarts: int = 10
    tol: float = 0.01
    seed: int = 0
    reference: np.ndarray = None
    mask: np.ndarray = None
    max_scenarios: int = 30
    max_iter: int = 200

    def __post_init__(self):
        if not isinstance(self.plant, StateSpace):
            raise TypeError("plant must be a StateSpace")
        if np.any(self.plant.D != 0):
            raise DimensionError("synthesis plants must have D = 0")
        if self.order < 0:
            raise ValueError("controller order must be non-negative")
        if self.restarts < 1:
            raise ValueError("need at least one restart")
        if self.objective not in OBJECTIVES:
            raise ValueError(f"unknown objective {self.objective!r}; choose from {OBJECTIVES}")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        n = self.plant.n_states
        ref = -np.eye(n) if self.reference is None else np.atleast_2d(np.asarray(self.reference, float))
        if ref.shape != (n, n):
            raise DimensionError(f"reference must be {n}x{n}")
        object.__setattr__(self, "reference", ref)
        mask = np.ones(self.shape, bool) if self.mask is None else np.asarray(self.mask, bool)
        if mask.shape != self.shape:
            raise DimensionError(f"mask must have the packed controller shape {self.shape}")
        object.__setattr__(self, "mask", mask)

    @property
    def n(self):
        return self.plant.n_states

    @property
    def m(self):
        return self.plant.n_inputs

    @property
    def p(self):
        return self.plant.n_outputs

    @property
    def shape(self):
        """Shape of ``K_a``: ``(n_K + m, n_K + p)``."""
        return (self.order + self.m, self.order + self.p)

    @property
    def J(self):
        return ProjectionJ(self.n, self.order).matrix

    @property
    def seeds(self):
        return [(self.seed, r) for r in range(self.restarts)]

    def initial_controller(self, r):
        """Packed starting point of restart ``r``."""
        if r == 0:
            return np.zeros(self.shape)
        rng = np.random.default_rng([self.seed, r])
        return 0.1 * rng.standard_normal(self.shape) * self.mask

    def controller(self, Ka):
        return Controller.from_packed(Ka, self.order, self.m, self.p)


@dataclass
class ScenarioRecord:
    """One pass of the scenario loop."""

    scenarios: tuple
    h_lower: float
    delta_destab: float
    alpha_star: float
    delta_worst: float
    h_upper: float


@dataclass
class ScenarioState:
    """Growing scenario set and per-iteration history."""

    scenarios: list = field(default_factory=lambda: [0.0])
    records: list = field(default_factory=list)
    status: str = "running"
    dedup_tol: float = 1e-6

    def add(self, delta):
        """Add a scenario; returns False when it duplicates an existing one."""
        if any(abs(delta - d) <= self.dedup_tol for d in self.scenarios):
            return False
        self.scenarios.append(float(delta))
        return True

    @property
    def h_lower(self):
        return [r.h_lower for r in self.records]


@dataclass(frozen=True, eq=False)
class SynthesisResult:
    """Winning controller with its certificate and the audit trail."""

    controller: Controller
    packed: np.ndarray
    objective: str
    value: float
    certified: float
    kreiss: object
    history: ScenarioState
    restart: int
    restart_values: tuple
    elapsed: float
