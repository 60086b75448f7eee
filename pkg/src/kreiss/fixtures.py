"""Reference matrices: Grcar benchmark, the 7-state example plant with its
four printed third-order controllers, and the two-state nonlinear example."""

import hashlib

import numpy as np

from .sysmodel import Controller, StateSpace

__all__ = [
    "grcar",
    "example_plant",
    "example_controller",
    "CONTROLLER_NAMES",
    "nl_matrices",
    "nl_controller",
    "NL_CLOSED_LOOP",
    "NL_INITIAL_X2",
    "catalog",
    "fixture",
    "checksum",
    "FIXTURE_CHECKSUM",
]


def grcar(n):
    """Stable band Toeplitz test matrix: -1 on the sub- and main diagonal,
    +1 on the first three superdiagonals."""
    if n < 1:
        raise ValueError("n must be positive")
    A = -np.eye(n) - np.eye(n, k=-1)
    for k in (1, 2, 3):
        A += np.eye(n, k=k)
    return A


_A7 = np.array([
    [-1, 0, 0, 0, 0, 0, -625],
    [0, -1, -30, 400, 0, 0, 250],
    [-2, 0, -1, 0, 0, 0, 30],
    [5, -1, 5, -1, 0, 0, 200],
    [11, 1, 25, -10, -1, 1, -200],
    [200, 0, 0, -150, -100, -1, -1000],
    [1, 0, 0, 0, 0, 0, -1],
], dtype=float)
_B7 = np.vstack([np.eye(4), np.zeros((3, 4))])
_C7 = np.zeros((1, 7))
_C7[0, 5] = 1.0


def example_plant():
    """7 states, 4 inputs acting on the first four states, output x6."""
    return StateSpace(_A7, _B7, _C7, np.zeros((1, 4)))


# Packed [[A_K, B_K], [C_K, D_K]] with n_K = 3, m = 4, p = 1.
_CONTROLLERS = {
    "kreiss": """
        -42.9038   11.5813     0.0000    0.0128
       -164.9255   70.3235   152.7735  -13.6539
          0.0000  -25.9407  -149.4428   11.8197
       -167.0674  318.3261   809.8411  -66.1531
        200.4722  413.5407  -666.0200   72.5131
        -66.2768   27.6020    76.9643   -2.4021
        385.9815 -189.8190  -229.6792   22.6246""",
    "numabs": """
         59.9714  140.8838     0.0000  125.1870
        100.3809  151.4666    -0.9285  152.6506
          0.0000 -271.6638  -612.4505  514.0162
       -180.2674    2.4115   610.7701 -818.7354
         -1.9939   17.2208   896.7905  248.2384
        134.2585  322.4479   198.7380   27.7581
        145.1514  114.7305  -229.1801  350.4296""",
    "h2match": """
        -10.0166   32.8652     0.0000    4.2887
         -5.3332  -75.2766    74.7646   83.9716
          0.0000  246.4755  -258.5282 -246.5133
       -205.9510  236.5090  -123.3962 -152.2283
      -1153.0456 -879.8479   -71.1224  150.9151
        -13.2672 -120.1666    21.8126  115.6246
         21.5530    3.7044    60.9500  127.7649""",
    "wcenergy": """
        -11.5489   78.9907     0.0000   53.2452
        199.9054 -357.8574   329.8169 -206.2099
          0.0000  -60.0656   -22.2754  -40.3642
       -136.5439   -7.6336   193.7006   30.1711
      -1434.8960  269.1622  -473.4523   27.1643
       -482.9145  868.9921  -824.9746  499.5364
        -39.9217  559.8141   -80.1572  351.7574""",
}

CONTROLLER_NAMES = tuple(_CONTROLLERS)


def _parse(text):
    return np.array([[float(v) for v in line.split()]
                     for line in text.strip().splitlines()])


def example_controller(name):
    """Printed third-order controller for objective ``name``."""
    if name not in _CONTROLLERS:
        raise KeyError(f"unknown controller {name!r}; choose from {CONTROLLER_NAMES}")
    return Controller.from_packed(_parse(_CONTROLLERS[name]), 3, 4, 1)


def nl_matrices(R=25.0):
    """``(A, B_x, B, C)`` of the two-state nonlinear example."""
    A = np.array([[-1.0 / R, 1.0], [0.0, -2.0 / R]])
    Bx = np.array([[0.0, -1.0], [1.0, 0.0]])
    B = np.array([[1.0], [1.0]])
    C = np.array([[1.0, 0.0]])
    return A, Bx, B, C


_NL_K = """
    -3.4146 -0.1902 -1.7997
    -0.2856 -2.6781 -0.1119
    -1.8068 -0.1095 -1.3710"""

NL_CLOSED_LOOP = np.array([
    [-1.4110, 1.0000, -1.8068, -0.1095],
    [-1.3710, -0.0800, -1.8068, -0.1095],
    [-1.7997, 0.0000, -3.4146, -0.1902],
    [-0.1119, 0.0000, -0.2856, -2.6781],
])

NL_INITIAL_X2 = (1e-7, 1e-6, 1e-5, 1e-4, 4e-4, 5e-4, 1e-3, 1e-2)


def nl_controller():
    """Printed second-order controller for the nonlinear example."""
    return Controller.from_packed(_parse(_NL_K), 2, 1, 1)


def catalog():
    """Name -> (tag, dict of named matrices) for every fixture."""
    out = {}
    for n in (10, 20, 30, 40, 50, 100):
        out[f"grcar-{n}"] = ("matrix", {"A": grcar(n)})
    p = example_plant()
    out["example-7x7"] = ("plant", {"A": p.A, "B": p.B, "C": p.C, "D": p.D})
    for name in CONTROLLER_NAMES:
        K = example_controller(name)
        out[f"controller-{name}"] = ("controller", {"A_K": K.A_K, "B_K": K.B_K,
                                                     "C_K": K.C_K, "D_K": K.D_K})
    A, Bx, B, C = nl_matrices()
    out["nl-A"] = ("matrix", {"A": A})
    out["nl-plant"] = ("plant", {"A": A, "B": B, "C": C, "D": np.zeros((1, 1)), "B_x": Bx})
    K = nl_controller()
    out["nl-controller"] = ("controller", {"A_K": K.A_K, "B_K": K.B_K,
                                           "C_K": K.C_K, "D_K": K.D_K})
    out["nl-closed-loop"] = ("closed-loop", {"A": NL_CLOSED_LOOP})
    return out


def fixture(name):
    cat = catalog()
    if name not in cat:
        raise KeyError(f"unknown fixture {name!r}")
    return cat[name]


def checksum():
    """SHA-256 over the printed numbers (fixed 4-decimal rendering)."""
    h = hashlib.sha256()
    blocks = [_A7, _B7, _C7, NL_CLOSED_LOOP, _parse(_NL_K)]
    blocks += [_parse(_CONTROLLERS[k]) for k in CONTROLLER_NAMES]
    blocks += list(nl_matrices())
    for M in blocks:
        h.update(f"{M.shape[0]}x{M.shape[1]}:".encode())
        h.update(" ".join(f"{v:.4f}" for v in np.ravel(M)).encode())
        h.update(b";")
    return h.hexdigest()


FIXTURE_CHECKSUM = "de1414b406572f4024cbc6a3a9c28b62eb604799e9f44a945e84f84630c30934"
