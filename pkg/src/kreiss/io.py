"""Plain-text system files and analysis report records.

File layout::

    # comment lines and trailing comments start with '#'
    kind plant                  # plant | controller | closed-loop | matrix
    block A 2 2                 # name rows cols, followed by rows*cols numbers
      -1  0
       0 -2
    block B 2 1
      1 1

Entries are whitespace separated decimal numbers; a block's numbers may be
spread over any number of lines. Serialization writes shortest round-trip
float representations so ``parse(serialize(f)) == f`` exactly.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, ParseError
from .sysmodel import Controller, StateSpace

__all__ = ["SystemFile", "ReportRecord", "parse", "serialize", "load", "dump",
           "format_table", "KINDS"]

KINDS = ("plant", "controller", "closed-loop", "matrix")
_REQUIRED = {
    "plant": ("A",),
    "controller": ("D_K",),
    "closed-loop": ("A",),
    "matrix": ("A",),
}


@dataclass(eq=False)
class SystemFile:
    """Named real matrix blocks with a semantic tag."""

    kind: str
    blocks: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown kind {self.kind!r}; choose from {KINDS}")
        self.blocks = {k: np.atleast_2d(np.asarray(v, float)) for k, v in self.blocks.items()}
        for name in _REQUIRED[self.kind]:
            if name not in self.blocks:
                raise DimensionError(f"{self.kind} file needs block {name}")
        if self.kind == "plant":
            self.to_statespace()
        elif self.kind == "controller":
            self.to_controller()

    def __eq__(self, other):
        if not isinstance(other, SystemFile) or self.kind != other.kind:
            return False
        if list(self.blocks) != list(other.blocks):
            return False
        return all(self.blocks[k].shape == other.blocks[k].shape
                   and np.array_equal(self.blocks[k], other.blocks[k]) for k in self.blocks)

    def __getitem__(self, name):
        return self.blocks[name]

    def to_statespace(self):
        A = self.blocks["A"]
        n = A.shape[0]
        B = self.blocks.get("B", np.zeros((n, 0)))
        C = self.blocks.get("C", np.zeros((0, n)))
        D = self.blocks.get("D", np.zeros((C.shape[0], B.shape[1])))
        return StateSpace(A, B, C, D)

    def to_controller(self):
        D = self.blocks["D_K"]
        m, p = D.shape
        A = self.blocks.get("A_K", np.zeros((0, 0)))
        if A.shape == (1, 0):
            A = np.zeros((0, 0))
        nk = A.shape[0]
        B = self.blocks.get("B_K", np.zeros((nk, p)))
        C = self.blocks.get("C_K", np.zeros((m, nk)))
        return Controller(A, B.reshape(nk, p), C.reshape(m, nk), D)

    @classmethod
    def from_controller(cls, K):
        return cls("controller", {"A_K": K.A_K, "B_K": K.B_K, "C_K": K.C_K, "D_K": K.D_K})

    @classmethod
    def from_statespace(cls, sys, kind="plant"):
        return cls(kind, {"A": sys.A, "B": sys.B, "C": sys.C, "D": sys.D})


def _tokens(text):
    """Yield ``(token, line, column)`` with comments removed (1-based positions)."""
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        col = 0
        for tok in line.split():
            col = line.index(tok, col)
            yield tok, ln, col + 1
            col += len(tok)


def _int(tok, ln, col, what):
    try:
        v = int(tok)
    except ValueError:
        raise ParseError(f"expected integer {what}, got {tok!r}", ln, col) from None
    if v < 0:
        raise ParseError(f"{what} must be non-negative", ln, col)
    return v


def parse(text):
    """Parse system-file text; errors carry line and column."""
    toks = list(_tokens(text))
    pos = 0

    def take(what):
        nonlocal pos
        if pos >= len(toks):
            last = toks[-1] if toks else ("", 1, 1)
            raise ParseError(f"unexpected end of input, expected {what}", last[1], last[2])
        t = toks[pos]
        pos += 1
        return t

    tok, ln, col = take("'kind'")
    if tok != "kind":
        raise ParseError(f"expected 'kind', got {tok!r}", ln, col)
    kind, ln, col = take("a kind name")
    if kind not in KINDS:
        raise ParseError(f"unknown kind {kind!r}", ln, col)
    blocks = {}
    while pos < len(toks):
        tok, ln, col = take("'block'")
        if tok != "block":
            raise ParseError(f"expected 'block', got {tok!r}", ln, col)
        name, nln, ncol = take("a block name")
        if name in blocks:
            raise ParseError(f"duplicate block {name!r}", nln, ncol)
        rows = _int(*take("row count"), "row count")
        cols = _int(*take("column count"), "column count")
        vals = []
        for _ in range(rows * cols):
            t, tl, tc = take(f"{rows * cols} entries for block {name}")
            try:
                v = float(t)
            except ValueError:
                raise ParseError(f"expected a number in block {name}, got {t!r}", tl, tc) from None
            if not np.isfinite(v):
                raise ParseError(f"non-finite entry in block {name}", tl, tc)
            vals.append(v)
        blocks[name] = np.array(vals, float).reshape(rows, cols)
    try:
        return SystemFile(kind, blocks)
    except (DimensionError, ValueError) as exc:
        raise ParseError(str(exc), ln, col) from None


def serialize(sf, comment=None):
    lines = []
    if comment:
        lines += [f"# {c}" for c in comment.splitlines()]
    lines.append(f"kind {sf.kind}")
    for name, M in sf.blocks.items():
        lines.append(f"block {name} {M.shape[0]} {M.shape[1]}")
        for row in M:
            if row.size:
                lines.append("  " + " ".join(repr(float(v)) for v in row))
    return "\n".join(lines) + "\n"


def load(path):
    with open(path) as fh:
        return parse(fh.read())


def dump(sf, path, comment=None):
    with open(path, "w") as fh:
        fh.write(serialize(sf, comment))


@dataclass
class ReportRecord:
    """One computed quantity with its maximizer data and timing."""

    quantity: str
    value: float
    tol: float
    wall_time: float
    data: dict = field(default_factory=dict)

    def __post_init__(self):
        if not np.isfinite(self.value):
            raise ValueError(f"{self.quantity} value is not finite")

    def to_line(self):
        """Machine-readable ``key=value`` line."""
        parts = [f"quantity={self.quantity}", f"value={self.value!r}", f"tol={self.tol!r}",
                 f"time={self.wall_time:.3f}"]
        parts += [f"{k}={v!r}" if isinstance(v, float) else f"{k}={v}"
                  for k, v in self.data.items()]
        return " ".join(parts)


def format_table(headers, rows):
    """Right-aligned text table."""
    cells = [[str(h) for h in headers]] + [[str(c) for c in r] for r in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(headers))]
    out = ["  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in cells]
    out.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(out)
