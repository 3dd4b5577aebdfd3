"""Periodic patch models: growth/migration schedules, validation, catalog, I/O.

A patch model couples n habitat patches through a 1-periodic, piecewise-defined
diagonal growth schedule R(tau) and a Metzler migration schedule L(tau) whose
columns sum to zero.  Both schedules are represented by
:class:`PeriodicMatrixFunction`, either as an exact piecewise-constant list of
segments (the common case, enabling closed-form propagators) or as a sampled
piecewise-smooth callback.

The module also ships a catalog of built-in models (two- and three-patch
examples with exactly rational entries) and a JSON file format with round-trip
load/save.
"""

from __future__ import annotations

import json
from collections.abc import Callable, Sequence
from dataclasses import dataclass, replace
from enum import Enum
from fractions import Fraction

import numpy as np

COLUMN_SUM_TOL = 1e-12
# entries below this are structural zeros when testing strong connectivity
EDGE_TOL = 1e-14

SCHEMA_VERSION = 1


class ModelError(Exception):
    """Base class for model construction/validation/I-O errors."""


class SchemaError(ModelError):
    pass


class SchemaVersionMismatch(SchemaError):
    pass


class ParseError(ModelError):
    def __init__(self, message: str, field: str | None = None):
        super().__init__(message if field is None else f"{field}: {message}")
        self.field = field


class UnknownModel(ModelError):
    pass


class Kind(Enum):
    PIECEWISE_CONSTANT = "piecewise_constant"
    PIECEWISE_SMOOTH = "piecewise_smooth"


class ValidationStatus(Enum):
    IRREDUCIBLE_EVERYWHERE = "IrreducibleEverywhere"
    POSITIVE_MONODROMY_ONLY = "PositiveMonodromyOnly"
    INVALID = "Invalid"


@dataclass(frozen=True)
class ValidationIssue:
    """One violated constraint, named with its location and residual."""

    kind: str  # "ColumnSumViolation" | "NegativeOffDiagonal"
    segment: int
    i: int
    j: int | None = None
    residual: float | None = None

    def __str__(self) -> str:
        if self.kind == "ColumnSumViolation":
            return (f"ColumnSumViolation(segment={self.segment}, "
                    f"column={self.i}, residual={self.residual:.3e})")
        return f"NegativeOffDiagonal(segment={self.segment}, i={self.i}, j={self.j})"


@dataclass(frozen=True)
class ValidationReport:
    status: ValidationStatus
    issues: tuple[ValidationIssue, ...] = ()

    @property
    def ok(self) -> bool:
        return self.status is not ValidationStatus.INVALID


def _as_breaks(breaks: Sequence[float]) -> tuple[float, ...]:
    b = tuple(float(Fraction(x)) if isinstance(x, str) else float(x)
              for x in breaks)
    if not b or b[0] != 0.0:
        raise SchemaError("first breakpoint must be 0")
    if any(x < 0.0 or x >= 1.0 for x in b):
        raise SchemaError("breakpoints must lie in [0, 1)")
    if any(b[k + 1] <= b[k] for k in range(len(b) - 1)):
        raise SchemaError("breakpoints must be strictly increasing")
    return b


@dataclass(frozen=True)
class PeriodicMatrixFunction:
    """1-periodic matrix-valued function, piecewise constant or sampled.

    Piecewise constant: ``matrices[k]`` holds on ``[breaks[k], breaks[k+1])``
    (right-continuous, last segment wraps to 1).  Piecewise smooth: ``sampler``
    is called with tau in [0, 1); ``breaks`` lists its discontinuity points so
    integrators never step across one.
    """

    n: int
    kind: Kind
    breaks: tuple[float, ...]
    matrices: tuple[np.ndarray, ...] | None = None
    sampler: Callable[[float], np.ndarray] | None = None

    @staticmethod
    def constant(M) -> "PeriodicMatrixFunction":
        M = np.asarray(M, dtype=float)
        return PeriodicMatrixFunction.from_segments([0.0], [M])

    @staticmethod
    def from_segments(breaks: Sequence[float], matrices) -> "PeriodicMatrixFunction":
        b = _as_breaks(breaks)
        mats = tuple(np.asarray(M, dtype=float).copy() for M in matrices)
        if len(mats) != len(b):
            raise SchemaError("need one matrix per breakpoint")
        n = mats[0].shape[0]
        for M in mats:
            if M.shape != (n, n):
                raise SchemaError("all segment matrices must be square, same size")
            M.setflags(write=False)
        return PeriodicMatrixFunction(n=n, kind=Kind.PIECEWISE_CONSTANT,
                                      breaks=b, matrices=mats)

    @staticmethod
    def from_sampler(n: int, sampler: Callable[[float], np.ndarray],
                     breakpoints: Sequence[float] = (0.0,)) -> "PeriodicMatrixFunction":
        return PeriodicMatrixFunction(n=n, kind=Kind.PIECEWISE_SMOOTH,
                                      breaks=_as_breaks(breakpoints), sampler=sampler)

    @property
    def n_segments(self) -> int:
        return len(self.breaks)

    def widths(self) -> np.ndarray:
        ends = list(self.breaks[1:]) + [1.0]
        return np.array(ends) - np.array(self.breaks)

    def segment_index(self, tau: float) -> int:
        tau = tau % 1.0
        return int(np.searchsorted(self.breaks, tau, side="right") - 1)

    def value(self, tau: float) -> np.ndarray:
        tau = tau % 1.0
        if self.kind is Kind.PIECEWISE_CONSTANT:
            return self.matrices[self.segment_index(tau)]
        return np.asarray(self.sampler(tau), dtype=float)

    def is_constant(self) -> bool:
        if self.kind is not Kind.PIECEWISE_CONSTANT:
            return False
        return all(np.array_equal(M, self.matrices[0]) for M in self.matrices[1:])

    def average(self) -> np.ndarray:
        """Entrywise period average (exact in the piecewise-constant case)."""
        if self.kind is Kind.PIECEWISE_CONSTANT:
            w = self.widths()
            return sum(wk * M for wk, M in zip(w, self.matrices))
        return _segment_quadrature(self, lambda M: M)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PeriodicMatrixFunction):
            return NotImplemented
        if (self.n, self.kind, self.breaks) != (other.n, other.kind, other.breaks):
            return False
        if self.kind is Kind.PIECEWISE_SMOOTH:
            return self.sampler is other.sampler
        return all(np.array_equal(a, b) for a, b in zip(self.matrices, other.matrices))


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(64)


def _segment_quadrature(f: PeriodicMatrixFunction, transform):
    """Composite 64-node Gauss-Legendre of ``transform(f(tau))`` over [0, 1)."""
    total = None
    starts = list(f.breaks)
    ends = starts[1:] + [1.0]
    for a, b in zip(starts, ends):
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        for x, w in zip(_GL_NODES, _GL_WEIGHTS):
            val = w * half * np.asarray(transform(f.value(mid + half * x)))
            total = val if total is None else total + val
    return total


@dataclass(frozen=True)
class ModelParameters:
    """Migration strength m >= 0 and period T > 0."""

    m: float
    T: float

    def __post_init__(self):
        if not (self.m >= 0.0):
            raise ValueError(f"m must be >= 0, got {self.m}")
        if not (self.T > 0.0):
            raise ValueError(f"T must be > 0, got {self.T}")


@dataclass(frozen=True)
class PatchModel:
    """n patches with periodic growth (diagonal) and migration schedules."""

    n: int
    growth: PeriodicMatrixFunction
    migration: PeriodicMatrixFunction
    validation: ValidationStatus | None = None
    name: str | None = None

    def __post_init__(self):
        if self.n < 2:
            raise SchemaError("n >= 2 required")
        if self.growth.n != self.n or self.migration.n != self.n:
            raise SchemaError("schedule dimensions disagree with n")

    def rates(self, tau: float) -> np.ndarray:
        """Growth-rate vector r(tau)."""
        return np.diag(self.growth.value(tau))

    def mean_rates(self) -> np.ndarray:
        """Per-patch average growth rates (exact for piecewise constants)."""
        return np.diag(self.growth.average())

    def all_sinks(self) -> bool:
        return bool(np.all(self.mean_rates() < 0.0))


def validate(model: PatchModel) -> ValidationReport:
    """Check migration sign/column-sum constraints and per-segment irreducibility.

    IrreducibleEverywhere requires each migration segment's positive-entry
    graph to be strongly connected.  Otherwise the model is provisionally
    PositiveMonodromyOnly: the growth rate exists wherever the monodromy
    matrix turns out to be entrywise positive (certified per (m, T) later).
    """
    from .spectral import is_irreducible  # local import avoids a cycle

    mig = model.migration
    issues: list[ValidationIssue] = []
    if mig.kind is Kind.PIECEWISE_CONSTANT:
        segs = list(enumerate(mig.matrices))
    else:
        # sample mid-segment; smooth schedules are only spot-checked
        mids = [0.5 * (a + b) for a, b in
                zip(mig.breaks, list(mig.breaks[1:]) + [1.0])]
        segs = [(k, mig.value(t)) for k, t in enumerate(mids)]

    irreducible = True
    for k, L in segs:
        off = L - np.diag(np.diag(L))
        bad = np.argwhere(off < 0.0)
        for i, j in bad:
            issues.append(ValidationIssue("NegativeOffDiagonal", k, int(i), int(j)))
        cols = L.sum(axis=0)
        for j, s in enumerate(cols):
            if abs(s) > COLUMN_SUM_TOL:
                issues.append(ValidationIssue("ColumnSumViolation", k, int(j),
                                              residual=float(s)))
        if not is_irreducible(L, tol=EDGE_TOL):
            irreducible = False

    if issues:
        return ValidationReport(ValidationStatus.INVALID, tuple(issues))
    if irreducible:
        return ValidationReport(ValidationStatus.IRREDUCIBLE_EVERYWHERE)
    return ValidationReport(ValidationStatus.POSITIVE_MONODROMY_ONLY)


def validated(model: PatchModel) -> PatchModel:
    """Return a copy of the model carrying its validation status."""
    report = validate(model)
    if not report.ok:
        raise SchemaError("invalid model: " + "; ".join(str(i) for i in report.issues))
    return replace(model, validation=report.status)


# ---------------------------------------------------------------------------
# Built-in catalog.  Entries are stored as exact rational strings and
# converted to float once, so segment averages and the table values they feed
# are exact in floating point.
# ---------------------------------------------------------------------------

def _F(x) -> float:
    return float(Fraction(x))


def _diag_segments(breaks, rates_per_segment):
    return PeriodicMatrixFunction.from_segments(
        breaks, [np.diag([_F(r) for r in rs]) for rs in rates_per_segment])


def _mig_from_offdiag(pairs):
    """Build a zero-column-sum migration matrix from {(i, j): l_ij} flows."""
    n = max(max(i, j) for i, j in pairs) + 1
    L = np.zeros((n, n))
    for (i, j), v in pairs.items():
        L[i, j] = _F(v)
    L -= np.diag(L.sum(axis=0))
    return L


# the half-period growth pattern shared by the two-patch examples
_R_HALF = (["0", "1/2"], [["1/2", "-3/2"], ["-1", "1/2"]])


def _two_patch_half(mig_segments, name):
    breaks, rates = _R_HALF
    growth = _diag_segments(breaks, rates)
    if len(mig_segments) == 1:
        migration = PeriodicMatrixFunction.constant(mig_segments[0])
    else:
        migration = PeriodicMatrixFunction.from_segments(breaks, mig_segments)
    return validated(PatchModel(2, growth, migration, name=name))


def _builtin_pm1(eps: float = 0.5) -> PatchModel:
    if not (0.0 < eps < 1.0):
        raise UnknownModel(f"pm1 requires 0 < eps < 1, got {eps}")
    a, b = 1.0 - eps, -1.0 - eps
    growth = PeriodicMatrixFunction.from_segments(
        ["0", "1/2"], [np.diag([a, b]), np.diag([b, a])])
    migration = PeriodicMatrixFunction.constant([[-1.0, 1.0], [1.0, -1.0]])
    return validated(PatchModel(2, growth, migration, name=f"pm1({eps})"))


def _builtin_ab1() -> PatchModel:
    L = _mig_from_offdiag({(0, 1): "2", (1, 0): "1"})
    return _two_patch_half([L], "ab1")


def _builtin_ab2s() -> PatchModel:
    L1 = _mig_from_offdiag({(0, 1): "1", (1, 0): "2"})
    L2 = _mig_from_offdiag({(0, 1): "2", (1, 0): "1"})
    return _two_patch_half([L1, L2], "ab2s")


def _builtin_ab_mstar_inf() -> PatchModel:
    L1 = _mig_from_offdiag({(0, 1): "5", (1, 0): "1"})
    L2 = _mig_from_offdiag({(0, 1): "1", (1, 0): "5"})
    return _two_patch_half([L1, L2], "ab_mstar_inf")


def _builtin_three_patch_circular() -> PatchModel:
    growth = _diag_segments(
        ["0", "1/2"],
        [["3/20", "-9/20", "-1/5"], ["-9/20", "3/20", "-1/5"]])
    L = _mig_from_offdiag({(1, 0): "1", (2, 1): "1", (0, 2): "1"})
    migration = PeriodicMatrixFunction.constant(L)
    return validated(PatchModel(3, growth, migration, name="three_patch_circular"))


def _builtin_abc_two_patch() -> PatchModel:
    breaks = ["0", "1/3", "2/3"]
    growth = _diag_segments(
        breaks, [["0", "-1/10"], ["-4/5", "3/2"], ["1/2", "-2"]])
    migs = [
        _mig_from_offdiag({(0, 1): "1/10", (1, 0): "1"}),
        _mig_from_offdiag({(0, 1): "2", (1, 0): "1/5"}),
        _mig_from_offdiag({(0, 1): "1/100", (1, 0): "1/100"}),
    ]
    migration = PeriodicMatrixFunction.from_segments(breaks, migs)
    return validated(PatchModel(2, growth, migration, name="abc_two_patch"))


def _builtin_fainshil(eps: float = 0.1, delta: float = 0.1) -> PatchModel:
    """Three-patch switched system with two antiphase circular flow patterns.

    ``eps``/``delta`` are the weak back-flow strengths; at (0, 0) each
    half-period migration is one-way and the model is only provisionally
    valid, while positive values make it irreducible everywhere.
    """
    growth = _diag_segments(["0", "1/2"], [["9", "-1", "-10"], ["-10", "0", "9"]])
    L1 = _mig_from_offdiag({(1, 0): "10", (2, 1): eps, (0, 2): eps})
    L2 = _mig_from_offdiag({(1, 0): delta, (2, 1): "10", (0, 2): "10"})
    migration = PeriodicMatrixFunction.from_segments(["0", "1/2"], [L1, L2])
    return validated(PatchModel(3, growth, migration,
                                name=f"fainshil({eps},{delta})"))


def _builtin_unidir_favorable() -> PatchModel:
    L1 = np.array([[0.0, 1.0], [0.0, -1.0]])
    L2 = np.array([[-1.0, 0.0], [1.0, 0.0]])
    return _two_patch_half([L1, L2], "unidir_favorable")


def _builtin_unidir_unfavorable() -> PatchModel:
    L1 = np.array([[-1.0, 0.0], [1.0, 0.0]])
    L2 = np.array([[0.0, 1.0], [0.0, -1.0]])
    return _two_patch_half([L1, L2], "unidir_unfavorable")


def _builtin_three_patch_reducible(a: float = 1.0, b: float = -1.0) -> PatchModel:
    """One favorable patch (rate ``a``) rotating through three positions;
    symmetric migration couples only the two current sink patches (rate ``b``),
    so the favorable patch is always isolated.
    """
    breaks = ["0", "1/3", "2/3"]
    growth = _diag_segments(breaks, [[a, b, b], [b, a, b], [b, b, a]])
    migs = [
        _mig_from_offdiag({(1, 2): "1", (2, 1): "1"}),
        _mig_from_offdiag({(0, 2): "1", (2, 0): "1"}),
        _mig_from_offdiag({(0, 1): "1", (1, 0): "1", (2, 2): "0"}),
    ]
    migration = PeriodicMatrixFunction.from_segments(breaks, migs)
    return validated(PatchModel(3, growth, migration,
                                name=f"three_patch_reducible({a},{b})"))


_CATALOG: dict[str, Callable[..., PatchModel]] = {
    "pm1": _builtin_pm1,
    "ab1": _builtin_ab1,
    "ab2s": _builtin_ab2s,
    "ab_mstar_inf": _builtin_ab_mstar_inf,
    "three_patch_circular": _builtin_three_patch_circular,
    "abc_two_patch": _builtin_abc_two_patch,
    "fainshil": _builtin_fainshil,
    "unidir_favorable": _builtin_unidir_favorable,
    "unidir_unfavorable": _builtin_unidir_unfavorable,
    "three_patch_reducible": _builtin_three_patch_reducible,
}


def catalog() -> tuple[str, ...]:
    return tuple(sorted(_CATALOG))


def builtin(name: str, *args: float, **kwargs: float) -> PatchModel:
    """Look up a built-in model; accepts ``"name"`` or ``"name(a,b)"`` forms."""
    name = name.strip()
    if "(" in name:
        if args or kwargs:
            raise UnknownModel("give parameters either inline or as arguments")
        base, _, rest = name.partition("(")
        rest = rest.rstrip()
        if not rest.endswith(")"):
            raise UnknownModel(f"malformed model name {name!r}")
        argstr = rest[:-1].strip()
        try:
            args = tuple(float(Fraction(s.strip())) for s in argstr.split(",")) \
                if argstr else ()
        except ValueError as exc:
            raise UnknownModel(f"bad parameters in {name!r}") from exc
        name = base.strip()
    if name not in _CATALOG:
        raise UnknownModel(f"unknown model {name!r}; see catalog()")
    try:
        return _CATALOG[name](*args, **kwargs)
    except TypeError as exc:
        raise UnknownModel(f"bad parameters for {name!r}: {exc}") from exc


# ---------------------------------------------------------------------------
# JSON serialization (piecewise-constant models only)
# ---------------------------------------------------------------------------

def to_dict(model: PatchModel) -> dict:
    if (model.growth.kind is not Kind.PIECEWISE_CONSTANT
            or model.migration.kind is not Kind.PIECEWISE_CONSTANT):
        raise SchemaError("only piecewise-constant models are serializable")
    return {
        "version": SCHEMA_VERSION,
        "n": model.n,
        "growth": {
            "breaks": list(model.growth.breaks),
            "diagonals": [np.diag(M).tolist() for M in model.growth.matrices],
        },
        "migration": {
            "breaks": list(model.migration.breaks),
            "matrices": [M.tolist() for M in model.migration.matrices],
        },
    }


def from_dict(doc: dict) -> PatchModel:
    if not isinstance(doc, dict):
        raise ParseError("model document must be a JSON object")
    version = doc.get("version")
    if version != SCHEMA_VERSION:
        raise SchemaVersionMismatch(f"expected version {SCHEMA_VERSION}, got {version}")
    for key in ("n", "growth", "migration"):
        if key not in doc:
            raise ParseError("missing field", field=key)
    n = doc["n"]
    if not isinstance(n, int) or n < 2:
        raise SchemaError("n >= 2 required")
    g, mg = doc["growth"], doc["migration"]
    try:
        growth = PeriodicMatrixFunction.from_segments(
            g["breaks"], [np.diag(d) for d in g["diagonals"]])
        migration = PeriodicMatrixFunction.from_segments(mg["breaks"], mg["matrices"])
    except KeyError as exc:
        raise ParseError("missing field", field=str(exc)) from exc
    for d in g["diagonals"]:
        if len(d) != n:
            raise ParseError("growth diagonal has wrong length", field="growth")
    model = PatchModel(n, growth, migration)
    report = validate(model)
    if not report.ok:
        raise SchemaError("invalid model: " + "; ".join(str(i) for i in report.issues))
    return replace(model, validation=report.status)


def save(model: PatchModel, path) -> None:
    with open(path, "w") as fh:
        json.dump(to_dict(model), fh, indent=2)
        fh.write("\n")


def load(path) -> PatchModel:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    return from_dict(doc)
