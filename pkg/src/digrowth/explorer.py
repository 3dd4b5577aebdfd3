"""Parameter-plane exploration: (m, T) sweeps, critical-curve tracing, and
dispersal-induced-growth classification.

A sweep evaluates Lambda on a (log-spaced) rectangular grid, cell by cell,
recording a status instead of failing where the monodromy matrix is not
positive.  Critical curves (the zero set of Lambda) are traced by marching
squares on the sweep grid followed by one-dimensional bisection along each
crossing edge, so every emitted vertex satisfies |Lambda| <= tol.  The DIG
verdict combines the exact threshold chi with the slow-regime root m*; for
models that are only provisionally valid (reducible migration) the verdict is
empirical, summarizing the sweep.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import asymptotics
from .dynamics import NonPositiveMonodromy, growth_rate
from .model import ModelParameters, PatchModel, ValidationStatus

DEFAULT_M_RANGE = (1e-2, 1e2)
DEFAULT_T_RANGE = (1e-2, 1e3)
DEFAULT_RESOLUTION = 128
CURVE_TOL = 1e-8
BISECT_CAP = 60


class ExplorerError(Exception):
    pass


class NoZeroCrossing(ExplorerError):
    pass


@dataclass(frozen=True)
class SweepGrid:
    m_values: np.ndarray
    T_values: np.ndarray
    lam: np.ndarray      # shape (len(m_values), len(T_values))
    status: np.ndarray   # same shape, strings: ok|non_positive_monodromy|error
    chi: float

    def ok(self) -> np.ndarray:
        return self.status == "ok"


@dataclass(frozen=True)
class CriticalCurve:
    branches: list[np.ndarray]   # each (k, 2) array of (m, T), ordered by m
    tol: float

    @property
    def n_branches(self) -> int:
        return len(self.branches)

    def vertices(self) -> np.ndarray:
        if not self.branches:
            return np.empty((0, 2))
        return np.vstack(self.branches)


@dataclass(frozen=True)
class DigVerdict:
    all_sinks: bool
    chi: float
    dig_possible: bool
    case: str                    # Case1 | Case2 | NotAllSinks | ReducibleUnknown
    m_star: float | None = None
    empirical: dict = field(default_factory=dict)


def _lambda_at(model: PatchModel, m: float, T: float) -> float:
    return growth_rate(model, ModelParameters(m=m, T=T)).lam


def sweep(model: PatchModel,
          m_range: tuple[float, float] = DEFAULT_M_RANGE,
          T_range: tuple[float, float] = DEFAULT_T_RANGE,
          resolution: int | tuple[int, int] = DEFAULT_RESOLUTION,
          jobs: int | None = None) -> SweepGrid:
    """Evaluate Lambda on a log-spaced (m, T) grid."""
    if isinstance(resolution, int):
        resolution = (resolution, resolution)
    m_values = np.geomspace(m_range[0], m_range[1], resolution[0])
    T_values = np.geomspace(T_range[0], T_range[1], resolution[1])
    lam = np.full((len(m_values), len(T_values)), np.nan)
    status = np.full(lam.shape, "ok", dtype=object)

    def cell(ij):
        i, j = ij
        try:
            return i, j, _lambda_at(model, m_values[i], T_values[j]), "ok"
        except NonPositiveMonodromy:
            return i, j, np.nan, "non_positive_monodromy"
        except Exception:
            return i, j, np.nan, "error"

    indices = [(i, j) for i in range(len(m_values)) for j in range(len(T_values))]
    if jobs and jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(cell, indices))
    else:
        results = [cell(ij) for ij in indices]
    for i, j, value, st in results:
        lam[i, j] = value
        status[i, j] = st
    return SweepGrid(m_values=m_values, T_values=T_values, lam=lam,
                     status=status, chi=asymptotics.chi(model))


def _bisect_edge(f, lo: float, hi: float, f_lo: float, f_hi: float,
                 tol: float) -> float:
    """Root along one coordinate, bisected in log-space, |f| <= tol at exit."""
    llo, lhi = math.log(lo), math.log(hi)
    for _ in range(BISECT_CAP):
        mid = math.exp(0.5 * (llo + lhi))
        val = f(mid)
        if abs(val) <= tol:
            return mid
        if (val > 0.0) == (f_lo > 0.0):
            llo, f_lo = math.log(mid), val
        else:
            lhi = math.log(mid)
    return math.exp(0.5 * (llo + lhi))


def critical_curve(model: PatchModel,
                   m_range: tuple[float, float] = DEFAULT_M_RANGE,
                   T_range: tuple[float, float] = DEFAULT_T_RANGE,
                   resolution: int | tuple[int, int] = DEFAULT_RESOLUTION,
                   tol: float = CURVE_TOL,
                   grid: SweepGrid | None = None,
                   jobs: int | None = None) -> CriticalCurve:
    """Zero-level set of Lambda(m, T) as refined polyline branches."""
    if grid is None:
        grid = sweep(model, m_range, T_range, resolution, jobs=jobs)
    mv, Tv, lam = grid.m_values, grid.T_values, grid.lam
    ok = grid.ok() & np.isfinite(lam)
    pos = lam > 0.0

    # refined crossing point per grid edge, keyed by (orientation, i, j)
    points: dict[tuple, tuple[float, float]] = {}

    def edge_point(key):
        if key in points:
            return points[key]
        orient, i, j = key
        if orient == "h":  # between (i, j) and (i+1, j): varies in m
            a, b = lam[i, j], lam[i + 1, j]
            root = _bisect_edge(lambda m: _lambda_at(model, m, Tv[j]),
                                mv[i], mv[i + 1], a, b, tol)
            pt = (root, Tv[j])
        else:              # between (i, j) and (i, j+1): varies in T
            a, b = lam[i, j], lam[i, j + 1]
            root = _bisect_edge(lambda T: _lambda_at(model, mv[i], T),
                                Tv[j], Tv[j + 1], a, b, tol)
            pt = (mv[i], root)
        points[key] = pt
        return pt

    def crossings(i, j):
        """Edge keys of the cell (i, j)..(i+1, j+1) where the sign flips."""
        if not (ok[i, j] and ok[i + 1, j] and ok[i, j + 1] and ok[i + 1, j + 1]):
            return []
        keys = []
        if pos[i, j] != pos[i + 1, j]:
            keys.append(("h", i, j))
        if pos[i, j + 1] != pos[i + 1, j + 1]:
            keys.append(("h", i, j + 1))
        if pos[i, j] != pos[i, j + 1]:
            keys.append(("v", i, j))
        if pos[i + 1, j] != pos[i + 1, j + 1]:
            keys.append(("v", i + 1, j))
        return keys

    # connectivity graph between edge crossings, linked within each cell
    links: dict[tuple, set[tuple]] = {}
    for i in range(len(mv) - 1):
        for j in range(len(Tv) - 1):
            keys = crossings(i, j)
            if len(keys) == 2:
                a, b = keys
                links.setdefault(a, set()).add(b)
                links.setdefault(b, set()).add(a)
            elif len(keys) == 4:
                # saddle cell: pair edges arbitrarily but consistently
                h_keys = [k for k in keys if k[0] == "h"]
                v_keys = [k for k in keys if k[0] == "v"]
                pairs = list(zip(h_keys, v_keys)) if h_keys and v_keys \
                    else [(keys[0], keys[1]), (keys[2], keys[3])]
                for a, b in pairs:
                    links.setdefault(a, set()).add(b)
                    links.setdefault(b, set()).add(a)
    if not links:
        raise NoZeroCrossing("Lambda has uniform sign on the usable grid")

    # walk the graph into polyline branches
    unvisited = set(links)
    branches = []
    while unvisited:
        # prefer an endpoint (degree 1) as the walk start
        start = next((k for k in unvisited if len(links[k] & unvisited) <= 1),
                     next(iter(unvisited)))
        chain = [start]
        unvisited.discard(start)
        for _ in range(2):  # extend both directions from the start
            while True:
                nxt = [k for k in links[chain[-1]] if k in unvisited]
                if not nxt:
                    break
                chain.append(nxt[0])
                unvisited.discard(nxt[0])
            chain.reverse()
        pts = np.array([edge_point(k) for k in chain])
        order = np.argsort(pts[:, 0], kind="stable")
        branches.append(pts[order])
    branches.sort(key=lambda b: b[0, 0])
    return CriticalCurve(branches=branches, tol=tol)


def classify_dig(model: PatchModel,
                 sweep_resolution: int = 64,
                 jobs: int | None = None) -> DigVerdict:
    """Exact verdict for everywhere-irreducible models; empirical otherwise."""
    chi_val = asymptotics.chi(model)
    all_sinks = model.all_sinks()
    if model.validation is not ValidationStatus.IRREDUCIBLE_EVERYWHERE:
        grid = sweep(model, resolution=sweep_resolution, jobs=jobs)
        finite = grid.lam[grid.ok() & np.isfinite(grid.lam)]
        found = bool(finite.size and finite.max() > 0.0)
        best = float(finite.max()) if finite.size else float("nan")
        return DigVerdict(all_sinks=all_sinks, chi=chi_val,
                          dig_possible=found, case="ReducibleUnknown",
                          empirical={"growth_found": found,
                                     "max_lambda": best,
                                     "cells_evaluated": int(grid.ok().sum())})
    if not all_sinks:
        return DigVerdict(all_sinks=False, chi=chi_val, dig_possible=False,
                          case="NotAllSinks")
    if chi_val <= 0.0:
        # the threshold itself rules growth out; neither slow-regime case applies
        return DigVerdict(all_sinks=True, chi=chi_val, dig_possible=False,
                          case="ChiNonpositive")
    ms = asymptotics.m_star(model)
    if ms is None and asymptotics.limit_minf(model) >= 0.0:
        return DigVerdict(all_sinks=True, chi=chi_val, dig_possible=True,
                          case="Case2")
    return DigVerdict(all_sinks=True, chi=chi_val, dig_possible=True,
                      case="Case1", m_star=ms)


def monotonicity_scan(model: PatchModel, m_list, T_ladder) -> dict:
    """For each m, report whether Lambda(m, .) is numerically monotone on the
    ladder.  Evidence only; nothing is asserted about in-between periods.
    """
    T_ladder = list(T_ladder)
    out = {}
    for m in m_list:
        vals = [_lambda_at(model, m, T) for T in T_ladder]
        diffs = np.diff(vals)
        out[float(m)] = {
            "lambda": vals,
            "monotone_increasing": bool(np.all(diffs >= -1e-10)),
            "monotone_decreasing": bool(np.all(diffs <= 1e-10)),
        }
    return out


def critical_period(model: PatchModel, m: float,
                    T_range: tuple[float, float] = DEFAULT_T_RANGE,
                    samples: int = 200, tol: float = CURVE_TOL) -> float:
    """Smallest period T with Lambda(m, T) = 0 along a log-spaced scan.

    Raises NoZeroCrossing when Lambda keeps one sign over the whole range.
    """
    Ts = np.geomspace(T_range[0], T_range[1], samples)
    prev_T, prev_v = Ts[0], _lambda_at(model, m, Ts[0])
    if abs(prev_v) <= tol:
        return float(prev_T)
    for T in Ts[1:]:
        v = _lambda_at(model, m, T)
        if abs(v) <= tol:
            return float(T)
        if (v > 0.0) != (prev_v > 0.0):
            return _bisect_edge(lambda t: _lambda_at(model, m, t),
                                prev_T, T, prev_v, v, tol)
        prev_T, prev_v = T, v
    raise NoZeroCrossing(f"Lambda({m}, .) keeps one sign on {T_range}")


def max_lambda_over_T(model: PatchModel, m: float,
                      T_range: tuple[float, float] = DEFAULT_T_RANGE,
                      samples: int = 400) -> float:
    """max_T Lambda(m, T) over a dense log-spaced scan with parabolic refine."""
    Ts = np.geomspace(T_range[0], T_range[1], samples)
    vals = np.array([_lambda_at(model, m, T) for T in Ts])
    k = int(np.argmax(vals))
    best = float(vals[k])
    if 0 < k < samples - 1:
        # golden-section polish on log T around the discrete argmax
        lo, hi = math.log(Ts[k - 1]), math.log(Ts[k + 1])
        phi = (math.sqrt(5.0) - 1.0) / 2.0
        a, b = lo, hi
        c, d = b - phi * (b - a), a + phi * (b - a)
        fc = _lambda_at(model, m, math.exp(c))
        fd = _lambda_at(model, m, math.exp(d))
        for _ in range(40):
            if fc >= fd:
                b, d, fd = d, c, fc
                c = b - phi * (b - a)
                fc = _lambda_at(model, m, math.exp(c))
            else:
                a, c, fc = c, d, fd
                d = a + phi * (b - a)
                fd = _lambda_at(model, m, math.exp(d))
        best = max(best, fc, fd)
    return best


def growth_band(model: PatchModel,
                m_range: tuple[float, float] = DEFAULT_M_RANGE,
                T_range: tuple[float, float] = DEFAULT_T_RANGE,
                coarse: int = 48, tol: float = 5e-4) -> tuple[float, float]:
    """Extent [m_lo, m_hi] of the set {m : max_T Lambda(m, T) > 0}.

    Assumes a single band, as produced by models whose growth region is a
    bounded strip in m; the two ends are located by bisection on the sign of
    the T-maximized growth rate.
    """
    ms = np.geomspace(m_range[0], m_range[1], coarse)
    g = np.array([max_lambda_over_T(model, m, T_range) for m in ms])
    positive = np.flatnonzero(g > 0.0)
    if positive.size == 0:
        raise NoZeroCrossing("no growth found on the coarse m scan")
    i0, i1 = positive[0], positive[-1]

    def refine(lo, hi, f_lo, f_hi):
        return _bisect_edge(lambda m: max_lambda_over_T(model, m, T_range),
                            lo, hi, f_lo, f_hi, tol)

    m_lo = ms[0] if i0 == 0 else refine(ms[i0 - 1], ms[i0], g[i0 - 1], g[i0])
    m_hi = ms[-1] if i1 == len(ms) - 1 else \
        refine(ms[i1], ms[i1 + 1], g[i1], g[i1 + 1])
    return float(m_lo), float(m_hi)
