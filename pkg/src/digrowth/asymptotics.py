"""Closed-form limit values of the growth rate Lambda(m, T).

The four one-sided limits and four corner values:

* fast regime      Lambda(m, 0)   = lambda_max(avg R + m avg L)
* slow regime      Lambda(m, inf) = int_0^1 lambda_max(R(tau) + m L(tau)) dtau
* slow migration   Lambda(0, T)   = max_i rbar_i
* fast migration   Lambda(inf, T) = int_0^1 p(tau) . r(tau) dtau,
                                    p(tau) = kernel of L(tau)
* corners          Lambda(0,0) = max_i rbar_i; Lambda(inf,0) = q . rbar with
                   q = kernel of avg L; Lambda(0,inf) = chi;
                   Lambda(inf,inf) = fast-migration value

plus the threshold chi = int_0^1 max_i r_i(tau) dtau, the critical migration
rate m* solving Lambda(m, inf) = 0 when it exists, two-patch closed forms,
and an empirical convexity/monotonicity report for the two limit curves.
All integrals are evaluated exactly segment-by-segment for piecewise-constant
schedules, and by composite 64-node Gauss-Legendre otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import merged_segments
from .model import Kind, PatchModel, _segment_quadrature
from .spectral import (is_irreducible, kernel_vector, perron_frobenius_metzler,
                       spectral_abscissa)

M_STAR_BRACKET = (1e-6, 100.0)
M_STAR_MAXITER = 200
M_STAR_TOL = 1e-10


class AsymptoticsError(Exception):
    pass


class BracketFailure(AsymptoticsError):
    pass


class ReducibleSegment(AsymptoticsError):
    pass


class WrongDimension(AsymptoticsError):
    pass


def _lam_max(A: np.ndarray) -> float:
    if is_irreducible(A):
        lam, _ = perron_frobenius_metzler(A)
        return lam
    return spectral_abscissa(A)


def chi(model: PatchModel) -> float:
    """Period average of the pointwise best growth rate max_i r_i(tau)."""
    g = model.growth
    if g.kind is Kind.PIECEWISE_CONSTANT:
        w = g.widths()
        return float(sum(wk * np.diag(M).max() for wk, M in zip(w, g.matrices)))
    return float(_segment_quadrature(g, lambda M: np.diag(M).max()))


def limit_T0(model: PatchModel, m: float) -> float:
    """Fast regime: spectral abscissa of the period-averaged matrix."""
    A = model.growth.average() + m * model.migration.average()
    return _lam_max(A)


def limit_Tinf(model: PatchModel, m: float) -> float:
    """Slow regime: period average of the pointwise spectral abscissa."""
    if (model.growth.kind is Kind.PIECEWISE_CONSTANT
            and model.migration.kind is Kind.PIECEWISE_CONSTANT):
        _, widths, mats = merged_segments(model, m)
        return float(sum(w * _lam_max(A) for w, A in zip(widths, mats)))
    from .model import PeriodicMatrixFunction
    breaks = sorted(set(model.growth.breaks) | set(model.migration.breaks))
    merged = PeriodicMatrixFunction.from_sampler(
        model.n,
        lambda t: model.growth.value(t) + m * model.migration.value(t),
        breaks)
    return float(_segment_quadrature(merged, _lam_max))


def limit_m0(model: PatchModel) -> float:
    """Slow migration: the best patch-average growth rate, any T."""
    return float(model.mean_rates().max())


def limit_minf(model: PatchModel) -> float:
    """Fast migration: instantaneous ideal-free average, any T.

    Needs every migration segment irreducible so its kernel direction p(tau)
    is well defined and positive.
    """
    mig, g = model.migration, model.growth
    if (mig.kind is Kind.PIECEWISE_CONSTANT
            and g.kind is Kind.PIECEWISE_CONSTANT):
        breaks, widths, _ = merged_segments(model, 1.0)
        total = 0.0
        for b, w in zip(breaks, widths):
            L = mig.value(b)
            if not is_irreducible(L):
                raise ReducibleSegment(
                    "fast-migration limit needs irreducible migration")
            total += w * float(kernel_vector(L) @ np.diag(g.value(b)))
        return total
    from .model import PeriodicMatrixFunction
    breaks = sorted(set(g.breaks) | set(mig.breaks))

    def f(tau):
        L = mig.value(tau)
        if not is_irreducible(L):
            raise ReducibleSegment(
                "fast-migration limit needs irreducible migration")
        return np.array([[kernel_vector(L) @ model.rates(tau)]])

    merged = PeriodicMatrixFunction.from_sampler(1, f, breaks)
    return float(merged.average()[0, 0])


def corners(model: PatchModel) -> dict[str, float]:
    """The four corner values of the (m, T) diagram."""
    rbar = model.mean_rates()
    Lbar = model.migration.average()
    if is_irreducible(Lbar):
        q = kernel_vector(Lbar)
        lam_inf0 = float(q @ rbar)
    else:
        lam_inf0 = float("nan")
    try:
        lam_infinf = limit_minf(model)
    except ReducibleSegment:
        lam_infinf = float("nan")
    return {
        "lambda_00": float(rbar.max()),
        "lambda_inf0": lam_inf0,
        "lambda_0inf": chi(model),
        "lambda_infinf": lam_infinf,
    }


def m_star(model: PatchModel, bracket_max: float = M_STAR_BRACKET[1]
           ) -> float | None:
    """Unique root of m -> Lambda(m, inf), or None.

    None covers both the precondition failures (some patch is not a sink, or
    chi <= 0) and the genuine no-root case where the fast-migration value is
    nonnegative, so growth persists for every m.
    """
    if chi(model) <= 0.0 or limit_m0(model) >= 0.0:
        return None
    if limit_minf(model) >= 0.0:
        return None  # slow-regime curve stays positive for all m
    lo, hi = M_STAR_BRACKET[0], bracket_max
    f_hi = limit_Tinf(model, hi)
    if f_hi > 0.0:
        raise BracketFailure(f"Lambda({hi}, inf) = {f_hi} > 0; widen bracket")
    if limit_Tinf(model, lo) <= 0.0:
        raise BracketFailure("no sign change on the bracket")
    for _ in range(M_STAR_MAXITER):
        mid = 0.5 * (lo + hi)
        val = limit_Tinf(model, mid)
        if abs(val) <= M_STAR_TOL:
            return mid
        if val > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _two_patch_D(r1, r2, l21, l12, m):
    return (r1 - r2 + m * (l12 - l21)) ** 2 + 4.0 * m * m * l12 * l21


def two_patch_closed_forms(model: PatchModel, m: float) -> dict[str, float]:
    """Explicit fast/slow-regime values for n = 2 from the quadratic
    characteristic polynomial of R + mL.
    """
    if model.n != 2:
        raise WrongDimension("closed forms require exactly two patches")
    rbar = model.mean_rates()
    Lbar = model.migration.average()
    l12b, l21b = Lbar[0, 1], Lbar[1, 0]
    lam_T0 = (0.5 * (rbar[0] + rbar[1]
                     + np.sqrt(_two_patch_D(rbar[0], rbar[1], l21b, l12b, m)))
              - 0.5 * m * (l12b + l21b))

    def sqrtD_of(tau):
        r = model.rates(tau)
        L = model.migration.value(tau)
        return np.sqrt(_two_patch_D(r[0], r[1], L[1, 0], L[0, 1], m))

    if (model.growth.kind is Kind.PIECEWISE_CONSTANT
            and model.migration.kind is Kind.PIECEWISE_CONSTANT):
        breaks, widths, _ = merged_segments(model, m)
        integral = sum(w * sqrtD_of(b) for b, w in zip(breaks, widths))
    else:
        from .model import PeriodicMatrixFunction
        breaks = sorted(set(model.growth.breaks) | set(model.migration.breaks))
        f = PeriodicMatrixFunction.from_sampler(
            1, lambda t: np.array([[sqrtD_of(t)]]), breaks)
        integral = float(f.average()[0, 0])
    lam_Tinf = (0.5 * (rbar[0] + rbar[1] + integral)
                - 0.5 * m * (l12b + l21b))
    return {"lambda_T0": float(lam_T0), "lambda_Tinf": float(lam_Tinf)}


@dataclass(frozen=True)
class ConvexityReport:
    m_grid: np.ndarray
    decreasing_T0: bool
    decreasing_Tinf: bool
    convex_T0: bool
    convex_Tinf: bool
    degenerate_equal_rates: bool
    worst_increase: float
    worst_concavity: float


def convexity_report(model: PatchModel, m_grid) -> ConvexityReport:
    """Finite-difference check that both limit curves are decreasing and
    convex in m; degenerate when all patch averages coincide (flat curves).
    """
    m_grid = np.asarray(m_grid, dtype=float)
    f0 = np.array([limit_T0(model, m) for m in m_grid])
    finf = np.array([limit_Tinf(model, m) for m in m_grid])
    slack = 1e-8
    d0, dinf = np.diff(f0), np.diff(finf)
    # slopes, then slope differences: handles non-uniform (log-spaced) grids
    h = np.diff(m_grid)
    dd0, ddinf = np.diff(d0 / h), np.diff(dinf / h)
    rbar = model.mean_rates()
    return ConvexityReport(
        m_grid=m_grid,
        decreasing_T0=bool(np.all(d0 <= slack)),
        decreasing_Tinf=bool(np.all(dinf <= slack)),
        convex_T0=bool(np.all(dd0 >= -slack)),
        convex_Tinf=bool(np.all(ddinf >= -slack)),
        degenerate_equal_rates=bool(np.ptp(rbar) < 1e-12),
        worst_increase=float(max(d0.max(), dinf.max(), 0.0)),
        worst_concavity=float(min(dd0.min(), ddinf.min(), 0.0)),
    )


@dataclass(frozen=True)
class LimitPanel:
    chi: float
    lambda_00: float
    lambda_inf0: float
    lambda_0inf: float
    lambda_infinf: float
    lambda_0T: float
    lambda_infT: float
    m_star: float | None
    infimum: float | None
    lambda_m_T0: float | None = None  # Lambda(m, 0) at a requested m
    lambda_m_Tinf: float | None = None


def limit_panel(model: PatchModel, m: float | None = None) -> LimitPanel:
    c = corners(model)
    inf_val = None
    if model.migration.is_constant():
        L = model.migration.value(0.0)
        if is_irreducible(L):
            inf_val = float(kernel_vector(L) @ model.mean_rates())
    try:
        ms = m_star(model)
    except (BracketFailure, ReducibleSegment):
        ms = None
    return LimitPanel(
        chi=chi(model),
        lambda_00=c["lambda_00"],
        lambda_inf0=c["lambda_inf0"],
        lambda_0inf=c["lambda_0inf"],
        lambda_infinf=c["lambda_infinf"],
        lambda_0T=limit_m0(model),
        lambda_infT=c["lambda_infinf"],
        m_star=ms,
        infimum=inf_val,
        lambda_m_T0=None if m is None else limit_T0(model, m),
        lambda_m_Tinf=None if m is None else limit_Tinf(model, m),
    )
