"""Finite-(m, T) machinery: monodromy matrices, the growth rate, and the
periodic simplex solution.

The linear system dx/dt = (R(t/T) + m L(t/T)) x is resolved over one period
into the monodromy matrix Phi(T); the growth rate is Lambda = ln(mu)/T with mu
the Perron root of Phi(T).  For piecewise-constant schedules Phi(T) is an
exact ordered product of segment exponentials; piecewise-smooth schedules fall
back to fixed-step RK4 aligned to breakpoints.  All internal products carry a
separate log-scale factor so that nothing overflows even when Lambda*T is in
the thousands.

The simplex reduction theta = x / sum(x) obeys
dtheta/dt = A theta - <A theta, 1> theta and has a unique globally attracting
T-periodic solution theta* anchored at the Perron vector of Phi(T).  From
theta* come two independent expressions for Lambda: the integral formula
Lambda = int_0^1 sum_i r_i(tau) theta*_i(T tau) dtau, and, for constant
migration, the h-formula Lambda = sum_i p_i rbar_i + m int_0^1 h(theta*) dtau.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import Kind, ModelParameters, PatchModel, ValidationStatus
from .spectral import expm, perron_frobenius_metzler, perron_positive

RK4_MIN_STEPS = 2_000
DEFECT_TOL = 1e-8
# entrywise positivity threshold when certifying a provisional monodromy
POSITIVITY_FLOOR = 1e-300
# target on ||h * T * A|| per exponential sub-step, keeps factors representable
_STEP_BUDGET = 10.0
_MAX_NODES = 400_000


class DynamicsError(Exception):
    pass


class NonPositiveMonodromy(DynamicsError):
    """Phi(T) is not entrywise positive, so no common growth exponent exists."""


class IntegrationFailure(DynamicsError):
    pass


class PeriodicityDefectExceeded(DynamicsError):
    pass


class NonConstantMigration(DynamicsError):
    pass


@dataclass(frozen=True)
class GrowthResult:
    lam: float           # growth rate Lambda(m, T)
    mu: float            # Perron root of Phi(T); inf if e^{Lambda T} overflows
    pi: np.ndarray       # Perron vector, unit sum
    method: str          # "ExponentialProduct" | "IntegratedFundamental"
    cross_check: float | None = None


@dataclass(frozen=True)
class SimplexTrajectory:
    times: np.ndarray    # grid on [0, T]
    states: np.ndarray   # (len(times), n), rows on the simplex
    periodic_defect: float


@dataclass(frozen=True)
class SlowCurveReport:
    sup_deviation: float
    T: float
    layer_width: float
    n_compared: int


def _is_pwc(model: PatchModel) -> bool:
    return (model.growth.kind is Kind.PIECEWISE_CONSTANT
            and model.migration.kind is Kind.PIECEWISE_CONSTANT)


def merged_segments(model: PatchModel, m: float):
    """Common breakpoint refinement with A_k = R_k + m L_k per segment."""
    breaks = sorted(set(model.growth.breaks) | set(model.migration.breaks))
    mats = []
    for tau in breaks:
        mats.append(model.growth.value(tau) + m * model.migration.value(tau))
    widths = np.diff(np.array(breaks + [1.0]))
    return np.array(breaks), widths, mats


def _scale_norm(A: np.ndarray) -> float:
    return float(np.abs(A).sum(axis=0).max())


def _expm_scaled(A: np.ndarray) -> tuple[np.ndarray, float]:
    """(E, l) with e^A = e^l * E and E kept at unit max-entry scale."""
    nrm = _scale_norm(A)
    j = max(0, math.ceil(math.log2(nrm / _STEP_BUDGET))) if nrm > _STEP_BUDGET else 0
    E = expm(A / 2 ** j)
    l = 0.0
    c = np.abs(E).max()
    if c > 0:
        E = E / c
        l = math.log(c)
    for _ in range(j):
        E = E @ E
        l *= 2.0
        c = np.abs(E).max()
        if not np.isfinite(c) or c <= 0.0:
            raise IntegrationFailure("matrix exponential scaling broke down")
        E /= c
        l += math.log(c)
    return E, l


def _monodromy_scaled_product(model: PatchModel,
                              params: ModelParameters) -> tuple[np.ndarray, float]:
    _, widths, mats = merged_segments(model, params.m)
    M = np.eye(model.n)
    logscale = 0.0
    for w, A in zip(widths, mats):
        E, l = _expm_scaled(w * params.T * A)
        M = E @ M
        logscale += l
        c = np.abs(M).max()
        M /= c
        logscale += math.log(c)
    return M, logscale


def _monodromy_scaled_rk4(model: PatchModel, params: ModelParameters,
                          steps: int = RK4_MIN_STEPS) -> tuple[np.ndarray, float]:
    """Fundamental matrix over one period by classical RK4 on
    dX/dtau = T A(tau) X, steps aligned to breakpoints, renormalized as it goes.
    """
    breaks = sorted(set(model.growth.breaks) | set(model.migration.breaks))
    widths = np.diff(np.array(breaks + [1.0]))
    X = np.eye(model.n)
    logscale = 0.0
    T = params.T

    def A(tau):
        return model.growth.value(tau) + params.m * model.migration.value(tau)

    for b, w in zip(breaks, widths):
        nsteps = max(1, math.ceil(steps * w))
        h = w / nsteps
        for k in range(nsteps):
            t0 = b + k * h
            A1 = T * A(t0)
            A2 = T * A(t0 + 0.5 * h)
            A4 = T * A(t0 + h - 1e-14 * max(1.0, abs(t0 + h)))
            k1 = A1 @ X
            k2 = A2 @ (X + 0.5 * h * k1)
            k3 = A2 @ (X + 0.5 * h * k2)
            k4 = A4 @ (X + h * k3)
            X = X + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            c = np.abs(X).max()
            if not np.isfinite(c) or c <= 0.0:
                raise IntegrationFailure("fundamental-matrix integration diverged")
            if c > 1e100 or c < 1e-100:
                X /= c
                logscale += math.log(c)
    return X, logscale


def _monodromy_scaled(model: PatchModel,
                      params: ModelParameters) -> tuple[np.ndarray, float]:
    if _is_pwc(model):
        return _monodromy_scaled_product(model, params)
    return _monodromy_scaled_rk4(model, params)


def _certify(model: PatchModel, M: np.ndarray) -> None:
    if model.validation is ValidationStatus.IRREDUCIBLE_EVERYWHERE:
        return
    if np.any(M <= POSITIVITY_FLOOR):
        raise NonPositiveMonodromy(
            "monodromy matrix is not entrywise positive at these parameters")


def monodromy(model: PatchModel, params: ModelParameters) -> np.ndarray:
    """Phi(T) over one period.  May overflow for extreme Lambda*T; the growth
    rate itself is always computed from the internally scaled representation.
    """
    M, logscale = _monodromy_scaled(model, params)
    _certify(model, M)
    return M * math.exp(logscale) if logscale < 700.0 else M * np.exp(logscale)


def growth_rate(model: PatchModel, params: ModelParameters,
                check_integral: bool = False) -> GrowthResult:
    """Lambda(m, T) = ln(mu)/T from the Perron root mu of Phi(T)."""
    if params.m <= 0.0:
        raise ValueError("growth_rate needs m > 0; use the m->0 limit instead")
    M, logscale = _monodromy_scaled(model, params)
    _certify(model, M)
    lam_M, pi = perron_positive(np.maximum(M, 0.0) if M.min() > -1e-13 else M)
    if lam_M <= 0.0:
        raise NonPositiveMonodromy("monodromy has no positive dominant root")
    log_mu = logscale + math.log(lam_M)
    value = log_mu / params.T
    method = "ExponentialProduct" if _is_pwc(model) else "IntegratedFundamental"
    cross = None
    if check_integral:
        cross = abs(value - growth_rate_integral(model, params))
    mu = math.exp(log_mu) if log_mu < 709.0 else math.inf
    return GrowthResult(lam=value, mu=mu, pi=pi, method=method, cross_check=cross)


def growth_rate_oracle(model: PatchModel, params: ModelParameters,
                       periods: int = 2000,
                       steps_per_period: int = RK4_MIN_STEPS) -> float:
    """Independent estimate of Lambda: RK4 fundamental matrix over one period
    (no matrix exponentials, no eigensolves), then long-horizon propagation of
    a positive vector with per-period renormalization and log accumulation.
    """
    X, logscale = _monodromy_scaled_rk4(model, params, steps=steps_per_period)
    x = np.full(model.n, 1.0 / model.n)
    total = 0.0
    for _ in range(periods):
        x = X @ x
        s = x.sum()
        if not np.isfinite(s) or s <= 0.0:
            raise IntegrationFailure("oracle propagation left the positive cone")
        total += math.log(s)
        x /= s
    return (total / periods + logscale) / params.T


# ---------------------------------------------------------------------------
# Periodic simplex solution theta*
# ---------------------------------------------------------------------------

def _segment_grid(model: PatchModel, params: ModelParameters, resolution: int):
    """Per-segment uniform tau grids with an even number of sub-intervals,
    dense enough that each exponential step has modest norm.
    """
    breaks, widths, mats = merged_segments(model, params.m)
    counts = []
    for w, A in zip(widths, mats):
        need = max(resolution * w,
                   w * params.T * _scale_norm(A) / (_STEP_BUDGET / 4.0), 8.0)
        nk = int(math.ceil(need))
        nk += nk % 2
        counts.append(nk)
    total = sum(counts)
    if total > _MAX_NODES:
        shrink = _MAX_NODES / total
        counts = [max(8, int(c * shrink) + int(c * shrink) % 2) for c in counts]
    return breaks, widths, mats, counts


def _theta_star_segments(model: PatchModel, params: ModelParameters,
                         resolution: int):
    """theta* sampled on the per-segment grids, by exact exponential stepping
    from theta(0) = pi with renormalization at every node.

    Returns (segments, defect) where each segment is (taus, thetas, A_k) and
    thetas has one row per grid node including both segment endpoints.
    """
    if not _is_pwc(model):
        return _theta_star_segments_rk4(model, params, resolution)
    res = growth_rate(model, params)
    breaks, widths, mats, counts = _segment_grid(model, params, resolution)
    theta = res.pi.copy()
    segments = []
    for b, w, A, nk in zip(breaks, widths, mats, counts):
        h = w / nk
        P, _ = _expm_scaled(h * params.T * A)
        taus = b + h * np.arange(nk + 1)
        thetas = np.empty((nk + 1, model.n))
        thetas[0] = theta
        for j in range(nk):
            theta = P @ theta
            theta /= theta.sum()
            thetas[j + 1] = theta
        segments.append((taus, thetas, A))
    defect = float(np.abs(theta - res.pi).max())
    return segments, defect


def _simplex_rhs(A, theta):
    v = A @ theta
    return v - v.sum() * theta


def _theta_star_segments_rk4(model: PatchModel, params: ModelParameters,
                             resolution: int):
    res = growth_rate(model, params)
    breaks = sorted(set(model.growth.breaks) | set(model.migration.breaks))
    widths = np.diff(np.array(breaks + [1.0]))
    theta = res.pi.copy()
    T = params.T
    segments = []
    for b, w in zip(breaks, widths):
        nk = max(8, int(math.ceil(resolution * w)))
        nk += nk % 2
        h = w / nk
        taus = b + h * np.arange(nk + 1)
        thetas = np.empty((nk + 1, model.n))
        thetas[0] = theta
        for j in range(nk):
            t0 = taus[j]
            A1 = T * (model.growth.value(t0)
                      + params.m * model.migration.value(t0))
            Amid = T * (model.growth.value(t0 + 0.5 * h)
                        + params.m * model.migration.value(t0 + 0.5 * h))
            k1 = _simplex_rhs(A1, theta)
            k2 = _simplex_rhs(Amid, theta + 0.5 * h * k1)
            k3 = _simplex_rhs(Amid, theta + 0.5 * h * k2)
            k4 = _simplex_rhs(A1 if j + 1 == nk else
                              T * (model.growth.value(taus[j + 1])
                                   + params.m * model.migration.value(taus[j + 1])),
                              theta + h * k3)
            theta = theta + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            theta = theta / theta.sum()
            thetas[j + 1] = theta
        segments.append((taus, thetas,
                         model.growth.value(b) + params.m * model.migration.value(b)))
    defect = float(np.abs(theta - res.pi).max())
    return segments, defect


def periodic_simplex_solution(model: PatchModel, params: ModelParameters,
                              grid_resolution: int = RK4_MIN_STEPS
                              ) -> SimplexTrajectory:
    """The T-periodic solution theta* on [0, T], anchored at the Perron vector."""
    segments, defect = _theta_star_segments(model, params, grid_resolution)
    if defect > DEFECT_TOL:
        raise PeriodicityDefectExceeded(f"periodic defect {defect:.3e}")
    times = np.concatenate([taus[:-1] for taus, _, _ in segments]
                           + [np.array([1.0])]) * params.T
    last = segments[-1][1][-1]
    states = np.vstack([th[:-1] for _, th, _ in segments] + [last[None, :]])
    return SimplexTrajectory(times=times, states=states, periodic_defect=defect)


def propagate_simplex(model: PatchModel, params: ModelParameters,
                      thetas: np.ndarray, periods: int = 1,
                      grid_resolution: int = RK4_MIN_STEPS) -> np.ndarray:
    """Advance simplex states (rows of ``thetas``) by whole periods.

    Used to exhibit global asymptotic stability of theta*: arbitrary starts
    contract onto the periodic solution.
    """
    if not _is_pwc(model):
        raise IntegrationFailure("propagate_simplex supports piecewise-constant "
                                 "models only")
    breaks, widths, mats, counts = _segment_grid(model, params, grid_resolution)
    props = []
    for w, A, nk in zip(widths, mats, counts):
        P, _ = _expm_scaled((w / nk) * params.T * A)
        props.append((P, nk))
    X = np.asarray(thetas, dtype=float).T.copy()  # (n, batch)
    for _ in range(periods):
        for P, nk in props:
            for _ in range(nk):
                X = P @ X
                X /= X.sum(axis=0)
    return X.T


def _simpson_weights(nk: int, h: float) -> np.ndarray:
    w = np.ones(nk + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w * (h / 3.0)


def growth_rate_integral(model: PatchModel, params: ModelParameters,
                         grid_resolution: int = RK4_MIN_STEPS) -> float:
    """Lambda via the integral of r(tau) . theta*(T tau) over one period."""
    segments, _ = _theta_star_segments(model, params, grid_resolution)
    total = 0.0
    for taus, thetas, _A in segments:
        nk = len(taus) - 1
        h = taus[1] - taus[0]
        if model.growth.kind is Kind.PIECEWISE_CONSTANT:
            rates = np.broadcast_to(model.rates(taus[0]), thetas.shape)
        else:
            # clamp the right endpoint inside the segment (left limit)
            pts = np.minimum(taus, taus[-1] - 1e-14)
            rates = np.array([model.rates(t) for t in pts])
        g = (rates * thetas).sum(axis=1)
        total += _simpson_weights(nk, h) @ g
    return float(total)


def growth_rate_h_formula(model: PatchModel, params: ModelParameters,
                          grid_resolution: int = RK4_MIN_STEPS) -> float:
    """Constant-migration decomposition Lambda = sum_i p_i rbar_i + m int h(theta*).

    h(x) = sum_i (L x)_i p_i / x_i is nonnegative on the open positive cone,
    which is rechecked pointwise along theta*.
    """
    if not model.migration.is_constant():
        raise NonConstantMigration("h-formula requires time-independent migration")
    L = model.migration.value(0.0)
    from .spectral import kernel_vector
    p = kernel_vector(L)
    rbar = model.mean_rates()
    base = float(p @ rbar)
    segments, _ = _theta_star_segments(model, params, grid_resolution)
    integral = 0.0
    for taus, thetas, _A in segments:
        nk = len(taus) - 1
        h_step = taus[1] - taus[0]
        hvals = ((thetas @ L.T) * (p / thetas)).sum(axis=1)
        if hvals.min() < -1e-10:
            raise IntegrationFailure(
                f"h(theta*) dipped to {hvals.min():.3e}; theta* inaccurate")
        integral += _simpson_weights(nk, h_step) @ hvals
    return base + params.m * float(integral)


def verify_slow_curve(model: PatchModel, params: ModelParameters,
                      layer_width: float = 0.05,
                      grid_resolution: int = RK4_MIN_STEPS) -> SlowCurveReport:
    """Sup-norm gap between theta*(T tau) and the per-tau dominant eigenvector
    v(tau) of A(tau), excluding a layer of the given width after each
    breakpoint.  For large T the gap outside layers decays to zero.
    """
    if model.validation is not ValidationStatus.IRREDUCIBLE_EVERYWHERE:
        raise DynamicsError("slow-curve comparison needs an everywhere-"
                            "irreducible model")
    segments, _ = _theta_star_segments(model, params, grid_resolution)
    jumps = [taus[0] for taus, _, _ in segments]
    sup = 0.0
    compared = 0
    for taus, thetas, A in segments:
        _, v = perron_frobenius_metzler(A)
        mask = np.ones(len(taus), dtype=bool)
        for b in jumps + [1.0]:
            mask &= ~((taus >= b - 1e-12) & (taus < b + layer_width))
        if not mask.any():
            continue
        dev = np.abs(thetas[mask] - v[None, :]).max()
        sup = max(sup, float(dev))
        compared += int(mask.sum())
    return SlowCurveReport(sup_deviation=sup, T=params.T,
                           layer_width=layer_width, n_compared=compared)
