"""Independent reference solvers used only to certify the production solvers.

Both references work directly on the explicit constraint system (one
variable per job/interval pair) and deliberately share no code with the
network-based solvers they certify:

* :func:`lp_min_co2` hands the emission objective to a linear-programming
  backend as-is.
* :func:`qp_flatten` minimises the squared-profile objective by accelerated
  projected gradient descent with a per-job box-and-sum projection; the
  objective is convex, so the stationary point it converges to is the
  global optimum.

These are test instruments, sized for small instances, and are not part
of the scheduling pipeline.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .errors import InfeasibleError, NonConvergenceError
from .model import Instance

#: Projected-gradient norm below which qp_flatten declares convergence.
GRADIENT_TOL = 1e-9

#: Iteration cap for qp_flatten; hitting it raises NonConvergenceError.
MAX_ITERATIONS = 500_000


@dataclass(frozen=True)
class ReferenceSolution:
    """Objective value and allocation returned by a reference solver.

    Attributes:
        objective: Optimal objective value.
        allocations: Per-job energy over the job's window (kWh), keyed by
            job id, in the same layout Schedule.build accepts.
    """

    objective: float
    allocations: dict[str, np.ndarray]


def _columns(instance: Instance) -> tuple[np.ndarray, list[tuple[int, int]]]:
    """Flatten the job windows into one variable vector.

    Returns the interval index of every column and, per job, the slice
    ``(start, stop)`` of its columns.
    """
    col_interval: list[int] = []
    slices: list[tuple[int, int]] = []
    for job in instance.jobs:
        lo = len(col_interval)
        col_interval.extend(job.window)
        slices.append((lo, len(col_interval)))
    return np.asarray(col_interval, dtype=int), slices


def _unpack(instance: Instance, x: np.ndarray, slices: list[tuple[int, int]]) -> dict[str, np.ndarray]:
    return {
        job.id: np.asarray(x[lo:hi], dtype=float)
        for job, (lo, hi) in zip(instance.jobs, slices)
    }


def lp_min_co2(instance: Instance, co2_per_kwh: np.ndarray) -> ReferenceSolution:
    """Exact minimum of the emission objective, via linear programming.

    Solves ``min sum_i co2(i) * s(i)`` over all feasible schedules, with
    the delivery constraint taken as an equality (no objective ever
    rewards overcharging).  Raises InfeasibleError when the constraint
    system is empty and NonConvergenceError if the backend fails for any
    other reason.
    """
    co2 = np.asarray(co2_per_kwh, dtype=float)
    if co2.shape != (instance.interval_count,):
        raise ValueError("emission factors must cover the horizon")
    col_interval, slices = _columns(instance)
    n_var = len(col_interval)
    cost = co2[col_interval]

    a_eq = np.zeros((len(instance.jobs), n_var))
    b_eq = np.zeros(len(instance.jobs))
    bounds = []
    for row, (job, (lo, hi)) in enumerate(zip(instance.jobs, slices)):
        a_eq[row, lo:hi] = 1.0
        b_eq[row] = job.energy_kwh
        bounds.extend([(0.0, job.max_rate_kwh)] * (hi - lo))

    a_ub = None
    b_ub = None
    if instance.caps_kwh is not None:
        a_ub = np.zeros((instance.interval_count, n_var))
        a_ub[col_interval, np.arange(n_var)] = 1.0
        b_ub = np.asarray(instance.caps_kwh, dtype=float)

    result = linprog(
        cost, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=b_eq, bounds=bounds, method="highs"
    )
    if result.status == 2:
        raise InfeasibleError("no allocation satisfies the constraint system")
    if result.status != 0:
        raise NonConvergenceError(f"LP backend failed with status {result.status}")
    return ReferenceSolution(
        objective=float(result.fun), allocations=_unpack(instance, result.x, slices)
    )


def _project_box_simplex(v: np.ndarray, upper: np.ndarray, total: float) -> np.ndarray:
    """Euclidean projection onto ``{0 <= x <= upper, sum(x) = total}``.

    The projection is ``clip(v - tau, 0, upper)`` for the shift ``tau``
    that meets the sum constraint; the sum is piecewise linear in the
    shift, so ``tau`` is found exactly by walking the breakpoints.
    """
    if total <= 0.0:
        return np.zeros_like(v)
    breakpoints = np.unique(np.concatenate([v - upper, v]))
    sums = np.array([np.clip(v - t, 0.0, upper).sum() for t in breakpoints])
    if total >= sums[0]:
        # Only reachable when total == sum(upper), by job feasibility.
        return upper.copy()
    # sums is non-increasing; find the last breakpoint with sums >= total.
    k = int(np.searchsorted(-sums, -total, side="right")) - 1
    tau_lo = breakpoints[k]
    if sums[k] == total:
        return np.clip(v - tau_lo, 0.0, upper)
    # The crossing lies strictly inside (breakpoints[k], breakpoints[k+1]);
    # classify variables at the segment midpoint, where no one sits on a
    # clamp boundary.
    mid = 0.5 * (tau_lo + breakpoints[k + 1])
    interior = (v - mid > 0.0) & (v - mid < upper)
    slope = float(interior.sum())
    tau = tau_lo if slope == 0.0 else tau_lo + (sums[k] - total) / slope
    return np.clip(v - tau, 0.0, upper)


def qp_flatten(instance: Instance, baseload_kwh: np.ndarray) -> ReferenceSolution:
    """Global minimum of ``sum_i (s(i) + b(i))**2`` over feasible schedules.

    Accelerated projected gradient descent on the explicit variable
    vector, restarted whenever momentum overshoots, run until the
    projected-gradient norm falls below GRADIENT_TOL.  Instances with
    aggregate caps are outside this reference's scope.
    """
    if instance.caps_kwh is not None:
        raise ValueError("the flattening reference does not support aggregate caps")
    b = np.asarray(baseload_kwh, dtype=float)
    if b.shape != (instance.interval_count,):
        raise ValueError("baseload must cover the horizon")
    col_interval, slices = _columns(instance)
    n_var = len(col_interval)
    m = instance.interval_count
    if n_var == 0:
        return ReferenceSolution(objective=float(np.dot(b, b)), allocations={})

    upper = np.empty(n_var)
    totals = np.empty(len(instance.jobs))
    for row, (job, (lo, hi)) in enumerate(zip(instance.jobs, slices)):
        upper[lo:hi] = job.max_rate_kwh
        totals[row] = job.energy_kwh

    def profile(x: np.ndarray) -> np.ndarray:
        s = np.zeros(m)
        np.add.at(s, col_interval, x)
        return s

    def objective(x: np.ndarray) -> float:
        t = profile(x) + b
        return float(np.dot(t, t))

    def gradient(x: np.ndarray) -> np.ndarray:
        return 2.0 * (profile(x) + b)[col_interval]

    def project(x: np.ndarray) -> np.ndarray:
        out = np.empty_like(x)
        for job_row, (lo, hi) in enumerate(slices):
            out[lo:hi] = _project_box_simplex(x[lo:hi], upper[lo:hi], totals[job_row])
        return out

    # Exact Lipschitz constant of the gradient: 2 * lambda_max(A^T A) for
    # the column incidence A.  The instances this reference sees are
    # small, so a dense eigensolve is fine.
    incidence = np.zeros((m, n_var))
    incidence[col_interval, np.arange(n_var)] = 1.0
    lipschitz = 2.0 * float(np.linalg.eigvalsh(incidence.T @ incidence)[-1])
    step = 1.0 / lipschitz

    # Even spread over the window is feasible (job validation guarantees
    # energy <= rate * width), giving a clean starting point.
    x = np.empty(n_var)
    for job_row, (lo, hi) in enumerate(slices):
        x[lo:hi] = totals[job_row] / (hi - lo)

    best = objective(x)
    y = x.copy()
    momentum = 1.0
    for iteration in range(MAX_ITERATIONS):
        x_next = project(y - step * gradient(y))
        value = objective(x_next)
        if value > best:
            # Momentum overshot; restart from the best iterate.
            y = x.copy()
            momentum = 1.0
            x_next = project(y - step * gradient(y))
            value = objective(x_next)
        momentum_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * momentum * momentum))
        y = x_next + ((momentum - 1.0) / momentum_next) * (x_next - x)
        x, momentum, best = x_next, momentum_next, min(best, value)

        if iteration % 16 == 0:
            residual = (x - project(x - step * gradient(x))) / step
            if float(np.linalg.norm(residual)) <= GRADIENT_TOL:
                return ReferenceSolution(
                    objective=objective(x), allocations=_unpack(instance, x, slices)
                )
    raise NonConvergenceError(
        f"projected gradient did not reach tolerance {GRADIENT_TOL} "
        f"within {MAX_ITERATIONS} iterations"
    )
