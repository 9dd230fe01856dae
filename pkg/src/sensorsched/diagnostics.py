"""Ergodicity and consistency checks for closed-loop belief chains.

None of these certify anything: the drift-condition check samples a
universally quantified inequality, the invariant-measure estimate is a
power iteration that may stall, and the average-cost identity is only
expected to hold when that measure is unique.  The reports say what was
observed and where.
"""

from dataclasses import dataclass

import numpy as np

from .belief import Belief, entropy, eta_raw, zeta_raw
from .solver import cost_table, policy_kernel_matrix, solve_poisson

MEASURE_TV_TOL = 1e-12
MEASURE_MAX_ITERS = 10**6


@dataclass(frozen=True)
class WeightFunction:
    """Drift weight u(x) >= 1 over the simplex.

    The parametric family is 1 + theta * h2(x) (base-2 belief entropy),
    which equals 1 at the vertices; alternatively a per-cell table over a
    grid, evaluated at off-grid points by nearest-cell lookup.
    """

    theta: float = None
    table: np.ndarray = None
    grid: object = None

    def __post_init__(self):
        if (self.theta is None) == (self.table is None):
            raise ValueError("give exactly one of theta or table")
        if self.theta is not None and self.theta < 0:
            raise ValueError("theta must be nonnegative")
        if self.table is not None:
            if self.grid is None:
                raise ValueError("a value table needs its grid")
            if np.any(self.table < 1.0):
                raise ValueError("weight values must be >= 1")

    def of(self, probs):
        if self.theta is not None:
            return 1.0 + self.theta * entropy(probs, 2.0)
        return float(self.table[self.grid.project_point(probs)])

    def describe(self):
        return (f"1 + {self.theta:g}*h2" if self.theta is not None
                else "user table")


@dataclass(frozen=True)
class ContractionReport:
    weight: str
    worst_ratio: float
    worst_point: np.ndarray
    num_points: int
    contraction: bool

    def verdict(self):
        if self.contraction:
            return (f"no violation found among {self.num_points} points "
                    f"(worst ratio {self.worst_ratio:.6g})")
        return (f"violated at {np.array2string(self.worst_point, precision=4)} "
                f"(ratio {self.worst_ratio:.6g})")


def check_contraction(model, policy, weight, grid=None, num_samples=1000,
                      seed=0):
    """Evaluate the weighted drift ratio at grid points plus random samples.

    The ratio at x is sum_z u(eta_w(z,x)) zeta_w(x)[z] / u(x), using the
    exact maps (never grid projections).  A worst ratio below 1 is
    evidence for, not proof of, a unique invariant measure.
    """
    points = []
    if grid is not None:
        points.append(grid.points)
    if num_samples > 0:
        rng = np.random.default_rng(seed)
        m = model.num_states
        points.append(rng.dirichlet(np.ones(m), size=num_samples))
    points = np.vstack(points)

    worst_ratio = -np.inf
    worst_point = None
    for x in points:
        a = policy(Belief(x))
        rho = zeta_raw(x, a, model)
        drift = 0.0
        for z in range(len(rho)):
            if rho[z] <= 0:
                continue
            nxt = eta_raw(x, a, z, model)
            if nxt is None:
                continue
            drift += weight.of(nxt) * rho[z]
        ratio = drift / weight.of(x)
        if ratio > worst_ratio:
            worst_ratio = ratio
            worst_point = x
    return ContractionReport(
        weight=weight.describe(),
        worst_ratio=float(worst_ratio),
        worst_point=np.array(worst_point),
        num_points=len(points),
        contraction=bool(worst_ratio < 1.0),
    )


@dataclass(frozen=True)
class InvariantMeasureEstimate:
    distribution: np.ndarray
    converged: bool
    unique: bool
    tv_gap: float


def _damped_power(P, mu0, tol, max_iters):
    # averaging consecutive iterates tolerates period-2 chains (the
    # Cesaro limit is the object of interest anyway)
    mu = mu0
    gap = np.inf
    for _ in range(max_iters):
        nxt = 0.5 * (mu + mu @ P)
        gap = 0.5 * np.abs(nxt - mu).sum()
        mu = nxt
        if gap < tol:
            return mu, gap, True
    return mu, gap, False


def estimate_invariant_measure(kernel_matrix, tol=MEASURE_TV_TOL,
                               max_iters=MEASURE_MAX_ITERS):
    """Damped power iteration for a fixed measure of the grid kernel.

    Uniqueness is probed by rerunning from a vertex start: if the two
    limits disagree the kernel has several invariant measures (e.g. an
    identity kernel fixes every distribution).
    """
    n = kernel_matrix.shape[0]
    mu, gap, ok = _damped_power(
        kernel_matrix, np.full(n, 1.0 / n), tol, max_iters)
    mu = np.clip(mu, 0.0, None)
    mu /= mu.sum()

    unique = True
    if ok and n > 1:
        alt0 = np.zeros(n)
        alt0[0] = 1.0
        alt, _, alt_ok = _damped_power(kernel_matrix, alt0, tol, max_iters)
        if alt_ok and np.abs(alt - mu).sum() > 1e-8:
            unique = False

    converged = bool(ok and
                     0.5 * np.abs(mu - mu @ kernel_matrix).sum() < 1e-10)
    return InvariantMeasureEstimate(
        distribution=mu, converged=converged, unique=unique,
        tv_gap=float(gap),
    )


@dataclass(frozen=True)
class Theorem2Record:
    """Average cost from the Poisson solve vs. the invariant-measure
    integral of the cost; the two agree when the measure is unique."""

    g_poisson: float
    integral_mu_c: float
    gap: float
    measure_converged: bool
    measure_unique: bool


def check_average_cost_identity(model, grid, policy, cf, kernels=None):
    """Compare Poisson g with sum_i mu(i) c(x_i) on the grid chain."""
    if kernels is None:
        from .solver import build_all_kernels
        kernels = build_all_kernels(model, grid)
    P = policy_kernel_matrix(kernels, policy)
    c = cost_table(grid, cf)
    sol = solve_poisson(P, c, grid.uniform_ordinal)
    measure = estimate_invariant_measure(P)
    integral = float(measure.distribution @ c)
    return Theorem2Record(
        g_poisson=sol.g,
        integral_mu_c=integral,
        gap=abs(sol.g - integral),
        measure_converged=measure.converged,
        measure_unique=measure.unique,
    )


def model_positivity_report(model):
    """Primitivity of Q and strict positivity of each sensor matrix.

    Primitivity is decided by checking powers of Q up to the Wielandt
    bound M^2 - 2M + 2 for a strictly positive power.
    """
    Q = model.transition
    m = Q.shape[0]
    bound = max(m * m - 2 * m + 2, 1)
    primitive = False
    primitive_power = None
    power = np.eye(m)
    for k in range(1, bound + 1):
        power = power @ Q
        if np.all(power > 0):
            primitive = True
            primitive_power = k
            break
    return {
        "transition_primitive": primitive,
        "primitive_power": primitive_power,
        "sensors_strictly_positive": [bool(np.all(T > 0))
                                      for T in model.sensors],
    }
