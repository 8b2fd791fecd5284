"""Newton solver for the full nonlinear finite element problem.

The problem is: find u with zero boundary values such that

    A u + M g(u) = F

where A is the stiffness matrix, M the mass matrix, g is applied to the
nodal values of u (so the nonlinear term is the nodal interpolant of
g(u(x), x; mu)), and F the assembled load.  The Newton Jacobian uses the
weighted mass matrix with weight dg/du(u), which keeps the truth and the
reduced solver consistent term by term.
"""

import threading
from dataclasses import dataclass, field

import numpy as np

from .fem import (FEField, apply_dirichlet, assemble_load,
                  assemble_weighted_mass, solve_sparse)


class NewtonFailure(RuntimeError):
    """Newton did not converge; carries the residual norm history."""

    def __init__(self, message, history):
        super().__init__(message)
        self.history = list(history)


@dataclass
class NewtonConfig:
    abs_tol: float = 1e-10
    rel_tol: float = 1e-10
    max_iter: int = 50

    def __post_init__(self):
        if self.abs_tol <= 0 or self.rel_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")

    def tolerance(self, initial_residual):
        return max(self.abs_tol, self.rel_tol * initial_residual)


@dataclass
class SolveStats:
    iterations: int
    final_residual_norm: float
    residual_history: list = field(default_factory=list)
    fe_solve_counter_increment: int = 1


class SolveCounter:
    """Serialized counter of successful finite element solves."""

    def __init__(self):
        self._lock = threading.Lock()
        self._count = 0

    def increment(self, by=1):
        with self._lock:
            self._count += by

    @property
    def count(self):
        return self._count


class NonlinearTerm:
    """Pointwise nonlinearity g(u, x; mu) and its u-derivative.

    Both callables are vectorized: they take an array of u values, the
    matching (k, 2) coordinates and a parameter, and return k values.
    """

    def __init__(self, g, dg_du):
        self.g = g
        self.dg_du = dg_du


def check_derivative(term, mus, u_values, x=(0.3, 0.7), h=1e-6, tol=1e-5):
    """Central-difference check of dg_du against g; returns the worst error."""
    xy = np.array([x], dtype=float)
    worst = 0.0
    for mu in mus:
        for u in np.atleast_1d(u_values):
            up = term.g(np.array([u + h]), xy, mu)[0]
            um = term.g(np.array([u - h]), xy, mu)[0]
            fd = (up - um) / (2 * h)
            exact = term.dg_du(np.array([u], dtype=float), xy, mu)[0]
            worst = max(worst, abs(fd - exact))
    if worst > tol:
        raise ValueError(f"dg_du disagrees with finite differences by {worst:.3e}")
    return worst


class NonlinearProblem:
    """Space + nonlinearity + right-hand side, with cached operators."""

    def __init__(self, space, term, rhs):
        self.space = space
        self.term = term
        self.rhs = rhs
        self.stiffness = space.stiffness
        self.mass = space.mass
        self.load = assemble_load(space, rhs)
        self._mass_row_sums = np.asarray(self.mass.sum(axis=1)).ravel()

    def average(self, values):
        """Integral of the field over the unit square (|Omega| = 1)."""
        return float(self._mass_row_sums @ values)


def output_average(field_or_problem, values=None):
    """Average of a field over the domain, 1' M u with |Omega| = 1."""
    if isinstance(field_or_problem, FEField):
        f = field_or_problem
        return float(np.asarray(f.space.mass.sum(axis=1)).ravel() @ f.values)
    return field_or_problem.average(values)


def _newton_loop(problem, mu, cfg, counter, initial, gfield, dgfield):
    """Shared Newton driver; gfield/dgfield map nodal u to nodal fields."""
    space = problem.space
    bdofs = space.boundary_dofs
    u = np.zeros(space.ndof) if initial is None else np.array(initial, dtype=float)
    u[bdofs] = 0.0

    def residual(uv):
        # divergence shows up as inf/nan and is classified below, not warned
        with np.errstate(over="ignore", invalid="ignore"):
            r = problem.stiffness @ uv + problem.mass @ gfield(uv) - problem.load
        r[bdofs] = 0.0
        return r

    r = residual(u)
    r_norm = np.linalg.norm(r)
    if not np.isfinite(r_norm):
        raise NewtonFailure(f"residual not finite at the initial guess, mu={mu}",
                            [r_norm])
    history = [r_norm]
    tol = cfg.tolerance(r_norm)
    iterations = 0
    while True:
        if iterations >= cfg.max_iter:
            raise NewtonFailure(
                f"no convergence after {cfg.max_iter} iterations at mu={mu}",
                history)
        with np.errstate(over="ignore", invalid="ignore"):
            jac = problem.stiffness + assemble_weighted_mass(space, dgfield(u))
        jac_el, rhs_el = apply_dirichlet(space, jac, -r)
        u = u + solve_sparse(jac_el, rhs_el)
        iterations += 1
        r = residual(u)
        r_norm = np.linalg.norm(r)
        history.append(r_norm)
        if np.isfinite(r_norm) and r_norm <= tol:
            break
        if not np.isfinite(r_norm):
            raise NewtonFailure(f"residual diverged at mu={mu}", history)

    if counter is not None:
        counter.increment()
    stats = SolveStats(iterations=iterations, final_residual_norm=r_norm,
                       residual_history=history)
    return FEField(space, u), stats


def truth_newton_solve(problem, mu, cfg=None, counter=None, initial=None):
    """Solve the full nonlinear problem at mu with exact nonlinearity."""
    cfg = cfg or NewtonConfig()
    coords = problem.space.dof_coords
    term = problem.term
    return _newton_loop(problem, mu, cfg, counter, initial,
                        lambda u: term.g(u, coords, mu),
                        lambda u: term.dg_du(u, coords, mu))


def truth_newton_solve_eim(problem, eim_g, eim_dg, mu, cfg=None, counter=None,
                           initial=None):
    """Solve the full problem with both nonlinear fields replaced by their
    empirical interpolants.

    The iterate is evaluated at the interpolation points (exact, they are
    dofs), the pointwise nonlinearity gives the right-hand side of the
    triangular interpolation system, and the resulting surrogate fields
    enter the same assembly as in the exact solve.
    """
    cfg = cfg or NewtonConfig()
    if eim_g.M < 1 or eim_dg.M < 1:
        raise ValueError("both interpolants need at least one basis field")
    term = problem.term
    coords = problem.space.dof_coords

    def g_surrogate(u):
        with np.errstate(over="ignore", invalid="ignore"):
            vals = term.g(u[eim_g.t], coords[eim_g.t], mu)
            return eim_g.evaluate(eim_g.coeffs(vals))

    def dg_surrogate(u):
        with np.errstate(over="ignore", invalid="ignore"):
            vals = term.dg_du(u[eim_dg.t], coords[eim_dg.t], mu)
            return eim_dg.evaluate(eim_dg.coeffs(vals))

    return _newton_loop(problem, mu, cfg, counter, initial,
                        g_surrogate, dg_surrogate)
