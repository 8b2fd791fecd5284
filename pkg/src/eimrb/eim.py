"""Empirical interpolation of parameter-dependent nodal fields.

The interpolant of a field w is sum_m beta_m q_m with the coefficients
solving the lower triangular system B beta = w(t), where t are the
interpolation points (dof indices, so point evaluation is exact) and
B[i, m] = q_m(t_i).  Basis fields are residuals of the greedy sweep,
normalized to unit sup norm over the dofs.

The snapshot provider is any callable mu -> dof-value array; swapping a
truth-solver provider for a reduced-basis provider is what turns the
standard training loop into the simultaneous build.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from .fem import SolverFailure
from .nonlinear import NewtonFailure

SATURATION_FLOOR = 1e-14


class DegenerateSnapshot(ValueError):
    """First snapshot is identically zero; pick a different first parameter."""


class DegenerateInterpolationPoint(RuntimeError):
    """Greedy residual peaks at an already selected interpolation point."""


class EimTrainingError(RuntimeError):
    """Too many provider failures during a greedy sweep."""


class EimBasis:
    """Interpolation basis: fields q_m, points t_m and the matrix B."""

    def __init__(self, space):
        self.space = space
        self.fields = []        # unit-sup-norm dof vectors, append only
        self.t = []             # interpolation point dof indices
        self.B = np.zeros((0, 0))
        self.mus = []           # parameter selected at each step
        self.train_errors = []  # sup error before each enrichment

    @property
    def M(self):
        return len(self.fields)

    @property
    def point_coords(self):
        return self.space.dof_coords[np.asarray(self.t, dtype=int)]

    def field_matrix(self):
        """Stacked basis fields, shape (M, ndof)."""
        return np.array(self.fields)

    def coeffs(self, values_at_points):
        """Solve B beta = w(t) by forward substitution."""
        w = np.asarray(values_at_points, dtype=float)
        if w.shape != (self.M,):
            raise ValueError(f"expected {self.M} point values, got {w.shape}")
        if self.M == 0:
            return np.zeros(0)
        # check_finite off: overflowing point values must flow through so the
        # Newton drivers can classify the iterate as diverged
        return solve_triangular(self.B, w, lower=True, check_finite=False)

    def evaluate(self, beta):
        """Field sum_m beta_m q_m as a dof-value array."""
        beta = np.asarray(beta, dtype=float)
        if beta.shape != (self.M,):
            raise ValueError(f"expected {self.M} coefficients, got {beta.shape}")
        if self.M == 0:
            return np.zeros(self.space.ndof)
        return self.field_matrix().T @ beta

    def interpolate(self, values):
        """Interpolant of a full nodal field (exact at the points t)."""
        values = np.asarray(values, dtype=float)
        if self.M == 0:
            return np.zeros_like(values)
        return self.evaluate(self.coeffs(values[self.t]))

    def sup_error(self, values):
        values = np.asarray(values, dtype=float)
        return float(np.max(np.abs(values - self.interpolate(values))))

    def append_from_residual(self, residual, mu, recorded_error):
        """Normalize a greedy residual into the next basis field.

        The new point is the dof where |residual| peaks (first index on
        ties); reusing an existing point means the basis is degenerate.
        The residual of an interpolant vanishes at the existing points,
        so the roundoff left there is cleared, keeping the interpolation
        matrix exactly unit lower triangular.
        """
        r = np.asarray(residual, dtype=float)
        t_new = int(np.argmax(np.abs(r)))
        if t_new in self.t:
            raise DegenerateInterpolationPoint(
                f"residual peaks at already used dof {t_new}")
        q = r / r[t_new]
        q[np.asarray(self.t, dtype=int)] = 0.0
        m = self.M
        newb = np.empty((m + 1, m + 1))
        newb[:m, :m] = self.B
        for k, f in enumerate(self.fields):
            newb[m, k] = f[t_new]
        newb[:m, m] = q[self.t]
        newb[m, m] = q[t_new]
        self.B = newb
        self.fields.append(q)
        self.t.append(t_new)
        self.mus.append(mu)
        self.train_errors.append(float(recorded_error))

    def restrict(self, m):
        """Copy truncated to the first m basis fields (nested by construction)."""
        if not 0 <= m <= self.M:
            raise ValueError(f"cannot restrict M={self.M} basis to {m}")
        out = EimBasis(self.space)
        out.fields = list(self.fields[:m])
        out.t = list(self.t[:m])
        out.B = self.B[:m, :m].copy()
        out.mus = list(self.mus[:m])
        out.train_errors = list(self.train_errors[:m])
        return out

    def to_arrays(self, prefix=""):
        return {
            prefix + "fields": self.field_matrix(),
            prefix + "t": np.asarray(self.t, dtype=np.int64),
            prefix + "B": self.B.copy(),
            prefix + "mus": np.asarray(self.mus, dtype=float),
            prefix + "train_errors": np.asarray(self.train_errors, dtype=float),
        }

    @classmethod
    def from_arrays(cls, space, data, prefix=""):
        out = cls(space)
        out.fields = [row.copy() for row in np.atleast_2d(data[prefix + "fields"])]
        out.t = [int(i) for i in data[prefix + "t"]]
        out.B = np.array(data[prefix + "B"], dtype=float)
        out.mus = [tuple(row) for row in np.atleast_2d(data[prefix + "mus"])]
        out.train_errors = [float(v) for v in data[prefix + "train_errors"]]
        return out


@dataclass
class GreedyStep:
    mu: tuple | None
    sup_error: float
    saturated: bool = False
    skipped: list = field(default_factory=list)
    errors: np.ndarray | None = None  # per-sample sup errors, nan = skipped


def eim_initialize(space, provider, samples):
    """Start a basis from the first sample: q_1 = w / w(t_1), t_1 = argmax |w|."""
    if len(samples) == 0:
        raise ValueError("empty sample set")
    mu1 = samples[0]
    w = np.asarray(provider(mu1), dtype=float)
    sup = float(np.max(np.abs(w)))
    if sup == 0.0:
        raise DegenerateSnapshot(
            f"snapshot at first sample {mu1} is identically zero")
    basis = EimBasis(space)
    basis.append_from_residual(w, tuple(mu1), sup)
    return basis


def eim_greedy_step(basis, provider, samples, saturation_tol=1e-13):
    """One greedy enrichment: pick the worst-approximated sample, add its residual.

    Provider failures (Newton or solver) skip that sample for this sweep;
    more than half the set failing aborts.  A sup error below the
    saturation threshold returns a saturated step without enriching.
    """
    if basis.M < 1:
        raise ValueError("initialize the basis before greedy steps")
    qmat = basis.field_matrix()
    t_idx = np.asarray(basis.t, dtype=int)
    errors = np.full(len(samples), np.nan)
    best_err = -1.0
    best_mu = None
    best_w = None
    skipped = []
    for k, mu in enumerate(samples):
        try:
            w = np.asarray(provider(mu), dtype=float)
        except (NewtonFailure, SolverFailure) as exc:
            skipped.append((k, tuple(mu), str(exc)))
            continue
        if not np.all(np.isfinite(w)):
            skipped.append((k, tuple(mu), "snapshot field overflowed"))
            continue
        beta = solve_triangular(basis.B, w[t_idx], lower=True)
        err = float(np.max(np.abs(w - qmat.T @ beta)))
        errors[k] = err
        if err > best_err:
            best_err = err
            best_mu = tuple(mu)
            best_w = w
    if 2 * len(skipped) > len(samples):
        raise EimTrainingError(
            f"{len(skipped)} of {len(samples)} samples failed during the sweep; "
            f"first failure: {skipped[0][2]}")
    if best_w is None:
        raise EimTrainingError("every sample failed during the sweep")
    # saturation is judged against the largest error seen: the first
    # snapshot (at the first training parameter) can sit orders of
    # magnitude below the manifold scale
    floor = max(SATURATION_FLOOR, saturation_tol * max(basis.train_errors))
    if best_err < floor:
        return GreedyStep(mu=best_mu, sup_error=best_err, saturated=True,
                          skipped=skipped, errors=errors)
    residual = best_w - basis.interpolate(best_w)
    basis.append_from_residual(residual, best_mu, best_err)
    return GreedyStep(mu=best_mu, sup_error=best_err, skipped=skipped,
                      errors=errors)


def eim_train(space, provider, samples, m_max, saturation_tol=1e-13,
              basis=None, on_step=None):
    """Initialize (if needed) and greedily enrich up to m_max fields."""
    if basis is None:
        basis = eim_initialize(space, provider, samples)
    while basis.M < m_max:
        step = eim_greedy_step(basis, provider, samples, saturation_tol)
        if on_step is not None:
            on_step(step)
        if step.saturated:
            break
    return basis
