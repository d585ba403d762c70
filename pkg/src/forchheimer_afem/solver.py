"""Direct saddle-point solves and the Picard fixed-point iteration."""

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import (DirichletData, SaddleSystem, apply_dirichlet, assemble_brinkman,
                       assemble_convection, assemble_dirac_load, assemble_forchheimer,
                       assemble_smooth_load, build_saddle, dirichlet_values)
from .exceptions import NonconvergenceError, SingularSystemError

log = logging.getLogger(__name__)

RESIDUAL_TOL = 1e-10
# rounding floor of the Picard increment relative to |(u, p)|: the pressure
# near a source grows like 1/h, and on strongly graded meshes |(u, p)| * eps
# alone can exceed the absolute tolerance
PICARD_RTOL = 1e-14
_PIVOT_TOL = 1e-14


@dataclass(frozen=True, eq=False)
class SolutionPair:
    space: object
    u: np.ndarray
    p: np.ndarray

    def stacked(self):
        return np.concatenate([self.u, self.p])


@dataclass
class PicardReport:
    iterations: int
    final_increment: float
    converged: bool
    history: list = field(default_factory=list)


@dataclass
class ProblemData:
    """Forcing and boundary data of one discrete problem.

    ``sources`` is a list of ``(z, F)`` point forces; ``force`` an optional
    smooth body force ``f(points) -> values``.  With ``nonlinear=False``
    the convective and Forchheimer terms are dropped (Brinkman problem).
    """

    sources: list = field(default_factory=list)
    force: object = None
    dirichlet: DirichletData = field(default_factory=DirichletData)
    nonlinear: bool = True


def _pivot_index(K):
    """Locate a vanishing pivot by dense LU (small systems only)."""
    import scipy.linalg as sla

    if K.shape[0] > 4000:
        return None
    _, _, U = sla.lu(K.toarray())
    d = np.abs(np.diag(U))
    bad = np.flatnonzero(d <= _PIVOT_TOL * max(d.max(), 1.0))
    return int(bad[0]) if len(bad) else None


def _factorize(K, symmetric):
    try:
        if symmetric:
            # symmetric ordering with weak threshold pivoting keeps fill low on
            # saddle-point matrices; zero diagonals still get off-diagonal pivots
            return spla.splu(K, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=1e-3,
                             options={"SymmetricMode": True})
        return spla.splu(K)
    except RuntimeError as exc:
        raise SingularSystemError(f"singular factorization: {exc}", _pivot_index(K)) from None


def equilibrate(K, sweeps=5):
    """Symmetric Ruiz scaling ``D K D``; row max-norms tend to one.

    Graded meshes spread the matrix entries over many orders of magnitude;
    scaling keeps the pressure near a source accurate to rounding.
    """
    K = sp.csc_matrix(K)
    d = np.ones(K.shape[0])
    for _ in range(sweeps):
        r = np.sqrt(abs(K).max(axis=1).toarray().ravel())
        r[r == 0] = 1.0
        D = sp.diags(1.0 / r)
        K = sp.csc_matrix(D @ K @ D)
        d /= r
    return K, d


def solve_linear(K, rhs):
    """Sparse direct (LU) solve of the equilibrated system with up to two
    steps of iterative refinement.

    Raises :class:`SingularSystemError` when the factorization breaks down.
    """
    K = sp.csc_matrix(K)
    rhs = np.asarray(rhs, dtype=float)
    bnorm = np.linalg.norm(rhs)
    Ks, d = equilibrate(K)
    for symmetric in (True, False):
        lu = _factorize(Ks, symmetric)
        x = d * lu.solve(d * rhs)
        for _ in range(2):
            r = rhs - K @ x
            if np.linalg.norm(r) <= RESIDUAL_TOL * bnorm:
                break
            x = x + d * lu.solve(d * r)
        res = np.linalg.norm(rhs - K @ x)
        if np.all(np.isfinite(x)) and res <= RESIDUAL_TOL * bnorm:
            return x
    if not np.all(np.isfinite(x)):
        raise SingularSystemError("non-finite solution", _pivot_index(K))
    log.warning("relative residual %.2e above %.0e", res / bnorm, RESIDUAL_TOL)
    return x


def assemble_rhs(space, data):
    rhs = np.zeros(space.n_velocity)
    if data.sources:
        rhs += assemble_dirac_load(space, data.sources)
    if data.force is not None:
        rhs += assemble_smooth_load(space, data.force)
    return rhs


def picard_solve(space, data, tol=1e-8, max_iter=100, rtol=PICARD_RTOL, initial=None):
    """Picard iteration, by default from the zero initial guess.

    Each step freezes the advecting field and the Forchheimer coefficient
    at the previous iterate and solves the linear saddle-point problem.
    Stops once the Euclidean norm of the stacked ``(u, p)`` coefficient
    increment is at most ``tol + rtol * |(u, p)|``; the default ``rtol`` is
    about fifty machine epsilons, so the test is absolute unless ``tol`` lies
    below the rounding level of the iterate.  ``initial`` is an
    optional stacked ``(u, p)`` starting vector.
    """
    A0, A1, B, m = assemble_brinkman(space)
    base = SaddleSystem(A0 + A1, B, m, assemble_rhs(space, data), np.zeros(space.n_pressure))
    nu = space.n_velocity
    npr = space.n_pressure
    prev = np.zeros(nu + npr) if initial is None else np.asarray(initial, dtype=float).copy()
    if prev.shape != (nu + npr,):
        raise ValueError(f"initial guess must have length {nu + npr}")
    history = []
    linear_cache = None
    lift = dirichlet_values(space, data.dirichlet)
    for it in range(1, max_iter + 1):
        if data.nonlinear:
            u_prev = prev[:nu]
            A = base.A + assemble_convection(space, u_prev) + assemble_forchheimer(space, u_prev)
            system = apply_dirichlet(SaddleSystem(A, B, m, base.rhs_u, base.rhs_p), space, lift)
            K, rhs = build_saddle(system)
            x = solve_linear(K, rhs)
        else:
            if linear_cache is None:
                system = apply_dirichlet(base, space, lift)
                linear_cache = solve_linear(*build_saddle(system))
            x = linear_cache
        cur = x[:nu + npr]
        inc = float(np.linalg.norm(cur - prev))
        history.append(inc)
        prev = cur
        log.debug("picard %d: increment %.3e", it, inc)
        if inc <= tol + rtol * np.linalg.norm(cur):
            sol = SolutionPair(space, cur[:nu].copy(), cur[nu:].copy())
            return sol, PicardReport(it, inc, True, history)
    raise NonconvergenceError(
        f"Picard iteration did not reach tol={tol:g} in {max_iter} steps "
        f"(last increment {history[-1]:.3e})", history)
