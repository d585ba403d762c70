"""Adaptive loop: solve, estimate, mark, bisect."""

import csv
import io
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .estimator import error_indicators, mark, multi_source_indicators
from .exceptions import FitError, NonconvergenceError
from .mesh import bisect, build_initial_mesh
from .solver import ProblemData, picard_solve
from .spaces import build_space

log = logging.getLogger(__name__)

TRACE_FIELDS = ("iter", "elements", "vertices", "ndof", "estimator", "picard_iters", "seconds")


@dataclass(frozen=True)
class TraceRow:
    iter: int
    elements: int
    vertices: int
    ndof: int
    estimator: float
    picard_iters: int
    seconds: float


@dataclass
class AdaptiveTrace:
    rows: list = field(default_factory=list)
    failed: bool = False
    message: str = ""

    def __len__(self):
        return len(self.rows)

    def column(self, name):
        return np.array([getattr(r, name) for r in self.rows])

    def to_csv(self, path=None, timings=True):
        """CSV text (and file, when ``path`` is given).

        ``timings=False`` writes zero seconds, which makes the output
        byte-for-byte reproducible.
        """
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TRACE_FIELDS)
        for r in self.rows:
            w.writerow([r.iter, r.elements, r.vertices, r.ndof, repr(float(r.estimator)),
                        r.picard_iters, f"{r.seconds if timings else 0.0:.6f}"])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_csv(cls, text):
        reader = csv.DictReader(io.StringIO(text))
        rows = [TraceRow(int(r["iter"]), int(r["elements"]), int(r["vertices"]), int(r["ndof"]),
                         float(r["estimator"]), int(r["picard_iters"]), float(r["seconds"]))
                for r in reader]
        return cls(rows)


@dataclass
class Snapshot:
    mesh: object
    solution: object
    indicators: object
    marked: np.ndarray


@dataclass
class AdaptResult:
    trace: AdaptiveTrace
    mesh: object
    solution: object
    indicators: object
    history: list = field(default_factory=list)


def fit_rate(trace, tail=10):
    """Least-squares slope of log(estimator) against log(Ndof) over the
    last ``tail`` rows."""
    rows = trace.rows if hasattr(trace, "rows") else list(trace)
    rows = rows[-tail:]
    if len(rows) < 2:
        raise FitError("need at least two rows to fit a rate")
    ndof = np.array([r.ndof for r in rows], dtype=float)
    est = np.array([r.estimator for r in rows], dtype=float)
    if np.any(est <= 0) or np.any(ndof <= 0):
        raise FitError("estimator and Ndof must be positive in the fitted tail")
    x, y = np.log(ndof), np.log(est)
    x = x - x.mean()
    return float(np.dot(x, y - y.mean()) / np.dot(x, x))


def compute_indicators(space, solution, config):
    if len(config.sources) > 1:
        return multi_source_indicators(space, solution, config.alpha, config.sources,
                                       nonlinear=config.nonlinear)
    return error_indicators(space, solution, config.alpha, config.sources,
                            nonlinear=config.nonlinear)


def adapt(config, keep_history=False, max_ndof=None, mesh=None):
    """Run ``config.iterations`` solve/estimate steps, refining between them.

    Picard failure stops the loop; the trace is returned with
    ``failed=True``.  With ``keep_history`` every solved mesh, solution,
    indicator field and marked set is kept.
    """
    mesh = build_initial_mesh(config.domain) if mesh is None else mesh
    data = ProblemData(sources=list(config.sources), dirichlet=config.dirichlet_data(mesh),
                       nonlinear=config.nonlinear)
    trace = AdaptiveTrace()
    history = []
    solved = solution = ind = None
    for it in range(config.iterations):
        t0 = time.perf_counter()
        space = build_space(mesh, config.pair)
        try:
            solution, report = picard_solve(space, data, tol=config.tol)
        except NonconvergenceError as exc:
            log.error("iteration %d: %s", it, exc)
            trace.failed = True
            trace.message = str(exc)
            break
        solved = mesh
        ind = compute_indicators(space, solution, config)
        est = ind.global_value
        last = it == config.iterations - 1 or (max_ndof is not None and space.ndof_total >= max_ndof)
        marked = np.array([], dtype=np.int64) if last else mark(ind)
        trace.rows.append(TraceRow(it, mesh.n_elements, mesh.n_vertices, space.ndof_total, est,
                                   report.iterations, time.perf_counter() - t0))
        log.info("iter %2d  elements %6d  ndof %7d  estimator %.4e  picard %d",
                 it, mesh.n_elements, space.ndof_total, est, report.iterations)
        if keep_history:
            history.append(Snapshot(mesh, solution, ind, marked))
        if last:
            break
        mesh = bisect(mesh, marked)
    # on failure the last solved mesh is returned with its solution
    return AdaptResult(trace, solved if solved is not None else mesh, solution, ind, history)
