"""Experiment configurations, batch runs and convergence checks."""

import logging
import os
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from .adaptivity import adapt, fit_rate
from .assembly import DirichletData, t_shape_inflow
from .exceptions import ConfigError, GeometryError
from .mesh import (DomainSpec, _point_in_polygon, boundary_distance, build_initial_mesh,
                   compose_parents, refine_uniform)
from .solver import ProblemData, picard_solve
from .spaces import FEFunction, PAIR_ALIASES, PAIRS, build_space
from .vtk import export_vtk
from .weights import composite_weight, integrate_elements, power_weight, unweighted

log = logging.getLogger(__name__)

DIRICHLET_PRESETS = ("zero", "t_shape_inflow")


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce one adaptive run."""

    domain: DomainSpec = field(default_factory=lambda: DomainSpec("unit_square"))
    pair: str = "taylor_hood"
    alpha: float = 1.0
    sources: tuple = (((0.5, 0.5), (1.0, 1.0)),)
    dirichlet: str = "zero"
    iterations: int = 20
    nonlinear: bool = True
    tol: float = 1e-8
    outputs: str = "out"
    preset: str = ""

    def dirichlet_data(self, mesh):
        if self.dirichlet == "t_shape_inflow":
            return t_shape_inflow(mesh.polygon)
        return DirichletData()

    def validate(self):
        """Raise :class:`ConfigError` naming the first offending field."""
        if not 0.0 < self.alpha < 2.0:
            raise ConfigError("alpha", f"must lie in (0, 2), got {self.alpha}")
        if self.pair not in PAIRS:
            raise ConfigError("pair", f"unknown element pair {self.pair!r}")
        if self.dirichlet not in DIRICHLET_PRESETS:
            raise ConfigError("dirichlet", f"unknown boundary preset {self.dirichlet!r}")
        if int(self.iterations) != self.iterations or self.iterations < 1:
            raise ConfigError("iterations", f"must be a positive integer, got {self.iterations}")
        if not self.tol > 0:
            raise ConfigError("tol", f"must be positive, got {self.tol}")
        try:
            poly = self.domain.vertices()
            self.domain.cell_size()
        except GeometryError as exc:
            raise ConfigError("domain", str(exc)) from None
        for z, F in self.sources:
            z = np.asarray(z, dtype=float)
            if np.shape(F) != (2,) or z.shape != (2,):
                raise ConfigError("sources", "each source needs a point and a 2-vector force")
            inside = _point_in_polygon(z[None], poly)[0]
            if not inside or boundary_distance(poly, z) < 1e-12:
                raise ConfigError("sources", f"source {tuple(z)} is not an interior point")
        return self


PRESETS = {
    "example1": ExperimentConfig(preset="example1"),
    "example2": ExperimentConfig(domain=DomainSpec("l_shape"), iterations=40, preset="example2"),
    "example3": ExperimentConfig(domain=DomainSpec("t_shape"),
                                 sources=(((0.0, 0.5), (1.0, 1.0)), ((0.0, -1.0), (1.0, 1.0))),
                                 dirichlet="t_shape_inflow", iterations=60, preset="example3"),
    "manufactured": ExperimentConfig(sources=(), iterations=1, preset="manufactured"),
}


def preset(name, **overrides):
    try:
        cfg = PRESETS[name]
    except KeyError:
        raise ConfigError("preset", f"unknown preset {name!r}; choose from {sorted(PRESETS)}") \
            from None
    return replace(cfg, **overrides)


# ---------------------------------------------------------------- key = value text

def _fmt_sources(sources):
    return "; ".join(" ".join(repr(float(v)) for v in (*z, *F)) for z, F in sources)


def serialize_config(cfg):
    """Line-oriented ``key = value`` text; floats are written exactly."""
    lines = []
    if cfg.preset:
        lines.append(f"preset = {cfg.preset}")
    lines.append(f"domain = {cfg.domain.kind}")
    if cfg.domain.kind == "polygon":
        pts = np.asarray(cfg.domain.polygon, dtype=float)
        lines.append("polygon = " + "; ".join(f"{x!r} {y!r}" for x, y in pts.tolist()))
    if cfg.domain.cell is not None:
        lines.append(f"cell = {float(cfg.domain.cell)!r}")
    lines += [
        f"pair = {cfg.pair}",
        f"alpha = {float(cfg.alpha)!r}",
        f"sources = {_fmt_sources(cfg.sources)}",
        f"dirichlet = {cfg.dirichlet}",
        f"iterations = {int(cfg.iterations)}",
        f"nonlinear = {'on' if cfg.nonlinear else 'off'}",
        f"tol = {float(cfg.tol)!r}",
        f"outputs = {cfg.outputs}",
    ]
    return "\n".join(lines) + "\n"


def _parse_floats(field_name, text, per_item):
    items = []
    for chunk in filter(None, (c.strip() for c in text.split(";"))):
        try:
            vals = [float(v) for v in chunk.split()]
        except ValueError:
            raise ConfigError(field_name, f"not a number list: {chunk!r}") from None
        if len(vals) != per_item:
            raise ConfigError(field_name, f"expected {per_item} numbers per item, got {chunk!r}")
        items.append(vals)
    return items


def parse_config(text):
    """Inverse of :func:`serialize_config`; unknown keys are errors."""
    kv = {}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("syntax", f"expected 'key = value', got {raw!r}")
        k, v = (s.strip() for s in line.split("=", 1))
        kv[k] = v
    cfg = preset(kv.pop("preset")) if "preset" in kv else ExperimentConfig()
    upd = {}
    dom = {}
    for k, v in kv.items():
        try:
            if k == "domain":
                dom["kind"] = v
            elif k == "polygon":
                dom["polygon"] = tuple(tuple(p) for p in _parse_floats(k, v, 2))
            elif k == "cell":
                dom["cell"] = float(v)
            elif k == "pair":
                upd["pair"] = PAIR_ALIASES.get(v, v)
            elif k in ("alpha", "tol"):
                upd[k] = float(v)
            elif k == "iterations":
                upd[k] = int(v)
            elif k == "sources":
                upd[k] = tuple(((a, b), (c, d)) for a, b, c, d in _parse_floats(k, v, 4))
            elif k == "nonlinear":
                if v not in ("on", "off"):
                    raise ConfigError(k, f"expected on or off, got {v!r}")
                upd[k] = v == "on"
            elif k in ("dirichlet", "outputs"):
                upd[k] = v
            else:
                raise ConfigError(k, "unknown key")
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(k, f"bad value {v!r}") from None
    if dom:
        kind = dom.get("kind", cfg.domain.kind)
        same = kind == cfg.domain.kind
        dom.setdefault("polygon", cfg.domain.polygon if same else None)
        dom.setdefault("cell", cfg.domain.cell if same else None)
        upd["domain"] = DomainSpec(kind, dom["polygon"], dom["cell"])
    return replace(cfg, **upd).validate()


# ---------------------------------------------------------------- runs

def run(config, write_vtk=True):
    """Run an adaptive experiment and write its artifacts.

    Writes ``trace.csv``, ``rate.txt`` and (optionally) ``mesh.vtk`` and
    ``solution.vtk`` into ``config.outputs``.  Returns ``(status, result)``
    with status 0 on success and 2 on solver failure.
    """
    config.validate()
    os.makedirs(config.outputs, exist_ok=True)
    result = adapt(config)
    trace = result.trace
    trace.to_csv(os.path.join(config.outputs, "trace.csv"), timings=False)
    tail = min(10, len(trace))
    rate = fit_rate(trace, tail) if tail >= 2 and not trace.failed else float("nan")
    with open(os.path.join(config.outputs, "rate.txt"), "w") as fh:
        fh.write(f"{rate!r}\n")
    if write_vtk and result.solution is not None:
        export_vtk(result.mesh, None, result.indicators,
                   os.path.join(config.outputs, "mesh.vtk"))
        export_vtk(result.mesh, result.solution, result.indicators,
                   os.path.join(config.outputs, "solution.vtk"))
    if trace.failed:
        print(f"FAILED after {len(trace)} iterations: {trace.message}")
        return 2, result
    last = trace.rows[-1]
    print(f"{config.preset or 'custom'}: {len(trace)} iterations, {last.elements} elements, "
          f"ndof {last.ndof}, estimator {last.estimator:.4e}, tail slope {rate:.3f}")
    return 0, result


# ---------------------------------------------------------------- manufactured solution

@lru_cache(maxsize=1)
def manufactured_solution():
    """Callables ``(u, grad_u, p, f)`` of the smooth test problem.

    ``u = curl(x^2 (1-x)^2 y^2 (1-y)^2)`` and ``p = x - 1/2`` on the unit
    square; ``f`` is derived symbolically from the full nonlinear model.
    """
    import sympy as s

    x, y = s.symbols("x y", real=True)
    psi = x ** 2 * (1 - x) ** 2 * y ** 2 * (1 - y) ** 2
    u = s.Matrix([s.diff(psi, y), -s.diff(psi, x)])
    p = x - s.Rational(1, 2)
    mag = s.sqrt(u[0] ** 2 + u[1] ** 2)
    f = [-(s.diff(u[c], x, 2) + s.diff(u[c], y, 2)) + u[0] * s.diff(u[c], x)
         + u[1] * s.diff(u[c], y) + mag * u[c] + u[c] + s.diff(p, (x, y)[c])
         for c in range(2)]
    grad = [[s.diff(u[c], v) for v in (x, y)] for c in range(2)]
    to = lambda e: s.lambdify((x, y), e, "numpy")  # noqa: E731
    fu, fg, fp, ff = to(list(u)), to(grad), to(p), to(f)

    def stack(fn, shape):
        def g(pts):
            pts = np.asarray(pts, dtype=float)
            X, Y = pts[..., 0], pts[..., 1]
            out = np.empty(pts.shape[:-1] + shape)
            vals = fn(X, Y)
            for idx in np.ndindex(*shape):
                v = vals
                for i in idx:
                    v = v[i]
                out[(Ellipsis,) + idx] = v
            return out
        return g

    def pressure(pts):
        pts = np.asarray(pts, dtype=float)
        return np.broadcast_to(fp(pts[..., 0], pts[..., 1]), pts.shape[:-1]).astype(float)

    return stack(fu, (2,)), stack(fg, (2, 2)), pressure, stack(ff, (2,))


def solution_errors(space, solution, u_exact, grad_exact, p_exact, weight=None):
    """``(|u - u_h|_{H1}, ||p - p_h||_{L2})``, optionally weighted."""
    mesh = space.mesh
    w = unweighted() if weight is None else weight
    vel = FEFunction(space, solution.u, "velocity")
    pre = FEFunction(space, solution.p, "pressure")

    def eu(elems, lam):
        d = vel.evaluate_gradient(mesh, elems, lam) - grad_exact(mesh.physical_points(lam, elems))
        return (d ** 2).sum(axis=(-2, -1))

    def ep(elems, lam):
        return (pre.evaluate(mesh, elems, lam) - p_exact(mesh.physical_points(lam, elems))) ** 2

    return (float(np.sqrt(integrate_elements(mesh, eu, w).sum())),
            float(np.sqrt(integrate_elements(mesh, ep, w).sum())))


@dataclass(frozen=True)
class ConvergenceRow:
    level: int
    h: float
    ndof: int
    velocity_error: float
    pressure_error: float
    velocity_order: float
    pressure_order: float


def verify_manufactured(pair="taylor_hood", refinements=4, nonlinear=True):
    """Errors and observed orders on uniformly refined unit-square meshes.

    Each uniform refinement halves the mesh size; level 0 is the initial
    criss-cross mesh.
    """
    if refinements < 3:
        raise ValueError("need at least 3 refinements to read off an order")
    u, gu, p, f = manufactured_solution()
    mesh = build_initial_mesh(DomainSpec("unit_square"))
    rows = []
    for level in range(refinements + 1):
        if level:
            mesh = refine_uniform(mesh)
        space = build_space(mesh, pair)
        sol, _ = picard_solve(space, ProblemData(force=f, nonlinear=nonlinear))
        eu, ep = solution_errors(space, sol, u, gu, p)
        h = float(mesh.diameters.max())
        if rows:
            prev = rows[-1]
            r = np.log(prev.h / h)
            ou, op = np.log(prev.velocity_error / eu) / r, np.log(prev.pressure_error / ep) / r
        else:
            ou = op = float("nan")
        rows.append(ConvergenceRow(level, h, space.ndof_total, eu, ep, float(ou), float(op)))
        log.info("level %d  h %.4f  |u-uh|_1 %.3e  |p-ph| %.3e", level, h, eu, ep)
    return rows


def format_table(rows):
    out = [f"{'level':>5} {'h':>10} {'ndof':>8} {'H1 vel':>12} {'order':>6} {'L2 pres':>12} {'order':>6}"]
    for r in rows:
        out.append(f"{r.level:>5} {r.h:>10.5f} {r.ndof:>8} {r.velocity_error:>12.4e} "
                   f"{r.velocity_order:>6.2f} {r.pressure_error:>12.4e} {r.pressure_order:>6.2f}")
    return "\n".join(out)


# ---------------------------------------------------------------- effectivity

def _coarse_evaluator(coarse_mesh, fine_mesh, anc, fn):
    def at(elems, lam):
        x = fine_mesh.physical_points(lam, elems)
        if x.ndim == 2:
            x = np.broadcast_to(x[None], (len(elems),) + x.shape)
        cl = coarse_mesh.barycentric(anc[elems], x)
        return fn(coarse_mesh, anc[elems], cl)
    return at


def effectivity_indices(config, checkpoints=(5, 10, 15)):
    """Reference-error effectivity of the estimator at given iterations.

    The reference solution lives on the final adaptive mesh refined
    uniformly twice.  Errors are measured in the weighted energy norm
    ``(|e_u|^2_{H1(w)} + ||e_p||^2_{L2(w)})^(1/2)`` with the weight used by
    the estimator.  Returns ``{iteration: (error, estimator, index)}``.
    """
    config = replace(config, iterations=max(max(checkpoints) + 1, config.iterations))
    result = adapt(config, keep_history=True)
    if result.trace.failed:
        raise RuntimeError(result.trace.message)
    meshes = [s.mesh for s in result.history]
    mid = refine_uniform(meshes[-1])
    fine = refine_uniform(mid)
    fspace = build_space(fine, config.pair)
    data = ProblemData(sources=list(config.sources), dirichlet=config.dirichlet_data(fine),
                       nonlinear=config.nonlinear)
    ref, _ = picard_solve(fspace, data, tol=config.tol)
    zs = [z for z, _ in config.sources]
    if len(zs) > 1:
        w = composite_weight(zs, config.alpha, fine.polygon)
    else:
        w = power_weight(zs[0], config.alpha) if zs else unweighted()
    rvel = FEFunction(fspace, ref.u, "velocity")
    rpre = FEFunction(fspace, ref.p, "pressure")
    out = {}
    for k in checkpoints:
        snap = result.history[k]
        anc = compose_parents(*meshes[k:])[compose_parents(meshes[-1], mid, fine)]
        vel = FEFunction(snap.solution.space, snap.solution.u, "velocity")
        pre = FEFunction(snap.solution.space, snap.solution.p, "pressure")
        gu = _coarse_evaluator(snap.mesh, fine, anc, vel.evaluate_gradient)
        pv = _coarse_evaluator(snap.mesh, fine, anc, pre.evaluate)

        def integrand(elems, lam):
            du = rvel.evaluate_gradient(fine, elems, lam) - gu(elems, lam)
            dp = rpre.evaluate(fine, elems, lam) - pv(elems, lam)
            return (du ** 2).sum(axis=(-2, -1)) + dp ** 2

        err = float(np.sqrt(integrate_elements(fine, integrand, w).sum()))
        est = snap.indicators.global_value
        out[k] = (err, est, err / est)
    return out
