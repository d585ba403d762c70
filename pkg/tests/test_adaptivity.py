import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from forchheimer_afem.adaptivity import AdaptiveTrace, TraceRow, adapt, fit_rate
from forchheimer_afem.exceptions import FitError
from forchheimer_afem.experiments import preset
from forchheimer_afem.mesh import check_conformity


def rows(ndof, est):
    return AdaptiveTrace([TraceRow(i, 1, 1, int(n), float(e), 1, 0.0)
                          for i, (n, e) in enumerate(zip(ndof, est))])


def test_fit_rate_examples():
    n = np.array([10, 40, 90, 300, 1000, 5000])
    assert fit_rate(rows(n, 7.0 / n)) == pytest.approx(-1.0, abs=1e-12)
    assert fit_rate(rows(n, np.full(len(n), 0.3))) == pytest.approx(0.0, abs=1e-12)
    assert fit_rate(rows([10, 100], [1.0, 0.1])) == pytest.approx(-1.0, abs=1e-12)
    # only the tail counts
    est = np.concatenate([[1e5, 1e-5], 2.0 / n[2:] ** 0.5])
    assert fit_rate(rows(n, est), tail=4) == pytest.approx(-0.5, abs=1e-12)


def test_fit_rate_errors():
    with pytest.raises(FitError):
        fit_rate(rows([10], [1.0]))
    with pytest.raises(FitError):
        fit_rate(rows([10, 20, 30], [1.0, 0.0, 0.5]))


@settings(max_examples=30, deadline=None)
@given(c=st.floats(1e-3, 1e3), s=st.floats(-3, 1))
def test_fit_rate_recovers_power_law(c, s):
    n = np.geomspace(20, 2e5, 12).round()
    assert fit_rate(rows(n, c * n ** s)) == pytest.approx(s, abs=1e-9)


def test_zero_sources_leave_mesh_unchanged():
    cfg = preset("example1", sources=(), iterations=4)
    res = adapt(cfg, keep_history=True)
    assert len(res.trace) == 4
    assert np.all(res.trace.column("estimator") == 0)
    assert np.all(res.trace.column("elements") == res.trace.rows[0].elements)
    assert all(len(s.marked) == 0 for s in res.history)


@pytest.fixture(scope="module")
def ex1():
    return adapt(preset("example1", alpha=1.0), keep_history=True)


def test_example1_trace_invariants(ex1):
    tr = ex1.trace
    assert len(tr) == 20 and not tr.failed
    assert list(tr.column("iter")) == list(range(20))
    for name in ("elements", "ndof", "vertices"):
        assert np.all(np.diff(tr.column(name)) >= 0)
    assert np.all(tr.column("estimator") > 0)
    for snap in ex1.history[:-1]:
        assert len(snap.marked) > 0
        check_conformity(snap.mesh)
        ind = snap.indicators
        assert ind.global_value ** 2 == pytest.approx(np.sum(ind.values ** 2), rel=1e-12)
    assert len(ex1.history[-1].marked) == 0
    assert ex1.mesh.n_elements == tr.rows[-1].elements


def test_example1_estimator_decreases_over_tail(ex1):
    est = ex1.trace.column("estimator")[-10:]
    assert np.all(np.diff(est) < 0)


def test_csv_round_trip(ex1):
    text = ex1.trace.to_csv()
    assert text.splitlines()[0] == "iter,elements,vertices,ndof,estimator,picard_iters,seconds"
    back = AdaptiveTrace.from_csv(text)
    assert np.array_equal(back.column("estimator"), ex1.trace.column("estimator"))
    assert np.array_equal(back.column("ndof"), ex1.trace.column("ndof"))
    assert back.to_csv(timings=False) == ex1.trace.to_csv(timings=False)


def test_trace_is_reproducible(ex1):
    again = adapt(preset("example1", alpha=1.0, iterations=8))
    assert again.trace.to_csv(timings=False) == AdaptiveTrace(ex1.trace.rows[:8]).to_csv(timings=False)


def test_ndof_cap_stops_early():
    res = adapt(preset("example1", iterations=50), max_ndof=600)
    assert res.trace.rows[-1].ndof >= 600
    assert all(r.ndof < 600 for r in res.trace.rows[:-1])


def test_picard_failure_flags_trace():
    res = adapt(preset("example1", sources=(((0.5, 0.5), (1e4, 1e4)),), iterations=3))
    assert res.trace.failed and "Picard" in res.trace.message
