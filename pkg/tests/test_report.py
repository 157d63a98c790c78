import math
import re

import pytest

from drsmooth.coordinator import IterationRecord, RunTrace
from drsmooth.report import convergence_svg, fmt, gap_report
from drsmooth.scenario import AlgoParams


def _trace(primals, duals):
    recs = tuple(IterationRecord(k + 1, d, p, 0.0, 0.1, 0.1, 1.0, (0.0,)) for k, (p, d) in enumerate(zip(primals, duals)))
    best = min(range(len(recs)), key=lambda i: (recs[i].primal, i)) + 1
    return RunTrace(recs, best, (0.0,), 0.1, {"h": (1.0,)}, 1.0, "t", AlgoParams(maxiter=len(recs), mu_hat_min=0.002))


def _points(svg):
    return [len(m.split()) for m in re.findall(r'points="([^"]*)"', svg)]


def test_fmt_six_significant_digits():
    assert fmt(9.931431) == "9.93143"
    assert fmt(1234567.0) == "1.23457e+06"
    assert fmt(0.001) == "0.001"


def test_gap_report():
    rep = gap_report(_trace([12.0, 10.5, 10.5], [1.0, 2.0, 3.0]), 10.0)
    assert rep.best_k == 2 and rep.gap_percent == pytest.approx(5.0)
    assert rep.maxiter == 3 and rep.mu_hat_min == 0.002 and rep.kappa1 == 10.0
    lines = rep.lines()
    assert "gap_percent 5" in lines and "J 2" in lines
    bare = gap_report(_trace([12.0], [1.0]))
    assert bare.gap_percent is None and not any(l.startswith("P*") for l in bare.lines())
    with pytest.raises(ValueError):
        gap_report(_trace([12.0], [1.0]), 0.0)


def test_svg_two_polylines_one_point_per_row():
    n = 1000
    tr = _trace([10 + 1 / (k + 1) for k in range(n)], [9 - 1 / (k + 1) for k in range(n)])
    svg = convergence_svg(tr.column("k"), tr.column("primal"), tr.column("dual"))
    assert svg.startswith("<svg") and svg.count("<polyline") == 2
    assert _points(svg) == [n, n]


def test_svg_skips_infeasible_primal_points():
    svg = convergence_svg([1, 2, 3], [math.inf, 2.0, 1.0], [0.0, 0.5, 0.7])
    assert _points(svg) == [2, 3]


def test_svg_rejects_bad_columns():
    with pytest.raises(ValueError):
        convergence_svg([1, 2], [1.0], [1.0, 2.0])
    with pytest.raises(ValueError):
        convergence_svg([1], [math.inf], [math.nan])
