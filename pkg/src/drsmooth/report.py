"""Gap reports and an SVG convergence chart for run traces."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence
from xml.sax.saxutils import escape

from .coordinator import RunTrace


def fmt(x: float) -> str:
    """Six significant digits, the format of every number the CLI prints."""
    return f"{x:.6g}"


@dataclass(frozen=True)
class GapReport:
    primal_best: float
    oracle_cost: float | None
    gap_percent: float | None
    best_k: int
    mu_hat_min: float
    kappa1: float
    maxiter: int

    def lines(self) -> list[str]:
        out = [f"P_r^J {fmt(self.primal_best)}"]
        if self.oracle_cost is not None:
            out.append(f"P* {fmt(self.oracle_cost)}")
            out.append(f"gap_percent {fmt(self.gap_percent)}")
        out += [f"J {self.best_k}", f"mu_hat_min {fmt(self.mu_hat_min)}", f"kappa1 {fmt(self.kappa1)}",
                f"maxiter {self.maxiter}"]
        return out


def gap_report(trace: RunTrace, oracle_cost: float | None = None) -> GapReport:
    """Relative gap ``100 (P_r^J - P*) / P*`` of a finished run."""
    pj = trace.best_primal
    gap = None
    if oracle_cost is not None:
        if not oracle_cost > 0:
            raise ValueError(f"oracle cost must be positive, got {oracle_cost}")
        gap = 100.0 * (pj - oracle_cost) / oracle_cost
    p = trace.params
    return GapReport(pj, oracle_cost, gap, trace.best_k, p.mu_hat_min, p.kappa1, len(trace.records))


def _polyline(ks: Sequence[float], vs: Sequence[float], sx, sy, colour: str) -> str:
    pts = " ".join(f"{sx(k):.2f},{sy(v):.2f}" for k, v in zip(ks, vs) if math.isfinite(v))
    return f'<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{pts}"/>'


def convergence_svg(k: Sequence[float], primal: Sequence[float], dual: Sequence[float],
                    title: str = "", width: int = 720, height: int = 420) -> str:
    """Line chart of the recovered primal and the smoothed dual against ``k``.

    Infeasible (non-finite) primal points are left out of their polyline.
    """
    if not (len(k) == len(primal) == len(dual)) or len(k) == 0:
        raise ValueError("need equally long, nonempty columns")
    finite = [v for v in list(primal) + list(dual) if math.isfinite(v)]
    if not finite:
        raise ValueError("nothing finite to plot")
    lo, hi = min(finite), max(finite)
    if hi == lo:
        hi = lo + 1.0
    kmin, kmax = min(k), max(k)
    if kmax == kmin:
        kmax = kmin + 1
    left, right, top, bottom = 70, 20, 30, 40
    pw, ph = width - left - right, height - top - bottom

    def sx(x):
        return left + pw * (x - kmin) / (kmax - kmin)

    def sy(v):
        return top + ph * (hi - v) / (hi - lo)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#888"/>',
        f'<text x="{left}" y="{top - 10}" font-size="13">{escape(title)}</text>',
        f'<text x="{left}" y="{height - 12}" font-size="11">k = {fmt(kmin)}</text>',
        f'<text x="{left + pw}" y="{height - 12}" font-size="11" text-anchor="end">k = {fmt(kmax)}</text>',
        f'<text x="{left - 5}" y="{top + 10}" font-size="11" text-anchor="end">{fmt(hi)}</text>',
        f'<text x="{left - 5}" y="{top + ph}" font-size="11" text-anchor="end">{fmt(lo)}</text>',
        _polyline(k, primal, sx, sy, "#c0392b"),
        _polyline(k, dual, sx, sy, "#2471a3"),
        f'<text x="{left + pw - 5}" y="{top + 15}" font-size="11" fill="#c0392b" text-anchor="end">'
        f'recovered primal</text>',
        f'<text x="{left + pw - 5}" y="{top + 30}" font-size="11" fill="#2471a3" text-anchor="end">'
        f'smoothed dual</text>',
        "</svg>",
    ]
    return "\n".join(parts) + "\n"


def trace_svg(trace: RunTrace) -> str:
    return convergence_svg(trace.column("k"), trace.column("primal"), trace.column("dual"), trace.scenario_name)
