"""Squeezing figures of merit and scheme comparison sweeps."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .algebra import MeasurementFrame, expect_real

# below this polarisation the squeezing ratio is meaningless; report NaN
CHI_FLOOR = 1e-6


@dataclass
class MetricsRow:
    v: float
    zeta: float
    chi: float
    purity: float
    lam: float
    xi2: float
    entangled: bool
    mz2: float
    zc_mean: float | None = None
    yc_mean: float | None = None


def squeezing_xi2(zeta: float, chi: float) -> float:
    """zeta/chi^2, the squeezing parameter; NaN once chi falls below the
    floor where the ratio stops meaning anything.

    zeta is a variance ratio, nonnegative in exact arithmetic; once the
    squeezing exhausts the integrator's resolution it can round below
    zero, so nonpositive values get the same NaN treatment.
    """
    if not (chi > CHI_FLOOR) or not (zeta > 0.0):
        return math.nan
    return zeta / (chi * chi)


def compute_metrics(rho, frame: MeasurementFrame, v=0.0, lam=0.0, conditioned=False) -> MetricsRow:
    """Score a state against the frame's reduced variance and polarisation.

    For conditioned states the variance is taken about the conditional
    means of the slow quadratures (the means carry no squeezing
    information; the record-driven state walks them randomly).
    """
    raw = expect_real(frame.zeta_op, rho)
    chi = expect_real(frame.x_op, rho) / frame.chi_norm
    zc = expect_real(frame.zc_op, rho)
    yc = expect_real(frame.yc_op, rho)
    if conditioned:
        for op, w in frame.zeta_parts:
            raw -= w * expect_real(op, rho) ** 2
    zeta = raw / frame.zeta_norm
    purity = float(np.sum(rho.real**2 + rho.imag**2))
    mz2 = expect_real(frame.z2_at(v), rho)
    return MetricsRow(
        v=float(v),
        zeta=zeta,
        chi=chi,
        purity=purity,
        lam=float(lam),
        xi2=squeezing_xi2(zeta, chi),
        entangled=bool(zeta < chi),
        mz2=mz2,
        zc_mean=zc if conditioned else None,
        yc_mean=yc if conditioned else None,
    )


def parabolic_min(x, y):
    """Vertex of the parabola through three points; falls back to the middle
    point when the triple is not convex or the vertex escapes the bracket."""
    x0, x1, x2 = float(x[0]), float(x[1]), float(x[2])
    y0, y1, y2 = float(y[0]), float(y[1]), float(y[2])
    d01 = (y1 - y0) / (x1 - x0)
    d12 = (y2 - y1) / (x2 - x1)
    curv = (d12 - d01) / (x2 - x0)
    if not (curv > 0 and np.isfinite(curv)):
        return x1, y1
    xv = 0.5 * (x0 + x1 - d01 / curv)
    if not (min(x0, x2) <= xv <= max(x0, x2)):
        return x1, y1
    # evaluate the interpolant at its vertex
    yv = y0 + d01 * (xv - x0) + curv * (xv - x0) * (xv - x1)
    return xv, yv


@dataclass
class SweepPoint:
    mode: str
    twice_j: int
    scheme: str
    xi2_min: float
    v_at_min: float
    scaled: float  # (j+1) * xi2_min
    status: str
    interior: bool  # minimum strictly inside the valid rows


# forward Euler cannot resolve a variance much below ~10 steps' worth of
# accumulated drift; rows past that point are rounding noise
ZETA_RESOLUTION_STEPS = 10.0


def _xi2_minimum(v, xi2, zeta=None, zeta_floor=0.0):
    if zeta is not None:
        cut = np.flatnonzero(~(np.asarray(zeta) > zeta_floor))
        if cut.size:
            v, xi2 = v[: cut[0]], xi2[: cut[0]]
    finite = np.isfinite(xi2)
    if len(xi2) == 0 or not finite.any():
        return math.nan, math.nan, False
    masked = np.where(finite, xi2, np.inf)
    i = int(np.argmin(masked))
    lo, hi = max(i - 1, 0), min(i + 1, len(xi2) - 1)
    interior = 0 < i < len(xi2) - 1 and finite[i - 1] and finite[i + 1]
    if interior:
        v_min, y_min = parabolic_min(v[lo : hi + 1], xi2[lo : hi + 1])
        return float(y_min), float(v_min), True
    return float(xi2[i]), float(v[i]), False


def min_squeezing_sweep(
    mode: str,
    twice_j_values,
    scheme: str,
    delta_v: float = 1e-3,
    v_max: float = 20.0,
    record_stride: int = 1,
    clamp: float = 1e3,
):
    """Best squeezing per spin for one production scheme.

    Integrates the deterministic evolution for each listed spin, locates
    the minimum of xi^2 = zeta/chi^2 over the recorded rows (with 3-point
    parabolic refinement), and reports (j+1) xi^2_min. scheme
    "optimal-states" short-circuits to the extremal-state curve instead
    of a time integration. Runs that abort mid-way still contribute their
    pre-abort minimum, flagged via status/interior.

    Rows after zeta first falls below ~10 delta_v are excluded: the
    first-order integrator cannot resolve deeper squeezing, and past that
    point the ratio is rounding noise. Small spins approach their best
    xi^2 asymptotically, so their minimum lands on the end of the resolved
    prefix (interior=False) about a percent above the true asymptote;
    "optimal-states" gives the exact value.
    """
    from . import dynamics  # deferred: dynamics records rows through this module
    from .feedback import FeedbackScheme
    from .algebra import single_mode_frame, two_mode_frame
    from .optimal_states import min_xi2_on_curve, optimal_curve

    points = []
    for twice_j in twice_j_values:
        twice_j = int(twice_j)
        j = twice_j / 2.0
        if scheme == "optimal-states":
            curve = optimal_curve(mode, twice_j)
            best = min_xi2_on_curve(curve)
            points.append(
                SweepPoint(mode, twice_j, scheme, best.xi2, math.nan, (j + 1) * best.xi2, "ok", True)
            )
            continue
        if mode == "two":
            frame = two_mode_frame(twice_j, omega=math.pi / (2 * delta_v))
        else:
            frame = single_mode_frame(twice_j)
        if scheme == "countertwist":
            generator = f"countertwist-{frame.mode}"
            controller = None
        else:
            generator = "feedback"
            controller = FeedbackScheme(scheme, clamp=clamp)
        spec = dynamics.EvolutionSpec(
            frame=frame,
            generator=generator,
            delta_v=delta_v,
            v_max=v_max,
            record_stride=record_stride,
        )
        rho0 = _initial_state(mode, twice_j)
        record = dynamics.evolve(rho0, spec, controller)
        xi2_min, v_min, interior = _xi2_minimum(
            record.column("v"),
            record.column("xi2"),
            zeta=record.column("zeta"),
            zeta_floor=ZETA_RESOLUTION_STEPS * delta_v,
        )
        points.append(
            SweepPoint(mode, twice_j, scheme, xi2_min, v_min, (j + 1) * xi2_min, record.status, interior)
        )
    return points


def _initial_state(mode: str, twice_j: int):
    from .algebra import coherent_spin_state, two_mode_coherent_state

    psi = two_mode_coherent_state(twice_j) if mode == "two" else coherent_spin_state(twice_j)
    return np.outer(psi, psi.conj())
