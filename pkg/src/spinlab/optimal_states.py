"""Extremal squeezed states: the best (polarisation, variance) frontier.

For a fixed mean polarisation the smallest reachable measured variance
is set by the ground state of

    cost(mu) = variance_op - mu * polarisation_op

as the multiplier mu sweeps from 0 (no polarisation constraint, maximal
squeezing) to large values (coherent-state limit). Sweeping mu traces a
curve in the (chi, zeta) plane that no physical state can cross from
below; dynamical schemes are judged by how closely they hug it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .algebra import single_mode_frame, two_mode_frame
from .metrics import CHI_FLOOR

DEGENERACY_GAP = 1e-10


@dataclass(frozen=True)
class FrontierPoint:
    mu: float
    chi: float
    zeta: float
    xi2: float
    degenerate: bool  # ground level not unique; chi/zeta depend on eigenvector choice


def _frontier_frame(mode: str, twice_j: int):
    # omega is irrelevant here: only the static operators are used
    if mode == "two":
        return two_mode_frame(twice_j, omega=1.0)
    if mode == "single":
        return single_mode_frame(twice_j)
    raise ValueError(f"unknown mode {mode!r}")


def ground_point(zeta_op, x_op, mu: float, zeta_norm: float, chi_norm: float) -> FrontierPoint:
    """Lowest eigenvector of the constrained cost, reported as metrics."""
    energies, vectors = np.linalg.eigh(zeta_op - mu * x_op)
    vec = vectors[:, 0]
    degenerate = bool(energies[1] - energies[0] < DEGENERACY_GAP)
    chi = float(np.vdot(vec, x_op @ vec).real) / chi_norm
    zeta = float(np.vdot(vec, zeta_op @ vec).real) / zeta_norm
    xi2 = zeta / (chi * chi) if chi > CHI_FLOOR else math.nan
    return FrontierPoint(mu=mu, chi=chi, zeta=zeta, xi2=xi2, degenerate=degenerate)


def optimal_curve(mode: str, twice_j: int, n_mu: int = 200) -> list[FrontierPoint]:
    """Frontier sampled on a logarithmic multiplier grid, ascending in chi.

    The grid spans [1e-3, 1e3] scaled by j so the knee of the curve stays
    resolved as the spin grows; mu = 0 anchors the unconstrained end.
    """
    frame = _frontier_frame(mode, twice_j)
    scale = max(1.0, frame.spin_j)
    grid = np.concatenate([[0.0], scale * np.geomspace(1e-3, 1e3, n_mu)])
    points = [
        ground_point(frame.zeta_op, frame.x_op, float(mu), frame.zeta_norm, frame.chi_norm)
        for mu in grid
    ]
    points.sort(key=lambda p: p.chi)
    return points


def min_xi2_on_curve(points) -> FrontierPoint:
    """Best squeezing on the frontier, skipping unpolarised points."""
    valid = [p for p in points if math.isfinite(p.xi2) and not p.degenerate]
    if not valid:
        raise ValueError("no polarised frontier points; widen the multiplier grid")
    return min(valid, key=lambda p: p.xi2)


def frontier_zeta_at(points, chi: float) -> float:
    """Frontier variance at given polarisation, linearly interpolated.

    Used to measure how far a dynamical locus sits above the bound.
    Outside the sampled chi range the nearest endpoint value is returned.
    """
    xs = np.array([p.chi for p in points])
    ys = np.array([p.zeta for p in points])
    order = np.argsort(xs)
    return float(np.interp(chi, xs[order], ys[order]))
