"""Feedback gain laws, in measurement-rate units.

All gains are the scaled ratio of feedback strength to measurement rate.
The controller applies a rotation about the frame's Y axis proportional
to the measurement record; the laws below choose the proportionality:

* simple             2<Z^2>/<X>, moments of the evolving state
* simple-conditioned same ratio on the record-conditioned state
* analytic           precomputable schedule exp(v/4)/(1+2jv) for two
                     samples, exp(v/2)/(1+2jv) for one
* optimal            maximizes the descent slope of the reduced variance
                     against the polarisation at every instant
* spin1-analytic     1/sqrt(2 exp(v) - 1), the closed form the simple
                     ratio takes on the exactly-solvable spin-1 flow
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .algebra import MeasurementFrame, expect_real

LAMBDA_CLAMP_DEFAULT = 1e3

SCHEME_KINDS = ("none", "simple", "simple-conditioned", "analytic", "optimal", "spin1-analytic")


class GainError(RuntimeError):
    """A gain law looked at moments it cannot turn into a finite gain."""


def moment_block(rho, frame: MeasurementFrame, v: float):
    """The four moments every state-dependent law consumes:
    d = <X^2 - Z^2>, e = <4 Z X Z + X>, f = <X>/2, g = 2<Z^2>."""
    mx = expect_real(frame.x_op, rho)
    mz2 = expect_real(frame.z2_at(v), rho)
    d = expect_real(frame.x2_op, rho) - mz2
    e = 4.0 * expect_real(frame.zxz_at(v), rho) + mx
    return d, e, 0.5 * mx, 2.0 * mz2


def lambda_simple(rho, frame: MeasurementFrame, v: float) -> float:
    """Measured second moment over polarisation; diverges as the spin
    depolarises."""
    mz2 = expect_real(frame.z2_at(v), rho)
    mx = expect_real(frame.x_op, rho)
    if mx == 0.0:
        return math.inf
    return 2.0 * mz2 / mx


def lambda_simple_conditioned(rho, frame: MeasurementFrame, v: float) -> float:
    """Conditional-variance form: on a conditioned state the regulated
    mean carries no squeezing information, so it is subtracted."""
    mz = expect_real(frame.z_at(v), rho)
    mz2 = expect_real(frame.z2_at(v), rho)
    mx = expect_real(frame.x_op, rho)
    if mx == 0.0:
        return math.inf
    return 2.0 * (mz2 - mz * mz) / mx


def lambda_analytic(v: float, spin_j: float, mode: str) -> float:
    quarter = 0.25 if mode == "two" else 0.5
    return math.exp(quarter * v) / (1.0 + 2.0 * spin_j * v)


def lambda_spin1(v: float) -> float:
    return 1.0 / math.sqrt(2.0 * math.exp(v) - 1.0)


def lambda_optimal(rho, frame: MeasurementFrame, v: float) -> float:
    """Stationary point of the descent slope over the gain.

    Written with the discriminant in the numerator's conjugate so the
    expression stays finite when f e - d g crosses zero (there it reduces
    to e/(2d)).
    """
    d, e, f, g = moment_block(rho, frame, v)
    disc = (f * d) ** 2 + e * f * (f * e - d * g)
    if disc < 0.0:
        raise GainError(
            f"no real stationary gain: d={d:.6g} e={e:.6g} f={f:.6g} g={g:.6g} disc={disc:.6g}"
        )
    denom = f * d + math.sqrt(disc)
    if denom == 0.0:
        raise GainError(f"degenerate gain denominator: d={d:.6g} e={e:.6g} f={f:.6g} g={g:.6g}")
    return e * f / denom


def locus_slope(lam: float, moments) -> float:
    """d(zeta)/d(chi) along the deterministic flow, from the same moment
    block the optimal law uses: (lam^2 d - lam e) / (lam g - f (1 + lam^2))."""
    d, e, f, g = moments
    return (lam * lam * d - lam * e) / (lam * g - f * (1.0 + lam * lam))


@dataclass(frozen=True)
class FeedbackScheme:
    """A named gain law plus the safety clamp applied to its output."""

    kind: str
    clamp: float = LAMBDA_CLAMP_DEFAULT

    def __post_init__(self):
        if self.kind not in SCHEME_KINDS:
            raise ValueError(f"unknown feedback scheme {self.kind!r}; expected one of {SCHEME_KINDS}")
        if not self.clamp > 0:
            raise ValueError("clamp must be positive")

    def gain(self, rho, frame: MeasurementFrame, v: float):
        """(gain, clamped) for the current state and time."""
        if self.kind == "none":
            return 0.0, False
        if self.kind == "simple":
            lam = lambda_simple(rho, frame, v)
        elif self.kind == "simple-conditioned":
            lam = lambda_simple_conditioned(rho, frame, v)
        elif self.kind == "analytic":
            lam = lambda_analytic(v, frame.spin_j, frame.mode)
        elif self.kind == "optimal":
            lam = lambda_optimal(rho, frame, v)
        else:
            lam = lambda_spin1(v)
        if not math.isfinite(lam) or abs(lam) > self.clamp:
            return math.copysign(self.clamp, lam), True
        return lam, False
