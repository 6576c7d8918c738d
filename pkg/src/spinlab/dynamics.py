"""Deterministic evolution: the record-averaged feedback master equation
and the countertwisting Hamiltonian flow.

In scaled time v the record-averaged state obeys

    drho/dv = -i (L/2) [ZY + YZ, rho] + D[Z - i L Y] rho

with Z = Z(v), Y = Y(v) from the measurement frame and L the scaled
feedback gain. The first term is the twisting the feedback synthesises;
the dissipator carries both the measurement back-action and the fed-back
noise. Integration is forward Euler: the generator is re-evaluated at
the start of each step, the state is re-Hermitized afterwards, and the
trace is left alone so integrator failure shows up as drift instead of
being hidden by renormalisation.

The per-step cost is four dim^3 products: Hermiticity of rho lets every
other product be recovered as a conjugate transpose, and r^dag r folds
into cached frame operators via r^dag r = Z^2 + L^2 Y^2 - L X.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .algebra import MeasurementFrame, expect_real
from .feedback import FeedbackScheme, GainError
from .metrics import compute_metrics
from .trajectory import STATUS_OK, TrajectoryRecord, _ColumnBuffer

log = logging.getLogger(__name__)

TRACE_TOL = 1e-6
# forward Euler leaves transient negative eigenvalue dust of order delta_v;
# warn only well above that scale, but always record the exact floor
EIG_FLOOR = -1e-3


def dissipator(r, rho):
    """D[r] rho = r rho r^dag - (r^dag r rho + rho r^dag r)/2."""
    rd = r.conj().T
    rdr = rd @ r
    return r @ rho @ rd - 0.5 * (rdr @ rho + rho @ rdr)


def conditioning_superop(r, rho):
    """H[r] rho = r rho + rho r^dag - Tr[(r + r^dag) rho] rho.

    Traceless by construction; drives the record-conditioned update.
    """
    m = r @ rho
    rd_term = rho @ r.conj().T
    mean = np.trace(m).real + np.trace(rd_term).real
    return m + rd_term - mean * rho


@dataclass
class EvolutionSpec:
    """What to integrate and how finely."""

    frame: MeasurementFrame
    generator: str = "feedback"  # feedback | countertwist-two | countertwist-single
    delta_v: float = 1e-3
    v_max: float = 20.0
    record_stride: int = 1
    audit_stride: int = 200  # positivity spot-check cadence, in steps
    twist_strength: float = 1.0

    def __post_init__(self):
        if self.generator not in ("feedback", "countertwist-two", "countertwist-single"):
            raise ValueError(f"unknown generator {self.generator!r}")
        if not (0 < self.delta_v <= 0.1):
            raise ValueError(f"delta_v out of range: {self.delta_v}")
        if not self.v_max > 0:
            raise ValueError("v_max must be positive")
        if self.delta_v > self.v_max:
            raise ValueError("delta_v exceeds v_max")
        if self.record_stride < 1 or int(self.record_stride) != self.record_stride:
            raise ValueError("record_stride must be a positive integer")

    @property
    def n_steps(self) -> int:
        return round(self.v_max / self.delta_v)


def countertwist_hamiltonian(frame: MeasurementFrame, variant: str, strength: float = 1.0):
    """Two-axis countertwisting generator.

    The cross-sample form k (J_z1 J_y2 + J_y1 J_z2) and the collective
    form (k/2)(Jz Jy + Jy Jz) generate identical flows when two spin-1/2
    samples are read as one spin 1; the factor of one half is what makes
    that correspondence exact.
    """
    if variant == "countertwist-two":
        ops = frame.two_mode
        if ops is None:
            raise ValueError("two-sample countertwisting needs a two-mode frame")
        return strength * (ops.jz1 @ ops.jy2 + ops.jy1 @ ops.jz2)
    if variant == "countertwist-single":
        z0, y0 = frame._zc, frame._yc  # static parts: collective Jz, Jy
        return 0.5 * strength * (z0 @ y0 + y0 @ z0)
    raise ValueError(f"unknown countertwisting variant {variant!r}")


def feedback_rate(frame: MeasurementFrame, rho, v: float, lam: float):
    """Right-hand side of the scaled master equation at time v."""
    c, s = frame.coefficients(v)
    from .algebra import _blend_linear, _blend_quadratic

    z = _blend_linear(frame._zc, frame._zs, c, s)
    z2 = _blend_quadratic(frame._zz, c, s)
    if lam == 0.0:
        zr = z @ rho
        half = z2 @ rho
        return zr @ z - 0.5 * (half + half.conj().T)
    y = _blend_linear(frame._yc, frame._ys, c, s)
    y2 = _blend_quadratic(frame._yy, c, s)
    anti = _blend_quadratic(frame._zy_anti, c, s)
    r = z - 1j * lam * y
    rdr = z2 + (lam * lam) * y2 - lam * frame.x_op  # r^dag r, assembled without a product
    rr = r @ rho
    sandwich = rr @ r.conj().T
    half = rdr @ rho
    drive = anti @ rho
    return (
        (-0.5j * lam) * (drive - drive.conj().T)
        + sandwich
        - 0.5 * (half + half.conj().T)
    )


def unconditioned_step(rho, frame: MeasurementFrame, v: float, lam: float, delta_v: float):
    """One forward-Euler step of the feedback master equation, re-Hermitized."""
    out = rho + delta_v * feedback_rate(frame, rho, v, lam)
    return 0.5 * (out + out.conj().T)


def countertwisting_step(rho, hamiltonian, delta_v: float):
    comm = hamiltonian @ rho
    out = rho + delta_v * (-1j) * (comm - comm.conj().T)
    return 0.5 * (out + out.conj().T)


_RECORD_COLUMNS = ("v", "zeta", "chi", "purity", "lam", "xi2", "entangled", "mz2")


def evolve(rho0, spec: EvolutionSpec, controller: FeedbackScheme | None = None) -> TrajectoryRecord:
    """Integrate the deterministic evolution and record metrics rows.

    Rows are recorded every record_stride steps starting at v = 0, so a
    clean run yields exactly n_steps // record_stride + 1 rows and the
    final time appears whenever the stride divides the step count.
    Blow-ups are detected through trace drift
    or non-finite moments; the run then stops with the rows collected so
    far and a status describing the failure. Positivity is audited every
    audit_stride steps and logged, never repaired.
    """
    frame = spec.frame
    if rho0.shape != (frame.dim, frame.dim):
        raise ValueError(f"state dimension {rho0.shape} does not match frame dimension {frame.dim}")
    rho = np.array(rho0, dtype=complex)
    controller = controller or FeedbackScheme("none")
    hamiltonian = None
    if spec.generator != "feedback":
        hamiltonian = countertwist_hamiltonian(frame, spec.generator, spec.twist_strength)

    buf = _ColumnBuffer(_RECORD_COLUMNS)
    status, abort_v, abort_reason = STATUS_OK, None, ""
    clamp_events = 0
    min_eig_floor = 0.0
    max_drift = 0.0
    dv = spec.delta_v

    for n in range(spec.n_steps + 1):
        v = n * dv
        trace = np.trace(rho).real
        drift = abs(trace - 1.0)
        max_drift = max(max_drift, drift)
        if not math.isfinite(trace):
            status, abort_v, abort_reason = "aborted-nonfinite", v, "non-finite trace"
            break
        if drift > TRACE_TOL:
            status, abort_v, abort_reason = "aborted-trace", v, f"trace drift {drift:.3e}"
            break
        try:
            lam, clamped = controller.gain(rho, frame, v)
        except GainError as err:
            status, abort_v, abort_reason = "aborted-gain", v, str(err)
            break
        if clamped:
            if clamp_events == 0:
                log.warning("gain clamped to %.3g at v=%.4f", lam, v)
            clamp_events += 1
        if n % spec.record_stride == 0:
            row = compute_metrics(rho, frame, v=v, lam=lam)
            if not math.isfinite(row.zeta):
                status, abort_v, abort_reason = "aborted-nonfinite", v, "non-finite moments"
                break
            buf.append(
                (row.v, row.zeta, row.chi, row.purity, row.lam, row.xi2, float(row.entangled), row.mz2)
            )
        if spec.audit_stride and n % spec.audit_stride == 0:
            low = float(np.linalg.eigvalsh(rho)[0])
            if low < EIG_FLOOR and min_eig_floor >= EIG_FLOOR:
                # warn once; the worst excursion lands in min_eig_floor
                log.warning("state eigenvalue %.3e below floor at v=%.4f", low, v)
            min_eig_floor = min(min_eig_floor, low)
        if n == spec.n_steps:
            break
        if hamiltonian is not None:
            rho = countertwisting_step(rho, hamiltonian, dv)
        else:
            rho = unconditioned_step(rho, frame, v, lam, dv)

    meta = {
        "mode": frame.mode,
        "generator": spec.generator,
        "delta_v": dv,
        "v_max": spec.v_max,
        "omega": frame.omega,
        "scheme": controller.kind,
        "conditioned": False,
    }
    return TrajectoryRecord(
        meta=meta,
        columns=buf.finalize(),
        status=status,
        abort_v=abort_v,
        abort_reason=abort_reason,
        clamp_events=clamp_events,
        min_eig_floor=min_eig_floor,
        max_trace_drift=max_drift,
    )
