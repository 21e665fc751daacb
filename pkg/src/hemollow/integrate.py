"""Time integration of the coupled spin system.

The dynamics are linear-affine in the state, dx/dt = A(t) x + c, and A
varies only through the drive cosine inside drive windows (the cosine is
referenced to the window opening, so a pulse starts at the crest of the
carrier).  The integrators exploit that structure instead of treating the
problem as a black-box ODE:

* ``exponential-affine`` (default): within each substep the carrier is
  frozen at the substep midpoint and the affine system is advanced by its
  exact exponential map.  Off drive, A is constant and the step is exact
  for any size, so quiet stretches cost one propagator build per step
  size.  Second order in the substep while the drive runs, and stable for
  the metastable rates near 1e6 1/s without resolving them.

* ``implicit-trapezoidal``: the A-stable trapezoidal rule, kept as an
  independent cross-check of the exponential scheme.

* ``explicit-adaptive``: scipy's RK45.  Fine on the reduced model, but
  the full system forces it to sub-microsecond steps; a right-hand-side
  evaluation budget turns that into a StiffnessError instead of a silent
  multi-hour run.

Output lands on a uniform grid (``sample_rate``, default 100 Hz) no
matter how the scheme steps internally.  Fixed-step schemes subdivide
each grid interval exactly; the adaptive scheme records through scipy's
dense interpolant.  The grid only has to resolve content near the
ground-state precession frequency: metastable transverse components are
slaved to the ground state rather than free precessors, so their
apparent bandwidth is the same few hertz.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import expm, lu_factor, lu_solve

from .errors import (
    NonFiniteStateError,
    NumericalError,
    SingularSystemError,
    StiffnessError,
    ValidationError,
)
from .model import (
    GAUSS_PER_NANOTESLA,
    TWO_PI,
    FieldDrive,
    PhysicalParams,
    SpinState,
    _cross_matrix,
    field_at,
    full_system_matrices,
    larmor_frequency,
    reduced_system_matrices,
)
from .sequence import PulseSequence, Segment

SCHEMES = ("exponential-affine", "implicit-trapezoidal", "explicit-adaptive")

# substeps per carrier period when the cosine is frozen at midpoints
_DRIVE_PERIOD_FRACTION = 100
# hard ceiling: no step during drive may exceed a twentieth of a period
_DRIVE_PERIOD_CEILING = 20

_KIND_WIDTH = {"full": 9, "reduced": 3}


def _positive(name, value, allow_none=False):
    if value is None and allow_none:
        return None
    try:
        v = float(value)
    except (TypeError, ValueError):
        raise ValidationError(f"{name} must be a number, got {value!r}") from None
    if not math.isfinite(v) or v <= 0.0:
        raise ValidationError(f"{name} must be positive and finite, got {value!r}")
    return v


@dataclass(frozen=True)
class IntegrationConfig:
    """Numerical controls shared by every scheme.

    max_step, when set, replaces the scheme's internal step-size defaults
    and is enforced as a hard ceiling; while the drive is on it must not
    exceed a twentieth of the carrier period.  rel_tol/abs_tol steer only
    the adaptive scheme.  max_rhs_evals bounds the work the adaptive
    scheme may spend before giving up with a StiffnessError.
    """

    rel_tol: float = 1e-8
    abs_tol: float = 1e-12
    max_step: float | None = None
    scheme: str = "exponential-affine"
    sample_rate: float = 100.0
    max_rhs_evals: int = 2_000_000

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValidationError(
                f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        _positive("rel_tol", self.rel_tol)
        _positive("abs_tol", self.abs_tol)
        _positive("sample_rate", self.sample_rate)
        _positive("max_step", self.max_step, allow_none=True)
        if int(self.max_rhs_evals) != self.max_rhs_evals or self.max_rhs_evals < 1:
            raise ValidationError(
                f"max_rhs_evals must be a positive integer, got {self.max_rhs_evals!r}")


@dataclass(frozen=True)
class Trajectory:
    """Solution sampled on the uniform grid t0 + k * dt.

    states has one row per sample: 9 columns (I, F_mu, F_mu_prime) for
    kind "full", 3 columns (I) for kind "reduced".
    """

    t0: float
    dt: float
    states: np.ndarray
    kind: str = "full"

    def __post_init__(self):
        if self.kind not in _KIND_WIDTH:
            raise ValidationError(f"kind must be 'full' or 'reduced', got {self.kind!r}")
        s = np.asarray(self.states, dtype=float)
        if s.ndim != 2 or s.shape[0] < 1 or s.shape[1] != _KIND_WIDTH[self.kind]:
            raise ValidationError(
                f"states must have shape (n, {_KIND_WIDTH[self.kind]}) for a "
                f"{self.kind} trajectory, got {s.shape}")
        object.__setattr__(self, "states", s)
        if not (math.isfinite(self.t0) and self.t0 >= 0.0):
            raise ValidationError(f"t0 must be finite and non-negative, got {self.t0!r}")
        if not (math.isfinite(self.dt) and self.dt > 0.0):
            raise ValidationError(f"dt must be positive, got {self.dt!r}")
        if not np.all(np.isfinite(s)):
            raise NonFiniteStateError("trajectory contains non-finite samples")

    @property
    def n_samples(self) -> int:
        return self.states.shape[0]

    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.n_samples)

    @property
    def i_vec(self) -> np.ndarray:
        return self.states[:, 0:3]

    @property
    def f_mu(self) -> np.ndarray:
        if self.kind != "full":
            raise ValidationError("reduced trajectories carry only the ground-state spin")
        return self.states[:, 3:6]

    @property
    def f_mu_prime(self) -> np.ndarray:
        if self.kind != "full":
            raise ValidationError("reduced trajectories carry only the ground-state spin")
        return self.states[:, 6:9]


def _sample_grid(t_span, sample_rate, total_duration):
    try:
        t0, t1 = float(t_span[0]), float(t_span[1])
    except (TypeError, ValueError, IndexError):
        raise ValidationError(f"t_span must be a (start, stop) pair, got {t_span!r}") from None
    if not (math.isfinite(t0) and math.isfinite(t1)):
        raise ValidationError("t_span must be finite")
    if t0 < 0.0 or t1 <= t0:
        raise ValidationError(f"t_span must satisfy 0 <= start < stop, got {t_span!r}")
    if t1 > total_duration + 1e-9:
        raise ValidationError(
            f"t_span reaches {t1} s but the sequence ends at {total_duration} s")
    dt = 1.0 / sample_rate
    n = int(round((t1 - t0) * sample_rate))
    if n < 1 or abs(t0 + n * dt - t1) > 1e-6:
        raise ValidationError(
            "t_span must cover a whole number of samples at sample_rate")
    return t0, dt, n


class _SegmentSystem:
    """Instantaneous (A, c) inside one constant-gating stretch."""

    def __init__(self, params: PhysicalParams, sequence: PulseSequence,
                 seg: Segment, kind: str, denominator: str):
        drive = sequence.drive
        self.kind = kind
        self.params = params
        self.denominator = denominator
        self.pump = sequence.pump_value if seg.pump_on else 0.0
        self.freq = drive.drive_freq
        self.phase = drive.phase
        self.origin = seg.drive_origin if seg.drive_on else 0.0
        self.bz = drive.b_static * GAUSS_PER_NANOTESLA
        self.by_amp = (drive.b_osc if seg.drive_on else 0.0) * GAUSS_PER_NANOTESLA
        self.varying = self.by_amp != 0.0 and self.freq > 0.0
        self.dim = _KIND_WIDTH[kind]
        if not self.varying:
            by = self.by_amp * math.cos(self.phase)
            self.a_const, self.c_const = self._matrices_for(by)

    def _matrices_for(self, by):
        b = np.array([0.0, by, self.bz])
        if self.kind == "full":
            return full_system_matrices(self.params, b, self.pump)
        return reduced_system_matrices(self.params, b, self.pump,
                                       denominator=self.denominator)

    def field_y(self, t):
        return self.by_amp * math.cos(TWO_PI * self.freq * (t - self.origin)
                                      + self.phase)

    def matrices(self, t):
        if not self.varying:
            return self.a_const, self.c_const
        return self._matrices_for(self.field_y(t))


def _fixed_point(a, c):
    """Solve A xs = -c; None when c is zero or A has no usable inverse."""
    if not c.any():
        return None
    try:
        xs = np.linalg.solve(a, -c)
    except np.linalg.LinAlgError:
        return None
    if np.max(np.abs(a @ xs + c)) > 1e-8 * np.max(np.abs(c)):
        return None
    return xs


def _affine_map(a, c, h):
    """Exact one-step map of dx/dt = A x + c over h.

    Returns (e, xs, v).  With a fixed point xs the map is applied as
    e (x - xs) + xs, which preserves steady states to the last bit; the
    augmented-exponential fallback (xs None, inhomogeneous part v) covers
    singular A.
    """
    e = expm(a * h)
    if not c.any():
        return e, None, None
    xs = _fixed_point(a, c)
    if xs is not None:
        return e, xs, None
    d = a.shape[0]
    m = np.zeros((d + 1, d + 1))
    m[:d, :d] = a * h
    m[:d, d] = c * h
    em = expm(m)
    return em[:d, :d], None, em[:d, d]


def _apply_map(mp, x):
    e, xs, v = mp
    if xs is not None:
        return e @ (x - xs) + xs
    y = e @ x
    if v is not None:
        y = y + v
    return y


def _rotation_about(w, h):
    """Rodrigues rotation advancing dx/dt = w x x by h."""
    nw = float(np.linalg.norm(w))
    if nw == 0.0:
        return np.eye(3)
    k = _cross_matrix(w / nw)
    th = nw * h
    return np.eye(3) + math.sin(th) * k + (1.0 - math.cos(th)) * (k @ k)


def _substep_count(span, h_target):
    if not math.isfinite(h_target):
        return 1
    return max(1, int(math.ceil(span / h_target - 1e-12)))


def _make_exp_stepper(sys, params, config):
    if config.max_step is not None:
        h_target = config.max_step
    elif sys.varying:
        h_target = 1.0 / (sys.freq * _DRIVE_PERIOD_FRACTION)
    else:
        h_target = math.inf
    cache = {}
    gamma = params.gamma_relax_g
    rodrigues = sys.kind == "reduced" and sys.varying
    c_red = sys.matrices(sys.origin)[1] if rodrigues else None
    eye3 = np.eye(3)

    def step(x, ta, tb):
        span = tb - ta
        if span <= 0.0:
            return x
        nsub = _substep_count(span, h_target)
        h = span / nsub
        if not sys.varying:
            mp = cache.get(h)
            if mp is None:
                mp = _affine_map(sys.a_const, sys.c_const, h)
                cache[h] = mp
            for _ in range(nsub):
                x = _apply_map(mp, x)
            return x
        for j in range(nsub):
            tm = ta + (j + 0.5) * h
            if rodrigues:
                w = TWO_PI * params.gamma_g * np.array([0.0, sys.field_y(tm), sys.bz])
                e = math.exp(-gamma * h) * _rotation_about(w, h)
                if not c_red.any():
                    x = e @ x
                else:
                    a = _cross_matrix(w) - gamma * eye3
                    xs = _fixed_point(a, c_red)
                    if xs is not None:
                        x = e @ (x - xs) + xs
                    else:
                        x = _apply_map(_affine_map(a, c_red, h), x)
            else:
                a, c = sys.matrices(tm)
                x = _apply_map(_affine_map(a, c, h), x)
        return x

    return step


def _make_trap_stepper(sys, params, config, drive):
    targets = []
    slow = larmor_frequency(params, drive.b_static)
    if slow > 0.0:
        targets.append(1.0 / (slow * _DRIVE_PERIOD_FRACTION))
    if sys.varying:
        targets.append(1.0 / (sys.freq * _DRIVE_PERIOD_FRACTION))
    if config.max_step is not None:
        h_target = config.max_step
    elif targets:
        h_target = min(targets)
    else:
        h_target = math.inf
    eye = np.eye(sys.dim)
    cache = {}

    def step(x, ta, tb):
        span = tb - ta
        if span <= 0.0:
            return x
        nsub = _substep_count(span, h_target)
        h = span / nsub
        if not sys.varying:
            got = cache.get(h)
            if got is None:
                a, c = sys.a_const, sys.c_const
                got = (lu_factor(eye - 0.5 * h * a), eye + 0.5 * h * a,
                       _fixed_point(a, c), c)
                cache[h] = got
            lhs, rhs_m, xs, c = got
            for _ in range(nsub):
                if xs is not None:
                    x = lu_solve(lhs, rhs_m @ (x - xs)) + xs
                else:
                    x = lu_solve(lhs, rhs_m @ x + h * c)
            return x
        for j in range(nsub):
            t_a = ta + j * h
            a0, c0 = sys.matrices(t_a)
            a1, _ = sys.matrices(t_a + h)
            x = np.linalg.solve(eye - 0.5 * h * a1,
                                x + 0.5 * h * (a0 @ x) + h * c0)
        return x

    return step


def _clipped(seg, t0, t1):
    lo = max(seg.t0, t0)
    hi = min(seg.t1, t1)
    return (lo, hi) if hi > lo + 1e-15 else None


def _run_fixed(x0, t0, dt, n, params, sequence, config, kind, denominator):
    t1 = t0 + n * dt
    out = np.empty((n + 1, x0.size))
    out[0] = x0
    x = x0.copy()
    t = t0
    k = 1
    eps = 1e-9
    for seg in sequence.segments():
        win = _clipped(seg, t0, t1)
        if win is None:
            continue
        _, hi = win
        sys = _SegmentSystem(params, sequence, seg, kind, denominator)
        if config.scheme == "implicit-trapezoidal":
            step = _make_trap_stepper(sys, params, config, sequence.drive)
        else:
            step = _make_exp_stepper(sys, params, config)
        while k <= n:
            tk = t0 + k * dt
            if tk > hi + eps:
                break
            x = step(x, t, tk)
            if not np.all(np.isfinite(x)):
                raise NonFiniteStateError(f"state became non-finite near t = {tk:.6g} s")
            out[k] = x
            t = tk
            k += 1
        if t < hi - eps:
            x = step(x, t, hi)
            t = hi
    if k != n + 1:
        raise NumericalError("internal error: sequence segments did not cover the sample grid")
    return out


def _run_adaptive(x0, t0, dt, n, params, sequence, config, kind, denominator):
    t1 = t0 + n * dt
    out = np.empty((n + 1, x0.size))
    out[0] = x0
    x = x0.copy()
    t = t0
    k = 1
    eps = 1e-9
    evals = [0]
    budget = int(config.max_rhs_evals)
    for seg in sequence.segments():
        win = _clipped(seg, t0, t1)
        if win is None:
            continue
        _, hi = win
        sys = _SegmentSystem(params, sequence, seg, kind, denominator)
        if sys.varying:
            def inner(tt, xx, sys=sys):
                a, c = sys.matrices(tt)
                return a @ xx + c
        else:
            def inner(tt, xx, a=sys.a_const, c=sys.c_const):
                return a @ xx + c

        def rhs(tt, xx, inner=inner):
            evals[0] += 1
            if evals[0] > budget:
                raise StiffnessError(
                    f"right-hand-side budget of {budget} evaluations exhausted "
                    f"near t = {tt:.6g} s; the system is too stiff for the "
                    "explicit scheme")
            return inner(tt, xx)

        k_hi = min(n, int(math.floor((hi - t0) / dt + 1e-9)))
        t_eval = [t0 + i * dt for i in range(k, k_hi + 1)]
        n_grid = len(t_eval)
        if n_grid == 0 or t_eval[-1] < hi - eps:
            t_eval.append(hi)
        t_eval = np.minimum(np.asarray(t_eval), hi)
        sol = solve_ivp(rhs, (t, hi), x, method="RK45", t_eval=t_eval,
                        rtol=config.rel_tol, atol=config.abs_tol,
                        max_step=config.max_step if config.max_step else np.inf)
        if not sol.success:
            if sol.status == -1:
                raise StiffnessError(f"adaptive step failed: {sol.message}")
            raise NumericalError(f"adaptive integration failed: {sol.message}")
        for idx in range(n_grid):
            out[k] = sol.y[:, idx]
            k += 1
        x = sol.y[:, -1].copy()
        t = hi
    if k != n + 1:
        raise NumericalError("internal error: sequence segments did not cover the sample grid")
    return out


def _active_drive_overlap(sequence, t0, t1):
    if sequence.drive.b_osc == 0.0:
        return False
    return any(seg.drive_on and _clipped(seg, t0, t1) is not None
               for seg in sequence.segments())


def _validate_stepping(params, sequence, config, t0, t1):
    drive_active = _active_drive_overlap(sequence, t0, t1)
    f = sequence.drive.drive_freq
    if drive_active and f > 0.0:
        if config.max_step is not None:
            limit = 1.0 / (f * _DRIVE_PERIOD_CEILING)
            if config.max_step > limit * (1.0 + 1e-12):
                raise ValidationError(
                    f"max_step {config.max_step} s exceeds a twentieth of the "
                    f"{f} Hz drive period ({limit:.6g} s)")
        if config.sample_rate < 4.0 * f * (1.0 - 1e-12):
            raise ValidationError(
                f"sample_rate {config.sample_rate} Hz is below four times the "
                f"{f} Hz drive frequency")
    slow = larmor_frequency(params, sequence.drive.b_static)
    if slow > 0.0 and config.sample_rate < 4.0 * slow * (1.0 - 1e-12):
        raise ValidationError(
            f"sample_rate {config.sample_rate} Hz is below four times the "
            f"{slow} Hz ground-state precession frequency")


def _integrate(x0, t_span, params, sequence, config, kind, denominator):
    t0, dt, n = _sample_grid(t_span, config.sample_rate, sequence.total_duration)
    t1 = t0 + n * dt
    _validate_stepping(params, sequence, config, t0, t1)
    if config.scheme == "explicit-adaptive":
        out = _run_adaptive(x0, t0, dt, n, params, sequence, config, kind, denominator)
    else:
        out = _run_fixed(x0, t0, dt, n, params, sequence, config, kind, denominator)
    return Trajectory(t0=t0, dt=dt, states=out, kind=kind)


def integrate_full(state0: SpinState, t_span, params: PhysicalParams,
                   sequence: PulseSequence,
                   config: IntegrationConfig | None = None) -> Trajectory:
    """Integrate the 9-dimensional coupled system over t_span."""
    if config is None:
        config = IntegrationConfig()
    if not isinstance(state0, SpinState):
        raise ValidationError("state0 must be a SpinState")
    x0 = state0.to_array()
    if not np.all(np.isfinite(x0)):
        raise NonFiniteStateError("initial state contains non-finite components")
    return _integrate(x0, t_span, params, sequence, config, "full", "mu")


def integrate_reduced(i0, t_span, params: PhysicalParams,
                      sequence: PulseSequence,
                      config: IntegrationConfig | None = None,
                      denominator: str = "mu") -> Trajectory:
    """Integrate the ground-state-only model over t_span."""
    if config is None:
        config = IntegrationConfig()
    x0 = np.asarray(i0, dtype=float)
    if x0.shape != (3,):
        raise ValidationError(f"i0 must be a 3-vector, got shape {x0.shape}")
    if not np.all(np.isfinite(x0)):
        raise NonFiniteStateError("initial state contains non-finite components")
    return _integrate(x0, t_span, params, sequence, config, "reduced", denominator)


def _solve_steady(a, c):
    cond = np.linalg.cond(a)
    if not np.isfinite(cond) or cond > 1e12:
        raise SingularSystemError(
            f"no unique steady state: system matrix condition number {cond:.3g}")
    x = np.linalg.solve(a, -c)
    scale = max(float(np.max(np.abs(c))),
                float(np.max(np.abs(a)) * np.max(np.abs(x))),
                np.finfo(float).tiny)
    if np.max(np.abs(a @ x + c)) > 1e-12 * scale:
        raise NumericalError("steady-state residual exceeds 1e-12 of the system scale")
    return x


def _steady_inputs(params, drive, pump):
    if drive.b_osc != 0.0:
        raise ValidationError(
            "steady state is defined for a static field only; set b_osc to zero")
    p = params.pump_polarization if pump is None else float(pump)
    if not (math.isfinite(p) and 0.0 <= p <= 1.0):
        raise ValidationError(f"pump must lie in [0, 1], got {pump!r}")
    return field_at(drive, 0.0), p


def steady_state(params: PhysicalParams, drive: FieldDrive,
                 pump: float | None = None) -> SpinState:
    """Stationary point of the full system under a static field.

    pump overrides params.pump_polarization when given.  Solved directly
    from the affine form; the residual check guards against a silently
    ill-conditioned solve.
    """
    b, p = _steady_inputs(params, drive, pump)
    a, c = full_system_matrices(params, b, p)
    return SpinState.from_array(_solve_steady(a, c))


def steady_state_reduced(params: PhysicalParams, drive: FieldDrive,
                         pump: float | None = None,
                         denominator: str = "mu") -> np.ndarray:
    """Stationary ground-state vector of the reduced model."""
    b, p = _steady_inputs(params, drive, pump)
    a, c = reduced_system_matrices(params, b, p, denominator=denominator)
    return _solve_steady(a, c)
