"""The five-segment Lambda(t) protocol and numerically exact propagation.

A cycle is plateau(Lambda0) -> linear ramp to Lambda1 -> plateau ->
linear ramp back -> plateau, all plateaus lasting t_r, total duration
T = 3 t_r + 2 tau_q.  Ramps are integrated with a commutator-free
4th-order Magnus scheme (two frozen-Hamiltonian exponentials per step,
each applied by banded Chebyshev expansion); a 2nd-order midpoint
variant and a dense explicit stepper (DOP853) are available for
cross-validation.  Relaxation plateaus advance by exact eigenbasis
phase rotation using the cached spectral decomposition.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .basis import SpinBasis, StateVector, build_jx2, jx_offdiag
from .errors import ConfigError, NormDriftError
from .spectral import DecompositionCache, SpectralDecomposition

_GAUSS_OFFSET = math.sqrt(3.0) / 6.0
_CF4_A1 = 0.25 - _GAUSS_OFFSET
_CF4_A2 = 0.25 + _GAUSS_OFFSET

SEGMENT_NAMES = ("relax0", "forward", "relax1", "backward", "relax2")


def _unchecked_state(basis: SpinBasis, amps: np.ndarray) -> StateVector:
    """StateVector carrying propagated amplitudes; norm drift stays visible."""
    sv = object.__new__(StateVector)
    a = np.ascontiguousarray(amps, dtype=complex)
    a.setflags(write=False)
    object.__setattr__(sv, "basis", basis)
    object.__setattr__(sv, "amplitudes", a)
    return sv


@dataclass(frozen=True)
class QuenchSchedule:
    """Piecewise-linear Lambda(t) of the closed quench cycle."""

    lambda0: float
    lambda1: float
    t_r: float
    tau_q: float

    def __post_init__(self):
        if self.lambda0 <= 0 or self.lambda1 <= 0:
            raise ConfigError("lambda0 and lambda1 must be positive")
        if self.t_r <= 0 or self.tau_q <= 0:
            raise ConfigError("t_r and tau_q must be positive")

    @property
    def total_duration(self) -> float:
        return 3.0 * self.t_r + 2.0 * self.tau_q

    def boundaries(self) -> np.ndarray:
        t_r, tau_q = self.t_r, self.tau_q
        return np.array([0.0, t_r, t_r + tau_q, 2 * t_r + tau_q,
                         2 * t_r + 2 * tau_q, self.total_duration])

    def segments(self) -> tuple[tuple[str, float, float], ...]:
        b = self.boundaries()
        return tuple((SEGMENT_NAMES[i], float(b[i]), float(b[i + 1])) for i in range(5))

    def lambda_at(self, t: float) -> float:
        if not 0.0 <= t <= self.total_duration * (1 + 1e-12):
            raise ConfigError(f"t={t} outside the cycle [0, {self.total_duration}]")
        return float(self.lambda_array(np.array([t]))[0])

    def lambda_array(self, t: np.ndarray) -> np.ndarray:
        knots = self.boundaries()
        values = np.array([self.lambda0, self.lambda0, self.lambda1,
                           self.lambda1, self.lambda0, self.lambda0])
        return np.interp(t, knots, values)


@dataclass(frozen=True)
class PropagationConfig:
    """Stepper choice and tolerances for ramp integration.

    method "cheby" is the banded polynomial-expansion propagator
    (magnus_order 4 = commutator-free Magnus, 2 = midpoint-frozen);
    "dop853" is an explicit high-order Runge-Kutta stepper on the raw
    coupled equations, kept for cross-validation.
    """

    step: float
    method: str = "cheby"
    magnus_order: int = 4
    norm_tolerance: float = 1e-6
    sample_stride: float | None = None

    def __post_init__(self):
        if self.step <= 0:
            raise ConfigError(f"step must be positive, got {self.step}")
        if self.norm_tolerance < 0:
            raise ConfigError("norm_tolerance must be >= 0")
        if self.method not in ("cheby", "dop853"):
            raise ConfigError(f"unknown method {self.method!r}")
        if self.magnus_order not in (2, 4):
            raise ConfigError(f"magnus_order must be 2 or 4, got {self.magnus_order}")


@dataclass(frozen=True)
class Trajectory:
    """Streamed observables over one propagation window plus the final state."""

    window: tuple[float, float]
    times: np.ndarray
    lambdas: np.ndarray
    jx: np.ndarray
    norm_dev: np.ndarray
    parity: np.ndarray
    final_state: StateVector

    def max_norm_dev(self) -> float:
        return float(self.norm_dev.max()) if len(self.norm_dev) else 0.0


def _check_norm(times: np.ndarray, norm_dev: np.ndarray, tol: float):
    if len(norm_dev) == 0:
        return
    bad = np.nonzero(norm_dev > tol)[0]
    if len(bad):
        i = int(bad[0])
        raise NormDriftError(
            f"norm deviated by {norm_dev[i]:.3e} (tolerance {tol:.1e}) at t={times[i]:.6g}",
            time=float(times[i]), deviation=float(norm_dev[i]))


def _evolve_cheby(state, schedule, t_a, t_b, config) -> Trajectory:
    basis = state.basis
    jx2 = build_jx2(basis)
    m_vals = basis.m_values()
    n_steps = max(1, int(np.ceil((t_b - t_a) / config.step)))
    dt = (t_b - t_a) / n_steps
    edges = t_a + dt * np.arange(n_steps + 1)
    g_of = lambda t: 2.0 * basis.j / schedule.lambda_array(t)
    if config.magnus_order == 4:
        g1 = g_of(edges[:-1] + (0.5 - _GAUSS_OFFSET) * dt)
        g2 = g_of(edges[:-1] + (0.5 + _GAUSS_OFFSET) * dt)
        betas = dt * np.column_stack([_CF4_A2 * g1 + _CF4_A1 * g2,
                                      _CF4_A1 * g1 + _CF4_A2 * g2])
        alphas = np.array([dt / 2.0, dt / 2.0])
    else:
        betas = dt * g_of(edges[:-1] + 0.5 * dt)[:, None]
        alphas = np.array([dt])
    lo, hi = _kernels.exponent_interval(jx2.diag, jx2.band2, m_vals,
                                        alphas[0], betas.min(), betas.max())
    half = (hi - lo) / 2.0
    shift = (hi + lo) / 2.0
    coeffs = _kernels.chebyshev_coefficients(half, shift)
    inv_half = 1.0 / half if half > 1e-14 else 0.0

    stride_t = config.sample_stride if config.sample_stride is not None else 10 * config.step
    stride = max(1, int(round(stride_t / dt)))
    n_samples = n_steps // stride
    out_jx = np.empty(n_samples)
    out_norm = np.empty(n_samples)
    out_parity = np.empty(n_samples)
    psi = np.array(state.amplitudes, dtype=complex)
    written = _kernels.propagate_steps(
        jx2.diag, jx2.band2, m_vals, jx_offdiag(basis), basis.parity_signs(),
        alphas, betas, inv_half, shift, coeffs,
        psi, stride, out_jx, out_norm, out_parity)
    times = edges[stride::stride][:written]
    traj = Trajectory(
        window=(t_a, t_b), times=times, lambdas=schedule.lambda_array(times),
        jx=out_jx[:written], norm_dev=out_norm[:written], parity=out_parity[:written],
        final_state=_unchecked_state(basis, psi))
    _check_norm(traj.times, traj.norm_dev, config.norm_tolerance)
    return traj


def _evolve_dop853(state, schedule, t_a, t_b, config) -> Trajectory:
    from scipy.integrate import solve_ivp

    basis = state.basis
    jx2 = build_jx2(basis)
    m_vals = basis.m_values()
    off2 = jx2.band2

    def rhs(t, y):
        lam = schedule.lambda_array(np.array([t]))[0]
        hy = (jx2.diag - (2.0 * basis.j / lam) * m_vals) * y
        hy[:-2] += off2 * y[2:]
        hy[2:] += off2 * y[:-2]
        return -1j * hy

    stride_t = config.sample_stride if config.sample_stride is not None else 10 * config.step
    n_samples = max(1, int(np.floor((t_b - t_a) / stride_t)))
    times = t_a + stride_t * np.arange(1, n_samples + 1)
    times[-1] = min(times[-1], t_b)
    t_eval = np.unique(np.append(times, t_b))
    sol = solve_ivp(rhs, (t_a, t_b), np.asarray(state.amplitudes, dtype=complex),
                    method="DOP853", rtol=1e-12, atol=1e-12,
                    max_step=config.step * 100, t_eval=t_eval)
    if not sol.success:  # pragma: no cover - scipy failure path
        raise NormDriftError(f"DOP853 failed: {sol.message}")
    ys = sol.y
    norms = np.linalg.norm(ys, axis=0)
    jx1 = jx_offdiag(basis)
    jx = 2.0 * np.sum(jx1[:, None] * np.real(np.conj(ys[:-1]) * ys[1:]), axis=0)
    parity = np.sum(basis.parity_signs()[:, None] * np.abs(ys) ** 2, axis=0)
    traj = Trajectory(
        window=(t_a, t_b), times=sol.t, lambdas=schedule.lambda_array(sol.t),
        jx=jx, norm_dev=np.abs(norms - 1.0), parity=parity,
        final_state=_unchecked_state(basis, ys[:, -1]))
    _check_norm(traj.times, traj.norm_dev, config.norm_tolerance)
    return traj


def evolve(state: StateVector, schedule: QuenchSchedule,
           window: tuple[float, float], config: PropagationConfig) -> Trajectory:
    """Solve i d|psi>/dt = H(Lambda(t)) |psi> over the window."""
    t_a, t_b = window
    if not (0.0 <= t_a < t_b <= schedule.total_duration * (1 + 1e-12)):
        raise ConfigError(f"window {window} not inside [0, {schedule.total_duration}]")
    if config.method == "dop853":
        return _evolve_dop853(state, schedule, t_a, t_b, config)
    return _evolve_cheby(state, schedule, t_a, t_b, config)


def _plateau_advance(state: StateVector, dec: SpectralDecomposition,
                     t_a: float, t_b: float, lam: float, n_samples: int) -> Trajectory:
    """Exact constant-Lambda evolution by eigenbasis phase rotation."""
    basis = state.basis
    coeffs = dec.project(state)
    duration = t_b - t_a
    n_samples = max(1, min(n_samples, max(1, int(duration / 1e-12))))
    rel_times = duration * np.arange(1, n_samples + 1) / n_samples
    jx1 = jx_offdiag(basis)
    signs = basis.parity_signs()
    jx = np.empty(n_samples)
    norm_dev = np.empty(n_samples)
    parity = np.empty(n_samples)
    chunk = 256
    for lo in range(0, n_samples, chunk):
        ts = rel_times[lo:lo + chunk]
        amps = np.zeros((basis.dim, len(ts)), dtype=complex)
        for name, s in dec.sectors.items():
            phases = np.exp(-1j * np.outer(s.eigenvalues, ts))
            amps[s.members] = s.vectors @ (coeffs[name][:, None] * phases)
        jx[lo:lo + chunk] = 2.0 * np.sum(
            jx1[:, None] * np.real(np.conj(amps[:-1]) * amps[1:]), axis=0)
        p = np.abs(amps) ** 2
        norm_dev[lo:lo + chunk] = np.abs(np.sqrt(p.sum(axis=0)) - 1.0)
        parity[lo:lo + chunk] = np.sum(signs[:, None] * p, axis=0)
    final = dec.synthesize({name: coeffs[name] * np.exp(-1j * s.eigenvalues * duration)
                            for name, s in dec.sectors.items()})
    times = t_a + rel_times
    return Trajectory(window=(t_a, t_b), times=times,
                      lambdas=np.full(n_samples, lam), jx=jx,
                      norm_dev=norm_dev, parity=parity,
                      final_state=_unchecked_state(basis, final))


BOUNDARY_NAMES = ("initial", "relaxed0", "post_forward", "relaxed1",
                  "post_backward", "final")


@dataclass(frozen=True)
class CycleRecord:
    """States at segment boundaries plus streamed observables per segment."""

    schedule: QuenchSchedule
    config: PropagationConfig
    boundary_states: dict[str, StateVector]
    segments: dict[str, Trajectory]

    def max_norm_dev(self) -> float:
        return max(t.max_norm_dev() for t in self.segments.values())

    def parity_drift(self) -> float:
        p0 = None
        worst = 0.0
        for name in SEGMENT_NAMES:
            tr = self.segments[name]
            if len(tr.parity) == 0:
                continue
            if p0 is None:
                p0 = tr.parity[0]
            worst = max(worst, float(np.max(np.abs(tr.parity - p0))))
        return worst


def run_cycle(initial: StateVector, schedule: QuenchSchedule,
              config: PropagationConfig, cache: DecompositionCache | None = None,
              plateau_samples: int = 2048) -> CycleRecord:
    """Run the closed five-segment cycle.

    Relaxation plateaus use the cached decomposition for exact phase
    rotation; ramps use the configured stepper.
    """
    if cache is None:
        cache = DecompositionCache()
    basis = initial.basis
    boundary = {"initial": initial}
    segments = {}
    state = initial
    for name, t_a, t_b in schedule.segments():
        if name in ("relax0", "relax2"):
            dec = cache.get(basis, schedule.lambda0)
            traj = _plateau_advance(state, dec, t_a, t_b, schedule.lambda0, plateau_samples)
        elif name == "relax1":
            dec = cache.get(basis, schedule.lambda1)
            traj = _plateau_advance(state, dec, t_a, t_b, schedule.lambda1, plateau_samples)
        else:
            traj = evolve(state, schedule, (t_a, t_b), config)
        segments[name] = traj
        state = traj.final_state
        boundary[BOUNDARY_NAMES[len(segments)]] = state
    return CycleRecord(schedule=schedule, config=config,
                       boundary_states=boundary, segments=segments)
