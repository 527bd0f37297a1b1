"""Measurement distributions, information entropy, dissipated energy.

Distributions are over energy eigenstates |E_i, pi> (labels carry sector
and index) or over J_x eigenvalues; probabilities always come from
squared moduli (or from equilibrium-ensemble blocks, whose PSD structure
keeps them non-negative).  Information entropies use natural logs.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .basis import SpinBasis, StateVector, jx_offdiag
from .errors import BasisMismatchError
from .spectral import SpectralDecomposition

PROB_SUM_TOL = 1e-10


@dataclass(frozen=True)
class Distribution:
    """Probabilities over outcome values of one observable."""

    kind: str                      # "energy" | "jx"
    values: np.ndarray             # outcome eigenvalues
    probabilities: np.ndarray
    sectors: np.ndarray | None = None   # energy only: "even"/"odd" per outcome
    indices: np.ndarray | None = None   # energy only: level index within sector

    def __post_init__(self):
        p = np.asarray(self.probabilities, dtype=float)
        if np.any(p < -1e-12):
            raise ValueError(f"negative probability {p.min():.3e}")
        p = np.clip(p, 0.0, None)
        total = p.sum()
        if abs(total - 1.0) > 1e-6:
            raise ValueError(f"probabilities sum to {total!r}, not 1")
        # divide out the squared norm of the underlying state: propagation is
        # allowed a tiny norm drift, measurement probabilities are not
        object.__setattr__(self, "probabilities", p / total)

    def mean(self) -> float:
        return float(self.values @ self.probabilities)


def _aligned(before: Distribution, after: Distribution):
    if before.kind != after.kind or len(before.values) != len(after.values):
        raise ValueError(
            f"distributions are over different observables: "
            f"{before.kind}[{len(before.values)}] vs {after.kind}[{len(after.values)}]")


@dataclass(frozen=True)
class JxBasis:
    """Eigenbasis of J_x in the m-basis (computed once per N, cached)."""

    basis: SpinBasis
    eigenvalues: np.ndarray
    vectors: np.ndarray  # columns


_jx_cache: dict[int, JxBasis] = {}
_jx_lock = threading.Lock()


def jx_eigenbasis(basis: SpinBasis) -> JxBasis:
    key = basis.n_particles
    with _jx_lock:
        hit = _jx_cache.get(key)
    if hit is not None:
        return hit
    if basis.dim == 1:
        ev, vec = np.zeros(1), np.ones((1, 1))
    else:
        ev, vec = eigh_tridiagonal(np.zeros(basis.dim), jx_offdiag(basis))
    jb = JxBasis(basis=basis, eigenvalues=ev, vectors=vec)
    with _jx_lock:
        _jx_cache.setdefault(key, jb)
    return jb


def energy_distribution(state: StateVector, dec: SpectralDecomposition) -> Distribution:
    """|C_{i,n}|^2 over all (sector, level) outcomes."""
    if state.basis != dec.basis:
        raise BasisMismatchError("state and decomposition use different bases")
    coeffs = dec.project(state)
    probs, values, sectors, indices = [], [], [], []
    for name in ("even", "odd"):
        s = dec.sectors[name]
        probs.append(np.abs(coeffs[name]) ** 2)
        values.append(s.eigenvalues)
        sectors.append(np.full(s.size, name))
        indices.append(np.arange(s.size))
    return Distribution(kind="energy",
                        values=np.concatenate(values),
                        probabilities=np.concatenate(probs),
                        sectors=np.concatenate(sectors),
                        indices=np.concatenate(indices))


def jx_distribution(state: StateVector, jxbasis: JxBasis) -> Distribution:
    """|K_{j_x}|^2 over the J_x eigenvalues."""
    if state.basis != jxbasis.basis:
        raise BasisMismatchError("state and J_x basis use different bases")
    probs = np.abs(jxbasis.vectors.T @ state.amplitudes) ** 2
    return Distribution(kind="jx", values=jxbasis.eigenvalues.copy(), probabilities=probs)


def shannon_information(dist: Distribution) -> float:
    """I(A) = -sum p log p in nats, with 0 log 0 = 0."""
    p = dist.probabilities[dist.probabilities > 0.0]
    return float(-(p * np.log(p)).sum())


def delta_information(before: Distribution, after: Distribution) -> float:
    """I(after) - I(before) for the same observable."""
    _aligned(before, after)
    return shannon_information(after) - shannon_information(before)


def total_variation(before: Distribution, after: Distribution) -> float:
    """TV distance: half the L1 distance over paired outcomes."""
    _aligned(before, after)
    return 0.5 * float(np.abs(before.probabilities - after.probabilities).sum())


def branch_masses(dist: Distribution) -> tuple[float, float]:
    """Probability mass on the j_x < 0 and j_x > 0 branches."""
    neg = float(dist.probabilities[dist.values < -1e-9].sum())
    pos = float(dist.probabilities[dist.values > 1e-9].sum())
    return neg, pos


@dataclass(frozen=True)
class DissipationResult:
    e_initial: float
    e_final: float
    e_dis: float
    ratio: float  # |e_dis| / e_initial


def _mean_energy(state: StateVector, dec: SpectralDecomposition) -> float:
    coeffs = dec.project(state)
    return float(sum(np.abs(coeffs[name]) ** 2 @ dec.sectors[name].eigenvalues
                     for name in coeffs))


def dissipated_energy(cycle, dec0: SpectralDecomposition) -> DissipationResult:
    """<H(Lambda0)> on the final relaxed state minus on the initial relaxed one."""
    for key in ("relaxed0", "final"):
        if key not in cycle.boundary_states:
            raise ValueError(f"incomplete cycle record: missing state {key!r}")
    e_i = _mean_energy(cycle.boundary_states["relaxed0"], dec0)
    e_f = _mean_energy(cycle.boundary_states["final"], dec0)
    e_dis = e_f - e_i
    return DissipationResult(e_initial=e_i, e_final=e_f, e_dis=e_dis,
                             ratio=abs(e_dis) / abs(e_i))


@dataclass(frozen=True)
class TimeAverage:
    mean: float
    lo: float
    hi: float

    @property
    def band_width(self) -> float:
        return self.hi - self.lo


def time_average(times: np.ndarray, values: np.ndarray,
                 window: tuple[float, float] | None = None) -> TimeAverage:
    """Mean and min/max band of a sampled series over a time window."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if window is not None:
        mask = (times >= window[0]) & (times <= window[1])
        values = values[mask]
    if len(values) == 0:
        raise ValueError("empty window")
    return TimeAverage(mean=float(values.mean()),
                       lo=float(values.min()), hi=float(values.max()))


# ---------------------------------------------------------------------------
# Equilibrium-ensemble (time-averaged) observables
# ---------------------------------------------------------------------------

def _jx_cross_element(dec: SpectralDecomposition, basis: SpinBasis,
                      ie: int, io: int) -> float:
    """<E_ie,even| J_x |E_io,odd> via the m-basis band."""
    off1 = jx_offdiag(basis)
    fe = dec.vector("even", ie)
    fo = dec.vector("odd", io)
    return float(np.sum(off1 * (fe[:-1] * fo[1:] + fe[1:] * fo[:-1])))


def equilibrium_jx_expectation(ens, dec: SpectralDecomposition) -> float:
    """tr(rho_eq J_x): only the degenerate-doublet coherences contribute
    (diagonal terms vanish because J_x is parity-odd)."""
    val = 0.0
    for block in ens.blocks:
        if block.coherence is not None:
            (se, ie), (so, io) = block.levels
            val += 2.0 * block.coherence.real * _jx_cross_element(dec, dec.basis, ie, io)
    return val


def equilibrium_jx_distribution(ens, dec: SpectralDecomposition,
                                jxbasis: JxBasis) -> Distribution:
    """Time-averaged J_x distribution tr(rho_eq P_jx)."""
    se, so = dec.sectors["even"], dec.sectors["odd"]
    fe = jxbasis.vectors[se.members].T @ se.vectors  # (jx, even level)
    fo = jxbasis.vectors[so.members].T @ so.vectors
    probs = np.zeros(dec.basis.dim)
    for block in ens.blocks:
        if block.coherence is not None:
            (_, ie), (_, io) = block.levels
            pe, po = block.populations
            probs += pe * fe[:, ie] ** 2 + po * fo[:, io] ** 2
            probs += 2.0 * block.coherence.real * fe[:, ie] * fo[:, io]
        else:
            ((sector, i),) = block.levels
            f = fe if sector == "even" else fo
            probs += block.populations[0] * f[:, i] ** 2
    return Distribution(kind="jx", values=jxbasis.eigenvalues.copy(), probabilities=probs)
