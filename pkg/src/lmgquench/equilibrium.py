"""Time-averaged (diagonal) equilibrium ensembles and their entropy.

rho_eq is the infinite-time average of |psi(t)><psi(t)| at fixed Lambda:
cross terms between non-degenerate levels average to zero, while the
coherence inside a degenerate parity doublet is a constant of motion and
survives.  The ensemble is stored block-sparse: 1x1 population blocks
plus 2x2 blocks (populations + coherence) on doublets whose splitting is
below the degeneracy tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .basis import StateVector
from .errors import BasisMismatchError
from .spectral import HamiltonianParams, SpectralDecomposition, assemble_hamiltonian

DEFAULT_TOL_RELATIVE = 1e-8
ORACLE_DIM_GUARD = 200


@dataclass(frozen=True)
class EnsembleBlock:
    """1x1 or 2x2 principal block of rho_eq in the energy eigenbasis."""

    levels: tuple[tuple[str, int], ...]   # ((sector, index),) or both doublet members
    populations: tuple[float, ...]
    coherence: complex | None = None      # c_even * conj(c_odd) for 2x2 blocks

    def eigenvalues(self) -> tuple[float, ...]:
        if self.coherence is None:
            return (self.populations[0],)
        a, b = self.populations
        h = 0.5 * (a + b)
        r = np.hypot(0.5 * (a - b), abs(self.coherence))
        return (h + r, max(h - r, 0.0))

    def entropy(self) -> float:
        return float(-sum(lam * np.log(lam) for lam in self.eigenvalues() if lam > 0.0))


@dataclass(frozen=True)
class EquilibriumEnsemble:
    lam: float
    tolerance: float
    blocks: tuple[EnsembleBlock, ...]

    @property
    def trace(self) -> float:
        return float(sum(sum(b.populations) for b in self.blocks))

    def n_coherent_blocks(self) -> int:
        return sum(1 for b in self.blocks if b.coherence is not None)

    def coherent_population(self) -> float:
        return float(sum(sum(b.populations) for b in self.blocks
                         if b.coherence is not None))


def default_tolerance(dec: SpectralDecomposition) -> float:
    """Splittings below 1e-8 of the spectral range count as degenerate."""
    return DEFAULT_TOL_RELATIVE * dec.spectral_range()


def build_equilibrium(state: StateVector, dec: SpectralDecomposition,
                      tolerance: float | None = None) -> EquilibriumEnsemble:
    """Infinite-time average of |psi(t)><psi(t)| under H(Lambda)."""
    if state.basis != dec.basis:
        raise BasisMismatchError("state and decomposition use different bases")
    if tolerance is None:
        tolerance = default_tolerance(dec)
    if tolerance < 0:
        raise ValueError(f"degeneracy tolerance must be >= 0, got {tolerance}")
    coeffs = dec.project(state)
    ce, co = coeffs["even"], coeffs["odd"]
    used = {"even": np.zeros(len(ce), bool), "odd": np.zeros(len(co), bool)}
    blocks = []
    for pair in dec.pairs:
        ie, io = pair.index_even, pair.index_odd
        used["even"][ie] = used["odd"][io] = True
        pe, po = float(abs(ce[ie]) ** 2), float(abs(co[io]) ** 2)
        if pair.above_critical and pair.splitting <= tolerance:
            blocks.append(EnsembleBlock(
                levels=(("even", ie), ("odd", io)),
                populations=(pe, po),
                coherence=complex(ce[ie] * np.conj(co[io]))))
        else:
            blocks.append(EnsembleBlock(levels=(("even", ie),), populations=(pe,)))
            blocks.append(EnsembleBlock(levels=(("odd", io),), populations=(po,)))
    for sector, c in (("even", ce), ("odd", co)):
        for i in np.nonzero(~used[sector])[0]:
            blocks.append(EnsembleBlock(levels=((sector, int(i)),),
                                        populations=(float(abs(c[i]) ** 2),)))
    return EquilibriumEnsemble(lam=dec.lam, tolerance=tolerance, blocks=tuple(blocks))


def von_neumann_entropy(ens: EquilibriumEnsemble) -> float:
    """S = -tr(rho_eq log rho_eq) in nats, block by block."""
    return float(sum(b.entropy() for b in ens.blocks))


def delta_entropy(state_at_lam0: StateVector, state_at_lam1: StateVector,
                  dec0: SpectralDecomposition, dec1: SpectralDecomposition,
                  tolerance: float | None = None) -> float:
    """S(Lambda1) - S(Lambda0): entropy gained over the forward process."""
    s0 = von_neumann_entropy(build_equilibrium(state_at_lam0, dec0, tolerance))
    s1 = von_neumann_entropy(build_equilibrium(state_at_lam1, dec1, tolerance))
    return s1 - s0


def ensemble_dense(ens: EquilibriumEnsemble, dec: SpectralDecomposition) -> np.ndarray:
    """Materialize rho_eq in the m-basis (small N only)."""
    n = dec.basis.dim
    if n > ORACLE_DIM_GUARD:
        raise ValueError(f"dense ensemble materialization guarded to dim <= {ORACLE_DIM_GUARD}")
    rho = np.zeros((n, n), dtype=complex)
    for block in ens.blocks:
        vecs = [dec.vector(sector, i) for sector, i in block.levels]
        for v, p in zip(vecs, block.populations):
            rho += p * np.outer(v, v)
        if block.coherence is not None:
            w = block.coherence
            rho += w * np.outer(vecs[0], vecs[1]) + np.conj(w) * np.outer(vecs[1], vecs[0])
    return rho


def finite_time_average_oracle(state: StateVector, params: HamiltonianParams,
                               total_time: float, dt: float) -> np.ndarray:
    """(1/T) sum_t |psi(t)><psi(t)| dt by brute-force dense evolution.

    Validation oracle for build_equilibrium: uses a dense matrix
    exponential stepper, independent of the banded/sector machinery.
    """
    n = state.basis.dim
    if n > ORACLE_DIM_GUARD:
        raise ValueError(f"oracle guarded to dim <= {ORACLE_DIM_GUARD}")
    if total_time <= 0 or dt <= 0:
        raise ValueError("total_time and dt must be positive")
    h = assemble_hamiltonian(params).dense()
    u_dt = expm(-1j * h * dt)
    n_steps = max(1, int(round(total_time / dt)))
    psi = np.asarray(state.amplitudes, dtype=complex)
    rho = np.zeros((n, n), dtype=complex)
    for _ in range(n_steps):
        rho += np.outer(psi, np.conj(psi))
        psi = u_dt @ psi
    return rho / n_steps


def tolerance_sensitivity(state: StateVector, dec: SpectralDecomposition,
                          tolerances) -> list[tuple[float, float]]:
    """Diagnostic sweep: entropy of rho_eq as the degeneracy tolerance varies."""
    return [(float(tol), von_neumann_entropy(build_equilibrium(state, dec, tol)))
            for tol in tolerances]
