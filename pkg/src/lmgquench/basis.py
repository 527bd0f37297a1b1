"""Collective-spin algebra in the maximal-spin sector J = N/2.

States live in the |J, m> basis with m ascending from -J to +J; array
index k corresponds to m = k - J.  All operators here are real-symmetric
banded matrices (J_z diagonal, J_x tridiagonal, J_x^2 pentadiagonal),
which is what makes the large-N propagation cheap.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .errors import BasisMismatchError

NORM_TOL = 1e-12


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SpinBasis:
    """The (2J+1)-dimensional |J, m> ladder, m ascending."""

    j: float

    def __post_init__(self):
        two_j = 2 * self.j
        if self.j < 0 or abs(two_j - round(two_j)) > 1e-12:
            raise ValueError(f"j must be a non-negative half-integer, got {self.j}")
        object.__setattr__(self, "j", round(two_j) / 2.0)

    @classmethod
    def for_particles(cls, n: int) -> "SpinBasis":
        """Maximal-spin basis for n two-level atoms (J = n/2)."""
        if n < 1:
            raise ValueError(f"particle count must be >= 1, got {n}")
        return cls(n / 2.0)

    @property
    def dim(self) -> int:
        return int(round(2 * self.j)) + 1

    @property
    def n_particles(self) -> int:
        return int(round(2 * self.j))

    def m_values(self) -> np.ndarray:
        """m = -J ... +J in basis order."""
        return np.arange(self.dim) - self.j

    def parity_signs(self) -> np.ndarray:
        """Diagonal of the parity operator exp(i*pi*(J_z + J)): (-1)^(m+J)."""
        signs = np.ones(self.dim)
        signs[1::2] = -1.0
        return signs


@dataclass(frozen=True)
class StateVector:
    """Normalized amplitudes over |J, m>.

    Creation enforces unit norm to 1e-12.  Norm drift during propagation
    is monitored by the dynamics layer, never silently fixed here.
    """

    basis: SpinBasis
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.shape != (self.basis.dim,):
            raise ValueError(
                f"amplitude vector has shape {amps.shape}, expected ({self.basis.dim},)")
        nrm = np.linalg.norm(amps)
        if abs(nrm - 1.0) > NORM_TOL:
            raise ValueError(f"state norm {nrm!r} deviates from 1 by more than {NORM_TOL}")
        object.__setattr__(self, "amplitudes", _readonly(amps))

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def overlap(self, other: "StateVector") -> complex:
        _check_same_basis(self.basis, other.basis)
        return complex(np.vdot(self.amplitudes, other.amplitudes))


@dataclass(frozen=True)
class CollectiveOperator:
    """Real-symmetric banded operator over a SpinBasis.

    Only the diagonal and the upper off-diagonal bands up to `bandwidth`
    are stored; bandwidth is 0 for J_z, 1 for J_x, 2 for J_x^2 and H.
    """

    basis: SpinBasis
    diag: np.ndarray
    band1: np.ndarray | None = None
    band2: np.ndarray | None = None

    def __post_init__(self):
        n = self.basis.dim
        diag = np.asarray(self.diag, dtype=float)
        if diag.shape != (n,):
            raise ValueError(f"diag must have length {n}")
        object.__setattr__(self, "diag", _readonly(diag))
        for name, off in (("band1", self.band1), ("band2", self.band2)):
            if off is not None:
                off = np.asarray(off, dtype=float)
                want = n - (1 if name == "band1" else 2)
                if off.shape != (max(want, 0),):
                    raise ValueError(f"{name} must have length {want}")
                object.__setattr__(self, name, _readonly(off))

    @property
    def bandwidth(self) -> int:
        if self.band2 is not None:
            return 2
        if self.band1 is not None:
            return 1
        return 0

    def element(self, i: int, j: int) -> float:
        """Matrix element <i|A|j>; zero outside the band by construction."""
        i, j = (int(i), int(j)) if i <= j else (int(j), int(i))
        if i == j:
            return float(self.diag[i])
        if j - i == 1 and self.band1 is not None:
            return float(self.band1[i])
        if j - i == 2 and self.band2 is not None:
            return float(self.band2[i])
        return 0.0

    def __getitem__(self, ij):
        return self.element(*ij)

    def matvec(self, vec: np.ndarray) -> np.ndarray:
        out = self.diag * vec
        if self.band1 is not None:
            out[:-1] += self.band1 * vec[1:]
            out[1:] += self.band1 * vec[:-1]
        if self.band2 is not None:
            out[:-2] += self.band2 * vec[2:]
            out[2:] += self.band2 * vec[:-2]
        return out

    def dense(self) -> np.ndarray:
        a = np.diag(self.diag)
        if self.band1 is not None:
            a += np.diag(self.band1, 1) + np.diag(self.band1, -1)
        if self.band2 is not None:
            a += np.diag(self.band2, 2) + np.diag(self.band2, -2)
        return a

    def spectral_bounds(self) -> tuple[float, float]:
        """Gershgorin bounds (lo, hi) enclosing every eigenvalue."""
        radius = np.zeros(self.basis.dim)
        if self.band1 is not None:
            radius[:-1] += np.abs(self.band1)
            radius[1:] += np.abs(self.band1)
        if self.band2 is not None:
            radius[:-2] += np.abs(self.band2)
            radius[2:] += np.abs(self.band2)
        return float(np.min(self.diag - radius)), float(np.max(self.diag + radius))


def _check_same_basis(a: SpinBasis, b: SpinBasis):
    if a != b:
        raise BasisMismatchError(f"basis mismatch: j={a.j} vs j={b.j}")


def build_jz(basis: SpinBasis) -> CollectiveOperator:
    """J_z: diagonal with entries m."""
    return CollectiveOperator(basis, diag=basis.m_values())


def jx_offdiag(basis: SpinBasis) -> np.ndarray:
    """<m+1|J_x|m> = sqrt(J(J+1) - m(m+1)) / 2 for m = -J ... J-1."""
    j = basis.j
    m = basis.m_values()[:-1]
    return 0.5 * np.sqrt(j * (j + 1) - m * (m + 1))


def build_jx(basis: SpinBasis) -> CollectiveOperator:
    """J_x: tridiagonal ladder operator combination (J+ + J-)/2."""
    return CollectiveOperator(basis, diag=np.zeros(basis.dim), band1=jx_offdiag(basis))


def build_jx2(basis: SpinBasis) -> CollectiveOperator:
    """J_x^2: pentadiagonal, couples m to m and m +/- 2.

    Diagonal (J(J+1) - m^2)/2; second band
    sqrt(J(J+1)-m(m+1)) * sqrt(J(J+1)-(m+1)(m+2)) / 4.
    """
    j = basis.j
    m = basis.m_values()
    diag = (j * (j + 1) - m ** 2) / 2.0
    m2 = m[:-2]
    band2 = 0.25 * np.sqrt(j * (j + 1) - m2 * (m2 + 1)) * np.sqrt(
        j * (j + 1) - (m2 + 1) * (m2 + 2))
    return CollectiveOperator(basis, diag=diag, band1=np.zeros(basis.dim - 1), band2=band2)


def coherent_state(basis: SpinBasis, mu: float) -> StateVector:
    """Spin coherent state |mu>, mu in [-1, 1].

    Amplitudes are proportional to sqrt(C(2J, k)) * mu^k over k = m + J,
    i.e. the atomic coherent state exp(mu J+)|J,-J> normalized.  mu = 0
    gives |J,-J>; mu = +/-1 gives the J_x = +/-J eigenstate; positive mu
    breaks the parity symmetry toward <J_x> > 0.  Evaluated in log space
    so large N does not overflow the binomial coefficients.
    """
    if not -1.0 <= mu <= 1.0:
        raise ValueError(f"mu must lie in [-1, 1], got {mu}")
    n = basis.dim
    amps = np.zeros(n)
    if mu == 0.0:
        amps[0] = 1.0
    else:
        two_j = basis.n_particles
        k = np.arange(n)
        log_mag = 0.5 * (gammaln(two_j + 1) - gammaln(k + 1) - gammaln(two_j - k + 1))
        log_mag = log_mag + k * np.log(abs(mu))
        amps = np.exp(log_mag - log_mag.max())
        if mu < 0:
            amps[1::2] *= -1.0
        amps /= np.linalg.norm(amps)
    return StateVector(basis, amps.astype(complex))


def parity_apply(state: StateVector) -> StateVector:
    """Apply the parity operator Pi = exp(i*pi*(J_z + J)); an involution."""
    return StateVector(state.basis, state.amplitudes * state.basis.parity_signs())


def parity_expectation(state: StateVector) -> float:
    """<Pi> = sum of (-1)^(m+J) |u_m|^2."""
    return float(np.sum(state.basis.parity_signs() * np.abs(state.amplitudes) ** 2))


def expectation(op: CollectiveOperator, state: StateVector,
                imag_tol: float = 1e-10) -> float:
    """<psi|A|psi> for symmetric banded A.

    The imaginary residue is pure roundoff for symmetric A; it is checked
    against `imag_tol` (scaled by the magnitude) as a corruption tripwire.
    """
    _check_same_basis(op.basis, state.basis)
    val = complex(np.vdot(state.amplitudes, op.matvec(state.amplitudes)))
    scale = max(1.0, abs(val))
    if abs(val.imag) > imag_tol * scale:
        raise ArithmeticError(
            f"expectation of symmetric operator has imaginary residue {val.imag:.3e}")
    return float(val.real)
