"""Hamiltonian assembly, parity-resolved diagonalization, ESQPT line, gap scan.

H(Lambda) = J_x^2 - (2J/Lambda) J_z in chi = 1 units.  H only couples
m <-> m, m +/- 2, so the even and odd parity classes (k = m + J even/odd)
decouple exactly; inside one class the compressed matrix is symmetric
tridiagonal, which LAPACK diagonalizes fast and to high accuracy.

Doublet bookkeeping: above the critical energy E_c = 2 J^2 / Lambda the
spectrum organizes into quasi-degenerate opposite-parity pairs.  Pairs are
matched from the top of the spectrum downward (the separatrix may leave
one unpaired orphan just above E_c); below E_c levels are matched from the
bottom up and are never degenerate.
"""

from __future__ import annotations

import os
import struct
import tempfile
import threading
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .basis import CollectiveOperator, SpinBasis, StateVector, build_jx2
from .errors import ConfigError, EigensolveError

RESIDUAL_TOL = 1e-8
SECTORS = ("even", "odd")


@dataclass(frozen=True)
class HamiltonianParams:
    """Basis plus the control parameter Lambda (> 0)."""

    basis: SpinBasis
    lam: float

    def __post_init__(self):
        if not self.lam > 0:
            raise ConfigError(f"Lambda must be positive, got {self.lam}")

    @property
    def coupling(self) -> float:
        """Coefficient of -J_z: 2J/Lambda."""
        return 2.0 * self.basis.j / self.lam


def critical_energy(params: HamiltonianParams) -> float:
    """ESQPT critical energy E_c = 2 J^2 / Lambda."""
    return 2.0 * params.basis.j ** 2 / params.lam


def assemble_hamiltonian(params: HamiltonianParams) -> CollectiveOperator:
    """H(Lambda) = J_x^2 - (2J/Lambda) J_z as a pentadiagonal operator."""
    jx2 = build_jx2(params.basis)
    diag = jx2.diag - params.coupling * params.basis.m_values()
    return CollectiveOperator(params.basis, diag=diag, band1=jx2.band1, band2=jx2.band2)


@dataclass(frozen=True)
class TridiagonalBlock:
    """One parity block of a pentadiagonal operator, compressed to tridiagonal."""

    diag: np.ndarray
    off: np.ndarray
    members: np.ndarray  # m-basis indices of this block's rows

    @property
    def size(self) -> int:
        return len(self.diag)

    def dense(self) -> np.ndarray:
        return (np.diag(self.diag) + np.diag(self.off, 1) + np.diag(self.off, -1))


def parity_blocks(op: CollectiveOperator) -> tuple[TridiagonalBlock, TridiagonalBlock]:
    """Split an m <-> m+/-2 coupled operator into its even/odd parity blocks."""
    if op.band1 is not None and np.any(op.band1 != 0.0):
        raise ValueError("operator couples m to m+/-1 and is not parity-block-diagonal")
    n = op.basis.dim
    band2 = op.band2 if op.band2 is not None else np.zeros(max(n - 2, 0))
    blocks = []
    for start in (0, 1):
        members = np.arange(start, n, 2)
        blocks.append(TridiagonalBlock(
            diag=op.diag[members].copy(),
            off=band2[start::2].copy(),
            members=members,
        ))
    return blocks[0], blocks[1]


@dataclass(frozen=True)
class DoubletPair:
    """Matched even/odd levels with their splitting |E_even - E_odd|."""

    index_even: int
    index_odd: int
    splitting: float
    mean_energy: float
    above_critical: bool


@dataclass(frozen=True)
class Sector:
    """Eigen-data of one parity block (ascending eigenvalues)."""

    name: str
    eigenvalues: np.ndarray
    vectors: np.ndarray       # compact (block_size x block_size), columns
    members: np.ndarray       # m-basis indices

    @property
    def size(self) -> int:
        return len(self.eigenvalues)


@dataclass(frozen=True)
class SpectralDecomposition:
    basis: SpinBasis
    lam: float
    sectors: dict[str, Sector]
    pairs: tuple[DoubletPair, ...]

    @property
    def critical_energy(self) -> float:
        return 2.0 * self.basis.j ** 2 / self.lam

    def all_eigenvalues(self) -> np.ndarray:
        """Eigenvalues of both sectors concatenated (even first)."""
        return np.concatenate([self.sectors["even"].eigenvalues,
                               self.sectors["odd"].eigenvalues])

    def spectral_range(self) -> float:
        ev = self.all_eigenvalues()
        return float(ev.max() - ev.min()) if len(ev) else 0.0

    def vector(self, sector: str, i: int) -> np.ndarray:
        """Eigenvector in the full m-basis; opposite-class entries exactly zero."""
        s = self.sectors[sector]
        full = np.zeros(self.basis.dim)
        full[s.members] = s.vectors[:, i]
        return full

    def project(self, state: StateVector | np.ndarray) -> dict[str, np.ndarray]:
        """Coefficients <E_i,sector|psi> per sector."""
        amps = state.amplitudes if isinstance(state, StateVector) else np.asarray(state)
        return {name: s.vectors.T @ amps[s.members] for name, s in self.sectors.items()}

    def synthesize(self, coeffs: dict[str, np.ndarray]) -> np.ndarray:
        """Inverse of project: m-basis amplitudes from sector coefficients."""
        amps = np.zeros(self.basis.dim, dtype=complex)
        for name, s in self.sectors.items():
            amps[s.members] = s.vectors @ coeffs[name]
        return amps


def _pair_doublets(ev_even: np.ndarray, ev_odd: np.ndarray,
                   e_c: float) -> tuple[DoubletPair, ...]:
    above_e = np.where(ev_even > e_c)[0]
    above_o = np.where(ev_odd > e_c)[0]
    below_e = np.where(ev_even <= e_c)[0]
    below_o = np.where(ev_odd <= e_c)[0]
    pairs = []
    for t in range(min(len(above_e), len(above_o))):
        ie, io = int(above_e[-1 - t]), int(above_o[-1 - t])
        pairs.append(DoubletPair(ie, io, abs(ev_even[ie] - ev_odd[io]),
                                 0.5 * (ev_even[ie] + ev_odd[io]), True))
    for t in range(min(len(below_e), len(below_o))):
        ie, io = int(below_e[t]), int(below_o[t])
        pairs.append(DoubletPair(ie, io, abs(ev_even[ie] - ev_odd[io]),
                                 0.5 * (ev_even[ie] + ev_odd[io]), False))
    pairs.sort(key=lambda p: p.mean_energy)
    return tuple(pairs)


def _solve_block(block: TridiagonalBlock, name: str):
    if block.size == 0:
        return np.zeros(0), np.zeros((0, 0))
    if block.size == 1:
        return block.diag.copy(), np.ones((1, 1))
    try:
        return eigh_tridiagonal(block.diag, block.off)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure path
        raise EigensolveError(f"tridiagonal eigensolve failed in {name} sector: {exc}",
                              sector=name) from exc


def eigensolve(params: HamiltonianParams, check_residual: bool = True) -> SpectralDecomposition:
    """Full per-sector spectrum of H(Lambda) with doublet pairing."""
    h = assemble_hamiltonian(params)
    even_block, odd_block = parity_blocks(h)
    sectors = {}
    for name, block in (("even", even_block), ("odd", odd_block)):
        ev, vec = _solve_block(block, name)
        sectors[name] = Sector(name=name, eigenvalues=ev, vectors=vec, members=block.members)
    dec = SpectralDecomposition(
        basis=params.basis, lam=params.lam, sectors=sectors,
        pairs=_pair_doublets(sectors["even"].eigenvalues, sectors["odd"].eigenvalues,
                             critical_energy(params)),
    )
    if check_residual:
        _validate_residuals(dec, even_block, odd_block)
    return dec


def _validate_residuals(dec: SpectralDecomposition, even_block, odd_block):
    scale = max(abs(b) for s in dec.sectors.values() if s.size
                for b in (s.eigenvalues[0], s.eigenvalues[-1]))
    for name, block in (("even", even_block), ("odd", odd_block)):
        s = dec.sectors[name]
        if s.size == 0:
            continue
        hv = s.vectors * block.diag[:, None]
        if block.size > 1:
            hv[:-1] += block.off[:, None] * s.vectors[1:]
            hv[1:] += block.off[:, None] * s.vectors[:-1]
        res = np.linalg.norm(hv - s.vectors * s.eigenvalues[None, :], axis=0)
        worst = int(np.argmax(res))
        if res[worst] > RESIDUAL_TOL * scale:
            raise EigensolveError(
                f"residual {res[worst]:.3e} exceeds {RESIDUAL_TOL:.0e}*|H| "
                f"in {name} sector at index {worst}", sector=name, index=worst)


# ---------------------------------------------------------------------------
# Gap scan and the system time scale tau_s
# ---------------------------------------------------------------------------

def _sector_tridiags(basis: SpinBasis, lam: float):
    jx2 = build_jx2(basis)
    diag = jx2.diag - (2.0 * basis.j / lam) * basis.m_values()
    return ((diag[0::2], jx2.band2[0::2]), (diag[1::2], jx2.band2[1::2]))


def _sector_eigenvalues(basis: SpinBasis, lam: float, which: int) -> np.ndarray:
    d, o = _sector_tridiags(basis, lam)[which]
    if len(d) < 2:
        return np.asarray(d, dtype=float)
    return eigh_tridiagonal(d, o, eigvals_only=True)


@dataclass(frozen=True)
class GapScanResult:
    """Consecutive same-parity gaps over a Lambda grid and the derived tau_s."""

    lambdas: np.ndarray
    gaps: dict[str, np.ndarray]          # sector -> (grid_points, n_levels-1)
    delta_i: dict[str, np.ndarray]       # sector -> per-level min over the grid
    delta_eff: float
    argmin_lambda: float
    argmin_sector: str
    argmin_index: int                    # gap between levels index-1 and index
    grid_delta_eff: float

    @property
    def tau_s(self) -> float:
        return 1.0 / self.delta_eff

    def min_gap_per_lambda(self, sector: str) -> np.ndarray:
        return self.gaps[sector].min(axis=1)


def gap_scan(basis: SpinBasis, lambda_lo: float, lambda_hi: float,
             grid_points: int = 201, refine: bool = True) -> GapScanResult:
    """Scan epsilon_i(sector, Lambda) = E_i - E_{i-1} and locate Delta_eff.

    Delta_eff = min over sectors, levels and the grid; tau_s = 1/Delta_eff.
    With refine=True a deterministic ternary-search pass around the grid
    argmin tightens the minimum (never increases it).
    """
    if not 0 < lambda_lo < lambda_hi:
        raise ConfigError(f"need 0 < lambda_lo < lambda_hi, got [{lambda_lo}, {lambda_hi}]")
    if grid_points < 2:
        raise ConfigError(f"grid_points must be >= 2, got {grid_points}")
    lambdas = np.linspace(lambda_lo, lambda_hi, grid_points)
    gaps = {}
    best = (np.inf, 0.0, "even", 1, 0)
    for which, sector in enumerate(SECTORS):
        rows = []
        for gi, lam in enumerate(lambdas):
            ev = _sector_eigenvalues(basis, lam, which)
            row = np.diff(ev)
            rows.append(row)
            if len(row):
                i = int(np.argmin(row))
                if row[i] < best[0]:
                    best = (float(row[i]), float(lam), sector, i + 1, gi)
        gaps[sector] = np.asarray(rows)
    grid_delta_eff, arg_lam, arg_sector, arg_index, arg_gi = best
    delta_eff, arg_lam_refined = grid_delta_eff, arg_lam
    if refine and grid_points >= 3:
        lo = lambdas[max(arg_gi - 1, 0)]
        hi = lambdas[min(arg_gi + 1, grid_points - 1)]
        which = SECTORS.index(arg_sector)

        def gap_at(lam):
            ev = _sector_eigenvalues(basis, lam, which)
            return float(ev[arg_index] - ev[arg_index - 1])

        a, b = lo, hi
        for _ in range(60):
            m1 = a + (b - a) / 3.0
            m2 = b - (b - a) / 3.0
            if gap_at(m1) <= gap_at(m2):
                b = m2
            else:
                a = m1
            if b - a < 1e-12 * (lambda_hi - lambda_lo):
                break
        lam_star = 0.5 * (a + b)
        val = gap_at(lam_star)
        if val < delta_eff:
            delta_eff, arg_lam_refined = val, lam_star
    delta_i = {s: (gaps[s].min(axis=0) if gaps[s].size else np.zeros(0)) for s in SECTORS}
    return GapScanResult(
        lambdas=lambdas, gaps=gaps, delta_i=delta_i,
        delta_eff=delta_eff, argmin_lambda=arg_lam_refined,
        argmin_sector=arg_sector, argmin_index=arg_index,
        grid_delta_eff=grid_delta_eff,
    )


# ---------------------------------------------------------------------------
# Decomposition cache (in-memory, optionally backed by versioned disk records)
# ---------------------------------------------------------------------------

_MAGIC = b"LMGSPEC1"
_HEADER = struct.Struct("<8sIIIId")  # magic, version, n_particles, n_even, n_odd, lambda


def lambda_key(lam: float) -> str:
    """Cache key: Lambda rounded to 12 significant digits."""
    return f"{lam:.12g}"


def save_decomposition(path: str, dec: SpectralDecomposition):
    """Versioned binary record: header, then per sector the eigenvalues and
    column-major eigenvectors as little-endian float64."""
    se, so = dec.sectors["even"], dec.sectors["odd"]
    header = _HEADER.pack(_MAGIC, 1, dec.basis.n_particles, se.size, so.size, dec.lam)
    payload = b"".join(
        np.asarray(arr, dtype="<f8").tobytes(order="F")
        for arr in (se.eigenvalues, se.vectors, so.eigenvalues, so.vectors))
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path) or ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(header)
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_decomposition(path: str) -> SpectralDecomposition:
    with open(path, "rb") as fh:
        magic, version, n_particles, n_even, n_odd, lam = _HEADER.unpack(
            fh.read(_HEADER.size))
        if magic != _MAGIC or version != 1:
            raise ValueError(f"not a decomposition cache record: {path}")
        basis = SpinBasis.for_particles(n_particles)

        def read(count, shape):
            arr = np.frombuffer(fh.read(8 * count), dtype="<f8").astype(float)
            return arr.reshape(shape, order="F")

        sectors = {}
        for name, size, start in (("even", n_even, 0), ("odd", n_odd, 1)):
            ev = read(size, (size,))
            vec = read(size * size, (size, size))
            sectors[name] = Sector(name=name, eigenvalues=ev, vectors=vec,
                                   members=np.arange(start, basis.dim, 2))
    params = HamiltonianParams(basis, lam)
    return SpectralDecomposition(
        basis=basis, lam=lam, sectors=sectors,
        pairs=_pair_doublets(sectors["even"].eigenvalues, sectors["odd"].eigenvalues,
                             critical_energy(params)))


class DecompositionCache:
    """Thread-safe cache of decompositions keyed by (N, Lambda@12 digits).

    With a directory configured the records persist across processes; on-disk
    layout is documented in the README.
    """

    def __init__(self, directory: str | None = None):
        self.directory = directory
        self._mem: dict[tuple[int, str], SpectralDecomposition] = {}
        self._lock = threading.Lock()

    def _path(self, n: int, key: str) -> str:
        return os.path.join(self.directory, f"spec_n{n}_lam{key}.bin")

    def get(self, basis: SpinBasis, lam: float) -> SpectralDecomposition:
        key = (basis.n_particles, lambda_key(lam))
        with self._lock:
            hit = self._mem.get(key)
        if hit is not None:
            return hit
        dec = None
        if self.directory is not None:
            path = self._path(*key)
            if os.path.exists(path):
                dec = load_decomposition(path)
        if dec is None:
            dec = eigensolve(HamiltonianParams(basis, lam))
            if self.directory is not None:
                os.makedirs(self.directory, exist_ok=True)
                save_decomposition(self._path(*key), dec)
        with self._lock:
            self._mem.setdefault(key, dec)
        return dec
