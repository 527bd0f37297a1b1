"""Quench cycles in the Lipkin-Meshkov-Glick collective-spin model.

Library layout:

- basis: spin algebra, banded collective operators, coherent states
- spectral: H(Lambda), parity blocks, diagonalization, gap scan, cache
- dynamics: the Lambda(t) schedule and exact unitary propagation
- observables: distributions, information entropy, dissipated energy
- equilibrium: time-averaged ensembles and von Neumann entropy
- experiment / cli: reproducible runs, sweeps, CSV emission
"""

from .basis import (
    CollectiveOperator,
    SpinBasis,
    StateVector,
    build_jx,
    build_jx2,
    build_jz,
    coherent_state,
    expectation,
    parity_apply,
    parity_expectation,
)
from .dynamics import (
    CycleRecord,
    PropagationConfig,
    QuenchSchedule,
    Trajectory,
    evolve,
    run_cycle,
)
from .equilibrium import (
    EquilibriumEnsemble,
    build_equilibrium,
    delta_entropy,
    finite_time_average_oracle,
    von_neumann_entropy,
)
from .errors import (
    BasisMismatchError,
    ConfigError,
    EigensolveError,
    NormDriftError,
    NumericalError,
)
from .observables import (
    Distribution,
    JxBasis,
    branch_masses,
    delta_information,
    dissipated_energy,
    energy_distribution,
    equilibrium_jx_distribution,
    equilibrium_jx_expectation,
    jx_distribution,
    jx_eigenbasis,
    shannon_information,
    time_average,
    total_variation,
)
from .spectral import (
    DecompositionCache,
    GapScanResult,
    HamiltonianParams,
    SpectralDecomposition,
    assemble_hamiltonian,
    critical_energy,
    eigensolve,
    gap_scan,
    parity_blocks,
)

__version__ = "0.1.0"
