"""Distributions, Shannon information, dissipated energy, time averages."""

import numpy as np
import pytest

from lmgquench import (
    Distribution,
    HamiltonianParams,
    PropagationConfig,
    QuenchSchedule,
    SpinBasis,
    StateVector,
    build_jx,
    coherent_state,
    delta_information,
    dissipated_energy,
    eigensolve,
    energy_distribution,
    expectation,
    jx_distribution,
    jx_eigenbasis,
    parity_apply,
    run_cycle,
    shannon_information,
    time_average,
    total_variation,
)
from lmgquench.observables import branch_masses
from conftest import random_state_amps

LOG2 = np.log(2.0)


def uniform_dist(k):
    return Distribution(kind="jx", values=np.arange(k, dtype=float),
                        probabilities=np.full(k, 1.0 / k))


def test_distribution_validation():
    with pytest.raises(ValueError):
        Distribution(kind="jx", values=np.arange(3.0),
                     probabilities=np.array([0.5, 0.6, 0.2]))
    with pytest.raises(ValueError):
        Distribution(kind="jx", values=np.arange(2.0),
                     probabilities=np.array([1.2, -0.2]))
    d = Distribution(kind="jx", values=np.arange(2.0),
                     probabilities=np.array([0.5, 0.5 - 1e-9]))
    assert d.probabilities.sum() == pytest.approx(1.0, abs=1e-15)


def test_jx_eigenbasis_cached_and_orthonormal():
    basis = SpinBasis.for_particles(30)
    jb = jx_eigenbasis(basis)
    assert jx_eigenbasis(basis) is jb
    gram = jb.vectors.T @ jb.vectors
    assert np.max(np.abs(gram - np.eye(basis.dim))) < 1e-10
    assert np.allclose(jb.eigenvalues, np.arange(-15, 16), atol=1e-9)


def test_energy_distribution_eigenstate_is_delta(cache):
    basis = SpinBasis.for_particles(14)
    dec = eigensolve(HamiltonianParams(basis, 2.2))
    state = StateVector(basis, dec.vector("odd", 3).astype(complex))
    dist = energy_distribution(state, dec)
    assert shannon_information(dist) < 1e-12
    top = np.argmax(dist.probabilities)
    assert dist.sectors[top] == "odd" and dist.indices[top] == 3
    assert dist.probabilities[top] == pytest.approx(1.0)


def test_energy_distribution_parity_invariance():
    basis = SpinBasis.for_particles(16)
    dec = eigensolve(HamiltonianParams(basis, 3.0))
    plus = energy_distribution(coherent_state(basis, 0.5), dec)
    minus = energy_distribution(coherent_state(basis, -0.5), dec)
    assert np.max(np.abs(plus.probabilities - minus.probabilities)) < 1e-12


def test_energy_distribution_frozen_j1():
    # dense 3x3 oracle: |mu=1/2> projected on H(Lambda=2) eigenstates
    dec = eigensolve(HamiltonianParams(SpinBasis(1.0), 2.0))
    dist = energy_distribution(coherent_state(SpinBasis(1.0), 0.5), dec)
    by_label = {(s, i): p for s, i, p in
                zip(dist.sectors, dist.indices, dist.probabilities)}
    assert by_label[("even", 0)] == pytest.approx(1.17667420032e-04, rel=1e-9)
    assert by_label[("even", 1)] == pytest.approx(0.6798823325799679, rel=1e-12)
    assert by_label[("odd", 0)] == pytest.approx(0.32, rel=1e-12)


def test_jx_distribution_properties(rng):
    basis = SpinBasis.for_particles(20)
    jxb = jx_eigenbasis(basis)
    # |J,-J> is a J_z eigenstate: its jx distribution is symmetric
    amps = np.zeros(basis.dim, complex)
    amps[0] = 1.0
    lowest = StateVector(basis, amps)
    dist = jx_distribution(lowest, jxb)
    assert np.max(np.abs(dist.probabilities - dist.probabilities[::-1])) < 1e-12
    assert abs(dist.mean()) < 1e-10

    # distribution mean equals the operator expectation
    for mu in (0.5, -0.3):
        state = coherent_state(basis, mu)
        dist = jx_distribution(state, jxb)
        assert dist.mean() == pytest.approx(expectation(build_jx(basis), state), abs=1e-9)

    # parity mirrors jx -> -jx
    state = StateVector(basis, random_state_amps(rng, basis.dim))
    d1 = jx_distribution(state, jxb)
    d2 = jx_distribution(parity_apply(state), jxb)
    assert np.max(np.abs(d1.probabilities - d2.probabilities[::-1])) < 1e-12


def test_shannon_information_values():
    assert shannon_information(uniform_dist(1)) == 0.0
    assert shannon_information(uniform_dist(2)) == pytest.approx(LOG2)
    for k in (3, 7, 64):
        assert shannon_information(uniform_dist(k)) == pytest.approx(np.log(k))
    # invariant under outcome relabeling
    p = np.array([0.1, 0.2, 0.3, 0.4])
    d1 = Distribution(kind="jx", values=np.arange(4.0), probabilities=p)
    d2 = Distribution(kind="jx", values=np.arange(4.0)[::-1].copy(), probabilities=p)
    assert shannon_information(d1) == shannon_information(d2)


def test_delta_information_and_tv():
    a, b = uniform_dist(4), uniform_dist(4)
    assert delta_information(a, b) == 0.0
    assert total_variation(a, b) == 0.0
    c = Distribution(kind="jx", values=np.arange(4.0),
                     probabilities=np.array([1.0, 0.0, 0.0, 0.0]))
    assert delta_information(c, a) == pytest.approx(np.log(4))
    assert total_variation(a, c) == pytest.approx(0.75)
    with pytest.raises(ValueError):
        delta_information(a, uniform_dist(5))
    energy_like = Distribution(kind="energy", values=np.arange(4.0),
                               probabilities=np.full(4, 0.25))
    with pytest.raises(ValueError):
        delta_information(a, energy_like)


def test_branch_masses():
    d = Distribution(kind="jx", values=np.array([-1.0, 0.0, 2.0]),
                     probabilities=np.array([0.2, 0.3, 0.5]))
    neg, pos = branch_masses(d)
    assert neg == pytest.approx(0.2) and pos == pytest.approx(0.5)


def test_null_quench_dissipates_nothing(cache):
    basis = SpinBasis.for_particles(16)
    sched = QuenchSchedule(2.5, 2.5, t_r=3.0, tau_q=1.0)
    cfg = PropagationConfig(step=1e-3)
    rec = run_cycle(coherent_state(basis, 0.5), sched, cfg, cache, plateau_samples=16)
    dec = cache.get(basis, 2.5)
    res = dissipated_energy(rec, dec)
    assert abs(res.e_dis) < 1e-9
    assert res.ratio < 1e-9
    e0 = energy_distribution(rec.boundary_states["relaxed0"], dec)
    ef = energy_distribution(rec.boundary_states["final"], dec)
    assert total_variation(e0, ef) < 1e-9


def test_dissipated_energy_requires_complete_cycle(cache):
    basis = SpinBasis.for_particles(8)
    dec = eigensolve(HamiltonianParams(basis, 2.0))

    class Partial:
        boundary_states = {"relaxed0": coherent_state(basis, 0.2)}

    with pytest.raises(ValueError):
        dissipated_energy(Partial(), dec)


def test_time_average():
    ta = time_average(np.arange(5.0), np.full(5, 3.25))
    assert ta.mean == 3.25 and ta.band_width == 0.0
    # sine over whole periods averages to ~0
    t = np.linspace(0, 4 * np.pi, 4096, endpoint=False)
    ta = time_average(t, np.sin(t))
    assert abs(ta.mean) < 1e-12
    assert ta.lo == pytest.approx(-1.0, abs=1e-5)
    assert ta.hi == pytest.approx(1.0, abs=1e-5)
    ta = time_average(t, np.sin(t), window=(0.0, 2 * np.pi))
    assert abs(ta.mean) < 1e-3
    with pytest.raises(ValueError):
        time_average(t, np.sin(t), window=(100.0, 101.0))


def test_energy_populations_constant_on_plateau(cache):
    # eigenbasis populations are constants of motion at fixed Lambda
    basis = SpinBasis.for_particles(18)
    sched = QuenchSchedule(3.0, 3.0, t_r=2.0, tau_q=0.5)
    state = coherent_state(basis, 0.6)
    from lmgquench import evolve
    traj = evolve(state, sched, (0.0, 1.7), PropagationConfig(step=1e-3))
    dec = cache.get(basis, 3.0)
    before = energy_distribution(state, dec)
    after = energy_distribution(traj.final_state, dec)
    assert np.max(np.abs(before.probabilities - after.probabilities)) < 1e-9
