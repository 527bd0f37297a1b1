"""Spin algebra: operators, coherent states, parity."""

import numpy as np
import pytest

from lmgquench import (
    BasisMismatchError,
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
from conftest import random_state_amps

SQRT2_INV = 0.7071067811865476


def test_basis_dimensions():
    assert SpinBasis(1.0).dim == 3
    assert SpinBasis(0.5).dim == 2
    assert SpinBasis.for_particles(500).dim == 501
    assert SpinBasis.for_particles(20).j == 10.0
    with pytest.raises(ValueError):
        SpinBasis(0.3)
    with pytest.raises(ValueError):
        SpinBasis(-1.0)


def test_jz_examples():
    assert np.array_equal(build_jz(SpinBasis(1.0)).diag, [-1.0, 0.0, 1.0])
    assert np.array_equal(build_jz(SpinBasis(0.5)).diag, [-0.5, 0.5])
    jz = build_jz(SpinBasis(250.0))
    assert jz.diag[0] == -250.0 and jz.diag[-1] == 250.0
    assert abs(jz.diag.sum()) == 0.0  # symmetric spectrum, trace 0


def test_jx_matrix_elements():
    assert build_jx(SpinBasis(0.5)).band1 == pytest.approx([0.5])
    band = build_jx(SpinBasis(1.0)).band1
    assert band == pytest.approx([SQRT2_INV, SQRT2_INV], abs=1e-15)


@pytest.mark.parametrize("j", [0.5, 1.0, 2.5, 10.0, 50.0])
def test_jx_spectrum_is_jz_spectrum(j):
    # rotation equivalence: eigenvalues {-J..J} with unit spacing
    evals = np.linalg.eigvalsh(build_jx(SpinBasis(j)).dense())
    assert np.allclose(evals, np.arange(-j, j + 1), atol=1e-9)


@pytest.mark.parametrize("j", [0.5, 1.0, 3.5, 12.0])
def test_jx2_is_square_of_jx(j):
    basis = SpinBasis(j)
    direct = build_jx2(basis).dense()
    squared = build_jx(basis).dense() @ build_jx(basis).dense()
    assert np.max(np.abs(direct - squared)) < 1e-12


def test_jx2_frozen_values():
    jx2 = build_jx2(SpinBasis(1.0))
    assert jx2.diag == pytest.approx([0.5, 1.0, 0.5])
    # corner coupling <-1|Jx^2|+1>, dense matrix-square oracle value 1/2
    assert jx2.element(0, 2) == pytest.approx(0.5)
    assert jx2.element(2, 0) == pytest.approx(0.5)
    assert jx2.element(0, 1) == 0.0


def test_operator_banding_and_symmetry(rng):
    basis = SpinBasis(6.0)
    for op in (build_jz(basis), build_jx(basis), build_jx2(basis)):
        dense = op.dense()
        assert np.array_equal(dense, dense.T)
        b = op.bandwidth
        for i in range(basis.dim):
            for jj in range(basis.dim):
                if abs(i - jj) > b:
                    assert dense[i, jj] == 0.0
                assert op[i, jj] == dense[i, jj]
        vec = random_state_amps(rng, basis.dim)
        assert np.allclose(op.matvec(vec), dense @ vec, atol=1e-12)


def test_operator_arrays_immutable():
    op = build_jx(SpinBasis(2.0))
    with pytest.raises(ValueError):
        op.diag[0] = 5.0
    state = coherent_state(SpinBasis(2.0), 0.3)
    with pytest.raises(ValueError):
        state.amplitudes[0] = 1.0


def test_coherent_state_limits():
    basis = SpinBasis(10.0)
    lowest = coherent_state(basis, 0.0)
    expected = np.zeros(basis.dim)
    expected[0] = 1.0
    assert np.array_equal(lowest.amplitudes, expected)  # |J,-J>
    # mu = +/-1 are the extremal J_x eigenstates
    jx = build_jx(basis)
    for mu in (1.0, -1.0):
        state = coherent_state(basis, mu)
        assert expectation(jx, state) == pytest.approx(mu * basis.j, abs=1e-10)
        jx_var = np.vdot(jx.matvec(state.amplitudes), jx.matvec(state.amplitudes)).real
        assert jx_var == pytest.approx(basis.j ** 2, abs=1e-9)


def test_coherent_state_frozen_j1():
    # dense 3x3 oracle: amplitudes prop to (1, sqrt(2)/2, 1/4), norm 5/4
    state = coherent_state(SpinBasis(1.0), 0.5)
    assert state.amplitudes.real == pytest.approx([0.8, 0.5656854249492380, 0.2], abs=1e-15)
    assert expectation(build_jx(SpinBasis(1.0)), state) == pytest.approx(0.8, abs=1e-12)


def test_coherent_state_oracle_small_j(rng):
    # independent oracle: explicit binomial amplitudes and dense <Jx>
    from math import comb

    for j, mu in ((1.0, 0.5), (2.5, -0.7), (4.0, 0.25)):
        basis = SpinBasis(j)
        two_j = int(2 * j)
        raw = np.array([np.sqrt(comb(two_j, k)) * mu ** k for k in range(two_j + 1)])
        raw = raw / np.linalg.norm(raw)
        state = coherent_state(basis, mu)
        assert np.allclose(state.amplitudes.real, raw, atol=1e-12)
        want = raw @ build_jx(basis).dense() @ raw
        assert expectation(build_jx(basis), state) == pytest.approx(want, abs=1e-12)
        # closed form: <Jx> = 2 mu J / (1 + mu^2)
        assert want == pytest.approx(2 * mu * j / (1 + mu * mu), abs=1e-12)


@pytest.mark.parametrize("j,mu", [(0.5, 0.9), (10.0, 0.5), (250.0, 0.5), (50.0, -0.31)])
def test_coherent_state_norm_and_domain(j, mu):
    state = coherent_state(SpinBasis(j), mu)
    assert abs(state.norm() - 1.0) < 1e-12
    if mu >= 0:
        assert np.all(state.amplitudes.real >= 0.0)
    with pytest.raises(ValueError):
        coherent_state(SpinBasis(j), 1.0 + 1e-9)
    with pytest.raises(ValueError):
        coherent_state(SpinBasis(j), -1.2)


def test_parity_involution_and_mu_flip(rng):
    basis = SpinBasis(7.5)
    state = StateVector(basis, random_state_amps(rng, basis.dim))
    twice = parity_apply(parity_apply(state))
    assert np.array_equal(twice.amplitudes, state.amplitudes)
    for mu in (0.5, 0.8, 0.0):
        flipped = parity_apply(coherent_state(basis, mu))
        assert np.array_equal(flipped.amplitudes, coherent_state(basis, -mu).amplitudes)


def test_parity_flips_jx_sign(rng):
    basis = SpinBasis(9.0)
    jx = build_jx(basis)
    for _ in range(5):
        state = StateVector(basis, random_state_amps(rng, basis.dim))
        assert expectation(jx, state) == pytest.approx(
            -expectation(jx, parity_apply(state)), abs=1e-10)


def test_expectation_basics(rng):
    basis = SpinBasis(10.0)
    lowest = coherent_state(basis, 0.0)
    assert expectation(build_jz(basis), lowest) == pytest.approx(-10.0, abs=1e-12)
    # definite-parity states have <Jx> = 0
    amps = random_state_amps(rng, basis.dim)
    amps[1::2] = 0.0  # even-parity class only
    state = StateVector(basis, amps / np.linalg.norm(amps))
    assert abs(expectation(build_jx(basis), state)) < 1e-12
    assert parity_expectation(state) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(BasisMismatchError):
        expectation(build_jx(SpinBasis(2.0)), lowest)


def test_state_norm_enforced():
    basis = SpinBasis(1.0)
    with pytest.raises(ValueError):
        StateVector(basis, np.array([1.0, 1.0, 0.0]))
    with pytest.raises(ValueError):
        StateVector(basis, np.array([1.0, 0.0]))
