"""Numba kernels for banded Chebyshev propagation.

The propagator advances the state through exp(-i K) factors where
K = alpha * J_x^2 - beta * J_z is real-symmetric pentadiagonal.  Each
factor is expanded in Chebyshev polynomials of the spectrally rescaled
K with Bessel-function coefficients computed once per segment (the
rescaling interval is an envelope over the whole segment, so one
coefficient table serves every step).
"""

from __future__ import annotations

import numpy as np
from numba import njit
from scipy.special import jv

COEFF_FLOOR = 1e-17  # drop Chebyshev terms below this magnitude


def chebyshev_coefficients(a: float, b: float) -> np.ndarray:
    """Coefficients c_k with exp(-i K) = sum_k c_k T_k((K - b)/a).

    c_k = (2 - delta_k0) (-i)^k J_k(a) exp(-i b), truncated where the
    Bessel tail falls below COEFF_FLOOR (superexponential decay past
    k ~ a makes the discarded remainder negligible).
    """
    phase = np.exp(-1j * b)
    if a < 1e-14:
        return np.array([phase])
    k_hi = int(np.ceil(a + 30 + 15 * a ** (1.0 / 3.0)))
    ks = np.arange(k_hi + 1)
    bessel = jv(ks, a)
    keep = np.nonzero(np.abs(bessel) > COEFF_FLOOR)[0]
    k_max = int(keep[-1]) if len(keep) else 0
    ks = ks[: k_max + 1]
    coeffs = (2.0 - (ks == 0)) * (-1j) ** ks * bessel[: k_max + 1]
    return coeffs * phase


def exponent_interval(jx2_diag, jx2_off2, m_vals, alpha, beta_lo, beta_hi):
    """Gershgorin interval enclosing spec(alpha*Jx^2 - beta*Jz) for every
    beta in [beta_lo, beta_hi] (the bounds are concave/convex in beta, so
    the envelope over the endpoints is valid)."""
    n = len(jx2_diag)
    radius = np.zeros(n)
    off = np.abs(alpha * jx2_off2)
    radius[:-2] += off
    radius[2:] += off
    lo, hi = np.inf, -np.inf
    for beta in (beta_lo, beta_hi):
        diag = alpha * jx2_diag - beta * m_vals
        lo = min(lo, float(np.min(diag - radius)))
        hi = max(hi, float(np.max(diag + radius)))
    return lo, hi


@njit(cache=True, nogil=True)
def _scaled_matvec(jd, jo, mv, alpha, beta, inv_a, shift, x, out):
    n = x.shape[0]
    for i in range(n):
        v = (alpha * jd[i] - beta * mv[i] - shift) * x[i]
        if i >= 2:
            v += alpha * jo[i - 2] * x[i - 2]
        if i + 2 < n:
            v += alpha * jo[i] * x[i + 2]
        out[i] = v * inv_a


@njit(cache=True, nogil=True)
def _cheb_exp_apply(jd, jo, mv, alpha, beta, inv_a, shift, coeffs,
                    psi, phi0, phi1, phi2, acc):
    n = psi.shape[0]
    ncoef = coeffs.shape[0]
    for i in range(n):
        phi0[i] = psi[i]
        acc[i] = coeffs[0] * psi[i]
    if ncoef == 1:
        for i in range(n):
            psi[i] = acc[i]
        return
    _scaled_matvec(jd, jo, mv, alpha, beta, inv_a, shift, phi0, phi1)
    for i in range(n):
        acc[i] += coeffs[1] * phi1[i]
    for k in range(2, ncoef):
        _scaled_matvec(jd, jo, mv, alpha, beta, inv_a, shift, phi1, phi2)
        c = coeffs[k]
        for i in range(n):
            phi2[i] = 2.0 * phi2[i] - phi0[i]
            acc[i] += c * phi2[i]
        tmp = phi0
        phi0 = phi1
        phi1 = phi2
        phi2 = tmp
    for i in range(n):
        psi[i] = acc[i]


@njit(cache=True, nogil=True)
def propagate_steps(jd, jo, mv, jx_off1, parity_signs,
                    alphas, betas, inv_a, shift, coeffs,
                    psi, stride, out_jx, out_norm_dev, out_parity):
    """Advance psi through betas.shape[0] steps (each = one exp(-iK) factor
    per sub-exponent, first column applied first).  Every `stride` steps the
    <J_x>, norm deviation and <Pi> of the in-flight state are recorded.
    Returns the number of samples written."""
    nsteps = betas.shape[0]
    nsub = betas.shape[1]
    n = psi.shape[0]
    phi0 = np.empty(n, np.complex128)
    phi1 = np.empty(n, np.complex128)
    phi2 = np.empty(n, np.complex128)
    acc = np.empty(n, np.complex128)
    si = 0
    for s in range(nsteps):
        for sub in range(nsub):
            _cheb_exp_apply(jd, jo, mv, alphas[sub], betas[s, sub],
                            inv_a, shift, coeffs, psi, phi0, phi1, phi2, acc)
        if stride > 0 and (s + 1) % stride == 0:
            jx = 0.0
            for i in range(n - 1):
                jx += jx_off1[i] * 2.0 * (psi[i].real * psi[i + 1].real
                                          + psi[i].imag * psi[i + 1].imag)
            nrm2 = 0.0
            par = 0.0
            for i in range(n):
                p = psi[i].real * psi[i].real + psi[i].imag * psi[i].imag
                nrm2 += p
                par += parity_signs[i] * p
            out_jx[si] = jx
            out_norm_dev[si] = abs(np.sqrt(nrm2) - 1.0)
            out_parity[si] = par
            si += 1
    return si
