"""Independent oracles used by the test suite.

These deliberately avoid the library's analytic shortcuts: the central-spin
oracle propagates the full electron+bath density matrix with scipy.expm,
and the dephasing oracle evaluates the Gaussian phase-variance double
integral by brute-force quadrature.
"""

import numpy as np
from scipy.linalg import expm

from spindecay.decoherence import _cpmg_intervals

SX = np.array([[0, 1], [1, 0]], dtype=complex) / 2
SY = np.array([[0, -1j], [1j, 0]], dtype=complex) / 2
SZ = np.array([[1, 0], [0, -1]], dtype=complex) / 2


def _embed(mat: np.ndarray, pos: int, n_sites: int) -> np.ndarray:
    out = np.array([[1.0]], dtype=complex)
    for k in range(n_sites):
        out = np.kron(out, mat if k == pos else np.eye(2, dtype=complex))
    return out


def central_spin_cpmg(nuclei, n: int, tau: float) -> float:
    """Echo signal for CPMG-n from full density-matrix propagation.

    nuclei: iterable of objects with larmor_mhz, a_par_mhz, a_perp_mhz.
    Electron pi pulses are instantaneous rotations about y; the readout is
    the negated electron y component, matching the pulse-engine convention.
    """
    nuclei = list(nuclei)
    n_sites = len(nuclei) + 1
    h = np.zeros((2**n_sites, 2**n_sites), dtype=complex)
    sz_e = _embed(SZ, 0, n_sites)
    for i, nuc in enumerate(nuclei):
        iz = _embed(SZ, i + 1, n_sites)
        ix = _embed(SX, i + 1, n_sites)
        h += nuc.larmor_mhz * iz + sz_e @ (nuc.a_par_mhz * iz + nuc.a_perp_mhz * ix)

    sigma_y_e = 2 * _embed(SY, 0, n_sites)
    flip = expm(-1j * np.pi * sigma_y_e / 2)
    rho_e = np.array([[0.5, 0.5j], [-0.5j, 0.5]], dtype=complex)  # after (pi/2)_x
    rho = np.kron(rho_e, np.eye(2 ** (n_sites - 1), dtype=complex) / 2 ** (n_sites - 1))

    u_half = expm(-2j * np.pi * h * (tau / 2.0))
    u_full = expm(-2j * np.pi * h * tau)
    rho = u_half @ rho @ u_half.conj().T
    for k in range(n):
        rho = flip @ rho @ flip.conj().T
        u = u_half if k == n - 1 else u_full
        rho = u @ rho @ u.conj().T
    return float(-np.trace(rho @ sigma_y_e).real)


def gaussian_cpmg_coherence(
    sigma: float, tau_c: float, n: int, tau: float, grid: int = 4000
) -> float:
    """<cos Phi> = exp(-Var Phi / 2) for OU noise, by double quadrature."""
    t_total = n * tau
    ts = (np.arange(grid) + 0.5) * t_total / grid
    lengths, signs = _cpmg_intervals(n, tau)
    edges = np.concatenate([[0.0], np.cumsum(lengths)])
    s = signs[np.searchsorted(edges, ts, side="right") - 1]
    dt = t_total / grid
    corr = sigma**2 * np.exp(-np.abs(ts[:, None] - ts[None, :]) / tau_c)
    var_phi = (2 * np.pi) ** 2 * float(s @ corr @ s) * dt * dt
    return float(np.exp(-var_phi / 2.0))
