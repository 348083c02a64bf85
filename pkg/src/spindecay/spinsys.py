"""Spin system, spin operators, and the laboratory-frame Hamiltonian.

The Hamiltonian for one electron spin coupled to a set of nuclei is

    H = sum_i S.A_i.I_i + beta_e B0 . g . S - sum_i beta_n g_n,i B0 . I_i

expressed in linear-frequency MHz (h = 1), with the field in Gauss. Tensors
are given in the molecular frame; an :class:`Orientation` rotates the lab
field direction into that frame (passive rotation), so a crystallite at
(theta, phi) sees the unit field direction
n = (sin theta cos phi, sin theta sin phi, cos theta).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import cos, isclose, sin, sqrt

import numpy as np
from scipy.optimize import brentq

from .constants import CODATA, PhysicalConstants
from .errors import HilbertDimensionError, ResonanceNotFoundError

MAX_HILBERT_DIM = 4096


def _is_half_integer(j: float) -> bool:
    return j >= 0 and isclose(2 * j, round(2 * j), abs_tol=1e-12)


def spin_operators(j: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Angular-momentum matrices (Jx, Jy, Jz) for spin quantum number j.

    Basis ordering is m = j, j-1, ..., -j, so Jz is diagonal with entries
    descending from j. Raising/lowering elements follow
    sqrt(j(j+1) - m(m +/- 1)).
    """
    if not _is_half_integer(j):
        raise ValueError(f"spin quantum number must be a non-negative half-integer, got {j}")
    dim = int(round(2 * j)) + 1
    m = j - np.arange(dim)
    jz = np.diag(m).astype(complex)
    # J+ |j,m> = sqrt(j(j+1) - m(m+1)) |j,m+1>; row index = m+1 in this ordering
    ladder = np.sqrt(j * (j + 1) - m[1:] * (m[1:] + 1))
    jplus = np.zeros((dim, dim), dtype=complex)
    jplus[np.arange(dim - 1), np.arange(1, dim)] = ladder
    jminus = jplus.conj().T
    jx = (jplus + jminus) / 2
    jy = (jplus - jminus) / 2j
    return jx, jy, jz


def axial_tensor(parallel: float, perpendicular: float) -> np.ndarray:
    """Diagonal 3x3 tensor with two equal transverse components (z = parallel)."""
    return np.diag([perpendicular, perpendicular, parallel]).astype(float)


@dataclass(frozen=True)
class Nucleus:
    """One nuclear spin: quantum number, g factor, hyperfine tensor in MHz."""

    spin: float
    g_n: float
    hyperfine: np.ndarray
    label: str = ""

    def __post_init__(self):
        if not _is_half_integer(self.spin):
            raise ValueError(f"nuclear spin must be half-integer, got {self.spin}")
        hf = np.asarray(self.hyperfine, dtype=float)
        if hf.shape != (3, 3):
            raise ValueError("hyperfine tensor must be 3x3")
        if not np.allclose(hf, hf.T, atol=1e-9):
            raise ValueError("hyperfine tensor must be symmetric")
        object.__setattr__(self, "hyperfine", hf)

    @property
    def multiplicity(self) -> int:
        return int(round(2 * self.spin)) + 1


@dataclass(frozen=True)
class SpinSystem:
    """Electron spin plus nuclei; the home of every Hamiltonian symbol."""

    g_tensor: np.ndarray
    nuclei: tuple[Nucleus, ...] = ()
    electron_spin: float = 0.5
    constants: PhysicalConstants = field(default=CODATA)

    def __post_init__(self):
        if not _is_half_integer(self.electron_spin) or self.electron_spin <= 0:
            raise ValueError("electron spin must be a positive half-integer")
        g = np.asarray(self.g_tensor, dtype=float)
        if g.shape != (3, 3):
            raise ValueError("g tensor must be 3x3")
        if not np.allclose(g, g.T, atol=1e-9):
            raise ValueError("g tensor must be symmetric")
        object.__setattr__(self, "g_tensor", g)
        object.__setattr__(self, "nuclei", tuple(self.nuclei))

    @classmethod
    def axial(
        cls,
        g_par: float,
        g_perp: float,
        a_par_mhz: float,
        a_perp_mhz: float,
        nuclear_spin: float,
        g_n: float,
        label: str = "",
        constants: PhysicalConstants = CODATA,
    ) -> "SpinSystem":
        """Axially symmetric S=1/2 system with one nucleus (shared z axis)."""
        nucleus = Nucleus(
            spin=nuclear_spin,
            g_n=g_n,
            hyperfine=axial_tensor(a_par_mhz, a_perp_mhz),
            label=label,
        )
        return cls(g_tensor=axial_tensor(g_par, g_perp), nuclei=(nucleus,))

    @property
    def dimension(self) -> int:
        dim = int(round(2 * self.electron_spin)) + 1
        for nuc in self.nuclei:
            dim *= nuc.multiplicity
        return dim

    def electron_operators(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(Sx, Sy, Sz) embedded in the full product space."""
        ops = spin_operators(self.electron_spin)
        eye_nuc = np.eye(self.dimension // (int(round(2 * self.electron_spin)) + 1))
        return tuple(np.kron(op, eye_nuc) for op in ops)

    def nuclear_operators(self, index: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(Ix, Iy, Iz) of nucleus ``index`` embedded in the full space."""
        mats = []
        for op in spin_operators(self.nuclei[index].spin):
            full = np.eye(int(round(2 * self.electron_spin)) + 1, dtype=complex)
            for i, nuc in enumerate(self.nuclei):
                factor = op if i == index else np.eye(nuc.multiplicity, dtype=complex)
                full = np.kron(full, factor)
            mats.append(full)
        return tuple(mats)

    def basis_labels(self) -> list["StateLabel"]:
        """Product basis labels in kron order (electron slowest)."""
        m_s = [self.electron_spin - k for k in range(int(round(2 * self.electron_spin)) + 1)]
        m_per_nucleus = [
            [nuc.spin - k for k in range(nuc.multiplicity)] for nuc in self.nuclei
        ]
        labels = []
        for ms in m_s:
            stack = [()]
            for ms_options in m_per_nucleus:
                stack = [prev + (mi,) for prev in stack for mi in ms_options]
            labels.extend(StateLabel(m_s=ms, m_i=mi) for mi in stack)
        return labels


@dataclass(frozen=True)
class Orientation:
    """Crystallite orientation: lab-field direction in the molecular frame."""

    theta: float
    phi: float
    weight: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.theta <= np.pi + 1e-12:
            raise ValueError("theta must lie in [0, pi]")
        if not 0.0 <= self.phi < 2 * np.pi + 1e-12:
            raise ValueError("phi must lie in [0, 2*pi)")

    @property
    def field_direction(self) -> np.ndarray:
        return np.array(
            [sin(self.theta) * cos(self.phi), sin(self.theta) * sin(self.phi), cos(self.theta)]
        )

    @property
    def transverse_direction(self) -> np.ndarray:
        """Lab x axis expressed in the molecular frame (the theta-hat vector)."""
        return np.array(
            [cos(self.theta) * cos(self.phi), cos(self.theta) * sin(self.phi), -sin(self.theta)]
        )


@dataclass(frozen=True)
class StateLabel:
    """Dominant product-basis character |m_s, m_I1, ...> of an eigenstate."""

    m_s: float
    m_i: tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "m_i", tuple(float(m) for m in np.atleast_1d(self.m_i)))
        object.__setattr__(self, "m_s", float(self.m_s))


def _check_dimension(system: SpinSystem, max_dim: int) -> None:
    if system.dimension > max_dim:
        raise HilbertDimensionError(
            f"Hilbert dimension {system.dimension} exceeds the cap of {max_dim}"
        )


def hamiltonian_parts(
    system: SpinSystem,
    orientation: Orientation,
    max_dim: int = MAX_HILBERT_DIM,
) -> tuple[np.ndarray, np.ndarray]:
    """Split H(B) = H_hf + B * H_zee for a single orientation.

    H_hf carries the field-independent hyperfine couplings; H_zee carries the
    electron and nuclear Zeeman terms per Gauss.
    """
    _check_dimension(system, max_dim)
    dim = system.dimension
    n = orientation.field_direction
    s_ops = system.electron_operators()

    h_hf = np.zeros((dim, dim), dtype=complex)
    h_zee = np.zeros((dim, dim), dtype=complex)

    gn_vec = n @ system.g_tensor
    be = system.constants.electron_prefactor_mhz_per_g
    bn = system.constants.nuclear_prefactor_mhz_per_g
    for k in range(3):
        h_zee += be * gn_vec[k] * s_ops[k]

    for idx, nuc in enumerate(system.nuclei):
        i_ops = system.nuclear_operators(idx)
        a = nuc.hyperfine
        for r in range(3):
            for c in range(3):
                if a[r, c] != 0.0:
                    h_hf += a[r, c] * (s_ops[r] @ i_ops[c])
        for k in range(3):
            h_zee -= bn * nuc.g_n * n[k] * i_ops[k]

    return h_hf, h_zee


def hamiltonian(
    system: SpinSystem,
    field_magnitude: float,
    orientation: Orientation,
    max_dim: int = MAX_HILBERT_DIM,
) -> np.ndarray:
    """Full Hamiltonian in MHz for a crystallite at ``orientation``."""
    if field_magnitude < 0:
        raise ValueError("field magnitude must be non-negative")
    h_hf, h_zee = hamiltonian_parts(system, orientation, max_dim=max_dim)
    return h_hf + field_magnitude * h_zee


def label_basis(system: SpinSystem, orientation: Orientation) -> np.ndarray:
    """Columns: product basis quantized along the field direction.

    Labels like |m_s, m_I> refer to spin projections along the applied field,
    which is what resonance assignments quote; at theta = 0 this coincides
    with the molecular z basis.
    """
    n = orientation.field_direction
    w = None
    spins = [system.electron_spin] + [nuc.spin for nuc in system.nuclei]
    for j in spins:
        jx, jy, jz = spin_operators(j)
        evals, evecs = np.linalg.eigh(n[0] * jx + n[1] * jy + n[2] * jz)
        cols = evecs[:, ::-1]  # order m = j ... -j to match basis_labels()
        w = cols if w is None else np.kron(w, cols)
    return w


def assign_state_labels(
    eigvecs: np.ndarray,
    basis: list[StateLabel],
    basis_vectors: np.ndarray | None = None,
) -> list[StateLabel]:
    """Unique basis label per eigenstate by greedy descending-overlap matching.

    Ties in overlap are broken by basis-state index order, then eigenstate
    index, so degenerate manifolds get deterministic labels.
    """
    dim = eigvecs.shape[0]
    if basis_vectors is not None:
        eigvecs = basis_vectors.conj().T @ eigvecs
    overlaps = np.abs(eigvecs) ** 2  # [basis, state]
    pairs = sorted(
        ((-overlaps[b, s], b, s) for b in range(dim) for s in range(dim)),
    )
    state_label: list[StateLabel | None] = [None] * dim
    basis_used = [False] * dim
    assigned = 0
    for _, b, s in pairs:
        if state_label[s] is None and not basis_used[b]:
            state_label[s] = basis[b]
            basis_used[b] = True
            assigned += 1
            if assigned == dim:
                break
    return state_label  # type: ignore[return-value]


@dataclass(frozen=True)
class Transition:
    frequency: float
    amplitude: float
    labels: tuple[StateLabel, StateLabel]


def transitions(
    system: SpinSystem,
    field_magnitude: float,
    orientation: Orientation,
    min_amplitude: float = 1e-3,
    max_dim: int = MAX_HILBERT_DIM,
) -> list[Transition]:
    """All transitions with normalized |<a|Sx|b>|^2 above ``min_amplitude``.

    Sx is the electron spin component along the lab x axis (perpendicular to
    the field). Amplitudes are scaled so the strongest allowed transition of
    a hyperfine-free system is 1; labels follow dominant basis character.
    Sorted by descending amplitude, then ascending frequency.
    """
    h = hamiltonian(system, field_magnitude, orientation, max_dim=max_dim)
    evals, evecs = np.linalg.eigh(h)
    labels = assign_state_labels(
        evecs, system.basis_labels(), label_basis(system, orientation)
    )

    sx, sy, sz = system.electron_operators()
    ex = orientation.transverse_direction
    s_lab_x = ex[0] * sx + ex[1] * sy + ex[2] * sz
    matel = evecs.conj().T @ s_lab_x @ evecs
    amp = 4.0 * np.abs(matel) ** 2

    found = []
    dim = len(evals)
    for a in range(dim):
        for b in range(a + 1, dim):
            if amp[a, b] >= min_amplitude:
                found.append(
                    Transition(
                        frequency=float(evals[b] - evals[a]),
                        amplitude=float(amp[a, b]),
                        labels=(labels[a], labels[b]),
                    )
                )
    found.sort(key=lambda t: (-t.amplitude, t.frequency))
    return found


def _labeled_frequency(
    system: SpinSystem,
    field_magnitude: float,
    orientation: Orientation,
    wanted: frozenset,
    basis_vectors: np.ndarray,
) -> float:
    h = hamiltonian(system, field_magnitude, orientation)
    evals, evecs = np.linalg.eigh(h)
    labels = assign_state_labels(evecs, system.basis_labels(), basis_vectors)
    idx = [i for i, lab in enumerate(labels) if lab in wanted]
    if len(idx) != 2:
        raise ResonanceNotFoundError(f"labels {tuple(wanted)} not present in the spectrum")
    return abs(float(evals[idx[1]] - evals[idx[0]]))


def resonance_field(
    system: SpinSystem,
    mw_frequency: float,
    orientation: Orientation,
    transition_labels: tuple[StateLabel, StateLabel],
    b_max: float = 20000.0,
    frequency_tol: float = 1e-6,
    scan_points: int = 257,
) -> float:
    """Field (Gauss) where the labeled transition meets ``mw_frequency``.

    Bracketed root search on [0, b_max]; the lowest-field root is returned.
    Raises ResonanceNotFoundError when no bracket contains a root.
    """
    if mw_frequency < 0:
        raise ValueError("microwave frequency must be non-negative")
    wanted = frozenset(transition_labels)
    if len(wanted) != 2:
        raise ValueError("transition labels must name two distinct states")
    basis_vectors = label_basis(system, orientation)

    def objective(b: float) -> float:
        return _labeled_frequency(system, b, orientation, wanted, basis_vectors) - mw_frequency

    grid = np.linspace(0.0, b_max, scan_points)
    values = [objective(b) for b in grid]
    for k, (b_lo, b_hi) in enumerate(zip(grid[:-1], grid[1:])):
        f_lo, f_hi = values[k], values[k + 1]
        if abs(f_lo) <= frequency_tol:
            return float(b_lo)
        if f_lo * f_hi <= 0.0:
            root = brentq(objective, b_lo, b_hi, xtol=1e-9, maxiter=200)
            if abs(objective(root)) <= frequency_tol:
                return float(root)
    if abs(values[-1]) <= frequency_tol:
        return float(grid[-1])
    raise ResonanceNotFoundError(
        f"no field in [0, {b_max}] G brings the transition to {mw_frequency} MHz"
    )


# ---------------------------------------------------------------------------
# Vectorized helpers used by the powder-spectrum pipeline: Hamiltonian stacks
# over many orientations with H(B) = H_hf + B * H_zee per orientation.


def hamiltonian_stack_parts(
    system: SpinSystem,
    thetas: np.ndarray,
    phis: np.ndarray,
    max_dim: int = MAX_HILBERT_DIM,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(H_hf, H_zee, Sx_lab) stacks of shape (N, dim, dim) for N orientations."""
    _check_dimension(system, max_dim)
    thetas = np.asarray(thetas, dtype=float)
    phis = np.asarray(phis, dtype=float)
    st, ct = np.sin(thetas), np.cos(thetas)
    sp, cp = np.sin(phis), np.cos(phis)
    n_dir = np.stack([st * cp, st * sp, ct], axis=1)  # (N, 3)
    ex_dir = np.stack([ct * cp, ct * sp, -st], axis=1)

    s_ops = np.stack(system.electron_operators())  # (3, d, d)
    be = system.constants.electron_prefactor_mhz_per_g
    bn = system.constants.nuclear_prefactor_mhz_per_g

    g_proj = n_dir @ system.g_tensor  # (N, 3)
    h_zee = be * np.einsum("nk,kij->nij", g_proj, s_ops)

    dim = system.dimension
    h_hf_single = np.zeros((dim, dim), dtype=complex)
    for idx, nuc in enumerate(system.nuclei):
        i_ops = np.stack(system.nuclear_operators(idx))
        a = nuc.hyperfine
        for r in range(3):
            for c in range(3):
                if a[r, c] != 0.0:
                    h_hf_single += a[r, c] * (s_ops[r] @ i_ops[c])
        h_zee -= bn * nuc.g_n * np.einsum("nk,kij->nij", n_dir, i_ops)

    h_hf = np.broadcast_to(h_hf_single, h_zee.shape).copy()
    sx_lab = np.einsum("nk,kij->nij", ex_dir, s_ops)
    return h_hf, h_zee, sx_lab
