"""Powder-averaged field-swept echo-detected (FSED) spectra and their fits.

The simulator finds, for every crystallite orientation and every allowed
transition, the exact field at which the transition meets the microwave
frequency (bracketed root search on the full Hamiltonian, no
frequency-to-field Jacobian shortcut), accumulates transition amplitudes
weighted by the grid weights, and convolves with a normalized broadening
kernel. Orientation work is vectorized into Hamiltonian stacks and
accumulated in fixed index order, so spectra are bit-identical for any
thread count.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from scipy.optimize import least_squares

from .analysis import FitResult, _jacobian_sigmas
from .errors import ConvergenceError
from .spinsys import Orientation, SpinSystem, hamiltonian_stack_parts, transitions
from .traces import format_float

GOLDEN_ANGLE = np.pi * (3.0 - np.sqrt(5.0))


@dataclass(frozen=True)
class PowderGrid:
    """Orientation set with weights summing to one."""

    thetas: np.ndarray
    phis: np.ndarray
    weights: np.ndarray
    scheme: str

    def __post_init__(self):
        thetas = np.asarray(self.thetas, dtype=float)
        phis = np.asarray(self.phis, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if not (thetas.shape == phis.shape == weights.shape):
            raise ValueError("thetas, phis, weights must have identical shapes")
        if thetas.size < 16:
            raise ValueError("powder grids need at least 16 orientations")
        if abs(weights.sum() - 1.0) > 1e-12:
            raise ValueError("grid weights must sum to 1 within 1e-12")
        object.__setattr__(self, "thetas", thetas)
        object.__setattr__(self, "phis", phis)
        object.__setattr__(self, "weights", weights)

    @property
    def count(self) -> int:
        return int(self.thetas.size)

    def orientation(self, i: int) -> Orientation:
        return Orientation(float(self.thetas[i]), float(self.phis[i]), float(self.weights[i]))

    def average(self, values: np.ndarray) -> float:
        """Weighted orientation average of per-orientation values."""
        return float(np.dot(self.weights, np.asarray(values, dtype=float)))


def powder_grid(scheme: str, count: int) -> PowderGrid:
    """Deterministic orientation grid: 'equal-area-spiral' or 'gaussian-product'.

    The spiral covers the full sphere with uniform weights; the product grid
    combines Gauss-Legendre nodes in cos(theta) with a uniform phi ring and
    may round the requested count up to the next n_theta * n_phi.
    """
    if count < 16:
        raise ValueError("count must be at least 16")
    if scheme == "equal-area-spiral":
        i = np.arange(count)
        z = 1.0 - (2.0 * i + 1.0) / count
        thetas = np.arccos(np.clip(z, -1.0, 1.0))
        phis = np.mod(i * GOLDEN_ANGLE, 2.0 * np.pi)
        weights = np.full(count, 1.0 / count)
        weights[-1] = 1.0 - weights[:-1].sum()  # exact unit sum
        return PowderGrid(thetas, phis, weights, scheme)
    if scheme == "gaussian-product":
        n_theta = max(2, int(round(np.sqrt(count / 2.0))))
        n_phi = max(2, int(np.ceil(count / n_theta)))
        nodes, gl_weights = np.polynomial.legendre.leggauss(n_theta)
        theta_col = np.arccos(np.clip(nodes, -1.0, 1.0))
        phi_row = 2.0 * np.pi * np.arange(n_phi) / n_phi
        thetas = np.repeat(theta_col, n_phi)
        phis = np.tile(phi_row, n_theta)
        weights = np.repeat(gl_weights / 2.0, n_phi) / n_phi
        weights = weights / weights.sum()
        return PowderGrid(thetas, phis, weights, scheme)
    raise ValueError(f"unknown powder scheme {scheme!r}")


@dataclass(frozen=True)
class Spectrum:
    """Intensity vs field on a uniform axis, unit maximum when nonempty."""

    field_axis: np.ndarray
    intensity: np.ndarray

    def __post_init__(self):
        axis = np.asarray(self.field_axis, dtype=float)
        inten = np.asarray(self.intensity, dtype=float)
        if axis.shape != inten.shape or axis.ndim != 1:
            raise ValueError("field_axis and intensity must be 1-d and equal length")
        if axis.size >= 2:
            steps = np.diff(axis)
            if np.any(steps <= 0):
                raise ValueError("field_axis must be strictly increasing")
            if np.ptp(steps) > 1e-6 * steps[0]:
                raise ValueError("field_axis must be uniformly spaced")
        peak = inten.max() if inten.size else 0.0
        if inten.size and peak > 0 and abs(peak - 1.0) > 1e-9:
            raise ValueError("spectrum intensity must be normalized to unit maximum")
        object.__setattr__(self, "field_axis", axis)
        object.__setattr__(self, "intensity", inten)

    @property
    def step(self) -> float:
        return float(self.field_axis[1] - self.field_axis[0]) if self.field_axis.size > 1 else 0.0

    @classmethod
    def from_raw(cls, field_axis: np.ndarray, intensity: np.ndarray) -> "Spectrum":
        intensity = np.asarray(intensity, dtype=float)
        peak = intensity.max() if intensity.size else 0.0
        if peak > 0:
            intensity = intensity / peak
        return cls(field_axis=np.asarray(field_axis, dtype=float), intensity=intensity)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("field_G,intensity\n")
        for b, y in zip(self.field_axis, self.intensity):
            buf.write(f"{format_float(b)},{format_float(y)}\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "Spectrum":
        rows = []
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("field_G") or line.startswith("#"):
                continue
            b, y = line.split(",")
            rows.append((float(b), float(y)))
        data = np.asarray(rows, dtype=float)
        return cls.from_raw(data[:, 0], data[:, 1])

    def support_width(self, threshold: float = 0.02) -> float:
        """Width in Gauss of the region with intensity above threshold*max."""
        if self.intensity.size == 0 or self.intensity.max() <= 0:
            return 0.0
        mask = self.intensity > threshold * self.intensity.max()
        idx = np.nonzero(mask)[0]
        return float(self.field_axis[idx[-1]] - self.field_axis[idx[0]])


@dataclass(frozen=True)
class LineBroadening:
    """Convolution kernel: shape 'gaussian' or 'lorentzian', width = FWHM in Gauss."""

    shape: str = "gaussian"
    width: float = 8.0

    def __post_init__(self):
        if self.shape not in ("gaussian", "lorentzian"):
            raise ValueError(f"unknown broadening shape {self.shape!r}")
        if self.width <= 0:
            raise ValueError("broadening width must be positive")

    def kernel(self, step: float) -> np.ndarray:
        """Discrete unit-sum kernel on the field grid."""
        if self.shape == "gaussian":
            sigma = self.width / (2.0 * np.sqrt(2.0 * np.log(2.0)))
            half = max(1, int(np.ceil(6.0 * sigma / step)))
            x = np.arange(-half, half + 1) * step
            k = np.exp(-0.5 * (x / sigma) ** 2)
        else:
            gamma = self.width / 2.0
            half = max(1, int(np.ceil(60.0 * gamma / step)))
            x = np.arange(-half, half + 1) * step
            k = gamma**2 / (x**2 + gamma**2)
        return k / k.sum()


def _pair_indices(dim: int) -> tuple[np.ndarray, np.ndarray]:
    ii, jj = np.triu_indices(dim, k=1)
    return ii, jj


def _powder_resonances(
    system: SpinSystem,
    mw_frequency: float,
    b_lo: float,
    b_hi: float,
    grid: PowderGrid,
    min_amplitude: float,
    coarse_points: int,
    tol_mhz: float = 1e-6,
):
    """Exact resonance fields for every orientation/transition in [b_lo, b_hi].

    Returns (fields, amplitudes, orientation_index) arrays. Pairs are tracked
    by eigenvalue index inside each coarse bracket and refined by bisection
    plus secant polishing, which is an exact root search on the labeled
    eigenvalue difference.
    """
    h_hf, h_zee, sx_lab = hamiltonian_stack_parts(system, grid.thetas, grid.phis)
    n_or, dim, _ = h_hf.shape
    ii, jj = _pair_indices(dim)

    b_grid = np.linspace(b_lo, b_hi, coarse_points)
    freq = np.empty((coarse_points, n_or, ii.size))
    amp_ok = np.zeros((coarse_points, n_or, ii.size), dtype=bool)
    for k, b in enumerate(b_grid):
        evals, evecs = np.linalg.eigh(h_hf + b * h_zee)
        freq[k] = evals[:, jj] - evals[:, ii]
        mat = evecs.conj().transpose(0, 2, 1) @ sx_lab @ evecs
        amp_ok[k] = 4.0 * np.abs(mat[:, ii, jj]) ** 2 >= min_amplitude

    resid = freq - mw_frequency
    crossing = (resid[:-1] * resid[1:] < 0) | (resid[:-1] == 0)
    crossing &= amp_ok[:-1] | amp_ok[1:]
    k_idx, n_idx, p_idx = np.nonzero(crossing)
    if k_idx.size == 0:
        return np.empty(0), np.empty(0), np.empty(0, dtype=int)

    lo = b_grid[k_idx].copy()
    hi = b_grid[k_idx + 1].copy()
    f_lo = resid[k_idx, n_idx, p_idx].copy()
    f_hi = resid[k_idx + 1, n_idx, p_idx].copy()
    pi_i, pi_j = ii[p_idx], jj[p_idx]

    def evaluate(b_vec: np.ndarray) -> np.ndarray:
        h = h_hf[n_idx] + b_vec[:, None, None] * h_zee[n_idx]
        evals = np.linalg.eigvalsh(h)
        rows = np.arange(b_vec.size)
        return evals[rows, pi_j] - evals[rows, pi_i] - mw_frequency

    # bisection narrows the bracket, secant steps polish to tol_mhz
    for _ in range(18):
        mid = 0.5 * (lo + hi)
        f_mid = evaluate(mid)
        take_hi = np.sign(f_mid) == np.sign(f_lo)
        lo = np.where(take_hi, mid, lo)
        f_lo = np.where(take_hi, f_mid, f_lo)
        hi = np.where(take_hi, hi, mid)
        f_hi = np.where(take_hi, f_hi, f_mid)
    root = 0.5 * (lo + hi)
    f_root = evaluate(root)
    for _ in range(4):
        if np.max(np.abs(f_root)) <= tol_mhz:
            break
        denom = f_hi - f_lo
        safe = np.where(np.abs(denom) > 0, denom, 1.0)
        candidate = hi - f_hi * (hi - lo) / safe
        candidate = np.clip(candidate, np.minimum(lo, hi), np.maximum(lo, hi))
        f_cand = evaluate(candidate)
        better = np.abs(f_cand) < np.abs(f_root)
        root = np.where(better, candidate, root)
        f_root = np.where(better, f_cand, f_root)
        take_hi = np.sign(f_cand) == np.sign(f_hi)
        hi = np.where(take_hi, candidate, hi)
        f_hi = np.where(take_hi, f_cand, f_hi)
        lo = np.where(take_hi, lo, candidate)
        f_lo = np.where(take_hi, f_lo, f_cand)

    # final amplitudes at the converged fields
    h = h_hf[n_idx] + root[:, None, None] * h_zee[n_idx]
    evals, evecs = np.linalg.eigh(h)
    bra = np.take_along_axis(evecs, pi_i[:, None, None], axis=2)[:, :, 0]
    ket = np.take_along_axis(evecs, pi_j[:, None, None], axis=2)[:, :, 0]
    matel = np.sum(bra.conj() * (sx_lab[n_idx] @ ket[:, :, None])[:, :, 0], axis=1)
    amps = 4.0 * np.abs(matel) ** 2

    keep = amps >= min_amplitude
    return root[keep], amps[keep], n_idx[keep]


def _simulate_on_axis(
    system: SpinSystem,
    mw_frequency: float,
    axis: np.ndarray,
    grid: PowderGrid,
    line_broadening: LineBroadening,
    min_amplitude: float,
    coarse_points: int,
    normalize: bool = True,
) -> np.ndarray:
    step = float(axis[1] - axis[0])
    # search slightly beyond the axis so broadening tails are fed correctly
    pad = 3.0 * line_broadening.width
    fields, amps, n_idx = _powder_resonances(
        system,
        mw_frequency,
        float(axis[0]) - pad,
        float(axis[-1]) + pad,
        grid,
        min_amplitude,
        coarse_points,
    )
    sticks = np.zeros(axis.size + 2)
    if fields.size:
        pos = (fields - (axis[0] - step)) / step  # offset by one padding bin
        base = np.floor(pos).astype(int)
        frac = pos - base
        value = amps * grid.weights[n_idx]
        for shift, share in ((0, 1.0 - frac), (1, frac)):
            target = base + shift
            ok = (target >= 0) & (target < sticks.size)
            np.add.at(sticks, target[ok], (value * share)[ok])
    intensity = np.convolve(sticks, line_broadening.kernel(step), mode="same")[1:-1]
    if normalize and intensity.max() > 0:
        intensity = intensity / intensity.max()
    return intensity


def simulate_fsed(
    system: SpinSystem,
    mw_frequency: float,
    field_range: tuple[float, float, float],
    grid: PowderGrid,
    line_broadening: LineBroadening = LineBroadening(),
    min_amplitude: float = 1e-3,
    coarse_points: int = 49,
) -> Spectrum:
    """Powder-averaged echo-detected spectrum over a swept field.

    ``field_range`` is (start, stop, step) in Gauss. Every orientation's
    allowed transitions contribute their amplitude at their exact resonance
    field, weighted by the grid weight; the stick pattern is convolved with
    the unit-area broadening kernel and normalized to unit maximum.
    """
    start, stop, step = (float(x) for x in field_range)
    if step <= 0:
        raise ValueError("field step must be positive")
    if stop <= start:
        raise ValueError("field range must be increasing")
    if mw_frequency <= 0:
        raise ValueError("microwave frequency must be positive")
    if grid.count == 0:
        raise ValueError("powder grid is empty")
    axis = start + step * np.arange(int(np.floor((stop - start) / step)) + 1)
    intensity = _simulate_on_axis(
        system, mw_frequency, axis, grid, line_broadening, min_amplitude, coarse_points
    )
    return Spectrum(field_axis=axis, intensity=intensity)


@dataclass(frozen=True)
class AxialParameters:
    """Axial spin-Hamiltonian parameters plus line width, the fit space."""

    g_par: float
    g_perp: float
    a_par_mhz: float
    a_perp_mhz: float
    width_g: float = 8.0

    def as_array(self) -> np.ndarray:
        return np.array([self.g_par, self.g_perp, self.a_par_mhz, self.a_perp_mhz, self.width_g])

    @classmethod
    def from_array(cls, x: np.ndarray) -> "AxialParameters":
        return cls(*(float(v) for v in x))


PARAM_NAMES = ("g_par", "g_perp", "A_par_MHz", "A_perp_MHz", "width_G")


def fit_spectrum(
    target: Spectrum,
    initial: AxialParameters,
    mw_frequency: float,
    grid: PowderGrid,
    line_broadening: LineBroadening = LineBroadening(),
    nuclear_spin: float = 1.5,
    g_n: float = 1.4824,
    fixed: Sequence[str] = (),
    max_nfev: int = 400,
    coarse_points: int = 33,
    smoothing_stages: Sequence[float] = (6.0, 2.0, 0.0),
) -> FitResult:
    """Least-squares fit of (g_par, g_perp, A_par, A_perp, width) to a spectrum.

    Damped least squares with a numerically differenced Jacobian (relative
    step 1e-6) on the intensity residuals over the target's own field axis.
    Narrow lines make the raw residual landscape multimodal (a percent-level
    g shift moves lines by several linewidths), so the fit runs a graduated
    continuation: each stage convolves model and target with an extra
    Gaussian of ``stage * width`` before comparing, ending at the native
    resolution, whose Jacobian provides the reported uncertainties.
    Parameters named in ``fixed`` (see PARAM_NAMES) are pinned at their
    initial values. Raises ConvergenceError, carrying the best-so-far
    result, when the optimizer stalls or the target has no signal.
    """
    if target.field_axis.size < 8:
        raise ValueError("target spectrum too short to fit")
    for g in (initial.g_par, initial.g_perp):
        if not 1.5 <= g <= 3.0:
            raise ValueError("initial g values must lie in [1.5, 3]")
    for a in (initial.a_par_mhz, initial.a_perp_mhz):
        if not 0.0 <= a <= 2000.0:
            raise ValueError("initial hyperfine values must lie in [0, 2000] MHz")
    unknown = set(fixed) - set(PARAM_NAMES)
    if unknown:
        raise ValueError(f"unknown fixed parameters: {sorted(unknown)}")
    if np.ptp(target.intensity) <= 0:
        raise ConvergenceError("target spectrum has no signal to fit")

    axis = target.field_axis
    full0 = initial.as_array()
    free_idx = [k for k, name in enumerate(PARAM_NAMES) if name not in fixed]
    if not free_idx:
        raise ValueError("at least one parameter must be free")

    def expand(x: np.ndarray) -> np.ndarray:
        full = full0.copy()
        full[free_idx] = x
        return full

    def simulate(x: np.ndarray) -> np.ndarray:
        p = AxialParameters.from_array(expand(x))
        system = SpinSystem.axial(
            p.g_par, p.g_perp, abs(p.a_par_mhz), abs(p.a_perp_mhz), nuclear_spin, g_n
        )
        return _simulate_on_axis(
            system,
            mw_frequency,
            axis,
            grid,
            replace(line_broadening, width=abs(p.width_g)),
            min_amplitude=1e-3,
            coarse_points=coarse_points,
        )

    def make_residual(extra_width: float):
        if extra_width > 0:
            kernel = LineBroadening("gaussian", extra_width).kernel(
                float(axis[1] - axis[0])
            )

            def smooth(y: np.ndarray) -> np.ndarray:
                out = np.convolve(y, kernel, mode="same")
                peak = out.max()
                return out / peak if peak > 0 else out

        else:

            def smooth(y: np.ndarray) -> np.ndarray:
                return y

        smoothed_target = smooth(target.intensity)

        def residual(x: np.ndarray) -> np.ndarray:
            return smooth(simulate(x)) - smoothed_target

        return residual

    x0 = full0[free_idx]
    result = None
    total_nfev = 0
    for stage in smoothing_stages:
        result = least_squares(
            make_residual(stage * line_broadening.width),
            x0=x0,
            method="lm",
            diff_step=1e-6,
            max_nfev=max_nfev,
        )
        x0 = result.x
        total_nfev += int(result.nfev)
    sig_free = _jacobian_sigmas(result.jac, result.fun, len(free_idx))
    full = expand(result.x)
    sigmas = np.zeros(5)
    sigmas[free_idx] = sig_free
    values = [abs(float(v)) if k >= 2 else float(v) for k, v in enumerate(full)]
    fit = FitResult(
        params=dict(zip(PARAM_NAMES, values)),
        sigmas=dict(zip(PARAM_NAMES, (float(s) for s in sigmas))),
        residual_norm=float(np.linalg.norm(result.fun)),
        converged=bool(result.success),
        iterations=total_nfev,
    )
    if not result.success:
        raise ConvergenceError("spectrum fit did not converge", best=fit)
    return fit


def parallel_edge_fields(
    system: SpinSystem, mw_frequency: float, min_amplitude: float = 0.5
) -> np.ndarray:
    """Resonance fields of the allowed transitions at theta = 0, ascending.

    These are the parallel-edge singularities of an axial powder pattern;
    for one I=3/2 nucleus there are four, spaced by roughly
    A_par / (g_par * beta_e/h).
    """
    from .spinsys import resonance_field  # local import avoids cycle at module load

    ori = Orientation(0.0, 0.0)
    probe = mw_frequency / (
        system.g_tensor[2, 2] * system.constants.electron_prefactor_mhz_per_g
    )
    lines = [
        t for t in transitions(system, probe, ori) if t.amplitude >= min_amplitude
    ]
    fields = [
        resonance_field(system, mw_frequency, ori, t.labels) for t in lines
    ]
    return np.sort(np.asarray(fields))


def find_field_features(spectrum: Spectrum, smooth_points: int = 3) -> np.ndarray:
    """Fields with locally maximal negative curvature (peaks and shoulders)."""
    from scipy.signal import find_peaks

    y = spectrum.intensity
    if smooth_points > 1:
        kernel = np.ones(smooth_points) / smooth_points
        y = np.convolve(y, kernel, mode="same")
    curvature = np.gradient(np.gradient(y))
    idx, _ = find_peaks(-curvature, prominence=0.02 * np.max(np.abs(curvature)))
    return spectrum.field_axis[idx]
