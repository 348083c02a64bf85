"""Fitting and signal-extraction for every reported scaling law.

Covers stretched-exponential envelope fits, the T_coh(n) power law, the
T1(T) power law, FFT peak/linewidth extraction for nutation data, and the
single-qubit figure of merit (coherence time over gate time).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import signal
from scipy.optimize import least_squares

from .errors import ConvergenceError
from .traces import DecayTrace, format_float


@dataclass(frozen=True)
class FitResult:
    """Parameter estimates with 1-sigma uncertainties from the residual Jacobian."""

    params: dict[str, float]
    sigmas: dict[str, float]
    residual_norm: float
    converged: bool
    iterations: int = 0
    metadata: dict[str, object] = field(default_factory=dict)

    def __post_init__(self):
        for name, sig in self.sigmas.items():
            if sig < 0:
                raise ValueError(f"sigma for {name} must be non-negative")
        if self.residual_norm < 0:
            raise ValueError("residual norm must be non-negative")

    def to_json_text(self) -> str:
        flat: dict[str, object] = {}
        for name, value in self.params.items():
            flat[name] = value
            flat[f"{name}_sigma"] = self.sigmas.get(name, 0.0)
        flat["residual_norm"] = self.residual_norm
        flat["converged"] = self.converged
        flat["iterations"] = self.iterations
        return json.dumps(flat, indent=2, sort_keys=True)

    def to_table(self) -> str:
        width = max((len(n) for n in self.params), default=5)
        lines = [f"{'param':<{width}}  {'value':>18}  {'sigma':>18}"]
        for name in self.params:
            lines.append(
                f"{name:<{width}}  {self.params[name]:>18.10g}  "
                f"{self.sigmas.get(name, 0.0):>18.4g}"
            )
        lines.append(
            f"residual_norm = {format_float(self.residual_norm)}, "
            f"converged = {self.converged}, iterations = {self.iterations}"
        )
        return "\n".join(lines)


@dataclass(frozen=True)
class FftPeak:
    frequency: float
    height: float
    fwhm: float

    def __post_init__(self):
        if self.frequency < 0:
            raise ValueError("peak frequency must be non-negative")
        if self.fwhm <= 0:
            raise ValueError("fwhm must be positive")


def _jacobian_sigmas(jac: np.ndarray, residual: np.ndarray, n_params: int) -> np.ndarray:
    dof = residual.size - n_params
    if dof <= 0:
        return np.zeros(n_params)
    s_sq = float(residual @ residual) / dof
    cov = np.linalg.pinv(jac.T @ jac) * s_sq
    return np.sqrt(np.clip(np.diag(cov), 0.0, None))


def extract_envelope(
    times: np.ndarray, values: np.ndarray, window: float
) -> tuple[np.ndarray, np.ndarray]:
    """Per-window maxima of a modulated decay, window width in the time unit.

    Used before stretched-exponential fitting when nuclear modulation rides
    on the decay; the window should be one modulation period (n / f_l).
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if window <= 0:
        raise ValueError("window must be positive")
    t0 = times[0]
    bins = np.floor((times - t0) / window).astype(int)
    out_t, out_v = [], []
    for b in np.unique(bins):
        mask = bins == b
        k = np.argmax(values[mask])
        out_t.append(times[mask][k])
        out_v.append(values[mask][k])
    return np.asarray(out_t), np.asarray(out_v)


def fit_stretched(
    trace: DecayTrace,
    envelope_window: float | None = None,
    max_nfev: int = 2000,
) -> FitResult:
    """Fit amplitude * exp[-(t/T_coh)^beta] to a decay trace.

    Points are weighted by 1/stderr when the trace carries standard errors.
    For modulated traces pass ``envelope_window`` (one modulation period) to
    fit the per-window maxima instead of the raw points. Requires at least 8
    points spanning a decade of decay.
    """
    times = np.asarray(trace.times, dtype=float)
    values = np.asarray(trace.coherence, dtype=float)
    weights = None
    if trace.stderr is not None and np.all(trace.stderr > 0):
        weights = 1.0 / np.asarray(trace.stderr, dtype=float)
    if envelope_window is not None:
        times, values = extract_envelope(times, values, envelope_window)
        weights = None
    if times.size < 8:
        raise ConvergenceError("need at least 8 points to fit a stretched exponential")
    vmax = float(np.max(values))
    if vmax <= 0 or float(np.min(values)) > 0.1 * vmax:
        raise ConvergenceError(
            "trace does not span a decade of decay; no usable signal to fit"
        )
    if weights is None:
        weights = np.ones_like(values)

    # initial guesses: amplitude from the early points, T from the 1/e point
    amp0 = vmax
    below = np.nonzero(values <= amp0 / np.e)[0]
    t0 = float(times[below[0]]) if below.size else float(times[-1]) / 2
    t0 = max(t0, float(times[times > 0][0]) if np.any(times > 0) else 1e-3)

    def residual(p):
        amp, t_coh, beta = p
        with np.errstate(over="ignore", invalid="ignore"):
            model = amp * np.exp(-np.power(np.maximum(times, 0.0) / t_coh, beta))
        return weights * (model - values)

    result = least_squares(
        residual,
        x0=[amp0, t0, 1.0],
        bounds=([1e-12, 1e-9, 1e-3], [np.inf, np.inf, 4.0]),
        max_nfev=max_nfev,
    )
    params = {"amplitude": float(result.x[0]), "T_coh": float(result.x[1]), "beta": float(result.x[2])}
    sig = _jacobian_sigmas(result.jac, result.fun, 3)
    fit = FitResult(
        params=params,
        sigmas={"amplitude": float(sig[0]), "T_coh": float(sig[1]), "beta": float(sig[2])},
        residual_norm=float(np.linalg.norm(result.fun)),
        converged=bool(result.success),
        iterations=int(result.nfev),
    )
    if not result.success:
        raise ConvergenceError("stretched-exponential fit did not converge", best=fit)
    return fit


def _loglog_fit(
    x: np.ndarray, y: np.ndarray
) -> tuple[float, float, float, float, float]:
    """OLS of log y on log x; returns (intercept, slope, si, ss, rnorm)."""
    lx, ly = np.log(x), np.log(y)
    design = np.column_stack([np.ones_like(lx), lx])
    coef, *_ = np.linalg.lstsq(design, ly, rcond=None)
    resid = ly - design @ coef
    rnorm = float(np.linalg.norm(resid))
    dof = lx.size - 2
    if dof > 0:
        s_sq = float(resid @ resid) / dof
        cov = np.linalg.inv(design.T @ design) * s_sq
        si, ss = float(np.sqrt(cov[0, 0])), float(np.sqrt(cov[1, 1]))
    else:
        si = ss = 0.0
    return float(coef[0]), float(coef[1]), si, ss, rnorm


def fit_scaling(points: Sequence[tuple[float, float]]) -> FitResult:
    """Fit T_coh = T2 * n^alpha by linear regression in log-log space."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("points must be (n, T_coh) pairs")
    n, t_coh = pts[:, 0], pts[:, 1]
    if np.any(n <= 0) or np.any(t_coh <= 0):
        raise ValueError("pulse counts and coherence times must be positive")
    if np.unique(n).size < 3:
        raise ValueError("need at least 3 distinct pulse counts")
    b0, b1, s0, s1, rnorm = _loglog_fit(n, t_coh)
    t2 = float(np.exp(b0))
    return FitResult(
        params={"T2": t2, "alpha": b1},
        sigmas={"T2": t2 * s0, "alpha": s1},
        residual_norm=rnorm,
        converged=True,
        iterations=1,
    )


def fit_t1_power(points: Sequence[tuple[float, float]]) -> FitResult:
    """Fit 1/T1 = c * T^p from (temperature K, T1 ms) pairs, log-log."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("points must be (T, T1) pairs")
    temp, t1 = pts[:, 0], pts[:, 1]
    if np.any(temp <= 0) or np.any(t1 <= 0):
        raise ValueError("temperatures and T1 values must be positive")
    if np.unique(temp).size < 2:
        raise ValueError("need at least 2 distinct temperatures")
    b0, b1, s0, s1, rnorm = _loglog_fit(temp, 1.0 / t1)
    c = float(np.exp(b0))
    return FitResult(
        params={"c": c, "exponent": b1},
        sigmas={"c": c * s0, "exponent": s1},
        residual_norm=rnorm,
        converged=True,
        iterations=1,
    )


def fft_peaks(
    series: np.ndarray,
    dt: float,
    max_peaks: int = 4,
    prominence: float = 0.05,
    pad_factor: int = 4,
) -> list[FftPeak]:
    """Peaks of the magnitude spectrum of a uniformly sampled real series.

    The series is mean-subtracted and Hann-windowed, zero-padded by
    ``pad_factor``; peak frequencies are refined by 3-point parabolic
    interpolation and widths read from half-height crossings. ``prominence``
    is relative to the spectrum maximum. Returns strongest peaks first; an
    empty list when nothing clears the prominence floor.
    """
    series = np.asarray(series, dtype=float)
    if series.size < 32:
        raise ValueError("need at least 32 samples")
    if dt <= 0:
        raise ValueError("dt must be positive")
    windowed = (series - np.mean(series)) * np.hanning(series.size)
    nfft = pad_factor * series.size
    mag = np.abs(np.fft.rfft(windowed, n=nfft))
    if mag.max() <= 0:
        return []
    df = 1.0 / (nfft * dt)
    idx, _ = signal.find_peaks(mag, prominence=prominence * mag.max())
    peaks = []
    for k in idx:
        if k == 0 or k == mag.size - 1:
            continue
        alpha, beta, gamma = mag[k - 1], mag[k], mag[k + 1]
        denom = alpha - 2 * beta + gamma
        shift = 0.5 * (alpha - gamma) / denom if denom != 0 else 0.0
        freq = (k + shift) * df
        height = beta - 0.25 * (alpha - gamma) * shift
        half = height / 2
        lo = k
        while lo > 0 and mag[lo] > half:
            lo -= 1
        f_lo = (lo + (half - mag[lo]) / (mag[lo + 1] - mag[lo])) * df if mag[lo] <= half else 0.0
        hi = k
        while hi < mag.size - 1 and mag[hi] > half:
            hi += 1
        if mag[hi] <= half:
            f_hi = (hi - (half - mag[hi]) / (mag[hi - 1] - mag[hi])) * df
        else:
            f_hi = hi * df
        fwhm = max(f_hi - f_lo, df)
        peaks.append(FftPeak(frequency=float(freq), height=float(height), fwhm=float(fwhm)))
    peaks.sort(key=lambda p: -p.height)
    return peaks[:max_peaks]


def figure_of_merit(t2_us: float, gate_time_us: float) -> float:
    """Single-qubit figure of merit: coherence time over gate length."""
    if t2_us <= 0 or gate_time_us <= 0:
        raise ValueError("T2 and gate time must be positive")
    return t2_us / gate_time_us
