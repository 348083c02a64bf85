"""Decoherence engines and closed-form relaxation laws.

Three bath models act on the driven electron doublet:

* classical quasi-static and Ornstein-Uhlenbeck detuning noise, averaged as
  coherence = <cos Phi> with Phi the decoupling-toggled phase integral;
* a classical ensemble of a.c. nuclear fields at a shared Larmor frequency,
  which produces the periodic coherence dips;
* a quantum central-spin bath of independent spin-1/2 nuclei (lowest-order
  cluster expansion), whose coherence is the product over nuclei of
  Re<J0(t)|J1(t)> between the electron-conditioned nuclear states and may
  go negative.

Pi pulses are instantaneous in these engines; finite-pulse effects belong
to the pulse propagator. Phase integrals for OU noise are drawn from the
exact joint Gaussian law of the process and its time integral over each
toggling interval, so no discretization error enters the Monte Carlo.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import pi
from typing import Sequence

import numpy as np

from ._rng import STREAM_NOISE, substream
from .traces import DecayTrace, NoiseTrajectory


# ---------------------------------------------------------------------------
# closed-form relaxation laws


@dataclass(frozen=True)
class RamanRelaxation:
    """Two-phonon relaxation law 1/T1 = c * T^3, with c in 1/(ms K^3)."""

    coefficient: float

    def __post_init__(self):
        if self.coefficient <= 0:
            raise ValueError("Raman coefficient must be positive")

    @classmethod
    def from_point(cls, temperature_k: float, t1_ms: float) -> "RamanRelaxation":
        """Calibrate c from one measured (temperature, T1) pair."""
        if temperature_k <= 0 or t1_ms <= 0:
            raise ValueError("calibration point must be positive")
        return cls(coefficient=1.0 / (t1_ms * temperature_k**3))


def t1_raman(relaxation: RamanRelaxation, temperature_k: float) -> float:
    """T1 in ms at a temperature in K under the cubic Raman law."""
    if temperature_k <= 0:
        raise ValueError("temperature must be positive")
    return 1.0 / (relaxation.coefficient * temperature_k**3)


@dataclass(frozen=True)
class StretchedExponential:
    """Decay envelope exp[-(t/T_coh)^beta]."""

    t_coh: float
    beta: float

    def __post_init__(self):
        if self.t_coh <= 0:
            raise ValueError("T_coh must be positive")
        if not 0.0 < self.beta <= 4.0:
            raise ValueError("stretch factor must lie in (0, 4]")


def stretched_envelope(params: StretchedExponential, t) -> np.ndarray | float:
    """Evaluate the stretched-exponential envelope at time(s) t >= 0."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise ValueError("time must be non-negative")
    out = np.exp(-np.power(t_arr / params.t_coh, params.beta))
    return float(out) if np.isscalar(t) else out


# ---------------------------------------------------------------------------
# classical noise models


@dataclass(frozen=True)
class QuasiStaticNoise:
    """Gaussian detuning frozen within each shot; sigma in MHz."""

    sigma: float
    seed: int = 0

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")


@dataclass(frozen=True)
class OuNoise:
    """Ornstein-Uhlenbeck detuning: stationary std sigma (MHz), memory tau_c (us)."""

    sigma: float
    tau_c: float
    seed: int = 0

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")
        if self.tau_c <= 0:
            raise ValueError("correlation time must be positive")


@dataclass(frozen=True)
class AcFieldBath:
    """Random a.c. nuclear fields at one Larmor frequency.

    Each realization carries ``n_components`` cosine fields with independent
    random phases (and optionally Rayleigh amplitudes) whose summed rms
    coupling is ``coupling_rms`` MHz. Many weak components keep the averaged
    coherence non-negative, as a classical picture demands.
    """

    larmor_mhz: float
    coupling_rms: float
    n_components: int = 16
    amplitude_distribution: str = "fixed"
    seed: int = 0

    def __post_init__(self):
        if self.larmor_mhz <= 0:
            raise ValueError("Larmor frequency must be positive")
        if self.coupling_rms < 0:
            raise ValueError("coupling rms must be non-negative")
        if self.n_components < 1:
            raise ValueError("need at least one field component")
        if self.amplitude_distribution not in ("fixed", "rayleigh"):
            raise ValueError("amplitude_distribution must be 'fixed' or 'rayleigh'")


ClassicalNoise = QuasiStaticNoise | OuNoise | AcFieldBath


def ou_trajectory(noise: OuNoise, duration: float, dt: float) -> NoiseTrajectory:
    """Sampled OU path with the exact one-step update (stationary start).

    The update x_{k+1} = rho x_k + sigma sqrt(1-rho^2) xi preserves the
    stationary variance sigma^2 and autocorrelation exp(-dt/tau_c) exactly
    for any step; dt must still resolve the memory (dt <= tau_c / 10) so
    consumers with zero-order hold see a faithful path.
    """
    if duration <= 0:
        raise ValueError("duration must be positive")
    if dt <= 0 or dt > noise.tau_c / 10.0:
        raise ValueError("dt must be positive and at most tau_c / 10")
    steps = int(np.ceil(duration / dt))
    rng = substream(noise.seed, STREAM_NOISE, 0)
    if noise.sigma == 0.0:
        return NoiseTrajectory(dt=dt, values=np.zeros(steps))
    rho = np.exp(-dt / noise.tau_c)
    kick = noise.sigma * np.sqrt(1.0 - rho * rho)
    values = np.empty(steps)
    values[0] = noise.sigma * rng.standard_normal()
    shocks = rng.standard_normal(steps - 1)
    for k in range(steps - 1):
        values[k + 1] = rho * values[k] + kick * shocks[k]
    return NoiseTrajectory(dt=dt, values=values)


def _cpmg_intervals(n: int, tau: float) -> tuple[np.ndarray, np.ndarray]:
    """Toggling intervals for CPMG-n: lengths and signs, t = n*tau total."""
    lengths = np.full(n + 1, tau)
    lengths[0] = lengths[-1] = tau / 2.0
    signs = np.ones(n + 1)
    signs[1::2] = -1.0
    return lengths, signs


def _ou_phases(
    noise: OuNoise, n: int, taus: np.ndarray, realizations: int
) -> np.ndarray:
    """Monte-Carlo toggled phases Phi, shape (len(taus), realizations).

    Per toggling interval the pair (endpoint value, interval integral) is
    drawn from its exact joint Gaussian law given the entry value, so Phi
    carries no time-step error. Realization streams are keyed by index only:
    they are identical for any tau grid size and any schedule.
    """
    draws_per_real = 1 + 2 * (n + 1)
    z = np.empty((realizations, draws_per_real))
    for i in range(realizations):
        z[i] = substream(noise.seed, STREAM_NOISE, i).standard_normal(draws_per_real)

    sigma2 = noise.sigma**2
    tc = noise.tau_c
    phases = np.empty((taus.size, realizations))
    for k, tau in enumerate(taus):
        lengths, signs = _cpmg_intervals(n, tau)
        x = noise.sigma * z[:, 0]
        phi = np.zeros(realizations)
        col = 1
        for h, s in zip(lengths, signs):
            rho = np.exp(-h / tc)
            one_m = 1.0 - rho
            mean_y = x * tc * one_m
            var_x = sigma2 * (1.0 - rho * rho)
            cov_xy = sigma2 * tc * one_m * one_m
            var_y = sigma2 * (2.0 * tc * h - tc * tc * one_m * (3.0 - rho))
            a = np.sqrt(var_x)
            if a > 0:
                b = cov_xy / a
                c = np.sqrt(max(var_y - b * b, 0.0))
            else:
                b = 0.0
                c = np.sqrt(max(var_y, 0.0))
            xi1 = z[:, col]
            xi2 = z[:, col + 1]
            col += 2
            y = mean_y + b * xi1 + c * xi2
            x = rho * x + a * xi1
            phi += s * y
        phases[k] = 2.0 * pi * phi
    return phases


def _ac_phases(
    bath: AcFieldBath, n: int, taus: np.ndarray, realizations: int
) -> np.ndarray:
    """Toggled phases for the a.c. field ensemble, exact per-interval integrals."""
    m = bath.n_components
    thetas = np.empty((realizations, m))
    amps = np.empty((realizations, m))
    for i in range(realizations):
        rng = substream(bath.seed, STREAM_NOISE, i)
        thetas[i] = rng.uniform(0.0, 2.0 * pi, m)
        if bath.amplitude_distribution == "rayleigh":
            amps[i] = rng.rayleigh(scale=1.0 / np.sqrt(2.0), size=m)
        else:
            amps[i] = 1.0
    omega = 2.0 * pi * bath.larmor_mhz
    scale = bath.coupling_rms / np.sqrt(m)

    phases = np.empty((taus.size, realizations))
    for k, tau in enumerate(taus):
        lengths, signs = _cpmg_intervals(n, tau)
        edges = np.concatenate([[0.0], np.cumsum(lengths)])
        # integral of cos(omega t + theta) over the toggled intervals:
        # cos(theta)*a_coef + sin(theta)*b_coef
        sin_edges = np.sin(omega * edges)
        cos_edges = np.cos(omega * edges)
        a_coef = float(np.sum(signs * (sin_edges[1:] - sin_edges[:-1]))) / omega
        b_coef = float(np.sum(signs * (cos_edges[1:] - cos_edges[:-1]))) / omega
        filt = np.cos(thetas) * a_coef + np.sin(thetas) * b_coef
        phases[k] = 2.0 * pi * scale * np.sum(amps * filt, axis=1)
    return phases


def cpmg_coherence_classical(
    noise: ClassicalNoise,
    n: int,
    taus: Sequence[float],
    realizations: int = 500,
    t1_us: float | None = None,
) -> DecayTrace:
    """CPMG-n coherence <cos Phi> under a classical noise model.

    ``taus`` is the swept inter-pulse spacing in us; the trace time axis is
    the total evolution time t = n*tau. The standard error of the ensemble
    mean rides along in the trace. An optional longitudinal lifetime
    multiplies the trace by exp(-t/2T1).
    """
    taus = np.asarray(taus, dtype=float)
    if n < 1 or int(n) != n:
        raise ValueError("n must be a positive integer")
    if np.any(taus <= 0):
        raise ValueError("pulse spacings must be positive")
    if realizations < 1:
        raise ValueError("need at least one realization")

    times = n * taus
    if isinstance(noise, QuasiStaticNoise) or (
        isinstance(noise, OuNoise) and noise.sigma == 0.0
    ) or (isinstance(noise, AcFieldBath) and noise.coupling_rms == 0.0):
        # static detuning refocuses exactly; zero-strength baths are free
        coherence = np.ones_like(times)
        stderr = np.zeros_like(times)
    else:
        if isinstance(noise, OuNoise):
            phases = _ou_phases(noise, int(n), taus, realizations)
        elif isinstance(noise, AcFieldBath):
            phases = _ac_phases(noise, int(n), taus, realizations)
        else:  # pragma: no cover - guarded by the type union
            raise TypeError(f"unsupported classical noise model {noise!r}")
        cos_phi = np.cos(phases)
        coherence = cos_phi.mean(axis=1)
        stderr = cos_phi.std(axis=1, ddof=1) / np.sqrt(realizations)

    metadata = {
        "sequence": "cpmg",
        "n": int(n),
        "model": type(noise).__name__,
        "seed": getattr(noise, "seed", 0),
        "realizations": realizations,
    }
    if t1_us is not None:
        envelope = np.exp(-times / (2.0 * t1_us))
        coherence = coherence * envelope
        stderr = stderr * envelope
        metadata["t1_us"] = t1_us
    return DecayTrace(times=times, coherence=coherence, stderr=stderr, metadata=metadata)


# ---------------------------------------------------------------------------
# quantum central-spin bath (lowest-order cluster expansion)


@dataclass(frozen=True)
class BathNucleus:
    """Spin-1/2 bath nucleus: Larmor f_l, secular A and pseudo-secular B (MHz)."""

    larmor_mhz: float
    a_par_mhz: float
    a_perp_mhz: float


@dataclass(frozen=True)
class QuantumBath:
    nuclei: tuple[BathNucleus, ...]

    def __post_init__(self):
        if not self.nuclei:
            raise ValueError("quantum bath needs at least one nucleus")
        object.__setattr__(self, "nuclei", tuple(self.nuclei))


def _compose(w1, v1, w2, v2):
    """Quaternion product of SU(2) rotations U = w - i v.sigma: U1 after U2."""
    w = w1 * w2 - np.sum(v1 * v2, axis=-1)
    v = (
        w1[..., None] * v2
        + w2[..., None] * v1
        + np.cross(v1, v2)
    )
    return w, v


def _interval_rotation(vec: np.ndarray, h: np.ndarray):
    """Rotation (w, v) for exp(-2*pi*i*(vec.sigma/2)*h), vectorized over h."""
    omega = np.linalg.norm(vec)
    half = pi * omega * h
    w = np.cos(half)
    if omega == 0.0:
        return np.ones_like(h), np.zeros(h.shape + (3,))
    axis = vec / omega
    v = np.sin(half)[..., None] * axis
    return w, v


def nucleus_coherence(nucleus: BathNucleus, n: int, taus: np.ndarray) -> np.ndarray:
    """Re<J0|J1> for one spin-1/2 nucleus under CPMG-n at each tau.

    The electron-conditioned nuclear Hamiltonians are
    h_(+/-) = f_l I_z +/- (A I_z + B I_x)/2; pulses alternate them per the
    toggling pattern and the branch overlap is Tr(U1^dag U0)/2, a real
    number in [-1, 1].
    """
    taus = np.asarray(taus, dtype=float)
    vec_plus = np.array(
        [nucleus.a_perp_mhz / 2.0, 0.0, nucleus.larmor_mhz + nucleus.a_par_mhz / 2.0]
    )
    vec_minus = np.array(
        [-nucleus.a_perp_mhz / 2.0, 0.0, nucleus.larmor_mhz - nucleus.a_par_mhz / 2.0]
    )
    lengths, signs = _cpmg_intervals(n, 1.0)  # unit tau; scale below

    w0 = np.ones_like(taus)
    v0 = np.zeros(taus.shape + (3,))
    w1 = np.ones_like(taus)
    v1 = np.zeros(taus.shape + (3,))
    for h_unit, s in zip(lengths, signs):
        h = h_unit * taus
        vec0 = vec_plus if s > 0 else vec_minus
        vec1 = vec_minus if s > 0 else vec_plus
        dw, dv = _interval_rotation(vec0, h)
        w0, v0 = _compose(dw, dv, w0, v0)
        dw, dv = _interval_rotation(vec1, h)
        w1, v1 = _compose(dw, dv, w1, v1)
    return w0 * w1 + np.sum(v0 * v1, axis=-1)


def cpmg_coherence_quantum(
    bath: QuantumBath,
    n: int,
    taus: Sequence[float],
    t1_us: float | None = None,
) -> DecayTrace:
    """CPMG-n coherence L(t) = prod_nuclei Re<J0|J1>, exact for spin-1/2.

    Values are bounded by [-1, 1]; with strong pseudo-secular coupling and
    large pulse numbers the product can turn negative, which no classical
    phase average reproduces.
    """
    taus = np.asarray(taus, dtype=float)
    if n < 1 or int(n) != n:
        raise ValueError("n must be a positive integer")
    if np.any(taus <= 0):
        raise ValueError("pulse spacings must be positive")
    coherence = np.ones_like(taus)
    for nucleus in bath.nuclei:
        coherence = coherence * nucleus_coherence(nucleus, int(n), taus)
    times = n * taus
    metadata = {
        "sequence": "cpmg",
        "n": int(n),
        "model": "QuantumBath",
        "nuclei": len(bath.nuclei),
        "seed": 0,
    }
    if t1_us is not None:
        coherence = coherence * np.exp(-times / (2.0 * t1_us))
        metadata["t1_us"] = t1_us
    return DecayTrace(times=times, coherence=coherence, stderr=None, metadata=metadata)


def dip_times(n: int, larmor_mhz: float, k_max: int) -> np.ndarray:
    """Coherence-dip times t = (2k-1) n / (2 f_l), ascending, k = 1..k_max."""
    if n < 1:
        raise ValueError("n must be at least 1")
    if larmor_mhz <= 0:
        raise ValueError("Larmor frequency must be positive")
    if k_max < 1:
        raise ValueError("k_max must be at least 1")
    k = np.arange(1, k_max + 1)
    return (2.0 * k - 1.0) * n / (2.0 * larmor_mhz)
