"""Rotating-frame pulse sequences and two-level density-matrix propagation.

Everything here runs on the resonantly driven electron doublet in the
rotating-wave approximation. Hamiltonians are linear-frequency MHz (h = 1):
during a pulse H = delta*Sz + f1*(cos(phase) Sx + sin(phase) Sy), during a
delay H = delta*Sz, and propagators are exp(-2*pi*i*H*t) with t in us,
evaluated in closed form for 2x2 blocks (exactly unitary).

Sign conventions: the equilibrium state is |m_s=+1/2><+1/2|; the echo
readout reports the negated y spin component, so an ideal Hahn echo
((pi/2)_x - tau/2 - (pi)_y - tau/2) from equilibrium gives +1.

Pulses may be instantaneous (duration 0 with an explicit nominal angle) in
which case detuning and noise are ignored for that rotation, or finite, in
which case the drive competes with the detuning for the whole duration.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from math import cos, pi, sin
from typing import Iterator, Sequence

import numpy as np

from .traces import NoiseTrajectory

SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
IDENTITY = np.eye(2, dtype=complex)

XY8_PHASES = (0.0, pi / 2, 0.0, pi / 2, pi / 2, 0.0, pi / 2, 0.0)


@dataclass(frozen=True)
class Pulse:
    """One microwave pulse: duration (us), drive amplitude, axis phase.

    ``rabi_frequency`` is omega_1/2pi in MHz; the nominal rotation angle is
    2*pi * rabi_frequency * duration unless ``angle`` is given explicitly,
    which is required for instantaneous (duration 0) pulses.
    """

    duration: float
    rabi_frequency: float = 0.0
    phase: float = 0.0
    offset: float = 0.0
    angle: float | None = None

    def __post_init__(self):
        if self.duration < 0:
            raise ValueError("pulse duration must be non-negative")
        if self.rabi_frequency < 0:
            raise ValueError("rabi frequency must be non-negative")
        if self.angle is None:
            object.__setattr__(
                self, "angle", 2.0 * pi * self.rabi_frequency * self.duration
            )
        elif self.duration > 0:
            object.__setattr__(
                self, "rabi_frequency", self.angle / (2.0 * pi * self.duration)
            )

    @property
    def instantaneous(self) -> bool:
        return self.duration == 0.0

    @classmethod
    def instant(cls, angle: float, phase: float = 0.0) -> "Pulse":
        return cls(duration=0.0, phase=phase, angle=angle)

    @classmethod
    def pi_pulse(cls, rabi_frequency: float | None = None, phase: float = 0.0) -> "Pulse":
        if rabi_frequency is None:
            return cls.instant(pi, phase)
        return cls(duration=1.0 / (2.0 * rabi_frequency), rabi_frequency=rabi_frequency, phase=phase)

    @classmethod
    def pi_half_pulse(cls, rabi_frequency: float | None = None, phase: float = 0.0) -> "Pulse":
        if rabi_frequency is None:
            return cls.instant(pi / 2, phase)
        return cls(duration=1.0 / (4.0 * rabi_frequency), rabi_frequency=rabi_frequency, phase=phase)


@dataclass(frozen=True)
class Delay:
    duration: float

    def __post_init__(self):
        if self.duration < 0:
            raise ValueError("delay duration must be non-negative")


READOUTS = ("echo_integrated", "magnetization_z", "coherence_xy")


@dataclass(frozen=True)
class PulseSequence:
    """Ordered pulses and delays plus the readout taken at the end.

    ``evolution_time`` carries the coherence-time bookkeeping t = n*tau for
    decoupling templates (pulse durations excluded); ``readout_window``
    enables a boxcar average of that width centered on the echo apex
    (default off: single sample at the apex).
    """

    elements: tuple
    readout: str = "echo_integrated"
    readout_window: float = 0.0
    evolution_time: float | None = None
    name: str = ""

    def __post_init__(self):
        if self.readout not in READOUTS:
            raise ValueError(f"unknown readout {self.readout!r}")
        if self.readout_window < 0:
            raise ValueError("readout window must be non-negative")
        object.__setattr__(self, "elements", tuple(self.elements))
        for el in self.elements:
            if not isinstance(el, (Pulse, Delay)):
                raise ValueError(f"sequence elements must be Pulse or Delay, got {el!r}")

    @property
    def duration(self) -> float:
        return sum(el.duration for el in self.elements)

    @property
    def pulses(self) -> list[Pulse]:
        return [el for el in self.elements if isinstance(el, Pulse)]


@dataclass(frozen=True)
class DensityState:
    """2x2 density matrix: Hermitian, unit trace, positive semidefinite."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (2, 2):
            raise ValueError("density matrix must be 2x2")
        if np.linalg.norm(m - m.conj().T) > 1e-10:
            raise ValueError("density matrix must be Hermitian")
        if abs(np.trace(m).real - 1.0) > 1e-10:
            raise ValueError("density matrix trace must be 1 within 1e-10")
        evals = np.linalg.eigvalsh(m)
        if np.min(evals) < -1e-10:
            raise ValueError("density matrix must be positive semidefinite")
        object.__setattr__(self, "matrix", m)

    @classmethod
    def equilibrium(cls) -> "DensityState":
        """Thermal pseudo-pure state |m_s=+1/2><+1/2|."""
        return cls(np.array([[1.0, 0.0], [0.0, 0.0]], dtype=complex))

    def bloch(self) -> tuple[float, float, float]:
        m = self.matrix
        return (
            float(np.trace(m @ SIGMA_X).real),
            float(np.trace(m @ SIGMA_Y).real),
            float(np.trace(m @ SIGMA_Z).real),
        )


@dataclass(frozen=True)
class PropagationResult:
    signal: float
    final_state: DensityState


# ---------------------------------------------------------------------------
# sequence templates


def _half_angle_unitary(half_angle: float, axis: np.ndarray) -> np.ndarray:
    return cos(half_angle) * IDENTITY - 1j * sin(half_angle) * (
        axis[0] * SIGMA_X + axis[1] * SIGMA_Y + axis[2] * SIGMA_Z
    )


def _derive_pi_half(pi_pulse: Pulse) -> Pulse:
    if pi_pulse.instantaneous:
        return Pulse.instant(pi_pulse.angle / 2.0, pi_pulse.phase)
    return replace(pi_pulse, duration=pi_pulse.duration / 2.0, angle=None)


def build_rabi(
    tau_p: float,
    tau0: float = 0.4,
    pi_pulse: Pulse = Pulse.instant(pi),
    rabi_frequency: float | None = None,
) -> PulseSequence:
    """Nutation pulse of length tau_p followed by the detection echo block.

    The detection block stores the nutated z component and refocuses it
    (pi/2_x - tau0 - pi_y - tau0 - echo), so the signal follows
    cos(2*pi*f1*tau_p): +1 at tau_p = 0, inverted after a pi nutation.
    """
    if tau_p < 0:
        raise ValueError("nutation pulse length must be non-negative")
    f1 = rabi_frequency if rabi_frequency is not None else pi_pulse.rabi_frequency
    if f1 <= 0 and tau_p > 0:
        raise ValueError("a finite nutation pulse needs a drive amplitude")
    elements: list = []
    if tau_p > 0:
        elements.append(Pulse(duration=tau_p, rabi_frequency=f1, phase=0.0))
    elements.append(Delay(tau0))
    elements.append(replace(_derive_pi_half(pi_pulse), phase=0.0))
    elements.append(Delay(tau0))
    elements.append(replace(pi_pulse, phase=pi / 2))
    elements.append(Delay(tau0))
    return PulseSequence(tuple(elements), readout="echo_integrated", name="rabi")


def build_inversion_recovery(
    tau: float,
    tau0: float = 0.4,
    pi_pulse: Pulse = Pulse.instant(pi),
) -> PulseSequence:
    """Inversion recovery: pi - tau - pi/2 - tau0 - pi - tau0 - echo."""
    if tau < 0:
        raise ValueError("recovery delay must be non-negative")
    elements = (
        replace(pi_pulse, phase=0.0),
        Delay(tau),
        replace(_derive_pi_half(pi_pulse), phase=0.0),
        Delay(tau0),
        replace(pi_pulse, phase=pi / 2),
        Delay(tau0),
    )
    return PulseSequence(elements, readout="echo_integrated", name="inversion_recovery")


def _decoupling_sequence(
    phases: Sequence[float], tau: float, pi2: Pulse, pi_pulse: Pulse, name: str
) -> PulseSequence:
    if tau <= 0:
        raise ValueError("pulse spacing tau must be positive")
    half = tau / 2.0
    for p in (pi2, pi_pulse):
        if p.duration > half:
            raise ValueError(
                f"tau/2 = {half} us cannot accommodate a {p.duration} us pulse"
            )
    elements: list = [replace(pi2, phase=0.0)]
    for phase in phases:
        elements.append(Delay(half))
        elements.append(replace(pi_pulse, phase=phase))
        elements.append(Delay(half))
    n = len(phases)
    return PulseSequence(
        tuple(elements),
        readout="echo_integrated",
        evolution_time=n * tau,
        name=name,
    )


def build_cpmg(
    n: int,
    tau: float,
    pi2: Pulse = Pulse.instant(pi / 2),
    pi_pulse: Pulse = Pulse.instant(pi),
) -> PulseSequence:
    """CPMG-n: (pi/2)_x - {tau/2 - (pi)_y - tau/2}^n - echo; t = n*tau."""
    if n < 1 or int(n) != n:
        raise ValueError("n must be a positive integer")
    return _decoupling_sequence([pi / 2] * int(n), tau, pi2, pi_pulse, f"cpmg-{int(n)}")


def build_hahn(
    tau: float,
    pi2: Pulse = Pulse.instant(pi / 2),
    pi_pulse: Pulse = Pulse.instant(pi),
) -> PulseSequence:
    """Hahn echo, the n = 1 decoupling sequence."""
    return build_cpmg(1, tau, pi2, pi_pulse)


def build_xy8(
    m: int,
    tau: float,
    pi2: Pulse = Pulse.instant(pi / 2),
    pi_pulse: Pulse = Pulse.instant(pi),
) -> PulseSequence:
    """XY-8 with m repetitions of the X-Y-X-Y-Y-X-Y-X block; n = 8m pulses."""
    if m < 1 or int(m) != m:
        raise ValueError("m must be a positive integer")
    return _decoupling_sequence(XY8_PHASES * int(m), tau, pi2, pi_pulse, f"xy8-{int(m)}")


# ---------------------------------------------------------------------------
# propagation


def _segment_unitary(delta: float, f1: float, phase: float, dt: float) -> np.ndarray:
    omega = np.hypot(f1, delta)
    if omega == 0.0 or dt == 0.0:
        return IDENTITY.copy()
    axis = np.array([f1 * cos(phase), f1 * sin(phase), delta]) / omega
    return _half_angle_unitary(pi * omega * dt, axis)


def _iter_segments(
    sequence: PulseSequence,
    detuning: float,
    noise: NoiseTrajectory | None,
    extra_tail: float = 0.0,
) -> Iterator[tuple[float, np.ndarray]]:
    """Yield (duration, unitary) segments, splitting on the noise grid."""

    def ambient(t0: float, span: float, f1: float, phase: float, offs: float):
        if noise is None or span == 0.0:
            yield span, _segment_unitary(detuning + offs + (noise.at(t0) if noise else 0.0), f1, phase, span)
            return
        t = t0
        remaining = span
        while remaining > 1e-15:
            k = int(t / noise.dt)
            boundary = (k + 1) * noise.dt
            step = min(remaining, boundary - t)
            if step <= 0:
                step = remaining
            yield step, _segment_unitary(
                detuning + offs + noise.at(t), f1, phase, step
            )
            t += step
            remaining -= step

    t_cursor = 0.0
    for el in sequence.elements:
        if isinstance(el, Pulse):
            if el.instantaneous:
                if el.angle != 0.0:
                    yield 0.0, _half_angle_unitary(
                        el.angle / 2.0,
                        np.array([cos(el.phase), sin(el.phase), 0.0]),
                    )
                continue
            yield from ambient(t_cursor, el.duration, el.rabi_frequency, el.phase, el.offset)
            t_cursor += el.duration
        else:
            yield from ambient(t_cursor, el.duration, 0.0, 0.0, 0.0)
            t_cursor += el.duration
    if extra_tail > 0.0:
        yield from ambient(t_cursor, extra_tail, 0.0, 0.0, 0.0)


def sequence_propagators(
    sequence: PulseSequence,
    detuning: float = 0.0,
    noise: NoiseTrajectory | None = None,
) -> list[np.ndarray]:
    """Per-segment unitaries in time order (no relaxation)."""
    return [u for _, u in _iter_segments(sequence, detuning, noise)]


def _apply_t1(matrix: np.ndarray, duration: float, t1_us: float) -> np.ndarray:
    # exact amplitude damping toward |m_s=+1/2>: transverse decays as
    # exp(-t/2T1), longitudinal approaches equilibrium as exp(-t/T1)
    p = 1.0 - np.exp(-duration / t1_us)
    k0 = np.array([[1.0, 0.0], [0.0, np.sqrt(1.0 - p)]], dtype=complex)
    k1 = np.array([[0.0, np.sqrt(p)], [0.0, 0.0]], dtype=complex)
    return k0 @ matrix @ k0.conj().T + k1 @ matrix @ k1.conj().T


def _check_noise_resolution(sequence: PulseSequence, noise: NoiseTrajectory | None):
    if noise is None:
        return
    finite = [p.duration for p in sequence.pulses if p.duration > 0]
    if finite and noise.dt > min(finite) / 4.0 + 1e-15:
        raise ValueError(
            "noise sample spacing must be at most a quarter of the shortest pulse"
        )


def propagate(
    initial: DensityState,
    sequence: PulseSequence,
    detuning: float = 0.0,
    noise: NoiseTrajectory | None = None,
    t1_us: float | None = None,
) -> PropagationResult:
    """Propagate a density state through a sequence and read out the signal.

    ``detuning`` is a static frequency offset in MHz; ``noise`` adds a
    sampled time-dependent detuning (zero-order hold). ``t1_us`` applies
    longitudinal relaxation toward equilibrium during every finite segment.
    """
    _check_noise_resolution(sequence, noise)
    rho = initial.matrix.copy()

    def step(matrix: np.ndarray, duration: float, u: np.ndarray) -> np.ndarray:
        matrix = u @ matrix @ u.conj().T
        if t1_us is not None and duration > 0.0:
            matrix = _apply_t1(matrix, duration, t1_us)
        return matrix

    if sequence.readout == "echo_integrated" and sequence.readout_window > 0.0:
        window = sequence.readout_window
        target = sequence.duration - window / 2.0
        if target < 0:
            raise ValueError("readout window does not fit inside the sequence")
        samples: list[float] = []
        elapsed = 0.0
        n_samples = 16
        sample_times = [target + window * k / (n_samples - 1) for k in range(n_samples)]
        next_idx = 0
        for duration, u in _iter_segments(sequence, detuning, noise, extra_tail=window / 2.0):
            # split segments at pending sample instants
            seg_end = elapsed + duration
            while next_idx < n_samples and sample_times[next_idx] <= seg_end + 1e-12:
                t_s = sample_times[next_idx]
                part = max(t_s - elapsed, 0.0)
                u_part = _fractional_unitary(u, duration, part)
                rho_s = step(rho, part, u_part)
                samples.append(-float(np.trace(rho_s @ SIGMA_Y).real))
                next_idx += 1
            rho = step(rho, duration, u)
            elapsed = seg_end
        signal = float(np.mean(samples))
        return PropagationResult(signal=signal, final_state=DensityState(rho))

    for duration, u in _iter_segments(sequence, detuning, noise):
        rho = step(rho, duration, u)

    state = DensityState(rho)
    x, y, z = state.bloch()
    if sequence.readout == "echo_integrated":
        signal = -y
    elif sequence.readout == "magnetization_z":
        signal = z
    else:
        signal = float(np.hypot(x, y))
    return PropagationResult(signal=signal, final_state=state)


def _fractional_unitary(u: np.ndarray, full: float, part: float) -> np.ndarray:
    """Unitary for the first ``part`` of a constant-Hamiltonian segment."""
    if full <= 0.0 or part >= full:
        return u
    if part <= 0.0:
        return IDENTITY.copy()
    from scipy.linalg import fractional_matrix_power

    return np.asarray(fractional_matrix_power(u, part / full), dtype=complex)


def quadrature_components(state: DensityState) -> tuple[float, float]:
    """(I, Q) demodulator view of a state: in-phase echo and quadrature."""
    x, y, _ = state.bloch()
    return -y, x
