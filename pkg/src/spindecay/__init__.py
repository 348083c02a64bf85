"""Pulsed-EPR simulation and analysis toolkit.

Desk-scale physics of an anisotropic electron-nuclear spin system: powder
spectra, pulse-sequence dynamics (Rabi, inversion recovery, Hahn echo,
CPMG-n, XY-8), classical and quantum decoherence engines, scaling-law
fitting, and amplifier imperfection models. Units: MHz (h = 1), us, Gauss.
"""

from .analysis import (
    FftPeak,
    FitResult,
    extract_envelope,
    fft_peaks,
    figure_of_merit,
    fit_scaling,
    fit_stretched,
    fit_t1_power,
)
from .constants import CODATA, PhysicalConstants
from .decoherence import (
    AcFieldBath,
    BathNucleus,
    OuNoise,
    QuantumBath,
    QuasiStaticNoise,
    RamanRelaxation,
    StretchedExponential,
    cpmg_coherence_classical,
    cpmg_coherence_quantum,
    dip_times,
    ou_trajectory,
    stretched_envelope,
    t1_raman,
)
from .errors import ConvergenceError, HilbertDimensionError, ResonanceNotFoundError
from .instrument import (
    AmplifierModel,
    amplifier_preset,
    apply_imperfections,
    channel_leakage_ratio,
    iq_demodulate,
    phase_droop,
)
from .pulses import (
    Delay,
    DensityState,
    Pulse,
    PulseSequence,
    build_cpmg,
    build_hahn,
    build_inversion_recovery,
    build_rabi,
    build_xy8,
    propagate,
    sequence_propagators,
)
from .spectrum import (
    AxialParameters,
    LineBroadening,
    PowderGrid,
    Spectrum,
    fit_spectrum,
    parallel_edge_fields,
    powder_grid,
    simulate_fsed,
)
from .spinsys import (
    Nucleus,
    Orientation,
    SpinSystem,
    StateLabel,
    Transition,
    hamiltonian,
    resonance_field,
    spin_operators,
    transitions,
)
from .traces import DecayTrace, NoiseTrajectory

__version__ = "0.1.0"
