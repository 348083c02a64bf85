"""Physical constants used across the toolkit.

Unit system: energies are linear frequencies in MHz (h = 1), times in
microseconds, magnetic fields in Gauss. Every module receives constants
through a :class:`PhysicalConstants` record; nothing inlines its own copy.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping


@dataclass(frozen=True)
class PhysicalConstants:
    """Conversion prefactors for electron and nuclear Zeeman terms.

    Attributes
    ----------
    electron_prefactor_mhz_per_g:
        Bohr magneton over Planck constant, MHz per Gauss per unit g
        (CODATA: 1.3996245 MHz/G).
    nuclear_prefactor_khz_per_g:
        Nuclear magneton over Planck constant, kHz per Gauss.
    proton_g:
        Proton g factor; proton Larmor prefactor is
        ``proton_g * nuclear_prefactor_khz_per_g`` (about 4.258 kHz/G).
    """

    electron_prefactor_mhz_per_g: float = 1.3996244936
    nuclear_prefactor_khz_per_g: float = 0.7622593285
    proton_g: float = 5.5856946893

    def __post_init__(self) -> None:
        if not 1.39 <= self.electron_prefactor_mhz_per_g <= 1.41:
            raise ValueError(
                "electron prefactor outside the physical window [1.39, 1.41] MHz/G"
            )
        larmor = self.proton_g * self.nuclear_prefactor_khz_per_g
        if not 4.25 <= larmor <= 4.26:
            raise ValueError(
                f"proton Larmor prefactor {larmor:.4f} kHz/G outside [4.25, 4.26]"
            )

    @property
    def nuclear_prefactor_mhz_per_g(self) -> float:
        return self.nuclear_prefactor_khz_per_g * 1e-3

    def proton_larmor_mhz(self, field_g: float) -> float:
        """Proton Larmor frequency in MHz at a field in Gauss."""
        return self.proton_g * self.nuclear_prefactor_mhz_per_g * field_g

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, float]) -> "PhysicalConstants":
        """Build from a config mapping; missing keys keep CODATA defaults."""
        kwargs = {}
        for key in (
            "electron_prefactor_mhz_per_g",
            "nuclear_prefactor_khz_per_g",
            "proton_g",
        ):
            if key in mapping:
                kwargs[key] = float(mapping[key])
        return cls(**kwargs)


CODATA = PhysicalConstants()
