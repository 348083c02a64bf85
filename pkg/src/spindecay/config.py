"""Experiment configuration: sectioned key=value files with includes.

A config is INI-style text. The [experiment] section names the experiment
type and the root seed; further sections configure the spin system, the
sequence, the noise model, the instrument model, and output paths. An
optional [include] section pulls in other config files first (their values
are overlaid by the including file). Command-line overrides arrive as
"section.key=value" strings and win over everything.

All referenced blocks are validated into domain objects before any
computation starts; validation failures carry the config file and line.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .decoherence import AcFieldBath, BathNucleus, OuNoise, QuantumBath, QuasiStaticNoise
from .instrument import AmplifierModel, amplifier_preset
from .spectrum import LineBroadening, powder_grid
from .spinsys import SpinSystem

EXPERIMENTS = ("fsed", "rabi", "t1", "cpmg", "xy8", "dips", "fit")


class ConfigError(ValueError):
    """Invalid configuration; message carries file and line when known."""


def _line_of(text: str, token: str) -> int | None:
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if stripped.startswith(token) or stripped.startswith(f"[{token}]"):
            return lineno
    return None


@dataclass
class ExperimentConfig:
    """Validated view over the merged key=value sections."""

    experiment: str
    seed: int
    sections: dict[str, dict[str, str]]
    source: Path | None = None
    text: str = ""

    def section(self, name: str) -> dict[str, str]:
        return self.sections.get(name, {})

    def _fail(self, section: str, key: str, message: str):
        anchor = ""
        if self.source is not None:
            line = _line_of(self.text, key) or _line_of(self.text, section)
            anchor = f"{self.source}:{line or '?'}: "
        raise ConfigError(f"{anchor}[{section}] {key}: {message}")

    def get(self, section: str, key: str, default=None, required: bool = False) -> str:
        sec = self.section(section)
        if key in sec:
            return sec[key]
        if required:
            self._fail(section, key, "required key is missing")
        return default

    def get_float(self, section: str, key: str, default=None, required=False) -> float:
        raw = self.get(section, key, default=default, required=required)
        if raw is None:
            return None
        try:
            return float(raw)
        except (TypeError, ValueError):
            self._fail(section, key, f"expected a number, got {raw!r}")

    def get_int(self, section: str, key: str, default=None, required=False) -> int:
        raw = self.get(section, key, default=default, required=required)
        if raw is None:
            return None
        try:
            return int(str(raw))
        except (TypeError, ValueError):
            self._fail(section, key, f"expected an integer, got {raw!r}")

    def get_floats(self, section: str, key: str, default=None, required=False) -> list[float]:
        raw = self.get(section, key, default=default, required=required)
        if raw is None:
            return None
        if isinstance(raw, (list, tuple)):
            return [float(x) for x in raw]
        try:
            return [float(x) for x in str(raw).replace(";", ",").split(",") if x.strip()]
        except ValueError:
            self._fail(section, key, f"expected comma-separated numbers, got {raw!r}")

    # ------------------------------------------------------------------
    # domain-object builders

    def spin_system(self) -> SpinSystem:
        sec = "spin_system"
        g_par = self.get_float(sec, "g_par", required=True)
        g_perp = self.get_float(sec, "g_perp", required=True)
        a_par = self.get_float(sec, "A_par_MHz", required=True)
        a_perp = self.get_float(sec, "A_perp_MHz", required=True)
        spin = self.get_float(sec, "I", required=True)
        g_n = self.get_float(sec, "g_n", required=True)
        try:
            return SpinSystem.axial(g_par, g_perp, abs(a_par), abs(a_perp), spin, g_n)
        except ValueError as exc:
            self._fail(sec, "I", str(exc))

    def powder(self, section: str):
        scheme = self.get(section, "grid_scheme", default="equal-area-spiral")
        count = self.get_int(section, "grid_count", default=4096)
        try:
            return powder_grid(scheme, count)
        except ValueError as exc:
            self._fail(section, "grid_scheme", str(exc))

    def broadening(self, section: str) -> LineBroadening:
        shape = self.get(section, "broadening_shape", default="gaussian")
        width = self.get_float(section, "broadening_width_G", default=8.0)
        try:
            return LineBroadening(shape, width)
        except ValueError as exc:
            self._fail(section, "broadening_shape", str(exc))

    def noise_model(self, section: str):
        kind = self.get(section, "noise", default="ou").lower()
        seed = self.seed
        if kind == "ou":
            return OuNoise(
                sigma=self.get_float(section, "sigma_MHz", default=0.5),
                tau_c=self.get_float(section, "tau_c_us", default=100.0),
                seed=seed,
            )
        if kind == "ac":
            return AcFieldBath(
                larmor_mhz=self.get_float(section, "f_l_MHz", default=14.3),
                coupling_rms=self.get_float(section, "b_MHz", default=0.6),
                n_components=self.get_int(section, "n_components", default=16),
                amplitude_distribution=self.get(
                    section, "amplitude_distribution", default="fixed"
                ),
                seed=seed,
            )
        if kind == "quasistatic":
            return QuasiStaticNoise(
                sigma=self.get_float(section, "sigma_MHz", default=0.5), seed=seed
            )
        if kind == "quantum":
            return self.quantum_bath(section)
        self._fail(section, "noise", f"unknown noise model {kind!r}")

    def quantum_bath(self, section: str) -> QuantumBath:
        raw = self.get(section, "nuclei", required=True)
        nuclei = []
        try:
            for item in str(raw).split(","):
                item = item.strip()
                if not item:
                    continue
                f_l, a_par, a_perp = (float(x) for x in item.split(":"))
                nuclei.append(BathNucleus(f_l, a_par, a_perp))
            return QuantumBath(tuple(nuclei))
        except (ValueError, TypeError):
            self._fail(
                section, "nuclei", f"expected 'f_l:A:B, f_l:A:B, ...', got {raw!r}"
            )

    def amplifier(self, section: str = "instrument") -> AmplifierModel | None:
        name = self.get(section, "amplifier", default="none")
        jitter = self.get_float(section, "amplitude_jitter_rel", default=0.0)
        if name == "none":
            if jitter > 0.0:
                return AmplifierModel(0.0, 1.0, amplitude_jitter_rel=jitter)
            return None
        try:
            return amplifier_preset(name, amplitude_jitter_rel=jitter)
        except ValueError as exc:
            self._fail(section, "amplifier", str(exc))

    def output_dir(self) -> Path:
        return Path(self.get("output", "directory", default="out"))

    def output_prefix(self) -> str:
        return self.get("output", "prefix", default=self.experiment)


def _read_ini(path: Path) -> configparser.ConfigParser:
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    parser.optionxform = str  # keys are case-sensitive
    try:
        with open(path, "r", encoding="utf-8") as fh:
            parser.read_file(fh)
    except (configparser.Error, OSError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return parser


def _merge(base: dict[str, dict[str, str]], extra: dict[str, dict[str, str]]):
    for section, values in extra.items():
        base.setdefault(section, {}).update(values)


def _load_sections(path: Path, seen: frozenset[Path]) -> dict[str, dict[str, str]]:
    path = path.resolve()
    if path in seen:
        raise ConfigError(f"{path}: circular include")
    parser = _read_ini(path)
    sections: dict[str, dict[str, str]] = {}
    include_files = []
    for section in parser.sections():
        values = dict(parser.items(section))
        if section == "include":
            raw = values.get("files", "")
            include_files = [f.strip() for f in raw.split(",") if f.strip()]
            continue
        sections[section] = values
    merged: dict[str, dict[str, str]] = {}
    for name in include_files:
        included = _load_sections(
            (path.parent / name) if not Path(name).is_absolute() else Path(name),
            seen | {path},
        )
        _merge(merged, included)
    _merge(merged, sections)
    return merged


def parse_config(
    path: str | Path,
    overrides: list[str] | None = None,
) -> ExperimentConfig:
    """Load, merge includes, apply overrides, and validate the header."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"{path}: no such config file")
    text = path.read_text(encoding="utf-8")
    sections = _load_sections(path, frozenset())
    for item in overrides or []:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"override {item!r} must look like section.key=value")
        target, value = item.split("=", 1)
        section, key = target.split(".", 1)
        sections.setdefault(section.strip(), {})[key.strip()] = value.strip()

    config = ExperimentConfig(
        experiment="",
        seed=0,
        sections=sections,
        source=path,
        text=text,
    )
    experiment = config.get("experiment", "type", required=True)
    if experiment not in EXPERIMENTS:
        config._fail("experiment", "type", f"must be one of {EXPERIMENTS}")
    config.experiment = experiment
    config.seed = config.get_int("experiment", "seed", default=12345)
    return config
