"""Sampled time-series containers and their CSV forms.

DecayTrace is the common currency between the decoherence engines, the
fitting code, and the CLI: coherence versus total evolution time plus the
metadata needed to reproduce the run. NoiseTrajectory carries a sampled
detuning time-series into the pulse propagator (zero-order hold).
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np


def format_float(x: float) -> str:
    """Shortest decimal that round-trips to the same float."""
    return repr(float(x))


@dataclass(frozen=True)
class NoiseTrajectory:
    """Detuning samples delta(t_k) in MHz on a uniform grid, zero-order hold."""

    dt: float
    values: np.ndarray

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("sample spacing must be positive")
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))

    @property
    def duration(self) -> float:
        return self.dt * len(self.values)

    def at(self, t: float) -> float:
        """Sample in effect at time t (last sample extends to infinity)."""
        idx = min(int(t / self.dt), len(self.values) - 1)
        return float(self.values[max(idx, 0)])


@dataclass(frozen=True)
class DecayTrace:
    """Coherence vs total evolution time with provenance metadata."""

    times: np.ndarray
    coherence: np.ndarray
    stderr: np.ndarray | None = None
    metadata: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        coh = np.asarray(self.coherence, dtype=float)
        if times.shape != coh.shape:
            raise ValueError("times and coherence must have matching shapes")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "coherence", coh)
        if self.stderr is not None:
            err = np.asarray(self.stderr, dtype=float)
            if err.shape != times.shape:
                raise ValueError("stderr must match times in shape")
            object.__setattr__(self, "stderr", err)
        object.__setattr__(self, "metadata", dict(self.metadata))

    def to_csv(self) -> str:
        buf = io.StringIO()
        for key in sorted(self.metadata):
            buf.write(f"# {key} = {self.metadata[key]}\n")
        buf.write("t_us,coherence,stderr\n")
        err = self.stderr if self.stderr is not None else np.full_like(self.times, np.nan)
        for t, c, e in zip(self.times, self.coherence, err):
            buf.write(f"{format_float(t)},{format_float(c)},{format_float(e)}\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "DecayTrace":
        metadata: dict[str, object] = {}
        rows = []
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, value = line[1:].partition("=")
                metadata[key.strip()] = value.strip()
                continue
            if line.startswith("t_us"):
                continue
            rows.append([float(x) for x in line.split(",")])
        data = np.array(rows, dtype=float).reshape(-1, 3)
        err = data[:, 2]
        return cls(
            times=data[:, 0],
            coherence=data[:, 1],
            stderr=None if np.all(np.isnan(err)) else err,
            metadata=metadata,
        )
