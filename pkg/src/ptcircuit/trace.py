"""Uniformly sampled time evolution of the resonator state."""

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, FormatError

CHANNELS = ("V1", "V2", "dV1", "dV2")


@dataclass(frozen=True)
class Trace:
    """Samples of psi = (V1, V2, dV1/dtau, dV2/dtau) on a uniform tau grid.

    ``samples`` has shape ``(n, 4)``; measured single-node data is stored
    with shape ``(n, 1)`` and only exposes channel 1.

    When an integration ends on a time that is not on the sampling grid, the
    endpoint is kept apart in ``final_time``/``final_state`` so that
    ``samples`` stays uniform.
    """

    dt: float
    samples: np.ndarray
    t0: float = 0.0
    final_time: float | None = field(default=None)
    final_state: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        samples = np.array(self.samples, dtype=float)
        if samples.ndim == 1:
            samples = samples[:, None]
        if samples.ndim != 2 or samples.shape[1] not in (1, 4):
            raise DomainError(f"trace samples must have 1 or 4 columns, got shape {samples.shape}")
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise DomainError(f"trace dt must be positive, got {self.dt}")
        if samples.shape[0] < 2:
            raise DomainError("trace needs at least 2 samples")
        if not np.all(np.isfinite(samples)):
            raise DomainError("trace contains non-finite samples")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)
        if self.final_state is not None:
            fs = np.array(self.final_state, dtype=float)
            fs.setflags(write=False)
            object.__setattr__(self, "final_state", fs)

    @classmethod
    def from_columns(cls, tau, values, rtol=1e-6):
        """Build a trace from an explicit time column, checking uniform spacing."""
        tau = np.asarray(tau, dtype=float)
        values = np.asarray(values, dtype=float)
        if tau.ndim != 1 or tau.size < 2:
            raise FormatError("time column needs at least 2 entries")
        steps = np.diff(tau)
        dt = (tau[-1] - tau[0]) / (tau.size - 1)
        if dt <= 0 or np.max(np.abs(steps - dt)) > rtol * dt:
            raise FormatError("time column is not uniformly spaced")
        return cls(dt=float(dt), samples=values, t0=float(tau[0]))

    @property
    def n_samples(self):
        return self.samples.shape[0]

    @property
    def times(self):
        return self.t0 + self.dt * np.arange(self.n_samples)

    @property
    def is_single_node(self):
        return self.samples.shape[1] == 1

    def voltage(self, channel=1):
        """Voltage series of node 1 or 2."""
        if channel not in (1, 2):
            raise DomainError(f"channel must be 1 or 2, got {channel}")
        if self.is_single_node:
            if channel != 1:
                raise DomainError("single-node trace only has channel 1")
            return self.samples[:, 0]
        return self.samples[:, channel - 1]

    def endpoint(self):
        """(time, state) at the end of the integration."""
        if self.final_time is not None:
            return self.final_time, self.final_state
        return float(self.times[-1]), self.samples[-1]
