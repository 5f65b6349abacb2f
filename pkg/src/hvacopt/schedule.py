"""Piecewise disturbance profiles over the simulation horizon."""

from __future__ import annotations

import bisect
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .network import AmbientSample


@dataclass(frozen=True)
class DisturbanceSchedule:
    """Breakpoint profile of outdoor temperature and per-zone heat gains.

    ``breakpoints`` is a time-sorted list of (hours, outdoor degC, gains kW).
    ``hold`` keeps each breakpoint's values until the next one; ``linear``
    interpolates between breakpoints.  Beyond the last breakpoint the final
    values hold.
    """

    breakpoints: tuple[tuple[float, float, np.ndarray], ...]
    interpolation: str = "hold"

    def __post_init__(self):
        if self.interpolation not in ("hold", "linear"):
            raise ConfigError(f"interpolation must be hold|linear, got {self.interpolation!r}")
        if not self.breakpoints:
            raise ConfigError("schedule needs at least one breakpoint")
        bps = []
        n = None
        last_t = None
        for t, outdoor, gains in self.breakpoints:
            gains = np.asarray(gains, dtype=float)
            if n is None:
                n = gains.size
            elif gains.size != n:
                raise ConfigError("all breakpoints must carry the same number of gains")
            if np.any(gains < 0):
                raise ConfigError(f"gains must be >= 0 at t={t} h")
            if last_t is not None and not t > last_t:
                raise ConfigError("breakpoint times must be strictly increasing")
            last_t = t
            bps.append((float(t), float(outdoor), gains))
        if bps[0][0] != 0.0:
            raise ConfigError(f"first breakpoint must be at t=0 h, got {bps[0][0]}")
        object.__setattr__(self, "breakpoints", tuple(bps))

    @property
    def n_zones(self) -> int:
        return self.breakpoints[0][2].size

    @property
    def times_h(self) -> list[float]:
        return [bp[0] for bp in self.breakpoints]

    def sample(self, t_seconds: float) -> AmbientSample:
        """Ambient at an absolute simulation time (seconds)."""
        t_h = t_seconds / 3600.0
        times = self.times_h
        k = bisect.bisect_right(times, t_h) - 1
        k = max(k, 0)
        t0, outdoor0, gains0 = self.breakpoints[k]
        if self.interpolation == "hold" or k == len(self.breakpoints) - 1:
            return AmbientSample(outdoor0, gains0)
        t1, outdoor1, gains1 = self.breakpoints[k + 1]
        lam = np.clip((t_h - t0) / (t1 - t0), 0.0, 1.0)
        return AmbientSample(
            (1 - lam) * outdoor0 + lam * outdoor1,
            (1 - lam) * gains0 + lam * gains1,
        )

    def constant_over(self, t0_seconds: float, t1_seconds: float, tol: float = 1e-9) -> bool:
        """True when the profile does not move anywhere inside [t0, t1].

        Checks the window ends, every breakpoint inside the window, and the
        midpoints between consecutive checkpoints, which is exact for both
        interpolation kinds.
        """
        t0_h, t1_h = t0_seconds / 3600.0, t1_seconds / 3600.0
        knots = [t0_h] + [t for t in self.times_h if t0_h < t < t1_h] + [t1_h]
        checkpoints = []
        for a, b in zip(knots[:-1], knots[1:]):
            checkpoints.extend((a, 0.5 * (a + b)))
        checkpoints.append(t1_h)
        ref = self.sample(t0_seconds)
        for t_h in checkpoints:
            s = self.sample(t_h * 3600.0)
            if abs(s.outdoor - ref.outdoor) > tol or np.any(np.abs(s.gains - ref.gains) > tol):
                return False
        return True
