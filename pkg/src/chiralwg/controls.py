"""Time-dependent control waveforms for photon pulse shaping.

All waveforms are immutable and evaluate elementwise on scalars or arrays.
Times are in units of ``1/gamma_ph`` by convention but nothing here depends on
that choice.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

DEFAULT_WINDOW = 24.0


class BandwidthTooLarge(ValueError):
    """The photon bandwidth is not below the resonator coupling rate."""


def _check_bandwidth(gamma_ph: float) -> None:
    if not gamma_ph > 0:
        raise ValueError(f"photon bandwidth must be positive, got {gamma_ph}")


def sech_envelope(t, gamma_ph: float):
    """Normalized time-symmetric sech wave packet ``sqrt(gamma_ph)/2 * sech(gamma_ph t/2)``."""
    _check_bandwidth(gamma_ph)
    u = 0.5 * gamma_ph * np.asarray(t, dtype=float)
    return 0.5 * np.sqrt(gamma_ph) / np.cosh(u)


def sech_flux(t, gamma_ph: float):
    """Photon flux ``|phi(t)|^2`` of the sech wave packet."""
    return sech_envelope(t, gamma_ph) ** 2


def gamma_modulation(t, gamma_ph: float):
    """Decay rate that makes an emitter radiate the sech wave packet.

    Evaluated in the bounded form ``gamma_ph/2 * (1 + tanh(gamma_ph t/2))``,
    identical to ``gamma_ph/2 * sech^2(u) / (1 - tanh(u))`` but free of the
    0/0 at large positive times. Rises monotonically from 0 to ``gamma_ph``.
    """
    _check_bandwidth(gamma_ph)
    u = 0.5 * gamma_ph * np.asarray(t, dtype=float)
    return 0.5 * gamma_ph * (1.0 + np.tanh(u))


def g_modulation(t, gamma_ph: float, gamma: float):
    """Qubit-resonator coupling that shapes the emission through a resonator of rate ``gamma``.

    With ``u = gamma_ph t / 2`` and ``r = gamma / gamma_ph`` the closed form

        g = gamma_ph / (4 cosh u) * (1 - e^{2u} + (1 + e^{2u}) r) / sqrt((1 + e^{2u}) r - e^{2u})

    is evaluated as ``gamma_ph/2 * (r - tanh u) / sqrt(r (1 + e^{-2u}) - 1)`` for
    ``u > 0`` and with numerator and denominator scaled by ``e^u`` otherwise.

    Raises
    ------
    BandwidthTooLarge
        If ``gamma_ph >= gamma``.
    """
    _check_bandwidth(gamma_ph)
    if not gamma_ph < gamma:
        raise BandwidthTooLarge(
            f"BandwidthTooLarge: photon bandwidth gamma_ph={gamma_ph} must be below gamma={gamma}"
        )
    r = gamma / gamma_ph
    u = 0.5 * gamma_ph * np.asarray(t, dtype=float)
    pos = u > 0
    up = np.where(pos, u, 0.0)
    un = np.where(pos, 0.0, u)
    g_pos = (r - np.tanh(up)) / np.sqrt(r * (1.0 + np.exp(-2.0 * up)) - 1.0)
    e = np.exp(un)
    g_neg = (r - np.tanh(un)) * e / np.sqrt(r + (r - 1.0) * e * e)
    return 0.5 * gamma_ph * np.where(pos, g_pos, g_neg)


# --------------------------------------------------------------------------
# Waveform objects


@dataclass(frozen=True)
class Waveform:
    """Base class; subclasses implement ``_eval``."""

    domain: tuple[float, float] = field(default=(-np.inf, np.inf), kw_only=True)

    def __call__(self, t):
        return self._eval(np.asarray(t, dtype=float))

    def _eval(self, t):  # pragma: no cover - abstract
        raise NotImplementedError

    def reversed(self) -> "Waveform":
        return time_reverse(self)


@dataclass(frozen=True)
class Zero(Waveform):
    def _eval(self, t):
        return np.zeros_like(t)


@dataclass(frozen=True)
class Constant(Waveform):
    value: float = 0.0

    def _eval(self, t):
        return np.full_like(t, self.value)


@dataclass(frozen=True)
class SechEnvelope(Waveform):
    gamma_ph: float = 1.0

    def _eval(self, t):
        return sech_envelope(t, self.gamma_ph)


@dataclass(frozen=True)
class GammaModulation(Waveform):
    gamma_ph: float = 1.0

    def _eval(self, t):
        return gamma_modulation(t, self.gamma_ph)


@dataclass(frozen=True)
class GModulation(Waveform):
    gamma_ph: float = 1.0
    gamma: float = 2.0

    def __post_init__(self):
        if not self.gamma_ph < self.gamma:
            raise BandwidthTooLarge(
                f"BandwidthTooLarge: photon bandwidth gamma_ph={self.gamma_ph} must be below gamma={self.gamma}"
            )

    def _eval(self, t):
        return g_modulation(t, self.gamma_ph, self.gamma)


@dataclass(frozen=True)
class GeometricMean(Waveform):
    """``scale * sqrt(a(t) * b(t))``; used for the two-qubit cancellation coupling."""

    a: Waveform = field(default_factory=Zero)
    b: Waveform = field(default_factory=Zero)
    scale: float = 1.0

    def _eval(self, t):
        return self.scale * np.sqrt(np.clip(self.a(t) * self.b(t), 0.0, None))


@dataclass(frozen=True)
class TimeReversed(Waveform):
    inner: Waveform = field(default_factory=Zero)

    def _eval(self, t):
        return self.inner(-t)


@dataclass(frozen=True)
class Tabulated(Waveform):
    """Linear interpolation on a uniform grid; boundary values held outside it."""

    times: tuple[float, ...] = ()
    values: tuple[float, ...] = ()

    def __post_init__(self):
        if len(self.times) != len(self.values) or len(self.times) < 2:
            raise ValueError("tabulated waveform needs matching times/values with at least 2 samples")
        ts = np.asarray(self.times)
        steps = np.diff(ts)
        if np.any(steps <= 0):
            raise ValueError("tabulated times must be strictly increasing")
        if not np.allclose(steps, steps[0], rtol=1e-6, atol=0):
            raise ValueError("tabulated times must lie on a uniform grid")
        if self.domain == (-np.inf, np.inf):
            object.__setattr__(self, "domain", (float(ts[0]), float(ts[-1])))
        object.__setattr__(self, "_ts", ts)
        object.__setattr__(self, "_vs", np.asarray(self.values))

    @classmethod
    def from_arrays(cls, times, values) -> "Tabulated":
        return cls(times=tuple(float(x) for x in times), values=tuple(float(x) for x in values))

    def _eval(self, t):
        return np.interp(t, self._ts, self._vs)


def time_reverse(w: Waveform) -> Waveform:
    """``t -> w(-t)``; reversing twice returns the original object."""
    if isinstance(w, TimeReversed):
        return w.inner
    lo, hi = w.domain
    return TimeReversed(domain=(-hi, -lo), inner=w)


@dataclass(frozen=True)
class ControlSet:
    """Waveforms driving one protocol run. Missing entries are ``None``."""

    gamma1: Optional[Waveform] = None
    gamma2: Optional[Waveform] = None
    g1: Optional[Waveform] = None
    g2: Optional[Waveform] = None
    gamma_a: Optional[Waveform] = None
    g_c: Optional[Waveform] = None

    def time_reversed(self, keep: tuple[str, ...] = ()) -> "ControlSet":
        """Mirror every waveform in time except the names in ``keep``."""
        changes = {}
        for name in ("gamma1", "gamma2", "g1", "g2", "gamma_a", "g_c"):
            w = getattr(self, name)
            if w is not None and name not in keep:
                changes[name] = time_reverse(w)
        return replace(self, **changes)

    def with_(self, **changes) -> "ControlSet":
        return replace(self, **changes)
