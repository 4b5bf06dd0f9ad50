"""Outgoing fields, integrated probabilities and pulse metrics."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .dynamics import Trajectory
from .linop import dag
from .molecule import Model, OutputTerm


class Direction(str, enum.Enum):
    RIGHT = "Right"
    LEFT = "Left"


class NoEmission(ValueError):
    """Both directions carry (numerically) zero photon probability."""


class ZeroNorm(ValueError):
    pass


@dataclass
class FluxSeries:
    times: np.ndarray
    n_R: np.ndarray
    n_L: np.ndarray
    beta_R: np.ndarray
    beta_L: np.ndarray
    populations: dict = field(default_factory=dict)


@dataclass
class MetricSet:
    P_R: float = float("nan")
    P_L: float = float("nan")
    directionality: float = float("nan")
    pulse_fidelity: float = float("nan")
    state_fidelity: float = float("nan")
    transmittance: float = float("nan")
    reflectance: float = float("nan")
    group_delay_est: float = float("nan")

    def as_dict(self) -> dict:
        return {k: float(v) for k, v in self.__dict__.items()}


def _channel(traj: Trajectory, terms: tuple[OutputTerm, ...]) -> tuple[np.ndarray, np.ndarray]:
    """Amplitude ``<b>`` and flux ``<b^dag b>`` of ``b = sum_k c_k(t) op_k``."""
    t = traj.times
    coef = [term.amplitude(t) for term in terms]
    beta = np.zeros(t.size, dtype=complex)
    flux = np.zeros(t.size, dtype=complex)
    for ck, tk in zip(coef, terms):
        beta += ck * traj.expect(tk.op)
        for cl, tl in zip(coef, terms):
            flux += np.conj(ck) * cl * traj.expect(dag(tk.op) @ tl.op)
    return beta, flux.real


def flux_and_amplitude(traj: Trajectory, model: Optional[Model] = None) -> FluxSeries:
    """Right/left fluxes and amplitudes from the input-output relations (vacuum inputs)."""
    model = model or traj.model
    if model.layout != traj.model.layout:
        raise ValueError("trajectory and model describe different Hilbert spaces")
    beta_R, n_R = _channel(traj, model.out_right)
    beta_L, n_L = _channel(traj, model.out_left)
    pops = {}
    ops = model.ops
    if "sigma1" in ops:
        pops["pop_1"] = traj.expect(dag(ops["sigma1"]) @ ops["sigma1"]).real
        pops["pop_2"] = traj.expect(dag(ops["sigma2"]) @ ops["sigma2"]).real
        pops["res_1"] = traj.expect(dag(ops["L1"]) @ ops["L1"]).real
        pops["res_2"] = traj.expect(dag(ops["L2"]) @ ops["L2"]).real
    else:
        key = "pop" if "q1" in model.layout else "res"
        pops[f"{key}_1"] = traj.expect(dag(ops["L1"]) @ ops["L1"]).real
        pops[f"{key}_2"] = traj.expect(dag(ops["L2"]) @ ops["L2"]).real
    if "sigma_a" in ops:
        pops["ancilla"] = traj.expect(dag(ops["sigma_a"]) @ ops["sigma_a"]).real
    return FluxSeries(times=traj.times, n_R=n_R, n_L=n_L, beta_R=beta_R, beta_L=beta_L, populations=pops)


def _check_uniform(times: np.ndarray) -> None:
    if times.size < 2:
        raise ValueError("empty flux series")
    steps = np.diff(times)
    if not np.allclose(steps, steps[0], rtol=1e-9, atol=0):
        raise ValueError("time grid must be uniform")


def emission_probabilities(fs: FluxSeries) -> tuple[float, float]:
    """Trapezoidal ``(P_R, P_L)``."""
    _check_uniform(fs.times)
    return float(np.trapezoid(fs.n_R, fs.times)), float(np.trapezoid(fs.n_L, fs.times))


def directionality(p_r: float, p_l: float, intended: Direction | str = Direction.RIGHT) -> float:
    total = p_r + p_l
    if not total > 1e-12:
        raise NoEmission(f"no emission: P_R={p_r}, P_L={p_l}")
    intended = Direction(intended)
    return (p_r if intended is Direction.RIGHT else p_l) / total


def _normalize(times, amp):
    norm = np.sqrt(np.trapezoid(np.abs(amp) ** 2, times))
    if not norm > 0:
        raise ZeroNorm("zero-norm wave packet")
    return amp / norm


def pulse_fidelity(times: np.ndarray, measured: np.ndarray, target: np.ndarray, shift: float = 0.0) -> float:
    """``|int conj(target(t)) * measured_n(t + shift) dt|^2`` of the normalized packets.

    ``measured`` is sampled on ``times`` and linearly interpolated for the shift;
    samples shifted outside the recorded window count as zero.
    """
    times = np.asarray(times, dtype=float)
    _check_uniform(times)
    m = _normalize(times, np.asarray(measured, dtype=complex))
    tgt = _normalize(times, np.asarray(target, dtype=complex))
    if shift:
        ts = times + shift
        m = np.interp(ts, times, m.real, left=0.0, right=0.0) + 1j * np.interp(
            ts, times, m.imag, left=0.0, right=0.0)
    overlap = np.trapezoid(np.conj(tgt) * m, times)
    return float(min(abs(overlap) ** 2, 1.0))


def state_fidelity(rho: np.ndarray, target: np.ndarray) -> float:
    """``<psi|rho|psi>`` for a pure target."""
    target = np.asarray(target, dtype=complex)
    if rho.shape != (target.size, target.size):
        raise ValueError(f"state of shape {rho.shape} does not match target of size {target.size}")
    val = np.vdot(target, rho @ target)
    return float(val.real)


def transmission_spectrum(omega_offset, gamma: float):
    """All-pass transmission through the two resonators' right-moving normal mode.

    Returns ``S = (gamma/2 + i D)/(gamma/2 - i D)`` and its phase on the
    branch continuous through ``D = 0``, ``theta = 2 arctan(2 D / gamma)``.
    """
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    d = np.asarray(omega_offset, dtype=float)
    s = (0.5 * gamma + 1j * d) / (0.5 * gamma - 1j * d)
    theta = 2.0 * np.arctan(2.0 * d / gamma)
    return s, theta


def group_delay(gamma: float) -> float:
    """Phase slope at the carrier, ``d theta / d omega = 4 / gamma``."""
    return 4.0 / gamma


def group_delay_estimate(times: np.ndarray, input_flux: np.ndarray, output_flux: np.ndarray) -> float:
    """Lag maximizing the cross-correlation of two flux series, refined by a parabola."""
    times = np.asarray(times, dtype=float)
    _check_uniform(times)
    a = np.asarray(input_flux, dtype=float)
    b = np.asarray(output_flux, dtype=float)
    if np.ptp(a) == 0 or np.ptp(b) == 0:
        raise ValueError("degenerate (flat) flux series")
    h = times[1] - times[0]
    xc = np.correlate(b, a, mode="full")
    lags = np.arange(-a.size + 1, b.size)
    k = int(np.argmax(xc))
    frac = 0.0
    if 0 < k < xc.size - 1:
        y0, y1, y2 = xc[k - 1], xc[k], xc[k + 1]
        den = y0 - 2 * y1 + y2
        if den != 0:
            frac = 0.5 * (y0 - y2) / den
    return float((lags[k] + frac) * h)
