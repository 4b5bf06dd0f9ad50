"""Operators, Hamiltonians and dissipators of the two-element artificial molecule.

Two layouts are supported:

* ``TwoQubit``: qubits ``q1``, ``q2`` coupled directly to the waveguide with
  time-dependent rates ``gamma1(t)``, ``gamma2(t)``.
* ``QubitResonator``: each qubit ``qj`` talks to the waveguide through a
  transfer resonator ``rj`` of constant rate ``gamma`` and tunable coupling
  ``gj(t)``.

An optional ancilla ``a`` coupled only to the right-moving mode acts as a
single-photon source. Everything is written in the frame rotating at the
photon carrier frequency, elements sit at ``r1 = -d/2`` and ``r2 = +d/2``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import linop
from .controls import Constant, ControlSet, GeometricMean, Waveform, Zero
from .linop import SpaceLayout, dag, embed


class Design(str, enum.Enum):
    TWO_QUBIT = "TwoQubit"
    QUBIT_RESONATOR = "QubitResonator"


class StateKind(str, enum.Enum):
    GG = "GG"
    PSI_PLUS = "PsiPlus"
    PSI_MINUS = "PsiMinus"
    PSI_PLUS_SUPERPOSITION = "PsiPlusSuperposition"
    PSI_MINUS_SUPERPOSITION = "PsiMinusSuperposition"
    ANCILLA_EXCITED = "AncillaExcited"
    ANCILLA_SUPERPOSITION = "AncillaSuperposition"
    VACUUM = "Vacuum"


class MissingControl(ValueError):
    """The control set lacks a waveform the design needs."""


class IncompatibleState(ValueError):
    """Requested initial state references subsystems absent from the layout."""


@dataclass(frozen=True)
class MoleculeConfig:
    """Physical description of one molecule (+ optional ancilla source).

    Rates are angular-frequency units; by convention ``gamma_ph = 1`` sets the
    unit of time.
    """

    design: Design = Design.TWO_QUBIT
    gamma: float = 10.0
    gamma_ph: float = 1.0
    omega_p_d_over_pi: float = 0.5
    delta1: float = 0.0
    delta2: float = 0.0
    eta: float = 1.0
    fock_cutoff: int = 3
    include_ancilla: bool = False
    include_idle_qubits: bool = True

    def __post_init__(self):
        object.__setattr__(self, "design", Design(self.design))
        if not self.gamma_ph > 0:
            raise ValueError(f"gamma_ph must be positive, got {self.gamma_ph}")
        if self.design is Design.QUBIT_RESONATOR and not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if int(self.fock_cutoff) != self.fock_cutoff or self.fock_cutoff < 2:
            raise ValueError(f"fock_cutoff must be an integer >= 2, got {self.fock_cutoff}")
        if not 0.0 <= self.eta <= 2.0:
            raise ValueError(f"eta must lie in [0, 2], got {self.eta}")
        if not 0.0 < self.omega_p_d_over_pi <= 2.0:
            raise ValueError(f"omega_p_d_over_pi must lie in (0, 2], got {self.omega_p_d_over_pi}")
        for name in ("gamma", "delta1", "delta2"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    @property
    def phase(self) -> float:
        """``omega_p * d`` in radians."""
        return np.pi * self.omega_p_d_over_pi

    @property
    def distance_over_lambda(self) -> float:
        return 0.5 * self.omega_p_d_over_pi

    @property
    def position_phases(self) -> tuple[float, float]:
        """``omega_p * r_j`` for the two elements."""
        return (-0.5 * self.phase, 0.5 * self.phase)


@dataclass(frozen=True)
class WaveguideCoupling:
    J: complex
    gamma12: complex


@dataclass(frozen=True)
class LindbladTerm:
    """``rate * (B rho A^dag - {A^dag B, rho}/2)`` with ``A = left_op``, ``B = right_op``."""

    rate: complex
    left_op: np.ndarray
    right_op: np.ndarray


def waveguide_coupling(d_phase1: float, d_phase2: float, gamma1: float, gamma2: float) -> WaveguideCoupling:
    """Exchange coupling ``J`` and correlated decay ``gamma12`` mediated by the waveguide.

    ``d_phase_j = omega_j * d``.
    """
    if gamma1 < 0 or gamma2 < 0:
        raise ValueError(f"rates must be nonnegative, got {gamma1}, {gamma2}")
    s = np.sqrt(gamma1 * gamma2)
    e2 = np.exp(1j * d_phase2)
    e1 = np.exp(-1j * d_phase1)
    return WaveguideCoupling(J=complex(0.5 * s * (e2 - e1) / 2j), gamma12=complex(s * (e2 + e1) / 2))


# --------------------------------------------------------------------------
# Layout and operators


def qubit_lowering() -> np.ndarray:
    return np.array([[0, 1], [0, 0]], dtype=complex)


def ladder_lowering(n: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, n, dtype=float)), k=1).astype(complex)


def _controls_decouple_qubits(controls: Optional[ControlSet]) -> bool:
    if controls is None:
        return False
    return all(w is None or isinstance(w, Zero) or (isinstance(w, Constant) and w.value == 0)
               for w in (controls.g1, controls.g2))


def build_layout(config: MoleculeConfig, controls: Optional[ControlSet] = None) -> SpaceLayout:
    """Tensor layout for the design; idle qubits are dropped on request when ``g = 0``."""
    subs: list[tuple[str, int]]
    if config.design is Design.TWO_QUBIT:
        subs = [("q1", 2), ("q2", 2)]
    else:
        n = int(config.fock_cutoff)
        if not config.include_idle_qubits and _controls_decouple_qubits(controls):
            subs = [("r1", n), ("r2", n)]
        else:
            subs = [("q1", 2), ("r1", n), ("q2", 2), ("r2", n)]
    if config.include_ancilla:
        subs.append(("a", 2))
    return SpaceLayout.of(*subs)


def lowering_ops(config: MoleculeConfig, layout: Optional[SpaceLayout] = None) -> dict[str, np.ndarray]:
    """Embedded lowering operators.

    ``L1``/``L2`` are the waveguide-coupled elements (qubits or resonators),
    ``sigma1``/``sigma2`` the qubits behind resonators and ``sigma_a`` the ancilla.
    """
    layout = layout or build_layout(config)
    ops: dict[str, np.ndarray] = {}
    if config.design is Design.TWO_QUBIT:
        ops["L1"] = embed(qubit_lowering(), layout, "q1")
        ops["L2"] = embed(qubit_lowering(), layout, "q2")
    else:
        lad = ladder_lowering(layout.dim_of("r1"))
        ops["L1"] = embed(lad, layout, "r1")
        ops["L2"] = embed(lad, layout, "r2")
        if "q1" in layout:
            ops["sigma1"] = embed(qubit_lowering(), layout, "q1")
            ops["sigma2"] = embed(qubit_lowering(), layout, "q2")
    if "a" in layout:
        ops["sigma_a"] = embed(qubit_lowering(), layout, "a")
    return ops


# --------------------------------------------------------------------------
# Generator decomposition: fixed operators with scalar time-dependent weights


def _const(value: float) -> Callable:
    return lambda t: np.full(np.shape(t), value, dtype=float)


@dataclass(frozen=True)
class HamiltonianPiece:
    """``weight(t) * op`` with a Hermitian ``op`` and a real weight."""

    op: np.ndarray
    weight: Callable
    name: str = ""


@dataclass(frozen=True)
class DissipatorPiece:
    """Lindblad term whose complex rate is ``coefficient * weight(t)``."""

    left_op: np.ndarray
    right_op: np.ndarray
    weight: Callable
    coefficient: complex = 1.0
    name: str = ""

    def rate(self, t):
        return self.coefficient * np.asarray(self.weight(t), dtype=float)


@dataclass(frozen=True)
class OutputTerm:
    """Contribution ``-i * phase * sqrt(weight(t)) * op`` to an outgoing field."""

    op: np.ndarray
    weight: Callable
    phase: complex
    name: str = ""

    def amplitude(self, t):
        return -1j * self.phase * np.sqrt(np.clip(np.asarray(self.weight(t), dtype=float), 0.0, None))


@dataclass(frozen=True)
class Model:
    """Master-equation model of one configuration under one control set."""

    config: MoleculeConfig
    controls: ControlSet
    layout: SpaceLayout
    ops: dict
    h_pieces: tuple[HamiltonianPiece, ...]
    d_pieces: tuple[DissipatorPiece, ...]
    out_right: tuple[OutputTerm, ...]
    out_left: tuple[OutputTerm, ...]
    coupling_nominal: WaveguideCoupling = field(default=None)

    @property
    def dim(self) -> int:
        return self.layout.total_dim

    def hamiltonian(self, t: float) -> np.ndarray:
        h = np.zeros((self.dim, self.dim), dtype=complex)
        for p in self.h_pieces:
            h += float(p.weight(t)) * p.op
        return h

    def dissipators(self, t: float) -> list[LindbladTerm]:
        return [LindbladTerm(complex(p.rate(t)), p.left_op, p.right_op) for p in self.d_pieces]

    def top_fock_projectors(self) -> list[np.ndarray]:
        out = []
        for lab, d in self.layout.subsystems:
            if lab.startswith("r"):
                top = np.zeros((d, d), dtype=complex)
                top[d - 1, d - 1] = 1.0
                out.append(embed(top, self.layout, lab))
        return out


def _element_rates(config: MoleculeConfig, controls: ControlSet) -> tuple[Callable, Callable]:
    if config.design is Design.TWO_QUBIT:
        if controls.gamma1 is None or controls.gamma2 is None:
            raise MissingControl("TwoQubit design needs gamma1 and gamma2 waveforms")
        return controls.gamma1, controls.gamma2
    g = float(config.gamma)
    return _const(g), _const(g)


def cancellation_waveform(config: MoleculeConfig, controls: ControlSet) -> Waveform:
    """Cancellation strength before the ``eta`` factor: ``-|J|`` at quarter-wave spacing."""
    if controls.g_c is not None:
        return controls.g_c
    if config.design is Design.TWO_QUBIT:
        return GeometricMean(a=controls.gamma1, b=controls.gamma2, scale=-0.5)
    return Constant(-0.5 * config.gamma)


def build_model(config: MoleculeConfig, controls: ControlSet, layout: Optional[SpaceLayout] = None) -> Model:
    layout = layout or build_layout(config, controls)
    ops = lowering_ops(config, layout)
    L1, L2 = ops["L1"], ops["L2"]
    rate1, rate2 = _element_rates(config, controls)

    def geo(t):
        return np.sqrt(np.clip(rate1(t) * rate2(t), 0.0, None))

    phi = config.phase
    unit = waveguide_coupling(phi, phi, 1.0, 1.0)
    h: list[HamiltonianPiece] = []
    d: list[DissipatorPiece] = []

    # detunings; resonator and qubit of one unit share the frequency omega_j
    h_det = config.delta1 * dag(L1) @ L1 + config.delta2 * dag(L2) @ L2
    if "sigma1" in ops:
        s1, s2 = ops["sigma1"], ops["sigma2"]
        h_det = h_det + config.delta1 * dag(s1) @ s1 + config.delta2 * dag(s2) @ s2
    if config.delta1 or config.delta2:
        h.append(HamiltonianPiece(h_det, _const(1.0), "detuning"))

    if "sigma1" in ops:
        if controls.g1 is None or controls.g2 is None:
            raise MissingControl("QubitResonator design needs g1 and g2 waveforms")
        for j, gw in ((1, controls.g1), (2, controls.g2)):
            L, s = ops[f"L{j}"], ops[f"sigma{j}"]
            h.append(HamiltonianPiece(dag(L) @ s + dag(s) @ L, gw, f"g{j}"))

    hop = unit.J * dag(L1) @ L2 + np.conj(unit.J) * dag(L2) @ L1
    if np.max(np.abs(hop)) > 0:
        h.append(HamiltonianPiece(hop, geo, "H_J"))
    gc = cancellation_waveform(config, controls)
    eta = float(config.eta)
    if eta != 0.0:
        h.append(HamiltonianPiece(dag(L1) @ L2 + dag(L2) @ L1, lambda t, gc=gc: eta * gc(t), "H_c"))

    d.append(DissipatorPiece(L1, L1, rate1, 1.0, "gamma1"))
    d.append(DissipatorPiece(L2, L2, rate2, 1.0, "gamma2"))
    if abs(unit.gamma12) > 1e-15:
        d.append(DissipatorPiece(L1, L2, geo, unit.gamma12, "gamma12"))
        d.append(DissipatorPiece(L2, L1, geo, np.conj(unit.gamma12), "gamma21"))

    rphase = config.position_phases
    out_r = [OutputTerm(L1, lambda t: 0.5 * rate1(t), np.exp(-1j * rphase[0]), "L1"),
             OutputTerm(L2, lambda t: 0.5 * rate2(t), np.exp(-1j * rphase[1]), "L2")]
    out_l = [OutputTerm(L1, lambda t: 0.5 * rate1(t), np.exp(1j * rphase[0]), "L1"),
             OutputTerm(L2, lambda t: 0.5 * rate2(t), np.exp(1j * rphase[1]), "L2")]

    if "sigma_a" in ops:
        if controls.gamma_a is None:
            raise MissingControl("ancilla source needs a gamma_a waveform")
        sa = ops["sigma_a"]
        ga = controls.gamma_a
        d.append(DissipatorPiece(sa, sa, ga, 1.0, "gamma_a"))
        for j, (L, rate) in enumerate(((L1, rate1), (L2, rate2))):
            pr = rphase[j]

            def cross(t, rate=rate):
                return np.sqrt(np.clip(0.5 * rate(t) * ga(t), 0.0, None))

            # cascaded source -> element j: exchange sqrt(gamma_j gamma_a / 2) e^{-i w r_j} i/2
            jp = 0.5j * np.exp(-1j * pr)
            h.append(HamiltonianPiece(jp * dag(sa) @ L + np.conj(jp) * dag(L) @ sa, cross, f"H_J'{j + 1}"))
            d.append(DissipatorPiece(L, sa, cross, np.exp(1j * pr), f"a-L{j + 1}"))
            d.append(DissipatorPiece(sa, L, cross, np.exp(-1j * pr), f"L{j + 1}-a"))
        out_r.insert(0, OutputTerm(sa, ga, 1.0, "sigma_a"))

    return Model(
        config=config,
        controls=controls,
        layout=layout,
        ops=ops,
        h_pieces=tuple(h),
        d_pieces=tuple(d),
        out_right=tuple(out_r),
        out_left=tuple(out_l),
        coupling_nominal=unit,
    )


def hamiltonian(config: MoleculeConfig, controls: ControlSet, t: float) -> np.ndarray:
    return build_model(config, controls).hamiltonian(t)


def dissipators(config: MoleculeConfig, controls: ControlSet, t: float) -> list[LindbladTerm]:
    return build_model(config, controls).dissipators(t)


# --------------------------------------------------------------------------
# States

PSI_PHASE = {StateKind.PSI_PLUS: 1j, StateKind.PSI_MINUS: -1j,
             StateKind.PSI_PLUS_SUPERPOSITION: 1j, StateKind.PSI_MINUS_SUPERPOSITION: -1j}


def prepare_ket(kind: StateKind | str, layout: SpaceLayout) -> np.ndarray:
    kind = StateKind(kind)
    if kind in (StateKind.GG, StateKind.VACUUM):
        return linop.ket(layout, {})
    if kind in PSI_PHASE:
        if "q1" not in layout or "q2" not in layout:
            raise IncompatibleState(f"{kind.value} needs qubits q1, q2 in the layout")
        psi = (linop.ket(layout, {"q1": 1}) + PSI_PHASE[kind] * linop.ket(layout, {"q2": 1})) / np.sqrt(2)
        if kind in (StateKind.PSI_PLUS_SUPERPOSITION, StateKind.PSI_MINUS_SUPERPOSITION):
            psi = (linop.ket(layout, {}) + psi) / np.sqrt(2)
        return psi
    if "a" not in layout:
        raise IncompatibleState(f"{kind.value} needs the ancilla in the layout")
    exc = linop.ket(layout, {"a": 1})
    if kind is StateKind.ANCILLA_EXCITED:
        return exc
    return (linop.ket(layout, {}) + exc) / np.sqrt(2)


def prepare_state(kind: StateKind | str, layout: SpaceLayout) -> np.ndarray:
    """Pure density matrix; subsystems not named by ``kind`` are in their ground level."""
    return linop.projector(prepare_ket(kind, layout))


def psi_vector(direction: str = "Right") -> np.ndarray:
    """Two-qubit target state in the ``|gg>, |ge>, |eg>, |ee>`` basis."""
    ph = 1j if direction == "Right" else -1j
    v = np.zeros(4, dtype=complex)
    v[2] = 1 / np.sqrt(2)
    v[1] = ph / np.sqrt(2)
    return v
