"""Directional photon emission, absorption and transmission by a two-element
artificial molecule coupled to a one-dimensional waveguide."""

__version__ = "0.1.0"

from .controls import BandwidthTooLarge, ControlSet
from .dynamics import IntegratorConfig, ToleranceViolation, integrate
from .molecule import Design, MoleculeConfig, StateKind, build_model
from .observables import Direction, MetricSet
from .protocols import ProtocolReport, run_absorption, run_emission, run_transmission, single_excitation_oracle

__all__ = [
    "BandwidthTooLarge",
    "ControlSet",
    "Design",
    "Direction",
    "IntegratorConfig",
    "MetricSet",
    "MoleculeConfig",
    "ProtocolReport",
    "StateKind",
    "ToleranceViolation",
    "build_model",
    "integrate",
    "run_absorption",
    "run_emission",
    "run_transmission",
    "single_excitation_oracle",
]
