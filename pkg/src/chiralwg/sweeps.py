"""Parameter scans over the molecule configuration.

Axes name either a ``MoleculeConfig`` field or one of the derived coordinates

* ``delta_omega``: frequency difference, applied as ``delta1 = -x/2, delta2 = +x/2``
* ``distance_over_lambda``: sets ``omega_p_d_over_pi = 2 x``
* ``gamma_ph_over_gamma``: sets ``gamma = gamma_ph / x``

Points run independently (optionally in worker processes) and are merged by
grid index, so results never depend on the worker count.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .dynamics import IntegratorConfig
from .molecule import Design, MoleculeConfig
from .observables import MetricSet
from .protocols import Protocol, run_emission, run_transmission

CONFIG_AXES = ("eta", "delta1", "delta2", "omega_p_d_over_pi", "gamma_ph", "gamma")
DERIVED_AXES = ("delta_omega", "distance_over_lambda", "gamma_ph_over_gamma")

DEFAULT_ETA_GRID = tuple(round(0.1 * k, 10) for k in range(21))
DEFAULT_DELTA_OMEGA_GRID = tuple(float(x) for x in np.linspace(-0.02, 0.02, 41))
DEFAULT_DISTANCE_GRID = tuple(float(x) for x in np.linspace(0.20, 0.30, 41))
DEFAULT_BANDWIDTH_GRID = tuple(float(x) for x in np.geomspace(0.05, 0.99, 20))


@dataclass(frozen=True)
class SweepSpec:
    axes: tuple[tuple[str, tuple[float, ...]], ...]
    protocol: Protocol = Protocol.EMISSION
    base: MoleculeConfig = MoleculeConfig()
    integrator: IntegratorConfig = IntegratorConfig()
    workers: int = 1

    def __post_init__(self):
        if not self.axes:
            raise ValueError("sweep needs at least one axis")
        for name, grid in self.axes:
            if name not in CONFIG_AXES + DERIVED_AXES:
                raise ValueError(f"unknown sweep axis {name!r}")
            if len(grid) == 0:
                raise ValueError(f"empty grid for axis {name!r}")
            if not all(math.isfinite(x) for x in grid):
                raise ValueError(f"non-finite value in grid for axis {name!r}")
        if Protocol(self.protocol) is Protocol.ABSORPTION:
            raise ValueError("sweeps cover the Emission and Transmission protocols")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.axes)

    def points(self) -> list[tuple[float, ...]]:
        """Grid points in row-major order (last axis fastest)."""
        return list(itertools.product(*(grid for _, grid in self.axes)))


@dataclass
class PointResult:
    coords: tuple[float, ...]
    metrics: MetricSet = field(default_factory=MetricSet)
    ok: bool = False
    health: dict = field(default_factory=dict)
    error: Optional[str] = None


@dataclass
class SweepResult:
    spec: SweepSpec
    points: list[PointResult]

    @property
    def names(self) -> tuple[str, ...]:
        return self.spec.names

    def metric(self, name: str) -> np.ndarray:
        """Metric values in grid order; flagged points are NaN."""
        return np.array([getattr(p.metrics, name) if p.ok else np.nan for p in self.points])

    def grid(self, name: str) -> np.ndarray:
        """Metric reshaped to the axis grid."""
        shape = tuple(len(g) for _, g in self.spec.axes)
        return self.metric(name).reshape(shape)

    @property
    def failed(self) -> list[PointResult]:
        return [p for p in self.points if not p.ok]


def apply_axis(config: MoleculeConfig, name: str, value: float) -> MoleculeConfig:
    if name == "delta_omega":
        return replace(config, delta1=-0.5 * value, delta2=0.5 * value)
    if name == "distance_over_lambda":
        return replace(config, omega_p_d_over_pi=2.0 * value)
    if name == "gamma_ph_over_gamma":
        if not 0 < value:
            raise ValueError("gamma_ph/gamma must be positive")
        return replace(config, gamma=config.gamma_ph / value)
    return replace(config, **{name: value})


def _run_point(task) -> PointResult:
    spec, coords = task
    try:
        config = spec.base
        for name, value in zip(spec.names, coords):
            config = apply_axis(config, name, value)
        if Protocol(spec.protocol) is Protocol.EMISSION:
            report = run_emission(config, "Right", spec.integrator, with_oracle=False, raise_on_violation=False)
        else:
            report = run_transmission(config, spec.integrator, raise_on_violation=False)
    except Exception as exc:  # recorded per point, never dropped
        return PointResult(coords=coords, error=f"{type(exc).__name__}: {exc}")
    error = "; ".join(report.violations) if report.violations else None
    return PointResult(coords=coords, metrics=report.metrics, ok=report.ok, health=report.health, error=error)


def run_sweep(spec: SweepSpec) -> SweepResult:
    tasks = [(spec, c) for c in spec.points()]
    if spec.workers == 1 or len(tasks) == 1:
        results = [_run_point(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            chunk = max(1, len(tasks) // (4 * spec.workers))
            results = list(pool.map(_run_point, tasks, chunksize=chunk))
    return SweepResult(spec=spec, points=results)


def _grid(values, default) -> tuple[float, ...]:
    return tuple(float(x) for x in (default if values is None else values))


def sweep_eta(
    base: MoleculeConfig = MoleculeConfig(),
    grid: Optional[Sequence[float]] = None,
    *,
    integrator: IntegratorConfig = IntegratorConfig(),
    workers: int = 1,
) -> SweepResult:
    """Directionality versus the cancellation factor for ``base.design``."""
    grid = _grid(grid, DEFAULT_ETA_GRID)
    if any(not 0 <= x <= 2 for x in grid):
        raise ValueError("eta grid must lie in [0, 2]")
    return run_sweep(SweepSpec(axes=(("eta", grid),), base=base, integrator=integrator, workers=workers))


def sweep_eta_designs(
    grid: Optional[Sequence[float]] = None, *, workers: int = 1, **config
) -> dict[Design, SweepResult]:
    return {
        d: sweep_eta(MoleculeConfig(design=d, **config), grid, workers=workers)
        for d in (Design.TWO_QUBIT, Design.QUBIT_RESONATOR)
    }


def sweep_detuning_distance(
    base: MoleculeConfig = MoleculeConfig(),
    delta_omega: Optional[Sequence[float]] = None,
    distance_over_lambda: Optional[Sequence[float]] = None,
    *,
    integrator: IntegratorConfig = IntegratorConfig(),
    workers: int = 1,
) -> SweepResult:
    """2D directionality map over frequency difference and element spacing."""
    dw = _grid(delta_omega, DEFAULT_DELTA_OMEGA_GRID)
    dl = _grid(distance_over_lambda, DEFAULT_DISTANCE_GRID)
    if any(not 0 < x <= 1 for x in dl):
        raise ValueError("d/lambda must lie in (0, 1]")
    axes = (("delta_omega", dw), ("distance_over_lambda", dl))
    return run_sweep(SweepSpec(axes=axes, base=base, integrator=integrator, workers=workers))


def sweep_bandwidth(
    base: MoleculeConfig = MoleculeConfig(design=Design.QUBIT_RESONATOR),
    grid: Optional[Sequence[float]] = None,
    *,
    integrator: IntegratorConfig = IntegratorConfig(),
    workers: int = 1,
) -> SweepResult:
    """Transmitted pulse fidelity and transmittance versus ``gamma_ph/gamma``."""
    grid = _grid(grid, DEFAULT_BANDWIDTH_GRID)
    if any(not 0 < x < 1 for x in grid):
        raise ValueError("gamma_ph/gamma grid must lie in (0, 1)")
    axes = (("gamma_ph_over_gamma", grid),)
    return run_sweep(SweepSpec(axes=axes, protocol=Protocol.TRANSMISSION, base=base,
                               integrator=integrator, workers=workers))
