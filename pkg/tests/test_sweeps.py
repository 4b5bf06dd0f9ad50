import numpy as np
import pytest

from chiralwg.molecule import Design, MoleculeConfig
from chiralwg.protocols import Protocol, run_emission
from chiralwg.sweeps import (
    DEFAULT_BANDWIDTH_GRID,
    DEFAULT_DELTA_OMEGA_GRID,
    DEFAULT_DISTANCE_GRID,
    DEFAULT_ETA_GRID,
    SweepSpec,
    apply_axis,
    run_sweep,
    sweep_bandwidth,
    sweep_detuning_distance,
    sweep_eta,
)

QR = MoleculeConfig(design=Design.QUBIT_RESONATOR, gamma=10.0)


def test_default_grids():
    assert len(DEFAULT_ETA_GRID) == 21 and DEFAULT_ETA_GRID[0] == 0 and DEFAULT_ETA_GRID[-1] == 2.0
    assert len(DEFAULT_DELTA_OMEGA_GRID) == 41 and len(DEFAULT_DISTANCE_GRID) == 41
    assert DEFAULT_DELTA_OMEGA_GRID[20] == 0.0 and DEFAULT_DISTANCE_GRID[20] == pytest.approx(0.25)
    g = np.array(DEFAULT_BANDWIDTH_GRID)
    assert g.size == 20 and g[0] == pytest.approx(0.05) and g[-1] == pytest.approx(0.99)
    assert np.allclose(np.diff(np.log(g)), np.log(g[1] / g[0]))


def test_spec_validation():
    with pytest.raises(ValueError):
        SweepSpec(axes=())
    with pytest.raises(ValueError):
        SweepSpec(axes=(("gama", (1.0,)),))
    with pytest.raises(ValueError):
        SweepSpec(axes=(("eta", ()),))
    with pytest.raises(ValueError):
        SweepSpec(axes=(("eta", (float("nan"),)),))
    with pytest.raises(ValueError):
        SweepSpec(axes=(("eta", (1.0,)),), protocol=Protocol.ABSORPTION)
    with pytest.raises(ValueError):
        sweep_eta(grid=[2.5])
    with pytest.raises(ValueError):
        sweep_detuning_distance(delta_omega=[0.0], distance_over_lambda=[0.0])
    with pytest.raises(ValueError):
        sweep_bandwidth(grid=[1.0])


def test_apply_axis():
    c = apply_axis(QR, "delta_omega", 0.01)
    assert (c.delta1, c.delta2) == (-0.005, 0.005)
    assert apply_axis(QR, "distance_over_lambda", 0.23).omega_p_d_over_pi == pytest.approx(0.46)
    assert apply_axis(QR, "gamma_ph_over_gamma", 0.25).gamma == pytest.approx(4.0)
    assert apply_axis(QR, "eta", 0.3).eta == 0.3


def test_eta_sweep_peaks_at_one():
    res = sweep_eta(MoleculeConfig(design=Design.TWO_QUBIT), [0.8, 0.9, 1.0, 1.1, 1.2])
    p = res.metric("directionality")
    assert len(res.points) == 5 and not res.failed
    assert int(np.argmax(p)) == 2 and p[2] >= 0.999
    assert p[1] == pytest.approx(0.995, abs=5e-4)


def test_sweep_independent_of_worker_count():
    grid = [0.0, 0.5, 1.0]
    a = sweep_eta(QR, grid, workers=1)
    b = sweep_eta(QR, grid, workers=3)
    assert [p.coords for p in a.points] == [p.coords for p in b.points]
    # repr compares NaN fields too, and would expose any last-bit difference
    assert [repr(p.metrics.as_dict()) for p in a.points] == [repr(p.metrics.as_dict()) for p in b.points]


def test_failed_points_are_recorded():
    spec = SweepSpec(axes=(("gamma", (0.5, 10.0)),), base=QR)
    res = run_sweep(spec)
    assert len(res.points) == 2
    bad, good = res.points
    assert not bad.ok and "BandwidthTooLarge" in bad.error
    assert good.ok and good.error is None
    assert np.isnan(res.metric("directionality")[0])


def test_detuning_map_symmetric_at_nominal_distance():
    res = sweep_detuning_distance(MoleculeConfig(design=Design.TWO_QUBIT), [-0.008, 0.0, 0.008], [0.25])
    p = res.grid("directionality")
    assert p.shape == (3, 1)
    assert abs(p[0, 0] - p[2, 0]) <= 1e-6
    assert p[1, 0] >= 0.999


@pytest.mark.parametrize("design", list(Design))
def test_detuning_exchange_property_off_nominal(design):
    # relabeling the elements mirrors the molecule: Delta omega -> -Delta omega, psi_+ -> psi_-, R <-> L
    base = MoleculeConfig(design=design, gamma=10.0, omega_p_d_over_pi=0.46)
    fwd = run_emission(apply_axis(base, "delta_omega", 0.008), "Right", with_oracle=False)
    back = run_emission(apply_axis(base, "delta_omega", -0.008), "Left", with_oracle=False)
    assert abs(fwd.metrics.directionality - back.metrics.directionality) <= 1e-6


def test_bandwidth_sweep_monotone():
    res = sweep_bandwidth(QR, [0.1, 0.3, 0.5, 0.99])
    f = res.metric("pulse_fidelity")
    tr = res.metric("transmittance")
    assert not res.failed
    assert f[0] >= 0.999 and tr[0] >= 0.999 and f[2] >= 0.99
    assert np.all(np.diff(f) < 0)
    assert f[-1] > 0.92
