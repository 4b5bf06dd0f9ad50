from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chiralwg import linop
from chiralwg.controls import Constant, ControlSet, GammaModulation, GModulation, Zero
from chiralwg.dynamics import IntegratorConfig, integrate, lindblad_rhs
from chiralwg.molecule import (
    Design,
    IncompatibleState,
    MissingControl,
    MoleculeConfig,
    StateKind,
    build_layout,
    build_model,
    dissipators,
    hamiltonian,
    ladder_lowering,
    lowering_ops,
    prepare_state,
    qubit_lowering,
    waveguide_coupling,
)

TQ = MoleculeConfig(design=Design.TWO_QUBIT)
QR = MoleculeConfig(design=Design.QUBIT_RESONATOR, gamma=10.0)
CONST = ControlSet(gamma1=Constant(value=2.0), gamma2=Constant(value=2.0))
QR_CTRL = ControlSet(g1=GModulation(gamma_ph=1.0, gamma=10.0), g2=GModulation(gamma_ph=1.0, gamma=10.0))


def rand_rho(rng, n):
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    r = a @ a.conj().T
    return r / np.trace(r)


def test_waveguide_coupling_examples():
    g = 3.0
    w = waveguide_coupling(np.pi / 2, np.pi / 2, g, g)
    assert abs(w.J - g / 2) <= 1e-12 and abs(w.gamma12) <= 1e-15 * g
    w = waveguide_coupling(np.pi, np.pi, g, g)
    assert abs(w.J) <= 1e-12 and abs(w.gamma12 + g) <= 1e-12
    w = waveguide_coupling(0.0, 0.0, g, g)
    assert abs(w.J) <= 1e-12 and abs(w.gamma12 - g) <= 1e-12
    with pytest.raises(ValueError):
        waveguide_coupling(0.0, 0.0, -1.0, 1.0)


@given(st.floats(0, 2 * np.pi), st.floats(0, 2 * np.pi), st.floats(0, 10), st.floats(0, 10))
def test_waveguide_coupling_closed_forms(p1, p2, g1, g2):
    w = waveguide_coupling(p1, p2, g1, g2)
    s = np.sqrt(g1 * g2)
    # equal phases give a real exchange and real correlated rate
    ref_j = 0.5 * s * (np.exp(1j * p2) - np.exp(-1j * p1)) / 2j
    ref_g = s * (np.exp(1j * p2) + np.exp(-1j * p1)) / 2
    assert abs(w.J - ref_j) <= 1e-12 * (1 + s) and abs(w.gamma12 - ref_g) <= 1e-12 * (1 + s)


def test_layout_dimensions():
    assert build_layout(TQ).total_dim == 4
    assert build_layout(replace(QR, include_ancilla=True)).total_dim == 72
    dropped = replace(QR, include_ancilla=True, include_idle_qubits=False)
    assert build_layout(dropped, ControlSet(g1=Zero(), g2=Zero())).total_dim == 18
    # qubits stay while any g is active
    assert build_layout(dropped, QR_CTRL).total_dim == 72


def test_lowering_operator_algebra():
    s = qubit_lowering()
    assert np.array_equal(linop.commutator(s, s.conj().T), np.diag([1, -1]))
    a = ladder_lowering(3)
    assert np.allclose(a.conj().T @ a, np.diag([0, 1, 2]))
    assert np.allclose(linop.commutator(a, a.conj().T), np.diag([1, 1, -2]))
    ops = lowering_ops(replace(QR, include_ancilla=True))
    assert set(ops) == {"L1", "L2", "sigma1", "sigma2", "sigma_a"}


def test_hamiltonian_perfect_cancellation_two_qubit():
    assert np.max(np.abs(hamiltonian(TQ, CONST, 0.3))) <= 1e-15


def test_hamiltonian_without_cancellation_two_qubit():
    h = hamiltonian(replace(TQ, eta=0.0), CONST, 0.0)
    block = h[np.ix_([1, 2], [1, 2])]
    assert np.allclose(np.linalg.eigvalsh(block), [-1.0, 1.0], atol=1e-14)


def test_hamiltonian_qubit_resonator_only_g_terms_at_nominal_point():
    t = -0.7
    h = hamiltonian(QR, QR_CTRL, t)
    ops = lowering_ops(QR)
    g = QR_CTRL.g1(t)
    ref = sum(g * (ops[f"L{j}"].conj().T @ ops[f"sigma{j}"] + ops[f"sigma{j}"].conj().T @ ops[f"L{j}"])
              for j in (1, 2))
    assert np.max(np.abs(h - ref)) <= 1e-14


cfgs = st.builds(
    MoleculeConfig,
    design=st.sampled_from(list(Design)),
    gamma=st.floats(2.0, 20.0),
    omega_p_d_over_pi=st.floats(0.05, 2.0),
    delta1=st.floats(-1, 1),
    delta2=st.floats(-1, 1),
    eta=st.floats(0, 2),
    include_ancilla=st.booleans(),
)


def controls_for(cfg):
    if cfg.design is Design.TWO_QUBIT:
        gm = GammaModulation(gamma_ph=1.0)
        return ControlSet(gamma1=gm, gamma2=gm, gamma_a=gm)
    g = GModulation(gamma_ph=1.0, gamma=cfg.gamma)
    return ControlSet(g1=g, g2=g, gamma_a=GammaModulation(gamma_ph=1.0))


@settings(max_examples=25, deadline=None)
@given(cfgs, st.floats(-10, 10), st.integers(0, 2**31))
def test_generator_hermitian_trace_preserving_number_conserving(cfg, t, seed):
    model = build_model(cfg, controls_for(cfg))
    h = model.hamiltonian(t)
    assert linop.hermiticity_residual(h) <= 1e-12
    levels = model.layout.basis_levels().sum(axis=1)
    n_tot = np.diag(levels).astype(complex)
    assert np.max(np.abs(linop.commutator(h, n_tot))) <= 1e-12
    rho = rand_rho(np.random.default_rng(seed), model.dim)
    zero = np.zeros_like(h)
    d = lindblad_rhs(rho, zero, model.dissipators(t))
    assert abs(np.trace(d)) <= 1e-12
    assert linop.hermiticity_residual(d) <= 1e-12


def test_correlated_terms_presence():
    names = [p.name for p in build_model(TQ, CONST).d_pieces]
    assert "gamma12" not in names
    half = replace(TQ, omega_p_d_over_pi=1.0)
    terms = dissipators(half, CONST, 0.0)
    cross = [t for t in terms if t.left_op is not t.right_op]
    assert len(cross) == 2
    assert sorted(t.rate.real for t in cross) == pytest.approx([-2.0, -2.0])
    assert cross[0].rate == pytest.approx(np.conj(cross[1].rate))


def test_ancilla_terms():
    cfg = replace(TQ, include_ancilla=True)
    ctrl = CONST.with_(gamma_a=Constant(value=0.5))
    model = build_model(cfg, ctrl)
    sa = model.ops["sigma_a"]
    pairs = [p for p in model.d_pieces if (p.left_op is sa) != (p.right_op is sa)]
    assert len(pairs) == 4
    for j in (1, 2):
        a = next(p for p in pairs if p.name == f"a-L{j}")
        b = next(p for p in pairs if p.name == f"L{j}-a")
        assert a.rate(0.0) == pytest.approx(np.conj(b.rate(0.0)))
    # |J'_j| = sqrt(gamma_j gamma_a / 2) / 2
    h = model.hamiltonian(0.0)
    ket_a = linop.ket(model.layout, {"a": 1})
    for j, lab in ((1, "q1"), (2, "q2")):
        ket_j = linop.ket(model.layout, {lab: 1})
        assert abs(ket_a.conj() @ h @ ket_j) == pytest.approx(0.5 * np.sqrt(2.0 * 0.5 / 2))


def test_cascade_is_causal():
    # the source's own dynamics cannot depend on what sits downstream
    cfg = replace(QR, include_ancilla=True)
    ga = GammaModulation(gamma_ph=1.0)
    icfg = IntegratorConfig(window=12.0)
    with_mol = build_model(cfg, QR_CTRL.time_reversed().with_(gamma_a=ga))
    idle = build_model(cfg, ControlSet(g1=Zero(), g2=Zero(), gamma_a=ga))
    pops = []
    for model in (with_mol, idle):
        traj = integrate(prepare_state(StateKind.ANCILLA_EXCITED, model.layout), model, (-12.0, 12.0), icfg)
        pops.append(traj.expect(model.ops["sigma_a"].conj().T @ model.ops["sigma_a"]).real)
    assert np.max(np.abs(pops[0] - pops[1])) <= 1e-12


def test_missing_controls():
    with pytest.raises(MissingControl):
        build_model(TQ, ControlSet())
    with pytest.raises(MissingControl):
        build_model(QR, ControlSet(gamma1=Zero()))
    with pytest.raises(MissingControl):
        build_model(replace(TQ, include_ancilla=True), CONST)


def test_prepare_state_examples():
    lay = build_layout(TQ)
    rho = prepare_state(StateKind.PSI_PLUS, lay)
    eg, ge = 2, 1
    assert rho[eg, ge] == pytest.approx(-0.5j)
    gg = prepare_state(StateKind.GG, lay)
    assert gg[0, 0] == 1 and np.trace(gg @ gg) == pytest.approx(1)
    alay = build_layout(replace(TQ, include_ancilla=True))
    sup = prepare_state(StateKind.ANCILLA_SUPERPOSITION, alay)
    red = linop.partial_trace(sup, alay, ["a"])
    assert np.allclose(red, 0.5 * np.ones((2, 2)))
    assert np.allclose(linop.partial_trace(sup, alay, ["q1", "q2"]), np.diag([1, 0, 0, 0]))
    with pytest.raises(IncompatibleState):
        prepare_state(StateKind.ANCILLA_EXCITED, lay)
    with pytest.raises(IncompatibleState):
        prepare_state(StateKind.PSI_PLUS, build_layout(replace(QR, include_idle_qubits=False),
                                                        ControlSet(g1=Zero(), g2=Zero())))


@pytest.mark.parametrize("kind", list(StateKind))
def test_prepared_states_pure(kind):
    lay = build_layout(replace(QR, include_ancilla=True))
    rho = prepare_state(kind, lay)
    assert abs(np.trace(rho) - 1) <= 1e-12 and abs(np.trace(rho @ rho) - 1) <= 1e-12


def test_config_validation():
    for bad in (dict(eta=2.5), dict(gamma_ph=0.0), dict(fock_cutoff=1), dict(omega_p_d_over_pi=0.0)):
        with pytest.raises(ValueError):
            replace(TQ, **bad)
    assert TQ.distance_over_lambda == pytest.approx(0.25)
