"""Lindblad right-hand side, Liouvillian matrix and time integration.

The integrator works on the generator decomposition of :class:`~chiralwg.molecule.Model`:
every Hamiltonian and dissipator piece is a fixed operator times a scalar
weight, so the weights are sampled once on the RK4 substep grid and the
stepping loop runs compiled.

Excitation number is conserved by the Hamiltonians here and lowered by every
jump operator, so a state with at most ``N`` excitations never leaves that
sector. When the model is verified to be closed on the sector, integration
is carried out there; this is exact, not an approximation.
"""

from __future__ import annotations

import enum
import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numba
import numpy as np

from . import linop
from .linop import DimensionError, dag
from .molecule import Design, LindbladTerm, Model

log = logging.getLogger(__name__)

LIOUVILLIAN_MAX_DIM = 72


class Method(str, enum.Enum):
    RK4_FIXED = "RK4Fixed"
    RK4_HALF_STEP_ADAPTIVE = "RK4HalfStepAdaptive"


class ToleranceViolation(RuntimeError):
    """A recorded state broke the trace, positivity or hermiticity gate."""


class LeakageViolation(ToleranceViolation):
    """Population reached the top Fock level of a truncated resonator."""


@dataclass(frozen=True)
class IntegratorConfig:
    dt: Optional[float] = None
    method: Method = Method.RK4_FIXED
    record_stride: Optional[int] = None
    trace_dev: float = 1e-9
    min_eig: float = -1e-9
    herm: float = 1e-10
    leakage: float = 1e-6
    window: float = 24.0
    restrict: bool = True
    adaptive_tol: float = 1e-11

    def __post_init__(self):
        object.__setattr__(self, "method", Method(self.method))
        if self.dt is not None and not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.record_stride is not None and int(self.record_stride) < 1:
            raise ValueError("record_stride must be >= 1")
        if not self.window > 0:
            raise ValueError("window must be positive")


def max_rate(config) -> float:
    rate = 2.0 * config.gamma_ph
    if config.design is Design.QUBIT_RESONATOR:
        rate = max(rate, config.gamma)
    return rate


def default_dt(config) -> float:
    return 1.0 / (200.0 * max_rate(config))


def resolve_steps(config, icfg: IntegratorConfig, t_span: tuple[float, float]) -> tuple[float, int, int]:
    """Return ``(dt, n_steps, stride)`` with ``n_steps`` a multiple of ``stride``."""
    t0, t1 = t_span
    if not t1 > t0:
        raise ValueError(f"empty time span {t_span}")
    dt = icfg.dt if icfg.dt is not None else default_dt(config)
    if dt > 1.0 / (50.0 * max_rate(config)) * (1 + 1e-12):
        warnings.warn(f"dt={dt:g} exceeds 1/(50*max rate); accuracy gates may fail", stacklevel=3)
    if icfg.record_stride is not None:
        stride = int(icfg.record_stride)
    else:
        # at least 40 samples per 1/gamma_ph
        stride = max(1, int(math.floor(1.0 / (40.0 * config.gamma_ph * dt) + 1e-9)))
    n = stride * max(1, math.ceil((t1 - t0) / (dt * stride) - 1e-9))
    return (t1 - t0) / n, n, stride


# --------------------------------------------------------------------------
# Right-hand side and Liouvillian


def lindblad_rhs(rho: np.ndarray, h: np.ndarray, terms: Sequence[LindbladTerm]) -> np.ndarray:
    """``-i[H, rho] + sum rate (B rho A^dag - {A^dag B, rho}/2)``."""
    if rho.shape != h.shape:
        raise DimensionError(f"shape mismatch {rho.shape} vs {h.shape}")
    out = -1j * (h @ rho - rho @ h)
    for term in terms:
        a, b = term.left_op, term.right_op
        if a.shape != rho.shape or b.shape != rho.shape:
            raise DimensionError("Lindblad operator shape does not match the state")
        ad = dag(a)
        adb = ad @ b
        out += term.rate * (b @ rho @ ad - 0.5 * (adb @ rho + rho @ adb))
    return out


def vec(rho: np.ndarray) -> np.ndarray:
    """Column-stacking vectorization."""
    return np.asarray(rho).reshape(-1, order="F")


def unvec(v: np.ndarray, dim: int) -> np.ndarray:
    return np.asarray(v).reshape((dim, dim), order="F")


def liouvillian_matrix(h: np.ndarray, terms: Sequence[LindbladTerm]) -> np.ndarray:
    """Superoperator acting on column-stacked density matrices."""
    d = h.shape[0]
    if d > LIOUVILLIAN_MAX_DIM:
        raise DimensionError(f"Liouvillian of a {d}-dim space exceeds the {LIOUVILLIAN_MAX_DIM}-dim guard")
    eye = np.eye(d, dtype=complex)
    sup = -1j * (np.kron(eye, h) - np.kron(h.T, eye))
    for term in terms:
        a, b = term.left_op, term.right_op
        adb = dag(a) @ b
        sup += term.rate * (np.kron(a.conj(), b) - 0.5 * (np.kron(eye, adb) + np.kron(adb.T, eye)))
    return sup


# --------------------------------------------------------------------------
# Compiled RK4 kernel


@numba.njit(cache=True)
def _matmul(a, b, out):
    n = a.shape[0]
    for i in range(n):
        for j in range(n):
            acc = 0j
            for k in range(n):
                acc += a[i, k] * b[k, j]
            out[i, j] = acc


@numba.njit(cache=True)
def _rhs(rho, kops, kc, bops, adops, rc, kbuf, tmp, tmp2, out):
    n = rho.shape[0]
    for i in range(n):
        for j in range(n):
            kbuf[i, j] = 0j
    for m in range(kops.shape[0]):
        c = kc[m]
        if c != 0j:
            for i in range(n):
                for j in range(n):
                    kbuf[i, j] += c * kops[m, i, j]
    # -i (K rho - rho K^dag)
    _matmul(kbuf, rho, tmp)
    for i in range(n):
        for j in range(n):
            acc = 0j
            for k in range(n):
                acc += rho[i, k] * np.conj(kbuf[j, k])
            out[i, j] = -1j * (tmp[i, j] - acc)
    for m in range(bops.shape[0]):
        c = rc[m]
        if c != 0j:
            _matmul(bops[m], rho, tmp)
            _matmul(tmp, adops[m], tmp2)
            for i in range(n):
                for j in range(n):
                    out[i, j] += c * tmp2[i, j]


@numba.njit(cache=True)
def _rk4_fixed(rho0, kops, kcoef, bops, adops, rcoef, dt, n_steps, stride, out):
    n = rho0.shape[0]
    rho = rho0.copy()
    k1 = np.empty_like(rho)
    k2 = np.empty_like(rho)
    k3 = np.empty_like(rho)
    k4 = np.empty_like(rho)
    y = np.empty_like(rho)
    kbuf = np.empty_like(rho)
    tmp = np.empty_like(rho)
    tmp2 = np.empty_like(rho)
    out[0] = rho
    rec = 1
    h2 = 0.5 * dt
    for s in range(n_steps):
        i0 = 2 * s
        _rhs(rho, kops, kcoef[i0], bops, adops, rcoef[i0], kbuf, tmp, tmp2, k1)
        for i in range(n):
            for j in range(n):
                y[i, j] = rho[i, j] + h2 * k1[i, j]
        _rhs(y, kops, kcoef[i0 + 1], bops, adops, rcoef[i0 + 1], kbuf, tmp, tmp2, k2)
        for i in range(n):
            for j in range(n):
                y[i, j] = rho[i, j] + h2 * k2[i, j]
        _rhs(y, kops, kcoef[i0 + 1], bops, adops, rcoef[i0 + 1], kbuf, tmp, tmp2, k3)
        for i in range(n):
            for j in range(n):
                y[i, j] = rho[i, j] + dt * k3[i, j]
        _rhs(y, kops, kcoef[i0 + 2], bops, adops, rcoef[i0 + 2], kbuf, tmp, tmp2, k4)
        for i in range(n):
            for j in range(n):
                rho[i, j] += dt / 6.0 * (k1[i, j] + 2.0 * k2[i, j] + 2.0 * k3[i, j] + k4[i, j])
        if (s + 1) % stride == 0:
            out[rec] = rho
            rec += 1


# --------------------------------------------------------------------------
# Trajectory


@dataclass
class Trajectory:
    """Recorded states on ``basis`` (indices into the full layout space)."""

    times: np.ndarray
    states: np.ndarray
    basis: np.ndarray
    model: Model
    dt: float
    method: Method
    monitors: dict = field(default_factory=dict)
    violations: list = field(default_factory=list)

    @property
    def full_dim(self) -> int:
        return self.model.layout.total_dim

    @property
    def ok(self) -> bool:
        return not self.violations

    def restrict(self, op: np.ndarray) -> np.ndarray:
        return op[np.ix_(self.basis, self.basis)]

    def expect(self, op: np.ndarray) -> np.ndarray:
        """``Tr(rho(t) op)`` at every recorded time."""
        r = self.restrict(op)
        return np.einsum("tij,ji->t", self.states, r)

    def full_state(self, k: int = -1) -> np.ndarray:
        rho = np.zeros((self.full_dim, self.full_dim), dtype=complex)
        rho[np.ix_(self.basis, self.basis)] = self.states[k]
        return rho

    @property
    def final_state(self) -> np.ndarray:
        return self.full_state(-1)

    def check(self) -> None:
        if self.violations:
            leak = [v for v in self.violations if v.startswith("leakage")]
            cls = LeakageViolation if leak and len(leak) == len(self.violations) else ToleranceViolation
            raise cls("; ".join(self.violations))


def excitation_sector(model: Model, rho0: np.ndarray) -> Optional[np.ndarray]:
    """Basis indices with at most the initial excitation number, if the model is closed there."""
    levels = model.layout.basis_levels().sum(axis=1)
    support = np.flatnonzero(np.any(np.abs(rho0) > 0, axis=1))
    nmax = int(levels[support].max()) if support.size else 0
    inside = levels <= nmax
    idx = np.flatnonzero(inside)
    out = np.flatnonzero(~inside)
    if out.size == 0:
        return idx
    mats = [p.op for p in model.h_pieces]
    for p in model.d_pieces:
        mats += [p.left_op, p.right_op]
    for m in mats:
        if np.any(m[np.ix_(out, idx)] != 0):
            return None
    return idx


def _sample_coefficients(model: Model, tgrid: np.ndarray, basis: np.ndarray):
    h_ops = [p.op[np.ix_(basis, basis)] for p in model.h_pieces]
    h_w = [np.broadcast_to(np.asarray(p.weight(tgrid), dtype=float), tgrid.shape) for p in model.h_pieces]
    k_ops = list(h_ops)
    k_coef = [w.astype(complex) for w in h_w]
    b_ops, ad_ops, r_coef = [], [], []
    for p in model.d_pieces:
        a = p.left_op[np.ix_(basis, basis)]
        b = p.right_op[np.ix_(basis, basis)]
        rate = np.broadcast_to(p.rate(tgrid), tgrid.shape).astype(complex)
        k_ops.append(-0.5j * dag(a) @ b)
        k_coef.append(rate)
        b_ops.append(b)
        ad_ops.append(dag(a))
        r_coef.append(rate)
    n = basis.size

    def stack(ops):
        return np.ascontiguousarray(np.array(ops, dtype=complex).reshape(len(ops), n, n))

    def cols(c):
        return np.ascontiguousarray(np.array(c, dtype=complex).reshape(len(c), tgrid.size).T)

    return stack(k_ops), cols(k_coef), stack(b_ops), stack(ad_ops), cols(r_coef)


def _monitors(traj: Trajectory, icfg: IntegratorConfig) -> None:
    st = traj.states
    tr = np.einsum("tii->t", st)
    herm = np.max(np.abs(st - np.conj(np.swapaxes(st, 1, 2))), axis=(1, 2))
    min_eig = linop.min_eigenvalue(st)
    projs = traj.model.top_fock_projectors()
    if projs:
        leak = np.max([traj.expect(p).real for p in projs], axis=0)
    else:
        leak = np.zeros(len(traj.times))
    traj.monitors = {
        "trace_dev": np.abs(tr - 1.0),
        "min_eig": np.asarray(min_eig, dtype=float),
        "herm": herm,
        "leakage": leak,
    }
    m = traj.monitors
    if np.max(m["trace_dev"]) > icfg.trace_dev:
        traj.violations.append(f"trace deviation {np.max(m['trace_dev']):.3e} > {icfg.trace_dev:g}")
    if np.min(m["min_eig"]) < icfg.min_eig:
        traj.violations.append(f"min eigenvalue {np.min(m['min_eig']):.3e} < {icfg.min_eig:g}")
    if np.max(m["herm"]) > icfg.herm:
        traj.violations.append(f"hermiticity residual {np.max(m['herm']):.3e} > {icfg.herm:g}")
    if np.max(m["leakage"]) > icfg.leakage:
        traj.violations.append(f"leakage top Fock population {np.max(m['leakage']):.3e} > {icfg.leakage:g}")


def _validate_rho0(rho0: np.ndarray, dim: int) -> None:
    if rho0.shape != (dim, dim):
        raise DimensionError(f"initial state shape {rho0.shape} does not match layout dim {dim}")
    if abs(np.trace(rho0) - 1) > 1e-9:
        raise ValueError("initial state must have unit trace")
    if linop.hermiticity_residual(rho0) > 1e-12:
        raise ValueError("initial state must be Hermitian")
    if linop.min_eigenvalue(rho0) < -1e-10:
        raise ValueError("initial state must be positive semidefinite")


def integrate(
    rho0: np.ndarray,
    model: Model,
    t_span: tuple[float, float],
    icfg: IntegratorConfig = IntegratorConfig(),
    *,
    raise_on_violation: bool = True,
) -> Trajectory:
    """Propagate ``rho0`` under ``model`` over ``t_span``.

    Raises
    ------
    ToleranceViolation, LeakageViolation
        When a recorded state breaks a numerical-health gate and
        ``raise_on_violation`` is set. Otherwise the breach is listed in
        ``Trajectory.violations``.
    """
    rho0 = np.asarray(rho0, dtype=complex)
    _validate_rho0(rho0, model.dim)
    basis = excitation_sector(model, rho0) if icfg.restrict else None
    if basis is None:
        basis = np.arange(model.dim)
    dt, n_steps, stride = resolve_steps(model.config, icfg, t_span)
    t0 = float(t_span[0])
    times = t0 + dt * stride * np.arange(n_steps // stride + 1)
    r0 = np.ascontiguousarray(rho0[np.ix_(basis, basis)])

    if icfg.method is Method.RK4_FIXED:
        tgrid = t0 + 0.5 * dt * np.arange(2 * n_steps + 1)
        kops, kcoef, bops, adops, rcoef = _sample_coefficients(model, tgrid, basis)
        states = np.empty((times.size, basis.size, basis.size), dtype=complex)
        _rk4_fixed(r0, kops, kcoef, bops, adops, rcoef, dt, n_steps, stride, states)
    else:
        states = _integrate_adaptive(r0, model, basis, times, dt, icfg.adaptive_tol)

    traj = Trajectory(times=times, states=states, basis=basis, model=model, dt=dt, method=icfg.method)
    _monitors(traj, icfg)
    if traj.violations:
        log.warning("integration flagged: %s", "; ".join(traj.violations))
        if raise_on_violation:
            traj.check()
    return traj


def _integrate_adaptive(r0, model, basis, times, dt0, tol):
    """Step-doubling RK4; verification mode only, runs in Python."""
    ix = np.ix_(basis, basis)
    h_ops = [p.op[ix] for p in model.h_pieces]
    d_ops = [(p.left_op[ix], p.right_op[ix]) for p in model.d_pieces]

    def rhs(t, rho):
        h = sum(float(p.weight(t)) * op for p, op in zip(model.h_pieces, h_ops))
        terms = [LindbladTerm(complex(p.rate(t)), a, b) for p, (a, b) in zip(model.d_pieces, d_ops)]
        if not isinstance(h, np.ndarray):
            h = np.zeros_like(rho)
        return lindblad_rhs(rho, h, terms)

    def step(t, rho, h):
        k1 = rhs(t, rho)
        k2 = rhs(t + h / 2, rho + h / 2 * k1)
        k3 = rhs(t + h / 2, rho + h / 2 * k2)
        k4 = rhs(t + h, rho + h * k3)
        return rho + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)

    out = np.empty((times.size,) + r0.shape, dtype=complex)
    out[0] = r0
    rho = r0.copy()
    t = times[0]
    h = dt0
    for k in range(1, times.size):
        target = times[k]
        while t < target - 1e-15:
            h = min(h, target - t)
            full = step(t, rho, h)
            half = step(t + h / 2, step(t, rho, h / 2), h / 2)
            err = np.max(np.abs(full - half)) / 15.0
            if err <= tol or h < 1e-12:
                rho = half + (half - full) / 15.0
                t += h
                h *= min(2.0, 0.9 * (tol / max(err, 1e-300)) ** 0.2)
            else:
                h *= max(0.2, 0.9 * (tol / err) ** 0.2)
        out[k] = rho
    return out
