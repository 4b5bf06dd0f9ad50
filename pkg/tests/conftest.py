import functools
from dataclasses import replace

import pytest

from chiralwg.dynamics import IntegratorConfig
from chiralwg.molecule import Design, MoleculeConfig
from chiralwg.protocols import run_absorption, run_emission, run_transmission

TWO_QUBIT = MoleculeConfig(design=Design.TWO_QUBIT)
QUBIT_RES = MoleculeConfig(design=Design.QUBIT_RESONATOR, gamma=10.0)


def base(design: str) -> MoleculeConfig:
    return TWO_QUBIT if design == "TwoQubit" else QUBIT_RES


@functools.lru_cache(maxsize=None)
def emission(design: str = "TwoQubit", direction: str = "Right", icfg=IntegratorConfig(), **changes):
    return run_emission(replace(base(design), **changes), direction, icfg)


@functools.lru_cache(maxsize=None)
def absorption(design: str = "TwoQubit", **changes):
    return run_absorption(replace(base(design), **changes))


@functools.lru_cache(maxsize=None)
def transmission(ratio: float, icfg=IntegratorConfig()):
    return run_transmission(MoleculeConfig(design=Design.QUBIT_RESONATOR, gamma_ph=1.0, gamma=1.0 / ratio), icfg)


@pytest.fixture(params=["TwoQubit", "QubitResonator"])
def design(request):
    return request.param


ACCEPTANCE: dict[int, tuple[str, bool, str]] = {}


def record(number: int, title: str, ok: bool, detail: str) -> None:
    ACCEPTANCE[number] = (title, bool(ok), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        title, ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {n:>2}. {title}: {detail}")
