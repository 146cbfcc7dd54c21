import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from sbdnet.recipes import Desk, desk_setup, plan_run
from sbdnet.simulator import FileSizeDist, run

_criterion_lines: list[tuple[int, str]] = []


@pytest.fixture(scope="session")
def desk() -> Desk:
    return desk_setup()


@pytest.fixture(scope="session")
def steady(desk):
    """Session cache of steady-state runs keyed by their plan, so the
    acceptance criteria and module tests share the expensive simulations."""
    cache = {}

    def get(frac, deaths=10_000, snaps=0, seed=None, pareto=None, warm_mult=15.0):
        key = (frac, deaths, snaps, seed, pareto, warm_mult)
        if key not in cache:
            fd = FileSizeDist("pareto", desk.channel.L, pareto) if pareto else None
            s = seed if seed is not None else 17 + int(1000 * frac)
            cfg = plan_run(desk, frac * desk.lam_c, s, deaths_target=deaths,
                           n_snapshots=snaps, file_dist=fd, warmup_mult=warm_mult)
            cache[key] = (run(cfg), cfg)
        return cache[key]

    return get


def criterion(num: int, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {num}: {detail}"
    _criterion_lines.append((num, line))
    print(line)
    assert ok, f"criterion {num}: {detail}"


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _criterion_lines:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_criterion_lines):
        terminalreporter.write_line(line)
