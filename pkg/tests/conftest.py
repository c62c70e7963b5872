import time

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=100,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture
def record():
    """Report one acceptance criterion: prints and stores a PASS/FAIL line."""

    def _record(number: int, checks: dict[str, tuple[bool, str]]):
        ok = all(passed for passed, _ in checks.values())
        detail = "; ".join(f"{name} {'ok' if p else 'FAILED'} ({msg})" for name, (p, msg) in checks.items())
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'} - {detail}"
        print(line)
        ACCEPTANCE_LINES.append(line)
        return ok

    return _record


@pytest.fixture(scope="session")
def ring_numeric():
    from otmesh.cli_io import ma_numeric_case

    return ma_numeric_case("ring", 60)


@pytest.fixture(scope="session")
def blowup_numeric():
    from otmesh.cli_io import ma_numeric_case

    return ma_numeric_case("blowup", 60)


@pytest.fixture(scope="session")
def sine_study():
    from otmesh.feature_analysis import sine_feature_study

    return sine_feature_study(20.0, 100.0, 60, 0.25)


@pytest.fixture(scope="session")
def bl_run():
    """The default 80x80 Buckley-Leverett run to t = 0.4 (several minutes)."""
    from otmesh.bl_sim import BLConfig, initial_condition, run

    cfg = BLConfig()
    state = initial_condition(cfg=cfg)
    dets = []
    bounds = [np.inf, -np.inf]

    def watch(s):
        dets.append(float(s.mesh.check_untangled().min()))
        bounds[0] = min(bounds[0], float(s.u.min()))
        bounds[1] = max(bounds[1], float(s.u.max()))

    t0 = time.perf_counter()
    final = run(0.4, cfg, state=state, callback=watch)[-1]
    return {"final": final, "min_det_per_step": np.array(dets), "u_bounds": tuple(bounds),
            "seconds": time.perf_counter() - t0, "cfg": cfg}
