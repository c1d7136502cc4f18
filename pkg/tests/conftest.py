import pytest

from subradiant import ModelParams, build_generator, steady_state


@pytest.fixture(scope="session")
def solved():
    """Memoized (generator, steady state) pairs keyed by (N, w, gamma)."""
    cache = {}

    def get(N, w, gamma=0.1):
        key = (N, w, gamma)
        if key not in cache:
            gen = build_generator(ModelParams(N, w, gamma))
            cache[key] = (gen, steady_state(gen))
        return cache[key]

    return get


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
