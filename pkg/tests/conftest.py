import pytest

from bgd_harmonics import domain_trace_fixed_point, flux_transfer_matrices
from bgd_harmonics.registry import EXAMPLES


class Solved:
    def __init__(self, name):
        self.name = name
        self.entry = EXAMPLES[name]
        self.spec = self.entry.spec()
        self.traces = domain_trace_fixed_point(self.spec, tol=1e-10)
        self.flux = flux_transfer_matrices(self.spec, self.traces)

    def points(self):
        return [(i, k) for i, d in enumerate(self.spec.domains) for k in sorted(d.in_v0)]


_CACHE = {}


def solved_example(name):
    if name not in _CACHE:
        _CACHE[name] = Solved(name)
    return _CACHE[name]


@pytest.fixture(scope="session")
def solved():
    return solved_example


@pytest.fixture(params=list(EXAMPLES))
def example(request):
    return solved_example(request.param)


# ---------------------------------------------------- acceptance summary

ACCEPTANCE = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[ACCEPTANCE] = {}


@pytest.fixture
def acceptance(request):
    """Record a one-line detail for the acceptance summary and echo it."""
    store = request.config.stash[ACCEPTANCE]

    def record(detail):
        store[request.node.nodeid] = detail
        print(detail)

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    store = config.stash[ACCEPTANCE]
    outcome = {}
    for key in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(key, []):
            if "test_acceptance.py::test_criterion_" in rep.nodeid and (rep.when == "call" or key != "passed"):
                outcome[rep.nodeid] = "PASS" if key == "passed" else "FAIL"
    if not outcome:
        return
    terminalreporter.section("acceptance criteria")
    for nodeid in sorted(outcome, key=lambda x: int(x.split("test_criterion_")[1].split("_")[0])):
        n = int(nodeid.split("test_criterion_")[1].split("_")[0])
        terminalreporter.write_line(f"criterion {n:2d}: {outcome[nodeid]}  {store.get(nodeid, '')}")
