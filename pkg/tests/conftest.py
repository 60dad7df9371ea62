import numpy as np
import pytest

from gaf_rigidity import kernel as K

FAMILIES = {
    "gef": K.KernelSpec.gef(),
    "ml-half": K.KernelSpec.mittag_leffler(0.5),
    "ml-2": K.KernelSpec.mittag_leffler(2.0),
    "ml-3": K.KernelSpec.mittag_leffler(3.0),
    "double-exp": K.KernelSpec.double_exp(),
    "lindelof-1": K.KernelSpec.lindelof(1.0),
    "lindelof-2": K.KernelSpec.lindelof(2.0),
}


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


_MC = {}


def mc_statistics(name, k, eta, L, trials, seed):
    """Linear statistics shared between test modules; sampling is the slow part."""
    from gaf_rigidity import linstat as LS

    key = (name, k, eta, L, trials, seed)
    if key not in _MC:
        _MC[key] = LS.sample_statistics(FAMILIES[name], LS.TestFunction(k, eta, L), trials, seed)
    return _MC[key]


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[0].lstrip("#"))):
            terminalreporter.write_line(line)
