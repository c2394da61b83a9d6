import numpy as np
import pytest

from ionprobe.config import config_from_dict, example_config


def pytest_terminal_summary(terminalreporter):
    """One PASS/FAIL line per acceptance criterion at the end of the run."""
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, name, passed, detail in sorted(RESULTS):
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"{status}  criterion {number:2d}  {name}: {detail}")


def make_config(**tweaks):
    """Example config document with nested tweaks applied."""
    doc = example_config()
    for key, value in tweaks.items():
        section, _, name = key.partition(".")
        if name:
            doc[section][name] = value
        else:
            doc[section] = value
    return config_from_dict(doc)


@pytest.fixture
def config():
    return make_config()


@pytest.fixture
def noiseless_config():
    return make_config(
        noise={"spam_error": 0.0, "intensity_fraction": 0.0, "shots": 0, "position_sigma_um": 0.0}
    )


@pytest.fixture
def alpha10_config():
    return make_config(**{"field.alpha_deg": 10.0})


@pytest.fixture
def two_beam_config():
    doc = example_config()
    doc["beams"].append(
        {"waist_um": 27.0, "power_mw": 3.0, "center_um": 8.0, "projection_deg": 45.0}
    )
    return config_from_dict(doc)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
