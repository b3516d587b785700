import numpy as np
import pytest

from vata import synth

ACCEPTANCE_RESULTS: list[tuple[str, bool]] = []


def record_criterion(name: str, passed: bool) -> None:
    ACCEPTANCE_RESULTS.append((name, passed))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for name, passed in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {name}")


@pytest.fixture(scope="session")
def small_pop():
    """120-image noise-free population shared by read-only tests."""
    cfg = synth.SynthConfig(
        n_images=120, seed=42, vpi_noise_sd=0.0, vata_noise_sd=0.0, sparsity=0.5
    )
    return synth.generate_population(cfg)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
