import numpy as np
import pytest

import beacon_amc as ba

# acceptance results collected by tests/test_acceptance.py, printed at the end
ACCEPTANCE_RESULTS = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for number, name, passed in sorted(ACCEPTANCE_RESULTS):
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"ACCEPTANCE {number:2d} [{status}] {name}")


@pytest.fixture(scope="session")
def tiny_dataset():
    """400 frames over 4 SNRs; every stratum reaches all three splits."""
    cfg = ba.GenConfig(frames_per_scheme_per_snr=10, snr_grid=(-10, 0, 10, 20), rng_seed=123)
    return ba.generate_dataset(cfg)


@pytest.fixture(scope="session")
def random_model():
    """Untrained model: enough for forward-pass and accounting machinery."""
    rng = np.random.default_rng(99)
    model = ba.AmcModel(1, rng=rng)
    for stage in model.stages:
        for block in stage:
            block.conv2.weight[...] = (0.2 * rng.standard_normal(block.conv2.weight.shape)).astype(np.float32)
    model.ee_head.weight[...] = (0.3 * rng.standard_normal(model.ee_head.weight.shape)).astype(np.float32)
    model.fe_head.weight[...] = (0.3 * rng.standard_normal(model.fe_head.weight.shape)).astype(np.float32)
    model.touch()
    return model


@pytest.fixture(scope="session")
def tiny_tables(random_model, tiny_dataset):
    val = ba.ExitTable.from_model(random_model, tiny_dataset, "val")
    test = ba.ExitTable.from_model(random_model, tiny_dataset, "test")
    return val, test
