import numpy as np
import pytest

from sceneparse import kernels
from sceneparse.synth import gen_synth


@pytest.fixture(params=kernels.available_backends())
def backend(request, monkeypatch):
    """Run a test once per kernel backend by patching the dispatch table."""
    impl = kernels.get_backend(request.param)
    for name in ("segment_graph", "greedy_match", "maxflow"):
        monkeypatch.setattr(kernels, name, getattr(impl, name))
    return request.param


@pytest.fixture(scope="session")
def mini_dataset(tmp_path_factory):
    """The seed-7, 24-image synthetic dataset (20 train / 4 test)."""
    root = tmp_path_factory.mktemp("mini")
    gen_synth(7, 24, str(root))
    return root


@pytest.fixture(scope="session")
def mini_bundle(mini_dataset):
    from sceneparse.pipeline import train

    return train(str(mini_dataset))


def grid_edges(h, w):
    idx = np.arange(h * w).reshape(h, w)
    a = np.concatenate([idx[:, :-1].ravel(), idx[:-1, :].ravel()])
    b = np.concatenate([idx[:, 1:].ravel(), idx[1:, :].ravel()])
    return a, b


# criterion number -> (passed, detail), filled by test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
