import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from shl.dataset import LabeledDataset  # noqa: E402
from shl.kernels import KernelSpec  # noqa: E402

SMALL_KERNELS = [KernelSpec("linear"), KernelSpec("gauss", bandwidth=1.0), KernelSpec("gauss", bandwidth=4.0)]


def make_blobs(n, n_classes=2, dim=2, spread=0.4, sep=4.0, seed=0):
    rng = np.random.default_rng(seed)
    angles = 2 * np.pi * np.arange(n_classes) / n_classes
    centers = np.zeros((n_classes, dim))
    centers[:, 0] = sep * np.cos(angles)
    centers[:, 1] = sep * np.sin(angles)
    labels = np.arange(n) % n_classes
    rng.shuffle(labels)
    X = centers[labels] + spread * rng.normal(size=(n, dim))
    return X, labels, centers


@pytest.fixture
def blobs():
    X, y, centers = make_blobs(60, 2, seed=3)
    return LabeledDataset(X, y), centers


@pytest.fixture
def small_kernels():
    return list(SMALL_KERNELS)


ACCEPTANCE_RESULTS = {}


def record_acceptance(number, passed, detail):
    ACCEPTANCE_RESULTS[number] = (bool(passed), detail)
    print(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_RESULTS):
        passed, detail = ACCEPTANCE_RESULTS[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
