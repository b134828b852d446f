import numpy as np
import pytest

from nmk import DensityState, layout, tensor


def bell_pair(a="A", b="B"):
    m = np.zeros((4, 4), dtype=complex)
    for i in (0, 3):
        for j in (0, 3):
            m[i, j] = 0.5
    return DensityState(layout((a, 2, "alice"), (b, 2, "bob")), m)


def eve_zero(label="E", dim=2):
    m = np.zeros((dim, dim), dtype=complex)
    m[0, 0] = 1.0
    return DensityState(layout((label, dim, "eve")), m)


def ghz_diag():
    m = np.zeros((8, 8), dtype=complex)
    m[0, 0] = 0.5
    m[7, 7] = 0.5
    return DensityState(layout(("A", 2, "alice"), ("B", 2, "bob"), ("E", 2, "eve")), m)


def classical_corr(a="A", b="B"):
    return DensityState(
        layout((a, 2, "alice"), (b, 2, "bob")), np.diag([0.5, 0.0, 0.0, 0.5]).astype(complex)
    )


@pytest.fixture
def bell_e0():
    return tensor(bell_pair(), eve_zero())


@pytest.fixture
def classical_corr_e0():
    return tensor(classical_corr(), eve_zero())


@pytest.fixture
def ghz():
    return ghz_diag()
