"""Shared fixtures for the corrlab test suite"""

import sys
from pathlib import Path

import numpy as np
import pytest

ROOT_DIR = Path(__file__).resolve().parent.parent
if str(ROOT_DIR) not in sys.path:
    sys.path.insert(0, str(ROOT_DIR))

from corrlab.app.services.numeric_kernel import Tolerance
from corrlab.app.services.star_algebra import make_multimatrix
from corrlab.app.services.vn_module import make_module

CORPUS_DIR = ROOT_DIR / "corrlab" / "corpus"


@pytest.fixture
def tol():
    return Tolerance(abs_eps=1e-9, rel_eps=1e-8)


@pytest.fixture
def cc():
    """C ⊕ C on C^2."""
    return make_multimatrix([(1, 1), (1, 1)])


@pytest.fixture
def c_m2():
    """diag(C, M_2) inside M_3."""
    return make_multimatrix([(1, 1), (2, 1)])


@pytest.fixture
def non1ex_module(c_m2, tol):
    """The full module (0 C^2*; C^2 0) over diag(C, M_2), which has no unit vector."""
    g1 = np.array([[0, 1, 0], [1, 0, 0], [0, 0, 0]], dtype=complex)
    g2 = np.array([[0, 0, 0], [0, 0, 0], [1, 0, 0]], dtype=complex)
    return make_module(c_m2, 3, [g1, g2], tol)


@pytest.fixture
def corpus_dir():
    return CORPUS_DIR
