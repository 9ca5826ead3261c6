"""Acceptance suite: one test per criterion, at the stated tolerances.

Each test executes the corresponding registered check (the same code path the
``geodexp verify`` CLI runs) and prints its pass/fail line; run with ``-s`` to
see every line.
"""

import pytest

from geodexp.config import default_config
from geodexp.suites import CHECKS

_CRITERIA = {
    "A1": "geodesic expansion orders: slopes 4/2/3 within 0.3 on S2 and half-plane",
    "A2": "group law: compose/associativity/inverse slopes >= 3.7, identity exact",
    "A3": "normal-coordinate metric expansion matches -(1/3) R within 1e-3",
    "A4": "Haar Jacobian identities: slopes >= 2.7 both sides, Euclidean exact",
    "A5": "diffeo measure: non-covariant cancellation and slope >= 2.7",
    "A6": "structure equations < 1e-6 at 128^2, refinement slope 4 +- 0.5",
    "A7": "diffeo action vs reparametrization oracle slope >= 3.7",
    "A8": "xi_0 invariance slope >= 2.7 on circle and sphere",
    "A9": "gauge generator slopes: >= 2.7 full, 2 +- 0.3 first order",
    "A10": "FP determinant invariance slope >= 2.7, flat background exact 0",
    "A11": "pipeline identity term-by-term within 1e-8 on every background",
    "A12": "action expansion slope >= 2.7; 2 pi r, 4 pi to 1e-6; det A to 1e-10",
}


@pytest.fixture(scope="module")
def config():
    return default_config()


@pytest.mark.parametrize("criterion", list(_CRITERIA))
def test_acceptance(criterion, config):
    result = CHECKS[criterion](config)
    print(result.line())
    detail = ", ".join(f"{k}={v:.3e}" for k, v in result.values.items())
    assert result.passed, f"{criterion} failed: {detail}"
