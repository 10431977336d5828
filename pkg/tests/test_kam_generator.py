import numpy as np
import pytest

from mblkam.exceptions import NumericalError
from mblkam.kam.generator import build_generator, effective_orders, offdiagonal_band
from mblkam.kam.linalg import hamming_matrix


def _two_spin(J01=0.01, J03=1e-3):
    H = np.diag([0.0, 1.0, 2.5, 4.0])
    H[0, 1] = H[1, 0] = J01
    H[0, 3] = H[3, 0] = J03
    return H


def test_offdiagonal_band_selects_by_hamming_distance():
    H = _two_spin()
    assert offdiagonal_band(H, [1]) == [(0, 1)]
    assert offdiagonal_band(H, [2]) == [(0, 3)]
    assert offdiagonal_band(H, range(1, 3), floor=5e-3) == [(0, 1)]
    with pytest.raises(ValueError):
        offdiagonal_band(H, [1], floor=-1.0)


def test_effective_orders_use_magnitude():
    H = _two_spin(J01=1e-4)
    m = effective_orders(H, 0.01)
    assert m[0, 1] == 2  # one flip apart but of size gamma**2
    assert m[0, 3] == 2
    np.testing.assert_array_equal(effective_orders(H, 0.0), hamming_matrix(2))


def test_generator_entries_and_antisymmetry():
    H = _two_spin()
    gen = build_generator(H, range(1, 3), rho=1.0)
    assert gen.A[0, 1] == pytest.approx(0.01 / (0.0 - 1.0))
    assert gen.A[0, 3] == pytest.approx(1e-3 / (0.0 - 4.0))
    np.testing.assert_array_equal(gen.A, -gen.A.T)
    assert gen.n_candidates == 2 and gen.nnz == 4 and not gen.resonant_pairs


def test_resonant_pairs_are_excluded():
    H = _two_spin(J01=0.2)
    gen = build_generator(H, [1], rho=0.1)
    assert gen.resonant_pairs == [(0, 1)]
    assert gen.A[0, 1] == 0.0


def test_degenerate_pair_is_resonant_and_tiny_pair_dropped():
    H = np.diag([1.0, 1.0, 2.0, 3.0])
    H[0, 1] = H[1, 0] = 0.01
    H[2, 3] = H[3, 2] = 1e-14
    gen = build_generator(H, [1], rho=1e-20, resonance_floor=1e-12)
    assert gen.resonant_pairs == [(0, 1)]
    assert gen.n_dropped == 1


def test_non_finite_entries_raise_with_pair():
    H = _two_spin()
    H[1, 1] = np.inf
    with pytest.raises(NumericalError) as info:
        build_generator(H, [1], rho=1.0)
    assert info.value.details["pair"] == (0, 1)
