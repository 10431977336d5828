import numpy as np
import pytest

from mblkam.kam.blocks import (
    ResonantBlock,
    block_rotation,
    flip_sites,
    form_blocks,
    greedy_match,
    resonant_cores,
    sector_rotation,
    unite_overlapping,
    fatten,
)
from mblkam.model import ChainGeometry, build_hamiltonian


def test_flip_sites_uses_chain_labels():
    g = ChainGeometry.from_n(4)  # sites -1..2
    assert flip_sites(0b1000, 0, g) == {-1}
    assert flip_sites(0b0101, 0b0000, g) == {0, 2}


def test_cores_split_into_components_then_merge():
    assert resonant_cores([{0}, {1}, {5}], block_constant=0.0) == [frozenset({0, 1}), frozenset({5})]
    # exp(1 * sqrt(1)) ~ 2.7: blocks two apart merge, five apart do not
    assert resonant_cores([{0}, {2}], block_constant=1.0) == [frozenset({0, 2})]
    assert resonant_cores([{0}, {5}], block_constant=1.0) == [frozenset({0}), frozenset({5})]
    assert resonant_cores([]) == []


def test_fatten_clips_to_chain():
    g = ChainGeometry.from_n(5)
    assert fatten({-2}, 2, g) == {-2, -1, 0}
    assert fatten({0}, 0, g) == {0}


def test_unite_touching_blocks():
    a = ResonantBlock(frozenset({0}), frozenset({-1, 0, 1}), 0)
    b = ResonantBlock(frozenset({3}), frozenset({2, 3, 4}), 1)
    c = ResonantBlock(frozenset({7}), frozenset({7}), 0)
    out = unite_overlapping([a, b, c])
    assert [set(x.core_sites) for x in out] == [{0, 3}, {7}]
    assert out[0].activation_step == 1


def test_form_blocks_from_pairs():
    g = ChainGeometry.from_n(6)
    blocks = form_blocks([(0, 1 << g.bit(0))], g, 1.0)
    assert len(blocks) == 1 and blocks[0].core_sites == {0}
    assert blocks[0].fattened_sites == {-1, 0, 1}
    assert blocks[0].to_dict()["diameter"] == 1


def test_greedy_match_is_a_permutation():
    ov = np.array([[0.9, 0.1, 0.0], [0.1, 0.45, 0.45], [0.0, 0.45, 0.55]])
    np.testing.assert_array_equal(greedy_match(ov), [0, 1, 2])
    ties = np.array([[0.5, 0.5], [0.5, 0.5]])
    np.testing.assert_array_equal(greedy_match(ties), [0, 1])
    rng = np.random.default_rng(0)
    for _ in range(20):
        Q, _ = np.linalg.qr(rng.normal(size=(6, 6)))
        assert sorted(greedy_match(Q**2)) == list(range(6))


def test_sector_rotation_diagonalizes_block(hamiltonian):
    real, H = hamiltonian(n=5, gamma=0.3, seed=2)
    g = real.geometry
    rot = sector_rotation(H, {0, 1}, g)
    O = rot.dense()
    np.testing.assert_allclose(O.T @ O, np.eye(g.dim), atol=1e-13)
    Hn = rot.conjugate(H)
    np.testing.assert_allclose(Hn, O.T @ H @ O, atol=1e-13)
    # no coupling left between configurations differing only inside the block
    idx = rot.index
    for o in range(idx.shape[0]):
        sub = Hn[np.ix_(idx[o], idx[o])]
        np.testing.assert_allclose(sub - np.diag(np.diag(sub)), 0.0, atol=1e-13)
    np.testing.assert_allclose(rot.right_multiply(np.eye(g.dim)), O, atol=1e-15)
    # matched vectors keep a positive overlap with their label
    assert np.all(np.diag(O) > 0)


def test_block_rotation_metaspin_map(hamiltonian):
    real, H = hamiltonian(n=4, gamma=0.05, seed=1)
    block = ResonantBlock(frozenset({0}), frozenset({-1, 0, 1}))
    O, meta = block_rotation(H, block, real.geometry)
    assert meta.shape == (2, 8)
    for row in meta:
        assert sorted(row) == list(range(8))
    with pytest.raises(ValueError):
        sector_rotation(H, [], real.geometry)
