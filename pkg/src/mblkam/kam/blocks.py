"""Resonant blocks: clustering of resonant flips, fattening, and the exact
rotation of a fattened block sector by sector."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
import scipy.linalg

from ..exceptions import NumericalError
from ..model import ChainGeometry

__all__ = [
    "ResonantBlock",
    "flip_sites",
    "resonant_cores",
    "fatten",
    "unite_overlapping",
    "form_blocks",
    "SectorRotation",
    "sector_rotation",
    "greedy_match",
    "block_rotation",
]


@dataclass(frozen=True)
class ResonantBlock:
    """Core sites ``B`` and fattened sites ``B-bar``, as chain labels."""

    core_sites: frozenset[int]
    fattened_sites: frozenset[int]
    activation_step: int | None = None

    @property
    def diameter(self) -> int:
        return max(self.core_sites) - min(self.core_sites) + 1

    @property
    def volume(self) -> int:
        return len(self.core_sites)

    def to_dict(self) -> dict:
        return {
            "core": sorted(self.core_sites),
            "fattened": sorted(self.fattened_sites),
            "diameter": self.diameter,
            "volume": self.volume,
            "activation_step": self.activation_step,
        }


def flip_sites(sigma: int, tau: int, geometry: ChainGeometry) -> frozenset[int]:
    """Chain labels of the sites where two basis labels differ."""
    diff = sigma ^ tau
    return frozenset(geometry.site(geometry.n - 1 - b) for b in range(geometry.n) if diff >> b & 1)


def _site_sets(resonant: Iterable, geometry: ChainGeometry) -> list[frozenset[int]]:
    sets = []
    for item in resonant:
        if isinstance(item, tuple) and len(item) == 2 and all(isinstance(v, (int, np.integer)) for v in item):
            sets.append(flip_sites(int(item[0]), int(item[1]), geometry))
        else:
            sets.append(frozenset(int(s) for s in item))
    return sets


def _distance(a: frozenset[int], b: frozenset[int]) -> int:
    return min(abs(i - j) for i in a for j in b)


def resonant_cores(site_sets: Iterable[Iterable[int]], block_constant: float = 1.0) -> list[frozenset[int]]:
    """Union the flipped sites, split into nearest-neighbour components, then
    unite blocks of volumes ``V1 <= V2`` lying within ``exp(c * sqrt(V1))``
    of each other until nothing changes."""
    sites = sorted(set().union(*map(set, site_sets)))
    blocks: list[frozenset[int]] = []
    run: list[int] = []
    for s in sites:
        if run and s != run[-1] + 1:
            blocks.append(frozenset(run))
            run = []
        run.append(s)
    if run:
        blocks.append(frozenset(run))

    merged = True
    while merged:
        merged = False
        for i in range(len(blocks)):
            for j in range(i + 1, len(blocks)):
                v1 = min(len(blocks[i]), len(blocks[j]))
                if _distance(blocks[i], blocks[j]) <= math.exp(block_constant * math.sqrt(v1)):
                    blocks[i] = blocks[i] | blocks[j]
                    del blocks[j]
                    merged = True
                    break
            if merged:
                break
    return sorted(blocks, key=min)


def fatten(sites: Iterable[int], radius: int, geometry: ChainGeometry) -> frozenset[int]:
    lo, hi = -geometry.left_end, geometry.right_end
    out = set()
    for s in sites:
        out.update(range(max(lo, s - radius), min(hi, s + radius) + 1))
    return frozenset(out)


def unite_overlapping(blocks: list[ResonantBlock]) -> list[ResonantBlock]:
    """Unite blocks whose fattened sets overlap or touch."""
    blocks = list(blocks)
    merged = True
    while merged:
        merged = False
        for i in range(len(blocks)):
            for j in range(i + 1, len(blocks)):
                a, b = blocks[i], blocks[j]
                if _distance(a.fattened_sites, b.fattened_sites) <= 1:
                    steps = [s for s in (a.activation_step, b.activation_step) if s is not None]
                    blocks[i] = ResonantBlock(
                        a.core_sites | b.core_sites,
                        a.fattened_sites | b.fattened_sites,
                        max(steps) if steps else None,
                    )
                    del blocks[j]
                    merged = True
                    break
            if merged:
                break
    return sorted(blocks, key=lambda b: min(b.core_sites))


def form_blocks(
    resonant: Iterable,
    geometry: ChainGeometry,
    L_k: float,
    block_constant: float = 1.0,
) -> list[ResonantBlock]:
    """Blocks from resonant pairs (basis-label tuples) or explicit site sets,
    each fattened by ``floor(L_k)`` sites on both sides."""
    cores = resonant_cores(_site_sets(resonant, geometry), block_constant)
    radius = int(math.floor(L_k))
    return unite_overlapping([ResonantBlock(c, fatten(c, radius, geometry)) for c in cores])


def greedy_match(overlap: np.ndarray) -> np.ndarray:
    """Assign eigenvectors (columns) to labels (rows) by descending overlap.

    Ties go to the lower column, i.e. the lower energy.  Returns ``label``
    with ``label[col]`` the row assigned to column ``col``.
    """
    B = overlap.shape[0]
    label = np.full(B, -1, dtype=np.int64)
    if B == 1:
        label[0] = 0
        return label
    # when every column's best row is distinct, greedy picks exactly those
    best = np.argmax(overlap, axis=0)
    if np.unique(best).size == B:
        return best.astype(np.int64)
    flat = overlap.ravel()
    cols = np.tile(np.arange(B), B)
    order = np.lexsort((cols, -flat))
    row_taken = np.zeros(B, dtype=bool)
    assigned = 0
    for f in order:
        r, c = divmod(int(f), B)
        if label[c] >= 0 or row_taken[r]:
            continue
        label[c] = r
        row_taken[r] = True
        assigned += 1
        if assigned == B:
            break
    return label


@dataclass(eq=False)
class SectorRotation:
    """Block-diagonal rotation in the permuted basis ``perm = index.ravel()``.

    ``index[o, s]`` is the basis label with exterior configuration ``o`` and
    interior configuration ``s``; ``vectors[o]`` holds the sector's
    eigenvectors with column ``s`` the one carrying metaspin label ``s``.
    """

    sites: tuple[int, ...]
    index: np.ndarray
    vectors: np.ndarray
    energies: np.ndarray
    metaspin_map: np.ndarray = field(repr=False)

    @property
    def perm(self) -> np.ndarray:
        return self.index.ravel()

    def dense(self) -> np.ndarray:
        N = self.index.size
        O = np.zeros((N, N))
        perm = self.perm
        O[np.ix_(perm, perm)] = scipy.linalg.block_diag(*self.vectors)
        return O

    def conjugate(self, H: np.ndarray) -> np.ndarray:
        """``O^T H O`` without forming ``O``."""
        M, B = self.index.shape
        N = M * B
        perm = self.perm
        Hp = H[np.ix_(perm, perm)]
        V = self.vectors
        T = np.matmul(V.transpose(0, 2, 1), Hp.reshape(M, B, N))  # (M, B, N)
        T = T.reshape(N, M, B).transpose(1, 0, 2)  # (M, N, B)
        T = np.matmul(T, V).transpose(1, 0, 2).reshape(N, N)
        out = np.empty_like(T)
        out[np.ix_(perm, perm)] = T
        return 0.5 * (out + out.T)

    def right_multiply(self, U: np.ndarray) -> np.ndarray:
        """``U @ O`` without forming ``O``."""
        M, B = self.index.shape
        N = M * B
        perm = self.perm
        Up = U[:, perm].reshape(U.shape[0], M, B).transpose(1, 0, 2)
        T = np.matmul(Up, self.vectors).transpose(1, 0, 2).reshape(U.shape[0], N)
        out = np.empty_like(T)
        out[:, perm] = T
        return out


def _sector_index(positions: list[int], n: int) -> np.ndarray:
    inner_bits = [n - 1 - p for p in positions]
    outer_bits = [n - 1 - p for p in range(n) if p not in set(positions)]

    def spread(bits):
        k = len(bits)
        labels = np.arange(1 << k)
        out = np.zeros(1 << k, dtype=np.int64)
        for j, bit in enumerate(bits):
            out |= ((labels >> (k - 1 - j)) & 1) << bit
        return out

    return spread(outer_bits)[:, None] | spread(inner_bits)[None, :]


def sector_rotation(Hk: np.ndarray, sites: Iterable[int], geometry: ChainGeometry) -> SectorRotation:
    """Exactly diagonalize ``Hk`` within every exterior sector of ``sites``."""
    sites = tuple(sorted(set(sites)))
    if not sites:
        raise ValueError("block must contain at least one site")
    positions = [geometry.position(s) for s in sites]
    index = _sector_index(positions, geometry.n)
    sub = Hk[index[:, :, None], index[:, None, :]]
    try:
        w, V = np.linalg.eigh(sub)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"sector diagonalization failed for block {sites}: {exc}") from exc

    M, B = index.shape
    vectors = np.empty_like(V)
    energies = np.empty_like(w)
    metaspin = np.empty((M, B), dtype=np.int64)
    for o in range(M):
        label = greedy_match(V[o] ** 2)
        metaspin[o] = label
        cols = V[o]
        signs = np.sign(cols[label, np.arange(B)])
        signs[signs == 0] = 1.0
        vectors[o][:, label] = cols * signs
        energies[o][label] = w[o]
    return SectorRotation(sites, index, vectors, energies, metaspin)


def block_rotation(Hk: np.ndarray, block: ResonantBlock, geometry: ChainGeometry):
    """Dense orthogonal ``O`` diagonalizing ``Hk`` inside ``B-bar`` sector by
    sector, and the per-sector metaspin map (``map[o, a]`` is the label given
    to the ``a``-th lowest eigenvector of sector ``o``)."""
    rot = sector_rotation(Hk, block.fattened_sites, geometry)
    return rot.dense(), rot.metaspin_map
