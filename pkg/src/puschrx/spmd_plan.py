"""Partition planners for a tiled SPMD cluster with banked shared memory.

Pure functions: given work dims and a Topology they return an Assignment
(work item -> core) plus static locality accounting. Nothing here executes
or simulates contention; the numbers are placement counts only.

Memory model. Word addresses interleave across tiles first (consecutive
words land in consecutive tiles), then across the banks of a tile, then
move to the next row. Streamed grid data (matrix columns, per-subcarrier
blocks) is classified through that rule. Transform plans use a stage-local
placement instead: each butterfly quartet's four inputs sit in one bank on
four rows, written there by the previous stage, so a transform of n samples
occupies n/4 banks and every core reads only banks of its own tile.

Locality classes are counted per item as (tile, subgroup, group, cluster)
access counts relative to the assigned core; reads are counted, writes
follow the next stage's placement and are not.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

LOCALITY_CLASSES = ("tile", "subgroup", "group", "cluster")


@dataclass(frozen=True)
class Topology:
    cores: int = 1024
    banks: int = 4096
    cores_per_tile: int = 8
    tiles_per_subgroup: int = 8
    subgroups_per_group: int = 4
    groups: int = 4
    row_capacity: int | None = None    # words per memory row, default = banks

    def __post_init__(self):
        n_tiles = self.tiles_per_subgroup * self.subgroups_per_group * self.groups
        if self.cores != self.cores_per_tile * n_tiles:
            raise ValueError(f"{self.cores} cores != {self.cores_per_tile} x {n_tiles} tiles")
        if self.banks % n_tiles:
            raise ValueError(f"{self.banks} banks not divisible by {n_tiles} tiles")
        if self.row_capacity is None:
            object.__setattr__(self, "row_capacity", self.banks)
        if self.row_capacity < 1:
            raise ValueError("row_capacity must be >= 1")

    @property
    def n_tiles(self) -> int:
        return self.tiles_per_subgroup * self.subgroups_per_group * self.groups

    @property
    def banks_per_tile(self) -> int:
        return self.banks // self.n_tiles

    @property
    def cores_per_group(self) -> int:
        return self.cores // self.groups

    @property
    def banks_per_group(self) -> int:
        return self.banks // self.groups

    def tile_of_core(self, core) -> np.ndarray:
        return np.asarray(core) // self.cores_per_tile

    def tile_of_bank(self, bank) -> np.ndarray:
        return np.asarray(bank) // self.banks_per_tile

    def word_to_bank_row(self, word):
        """Tile-interleaved word placement (bijective with its inverse)."""
        w = np.asarray(word)
        tile = w % self.n_tiles
        slot = (w // self.n_tiles) % self.banks_per_tile
        return tile * self.banks_per_tile + slot, w // self.banks

    def bank_row_to_word(self, bank, row):
        b = np.asarray(bank)
        tile, slot = b // self.banks_per_tile, b % self.banks_per_tile
        return np.asarray(row) * self.banks + slot * self.n_tiles + tile

    def locality_class(self, core, bank) -> np.ndarray:
        """0=tile, 1=subgroup, 2=group, 3=cluster, broadcasting."""
        ct = self.tile_of_core(core)
        bt = self.tile_of_bank(bank)
        cls = np.full(np.broadcast(ct, bt).shape, 3, dtype=np.int64)
        same_group = (ct // (self.tiles_per_subgroup * self.subgroups_per_group)
                      == bt // (self.tiles_per_subgroup * self.subgroups_per_group))
        cls[same_group] = 2
        same_sub = same_group & (ct // self.tiles_per_subgroup == bt // self.tiles_per_subgroup)
        cls[same_sub] = 1
        cls[(ct == bt)] = 0
        return cls


@dataclass(frozen=True)
class Assignment:
    scheme: str
    items: tuple                 # work item ids, strings
    cores: tuple                 # assigned core per item
    locality: tuple              # per item: (tile, subgroup, group, cluster) counts
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (len(self.items) == len(self.cores) == len(self.locality)):
            raise ValueError("items/cores/locality length mismatch")
        if len(set(self.items)) != len(self.items):
            raise ValueError("duplicate work items")

    def histogram(self) -> dict:
        tot = np.sum(np.asarray(self.locality, dtype=np.int64).reshape(-1, 4), axis=0) \
            if self.locality else np.zeros(4, np.int64)
        return dict(zip(LOCALITY_CLASSES, (int(t) for t in tot)))

    def cores_used(self) -> set:
        return set(self.cores)

    def to_csv(self) -> str:
        """item, core, locality-class; class = farthest class the item touches."""
        buf = io.StringIO()
        buf.write("item,core,locality_class\n")
        for item, core, loc in zip(self.items, self.cores, self.locality):
            worst = max((k for k in range(4) if loc[k]), default=0)
            buf.write(f"{item},{core},{LOCALITY_CLASSES[worst]}\n")
        return buf.getvalue()


DEFAULT_TOPOLOGY = Topology()


def plan_fft(n: int, n_antennas: int = 1, topo: Topology = DEFAULT_TOPOLOGY) -> Assignment:
    """Distribute n-point transforms of independent antennas over cores.

    Each antenna needs n/16 cores (4 butterflies of 4 banks each per core
    per stage); antennas occupy disjoint contiguous core ranges, so 4
    transforms of 4096 points fill the default 1024-core cluster exactly.
    Items are per-antenna core bundles; the quartet -> core map is the same
    at every stage under the stage-local placement, and every read it
    counts is tile-local.
    """
    if n < 16 or n & (n - 1):
        raise ValueError(f"transform length {n} must be a power of two >= 16")
    if n_antennas < 1:
        raise ValueError("n_antennas must be >= 1")
    per_fft = n // 16
    need = per_fft * n_antennas
    if need > topo.cores:
        raise ValueError(f"oversubscribed: need {need} cores "
                         f"({n_antennas} x {per_fft}), topology has {topo.cores}")
    if n // 4 > topo.banks:
        raise ValueError(f"transform needs {n // 4} banks, topology has {topo.banks}")
    n_stages = 0
    length = n
    while length > 1:       # radix-4 stages with a radix-2 tail
        n_stages += 1
        length //= 4 if length % 4 == 0 else 2
    items, cores, locality = [], [], []
    reads = 16 * n_stages   # 4 quartets x 4 rows, every stage, all tile-local
    for a in range(n_antennas):
        base = a * per_fft
        for c in range(per_fft):
            items.append(f"ant{a}/bundle{c}")
            cores.append(base + c)
            locality.append((reads, 0, 0, 0))
    return Assignment("fft", tuple(items), tuple(cores), tuple(locality),
                      meta={"cores_per_fft": per_fft, "banks_per_fft": n // 4,
                            "stages": n_stages})


def _replica_count(n_b: int, n_rx: int, topo: Topology) -> int:
    return max(1, topo.row_capacity // (n_b * n_rx))


def plan_beamform(n_b: int, n_rx: int, n_sc: int = 4096,
                  topo: Topology = DEFAULT_TOPOLOGY) -> Assignment:
    """Distribute output columns of the beamforming product over all cores.

    The coefficient matrix is replicated as many times as fits in one
    memory row; each core reads the replica whose bank span is nearest,
    and cores sharing a tile start their row loop at staggered offsets.
    """
    if n_b < 1 or n_rx < 1 or n_sc < 1:
        raise ValueError(f"bad dims {n_b}x{n_rx}x{n_sc}")
    replicas = _replica_count(n_b, n_rx, topo)
    words = n_b * n_rx
    per_core = -(-n_sc // topo.cores)

    # nearest replica per tile: replica r spans banks [r*words, r*words+words)
    tile_centers = np.arange(topo.n_tiles) * topo.banks_per_tile + topo.banks_per_tile // 2
    spans = np.arange(replicas) * words
    lo = spans[None, :]
    hi = spans[None, :] + words - 1
    dist = np.maximum(0, np.maximum(lo - tile_centers[:, None],
                                    tile_centers[:, None] - hi))
    replica_of_tile = np.argmin(dist, axis=1)

    # per-tile classification of one replica read sweep (words banks)
    a_banks = (spans[:, None] + np.arange(words)[None, :]) % topo.banks
    a_counts = np.zeros((topo.n_tiles, 4), dtype=np.int64)
    for t in range(topo.n_tiles):
        cls = topo.locality_class(t * topo.cores_per_tile, a_banks[replica_of_tile[t]])
        a_counts[t] = np.bincount(cls, minlength=4)

    sc = np.arange(n_sc)
    core_of = sc // per_core
    tile_of = topo.tile_of_core(core_of)
    # streamed input column (n_rx words) + output column (n_b words)
    col_words = (sc[:, None] * (n_rx + n_b) + np.arange(n_rx + n_b)[None, :])
    col_banks, _ = topo.word_to_bank_row(col_words)
    col_cls = topo.locality_class(core_of[:, None] * 0 + tile_of[:, None] * topo.cores_per_tile,
                                  col_banks)
    items, cores, locality = [], [], []
    for i in range(n_sc):
        counts = np.bincount(col_cls[i], minlength=4) + a_counts[tile_of[i]]
        items.append(f"col{i}")
        cores.append(int(core_of[i]))
        locality.append(tuple(int(c) for c in counts))
    in_tile = np.arange(topo.cores) % topo.cores_per_tile
    start_rows = (in_tile * n_b) // topo.cores_per_tile
    return Assignment("beamform", tuple(items), tuple(cores), tuple(locality),
                      meta={"replicas": replicas,
                            "replica_of_core": tuple(int(replica_of_tile[t]) for t in
                                                     topo.tile_of_core(np.arange(topo.cores))),
                            "start_row_of_core": tuple(int(r) for r in start_rows),
                            "columns_per_core": per_core})


def plan_per_subcarrier(n_sc: int, topo: Topology = DEFAULT_TOPOLOGY) -> Assignment:
    """Round-robin subcarrier -> core map; data words stay interleaved
    across the whole cluster, so locality is whatever the hash gives."""
    if n_sc < 1:
        raise ValueError("n_sc must be >= 1")
    sc = np.arange(n_sc)
    core_of = sc % topo.cores
    banks, _ = topo.word_to_bank_row(sc)
    cls = topo.locality_class(core_of, banks)
    items = tuple(f"sc{i}" for i in range(n_sc))
    locality = tuple((1, 0, 0, 0) if c == 0 else
                     (0, 1, 0, 0) if c == 1 else
                     (0, 0, 1, 0) if c == 2 else (0, 0, 0, 1) for c in cls)
    return Assignment("per_subcarrier", items,
                      tuple(int(c) for c in core_of), locality,
                      meta={"items_per_core": -(-n_sc // topo.cores)})
