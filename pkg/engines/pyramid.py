"""Spatial pyramid math and the lazily instantiated node store.

Level 0 is the finest grid (``gran_max`` cells per dimension); every level up
halves the granularity until the top level holds a single cell covering the
whole normalized space [0, 1]².
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, Iterator, List, Optional, Set, Tuple

from engines.common import (
    MBR,
    ContinuousQuery,
    InvalidCoords,
    InvalidLevel,
    OutOfSpace,
    Point,
    query_side_length,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PyramidConfig:
    gran_max: int = 512

    def __post_init__(self) -> None:
        g = self.gran_max
        if g < 2 or g & (g - 1):
            raise ValueError(f"gran_max must be a power of two >= 2, got {g}")

    @property
    def top_level(self) -> int:
        return self.gran_max.bit_length() - 1

    @property
    def side_len_min(self) -> float:
        return 1.0 / self.gran_max

    def _check_level(self, i: int) -> None:
        if not 0 <= i <= self.top_level:
            raise InvalidLevel(f"level {i} outside [0, {self.top_level}]")

    def gran(self, i: int) -> int:
        self._check_level(i)
        return self.gran_max >> i

    def side_len(self, i: int) -> float:
        self._check_level(i)
        return self.side_len_min * (1 << i)

    def cell_coords(self, p: Point, i: int) -> Tuple[int, int]:
        x, y = p
        if not (0.0 <= x <= 1.0 and 0.0 <= y <= 1.0):
            raise OutOfSpace(f"point {p} outside the indexed space")
        side = self.side_len(i)
        last = self.gran(i) - 1
        # coordinate 1.0 falls on the outer edge; clamp into the last cell
        return min(math.floor(x / side), last), min(math.floor(y / side), last)

    def node_address(self, i: int, x_c: int, y_c: int) -> int:
        g = self.gran(i)
        if not (0 <= x_c < g and 0 <= y_c < g):
            raise InvalidCoords(f"({x_c}, {y_c}) outside level {i} grid of {g}x{g}")
        return i * self.gran_max * self.gran_max + y_c * g + x_c

    def decode_address(self, address: int) -> Tuple[int, int, int]:
        per_level = self.gran_max * self.gran_max
        i, rest = divmod(address, per_level)
        g = self.gran(i)
        y_c, x_c = divmod(rest, g)
        return i, x_c, y_c

    def cell_rect(self, i: int, x_c: int, y_c: int) -> MBR:
        side = self.side_len(i)
        return (x_c * side, y_c * side, (x_c + 1) * side, (y_c + 1) * side)

    def cell_range(self, mbr: MBR, i: int) -> Tuple[int, int, int, int]:
        """Inclusive coordinate range of level-``i`` cells overlapping ``mbr``."""
        x0, y0 = self.cell_coords((mbr[0], mbr[1]), i)
        x1, y1 = self.cell_coords((mbr[2], mbr[3]), i)
        return x0, y0, x1, y1

    def cells_overlapping(self, mbr: MBR, i: int) -> Iterator[Tuple[int, int]]:
        x0, y0, x1, y1 = self.cell_range(mbr, i)
        for y_c in range(y0, y1 + 1):
            for x_c in range(x0, x1 + 1):
                yield x_c, y_c

    def min_level(self, q: ContinuousQuery) -> int:
        """Finest level whose cell side is strictly greater than the query side."""
        r = query_side_length(q)
        for i in range(self.top_level + 1):
            if self.side_len(i) > r:
                return i
        return self.top_level


@dataclass(eq=False)
class PyramidNode:
    address: int
    level: int
    coords: Tuple[int, int]
    cell: MBR
    aki: "object"  # engines.aki.AKI; typed loosely to avoid a circular import


class NodeStore:
    """Hash map address -> PyramidNode; only non-empty nodes are kept."""

    def __init__(
        self,
        config: PyramidConfig,
        aki_factory: Callable[[MBR, int], object],
        on_create: Optional[Callable[[PyramidNode], None]] = None,
    ):
        self.config = config
        self.aki_factory = aki_factory
        self.on_create = on_create
        self.nodes: Dict[int, PyramidNode] = {}
        self.by_level: Dict[int, Set[int]] = {}

    def __len__(self) -> int:
        return len(self.nodes)

    def __iter__(self) -> Iterator[PyramidNode]:
        return iter(list(self.nodes.values()))

    def get_node(self, address: int) -> Optional[PyramidNode]:
        return self.nodes.get(address)

    def get_at(self, i: int, x_c: int, y_c: int) -> Optional[PyramidNode]:
        return self.nodes.get(self.config.node_address(i, x_c, y_c))

    def get_or_create(self, i: int, x_c: int, y_c: int) -> PyramidNode:
        address = self.config.node_address(i, x_c, y_c)
        node = self.nodes.get(address)
        if node is not None:
            return node
        cell = self.config.cell_rect(i, x_c, y_c)
        node = PyramidNode(address=address, level=i, coords=(x_c, y_c), cell=cell, aki=self.aki_factory(cell, i))
        self.nodes[address] = node
        self.by_level.setdefault(i, set()).add(address)
        if self.on_create is not None:
            self.on_create(node)
        return node

    def delete(self, address: int) -> None:
        node = self.nodes.pop(address, None)
        if node is None:
            return
        self.by_level.get(node.level, set()).discard(address)
        logger.debug("Pyramid node %s (level %s) deleted", address, node.level)

    def level_count(self, i: int) -> int:
        return len(self.by_level.get(i, ()))

    def nodes_at_level(self, i: int) -> List[PyramidNode]:
        return [self.nodes[a] for a in self.by_level.get(i, ())]

    def relevant_nodes(self, mbr: MBR, i: int, create: bool = False) -> List[PyramidNode]:
        """Level-``i`` nodes whose cell overlaps ``mbr``."""
        x0, y0, x1, y1 = self.config.cell_range(mbr, i)
        n_cells = (x1 - x0 + 1) * (y1 - y0 + 1)
        if not create and n_cells > self.level_count(i):
            return [
                n
                for n in self.nodes_at_level(i)
                if x0 <= n.coords[0] <= x1 and y0 <= n.coords[1] <= y1
            ]
        out: List[PyramidNode] = []
        for x_c, y_c in self.config.cells_overlapping(mbr, i):
            node = self.get_or_create(i, x_c, y_c) if create else self.get_at(i, x_c, y_c)
            if node is not None:
                out.append(node)
        return out
