"""Matching-cost model for the inverted list, the keyword trie and the AKI,
plus the expected spatial replication of a query at its indexing level."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from engines.baselines import OKT
from engines.common import DivideByZero, UnknownKeyword
from engines.pyramid import PyramidConfig

Alpha = Dict[Tuple[int, str], float]


@dataclass
class CostParams:
    posting_lengths: Dict[str, int] = field(default_factory=dict)
    # (trie depth, keyword) -> probability the keyword is present at that depth
    alpha: Alpha = field(default_factory=dict)
    theta: int = 5
    max_depth: int = 3
    gran_max: int = 512

    def __post_init__(self) -> None:
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        for key, value in self.alpha.items():
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"alpha{key} = {value} outside [0, 1]")


def mp_ril(keywords: Sequence[str], posting_lengths: Mapping[str, int]) -> int:
    total = 0
    for s in keywords:
        if s not in posting_lengths:
            raise UnknownKeyword(f"no posting list for {s!r}")
        total += posting_lengths[s]
    return total


def mp_okt(i: int, keywords: Sequence[str], params: CostParams) -> float:
    """Expected trie lookups when searching ``keywords`` from depth ``i`` (root children are depth 1)."""
    n = len(keywords)
    if n == 0 or i >= params.max_depth:
        return float(n)
    total = float(n)
    for j, s in enumerate(keywords):
        a = params.alpha.get((i, s), 0.0)
        if a:
            total += a * mp_okt(i + 1, keywords[j + 1 :], params)
    return total


def mp_aki(i: int, keywords: Sequence[str], params: CostParams, node_is_frequent: bool = False) -> float:
    if not node_is_frequent:
        return float(len(keywords) * params.theta)
    return mp_okt(i, keywords, params)


def theta_bound(mp_okt_value: float, s_size: int) -> float:
    if s_size == 0:
        raise DivideByZero("keyword set is empty")
    return mp_okt_value / s_size


def mp_fast(keywords: Sequence[str], params: CostParams, node_is_frequent: bool = False) -> float:
    height = math.log2(params.gran_max)
    return height * mp_aki(1, keywords, params, node_is_frequent)


# =========================
# Spatial replication
# =========================


def expected_replication(i: int) -> float:
    """Mean cells touched by a query ``i`` levels above its min level.

    Side lengths are uniform in (0.5, 1] of the min-level cell side; the
    antiderivative of (2^i + r)^2 is evaluated in closed form.
    """
    if i < 0:
        raise ValueError("i must be >= 0")
    a = float(2**i)
    return (2.0 / (a * a)) * (((a + 1.0) ** 3 - (a + 0.5) ** 3) / 3.0)


def expected_replication_uniform(n: int) -> float:
    if n < 1:
        raise ValueError("n must be >= 1")
    return sum(expected_replication(i) for i in range(n)) / n


def region_probabilities(r: float) -> Dict[str, Tuple[float, int]]:
    """Where a query corner may fall in a cell, with its probability and replication."""
    return {
        "single": ((1 - r) ** 2, 1),
        "right": (r * (1 - r), 2),
        "top": (r * (1 - r), 2),
        "corner": (r * r, 4),
    }


def weighted_replication(r: float) -> float:
    return sum(p * rep for p, rep in region_probabilities(r).values())


def simulate_replication(
    n: int,
    seed: Optional[int] = None,
    gran_max: int = 512,
    min_gran: int = 64,
) -> float:
    """Monte-Carlo mean of cells touched at the min level.

    Levels are drawn uniformly among those with at least ``min_gran`` cells
    per side so that border effects stay negligible.
    """
    cfg = PyramidConfig(gran_max=gran_max)
    levels = [i for i in range(cfg.top_level + 1) if cfg.gran(i) >= min_gran]
    if not levels:
        raise ValueError(f"no level with at least {min_gran} cells per side")
    rng = np.random.default_rng(seed)
    level = rng.choice(levels, size=n)
    side = cfg.side_len_min * np.power(2.0, level)
    gran = gran_max / np.power(2.0, level)
    r = rng.uniform(0.5, 1.0, size=n) * side
    x = rng.uniform(0.0, 1.0, size=n) * (1.0 - r)
    y = rng.uniform(0.0, 1.0, size=n) * (1.0 - r)

    def span(lo):
        first = np.minimum(np.floor(lo / side), gran - 1)
        last = np.minimum(np.floor((lo + r) / side), gran - 1)
        return last - first + 1

    return float(np.mean(span(x) * span(y)))


# =========================
# Calibration against a built trie
# =========================


def estimate_alpha(okt: OKT, searches: Iterable[Sequence[str]]) -> Alpha:
    """Per (depth, keyword): hits / lookups observed while searching ``okt``."""
    lookups: Dict[Tuple[int, str], int] = defaultdict(int)
    hits: Dict[Tuple[int, str], int] = defaultdict(int)

    def walk(node, start: int, depth: int, keywords: Sequence[str]) -> None:
        for j in range(start, len(keywords)):
            key = (depth, keywords[j])
            lookups[key] += 1
            child = node.children.get(keywords[j])
            if child is None:
                continue
            hits[key] += 1
            walk(child, j + 1, depth + 1, keywords)

    for keywords in searches:
        walk(okt.root, 0, 1, list(keywords))
    return {key: hits[key] / count for key, count in lookups.items()}


def theta_bound_report(
    okt: OKT,
    searches: Sequence[Sequence[str]],
    theta: int = 5,
    gran_max: int = 512,
) -> List[Dict]:
    """Model cost and the largest useful theta, per search-length class and overall."""
    alpha = estimate_alpha(okt, searches)
    params = CostParams(alpha=alpha, theta=theta, max_depth=max(okt.max_depth(), 1) + 1, gran_max=gran_max)
    by_len: Dict[int, List[float]] = defaultdict(list)
    for keywords in searches:
        if keywords:
            by_len[len(keywords)].append(mp_okt(1, list(keywords), params))
    rows = []
    all_costs: List[float] = []
    all_bounds: List[float] = []
    for size in sorted(by_len):
        costs = by_len[size]
        mean_cost = sum(costs) / len(costs)
        rows.append(
            {
                "class": f"|S|={size}",
                "searches": len(costs),
                "mp_okt": mean_cost,
                "theta_bound": theta_bound(mean_cost, size),
            }
        )
        all_costs.extend(costs)
        all_bounds.extend(theta_bound(c, size) for c in costs)
    if all_costs:
        rows.append(
            {
                "class": "mean",
                "searches": len(all_costs),
                "mp_okt": sum(all_costs) / len(all_costs),
                "theta_bound": sum(all_bounds) / len(all_bounds),
            }
        )
    return rows


def model_rows(theta: int = 5, gran_max: int = 512, levels: Optional[int] = None) -> List[Dict]:
    """Closed-form values printed by the ``costmodel`` command."""
    cfg = PyramidConfig(gran_max=gran_max)
    n = levels or cfg.top_level
    rows: List[Dict] = []
    for i in range(n):
        rows.append({"metric": "expected_replication", "arg": i, "value": expected_replication(i)})
    rows.append({"metric": "expected_replication_uniform", "arg": n, "value": expected_replication_uniform(n)})
    params = CostParams(theta=theta, gran_max=gran_max)
    for size in (1, 2, 3, 5):
        s = [f"k{j}" for j in range(size)]
        rows.append({"metric": "mp_aki_infrequent", "arg": size, "value": mp_aki(1, s, params)})
        rows.append({"metric": "mp_fast", "arg": size, "value": mp_fast(s, params)})
    return rows
