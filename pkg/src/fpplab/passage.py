"""First-passage metric computations: point-to-point, point-to-set, and
set-to-set minimal path weights with geodesic extraction.

The canonical engine is an exact multi-source Dijkstra over the ordered
monoid of (total weight, hop count) pairs; weights may be ints, Fractions,
or floats.  Geodesics are made deterministic by minimizing total weight,
then hop count, then the vertex sequence lexicographically.  (Pure
lexicographic tie-breaking alone is not well defined once zero-weight
cycles exist -- wandering a cycle can prepend ever-smaller vertices -- so
the hop-count layer pins down a finite candidate set first; minimum-hop
geodesics are automatically self-avoiding.)

A value-only fast path delegates to scipy's Dijkstra for int/float
configurations; integer results are exact.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import Iterable, NamedTuple

from . import kernels
from .lattice import Box, Circuit, Path, WeightConfig, circuit_weakly_inside, edge, neighbors


@dataclass(frozen=True)
class Boundary:
    """Target marker for the vertex boundary of B(n)."""

    n: int


class PassageResult(NamedTuple):
    value: object
    geodesic: Path


def _as_vertex_set(config: WeightConfig, spec) -> frozenset:
    if isinstance(spec, Boundary):
        if spec.n > config.region.n:
            raise ValueError(f"boundary B({spec.n}) outside region B({config.region.n})")
        return frozenset(Box(spec.n).boundary())
    if isinstance(spec, Circuit):
        return spec.vertex_set
    if isinstance(spec, tuple) and len(spec) == 2 and all(isinstance(c, int) for c in spec):
        return frozenset([spec])
    return frozenset(spec)


def _check_in_region(config: WeightConfig, verts, label: str):
    for v in verts:
        if not config.region.contains(v):
            raise ValueError(f"{label} vertex {v} outside region B({config.region.n})")


def _dijkstra(config: WeightConfig, seeds: frozenset):
    """Exact (weight, hops) distances from a seed set, over region vertices."""
    box = config.region
    dist = {v: (0, 0) for v in seeds}
    heap = [(0, 0, v) for v in sorted(seeds)]
    heapq.heapify(heap)
    done = set()
    while heap:
        d, h, v = heapq.heappop(heap)
        if v in done:
            continue
        done.add(v)
        for u in neighbors(v):
            if not box.contains(u) or u in done:
                continue
            w = config.weight(edge(v, u))
            cand = (d + w, h + 1)
            if u not in dist or cand < dist[u]:
                dist[u] = cand
                heapq.heappush(heap, (cand[0], cand[1], u))
    return dist


def passage_time(config: WeightConfig, source, target) -> PassageResult:
    """Minimal total weight over lattice paths from the source set to the
    target set, together with the deterministic geodesic attaining it."""
    src = _as_vertex_set(config, source)
    tgt = _as_vertex_set(config, target)
    if not src or not tgt:
        raise ValueError("source and target must be nonempty")
    _check_in_region(config, src, "source")
    _check_in_region(config, tgt, "target")

    dist = _dijkstra(config, tgt)
    best = min((dist[s][0], dist[s][1], s) for s in src)
    value, hops, start = best

    verts = [start]
    v = start
    d, h = dist[v]
    while h > 0:
        step = None
        for u in sorted(neighbors(v)):
            if not config.region.contains(u):
                continue
            w = config.weight(edge(v, u))
            if u in dist and dist[u] == (d - w, h - 1):
                step = u
                break
        if step is None:  # cannot happen on a connected box
            raise RuntimeError("geodesic walk lost the distance gradient")
        verts.append(step)
        v = step
        d, h = dist[v]
    return PassageResult(value=value, geodesic=Path(vertices=tuple(verts)))


def passage_value(config: WeightConfig, source, target, engine: str = "auto"):
    """Value-only passage time.

    engine 'exact' forces the pure-Python Dijkstra; 'fast' uses the
    scipy-backed kernel (int results exact, floats carry a tiny positive
    bias); 'auto' picks 'fast' for int/float configs.
    """
    if engine == "auto":
        engine = "exact" if config.numeric_kind() == "exact" else "fast"
    if engine == "exact":
        return passage_time(config, source, target).value
    src = _as_vertex_set(config, source)
    tgt = _as_vertex_set(config, target)
    _check_in_region(config, src, "source")
    _check_in_region(config, tgt, "target")
    east, north = config.arrays()
    n = config.region.n
    return kernels.min_dist(
        east, north, kernels.vertex_ids(n, src), kernels.vertex_ids(n, tgt)
    )


def t_to_boundary(config: WeightConfig, n: int, engine: str = "auto"):
    """T from the origin to the boundary of B(n); zero when n == 0."""
    if n < 0 or n > config.region.n:
        raise ValueError(f"boundary index {n} outside region B({config.region.n})")
    if n == 0:
        return 0
    return passage_value(config, (0, 0), Boundary(n), engine=engine)


def t_between_circuits(config: WeightConfig, c1: Circuit, c2: Circuit, engine: str = "auto"):
    """Minimal weight over paths joining a vertex of c1 to a vertex of c2.

    Requires c1 weakly inside c2 (every c1 vertex inside or on c2); shared
    vertices give zero.
    """
    if not circuit_weakly_inside(c1, c2):
        raise ValueError("first circuit is not nested inside the second")
    if c1.vertex_set & c2.vertex_set:
        return 0
    return passage_value(config, c1, c2, engine=engine)
