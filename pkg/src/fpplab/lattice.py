"""Square-lattice geometry: vertices, edges, boxes, annuli, paths, circuits,
dual edges, and weight configurations.

Conventions used throughout the package:

* a vertex is an ``(x, y)`` pair of ints;
* an edge is a pair of adjacent vertices stored in canonical order
  (lexicographically smaller endpoint first), so edges are usable as dict
  keys without duplicates;
* ``Box(n)`` is ``[-n, n]^2`` with vertex boundary ``{v : ||v||_inf = n}``;
* ``Annulus(k1, k2)`` is ``B(k2) \\ B(k1)``.  An edge belongs to the annulus
  iff both endpoints lie in ``B(k2)`` and at least one endpoint lies outside
  ``B(k1)``.  Edges running along the inner boundary square are therefore
  excluded, which keeps nested sub-annuli edge-disjoint;
* faces (dual vertices) are unit squares addressed by their lower-left
  corner ``(i, j)``; the dual vertex sits at the centre ``(i+1/2, j+1/2)``.

Weight configurations support two storage backends: an exact mapping
``Edge -> Fraction/int/float`` for identity-level work, and a pair of numpy
arrays (east/north edges) for Monte Carlo volume.  Both expose the same
read API.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

Vertex = tuple  # (x, y)
Edge = tuple  # (Vertex, Vertex), canonical order


# ---------------------------------------------------------------------------
# vertices and edges


def is_adjacent(u: Vertex, v: Vertex) -> bool:
    return abs(u[0] - v[0]) + abs(u[1] - v[1]) == 1


def edge(u: Vertex, v: Vertex) -> Edge:
    """Canonical edge with endpoints at L1 distance one."""
    if not is_adjacent(u, v):
        raise ValueError(f"not nearest neighbors: {u}, {v}")
    return (u, v) if u <= v else (v, u)


def edge_east(x: int, y: int) -> Edge:
    return ((x, y), (x + 1, y))


def edge_north(x: int, y: int) -> Edge:
    return ((x, y), (x, y + 1))


def edge_direction(e: Edge) -> str:
    """'E' for horizontal edges, 'N' for vertical ones."""
    (x0, y0), (x1, y1) = e
    return "E" if y0 == y1 else "N"


def neighbors(v: Vertex):
    x, y = v
    return ((x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1))


# ---------------------------------------------------------------------------
# boxes and annuli


@dataclass(frozen=True)
class Box:
    """The square ``[-n, n]^2``."""

    n: int

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("box half-side must be nonnegative")

    def contains(self, v: Vertex) -> bool:
        return max(abs(v[0]), abs(v[1])) <= self.n

    def vertices(self):
        n = self.n
        for x in range(-n, n + 1):
            for y in range(-n, n + 1):
                yield (x, y)

    def boundary(self) -> list[Vertex]:
        """Vertices with sup-norm exactly n, of which there are 8n for n >= 1."""
        n = self.n
        if n == 0:
            return [(0, 0)]
        out = []
        for x in range(-n, n + 1):
            for y in range(-n, n + 1):
                if max(abs(x), abs(y)) == n:
                    out.append((x, y))
        return out


def enumerate_edges(box: Box) -> list[Edge]:
    """Every edge with both endpoints in the box, canonically ordered."""
    n = box.n
    out = []
    for x in range(-n, n + 1):
        for y in range(-n, n + 1):
            if x + 1 <= n:
                out.append(edge_east(x, y))
            if y + 1 <= n:
                out.append(edge_north(x, y))
    out.sort()
    return out


@dataclass(frozen=True)
class Annulus:
    """The region ``B(k2) \\ B(k1)``, ``1 <= k1 < k2``."""

    k1: int
    k2: int

    def __post_init__(self):
        if not (1 <= self.k1 < self.k2):
            raise ValueError(f"need 1 <= k1 < k2, got ({self.k1}, {self.k2})")

    def contains_edge(self, e: Edge) -> bool:
        (x0, y0), (x1, y1) = e
        in_outer = max(abs(x0), abs(y0)) <= self.k2 and max(abs(x1), abs(y1)) <= self.k2
        escapes_inner = max(abs(x0), abs(y0)) > self.k1 or max(abs(x1), abs(y1)) > self.k1
        return in_outer and escapes_inner


# ---------------------------------------------------------------------------
# duality


@dataclass(frozen=True)
class DualEdge:
    """The dual edge bisecting a primal edge.

    Endpoints live on the shifted lattice ``Z^2 + (1/2, 1/2)`` and are
    reported as exact Fraction pairs.
    """

    primal: Edge

    @property
    def endpoints(self):
        (x0, y0), (x1, y1) = self.primal
        h = Fraction(1, 2)
        if y0 == y1:  # horizontal primal -> vertical dual through the midpoint
            mx = x0 + h
            return ((mx, y0 - h), (mx, y0 + h))
        my = y0 + h
        return ((x0 - h, my), (x0 + h, my))


def dual_of(e: Edge) -> DualEdge:
    return DualEdge(primal=e)


def primal_of(d: DualEdge) -> Edge:
    return d.primal


# ---------------------------------------------------------------------------
# paths, winding numbers, circuits


@dataclass(frozen=True)
class Path:
    """An alternating vertex/edge walk; stored as its vertex sequence."""

    vertices: tuple

    def __post_init__(self):
        if len(self.vertices) == 0:
            raise ValueError("path must contain at least one vertex")
        for u, v in zip(self.vertices, self.vertices[1:]):
            if not is_adjacent(u, v):
                raise ValueError(f"non-adjacent consecutive vertices {u}, {v}")

    @property
    def edges(self) -> tuple:
        return tuple(edge(u, v) for u, v in zip(self.vertices, self.vertices[1:]))

    def weight(self, config: "WeightConfig"):
        total = 0
        for e in self.edges:
            total = total + config.weight(e)
        return total

    def is_closed(self) -> bool:
        return len(self.vertices) >= 2 and self.vertices[0] == self.vertices[-1]


def winding_number(path) -> int:
    """Signed number of turns of a closed path about the origin.

    Accepts a Path, Circuit, or a closed vertex sequence.  Computed by
    summing signed angle increments; each per-step increment is below pi in
    magnitude for lattice steps avoiding the origin, so rounding the total
    is safe.
    """
    verts = getattr(path, "vertices", path)
    if len(verts) < 2 or verts[0] != verts[-1]:
        raise ValueError("winding number requires a closed path")
    total = 0.0
    for (ux, uy), (vx, vy) in zip(verts, verts[1:]):
        if (ux, uy) == (0, 0) or (vx, vy) == (0, 0):
            raise ValueError("path passes through the origin")
        total += math.atan2(ux * vy - uy * vx, ux * vx + uy * vy)
    turns = total / (2.0 * math.pi)
    rounded = round(turns)
    if abs(turns - rounded) > 1e-6:
        raise ValueError(f"angle sum {total} is not a multiple of 2*pi")
    return int(rounded)


@dataclass(frozen=True)
class Circuit:
    """A closed self-avoiding lattice path winding once about the origin.

    The vertex sequence is stored closed (first == last).  The trivial
    circuit, consisting of the origin alone with no edges, is the
    distinguished value ``Circuit.trivial()``.
    """

    vertices: tuple
    region: Annulus | None = None

    @classmethod
    def trivial(cls) -> "Circuit":
        return cls(vertices=((0, 0),), region=None)

    @property
    def is_trivial(self) -> bool:
        return len(self.vertices) == 1

    def __post_init__(self):
        v = self.vertices
        if len(v) == 1:
            if v[0] != (0, 0):
                raise ValueError("the trivial circuit consists of the origin")
            return
        if v[0] != v[-1]:
            raise ValueError("circuit must be closed")
        if len(set(v[:-1])) != len(v) - 1:
            raise ValueError("circuit must be vertex self-avoiding")
        for u, w in zip(v, v[1:]):
            if not is_adjacent(u, w):
                raise ValueError("circuit vertices must be lattice-adjacent")
        if abs(winding_number(v)) != 1:
            raise ValueError("circuit must wind exactly once about the origin")
        if self.region is not None:
            for e in self.edges:
                if not self.region.contains_edge(e):
                    raise ValueError(f"edge {e} leaves the annulus {self.region}")

    @property
    def vertex_set(self) -> frozenset:
        return frozenset(self.vertices[:-1]) if not self.is_trivial else frozenset(self.vertices)

    @property
    def edges(self) -> tuple:
        if self.is_trivial:
            return ()
        return tuple(edge(u, v) for u, v in zip(self.vertices, self.vertices[1:]))

    def to_json(self) -> list:
        return [list(v) for v in self.vertices]

    @classmethod
    def from_json(cls, data, region=None) -> "Circuit":
        return cls(vertices=tuple(tuple(v) for v in data), region=region)


def square_ring(r: int, region: Annulus | None = None) -> Circuit:
    """The full square circuit at sup-norm radius ``r``, counterclockwise."""
    if r < 1:
        raise ValueError("ring radius must be >= 1")
    verts = [(r, y) for y in range(-r, r + 1)]
    verts += [(x, r) for x in range(r - 1, -r - 1, -1)]
    verts += [(-r, y) for y in range(r - 1, -r - 1, -1)]
    verts += [(x, -r) for x in range(-r + 1, r + 1)]
    # verts traverses all 8r ring vertices and returns to the start
    ring = verts[:-1]
    k = ring.index(min(ring))
    ring = ring[k:] + ring[:k]
    ring.append(ring[0])
    return Circuit(vertices=tuple(ring), region=region)


def circuit_contains_vertex(c: Circuit, v: Vertex) -> bool:
    """True iff ``v`` lies strictly inside the closed curve of ``c``."""
    if c.is_trivial:
        return False
    if v in c.vertex_set:
        return False
    total = 0.0
    vx0, vy0 = v
    for (ux, uy), (wx, wy) in zip(c.vertices, c.vertices[1:]):
        ax, ay = ux - vx0, uy - vy0
        bx, by = wx - vx0, wy - vy0
        total += math.atan2(ax * by - ay * bx, ax * bx + ay * by)
    return abs(total) > math.pi  # 0 or +-2*pi up to rounding


def circuit_weakly_inside(inner: Circuit, outer: Circuit) -> bool:
    """True iff every vertex of ``inner`` is inside or on the curve of ``outer``.

    Shared vertices are allowed (the passage time between touching circuits
    is zero), but no vertex of ``inner`` may lie strictly outside.
    """
    if outer.is_trivial:
        return inner.is_trivial
    outer_set = outer.vertex_set
    for v in inner.vertex_set:
        if v in outer_set:
            continue
        if not circuit_contains_vertex(outer, v):
            return False
    return True


# ---------------------------------------------------------------------------
# weight configurations


def _rational_str(w) -> str:
    f = Fraction(w)
    return f"{f.numerator}/{f.denominator}"


def _parse_weight(w):
    if isinstance(w, str):
        return Fraction(w)
    if isinstance(w, int):
        return w
    return w  # float


class WeightConfig:
    """Nonnegative edge weights on every edge of a box.

    Two interchangeable backends:

    * ``WeightConfig(region, weights=dict)`` with exact values (Fraction or
      int) or floats;
    * ``WeightConfig.from_arrays(region, east, north)`` with numpy arrays,
      ``east[ix, iy]`` holding the weight of ``(x, y)-(x+1, y)`` for
      ``ix = x + n``, and ``north`` likewise for vertical edges.

    Instances are treated as immutable after construction.  ``uniforms``
    optionally retains the underlying uniform variables used to sample the
    weights, so p-open status stays queryable.
    """

    __slots__ = ("region", "_weights", "_east", "_north", "uniforms")

    def __init__(self, region: Box, weights=None, *, east=None, north=None, uniforms=None):
        self.region = region
        self._weights = weights
        self._east = east
        self._north = north
        self.uniforms = uniforms
        if weights is None and (east is None or north is None):
            raise ValueError("need either a weight map or both edge arrays")

    @classmethod
    def from_arrays(cls, region: Box, east, north, uniforms=None) -> "WeightConfig":
        n = region.n
        east = np.asarray(east)
        north = np.asarray(north)
        if east.shape != (2 * n, 2 * n + 1) or north.shape != (2 * n + 1, 2 * n):
            raise ValueError("edge array shapes do not match the region")
        return cls(region, east=east, north=north, uniforms=uniforms)

    @classmethod
    def constant(cls, region: Box, value) -> "WeightConfig":
        return cls(region, weights={e: value for e in enumerate_edges(region)})

    # -- access ------------------------------------------------------------

    def weight(self, e: Edge):
        if self._weights is not None:
            return self._weights[e]
        (x0, y0), (x1, y1) = e
        n = self.region.n
        if y0 == y1:
            return self._east[x0 + n, y0 + n].item()
        return self._north[x0 + n, y0 + n].item()

    @property
    def weights(self) -> dict:
        if self._weights is None:
            self._weights = {e: self.weight(e) for e in enumerate_edges(self.region)}
        return self._weights

    def has_arrays(self) -> bool:
        return self._east is not None

    def arrays(self):
        """(east, north) numpy arrays; built from the map if necessary.

        Only available when every weight is an int or float (Fractions stay
        in the exact backend).
        """
        if self._east is None:
            n = self.region.n
            vals = list(self.weights.values())
            if any(isinstance(v, Fraction) for v in vals):
                raise TypeError("exact rational config has no array form")
            integral = all(isinstance(v, int) for v in vals)
            dtype = np.int64 if integral else np.float64
            east = np.zeros((2 * n, 2 * n + 1), dtype=dtype)
            north = np.zeros((2 * n + 1, 2 * n), dtype=dtype)
            for ((x0, y0), (x1, y1)), w in self.weights.items():
                if y0 == y1:
                    east[x0 + n, y0 + n] = w
                else:
                    north[x0 + n, y0 + n] = w
            self._east, self._north = east, north
        return self._east, self._north

    def zero_masks(self):
        """Boolean (east, north) arrays marking zero-weight edges."""
        if self._east is not None:
            return self._east == 0, self._north == 0
        n = self.region.n
        ez = np.zeros((2 * n, 2 * n + 1), dtype=bool)
        nz = np.zeros((2 * n + 1, 2 * n), dtype=bool)
        for ((x0, y0), (x1, y1)), w in self.weights.items():
            if w == 0:
                if y0 == y1:
                    ez[x0 + n, y0 + n] = True
                else:
                    nz[x0 + n, y0 + n] = True
        return ez, nz

    def numeric_kind(self) -> str:
        """'int', 'float', or 'exact' (Fractions present)."""
        if self._weights is None:
            return "int" if np.issubdtype(self._east.dtype, np.integer) else "float"
        kinds = set()
        for v in self.weights.values():
            if isinstance(v, Fraction):
                kinds.add("exact")
            elif isinstance(v, int):
                kinds.add("int")
            else:
                kinds.add("float")
        if "exact" in kinds:
            return "exact"
        if kinds == {"int"} or not kinds:
            return "int"
        return "float"

    # -- validation and serialization ---------------------------------------

    def validate(self):
        expected = enumerate_edges(self.region)
        w = self.weights
        missing = [e for e in expected if e not in w]
        if missing:
            raise ValueError(f"{len(missing)} region edges without weights, e.g. {missing[0]}")
        for e, v in w.items():
            if not self.region.contains(e[0]) or not self.region.contains(e[1]):
                raise ValueError(f"edge {e} leaves the region")
            if v < 0:
                raise ValueError(f"negative weight on {e}")
        return self

    def to_json(self) -> dict:
        rows = []
        for e, w in sorted(self.weights.items()):
            (x0, y0), _ = e
            val = _rational_str(w) if isinstance(w, Fraction) else w
            rows.append([x0, y0, edge_direction(e), val])
        return {"n": self.region.n, "edges": rows}

    @classmethod
    def from_json(cls, data) -> "WeightConfig":
        region = Box(int(data["n"]))
        weights = {}
        for x, y, d, val in data["edges"]:
            e = edge_east(x, y) if d == "E" else edge_north(x, y)
            weights[e] = _parse_weight(val)
        cfg = cls(region, weights=weights)
        cfg.validate()
        return cfg

    def dumps(self) -> str:
        return json.dumps(self.to_json(), separators=(",", ":"))

    @classmethod
    def loads(cls, s: str) -> "WeightConfig":
        return cls.from_json(json.loads(s))
