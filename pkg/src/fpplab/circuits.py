"""Zero-weight circuit machinery on annuli: existence tests, innermost and
outermost extraction, the per-scale annulus events, and the decomposition of
boundary passage times into independent between-circuit legs.

Existence is decided by planar duality: a zero-weight circuit around the
origin exists in the annulus iff the faces of the inner hole cannot reach
the outer face by crossing only non-open edges (an edge is *open* here iff
it belongs to the annulus and has weight zero).

Extraction is constructive and linear-time:

* the *crossable cluster* C of the hole (faces reachable crossing only
  non-open edges) must lie inside every origin-winding open circuit, because
  a crossable face path cannot cross such a circuit;
* the faces that cannot reach the outer region through the complement of C
  are exactly the interior of the innermost circuit (C plus any pockets it
  encloses).  The interior is simply connected with no diagonal
  self-touches, so its boundary is a single vertex-self-avoiding cycle of
  open edges; if it had a diagonal touch, the four surrounding faces would
  split into two crossable-cluster faces and two complement faces whose
  connections (one to the hole, one to the outer region) would have to cross
  each other, which planarity forbids;
* the outermost circuit is the mirror image: grow the crossable cluster of
  the outer region and take the component of its complement containing the
  hole.

Boundary walks start at the lexicographically smallest circuit vertex and
run counterclockwise, so extraction is deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .lattice import Annulus, Box, Circuit, WeightConfig, edge_east, edge_north, winding_number
from .passage import Boundary, passage_value, t_between_circuits
from .report import EstimateReport
from .weights import WeightDistribution


# ---------------------------------------------------------------------------
# face-grid gates for one annulus


def _annulus_gates(config: WeightConfig, ann: Annulus):
    """Crossability gates between adjacent faces of the annulus face grid.

    Faces are indexed fi = i + k2 + 1 for lower-left corner i in
    [-k2-1, k2].  A step between faces is crossable iff the primal edge
    between them is NOT (in-annulus and zero-weight).
    """
    k1, k2 = ann.k1, ann.k2
    n = config.region.n
    if k2 > n:
        raise ValueError(f"annulus outer radius {k2} exceeds region B({n})")
    f = 2 * k2 + 2  # faces per side
    ez, nz = config.zero_masks()

    # horizontal face steps (fi, fj) -> (fi+1, fj) cross the north edge at
    # primal coordinates (i+1, j) with i = fi - k2 - 1, j = fj - k2 - 1.
    i1 = np.arange(-k2, k2 + 1)  # i + 1
    j = np.arange(-k2 - 1, k2 + 1)
    I1, J = np.meshgrid(i1, j, indexing="ij")
    in_ann = (J >= -k2) & (J + 1 <= k2)
    in_ann &= (np.maximum(np.abs(I1), np.abs(J)) > k1) | (
        np.maximum(np.abs(I1), np.abs(J + 1)) > k1
    )
    zero = np.zeros_like(in_ann)
    ok = in_ann
    zero[ok] = nz[I1[ok] + n, J[ok] + n]
    gate_h = ~(in_ann & zero)

    # vertical face steps (fi, fj) -> (fi, fj+1) cross the east edge at
    # primal coordinates (i, j+1).
    i = np.arange(-k2 - 1, k2 + 1)
    j1 = np.arange(-k2, k2 + 1)  # j + 1
    I, J1 = np.meshgrid(i, j1, indexing="ij")
    in_ann_v = (I >= -k2) & (I + 1 <= k2)
    in_ann_v &= (np.maximum(np.abs(I), np.abs(J1)) > k1) | (
        np.maximum(np.abs(I + 1), np.abs(J1)) > k1
    )
    zero_v = np.zeros_like(in_ann_v)
    ok = in_ann_v
    zero_v[ok] = ez[I[ok] + n, J1[ok] + n]
    gate_v = ~(in_ann_v & zero_v)

    return gate_h, gate_v


def _hole_outer_masks(ann: Annulus):
    k1, k2 = ann.k1, ann.k2
    f = 2 * k2 + 2
    hole = np.zeros((f, f), dtype=bool)
    lo, hi = -k1 + k2 + 1, k1 - 1 + k2 + 1
    hole[lo : hi + 1, lo : hi + 1] = True
    outer = np.zeros((f, f), dtype=bool)
    outer[0, :] = outer[-1, :] = True
    outer[:, 0] = outer[:, -1] = True
    return hole, outer


def _zero_circuit_gates_masks(config, ann):
    gate_h, gate_v = _annulus_gates(config, ann)
    hole, outer = _hole_outer_masks(ann)
    labels = kernels.bond_components(gate_h, gate_v)
    return labels, hole, outer


def has_zero_circuit(config: WeightConfig, ann: Annulus) -> bool:
    """True iff the annulus carries a zero-weight circuit around the origin."""
    labels, hole, outer = _zero_circuit_gates_masks(config, ann)
    hole_labels = np.unique(labels[hole])
    outer_labels = np.unique(labels[outer])
    return not np.intersect1d(hole_labels, outer_labels, assume_unique=True).size


def _interior_to_circuit(config: WeightConfig, ann: Annulus, interior) -> Circuit:
    """Boundary of a pinch-free simply connected face set, as a Circuit."""
    k2 = ann.k2
    off = k2 + 1  # face (i, j) -> array [i + off, j + off]
    edges = set()
    diff_h = interior[:-1, :] != interior[1:, :]
    for fi, fj in zip(*np.nonzero(diff_h)):
        i1 = fi - off + 1
        j = fj - off
        edges.add(edge_north(int(i1), int(j)))
    diff_v = interior[:, :-1] != interior[:, 1:]
    for fi, fj in zip(*np.nonzero(diff_v)):
        i = fi - off
        j1 = fj - off + 1
        edges.add(edge_east(int(i), int(j1)))

    adj = {}
    for u, v in edges:
        adj.setdefault(u, []).append(v)
        adj.setdefault(v, []).append(u)
    bad = [v for v, nb in adj.items() if len(nb) != 2]
    if bad:
        raise RuntimeError(f"interface is not a simple cycle at {bad[:3]}")

    start = min(adj)
    walk = [start, min(adj[start])]
    while walk[-1] != start:
        prev, cur = walk[-2], walk[-1]
        nb = adj[cur]
        walk.append(nb[0] if nb[1] == prev else nb[1])
    if winding_number(walk) == -1:
        walk = [start] + walk[:-1][::-1]
    return Circuit(vertices=tuple(walk), region=ann)


def innermost_zero_circuit(config: WeightConfig, ann: Annulus) -> Circuit | None:
    """The zero-weight origin-winding circuit with minimal enclosed region,
    or None when the annulus has no such circuit."""
    labels, hole, outer = _zero_circuit_gates_masks(config, ann)
    hole_labels = np.unique(labels[hole])
    cluster = np.isin(labels, hole_labels)
    if (cluster & outer).any():
        return None
    comp, _ = _plain_components(~cluster)
    outer_comps = np.unique(comp[outer & ~cluster])
    exterior = np.isin(comp, outer_comps) & ~cluster
    interior = ~exterior
    return _interior_to_circuit(config, ann, interior)


def outermost_zero_circuit(config: WeightConfig, ann: Annulus) -> Circuit | None:
    """The zero-weight origin-winding circuit with minimal unbounded
    complement (maximal enclosed region), or None."""
    labels, hole, outer = _zero_circuit_gates_masks(config, ann)
    outer_labels = np.unique(labels[outer])
    cluster = np.isin(labels, outer_labels)
    if (cluster & hole).any():
        return None
    comp, _ = _plain_components(~cluster)
    hole_comps = np.unique(comp[hole & ~cluster])
    interior = np.isin(comp, hole_comps) & ~cluster
    return _interior_to_circuit(config, ann, interior)


def _plain_components(mask):
    from scipy import ndimage

    return ndimage.label(mask, structure=np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]]))


# ---------------------------------------------------------------------------
# per-scale events and the decomposition


def scale_annuli(k: int, R: int) -> tuple[Annulus, Annulus]:
    """The inner/outer sub-annuli at scale index k and ratio R."""
    return (
        Annulus(R ** (3 * k), R ** (3 * k + 1)),
        Annulus(R ** (3 * k + 2), R ** (3 * k + 3)),
    )


def detect_Ek(config: WeightConfig, k: int, R: int) -> bool:
    """Both sub-annuli at scale k contain zero-weight circuits around 0."""
    if R < 2:
        raise ValueError("scale ratio must be >= 2")
    if R ** (3 * k + 3) > config.region.n:
        raise ValueError(f"scale {k} does not fit region B({config.region.n})")
    inner, outer = scale_annuli(k, R)
    return has_zero_circuit(config, inner) and has_zero_circuit(config, outer)


@dataclass
class Decomposition:
    """The circuit decomposition of T(0, boundary of B(n)).

    ``kappas`` lists the occurring scale indices starting from the base
    index K; circuit i (1-based) has its inner circuit innermost in the
    first sub-annulus of scale kappas[i-1] (the trivial circuit for i = 1)
    and its outer circuit outermost in the second sub-annulus.  With
    ``I >= 1``,

        T(0, dB(n)) == sum(t_minus) + sum(t_plus) + remainder

    holds exactly, because travel along the zero-weight circuits is free.
    For ``I == 0`` the record is vacuous and the remainder carries the whole
    passage time.
    """

    R: int
    K: int
    n: int
    kappas: list[int]
    circuits_minus: list[Circuit]
    circuits_plus: list[Circuit]
    I: int
    t_minus: list
    t_plus: list
    remainder: object

    def total(self):
        return sum(self.t_minus) + sum(self.t_plus) + self.remainder

    def to_json(self) -> dict:
        return {
            "R": self.R,
            "K": self.K,
            "n": self.n,
            "kappas": self.kappas,
            "I": self.I,
            "circuits_minus": [c.to_json() for c in self.circuits_minus],
            "circuits_plus": [c.to_json() for c in self.circuits_plus],
            "t_minus": [_num(t) for t in self.t_minus],
            "t_plus": [_num(t) for t in self.t_plus],
            "remainder": _num(self.remainder),
        }


def _num(x):
    from fractions import Fraction

    if isinstance(x, Fraction):
        return f"{x.numerator}/{x.denominator}"
    return x


def decompose(config: WeightConfig, n: int, R: int, K: int = 0, engine: str = "auto") -> Decomposition:
    """Build the circuit decomposition at box size n, ratio R, base index K."""
    if R < 2:
        raise ValueError("scale ratio must be >= 2")
    if not (R ** (3 * K + 3) <= n <= config.region.n):
        raise ValueError("need R^(3K+3) <= n <= region half-side")

    kappas = []
    k = K
    while R ** (3 * k + 3) <= n:
        if detect_Ek(config, k, R):
            kappas.append(k)
        k += 1

    circuits_minus: list[Circuit] = []
    circuits_plus: list[Circuit] = []
    for i, kap in enumerate(kappas):
        inner_ann, outer_ann = scale_annuli(kap, R)
        if i == 0:
            circuits_minus.append(Circuit.trivial())
        else:
            c = innermost_zero_circuit(config, inner_ann)
            assert c is not None
            circuits_minus.append(c)
        c = outermost_zero_circuit(config, outer_ann)
        assert c is not None
        circuits_plus.append(c)

    count = len(kappas)
    t_minus = []
    t_plus = []
    for i in range(count):
        if i == 0:
            t_minus.append(0)
        else:
            t_minus.append(
                t_between_circuits(config, circuits_plus[i - 1], circuits_minus[i], engine=engine)
            )
        t_plus.append(
            t_between_circuits(config, circuits_minus[i], circuits_plus[i], engine=engine)
        )
    if count:
        remainder = passage_value(config, circuits_plus[-1], Boundary(n), engine=engine)
    else:
        remainder = passage_value(config, (0, 0), Boundary(n), engine=engine)
    return Decomposition(
        R=R,
        K=K,
        n=n,
        kappas=kappas,
        circuits_minus=circuits_minus,
        circuits_plus=circuits_plus,
        I=count,
        t_minus=t_minus,
        t_plus=t_plus,
        remainder=remainder,
    )


# ---------------------------------------------------------------------------
# Monte Carlo estimate of the annulus circuit probability


def estimate_F_prob(
    dist: WeightDistribution,
    ell: int,
    ratio: int,
    samples: int,
    rng,
    seed: int | None = None,
) -> EstimateReport:
    """Monte Carlo probability that Ann(ell, ratio*ell) contains a
    zero-weight circuit around the origin.

    Only the zero/positive pattern matters, so edges are sampled as
    Bernoulli indicators with the law's zero-probability.
    """
    if ell < 1 or ratio < 2:
        raise ValueError("need ell >= 1 and ratio >= 2")
    k2 = ell * ratio
    box = Box(k2)
    ann = Annulus(ell, k2)
    p0 = float(dist.zero_probability)
    n = box.n
    hits = 0
    for _ in range(samples):
        east = (rng.random((2 * n, 2 * n + 1)) > p0).astype(np.int64)
        north = (rng.random((2 * n + 1, 2 * n)) > p0).astype(np.int64)
        cfg = WeightConfig.from_arrays(box, east, north)
        if has_zero_circuit(cfg, ann):
            hits += 1
    return EstimateReport.from_counts(
        "zero_circuit_prob",
        {"ell": ell, "ratio": ratio, "zero_prob": p0},
        hits,
        samples,
        seed=seed,
    )
