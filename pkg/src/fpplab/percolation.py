"""Bernoulli-percolation estimators on uniform-variable configurations:
crossing probabilities, finite-size-scaling correlation length, the
threshold sequence solved from it, alternating four-arm events, and the
window-edge detector used to sandwich between-circuit passage times.

All estimators work with a common coupling: every edge carries a uniform
variable U on (0, 1) and is p-open iff U <= p, so open sets are monotone
in p sample by sample.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .lattice import Box, Annulus, WeightConfig, edge_east, edge_north
from .report import EstimateReport, wilson_interval
from .weights import WeightDistribution


# ---------------------------------------------------------------------------
# uniform configurations


@dataclass
class UniformConfig:
    """Per-edge uniforms on a box; an edge is p-open iff its uniform <= p."""

    region: Box
    east: np.ndarray  # (2n, 2n+1)
    north: np.ndarray  # (2n+1, 2n)

    def uniform(self, e):
        (x0, y0), (x1, y1) = e
        n = self.region.n
        if y0 == y1:
            return float(self.east[x0 + n, y0 + n])
        return float(self.north[x0 + n, y0 + n])

    def is_open(self, e, p: float) -> bool:
        return self.uniform(e) <= p

    def open_masks(self, p: float):
        return self.east <= p, self.north <= p

    def as_dict(self) -> dict:
        from .lattice import enumerate_edges

        return {e: self.uniform(e) for e in enumerate_edges(self.region)}


def sample_uniform_config(box: Box, rng) -> UniformConfig:
    n = box.n
    return UniformConfig(box, rng.random((2 * n, 2 * n + 1)), rng.random((2 * n + 1, 2 * n)))


def weights_from_uniforms(dist: WeightDistribution, ucfg: UniformConfig) -> WeightConfig:
    """The coupled weight configuration t_e = quantile(U_e).

    Two-point laws get the fast array backend; anything else goes through
    the per-edge quantile transform.
    """
    v = dist.positive_atom_value()
    if v is not None:
        p0 = float(dist.zero_probability)
        val = int(v) if v.denominator == 1 else float(v)
        dtype = np.int64 if isinstance(val, int) else np.float64
        east = np.where(ucfg.east <= p0, 0, val).astype(dtype)
        north = np.where(ucfg.north <= p0, 0, val).astype(dtype)
        return WeightConfig.from_arrays(ucfg.region, east, north)
    weights = {e: dist._from_uniform(u) for e, u in ucfg.as_dict().items()}
    return WeightConfig(ucfg.region, weights=weights)


# ---------------------------------------------------------------------------
# crossings


def crossing_prob(
    p: float,
    n0: int,
    shape: str,
    samples: int,
    rng,
    seed: int | None = None,
    batch: int = 2048,
) -> EstimateReport:
    """Monte Carlo estimate of the left-right open crossing probability.

    shape 'square' uses the box B(n0); shape 'rect' uses the rectangle with
    vertex set [0, n0+1] x [0, n0], whose crossing probability at p = 1/2
    is exactly 1/2 by self-duality.
    """
    if not (0.0 <= p <= 1.0) or n0 < 1:
        raise ValueError("need p in [0,1] and n0 >= 1")
    if shape == "square":
        a, b = 2 * n0, 2 * n0
    elif shape == "rect":
        a, b = n0 + 1, n0
    else:
        raise ValueError("shape must be 'square' or 'rect'")
    hits = 0
    if p == 0.0:
        pass  # no open edges, no crossing
    elif p == 1.0:
        hits = samples
    else:
        done = 0
        while done < samples:
            m = min(batch, samples - done)
            open_e = rng.random((m, a, b + 1)) <= p
            open_n = rng.random((m, a + 1, b)) <= p
            hits += int(kernels.lr_open_crossing(open_e, open_n).sum())
            done += m
    return EstimateReport.from_counts(
        "crossing_prob", {"p": p, "n0": n0, "shape": shape}, hits, samples, seed=seed
    )


# ---------------------------------------------------------------------------
# correlation length and the p_k thresholds


def _probe_grid(nmax: int) -> list[int]:
    out = []
    n = 1
    while n <= nmax:
        out.append(n)
        n = n + 1 if n < 8 else int(np.ceil(n * 1.3))
    if out[-1] != nmax:
        out.append(nmax)
    return out


@dataclass
class CorrelationLengthEstimate:
    """Result of probing sigma(n0, p) for the first scale beating 1 - eps.

    ``value`` is the minimal probed n0 whose estimated crossing probability
    reaches the threshold, or None when every probe up to nmax stays below
    it.  ``ambiguous`` flags a decision whose Wilson interval straddles the
    threshold at the deciding probe.
    """

    p: float
    epsilon: float
    value: int | None
    ambiguous: bool
    diagnostics: list = field(default_factory=list)

    @property
    def exceeds_nmax(self) -> bool:
        return self.value is None


def correlation_length(
    p: float,
    epsilon: float,
    nmax: int,
    samples: int,
    rng,
    grid: list[int] | None = None,
) -> CorrelationLengthEstimate:
    """Smallest probed box size whose p-open crossing probability is at
    least 1 - epsilon (finite-size scaling scale)."""
    if not (0.5 < p <= 1.0):
        raise ValueError("correlation length is probed for p above 1/2")
    if not (0.0 < epsilon < 1.0):
        raise ValueError("epsilon must be in (0,1)")
    threshold = 1.0 - epsilon
    diag = []
    for n0 in grid or _probe_grid(nmax):
        rep = crossing_prob(p, n0, "square", samples, rng)
        diag.append((n0, rep.estimate, rep.ci_lo, rep.ci_hi))
        if rep.estimate >= threshold:
            ambiguous = rep.ci_lo < threshold
            return CorrelationLengthEstimate(p, epsilon, n0, ambiguous, diag)
    last_hi = diag[-1][3] if diag else 1.0
    return CorrelationLengthEstimate(p, epsilon, None, last_hi >= threshold, diag)


@dataclass
class PkEstimate:
    p: float
    k: int
    R: int
    epsilon1: float
    ambiguous: bool
    trace: list = field(default_factory=list)


def p_k_solve(
    R: int,
    k: int,
    epsilon1: float,
    samples: int,
    rng,
    tol: float = 1e-3,
    max_doublings: int = 3,
) -> PkEstimate:
    """Bisection for the smallest p > 1/2 whose correlation length fits
    inside R^(3k).

    The predicate "L(p) <= R^(3k)" is monotone in p under the shared
    coupling; each evaluation uses a fresh sample batch, and an evaluation
    whose deciding interval straddles the threshold is retried with a
    doubled batch before being flagged.
    """
    scale = R ** (3 * k)
    lo, hi = 0.5, 1.0
    ambiguous_any = False
    trace = []

    def predicate(p: float) -> bool:
        nonlocal ambiguous_any
        batch = samples
        for _ in range(max_doublings + 1):
            est = correlation_length(p, epsilon1, scale, batch, rng)
            if not est.ambiguous:
                trace.append((p, est.value))
                return est.value is not None
            batch *= 2
        ambiguous_any = True
        trace.append((p, est.value))
        return est.value is not None

    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if predicate(mid):
            hi = mid
        else:
            lo = mid
    return PkEstimate(p=hi, k=k, R=R, epsilon1=epsilon1, ambiguous=ambiguous_any, trace=trace)


# ---------------------------------------------------------------------------
# unit-capacity flows for edge-disjoint arm checks


def _residual_neighbors(v, open_e, open_n, banned):
    """Residual-graph neighbor steps (u, arc) from vertex v through open
    edges; `banned` is a set of canonical grid-coordinate edges to skip."""
    vx, vy = v
    h = open_n.shape[0]
    w = open_e.shape[1]
    if vx + 1 < h and open_e[vx, vy] and ((vx, vy, "E") not in banned):
        yield (vx + 1, vy)
    if vx - 1 >= 0 and open_e[vx - 1, vy] and ((vx - 1, vy, "E") not in banned):
        yield (vx - 1, vy)
    if vy + 1 < w and open_n[vx, vy] and ((vx, vy, "N") not in banned):
        yield (vx, vy + 1)
    if vy - 1 >= 0 and open_n[vx, vy - 1] and ((vx, vy - 1, "N") not in banned):
        yield (vx, vy - 1)


def max_flow_upto(open_e, open_n, sources, target_mask, banned=(), need=2) -> int:
    """Max number (capped at ``need``) of edge-disjoint open paths from the
    unit-capacity source vertices to the target set.

    Undirected unit edge capacities via net-flow cancellation, so the count
    is exact (greedy path removal alone is not).
    """
    banned = set(banned)
    flow = {}
    used = {s: False for s in sources}
    total = 0
    while total < need:
        parent = {}
        q = deque()
        for s in sources:
            if not used[s]:
                parent[s] = None
                q.append(s)
        reach = None
        while q:
            v = q.popleft()
            if target_mask[v]:
                reach = v
                break
            for u in _residual_neighbors(v, open_e, open_n, banned):
                if u not in parent and flow.get((v, u), 0) < 1:
                    parent[u] = v
                    q.append(u)
        if reach is None:
            break
        v = reach
        while parent[v] is not None:
            u = parent[v]
            flow[(u, v)] = flow.get((u, v), 0) + 1
            flow[(v, u)] = flow.get((v, u), 0) - 1
            v = u
        used[v] = True
        total += 1
    return total


# ---------------------------------------------------------------------------
# alternating four-arm events


def four_arm_event(open_e, open_n, r: int) -> bool:
    """Two edge-disjoint open arms from the endpoints of the central edge
    to the rim, and two edge-disjoint closed dual arms from its dual
    endpoints to the dual rim, in a box of radius r around the edge midpoint.

    Grids: primal vertices x in [1-r, r], y in [-r, r]; the central edge is
    (0,0)-(1,0) and is excluded from both searches.
    """
    h = open_n.shape[0]  # 2r columns of vertices
    w = open_e.shape[1]  # 2r+1 rows
    a = (r - 1, r)  # (0, 0)
    b = (r, r)  # (1, 0)
    banned = {(r - 1, r, "E")}
    rim = np.zeros((h, w), dtype=bool)
    rim[0, :] = rim[-1, :] = True
    rim[:, 0] = rim[:, -1] = True
    if max_flow_upto(open_e, open_n, [a, b], rim, banned=banned, need=2) < 2:
        return False

    # dual grid: faces (i, j), i and j in [-r, r-1]; index [i+r, j+r].
    # A horizontal dual step (i,j)->(i+1,j) crosses the north edge at
    # (i+1, j); a vertical step crosses the east edge at (i, j+1).  Steps
    # crossing edges outside the primal region are blocked.
    closed_e = ~open_e
    closed_n = ~open_n
    fd = 2 * r
    gate_h = np.zeros((fd - 1, fd), dtype=bool)
    for fi in range(fd - 1):
        i1 = fi - r + 1  # i + 1
        for fj in range(fd):
            j = fj - r
            # north edge at (i1, j): vertex x-range [1-r, r], y-range ok
            if 1 - r <= i1 <= r and -r <= j <= r - 1:
                gate_h[fi, fj] = closed_n[i1 - (1 - r), j + r]
    gate_v = np.zeros((fd, fd - 1), dtype=bool)
    for fi in range(fd):
        i = fi - r
        for fj in range(fd - 1):
            j1 = fj - r + 1  # j + 1
            if 1 - r <= i <= r - 1 and -r <= j1 <= r:
                gate_v[fi, fj] = closed_e[i - (1 - r), j1 + r]
    d1 = (0 + r, -1 + r)  # face (0, -1)
    d2 = (0 + r, 0 + r)  # face (0, 0)
    dual_banned = {(r, r - 1, "N")}  # the dual step d1 -> d2 is e* itself
    dual_rim = np.zeros((fd, fd), dtype=bool)
    dual_rim[0, :] = dual_rim[-1, :] = True
    dual_rim[:, 0] = dual_rim[:, -1] = True
    return max_flow_upto(gate_h, gate_v, [d1, d2], dual_rim, banned=dual_banned, need=2) == 2


def four_arm_prob(radius: int, samples: int, rng, seed: int | None = None) -> EstimateReport:
    """Monte Carlo estimate of the alternating four-arm probability at the
    half-open/half-closed coupling level."""
    if radius < 1:
        raise ValueError("radius must be >= 1")
    r = radius
    hits = 0
    for _ in range(samples):
        open_e = rng.random((2 * r - 1, 2 * r + 1)) <= 0.5
        open_n = rng.random((2 * r, 2 * r)) <= 0.5
        if four_arm_event(open_e, open_n, r):
            hits += 1
    return EstimateReport.from_counts(
        "four_arm_prob", {"radius": radius}, hits, samples, seed=seed
    )


# ---------------------------------------------------------------------------
# the window-edge detector


def _rim_mask(n: int, k: int):
    """Boolean vertex-grid mask of the boundary of B(k) inside B(n)."""
    w = 2 * n + 1
    mask = np.zeros((w, w), dtype=bool)
    lo, hi = n - k, n + k
    mask[lo, lo : hi + 1] = True
    mask[hi, lo : hi + 1] = True
    mask[lo : hi + 1, lo] = True
    mask[lo : hi + 1, hi] = True
    return mask


def _ray_crossing(fi_from, fj_from, fj_to, i_offset):
    """Signed crossing of the positive-x cut ray by a vertical dual step."""
    # faces (i, -1) -> (i, 0) cross the ray at x = i + 1/2 iff i >= 0.
    j_from = fj_from
    j_to = fj_to
    i = fi_from + i_offset
    if i < 0:
        return 0
    if j_from == -1 and j_to == 0:
        return 1
    if j_from == 0 and j_to == -1:
        return -1
    return 0


def _dual_winding_path_exists(closed_gate_h, closed_gate_v, allowed, d1, d2, i_lo, j_lo, banned):
    """BFS over (face, winding-level) states: is there a closed-dual walk
    from d1 to d2 whose closure through the banned dual step winds the
    origin exactly once (either orientation)?

    Levels count signed crossings of the positive-x axis; walk semantics
    (the universal-cover lift) is what the blocking argument needs, since a
    winding closed walk of closed dual edges already separates the inner
    circuits from the outer ones.
    """
    e_star_cross = _ray_crossing(d2[0], d2[1] + j_lo, d1[1] + j_lo, i_lo)
    targets = {(d2, 1 - e_star_cross), (d2, -1 - e_star_cross)}
    if d1 == d2:
        return False
    start = (d1, 0)
    seen = {start}
    q = deque([start])
    fd_i, fd_j = allowed.shape
    while q:
        (fi, fj), lvl = q.popleft()
        steps = []
        if fi + 1 < fd_i and closed_gate_h[fi, fj] and (fi, fj, "H") not in banned:
            steps.append(((fi + 1, fj), 0))
        if fi - 1 >= 0 and closed_gate_h[fi - 1, fj] and (fi - 1, fj, "H") not in banned:
            steps.append(((fi - 1, fj), 0))
        if fj + 1 < fd_j and closed_gate_v[fi, fj] and (fi, fj, "V") not in banned:
            dz = _ray_crossing(fi, fj + j_lo, fj + 1 + j_lo, i_lo)
            steps.append(((fi, fj + 1), dz))
        if fj - 1 >= 0 and closed_gate_v[fi, fj - 1] and (fi, fj - 1, "V") not in banned:
            dz = _ray_crossing(fi, fj + j_lo, fj - 1 + j_lo, i_lo)
            steps.append(((fi, fj - 1), dz))
        for (u, dz) in steps:
            if not allowed[u]:
                continue
            nxt = (u, lvl + dz)
            if nxt in seen or abs(lvl + dz) > 70:
                continue
            if nxt in targets:
                return True
            seen.add(nxt)
            q.append(nxt)
    return False


def find_window_edges(ucfg: UniformConfig, k: int, R: int, p_k: float) -> list:
    """All edges satisfying the three-part window event at scale k.

    An edge e in Ann(R^(3k+1), R^(3k+2)) qualifies iff

    1. its uniform lies in the window (p_k, 2 p_k - 1/2);
    2. its endpoints carry edge-disjoint half-open paths, one to the
       boundary of B(R^(3k)) and the other to the boundary of B(R^(3k+3));
    3. the endpoints of its dual edge are joined by a (2 p_k - 1/2)-closed
       dual connection inside the annulus that closes, through the dual
       edge, into a circuit around the origin.

    There is at most one such edge per configuration; this scan returns all
    of them so that uniqueness stays checkable.
    """
    n_in = R ** (3 * k)
    n_out = R ** (3 * k + 3)
    n = ucfg.region.n
    if n_out > n:
        raise ValueError("annuli do not fit the region")
    window_lo, window_hi = p_k, 2 * p_k - 0.5
    open_e, open_n = ucfg.open_masks(0.5)

    labels = kernels.bond_components(open_e, open_n)
    inner_ids = kernels.rim_ids(n, n_in)
    outer_ids = kernels.rim_ids(n, n_out)
    w = 2 * n + 1
    inner_set = set(labels.ravel()[inner_ids].tolist())
    outer_set = set(labels.ravel()[outer_ids].tolist())

    inner_mask = _rim_mask(n, n_in)
    outer_mask = _rim_mask(n, n_out)

    mid = Annulus(R ** (3 * k + 1), R ** (3 * k + 2))
    out = []
    for kind, arr in (("E", ucfg.east), ("N", ucfg.north)):
        cand = (arr > window_lo) & (arr < window_hi)
        for ix, iy in zip(*np.nonzero(cand)):
            x, y = int(ix) - n, int(iy) - n
            e = edge_east(x, y) if kind == "E" else edge_north(x, y)
            if not mid.contains_edge(e):
                continue
            (ax, ay), (bx, by) = e
            la = labels[ax + n, ay + n]
            lb = labels[bx + n, by + n]
            fwd = la in inner_set and lb in outer_set
            bwd = lb in inner_set and la in outer_set
            if not (fwd or bwd):
                continue
            if not _arm_split(open_e, open_n, e, n, inner_mask, outer_mask):
                continue
            if _dual_circuit_through(ucfg, e, n_in, n_out, window_hi):
                out.append(e)
    return out


def _arm_split(open_e, open_n, e, n, inner_mask, outer_mask) -> bool:
    """Edge-disjoint half-open arms from e's endpoints, one to each rim.

    Feasibility of the (1 to inner, 1 to outer) split follows from three
    unit-capacity flow values by polymatroid integrality: at least one into
    each rim alone and at least two into their union.
    """
    (ax, ay), (bx, by) = e
    a = (ax + n, ay + n)
    b = (bx + n, by + n)
    banned = {(min(a[0], b[0]), a[1], "E")} if ay == by else {(a[0], min(a[1], b[1]), "N")}
    srcs = [a, b]
    both = inner_mask | outer_mask
    if max_flow_upto(open_e, open_n, srcs, both, banned=banned, need=2) < 2:
        return False
    if max_flow_upto(open_e, open_n, srcs, inner_mask, banned=banned, need=1) < 1:
        return False
    return max_flow_upto(open_e, open_n, srcs, outer_mask, banned=banned, need=1) >= 1


def _dual_circuit_through(ucfg: UniformConfig, e, n_in, n_out, level: float) -> bool:
    """Item 3: a level-closed dual connection between the dual endpoints of
    e, inside the annulus, closing through e* into an origin-winding circuit."""
    n = ucfg.region.n
    closed_e = ucfg.east > level
    closed_n = ucfg.north > level
    # dual faces (i, j) with centre sup-norm strictly between n_in and n_out
    i_lo, i_hi = -n_out, n_out - 1
    fd = n_out * 2
    ii = np.arange(i_lo, i_hi + 1)
    ci = np.maximum(np.abs(ii[:, None] + 0.5), np.abs(ii[None, :] + 0.5))
    allowed = (ci > n_in) & (ci < n_out)

    # gates between faces: horizontal step crosses north edge at (i+1, j);
    # vertical step crosses east edge at (i, j+1).  All referenced primal
    # edges lie inside B(n_out) <= region.
    gate_h = np.zeros((fd - 1, fd), dtype=bool)
    i1 = ii[:-1] + 1
    gate_h[:, :] = closed_n[(i1 + n)[:, None], (ii + n)[None, :]]
    gate_v = np.zeros((fd, fd - 1), dtype=bool)
    j1 = ii[:-1] + 1
    gate_v[:, :] = closed_e[(ii + n)[:, None], (j1 + n)[None, :]]

    (ax, ay), (bx, by) = e
    if ay == by:  # horizontal edge -> vertical dual step between (ax, ay-1), (ax, ay)
        d1 = (ax - i_lo, ay - 1 - i_lo)
        d2 = (ax - i_lo, ay - i_lo)
        banned = {(ax - i_lo, ay - 1 - i_lo, "V")}
    else:  # vertical edge -> horizontal dual step between (ax-1, ay), (ax, ay)
        d1 = (ax - 1 - i_lo, ay - i_lo)
        d2 = (ax - i_lo, ay - i_lo)
        banned = {(ax - 1 - i_lo, ay - i_lo, "H")}
    if not (allowed[d1] and allowed[d2]):
        return False
    return _dual_winding_path_exists(gate_h, gate_v, allowed, d1, d2, i_lo, i_lo, banned)


def detect_O_k(ucfg: UniformConfig, k: int, R: int, p_k: float) -> bool:
    """True iff some edge satisfies the three-part window event."""
    return len(find_window_edges(ucfg, k, R, p_k)) > 0
