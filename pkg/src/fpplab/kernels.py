"""Array compute kernels shared by the Monte Carlo estimators.

Grid layout: a box of half-side n has vertex grid shape (2n+1, 2n+1) indexed
[ix, iy] with ix = x + n.  East edges ((x,y)-(x+1,y)) live in an array of
shape (2n, 2n+1) indexed [ix, iy]; north edges in (2n+1, 2n).  The same
(H-1, W)/(H, W-1) gate convention is reused for face (dual-vertex) grids.

Bond-gated connectivity is computed by embedding the grid in a doubled
"checkerboard" array (cells at even coordinates are sites, odd cells are
gates) and running scipy.ndimage.label once, which is C-speed per sample.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage, sparse
from scipy.sparse import csgraph

_PLUS = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=np.int8)

# Shift added to every edge weight before running library Dijkstra so that
# zero-weight edges are not dropped as non-edges.  For integer weights the
# true distance is recovered exactly by flooring (hop counts stay far below
# 2**30); for float weights it leaves a positive bias below 2**-15.
_EDGE_SHIFT = 2.0**-30


# ---------------------------------------------------------------------------
# bond-gated connectivity


def bond_components(gate_e, gate_n):
    """Connected-component labels of a bond-gated grid graph.

    gate_e has shape (H-1, W) and gates steps between rows ix and ix+1;
    gate_n has shape (H, W-1) and gates steps between columns.  Returns an
    (H, W) int label array (labels start at 1).
    """
    hm1, w = gate_e.shape
    h = gate_n.shape[0]
    if (hm1, w) != (h - 1, gate_n.shape[1] + 1):
        raise ValueError("inconsistent gate shapes")
    big = np.zeros((2 * h - 1, 2 * w - 1), dtype=bool)
    big[::2, ::2] = True
    big[1::2, ::2] = gate_e
    big[::2, 1::2] = gate_n
    labels, _ = ndimage.label(big, structure=_PLUS)
    return labels[::2, ::2]


def flood_vertices(gate_e, gate_n, seed):
    """Boolean flood through gated bonds; batched over leading axes.

    Iterated dilation, O(diameter) passes; best for small grids with a
    large batch axis.
    """
    reach = seed.copy()
    while True:
        grow = reach.copy()
        grow[..., 1:, :] |= reach[..., :-1, :] & gate_e
        grow[..., :-1, :] |= reach[..., 1:, :] & gate_e
        grow[..., :, 1:] |= reach[..., :, :-1] & gate_n
        grow[..., :, :-1] |= reach[..., :, 1:] & gate_n
        if (grow == reach).all():
            return reach
        reach = grow


# ---------------------------------------------------------------------------
# crossings of rectangles (vertex set [0,a] x [0,b])


def lr_open_crossing(open_e, open_n):
    """Left-right open crossing indicator; batched.

    open_e: (..., a, b+1), open_n: (..., a+1, b) for the rectangle with
    vertices [0, a] x [0, b] (column index first).
    """
    a = open_e.shape[-2]
    b = open_n.shape[-1]
    seed = np.zeros(open_e.shape[:-2] + (a + 1, b + 1), dtype=bool)
    seed[..., 0, :] = True
    reach = flood_vertices(open_e, open_n, seed)
    return reach[..., -1, :].any(axis=-1)


def tb_closed_dual_crossing(open_e, open_n):
    """Top-bottom closed crossing of the dual rectangle; batched.

    Dual vertices are the faces (i, j), i in [0, a-1], j in [-1, b]; the
    extreme rows lie just outside the rectangle, and moves within them cross
    no primal edge, so they are free.  A dual step is traversable iff the
    primal edge it bisects is closed.  Exactly one of
    ``lr_open_crossing`` / ``tb_closed_dual_crossing`` holds per sample.
    """
    closed_e = ~open_e
    closed_n = ~open_n
    a = open_e.shape[-2]
    b = open_n.shape[-1]
    lead = open_e.shape[:-2]
    # dual grid: (a) x (b+2), index [i, j+1]
    gate_h = np.ones(lead + (a - 1, b + 2), dtype=bool)
    gate_h[..., :, 1:-1] = closed_n[..., 1:a, :]
    gate_v = closed_e  # (a, b+1) == (Hd, Wd-1)
    seed = np.zeros(lead + (a, b + 2), dtype=bool)
    seed[..., :, -1] = True
    reach = flood_vertices(gate_h, gate_v, seed)
    return reach[..., :, 0].any(axis=-1)


# ---------------------------------------------------------------------------
# zero-cluster hop metric (two-point weight laws)


def _edge_label_pairs(labels, gate_e, gate_n):
    """Unique unordered label pairs joined by a non-gated (positive) edge."""
    la = labels[:-1, :].ravel()
    lb = labels[1:, :].ravel()
    keep = ~gate_e.ravel()
    p1 = np.stack([la[keep], lb[keep]], axis=1)
    la = labels[:, :-1].ravel()
    lb = labels[:, 1:].ravel()
    keep = ~gate_n.ravel()
    p2 = np.stack([la[keep], lb[keep]], axis=1)
    pairs = np.concatenate([p1, p2], axis=0)
    lo = pairs.min(axis=1)
    hi = pairs.max(axis=1)
    keep = lo != hi
    if not keep.any():
        return np.empty((0, 2), dtype=labels.dtype)
    key = np.unique(lo[keep].astype(np.int64) * (labels.max() + 1) + hi[keep])
    base = labels.max() + 1
    return np.stack([key // base, key % base], axis=1)


def min_positive_steps(zero_e, zero_n, source_rc=None, to_rim=True, target_mask=None):
    """Minimum number of positive edges on a path from the source vertex to
    the grid rim (or to ``target_mask`` vertices), when all positive edges
    cost one step and zero edges are free.

    This is the exact passage time, in units of the positive atom, for
    two-point weight laws.  2-D (single sample) only.
    """
    labels = bond_components(zero_e, zero_n)
    h, w = labels.shape
    if source_rc is None:
        source_rc = (h // 2, w // 2)
    src = labels[source_rc]
    if to_rim:
        target_mask = np.zeros((h, w), dtype=bool)
        target_mask[0, :] = target_mask[-1, :] = True
        target_mask[:, 0] = target_mask[:, -1] = True
    targets = set(np.unique(labels[target_mask]).tolist())
    if src in targets:
        return 0
    pairs = _edge_label_pairs(labels, zero_e, zero_n)
    adj = {}
    for u, v in pairs.tolist():
        adj.setdefault(u, []).append(v)
        adj.setdefault(v, []).append(u)
    # BFS over the cluster graph
    from collections import deque

    dist = {src: 0}
    queue = deque([src])
    while queue:
        u = queue.popleft()
        for v in adj.get(u, ()):
            if v not in dist:
                dist[v] = dist[u] + 1
                if v in targets:
                    return dist[v]
                queue.append(v)
    return None  # unreachable (cannot happen on a full box grid)


# ---------------------------------------------------------------------------
# shortest-path distances via library Dijkstra


def vertex_count(east) -> int:
    return (east.shape[0] + 1) * east.shape[1]


def grid_csr(east, north):
    """CSR matrix of the box vertex graph with shifted positive weights."""
    h = east.shape[0] + 1  # 2n+1
    w = east.shape[1]
    ix, iy = np.meshgrid(np.arange(h - 1), np.arange(w), indexing="ij")
    r1 = (ix * w + iy).ravel()
    c1 = ((ix + 1) * w + iy).ravel()
    d1 = east.astype(np.float64).ravel() + _EDGE_SHIFT
    jx, jy = np.meshgrid(np.arange(h), np.arange(w - 1), indexing="ij")
    r2 = (jx * w + jy).ravel()
    c2 = (jx * w + jy + 1).ravel()
    d2 = north.astype(np.float64).ravel() + _EDGE_SHIFT
    rows = np.concatenate([r1, r2])
    cols = np.concatenate([c1, c2])
    data = np.concatenate([d1, d2])
    m = sparse.csr_matrix((data, (rows, cols)), shape=(h * w, h * w))
    return m


def vertex_ids(n: int, verts) -> np.ndarray:
    w = 2 * n + 1
    return np.array([(x + n) * w + (y + n) for (x, y) in verts], dtype=np.int64)


def rim_ids(n: int, k: int) -> np.ndarray:
    """Vertex ids of the boundary of B(k) inside the B(n) grid."""
    out = []
    for x in range(-k, k + 1):
        for y in range(-k, k + 1):
            if max(abs(x), abs(y)) == k:
                out.append((x, y))
    return vertex_ids(n, out)


def min_dist(east, north, source_ids, target_ids, *, integral=None):
    """Minimum path weight from any source vertex to any target vertex.

    Integer-weight inputs are recovered exactly (the per-edge shift keeps
    zero-weight edges alive and is floored away); float inputs carry a
    positive bias below 2**-15.
    """
    if integral is None:
        integral = np.issubdtype(np.asarray(east).dtype, np.integer)
    m = grid_csr(east, north)
    d = csgraph.dijkstra(m, directed=False, indices=np.asarray(source_ids), min_only=True)
    val = float(d[np.asarray(target_ids)].min())
    if integral:
        return int(np.floor(val))
    return val


def dist_from_sources(east, north, source_ids):
    """Full shifted-distance vector from a source set (see min_dist)."""
    m = grid_csr(east, north)
    return csgraph.dijkstra(m, directed=False, indices=np.asarray(source_ids), min_only=True)
