"""Bounding volume hierarchy for first-hit ray casting over triangle soups.

The tree is built once per scene with a binned surface-area heuristic and
stored as flat arrays so the traversal kernel can be numba-compiled. Traversal
is deterministic by construction: equal hit distances resolve to the lowest
original triangle index, independent of tree shape or node visit order, so
results do not change when the build heuristic or chunking changes.
"""

from __future__ import annotations

import numpy as np
from numba import njit

N_SAH_BINS = 16
LEAF_SIZE = 4
# Forcing balanced splits below this depth bounds the tree height, which in
# turn bounds the fixed traversal stack (depth 64 + log2(n) < STACK_SIZE).
_FORCE_MEDIAN_DEPTH = 64
STACK_SIZE = 128

SELF_HIT_GUARD = 1e-4  # [m] minimum hit distance, rejects the origin's own surface
_DET_EPS = 1e-12


class BVH:
    """Flattened tree plus precomputed Moeller-Trumbore triangle data."""

    def __init__(self, nodes_min, nodes_max, node_left, node_count, tri_order,
                 tri_v0, tri_e1, tri_e2, depth):
        self.nodes_min = nodes_min
        self.nodes_max = nodes_max
        self.node_left = node_left
        self.node_count = node_count
        self.tri_order = tri_order
        self.tri_v0 = tri_v0
        self.tri_e1 = tri_e1
        self.tri_e2 = tri_e2
        self.depth = depth

    @property
    def n_nodes(self) -> int:
        return self.nodes_min.shape[0]

    def cast(self, origins, directions, t_max, t_min=SELF_HIT_GUARD):
        """Batch first-hit query. Returns (t, tri_index), tri_index -1 on miss.

        On a miss t is reported as t_max. A hit exactly at t_max is accepted.
        """
        origins = np.ascontiguousarray(origins, dtype=np.float64).reshape(-1, 3)
        directions = np.ascontiguousarray(directions, dtype=np.float64).reshape(-1, 3)
        if origins.shape != directions.shape:
            raise ValueError("origins and directions must have matching shapes")
        out_t = np.empty(origins.shape[0], dtype=np.float64)
        out_tri = np.empty(origins.shape[0], dtype=np.int64)
        cast_rays_kernel(self.nodes_min, self.nodes_max, self.node_left,
                         self.node_count, self.tri_order,
                         self.tri_v0, self.tri_e1, self.tri_e2,
                         origins, directions, float(t_min), float(t_max),
                         out_t, out_tri)
        return out_t, out_tri


def build_bvh(vertices, triangles, leaf_size=LEAF_SIZE) -> BVH:
    verts = np.ascontiguousarray(vertices, dtype=np.float64)
    tris = np.ascontiguousarray(triangles, dtype=np.int64)
    n = tris.shape[0]
    if n == 0:
        raise ValueError("cannot build a BVH over zero triangles")

    p0 = verts[tris[:, 0]]
    p1 = verts[tris[:, 1]]
    p2 = verts[tris[:, 2]]
    tri_min = np.minimum(np.minimum(p0, p1), p2)
    tri_max = np.maximum(np.maximum(p0, p1), p2)
    centroids = (tri_min + tri_max) * 0.5

    order = np.arange(n, dtype=np.int64)
    max_nodes = 2 * n
    nodes_min = np.empty((max_nodes, 3), dtype=np.float64)
    nodes_max = np.empty((max_nodes, 3), dtype=np.float64)
    node_left = np.zeros(max_nodes, dtype=np.int64)
    node_count = np.zeros(max_nodes, dtype=np.int64)

    n_nodes = 1
    max_depth = 1
    stack = [(0, 0, n, 1)]  # node index, range start, range end, depth
    while stack:
        node, start, end, depth = stack.pop()
        max_depth = max(max_depth, depth)
        idx = order[start:end]
        nodes_min[node] = tri_min[idx].min(axis=0)
        nodes_max[node] = tri_max[idx].max(axis=0)
        if end - start <= leaf_size:
            node_left[node] = start
            node_count[node] = end - start
            continue
        mid = _split_range(order, start, end, centroids, tri_min, tri_max,
                           force_median=depth >= _FORCE_MEDIAN_DEPTH)
        left = n_nodes
        n_nodes += 2
        node_left[node] = left
        node_count[node] = 0
        stack.append((left, start, mid, depth + 1))
        stack.append((left + 1, mid, end, depth + 1))

    return BVH(
        np.ascontiguousarray(nodes_min[:n_nodes]),
        np.ascontiguousarray(nodes_max[:n_nodes]),
        np.ascontiguousarray(node_left[:n_nodes]),
        np.ascontiguousarray(node_count[:n_nodes]),
        np.ascontiguousarray(order),
        np.ascontiguousarray(p0),
        np.ascontiguousarray(p1 - p0),
        np.ascontiguousarray(p2 - p0),
        max_depth,
    )


def _half_area(bmin, bmax):
    e = bmax - bmin
    return e[..., 0] * e[..., 1] + e[..., 1] * e[..., 2] + e[..., 2] * e[..., 0]


def _median_split(order, start, end, cen, axis):
    idx = order[start:end]
    part = np.argsort(cen[:, axis], kind="stable")
    order[start:end] = idx[part]
    return start + (end - start) // 2


def _split_range(order, start, end, centroids, tri_min, tri_max, force_median):
    idx = order[start:end]
    cen = centroids[idx]
    cmin = cen.min(axis=0)
    cmax = cen.max(axis=0)
    axis = int(np.argmax(cmax - cmin))
    extent = cmax[axis] - cmin[axis]
    if force_median or extent <= 0.0:
        return _median_split(order, start, end, cen, axis)

    rel = (cen[:, axis] - cmin[axis]) / extent
    bins = np.minimum((rel * N_SAH_BINS).astype(np.int64), N_SAH_BINS - 1)
    counts = np.bincount(bins, minlength=N_SAH_BINS)
    bin_min = np.full((N_SAH_BINS, 3), np.inf)
    bin_max = np.full((N_SAH_BINS, 3), -np.inf)
    np.minimum.at(bin_min, bins, tri_min[idx])
    np.maximum.at(bin_max, bins, tri_max[idx])

    left_min = np.minimum.accumulate(bin_min, axis=0)[:-1]
    left_max = np.maximum.accumulate(bin_max, axis=0)[:-1]
    right_min = np.minimum.accumulate(bin_min[::-1], axis=0)[::-1][1:]
    right_max = np.maximum.accumulate(bin_max[::-1], axis=0)[::-1][1:]
    n_left = np.cumsum(counts)[:-1]
    n_right = int(counts.sum()) - n_left

    with np.errstate(invalid="ignore"):
        cost = n_left * _half_area(left_min, left_max) \
            + n_right * _half_area(right_min, right_max)
    cost[(n_left == 0) | (n_right == 0)] = np.inf
    best = int(np.argmin(cost))
    if not np.isfinite(cost[best]):
        return _median_split(order, start, end, cen, axis)

    mask = bins <= best
    order[start:end] = np.concatenate([idx[mask], idx[~mask]])
    return start + int(mask.sum())


# ---------------------------------------------------------------------------
# numba kernels


@njit(cache=True, nogil=True, inline="always")
def _aabb_near(bminx, bminy, bminz, bmaxx, bmaxy, bmaxz,
               ox, oy, oz, dx, dy, dz, t_lo, t_hi):
    """Entry distance of a ray into a box, or +inf if the box is missed.

    Zero direction components take the branch, not the 1/0 path, so rays
    parallel to a slab never produce NaNs.
    """
    tn = t_lo
    tf = t_hi
    if dx != 0.0:
        inv = 1.0 / dx
        ta = (bminx - ox) * inv
        tb = (bmaxx - ox) * inv
        if ta > tb:
            ta, tb = tb, ta
        if ta > tn:
            tn = ta
        if tb < tf:
            tf = tb
    elif ox < bminx or ox > bmaxx:
        return np.inf
    if dy != 0.0:
        inv = 1.0 / dy
        ta = (bminy - oy) * inv
        tb = (bmaxy - oy) * inv
        if ta > tb:
            ta, tb = tb, ta
        if ta > tn:
            tn = ta
        if tb < tf:
            tf = tb
    elif oy < bminy or oy > bmaxy:
        return np.inf
    if dz != 0.0:
        inv = 1.0 / dz
        ta = (bminz - oz) * inv
        tb = (bmaxz - oz) * inv
        if ta > tb:
            ta, tb = tb, ta
        if ta > tn:
            tn = ta
        if tb < tf:
            tf = tb
    elif oz < bminz or oz > bmaxz:
        return np.inf
    if tn > tf:
        return np.inf
    return tn


@njit(cache=True, nogil=True)
def first_hit(nodes_min, nodes_max, node_left, node_count, tri_order,
              v0, e1, e2, ox, oy, oz, dx, dy, dz, t_lo, t_hi, stack):
    """Nearest triangle along one ray. Returns (t, tri) with tri = -1 on miss.

    The hit window is the closed interval [t_lo, t_hi]. Distance ties go to
    the lowest triangle index.
    """
    best_t = t_hi
    best_tri = -1
    top = 1
    stack[0] = 0
    while top > 0:
        top -= 1
        node = stack[top]
        if node_count[node] > 0:
            first = node_left[node]
            for k in range(first, first + node_count[node]):
                tri = tri_order[k]
                px = dy * e2[tri, 2] - dz * e2[tri, 1]
                py = dz * e2[tri, 0] - dx * e2[tri, 2]
                pz = dx * e2[tri, 1] - dy * e2[tri, 0]
                det = e1[tri, 0] * px + e1[tri, 1] * py + e1[tri, 2] * pz
                if -_DET_EPS < det < _DET_EPS:
                    continue
                inv_det = 1.0 / det
                sx = ox - v0[tri, 0]
                sy = oy - v0[tri, 1]
                sz = oz - v0[tri, 2]
                u = (sx * px + sy * py + sz * pz) * inv_det
                if u < 0.0 or u > 1.0:
                    continue
                qx = sy * e1[tri, 2] - sz * e1[tri, 1]
                qy = sz * e1[tri, 0] - sx * e1[tri, 2]
                qz = sx * e1[tri, 1] - sy * e1[tri, 0]
                v = (dx * qx + dy * qy + dz * qz) * inv_det
                if v < 0.0 or u + v > 1.0:
                    continue
                t = (e2[tri, 0] * qx + e2[tri, 1] * qy + e2[tri, 2] * qz) * inv_det
                if t < t_lo:
                    continue
                if t < best_t or (t == best_t and (best_tri == -1 or tri < best_tri)):
                    best_t = t
                    best_tri = tri
        else:
            left = node_left[node]
            right = left + 1
            tl = _aabb_near(nodes_min[left, 0], nodes_min[left, 1], nodes_min[left, 2],
                            nodes_max[left, 0], nodes_max[left, 1], nodes_max[left, 2],
                            ox, oy, oz, dx, dy, dz, t_lo, best_t)
            tr = _aabb_near(nodes_min[right, 0], nodes_min[right, 1], nodes_min[right, 2],
                            nodes_max[right, 0], nodes_max[right, 1], nodes_max[right, 2],
                            ox, oy, oz, dx, dy, dz, t_lo, best_t)
            # nearer child is pushed last so it pops first
            if tl <= tr:
                if tr < np.inf:
                    stack[top] = right
                    top += 1
                if tl < np.inf:
                    stack[top] = left
                    top += 1
            else:
                if tl < np.inf:
                    stack[top] = left
                    top += 1
                if tr < np.inf:
                    stack[top] = right
                    top += 1
    return best_t, best_tri


@njit(cache=True, nogil=True)
def cast_rays_kernel(nodes_min, nodes_max, node_left, node_count, tri_order,
                     v0, e1, e2, origins, directions, t_lo, t_hi,
                     out_t, out_tri):
    stack = np.empty(STACK_SIZE, dtype=np.int64)
    for i in range(origins.shape[0]):
        t, tri = first_hit(nodes_min, nodes_max, node_left, node_count,
                           tri_order, v0, e1, e2,
                           origins[i, 0], origins[i, 1], origins[i, 2],
                           directions[i, 0], directions[i, 1], directions[i, 2],
                           t_lo, t_hi, stack)
        out_t[i] = t
        out_tri[i] = tri
