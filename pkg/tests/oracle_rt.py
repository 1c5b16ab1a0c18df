"""Independent brute-force ray caster used as the reference oracle.

Deliberately a different algorithm from the production kernel: plane
intersection followed by a half-space inside test, instead of the
barycentric formulation. Shares only the contract: closed hit window
[t_min, t_max], near-parallel reject below 1e-12, distance ties resolve
to the lowest triangle index.
"""

import numpy as np

PARALLEL_EPS = 1e-12


class BruteForceCaster:
    def __init__(self, vertices, triangles):
        verts = np.asarray(vertices, dtype=np.float64)
        tris = np.asarray(triangles, dtype=np.int64)
        self.a = verts[tris[:, 0]]
        self.b = verts[tris[:, 1]]
        self.c = verts[tris[:, 2]]
        self.n = np.cross(self.b - self.a, self.c - self.a)

    def first_hit(self, origin, direction, t_min, t_max):
        """Returns (t, tri_index) with tri_index -1 on miss."""
        o = np.asarray(origin, dtype=np.float64)
        d = np.asarray(direction, dtype=np.float64)
        denom = self.n @ d
        usable = np.abs(denom) >= PARALLEL_EPS
        t = np.full(denom.shape, np.inf)
        t[usable] = (np.einsum("ij,ij->i", self.n, self.a - o)[usable]
                     / denom[usable])
        in_window = usable & (t >= t_min) & (t <= t_max)
        if not in_window.any():
            return t_max, -1

        idx = np.nonzero(in_window)[0]
        p = o + t[idx, None] * d
        n = self.n[idx]
        s_ab = np.einsum("ij,ij->i", np.cross(self.b[idx] - self.a[idx], p - self.a[idx]), n)
        s_bc = np.einsum("ij,ij->i", np.cross(self.c[idx] - self.b[idx], p - self.b[idx]), n)
        s_ca = np.einsum("ij,ij->i", np.cross(self.a[idx] - self.c[idx], p - self.c[idx]), n)
        inside = (s_ab >= 0) & (s_bc >= 0) & (s_ca >= 0)
        if not inside.any():
            return t_max, -1
        cand = idx[inside]
        cand_t = t[cand]
        best = np.lexsort((cand, cand_t))[0]  # nearest first, lowest index on ties
        return float(cand_t[best]), int(cand[best])
