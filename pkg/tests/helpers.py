"""Shared scene/file builders for the test suite."""

import json
import struct

import numpy as np

from seatrace.scene import Scene, scene_from_arrays


def quad_mesh(p0, p1, p2, p3):
    """Two triangles covering the quad p0-p1-p2-p3 (winding preserved)."""
    verts = np.asarray([p0, p1, p2, p3], dtype=np.float64)
    tris = np.asarray([[0, 1, 2], [0, 2, 3]], dtype=np.int32)
    return verts, tris


def plate_mesh(distance, half_width, half_height):
    """Vertical plate at x=distance whose normal faces -x (back toward origin)."""
    verts = np.asarray(
        [
            [distance, -half_width, -half_height],
            [distance, half_width, -half_height],
            [distance, half_width, half_height],
            [distance, -half_width, half_height],
        ],
        dtype=np.float64,
    )
    tris = np.asarray([[0, 2, 1], [0, 3, 2]], dtype=np.int32)
    return verts, tris


def plate_scene(distance, half_width, half_height, material_table=None):
    verts, tris = plate_mesh(distance, half_width, half_height)
    return scene_from_arrays(verts, tris, material_table=material_table)


def floor_mesh(z, half_extent):
    """Horizontal quad at height z with its normal facing +z."""
    h = half_extent
    verts = np.asarray(
        [[-h, -h, z], [h, -h, z], [h, h, z], [-h, h, z]], dtype=np.float64
    )
    tris = np.asarray([[0, 1, 2], [0, 2, 3]], dtype=np.int32)
    return verts, tris


def floor_scene(z, half_extent=200.0, material_table=None):
    verts, tris = floor_mesh(z, half_extent)
    return scene_from_arrays(verts, tris, material_table=material_table)


def heightfield_mesh(n, extent, amplitude, z0, seed=0):
    """(n-1)^2 * 2 triangles of bumpy terrain centered on the origin."""
    rng = np.random.default_rng(seed)
    xs = np.linspace(-extent, extent, n)
    ys = np.linspace(-extent, extent, n)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    gz = z0 + amplitude * rng.standard_normal((n, n))
    verts = np.stack([gx.ravel(), gy.ravel(), gz.ravel()], axis=1)
    quads_i, quads_j = np.meshgrid(np.arange(n - 1), np.arange(n - 1), indexing="ij")
    i00 = (quads_i * n + quads_j).ravel()
    i10 = i00 + n
    i01 = i00 + 1
    i11 = i10 + 1
    tris = np.concatenate(
        [np.stack([i00, i10, i11], axis=1), np.stack([i00, i11, i01], axis=1)]
    ).astype(np.int32)
    return verts.astype(np.float64), tris


def random_soup_mesh(n_triangles, seed, lo=-5.0, hi=5.0):
    """Disconnected random triangles filling an axis-aligned box."""
    rng = np.random.default_rng(seed)
    centers = rng.uniform(lo, hi, size=(n_triangles, 1, 3))
    offsets = rng.uniform(-1.0, 1.0, size=(n_triangles, 3, 3))
    verts = (centers + offsets).reshape(-1, 3)
    tris = np.arange(n_triangles * 3, dtype=np.int32).reshape(-1, 3)
    return verts, tris


def write_obj(path, text):
    path.write_text(text)
    return path


def glb_bytes(meshes):
    """Minimal two-chunk GLB with one node per mesh.

    Each mesh is a dict with keys: vertices (float array), triangles
    (int array), and optionally name, translation, rotation (x,y,z,w),
    scale.
    """
    bin_parts = []
    buffer_views = []
    accessors = []
    gltf_meshes = []
    nodes = []
    offset = 0
    for m in meshes:
        pos = np.ascontiguousarray(np.asarray(m["vertices"], dtype="<f4"))
        idx = np.ascontiguousarray(
            np.asarray(m["triangles"], dtype="<u4").ravel()
        )
        buffer_views.append(
            {"buffer": 0, "byteOffset": offset, "byteLength": pos.nbytes}
        )
        accessors.append(
            {
                "bufferView": len(buffer_views) - 1,
                "componentType": 5126,
                "count": int(pos.shape[0]),
                "type": "VEC3",
                "min": pos.min(axis=0).tolist(),
                "max": pos.max(axis=0).tolist(),
            }
        )
        bin_parts.append(pos.tobytes())
        offset += pos.nbytes
        buffer_views.append(
            {"buffer": 0, "byteOffset": offset, "byteLength": idx.nbytes}
        )
        accessors.append(
            {
                "bufferView": len(buffer_views) - 1,
                "componentType": 5125,
                "count": int(idx.size),
                "type": "SCALAR",
            }
        )
        bin_parts.append(idx.tobytes())
        offset += idx.nbytes

        mesh_index = len(gltf_meshes)
        name = m.get("name", f"mesh_{mesh_index}")
        gltf_meshes.append(
            {
                "name": name,
                "primitives": [
                    {
                        "attributes": {"POSITION": 2 * mesh_index},
                        "indices": 2 * mesh_index + 1,
                    }
                ],
            }
        )
        node = {"mesh": mesh_index, "name": name}
        for key in ("translation", "rotation", "scale"):
            if key in m:
                node[key] = list(m[key])
        nodes.append(node)

    gltf = {
        "asset": {"version": "2.0"},
        "scene": 0,
        "scenes": [{"nodes": list(range(len(nodes)))}],
        "nodes": nodes,
        "meshes": gltf_meshes,
        "accessors": accessors,
        "bufferViews": buffer_views,
        "buffers": [{"byteLength": offset}],
    }
    json_blob = json.dumps(gltf).encode("utf-8")
    json_blob += b" " * (-len(json_blob) % 4)
    bin_blob = b"".join(bin_parts)
    bin_blob += b"\x00" * (-len(bin_blob) % 4)
    total = 12 + 8 + len(json_blob) + 8 + len(bin_blob)
    out = bytearray()
    out += struct.pack("<III", 0x46546C67, 2, total)
    out += struct.pack("<II", len(json_blob), 0x4E4F534A) + json_blob
    out += struct.pack("<II", len(bin_blob), 0x004E4942) + bin_blob
    return bytes(out)


def write_glb(path, meshes):
    path.write_bytes(glb_bytes(meshes))
    return path
