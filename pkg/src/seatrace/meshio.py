"""Mesh file readers: Wavefront OBJ (ASCII) and binary glTF 2.0 (.glb).

Both readers produce the same raw arrays: float64 vertices, int32 triangle
indices, an int32 per-triangle object id, and a name per object. Polygons in
OBJ are fan-triangulated; glTF node transforms are baked into the vertices.
Only the geometry subset needed for ray casting is read (positions and
indices); texture coordinates and stored normals are ignored because the
simulator always works with per-triangle geometric normals.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import SceneLoadError


class RawMesh:
    """Raw parsed geometry prior to validation/merging into a scene."""

    def __init__(self, vertices, triangles, object_ids, object_names):
        self.vertices = np.asarray(vertices, dtype=np.float64).reshape(-1, 3)
        self.triangles = np.asarray(triangles, dtype=np.int32).reshape(-1, 3)
        self.object_ids = np.asarray(object_ids, dtype=np.int32).reshape(-1)
        self.object_names = dict(object_names)  # object_id -> name


def load_mesh_file(path) -> RawMesh:
    """Dispatch on file extension (.obj or .glb)."""
    p = Path(path)
    if not p.is_file():
        raise SceneLoadError(f"mesh file not found: {p}")
    ext = p.suffix.lower()
    if ext == ".obj":
        return load_obj(p)
    if ext == ".glb":
        return load_glb(p)
    raise SceneLoadError(f"unsupported mesh format '{ext}' for {p} (expected .obj or .glb)")


# ---------------------------------------------------------------------------
# OBJ


def load_obj(path) -> RawMesh:
    vertices: list[tuple[float, float, float]] = []
    triangles: list[tuple[int, int, int]] = []
    object_ids: list[int] = []
    object_names: dict[int, str] = {}
    current_object = 0
    seen_faces_for_current = False
    started_named_object = False

    try:
        text = Path(path).read_text(encoding="utf-8", errors="replace")
    except OSError as exc:
        raise SceneLoadError(f"cannot read mesh file {path}: {exc}") from exc

    def vertex_index(token: str, line_no: int) -> int:
        idx_str = token.split("/")[0]
        try:
            idx = int(idx_str)
        except ValueError:
            raise SceneLoadError(f"{path}:{line_no}: bad face vertex reference '{token}'")
        if idx < 0:  # relative indexing counts back from the latest vertex
            idx = len(vertices) + idx
        else:
            idx = idx - 1
        return idx

    for line_no, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        tag = parts[0]
        if tag == "v":
            if len(parts) < 4:
                raise SceneLoadError(f"{path}:{line_no}: vertex line has fewer than 3 coordinates")
            try:
                vertices.append((float(parts[1]), float(parts[2]), float(parts[3])))
            except ValueError:
                raise SceneLoadError(f"{path}:{line_no}: non-numeric vertex coordinate")
        elif tag in ("o", "g"):
            name = parts[1] if len(parts) > 1 else f"object_{current_object}"
            if seen_faces_for_current or started_named_object:
                current_object += 1
                seen_faces_for_current = False
            object_names[current_object] = name
            started_named_object = True
        elif tag == "f":
            if len(parts) < 4:
                raise SceneLoadError(f"{path}:{line_no}: face with fewer than 3 vertices")
            idxs = [vertex_index(tok, line_no) for tok in parts[1:]]
            for k in range(1, len(idxs) - 1):  # fan triangulation
                triangles.append((idxs[0], idxs[k], idxs[k + 1]))
                object_ids.append(current_object)
            seen_faces_for_current = True
        # vn / vt / usemtl / mtllib / s are ignored

    object_names.setdefault(0, "object_0")
    return RawMesh(
        np.array(vertices, dtype=np.float64).reshape(-1, 3),
        np.array(triangles, dtype=np.int32).reshape(-1, 3),
        np.array(object_ids, dtype=np.int32),
        object_names,
    )


# ---------------------------------------------------------------------------
# Binary glTF (GLB)

_GLB_MAGIC = 0x46546C67  # "glTF"
_CHUNK_JSON = 0x4E4F534A
_CHUNK_BIN = 0x004E4942

_COMPONENT_DTYPES = {
    5120: np.int8,
    5121: np.uint8,
    5122: np.int16,
    5123: np.uint16,
    5125: np.uint32,
    5126: np.float32,
}
_TYPE_WIDTHS = {"SCALAR": 1, "VEC2": 2, "VEC3": 3, "VEC4": 4, "MAT4": 16}


def load_glb(path) -> RawMesh:
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise SceneLoadError(f"cannot read mesh file {path}: {exc}") from exc
    if len(blob) < 12:
        raise SceneLoadError(f"{path}: truncated GLB header")
    magic, version, length = struct.unpack_from("<III", blob, 0)
    if magic != _GLB_MAGIC:
        raise SceneLoadError(f"{path}: not a binary glTF file (bad magic)")
    if version != 2:
        raise SceneLoadError(f"{path}: unsupported glTF version {version}")

    offset = 12
    gltf = None
    binary = b""
    while offset + 8 <= min(length, len(blob)):
        chunk_len, chunk_type = struct.unpack_from("<II", blob, offset)
        offset += 8
        data = blob[offset : offset + chunk_len]
        offset += chunk_len
        if chunk_type == _CHUNK_JSON:
            gltf = json.loads(data.decode("utf-8"))
        elif chunk_type == _CHUNK_BIN:
            binary = data
    if gltf is None:
        raise SceneLoadError(f"{path}: GLB has no JSON chunk")

    accessors = gltf.get("accessors", [])
    views = gltf.get("bufferViews", [])

    def read_accessor(idx: int) -> np.ndarray:
        if idx >= len(accessors):
            raise SceneLoadError(f"{path}: accessor {idx} out of range")
        acc = accessors[idx]
        if "sparse" in acc:
            raise SceneLoadError(f"{path}: sparse accessor {idx} unsupported")
        ctype = acc["componentType"]
        if ctype not in _COMPONENT_DTYPES:
            raise SceneLoadError(f"{path}: accessor {idx} has unknown componentType {ctype}")
        dtype = np.dtype(_COMPONENT_DTYPES[ctype])
        width = _TYPE_WIDTHS.get(acc["type"])
        if width is None:
            raise SceneLoadError(f"{path}: accessor {idx} has unsupported type {acc['type']}")
        count = acc["count"]
        view = views[acc["bufferView"]]
        stride = view.get("byteStride")
        item_bytes = dtype.itemsize * width
        if stride not in (None, item_bytes):
            raise SceneLoadError(f"{path}: accessor {idx} uses interleaved stride {stride}, unsupported")
        start = view.get("byteOffset", 0) + acc.get("byteOffset", 0)
        end = start + count * item_bytes
        if end > len(binary):
            raise SceneLoadError(f"{path}: accessor {idx} overruns the binary chunk")
        arr = np.frombuffer(binary, dtype=dtype, count=count * width, offset=start)
        return arr.reshape(count, width) if width > 1 else arr

    def node_matrix(node: dict) -> np.ndarray:
        if "matrix" in node:
            return np.array(node["matrix"], dtype=np.float64).reshape(4, 4).T
        m = np.eye(4)
        if "translation" in node:
            m[:3, 3] = node["translation"]
        if "rotation" in node:  # glTF stores [x, y, z, w]
            x, y, z, w = node["rotation"]
            from .pose import quat_to_matrix

            m[:3, :3] = quat_to_matrix([w, x, y, z])
        if "scale" in node:
            m[:3, :3] = m[:3, :3] @ np.diag(node["scale"])
        return m

    vertices_out: list[np.ndarray] = []
    tris_out: list[np.ndarray] = []
    object_ids_out: list[np.ndarray] = []
    object_names: dict[int, str] = {}
    next_object = 0
    vert_base = 0

    nodes = gltf.get("nodes", [])
    meshes = gltf.get("meshes", [])
    scene_idx = gltf.get("scene", 0)
    scenes = gltf.get("scenes", [{"nodes": list(range(len(nodes)))}])
    roots = scenes[scene_idx].get("nodes", []) if scenes else []

    def visit(node_idx: int, parent: np.ndarray):
        nonlocal next_object, vert_base
        node = nodes[node_idx]
        world = parent @ node_matrix(node)
        if "mesh" in node:
            mesh = meshes[node["mesh"]]
            name = node.get("name") or mesh.get("name") or f"object_{next_object}"
            for prim in mesh.get("primitives", []):
                if prim.get("mode", 4) != 4:  # triangles only
                    continue
                pos = read_accessor(prim["attributes"]["POSITION"]).astype(np.float64)
                pos = pos @ world[:3, :3].T + world[:3, 3]
                if "indices" in prim:
                    idx = read_accessor(prim["indices"]).astype(np.int64).reshape(-1)
                else:
                    idx = np.arange(pos.shape[0], dtype=np.int64)
                if idx.size % 3 != 0:
                    raise SceneLoadError(f"{path}: primitive index count {idx.size} not divisible by 3")
                tris = idx.reshape(-1, 3) + vert_base
                vertices_out.append(pos)
                tris_out.append(tris)
                object_ids_out.append(np.full(tris.shape[0], next_object, dtype=np.int32))
                object_names[next_object] = name
                vert_base += pos.shape[0]
                next_object += 1
        for child in node.get("children", []):
            visit(child, world)

    for root in roots:
        visit(root, np.eye(4))

    if not tris_out:
        raise SceneLoadError(f"{path}: no triangle primitives found")
    return RawMesh(
        np.vstack(vertices_out),
        np.vstack(tris_out).astype(np.int32),
        np.concatenate(object_ids_out),
        object_names,
    )
