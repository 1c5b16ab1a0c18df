"""Scene loading, materials, and first-hit ray queries.

A Scene is immutable after load: triangle soup, per-triangle geometric
normals, per-object materials, and a BVH. All sensors query it through
cast_ray (single ray) or through the flat arrays consumed by the batch
kernels. Material reassignment returns a new Scene sharing the geometry
and BVH, so semantic relabeling is cheap.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .bvh import BVH, build_bvh
from .errors import ConfigError, SceneLoadError
from .meshio import RawMesh, load_mesh_file

log = logging.getLogger(__name__)

DIRECTION_UNIT_TOL = 1e-6
_DEGENERATE_AREA_EPS = 1e-12  # cross-product norm below this drops the triangle


@dataclass(frozen=True)
class Material:
    """Surface properties: acoustic reflectance for sonar, color for camera."""

    acoustic_reflectance: float = 0.9
    base_color: tuple = (0.5, 0.5, 0.5)
    label: str = ""

    def __post_init__(self):
        a = self.acoustic_reflectance
        if not (np.isfinite(a) and 0.0 <= a <= 1.0):
            raise ConfigError(f"acoustic_reflectance must be in [0, 1], got {a}")
        color = tuple(float(c) for c in self.base_color)
        if len(color) != 3 or any(not (np.isfinite(c) and 0.0 <= c <= 1.0) for c in color):
            raise ConfigError(f"base_color must be three channels in [0, 1], got {self.base_color}")
        object.__setattr__(self, "base_color", color)


DEFAULT_MATERIAL = Material()


@dataclass(frozen=True)
class TriangleMesh:
    """Validated triangle soup with per-triangle unit normals and object ids."""

    vertices: np.ndarray      # (n_verts, 3) float64 [m]
    triangles: np.ndarray     # (n_tris, 3) int64
    normals: np.ndarray       # (n_tris, 3) float64, unit length
    object_ids: np.ndarray    # (n_tris,) int64
    object_names: dict

    def __post_init__(self):
        if self.triangles.shape[0] < 1:
            raise SceneLoadError("mesh has no triangles")
        norms = np.linalg.norm(self.normals, axis=1)
        if not np.allclose(norms, 1.0, atol=1e-6):
            raise SceneLoadError("mesh normals are not unit length")

    @property
    def triangle_count(self) -> int:
        return int(self.triangles.shape[0])


@dataclass(frozen=True)
class RayHit:
    """Result of a first-hit query.

    `normal` is oriented to face the ray origin; `geometric_normal` is the
    stored winding-order normal, which back-facing checks need unflipped.
    """

    hit: bool
    distance: float = 0.0
    point: np.ndarray = None
    normal: np.ndarray = None
    geometric_normal: np.ndarray = None
    incident: np.ndarray = None
    triangle: int = -1
    object_id: int = -1
    material: Material = None


class Scene:
    """Immutable world: mesh + materials + BVH + flat per-triangle arrays."""

    def __init__(self, mesh: TriangleMesh, materials: dict, bvh: BVH = None,
                 dropped_triangles: int = 0):
        self.mesh = mesh
        self.materials = dict(materials)
        self.bvh = bvh if bvh is not None else build_bvh(mesh.vertices, mesh.triangles)
        self.dropped_triangles = dropped_triangles
        # flat arrays for the numba kernels
        self.tri_normal = np.ascontiguousarray(mesh.normals)
        self.tri_object = np.ascontiguousarray(mesh.object_ids)
        n = mesh.triangle_count
        self.tri_reflectance = np.empty(n, dtype=np.float64)
        self.tri_color = np.empty((n, 3), dtype=np.float64)
        for oid in np.unique(mesh.object_ids):
            mat = self.materials.get(int(oid), DEFAULT_MATERIAL)
            sel = mesh.object_ids == oid
            self.tri_reflectance[sel] = mat.acoustic_reflectance
            self.tri_color[sel] = mat.base_color

    @property
    def triangle_count(self) -> int:
        return self.mesh.triangle_count

    def material_for_object(self, object_id: int) -> Material:
        return self.materials.get(int(object_id), DEFAULT_MATERIAL)

    def with_materials(self, materials: dict) -> "Scene":
        """New Scene sharing geometry and BVH but with replaced materials."""
        return Scene(self.mesh, materials, bvh=self.bvh,
                     dropped_triangles=self.dropped_triangles)


def _validate_and_build(raw: RawMesh, material_table=None,
                        source: str = "<arrays>") -> Scene:
    verts = raw.vertices
    tris = raw.triangles.astype(np.int64)
    object_ids = raw.object_ids.astype(np.int64)

    bad = np.nonzero(~np.isfinite(verts).all(axis=1))[0]
    if bad.size:
        raise SceneLoadError(f"{source}: vertex {int(bad[0])} has non-finite coordinates")
    n_verts = verts.shape[0]
    out_of_range = np.nonzero((tris < 0) | (tris >= n_verts))[0]
    if out_of_range.size:
        t = int(out_of_range[0])
        raise SceneLoadError(
            f"{source}: triangle {t} references vertex {int(tris[t].max())} "
            f"but the mesh has {n_verts} vertices")

    e1 = verts[tris[:, 1]] - verts[tris[:, 0]]
    e2 = verts[tris[:, 2]] - verts[tris[:, 0]]
    cross = np.cross(e1, e2)
    area2 = np.linalg.norm(cross, axis=1)
    keep = area2 > _DEGENERATE_AREA_EPS
    dropped = int((~keep).sum())
    if dropped:
        log.warning("%s: dropped %d degenerate zero-area triangle(s)", source, dropped)
        tris = tris[keep]
        object_ids = object_ids[keep]
        cross = cross[keep]
        area2 = area2[keep]
    if tris.shape[0] == 0:
        raise SceneLoadError(f"{source}: no non-degenerate triangles remain")

    normals = cross / area2[:, None]
    mesh = TriangleMesh(verts, tris, normals, object_ids, dict(raw.object_names))

    materials = {}
    if material_table:
        for oid, mat in material_table.items():
            materials[int(oid)] = mat
    return Scene(mesh, materials, dropped_triangles=dropped)


def load_scene(path, material_table=None) -> Scene:
    """Load an OBJ or GLB file and build the acceleration structure.

    material_table maps object id to Material and may be partial; objects
    without an entry use the default (A_r 0.9, mid gray).
    """
    raw = load_mesh_file(path)
    return _validate_and_build(raw, material_table, source=str(path))


def scene_from_arrays(vertices, triangles, object_ids=None, material_table=None,
                      object_names=None) -> Scene:
    """Build a Scene directly from arrays, same validation as load_scene."""
    vertices = np.asarray(vertices, dtype=np.float64).reshape(-1, 3)
    triangles = np.asarray(triangles, dtype=np.int64).reshape(-1, 3)
    if object_ids is None:
        object_ids = np.zeros(triangles.shape[0], dtype=np.int64)
    raw = RawMesh(vertices, triangles, object_ids,
                  object_names or {0: "object_0"})
    return _validate_and_build(raw, material_table)


def cast_ray(scene: Scene, origin, direction, max_range: float) -> RayHit:
    """Nearest hit within max_range, or RayHit(hit=False).

    The returned `normal` is flipped, if needed, to face the ray origin.
    """
    origin = np.asarray(origin, dtype=np.float64).reshape(3)
    direction = np.asarray(direction, dtype=np.float64).reshape(3)
    norm = np.linalg.norm(direction)
    if abs(norm - 1.0) > DIRECTION_UNIT_TOL:
        raise ValueError(f"direction must be unit length, |d| = {norm}")
    if not max_range > 0:
        raise ValueError(f"max_range must be positive, got {max_range}")

    t, tri = scene.bvh.cast(origin[None, :], direction[None, :], t_max=float(max_range))
    tri = int(tri[0])
    if tri < 0:
        return RayHit(hit=False, incident=direction)
    distance = float(t[0])
    geometric = scene.tri_normal[tri].copy()
    normal = geometric if float(geometric @ direction) <= 0.0 else -geometric
    oid = int(scene.tri_object[tri])
    return RayHit(
        hit=True,
        distance=distance,
        point=origin + distance * direction,
        normal=normal,
        geometric_normal=geometric,
        incident=direction,
        triangle=tri,
        object_id=oid,
        material=scene.material_for_object(oid),
    )


def assign_semantic_materials(scene: Scene, label_map: dict,
                              material_by_label: dict) -> Scene:
    """Replace materials of labeled objects; unlabeled objects keep theirs."""
    missing = sorted({lbl for lbl in label_map.values() if lbl not in material_by_label})
    if missing:
        raise ConfigError(f"no material defined for label(s): {', '.join(missing)}")
    materials = dict(scene.materials)
    for oid, label in label_map.items():
        mat = material_by_label[label]
        if mat.label != label:
            mat = Material(mat.acoustic_reflectance, mat.base_color, label)
        materials[int(oid)] = mat
    return scene.with_materials(materials)


def load_material_table(path):
    """Read the material table JSON.

    Returns (materials_by_id, object_labels, materials_by_label) so callers
    can both seed load_scene and run assign_semantic_materials.
    """
    p = Path(path)
    try:
        doc = json.loads(p.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read material table {p}: {exc}") from exc

    def parse_material(entry, where):
        try:
            return Material(
                acoustic_reflectance=float(entry.get("acoustic_reflectance", 0.9)),
                base_color=tuple(entry.get("color", (0.5, 0.5, 0.5))),
                label=str(entry.get("label", "")),
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{p}: bad material entry at {where}: {exc}") from exc

    by_id = {}
    object_labels = {}
    for k, entry in enumerate(doc.get("objects", [])):
        if "id" not in entry:
            raise ConfigError(f"{p}: objects[{k}] is missing 'id'")
        oid = int(entry["id"])
        by_id[oid] = parse_material(entry, f"objects[{k}]")
        if entry.get("label"):
            object_labels[oid] = str(entry["label"])

    by_label = {}
    for label, entry in doc.get("labels", {}).items():
        entry = dict(entry)
        entry.setdefault("label", label)
        by_label[label] = parse_material(entry, f"labels[{label!r}]")
    return by_id, object_labels, by_label
