"""Mesh primitives used by scene scripts. All builders return float64 positions and int triangles."""
import numpy as np


def box(size, subdivisions=1, center=(0.0, 0.0, 0.0)):
    """
    Axis-aligned box with every face split into an n x n grid of quads.

    Faces are built independently; vertices along shared box edges are
    computed by the same expression so their coordinates coincide exactly.

    Args:
        size (array-like): Edge lengths (sx, sy, sz).
        subdivisions (int): Quads per face edge.
        center (array-like): Box centre in object space.

    Returns:
        tuple[np.ndarray, np.ndarray]: (N, 3) positions and (T, 3) triangles.
    """
    half = np.asarray(size, dtype=np.float64) / 2.0
    n = int(subdivisions)
    positions, triangles = [], []
    for axis in range(3):
        u, v = [a for a in range(3) if a != axis]
        grid_u = np.linspace(-half[u], half[u], n + 1)
        grid_v = np.linspace(-half[v], half[v], n + 1)
        for sign in (-1.0, 1.0):
            base = sum(len(p) for p in positions)
            face = np.zeros(((n + 1) * (n + 1), 3))
            gu, gv = np.meshgrid(grid_u, grid_v, indexing="ij")
            face[:, axis] = sign * half[axis]
            face[:, u] = gu.ravel()
            face[:, v] = gv.ravel()
            positions.append(face)
            for i in range(n):
                for j in range(n):
                    a = base + i * (n + 1) + j
                    b, c, d = a + n + 1, a + 1, a + n + 2
                    triangles += [(a, b, d), (a, d, c)]
    return np.concatenate(positions) + np.asarray(center, dtype=np.float64), np.asarray(triangles, dtype=np.int64)


def icosphere(radius, subdivisions=1, center=(0.0, 0.0, 0.0)):
    """Sphere from a subdivided icosahedron."""
    t = (1.0 + np.sqrt(5.0)) / 2.0
    vertices = [(-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0),
                (0, -1, t), (0, 1, t), (0, -1, -t), (0, 1, -t),
                (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1)]
    vertices = [np.asarray(v, dtype=np.float64) / np.linalg.norm(v) for v in vertices]
    faces = [(0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
             (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
             (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
             (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1)]
    for _ in range(int(subdivisions)):
        midpoints = {}

        def midpoint(a, b):
            key = (min(a, b), max(a, b))
            if key not in midpoints:
                m = vertices[a] + vertices[b]
                vertices.append(m / np.linalg.norm(m))
                midpoints[key] = len(vertices) - 1
            return midpoints[key]

        refined = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            refined += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = refined
    positions = np.asarray(vertices) * radius + np.asarray(center, dtype=np.float64)
    return positions, np.asarray(faces, dtype=np.int64)


def strip(size, columns=4, rows=8):
    """
    Vertical strip in the z = 0 plane, base at y = 0, skinned to two bones.

    Bone 0 holds the base, bone 1 the top; the weight of bone 1 grows linearly
    with height.

    Returns:
        tuple: positions, triangles, (N, 2) bone indices, (N, 2) float32 weights.
    """
    width, height = float(size[0]), float(size[1])
    xs = np.linspace(-width / 2.0, width / 2.0, columns + 1)
    ys = np.linspace(0.0, height, rows + 1)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    positions = np.stack([gx.ravel(), gy.ravel(), np.zeros(gx.size)], axis=1)
    triangles = []
    for i in range(columns):
        for j in range(rows):
            a = i * (rows + 1) + j
            b, c, d = a + rows + 1, a + 1, a + rows + 2
            triangles += [(a, b, d), (a, d, c)]
    top = (positions[:, 1] / height).astype(np.float32)
    weights = np.stack([np.float32(1.0) - top, top], axis=1)
    indices = np.tile(np.array([0, 1], dtype=np.uint32), (len(positions), 1))
    return positions, np.asarray(triangles, dtype=np.int64), indices, weights


# Vehicle parts: name -> (builder kwargs, uses the vehicle's class)
VEHICLE_PARTS = (
    ("body", dict(kind="box", size=(2.0, 0.6, 1.0), center=(0.0, 0.5, 0.0)), True),
    ("cabin", dict(kind="box", size=(1.0, 0.5, 0.9), center=(-0.2, 1.05, 0.0)), True),
    ("bumper", dict(kind="box", size=(0.2, 0.3, 1.0), center=(1.1, 0.35, 0.0)), True),
    ("wheel_front", dict(kind="icosphere", radius=0.3, center=(0.6, 0.3, 0.55)), False),
    ("wheel_rear", dict(kind="icosphere", radius=0.3, center=(-0.6, 0.3, 0.55)), False),
)


def vehicle_part(spec, subdivisions=1):
    kind = spec["kind"]
    if kind == "box":
        return box(spec["size"], subdivisions, spec["center"])
    return icosphere(spec["radius"], subdivisions, spec["center"])
