from dataclasses import dataclass

import numpy as np

from src.errors import DegenerateW

W_EPSILON = 1e-12


@dataclass(frozen=True)
class Viewport:
    """Pixel grid of a frame. Pixel (i, j) has its centre at (i + 0.5, j + 0.5), y pointing down."""
    width: int
    height: int

    @classmethod
    def of(cls, seq):
        return cls(*seq.resolution)

    @property
    def clip_matrix(self):
        """C: maps NDC (x, y, z in [-1, 1]) to (pixel x, pixel y, depth in [0, 1])."""
        return np.array([
            [self.width / 2.0, 0.0, 0.0, self.width / 2.0],
            [0.0, -self.height / 2.0, 0.0, self.height / 2.0],
            [0.0, 0.0, 0.5, 0.5],
            [0.0, 0.0, 0.0, 1.0],
        ])

    def contains(self, pixels):
        pixels = np.asarray(pixels, dtype=np.float64)
        return (pixels[..., 0] >= 0) & (pixels[..., 0] < self.width) & \
            (pixels[..., 1] >= 0) & (pixels[..., 1] < self.height)


def model_view_projection(projection, view, world):
    """P·V·W in float64 from (possibly float32) recorded matrices."""
    return np.asarray(projection, dtype=np.float64) @ np.asarray(view, dtype=np.float64) \
        @ np.asarray(world, dtype=np.float64)


def project_points(mvp, points, viewport):
    """
    Projects homogeneous object-space points through P·V·W and the viewport.

    Args:
        mvp (np.ndarray): 4x4 P·V·W.
        points (np.ndarray): (N, 4) homogeneous points.
        viewport (Viewport): Target pixel grid.

    Returns:
        tuple: (N, 2) pixel coordinates, (N,) depth in [0, 1] for visible points, (N,) clip w.
        Rows with |w| below epsilon come back as NaN.
    """
    clip = np.asarray(points, dtype=np.float64) @ mvp.T
    w = clip[:, 3]
    with np.errstate(divide="ignore", invalid="ignore"):
        ndc = clip / np.where(np.abs(w) < W_EPSILON, np.nan, w)[:, None]
    screen = ndc @ viewport.clip_matrix.T
    return screen[:, :2], screen[:, 2], w


def project_vertex(x, world, view, projection, viewport):
    """
    Maps one object-space point to the screen: s = C·P·V·W·x.

    Args:
        x (array-like): Homogeneous object-space point.
        world (np.ndarray): W.
        view (np.ndarray): V.
        projection (np.ndarray): P.
        viewport (Viewport): Target pixel grid.

    Returns:
        tuple[np.ndarray, float, float]: Pixel coordinates, depth in [0, 1], clip w.

    Raises:
        DegenerateW: |w| < 1e-12 after P·V·W·x.
    """
    clip = model_view_projection(projection, view, world) @ np.asarray(x, dtype=np.float64)
    if abs(clip[3]) < W_EPSILON:
        raise DegenerateW(f"clip w = {clip[3]:.3g} for point {np.asarray(x).tolist()}")
    screen = viewport.clip_matrix @ (clip / clip[3])
    return screen[:2], float(screen[2]), float(clip[3])
