"""
In-memory trace model: everything the capture middleware records per frame.

Reals are held as float32 (the container precision) so that a loaded sequence
is bit-identical to the one that was written. Consumers convert to float64
before doing geometry.
"""
from dataclasses import dataclass
from enum import IntEnum
from functools import cached_property

import numpy as np

from src.trace_model import BACKGROUND, RIGID


class Visibility(IntEnum):
    RENDERED = 0
    CULLED = 1
    DEPTH_FAILED = 2


@dataclass(frozen=True)
class SemanticClass:
    class_id: int
    name: str
    is_dynamic: bool
    max_speed: float  # world units per frame


@dataclass(eq=False)
class Mesh:
    mesh_id: int
    positions: np.ndarray  # (N, 3) float32, object space
    triangles: np.ndarray  # (T, 3) uint32
    skin_indices: np.ndarray | None = None  # (N, 2) uint32
    skin_weights: np.ndarray | None = None  # (N, 2) float32

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=np.float32).reshape(-1, 3)
        self.triangles = np.asarray(self.triangles, dtype=np.uint32).reshape(-1, 3)
        if self.skin_indices is not None:
            self.skin_indices = np.asarray(self.skin_indices, dtype=np.uint32).reshape(len(self.positions), -1)
            self.skin_weights = np.asarray(self.skin_weights, dtype=np.float32).reshape(len(self.positions), -1)

    @property
    def vertex_count(self):
        return len(self.positions)

    @property
    def is_skinned(self):
        return self.skin_indices is not None


@dataclass(eq=False)
class DrawCall:
    mesh_ref: int
    world: np.ndarray  # (4, 4) float32, W
    segment_id: int
    class_id: int
    shader_ref: int = RIGID
    bones: np.ndarray | None = None  # (B, 4, 4) float32
    visibility: Visibility = Visibility.RENDERED
    pixel_shader_ref: int | None = None

    def __post_init__(self):
        self.world = np.asarray(self.world, dtype=np.float32).reshape(4, 4)
        if self.bones is not None:
            self.bones = np.asarray(self.bones, dtype=np.float32).reshape(-1, 4, 4)
        self.visibility = Visibility(self.visibility)

    @property
    def position(self):
        """p(v): translation column of the world matrix."""
        return self.world[:3, 3].astype(np.float64)

    @property
    def is_skinned(self):
        return self.shader_ref != RIGID


@dataclass(eq=False)
class GBuffer:
    draw_index: np.ndarray  # (H, W) uint32, BACKGROUND where empty
    primitive_index: np.ndarray  # (H, W) uint32
    ndc_depth: np.ndarray  # (H, W) float32 in [0, 1]
    alpha: np.ndarray  # (H, W) float32 in [0, 1]

    def __post_init__(self):
        self.draw_index = np.asarray(self.draw_index, dtype=np.uint32)
        self.primitive_index = np.asarray(self.primitive_index, dtype=np.uint32)
        self.ndc_depth = np.asarray(self.ndc_depth, dtype=np.float32)
        self.alpha = np.asarray(self.alpha, dtype=np.float32)

    @classmethod
    def empty(cls, width, height):
        return cls(
            draw_index=np.full((height, width), BACKGROUND, dtype=np.uint32),
            primitive_index=np.full((height, width), BACKGROUND, dtype=np.uint32),
            ndc_depth=np.ones((height, width), dtype=np.float32),
            alpha=np.zeros((height, width), dtype=np.float32),
        )

    @property
    def width(self):
        return self.draw_index.shape[1]

    @property
    def height(self):
        return self.draw_index.shape[0]

    @property
    def covered(self):
        return self.draw_index != BACKGROUND


@dataclass(eq=False)
class FrameRecord:
    frame_index: int
    view: np.ndarray  # (4, 4) float32, V
    projection: np.ndarray  # (4, 4) float32, P
    draws: list[DrawCall]
    gbuffer: GBuffer

    def __post_init__(self):
        self.view = np.asarray(self.view, dtype=np.float32).reshape(4, 4)
        self.projection = np.asarray(self.projection, dtype=np.float32).reshape(4, 4)


@dataclass(eq=False)
class TraceSequence:
    class_table: list[SemanticClass]
    meshes: list[Mesh]
    shaders: list  # ShaderProgram
    frames: list[FrameRecord]
    resolution: tuple[int, int]  # (width, height)

    @cached_property
    def classes_by_id(self):
        return {c.class_id: c for c in self.class_table}

    @cached_property
    def meshes_by_id(self):
        return {m.mesh_id: m for m in self.meshes}

    @cached_property
    def shaders_by_id(self):
        return {s.shader_id: s for s in self.shaders}

    def mesh(self, mesh_id):
        return self.meshes_by_id[mesh_id]

    def shader(self, shader_id):
        return self.shaders_by_id[shader_id]

    def semantic_class(self, class_id):
        return self.classes_by_id[class_id]
