from dataclasses import dataclass
from enum import IntEnum

import numpy as np


class FlowStatus(IntEnum):
    """Per-pixel outcome of a correspondence lookup (stored as the 8-bit status plane)."""
    VALID = 0
    OCCLUDED = 1
    OUT_OF_VIEW = 2
    UNTRACKED = 3
    BACKGROUND = 4


@dataclass(eq=False)
class FlowField:
    du: np.ndarray  # (H, W) float32, pixels
    dv: np.ndarray  # (H, W) float32, pixels
    status: np.ndarray  # (H, W) uint8, FlowStatus

    def __post_init__(self):
        self.du = np.asarray(self.du, dtype=np.float32)
        self.dv = np.asarray(self.dv, dtype=np.float32)
        self.status = np.asarray(self.status, dtype=np.uint8)

    @classmethod
    def background(cls, width, height):
        return cls(np.zeros((height, width)), np.zeros((height, width)),
                   np.full((height, width), FlowStatus.BACKGROUND, dtype=np.uint8))

    @property
    def width(self):
        return self.du.shape[1]

    @property
    def height(self):
        return self.du.shape[0]

    @property
    def vectors(self):
        """(H, W, 2) float64 displacement."""
        return np.stack([self.du, self.dv], axis=-1).astype(np.float64)

    @property
    def valid(self):
        return self.status == FlowStatus.VALID

    def counts(self):
        """Pixel count per status name."""
        return {s.name.lower(): int(np.count_nonzero(self.status == s)) for s in FlowStatus}
