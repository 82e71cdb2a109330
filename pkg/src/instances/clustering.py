from collections import Counter
from dataclasses import dataclass

import numpy as np

from src.trace_model.types import Visibility

W_TOLERANCE = 1e-6
VOID = 255  # semantic label of background pixels


@dataclass(frozen=True)
class Instance:
    instance_id: int
    members: tuple[int, ...]  # draw indices, ascending
    class_id: int


@dataclass(eq=False)
class InstanceMap:
    frame_index: int
    instances: list[Instance]
    label_image: np.ndarray  # (H, W) uint16, 0 = background

    def instance(self, instance_id):
        return self.instances[instance_id - 1]

    def draw_instances(self):
        """draw index -> instance id."""
        return {d: inst.instance_id for inst in self.instances for d in inst.members}


def vote_semantic_class(members, weights=None):
    """
    Majority vote over the classes of an instance's member draws.

    Each draw casts one vote unless `weights` (e.g. pixel counts) says otherwise;
    ties go to the smallest class id.

    Args:
        members (list[DrawCall]): Member draws (at least one).
        weights (list[float]): Optional vote weight per member.

    Returns:
        int: Winning class id.
    """
    votes = Counter()
    for k, draw in enumerate(members):
        votes[draw.class_id] += 1 if weights is None else weights[k]
    best = max(votes.values())
    return min(c for c, v in votes.items() if v == best)


def _same_world(a, b):
    return bool(np.max(np.abs(a - b)) <= W_TOLERANCE)


def cluster_instances(frame, weighting="draw"):
    """
    Groups the rendered draws of a frame into object instances.

    Draws whose world matrices agree entry-wise within 1e-6 form one instance.
    Instances are numbered from 1 in order of their smallest member draw index.

    Args:
        frame (FrameRecord): Frame with draws and G-buffer.
        weighting (str): 'draw' (one vote per draw) or 'pixel' (votes weighted by coverage).

    Returns:
        InstanceMap: Instances and the per-pixel instance label image.
    """
    groups = []  # (representative W, members)
    for d, draw in enumerate(frame.draws):
        if draw.visibility != Visibility.RENDERED:
            continue
        world = draw.world.astype(np.float64)
        for rep, members in groups:
            if _same_world(rep, world):
                members.append(d)
                break
        else:
            groups.append((world, [d]))

    coverage = None
    if weighting == "pixel":
        gb = frame.gbuffer
        coverage = np.bincount(gb.draw_index[gb.covered].astype(np.int64), minlength=len(frame.draws))

    instances = []
    for k, (_, members) in enumerate(groups, start=1):
        weights = None if coverage is None else [int(coverage[d]) for d in members]
        class_id = vote_semantic_class([frame.draws[d] for d in members], weights)
        instances.append(Instance(instance_id=k, members=tuple(members), class_id=class_id))

    lookup = np.zeros(len(frame.draws) + 1, dtype=np.uint16)
    for inst in instances:
        lookup[list(inst.members)] = inst.instance_id
    gb = frame.gbuffer
    labels = np.zeros(gb.draw_index.shape, dtype=np.uint16)
    covered = gb.covered & (gb.draw_index < len(frame.draws))
    labels[covered] = lookup[gb.draw_index[covered].astype(np.int64)]
    return InstanceMap(frame_index=frame.frame_index, instances=instances, label_image=labels)


def instance_mask(frame, instance_map):
    """
    Per-pixel instance and semantic labels of a frame.

    Returns:
        tuple[np.ndarray, np.ndarray]: uint16 instance ids (0 = background) and
        uint8 class ids (VOID = background).
    """
    labels = instance_map.label_image
    classes = np.full(len(instance_map.instances) + 1, VOID, dtype=np.uint8)
    for inst in instance_map.instances:
        classes[inst.instance_id] = inst.class_id
    return labels.copy(), classes[labels]


def instance_boundaries(labels):
    """Marks every pixel with a 4-neighbour of a different instance id."""
    labels = np.asarray(labels)
    boundary = np.zeros(labels.shape, dtype=bool)
    vertical = labels[1:, :] != labels[:-1, :]
    horizontal = labels[:, 1:] != labels[:, :-1]
    boundary[1:, :] |= vertical
    boundary[:-1, :] |= vertical
    boundary[:, 1:] |= horizontal
    boundary[:, :-1] |= horizontal
    return boundary
