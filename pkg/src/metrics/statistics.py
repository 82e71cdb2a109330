"""Dataset statistics and their comparison by Jensen-Shannon divergence."""
from dataclasses import dataclass, field

import numpy as np
from scipy.special import rel_entr

from src.errors import DimensionMismatch, NegativeMass, NotNormalized

NORMALIZATION_TOLERANCE = 1e-9
DISTANCE_BINS = np.array([0.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0, np.inf])
COUNT_BINS = 32


def jsd(p, q):
    """
    Jensen-Shannon divergence in bits, bounded by [0, 1].

    Raises:
        DimensionMismatch: Supports differ in size.
        NegativeMass: A probability is negative.
        NotNormalized: A distribution does not sum to 1 within 1e-9.
    """
    p, q = np.asarray(p, dtype=np.float64), np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise DimensionMismatch(f"supports of size {p.shape} and {q.shape}")
    for name, dist in (("p", p), ("q", q)):
        if np.any(dist < 0):
            raise NegativeMass(f"{name} has negative mass")
        if abs(dist.sum() - 1.0) > NORMALIZATION_TOLERANCE:
            raise NotNormalized(f"{name} sums to {dist.sum():.12g}")
    m = 0.5 * (p + q)
    value = 0.5 * rel_entr(p, m).sum() / np.log(2) + 0.5 * rel_entr(q, m).sum() / np.log(2)
    return float(min(max(value, 0.0), 1.0))


def normalize(counts):
    counts = np.asarray(counts, dtype=np.float64)
    total = counts.sum()
    return counts / total if total > 0 else np.full(len(counts), 1.0 / len(counts))


@dataclass(eq=False)
class DatasetStatistics:
    """Raw counts from which the compared distributions are built."""
    categories_per_image: list = field(default_factory=list)
    instances_per_image: list = field(default_factory=list)
    instances_per_class: dict = field(default_factory=dict)
    object_distances: list = field(default_factory=list)

    def add_frame(self, instance_classes, distances=()):
        """
        Args:
            instance_classes (dict[int, int]): Instance label -> class of one frame.
            distances (Iterable[float]): Camera distance of each instance's box centre.
        """
        self.categories_per_image.append(len(set(instance_classes.values())))
        self.instances_per_image.append(len(instance_classes))
        for class_id in instance_classes.values():
            self.instances_per_class[class_id] = self.instances_per_class.get(class_id, 0) + 1
        self.object_distances.extend(float(d) for d in distances)
        return self

    def distributions(self, classes=None):
        """Normalised histograms on supports shared by every DatasetStatistics."""
        classes = sorted(self.instances_per_class) if classes is None else classes
        bins = np.arange(COUNT_BINS + 1)
        return {
            "categories_per_image": normalize(np.histogram(np.minimum(self.categories_per_image, COUNT_BINS - 1),
                                                           bins=bins)[0]),
            "instances_per_image": normalize(np.histogram(np.minimum(self.instances_per_image, COUNT_BINS - 1),
                                                          bins=bins)[0]),
            "instances_per_class": normalize([self.instances_per_class.get(c, 0) for c in classes]),
            "object_distance": normalize(np.histogram(self.object_distances, bins=DISTANCE_BINS)[0]),
        }


def compare_statistics(a, b):
    """JSD between two datasets for every statistic."""
    classes = sorted(set(a.instances_per_class) | set(b.instances_per_class)) or [0]
    dist_a, dist_b = a.distributions(classes), b.distributions(classes)
    return {name: jsd(dist_a[name], dist_b[name]) for name in dist_a}
