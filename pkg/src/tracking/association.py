"""
Frame-to-frame association of draws as a weighted bipartite matching.

An edge (i, j) between a node of frame f and a draw of frame g is admissible
when the distance between their world positions is strictly below the speed
cap of i's class and, for dynamic classes, both nodes share class and segment
(for static classes, class alone). Admissible edges weigh cap - distance, so a
maximum-weight matching prefers many matches with little motion.
"""
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment


@dataclass(frozen=True, eq=False)
class Node:
    position: np.ndarray  # (3,) float64 world position
    class_id: int
    segment_id: int
    draw: int | None = None  # draw index in its frame; None for extrapolated phantoms
    track_id: int | None = None

    @classmethod
    def of_draw(cls, draw, index, track_id=None):
        return cls(position=draw.position, class_id=draw.class_id, segment_id=draw.segment_id,
                   draw=index, track_id=track_id)

    @property
    def is_phantom(self):
        return self.draw is None


@dataclass(frozen=True)
class Edge:
    i: int
    j: int
    distance: float
    admissible: bool
    weight: float


@dataclass(eq=False)
class AssociationGraph:
    nodes_f: list[Node]
    nodes_g: list[Node]
    edges: list[Edge]

    def weight_matrix(self):
        """(|f|, |g|) weights; 0 for inadmissible pairs."""
        weights = np.zeros((len(self.nodes_f), len(self.nodes_g)))
        for e in self.edges:
            if e.admissible:
                weights[e.i, e.j] = e.weight
        return weights

    def admissible_mask(self):
        mask = np.zeros((len(self.nodes_f), len(self.nodes_g)), dtype=bool)
        for e in self.edges:
            mask[e.i, e.j] = e.admissible
        return mask


def is_admissible(node_f, node_g, semantic_class, distance):
    """Speed cap of f's class, then class (and for dynamic classes, segment) agreement."""
    if not distance < semantic_class.max_speed:
        return False
    if node_f.class_id != node_g.class_id:
        return False
    return node_f.segment_id == node_g.segment_id if semantic_class.is_dynamic else True


def build_graph(nodes_f, nodes_g, class_table):
    """
    Builds the complete bipartite graph between two node lists.

    Args:
        nodes_f (list[Node]): Draws of frame f plus extrapolated phantoms.
        nodes_g (list[Node]): Draws of frame g.
        class_table (list[SemanticClass] | dict): Classes by id.

    Returns:
        AssociationGraph: Every (i, j) pair with its distance, admissibility and weight.
    """
    classes = class_table if isinstance(class_table, dict) else {c.class_id: c for c in class_table}
    edges = []
    if nodes_f and nodes_g:
        pos_f = np.stack([n.position for n in nodes_f])
        pos_g = np.stack([n.position for n in nodes_g])
        distances = np.linalg.norm(pos_f[:, None, :] - pos_g[None, :, :], axis=-1)
        for i, node_f in enumerate(nodes_f):
            cls = classes[node_f.class_id]
            for j, node_g in enumerate(nodes_g):
                d = float(distances[i, j])
                ok = is_admissible(node_f, node_g, cls, d)
                edges.append(Edge(i, j, d, ok, cls.max_speed - d if ok else 0.0))
    return AssociationGraph(nodes_f=list(nodes_f), nodes_g=list(nodes_g), edges=edges)


def graph_between(frame_f, frame_g, class_table, phantoms=(), track_ids=None):
    """Association graph of two recorded frames; `phantoms` are appended to frame f's nodes."""
    track_ids = track_ids or [None] * len(frame_f.draws)
    nodes_f = [Node.of_draw(draw, d, track_ids[d]) for d, draw in enumerate(frame_f.draws)]
    nodes_g = [Node.of_draw(draw, d) for d, draw in enumerate(frame_g.draws)]
    return build_graph(nodes_f + list(phantoms), nodes_g, class_table)


def _optimum(weights):
    if weights.size == 0:
        return 0.0
    rows, cols = linear_sum_assignment(weights, maximize=True)
    return float(weights[rows, cols].sum())


def solve_matching(graph):
    """
    Maximum-weight matching over the admissible edges.

    Among all optimal matchings, the one whose (i, j) pairs, sorted, form the
    lexicographically smallest sequence is returned: pairs are fixed greedily
    in (i, j) order whenever the remaining graph can still reach the optimum.

    Args:
        graph (AssociationGraph): Graph from `build_graph`.

    Returns:
        list[Edge]: Node-disjoint admissible edges, sorted by i.
    """
    weights = graph.weight_matrix()
    admissible = graph.admissible_mask()
    if not admissible.any():
        return []
    target = _optimum(weights)
    tolerance = 1e-9 * max(1.0, abs(target))

    rows = list(range(weights.shape[0]))
    cols = list(range(weights.shape[1]))
    fixed, fixed_weight = [], 0.0
    for i in range(weights.shape[0]):
        rows.remove(i)
        for j in list(cols):
            if not admissible[i, j]:
                continue
            rest = [c for c in cols if c != j]
            remaining = weights[np.ix_(rows, rest)] if rows and rest else np.zeros((0, 0))
            total = fixed_weight + weights[i, j] + _optimum(remaining)
            if total >= target - tolerance:
                fixed.append((i, j))
                fixed_weight += weights[i, j]
                cols = rest
                break

    lookup = {(e.i, e.j): e for e in graph.edges}
    return [lookup[pair] for pair in fixed]
