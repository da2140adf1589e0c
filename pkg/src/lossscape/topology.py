"""Merge trees and 0-dimensional persistence of sub-level set filtrations.

Vertices are swept in ascending value order (ties broken by vertex index) and
connected components are tracked with a union-find forest. A vertex with no
lower neighbour opens a component (a minimum); a vertex touching m >= 2
components closes m - 1 of them through a chain of binary saddles, the elder
component (earliest birth) surviving each merge.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from lossscape._io import fmt_float

__all__ = [
    "TreeNode",
    "MergeRecord",
    "MergeTree",
    "PersistencePair",
    "PersistenceDiagram",
    "TopologyError",
    "sweep_order",
    "compute_topology",
    "merge_tree",
    "persistence_diagram",
]

MINIMUM, SADDLE, ROOT = "min", "saddle", "root"


class TopologyError(ValueError):
    pass


@dataclass(frozen=True)
class TreeNode:
    id: int
    vertex: int
    value: float
    kind: str


@dataclass(frozen=True)
class MergeRecord:
    """One binary merge: the two components (named by their birth vertex) and the survivor."""

    saddle: int
    left: int
    right: int
    survivor: int


@dataclass(frozen=True)
class MergeTree:
    nodes: tuple[TreeNode, ...]
    parent: tuple[int, ...]  # node id -> parent node id, -1 for roots
    merges: tuple[MergeRecord, ...]

    @property
    def n_minima(self):
        return sum(1 for nd in self.nodes if nd.kind == MINIMUM)

    @property
    def n_saddles(self):
        return sum(1 for nd in self.nodes if nd.kind == SADDLE)

    @property
    def n_roots(self):
        return sum(1 for nd in self.nodes if nd.kind == ROOT)

    def edges(self):
        return [(i, p) for i, p in enumerate(self.parent) if p >= 0]

    def degrees(self):
        deg = np.zeros(len(self.nodes), dtype=np.int64)
        for child, par in self.edges():
            deg[child] += 1
            deg[par] += 1
        return deg

    def to_json(self):
        return {
            "nodes": [
                {"id": nd.id, "vertex": nd.vertex, "value": nd.value, "kind": nd.kind}
                for nd in self.nodes
            ],
            "edges": [[c, p] for c, p in self.edges()],
        }

    def to_dot(self, name="merge_tree"):
        """Graphviz description; node labels carry kind and value."""
        out = io.StringIO()
        out.write(f"digraph {name} {{\n  rankdir=BT;\n")
        shapes = {MINIMUM: "circle", SADDLE: "diamond", ROOT: "box"}
        for nd in self.nodes:
            out.write(
                f'  n{nd.id} [label="{nd.kind} v{nd.vertex}\\n{nd.value:.6g}", '
                f"shape={shapes[nd.kind]}];\n"
            )
        for c, p in self.edges():
            out.write(f"  n{c} -> n{p};\n")
        out.write("}\n")
        return out.getvalue()


@dataclass(frozen=True)
class PersistencePair:
    birth: float
    death: float
    birth_vertex: int
    death_vertex: int
    essential: bool = False

    @property
    def persistence(self):
        return self.death - self.birth


@dataclass(frozen=True)
class PersistenceDiagram:
    pairs: tuple[PersistencePair, ...]
    field_min: float
    field_max: float

    @property
    def finite(self):
        return [p for p in self.pairs if not p.essential]

    @property
    def essential(self):
        return [p for p in self.pairs if p.essential]

    def persistences(self, include_essential=True):
        return np.array([p.persistence for p in self.pairs
                         if include_essential or not p.essential], dtype=np.float64)

    def to_csv(self):
        out = io.StringIO()
        out.write("birth,death,essential\n")
        for p in self.pairs:
            out.write(f"{fmt_float(p.birth)},{fmt_float(p.death)},{int(p.essential)}\n")
        return out.getvalue()


def sweep_order(values):
    """Vertex indices in ascending (value, index) order."""
    values = np.asarray(values)
    return np.lexsort((np.arange(values.size), values))


def compute_topology(field):
    """Return ``(MergeTree, PersistenceDiagram)`` for one sweep over ``field``."""
    n = field.n_vertices
    if n == 0:
        raise TopologyError("empty field")
    values = field.values
    vals = values.tolist()
    adj = field.adjacency_lists()
    order = sweep_order(values).tolist()
    rank = [0] * n
    for r, v in enumerate(order):
        rank[v] = r

    uf = list(range(n))
    done = [False] * n
    birth = {}   # uf root -> birth vertex of the component
    head = {}    # uf root -> current top tree node of the component
    top = {}     # uf root -> last vertex swept into the component

    nodes = []
    parent = []
    merges = []
    pairs = []

    def find(x):
        while uf[x] != x:
            uf[x] = uf[uf[x]]
            x = uf[x]
        return x

    def new_node(vertex, kind):
        nodes.append(TreeNode(len(nodes), vertex, vals[vertex], kind))
        parent.append(-1)
        return len(nodes) - 1

    for v in order:
        roots = {find(u) for u in adj[v] if done[u]}
        done[v] = True
        if not roots:
            birth[v] = v
            head[v] = new_node(v, MINIMUM)
            top[v] = v
            continue
        comps = sorted(roots, key=lambda r: birth[r])
        acc = comps[0]
        for r in comps[1:]:
            s = new_node(v, SADDLE)
            parent[head[acc]] = s
            parent[head[r]] = s
            if rank[birth[acc]] < rank[birth[r]]:
                elder, younger = acc, r
            else:
                elder, younger = r, acc
            merges.append(MergeRecord(s, birth[acc], birth[r], birth[elder]))
            pairs.append(PersistencePair(vals[birth[younger]], vals[v], birth[younger], v))
            uf[younger] = elder
            head[elder] = s
            for table in (birth, head, top):
                table.pop(younger, None)
            acc = elder
        uf[v] = acc
        top[acc] = v

    essential = []
    for r in sorted(birth, key=lambda r: rank[birth[r]]):
        root = new_node(top[r], ROOT)
        parent[head[r]] = root
        essential.append(PersistencePair(vals[birth[r]], vals[top[r]], birth[r], top[r], True))

    tree = MergeTree(tuple(nodes), tuple(parent), tuple(merges))
    diagram = PersistenceDiagram(tuple(pairs + essential), float(values.min()), float(values.max()))
    return tree, diagram


def merge_tree(field):
    return compute_topology(field)[0]


def persistence_diagram(field):
    return compute_topology(field)[1]
