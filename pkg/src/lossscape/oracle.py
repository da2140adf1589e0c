"""Brute-force reference for sub-level set topology.

Nothing here shares code with :mod:`lossscape.topology`: every threshold gets
a fresh breadth-first labelling of ``{x : value(x) <= v}``, and pairs are read
off from how the labelled components change between consecutive thresholds.
Quadratic-ish in the vertex count; meant for small fields only.
"""

from __future__ import annotations

from collections import Counter, deque
from dataclasses import dataclass

import numpy as np

__all__ = [
    "flood_fill_components",
    "count_components",
    "OracleResult",
    "brute_force_topology",
    "alive_count",
    "grid_local_minima",
    "random_grid_field",
    "check_field",
    "run_oracle_suite",
]


def _neighbor_sets(n, edges):
    nbrs = [set() for _ in range(n)]
    for a, b in np.asarray(edges).tolist():
        nbrs[a].add(b)
        nbrs[b].add(a)
    return nbrs


def flood_fill_components(mask, nbrs):
    """Label connected components of the vertices where ``mask`` is true (-1 elsewhere)."""
    n = len(mask)
    label = [-1] * n
    ncomp = 0
    for s in range(n):
        if not mask[s] or label[s] >= 0:
            continue
        label[s] = ncomp
        queue = deque([s])
        while queue:
            x = queue.popleft()
            for y in nbrs[x]:
                if mask[y] and label[y] < 0:
                    label[y] = ncomp
                    queue.append(y)
        ncomp += 1
    return label, ncomp


def count_components(field, threshold):
    nbrs = _neighbor_sets(field.n_vertices, field.edges)
    mask = (field.values <= threshold).tolist()
    return flood_fill_components(mask, nbrs)[1]


@dataclass
class OracleResult:
    pairs: list          # (birth, death, essential) tuples
    n_births: int
    n_merges: int        # binary merges: sum over merge events of (parts - 1)
    n_components: int


def brute_force_topology(field):
    """Persistence pairs from component changes across all thresholds.

    Requires pairwise distinct values (each threshold then adds one vertex).
    At a merge, every part except the one holding the smallest value dies.
    """
    values = np.asarray(field.values, dtype=np.float64)
    n = values.size
    if np.unique(values).size != n:
        raise ValueError("oracle needs distinct values")
    nbrs = _neighbor_sets(n, field.edges)
    prev_label = [-1] * n
    prev_min = {}
    pairs = []
    births = merges = 0
    for v in np.sort(values):
        mask = (values <= v).tolist()
        label, ncomp = flood_fill_components(mask, nbrs)
        comp_min = {}
        for x in range(n):
            if label[x] >= 0:
                c = label[x]
                comp_min[c] = min(comp_min.get(c, np.inf), values[x])
        parts = {}
        for x in range(n):
            if prev_label[x] >= 0:
                parts.setdefault(label[x], set()).add(prev_label[x])
        for c in range(ncomp):
            old = parts.get(c, set())
            if not old:
                births += 1
            elif len(old) > 1:
                mins = sorted(prev_min[o] for o in old)
                merges += len(old) - 1
                pairs.extend((b, float(v), False) for b in mins[1:])
        prev_label, prev_min = label, comp_min
    for c in range(ncomp):
        members = [x for x in range(n) if prev_label[x] == c]
        pairs.append((comp_min[c], float(values[members].max()), True))
    return OracleResult(pairs, births, merges, ncomp)


def alive_count(diagram, v):
    """Components alive at threshold ``v`` according to a diagram."""
    alive = 0
    for p in diagram.pairs:
        if p.birth <= v and (p.essential or v < p.death):
            alive += 1
    return alive


def grid_local_minima(values):
    """Cells of a 2D array that are below all of their 8 neighbours (strict)."""
    a = np.asarray(values, dtype=np.float64)
    padded = np.pad(a, 1, constant_values=np.inf)
    rows, cols = a.shape
    is_min = np.ones_like(a, dtype=bool)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di == dj == 0:
                continue
            nb = padded[1 + di:1 + di + rows, 1 + dj:1 + dj + cols]
            is_min &= a < nb
    return np.argwhere(is_min)


def random_grid_field(rng, rows=6, cols=6):
    """Grid field with i.i.d. uniform values, redrawn until pairwise distinct."""
    from lossscape.field import build_image_grid

    while True:
        vals = rng.uniform(size=(rows, cols))
        if np.unique(vals).size == vals.size:
            return build_image_grid(vals)


def check_field(field):
    """Compare the sweep against the oracle on one field; returns a list of failures."""
    from lossscape.topology import compute_topology

    tree, diagram = compute_topology(field)
    ref = brute_force_topology(field)
    problems = []
    got = Counter((p.birth, p.death, p.essential) for p in diagram.pairs)
    if got != Counter(ref.pairs):
        problems.append("pair multiset differs")
    if tree.n_minima != ref.n_births:
        problems.append(f"minima {tree.n_minima} != {ref.n_births}")
    if tree.n_saddles != ref.n_merges:
        problems.append(f"saddles {tree.n_saddles} != {ref.n_merges}")
    if tree.n_roots != ref.n_components:
        problems.append(f"roots {tree.n_roots} != {ref.n_components}")
    return problems


def run_oracle_suite(n_fields=1000, seed=0, rows=6, cols=6):
    """Check ``n_fields`` random grid fields; returns ``(n_failed, first_failures)``."""
    rng = np.random.default_rng(seed)
    failed = []
    for i in range(n_fields):
        problems = check_field(random_grid_field(rng, rows, cols))
        if problems:
            failed.append((i, problems))
    return len(failed), failed[:5]
