"""Exact minimum-edge-weight directed spanning trees over a complete graph.

The solver is a Chu-Liu-Edmonds implementation with recursive cycle
contraction. Structural constraints (required edges, forbidden edges, forced
root) are applied by edge-pool surgery before solving: forcing an edge deletes
every competing in-edge of its head, forbidding deletes the edge, forcing a
root deletes the root's in-edges. No big-M weight tricks are used, so returned
totals are exact sums of the input weights.

Tie-breaking among equally scoring trees is a deterministic scan-order
convention (edges examined sorted by (head, tail), root candidates in
ascending index order) and is documented as arbitrary.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

__all__ = [
    "DirectedTree",
    "EdgeConstraintSet",
    "InfeasibleConstraintError",
    "min_arborescence",
    "brute_force_arborescence",
    "second_best_trees",
    "tree_to_json",
    "tree_to_dot",
    "tree_from_json",
]


class InfeasibleConstraintError(ValueError):
    """No directed spanning tree satisfies the constraint set."""


@dataclass(frozen=True)
class DirectedTree:
    """A rooted directed spanning tree: every node has at most one parent.

    ``parent[i]`` is the parent index of node i, or None for the unique root.
    """

    parent: tuple

    def __post_init__(self):
        parent = tuple(self.parent)
        object.__setattr__(self, "parent", parent)
        p = len(parent)
        roots = [i for i, pa in enumerate(parent) if pa is None]
        if len(roots) != 1:
            raise ValueError(f"tree must have exactly one root, found {len(roots)}")
        for i, pa in enumerate(parent):
            if pa is not None and (not 0 <= pa < p or pa == i):
                raise ValueError(f"invalid parent {pa} for node {i}")
        # every node must reach the root by following parents (no cycles)
        root = roots[0]
        for i in range(p):
            node, steps = i, 0
            while parent[node] is not None:
                node = parent[node]
                steps += 1
                if steps > p:
                    raise ValueError("parent assignment contains a cycle")
            if node != root:
                raise ValueError("graph is not connected")

    @property
    def p(self) -> int:
        return len(self.parent)

    @property
    def root(self) -> int:
        return next(i for i, pa in enumerate(self.parent) if pa is None)

    def edges(self) -> list:
        """Edges (tail, head) sorted by head index."""
        return [(pa, i) for i, pa in enumerate(self.parent) if pa is not None]

    @staticmethod
    def from_edges(p: int, edges) -> "DirectedTree":
        parent = [None] * p
        for j, i in edges:
            if parent[i] is not None:
                raise ValueError(f"node {i} has two parents")
            parent[i] = j
        return DirectedTree(tuple(parent))

    def ancestors(self, i: int) -> set:
        out = set()
        node = self.parent[i]
        while node is not None:
            out.add(node)
            node = self.parent[node]
        return out


@dataclass(frozen=True)
class EdgeConstraintSet:
    """Substructure constraints: required edges, forbidden edges, optional root.

    Edges are (tail, head) index pairs. Required edges must have distinct
    heads (a node keeps at most one parent), must not overlap the forbidden
    set, and a forced root cannot be the head of a required edge.
    """

    required: frozenset = frozenset()
    forbidden: frozenset = frozenset()
    root: int | None = None

    def __post_init__(self):
        req = frozenset((int(j), int(i)) for j, i in self.required)
        forb = frozenset((int(j), int(i)) for j, i in self.forbidden)
        object.__setattr__(self, "required", req)
        object.__setattr__(self, "forbidden", forb)
        for j, i in req | forb:
            if j == i:
                raise ValueError(f"self-loop constraint ({j}->{i})")
        heads = [i for _, i in req]
        if len(heads) != len(set(heads)):
            raise ValueError("required edges must have distinct heads")
        if req & forb:
            raise ValueError(f"edges both required and forbidden: {sorted(req & forb)}")
        if self.root is not None and self.root in set(heads):
            raise ValueError(f"root {self.root} cannot have a required in-edge")

    def is_empty(self) -> bool:
        return not self.required and not self.forbidden and self.root is None

    def satisfied_by(self, tree: DirectedTree) -> bool:
        edges = set(tree.edges())
        return (
            self.required <= edges
            and not (self.forbidden & edges)
            and (self.root is None or tree.root == self.root)
        )


def _weight_array(w) -> np.ndarray:
    mat = getattr(w, "matrix", w)
    mat = np.asarray(mat, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError(f"weight matrix must be square, got shape {mat.shape}")
    off = ~np.eye(mat.shape[0], dtype=bool)
    if not np.all(np.isfinite(mat[off])):
        raise ValueError("off-diagonal weights must be finite")
    return mat


def _surgery(p: int, c: EdgeConstraintSet) -> np.ndarray:
    """Boolean (tail, head) availability mask after constraint surgery."""
    avail = ~np.eye(p, dtype=bool)
    for j, i in sorted(c.forbidden):
        avail[j, i] = False
    for j, i in sorted(c.required):
        avail[:, i] = False
        avail[j, i] = True
    if c.root is not None:
        avail[:, c.root] = False
    return avail


def _tree_total(w: np.ndarray, parent) -> float:
    """Canonical total: sum of w[parent[i], i] in ascending head order."""
    total = np.float64(0.0)
    for i, pa in enumerate(parent):
        if pa is not None:
            total = total + np.float64(w[pa, i])
    return float(total)


# An edge record is (tail, head, weight, edge_id) where edge_id stays equal to
# the original top-level (tail, head) pair through every contraction.


def _cle_recurse(nodes: set, edges: list, root: int):
    """Returns the set of original edge ids of a minimum arborescence of the
    (possibly contracted) graph, or None if none spans it."""
    best = {}  # head -> record; scan sorted by (head, tail) with strict <
    for rec in sorted(edges, key=lambda e: (e[1], e[0])):
        tail, head, wt, _ = rec
        if head == root or tail == head:
            continue
        if head not in best or wt < best[head][2]:
            best[head] = rec
    for node in nodes:
        if node != root and node not in best:
            return None  # starved node: no available in-edge

    # find a cycle among the selected in-edges, if any
    cycle = None
    color = {}
    for start in nodes:
        if start == root or color.get(start) is not None:
            continue
        path = []
        node = start
        while node != root and color.get(node) is None:
            color[node] = "gray"
            path.append(node)
            node = best[node][0]
        if node != root and color.get(node) == "gray":
            cycle = path[path.index(node):]
        for v in path:
            color[v] = "black"
        if cycle is not None:
            break

    if cycle is None:
        return {rec[3] for rec in best.values()}

    # contract the cycle into a fresh super-node
    cyc = set(cycle)
    super_node = max(nodes) + 1
    new_nodes = (nodes - cyc) | {super_node}
    cycle_rec_of = {head: best[head] for head in cyc}
    new_edges = []
    entering = {}  # tail -> (adjusted weight, record)
    for rec in edges:
        tail, head, wt, eid = rec
        if tail in cyc and head in cyc:
            continue
        if head in cyc:
            adj = wt - cycle_rec_of[head][2]
            prev = entering.get(tail)
            if prev is None or adj < prev[0]:
                entering[tail] = (adj, rec)
        elif tail in cyc:
            new_edges.append((super_node, head, wt, eid))
        else:
            new_edges.append(rec)
    entering_head_by_id = {}
    for tail in sorted(entering):
        adj, rec = entering[tail]
        new_edges.append((tail, super_node, adj, rec[3]))
        entering_head_by_id[rec[3]] = rec[1]

    sub_ids = _cle_recurse(new_nodes, new_edges, root)
    if sub_ids is None:
        return None

    # exactly one chosen id enters the contracted cycle; its original head's
    # cycle edge is the one to drop
    broken_head = None
    for eid in sub_ids:
        if eid in entering_head_by_id:
            broken_head = entering_head_by_id[eid]
            break
    chosen = set(sub_ids)
    for head in cyc:
        if head != broken_head:
            chosen.add(cycle_rec_of[head][3])
    return chosen


def _cle_fixed_root(w: np.ndarray, avail: np.ndarray, root: int):
    """Chu-Liu-Edmonds for a fixed root on the masked edge pool; returns a
    parent list or None if no spanning arborescence exists."""
    p = w.shape[0]
    edges = [
        (j, i, float(w[j, i]), (j, i))
        for i in range(p)
        for j in range(p)
        if avail[j, i] and i != root
    ]
    ids = _cle_recurse(set(range(p)), edges, root)
    if ids is None:
        return None
    parent = [None] * p
    for j, i in ids:
        parent[i] = j
    return parent


def min_arborescence(w, c: EdgeConstraintSet | None = None):
    """Minimum-total directed spanning tree of the complete graph on p nodes.

    ``w`` is a (p, p) weight array (or any object with a ``.matrix``
    attribute); entry (j, i) is the weight of edge j -> i, the diagonal is
    ignored. Constraints are applied by edge-pool surgery. Returns
    (DirectedTree, total) with the total computed as the exact sum of chosen
    entries of ``w``.
    """
    mat = _weight_array(w)
    p = mat.shape[0]
    if p < 2:
        raise ValueError("need at least 2 nodes")
    c = c or EdgeConstraintSet()
    for j, i in c.required | c.forbidden:
        if not (0 <= j < p and 0 <= i < p):
            raise ValueError(f"constraint edge ({j}->{i}) out of range for p={p}")
    if c.root is not None and not 0 <= c.root < p:
        raise ValueError(f"root {c.root} out of range for p={p}")

    avail = _surgery(p, c)
    required_heads = {i for _, i in c.required}
    if c.root is not None:
        root_candidates = [c.root]
    else:
        root_candidates = [r for r in range(p) if r not in required_heads]
    if not root_candidates:
        raise InfeasibleConstraintError("every node has a required in-edge; no root is possible")

    best_parent, best_total = None, None
    for r in root_candidates:
        if any(not avail[:, i].any() for i in range(p) if i != r):
            continue
        parent = _cle_fixed_root(mat, avail, r)
        if parent is None:
            continue
        total = _tree_total(mat, parent)
        if best_total is None or total < best_total:
            best_parent, best_total = parent, total
    if best_parent is None:
        raise InfeasibleConstraintError(_diagnose_infeasibility(p, avail, root_candidates))
    return DirectedTree(tuple(best_parent)), best_total


def _diagnose_infeasibility(p: int, avail: np.ndarray, root_candidates) -> str:
    starved = [i for i in range(p) if not avail[:, i].any()]
    if len(starved) > 1 or (starved and starved[0] not in root_candidates):
        return f"nodes {starved} have no available in-edge under the constraints"
    return (
        "no spanning tree satisfies the constraints "
        "(required edges form a cycle or disconnect the graph)"
    )


def brute_force_arborescence(w, c: EdgeConstraintSet | None = None):
    """Exhaustive oracle: enumerate every rooted parent assignment (p <= 7),
    filter to valid constrained trees, return the minimum-total one.

    Ties are broken by the lexicographically least parent array (root encoded
    as -1). Totals use the same canonical summation order as
    ``min_arborescence`` so agreeing trees produce bit-identical totals.
    """
    mat = _weight_array(w)
    p = mat.shape[0]
    if p > 7:
        raise ValueError(f"brute force limited to p <= 7, got {p}")
    c = c or EdgeConstraintSet()

    best = None  # (total, lexicographic key, tree)
    for root in range(p):
        others = [i for i in range(p) if i != root]
        choices = [[j for j in range(p) if j != i] for i in others]
        for combo in itertools.product(*choices):
            parent = [None] * p
            for i, j in zip(others, combo):
                parent[i] = j
            if not _is_tree(parent, root):
                continue
            tree = DirectedTree(tuple(parent))
            if not c.satisfied_by(tree):
                continue
            total = _tree_total(mat, parent)
            key = tuple(-1 if pa is None else pa for pa in parent)
            if best is None or total < best[0] or (total == best[0] and key < best[1]):
                best = (total, key, tree)
    if best is None:
        raise InfeasibleConstraintError("no tree satisfies the constraints")
    return best[2], best[0]


def _is_tree(parent, root) -> bool:
    p = len(parent)
    for i in range(p):
        node, steps = i, 0
        while parent[node] is not None:
            node = parent[node]
            steps += 1
            if steps > p:
                return False
        if node != root:
            return False
    return True


def second_best_trees(w):
    """All p-1 one-edge-removal re-solves of the optimum, sorted by total.

    The first entry is the second-best scoring tree: the optimum among trees
    forbidden to use one of the best tree's edges.
    """
    mat = _weight_array(w)
    best_tree, _ = min_arborescence(mat)
    results = []
    for edge in best_tree.edges():
        tree, total = min_arborescence(mat, EdgeConstraintSet(forbidden=frozenset({edge})))
        results.append((tree, total))
    results.sort(key=lambda pair: (pair[1], pair[0].edges()))
    return results


def tree_to_json(tree: DirectedTree, names=None) -> dict:
    names = names or [f"X{i + 1}" for i in range(tree.p)]
    return {
        "root": names[tree.root],
        "edges": [{"from": names[j], "to": names[i]} for j, i in tree.edges()],
    }


def tree_from_json(obj: dict, names) -> DirectedTree:
    idx = {name: i for i, name in enumerate(names)}
    edges = [(idx[e["from"]], idx[e["to"]]) for e in obj["edges"]]
    tree = DirectedTree.from_edges(len(names), edges)
    if names[tree.root] != obj["root"]:
        raise ValueError(f"edge list implies root {names[tree.root]!r}, header says {obj['root']!r}")
    return tree


def tree_to_dot(tree: DirectedTree, names=None) -> str:
    names = names or [f"X{i + 1}" for i in range(tree.p)]
    lines = ["digraph tree {"]
    for j, i in tree.edges():
        lines.append(f'  "{names[j]}" -> "{names[i]}";')
    lines.append("}")
    return "\n".join(lines) + "\n"
