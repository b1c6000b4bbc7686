"""Rooted class taxonomies: depth, LCA, Wu-Palmer similarity, depth cuts.

A taxonomy is loaded from an edge list (one `child<TAB>parent` line per
node, `-` as the parent token marking the root) and is immutable after
construction.  Depth is 1 at the root and parent depth + 1 below it, so
Wu-Palmer similarity

    wup(a, b) = 2 * depth(lca(a, b)) / (depth(a) + depth(b))

is always in (0, 1] and equals 1 exactly when a == b.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import NamedTuple

from .errors import (
    CycleDetected,
    DuplicateChild,
    EmptyTaxonomy,
    MultipleRoots,
    NoIntraPairs,
    OrphanNode,
    SingleCluster,
    TaxonomyFormatError,
    UnknownClass,
)


@dataclass(frozen=True)
class Taxonomy:
    """Immutable rooted tree over class identifiers."""

    root: str
    parent: dict[str, str]          # child -> parent; root absent
    depth: dict[str, int]           # root has depth 1
    children: dict[str, list[str]] = field(repr=False)

    @property
    def nodes(self) -> set[str]:
        return set(self.depth)

    def leaves(self) -> list[str]:
        """Nodes with no children, ascending by identifier."""
        return sorted(n for n in self.depth if not self.children.get(n))

    def require(self, name: str) -> None:
        if name not in self.depth:
            raise UnknownClass(f"class '{name}' not in taxonomy")

    def ancestors(self, name: str) -> list[str]:
        """Chain from the node up to the root, inclusive on both ends."""
        self.require(name)
        chain = [name]
        while chain[-1] != self.root:
            chain.append(self.parent[chain[-1]])
        return chain


@dataclass(frozen=True)
class Clustering:
    """Dense assignment of class identifiers to cluster indices 0..k-1."""

    assignment: dict[str, int]
    k: int

    def __post_init__(self):
        used = set(self.assignment.values())
        if used != set(range(self.k)):
            raise ValueError(
                f"cluster indices must be exactly 0..{self.k - 1}, got {sorted(used)}"
            )

    def members(self) -> list[list[str]]:
        out: list[list[str]] = [[] for _ in range(self.k)]
        for name in sorted(self.assignment):
            out[self.assignment[name]].append(name)
        return out

    def sizes(self) -> list[int]:
        counts = [0] * self.k
        for idx in self.assignment.values():
            counts[idx] += 1
        return counts


def load_taxonomy(text: str) -> Taxonomy:
    """Parse and validate an edge-list document.

    Raises CycleDetected, MultipleRoots, OrphanNode, DuplicateChild or
    TaxonomyFormatError; each message names the offending node.
    """
    parent: dict[str, str] = {}
    roots: list[str] = []
    for lineno, raw in enumerate(io.StringIO(text), start=1):
        line = raw.rstrip("\n").rstrip("\r")
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 2 or not parts[0] or not parts[1]:
            raise TaxonomyFormatError(f"line {lineno}: expected 'child<TAB>parent'")
        child, par = parts
        if child in parent or child in roots:
            raise DuplicateChild(f"node '{child}' declared twice")
        if par == "-" or par == child:
            roots.append(child)
        else:
            parent[child] = par
    if len(roots) > 1:
        raise MultipleRoots(f"multiple roots declared: {', '.join(sorted(roots))}")
    if not roots and not parent:
        raise TaxonomyFormatError("empty document")

    nodes = set(parent) | set(roots)
    for child in sorted(parent):
        if parent[child] not in nodes:
            raise OrphanNode(
                f"node '{child}' has undeclared parent '{parent[child]}'"
            )
    if not roots:
        # every node has an in-tree parent, so some parent chain must loop
        raise CycleDetected(f"no root declared; node '{_find_cycle_node(parent)}' lies on a cycle")
    root = roots[0]

    depth: dict[str, int] = {root: 1}
    for start in sorted(nodes):
        if start in depth:
            continue
        chain = []
        node = start
        while node not in depth:
            if node in chain:
                raise CycleDetected(f"node '{node}' lies on a cycle")
            chain.append(node)
            node = parent[node]
        base = depth[node]
        for offset, name in enumerate(reversed(chain), start=1):
            depth[name] = base + offset

    children: dict[str, list[str]] = {n: [] for n in nodes}
    for child in sorted(parent):
        children[parent[child]].append(child)
    return Taxonomy(root=root, parent=dict(parent), depth=depth, children=children)


def _find_cycle_node(parent: dict[str, str]) -> str:
    seen_global: set[str] = set()
    for start in sorted(parent):
        if start in seen_global:
            continue
        chain: list[str] = []
        node = start
        while node not in seen_global and node in parent:
            if node in chain:
                return node
            chain.append(node)
            node = parent[node]
        seen_global.update(chain)
    return min(parent)  # unreachable for well-formed callers


def load_taxonomy_file(path) -> Taxonomy:
    with open(path, "r", encoding="utf-8") as fh:
        return load_taxonomy(fh.read())


def lca(t: Taxonomy, c1: str, c2: str) -> str:
    """Deepest node that is an ancestor-or-self of both classes."""
    t.require(c1)
    t.require(c2)
    seen = set(t.ancestors(c1))
    node = c2
    while node not in seen:
        node = t.parent[node]
    return node


def wup(t: Taxonomy, c1: str, c2: str) -> float:
    """Wu-Palmer similarity; in (0, 1], 1 iff the classes coincide."""
    anc = lca(t, c1, c2)
    return 2.0 * t.depth[anc] / (t.depth[c1] + t.depth[c2])


def depth_cut(t: Taxonomy, k_target: int) -> Clustering:
    """Cluster leaves by their ancestor at a fixed depth.

    Scans every depth, assigns each leaf to its ancestor at that depth
    (leaves shallower than the cut keep themselves), and keeps the depth
    whose nonempty-cluster count is closest to `k_target`; ties pick the
    shallower cut.  Cluster indices are dense, ordered by each cluster's
    smallest member identifier.
    """
    if k_target < 1:
        raise ValueError("k_target must be >= 1")
    leaves = t.leaves()
    if not leaves or len(leaves) < k_target:
        raise EmptyTaxonomy(
            f"taxonomy has {len(leaves)} leaves; cannot target {k_target} clusters"
        )
    max_depth = max(t.depth.values())
    best_depth = None
    best_count = None
    for d in range(1, max_depth + 1):
        count = len({_ancestor_at_depth(t, leaf, d) for leaf in leaves})
        if best_count is None or abs(count - k_target) < abs(best_count - k_target):
            best_depth, best_count = d, count
    groups: dict[str, list[str]] = {}
    for leaf in leaves:
        groups.setdefault(_ancestor_at_depth(t, leaf, best_depth), []).append(leaf)
    ordered = sorted(groups.values(), key=min)
    assignment = {
        leaf: idx for idx, members in enumerate(ordered) for leaf in members
    }
    return Clustering(assignment=assignment, k=len(ordered))


def _ancestor_at_depth(t: Taxonomy, node: str, d: int) -> str:
    if t.depth[node] <= d:
        return node
    while t.depth[node] > d:
        node = t.parent[node]
    return node


class CoherenceReport(NamedTuple):
    wup_intra: float
    wup_inter: float
    gap: float


def coherence(t: Taxonomy, c: Clustering) -> CoherenceReport:
    """Mean Wu-Palmer similarity over same-cluster and cross-cluster pairs.

    Both means run over unordered pairs, accumulated in ascending
    (class-id, class-id) lexicographic order so results are reproducible
    bit for bit.
    """
    if c.k < 2:
        raise SingleCluster("coherence needs at least two clusters")
    names = sorted(c.assignment)
    for name in names:
        t.require(name)
    intra_sum = inter_sum = 0.0
    intra_n = inter_n = 0
    for i, a in enumerate(names):
        ca = c.assignment[a]
        for b in names[i + 1:]:
            s = wup(t, a, b)
            if ca == c.assignment[b]:
                intra_sum += s
                intra_n += 1
            else:
                inter_sum += s
                inter_n += 1
    if intra_n == 0:
        raise NoIntraPairs("every cluster is a singleton")
    intra = intra_sum / intra_n
    inter = inter_sum / inter_n
    return CoherenceReport(wup_intra=intra, wup_inter=inter, gap=intra - inter)


def dump_clustering(c: Clustering) -> str:
    """Render `class_id,cluster_id` CSV, rows ascending by class id."""
    lines = ["class_id,cluster_id"]
    for name in sorted(c.assignment):
        lines.append(f"{name},{c.assignment[name]}")
    return "\n".join(lines) + "\n"


def parse_clustering(text: str) -> Clustering:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != "class_id,cluster_id":
        raise TaxonomyFormatError("clustering CSV must start with 'class_id,cluster_id'")
    assignment: dict[str, int] = {}
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != 2:
            raise TaxonomyFormatError(f"line {lineno}: expected 'class_id,cluster_id'")
        name, idx = parts[0], parts[1]
        if name in assignment:
            raise TaxonomyFormatError(f"line {lineno}: class '{name}' repeated")
        try:
            assignment[name] = int(idx)
        except ValueError:
            raise TaxonomyFormatError(f"line {lineno}: bad cluster index '{idx}'") from None
    if not assignment:
        raise TaxonomyFormatError("clustering CSV has no rows")
    return Clustering(assignment=assignment, k=max(assignment.values()) + 1)
