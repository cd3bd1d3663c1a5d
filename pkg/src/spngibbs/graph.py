"""Tree-structured sum-product network graphs.

A graph is a rooted tree of three node kinds: sum nodes mix their children
with a weight vector, product nodes factorize disjoint scopes, and leaf nodes
carry a univariate distribution family over one data dimension.  The module
provides

* :func:`build_balanced` — the standard balanced-tree construction used
  throughout the package,
* :func:`validate` — structural checks (completeness, decomposability,
  alternation, outdegrees),
* :func:`closed_form_sizes` — exact node/height/breadth counts for the two
  canonical tree shapes, as integers,
* :func:`count_induced_trees` — exact enumeration of the induced-tree count,
* :func:`eval_nodes` / :func:`eval_log_density` — log-domain bottom-up
  evaluation with marginalization of missing dimensions,
* :func:`serialize` / :func:`deserialize` — versioned JSON round-trip.

All density work is carried out in the log domain; sums are combined with a
stable log-sum-exp.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import GraphFormatError

SUM = 0
PRODUCT = 1
LEAF = 2

_KIND_TAGS = {SUM: "sum", PRODUCT: "product", LEAF: "leaf"}
_TAG_KINDS = {v: k for k, v in _KIND_TAGS.items()}

FORMAT_NAME = "spngibbs-graph"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class Node:
    """One graph node.

    ``scope`` is the sorted tuple of data dimensions the node covers.  Leaf
    nodes have ``dim`` set (and scope ``(dim,)``) plus a ``family`` tag such
    as ``"gaussian"`` or ``"categorical:3"``; internal nodes carry a
    ``children`` tuple of node ids.
    """

    kind: int
    scope: tuple[int, ...]
    children: tuple[int, ...] = ()
    dim: int = -1
    family: str = ""


@dataclass(frozen=True)
class SizeReport:
    """Exact size summary of a graph.

    ``height`` counts the *nodes* on the longest root-to-leaf path (root and
    leaf included), so a root-sum/product/sum/leaf chain has height 4.
    ``breadth`` is the largest number of nodes at any single depth.
    ``induced_trees`` is the exact number of induced trees (one child chosen
    at every reachable sum node), as an arbitrary-precision integer.
    """

    num_sums: int
    num_products: int
    num_leaves: int
    num_nodes: int
    height: int
    breadth: int
    induced_trees: int

    def __post_init__(self):
        if self.num_sums + self.num_products + self.num_leaves != self.num_nodes:
            raise ValueError("node counts are inconsistent")


@dataclass
class InducedTree:
    """Result of resolving one assignment vector to its induced tree.

    ``leaf_by_dim[d]`` is the node id of the single leaf selected for data
    dimension ``d``; ``sum_ids`` lists the in-tree sum node ids in visit
    order; ``nodes_visited`` counts every node touched by the walk.
    """

    leaf_by_dim: np.ndarray
    sum_ids: list[int]
    nodes_visited: int


class SpnGraph:
    """Immutable tree-structured SPN.

    Parameters
    ----------
    nodes : sequence of Node
        Node table; ids are positions in this sequence.
    root : int
        Id of the root node (must be a sum node for valid graphs).
    dims : int
        Number of data dimensions.
    sum_outdegree, product_outdegree : int
        The declared outdegrees the graph was built for; :func:`validate`
        checks nodes against these.
    """

    def __init__(self, nodes, root, dims, sum_outdegree, product_outdegree):
        self.nodes = tuple(nodes)
        self.root = int(root)
        self.dims = int(dims)
        self.sum_outdegree = int(sum_outdegree)
        self.product_outdegree = int(product_outdegree)
        self._finalize()

    # -- derived structure -------------------------------------------------

    def _finalize(self):
        V = len(self.nodes)
        self.num_nodes = V
        self.kinds = [n.kind for n in self.nodes]
        self.children = [n.children for n in self.nodes]

        # Sum columns (assignment-vector coordinates) in id order, leaf slots
        # in id order.  Serialization preserves node order, so both mappings
        # survive a round trip.
        self.sum_cols = [-1] * V
        self.leaf_slots = [-1] * V
        sum_ids, leaf_ids = [], []
        for u, n in enumerate(self.nodes):
            if n.kind == SUM:
                self.sum_cols[u] = len(sum_ids)
                sum_ids.append(u)
            elif n.kind == LEAF:
                self.leaf_slots[u] = len(leaf_ids)
                leaf_ids.append(u)
        self.sum_node_ids = np.asarray(sum_ids, dtype=np.int64)
        self.leaf_node_ids = np.asarray(leaf_ids, dtype=np.int64)
        self.num_sums = len(sum_ids)
        self.num_leaves = len(leaf_ids)
        self.num_products = V - self.num_sums - self.num_leaves
        self.leaf_dims = np.asarray(
            [self.nodes[u].dim for u in leaf_ids], dtype=np.int64
        )
        self.leaf_families = [self.nodes[u].family for u in leaf_ids]
        self.leaf_dim_of_node = [-1] * V
        for u in leaf_ids:
            self.leaf_dim_of_node[u] = self.nodes[u].dim

        # Postorder over nodes reachable from the root (children first).
        # Works for any child structure including accidental DAGs/cycles fed
        # to validate(); each node is emitted once.
        order, seen, stack = [], [False] * V, [(self.root, False)]
        while stack:
            u, expanded = stack.pop()
            if expanded:
                order.append(u)
                continue
            if seen[u]:
                continue
            seen[u] = True
            stack.append((u, True))
            for c in self.children[u]:
                if 0 <= c < V and not seen[c]:
                    stack.append((c, False))
        self.postorder = order
        self.internal_postorder = [u for u in order if self.kinds[u] != LEAF]
        self.reachable = seen

        # Depths via BFS (tree assumption; for multi-parent nodes the first
        # visit wins, which is enough for the reports validate() gates on).
        depth = [-1] * V
        depth[self.root] = 0
        frontier = [self.root]
        while frontier:
            nxt = []
            for u in frontier:
                for c in self.children[u]:
                    if 0 <= c < V and depth[c] < 0:
                        depth[c] = depth[u] + 1
                        nxt.append(c)
            frontier = nxt
        self.node_depths = depth

    def __eq__(self, other):
        if not isinstance(other, SpnGraph):
            return NotImplemented
        return (
            self.nodes == other.nodes
            and self.root == other.root
            and self.dims == other.dims
            and self.sum_outdegree == other.sum_outdegree
            and self.product_outdegree == other.product_outdegree
        )

    def __hash__(self):
        return hash((self.nodes, self.root, self.dims))

    def size_report(self) -> SizeReport:
        """Exact sizes of this graph (see :class:`SizeReport`)."""
        reach = [u for u in range(self.num_nodes) if self.reachable[u]]
        height = 1 + max(self.node_depths[u] for u in reach)
        counts = {}
        for u in reach:
            counts[self.node_depths[u]] = counts.get(self.node_depths[u], 0) + 1
        return SizeReport(
            num_sums=self.num_sums,
            num_products=self.num_products,
            num_leaves=self.num_leaves,
            num_nodes=self.num_nodes,
            height=height,
            breadth=max(counts.values()),
            induced_trees=count_induced_trees(self),
        )


# -- construction ----------------------------------------------------------


def _split_scope(scope, product_outdegree):
    """Split a scope into min(product_outdegree, len) contiguous groups, as
    evenly as possible, larger groups first."""
    k = min(product_outdegree, len(scope))
    base, rem = divmod(len(scope), k)
    groups, start = [], 0
    for i in range(k):
        size = base + (1 if i < rem else 0)
        groups.append(scope[start : start + size])
        start += size
    return groups


def build_balanced(dims, sum_outdegree, product_outdegree, leaf_spec=None):
    """Build the balanced tree-structured SPN over ``dims`` dimensions.

    Every sum node over a scope of more than one dimension gets
    ``sum_outdegree`` product children, each splitting the scope into
    ``min(product_outdegree, |scope|)`` contiguous groups as evenly as
    possible (larger groups first); each group is rooted by a recursively
    built sum node.  Sum nodes over a single dimension get ``sum_outdegree``
    leaf children whose families are assigned round-robin from the enabled
    family list for that dimension.

    Parameters
    ----------
    dims : int
        Number of data dimensions, >= 1.
    sum_outdegree, product_outdegree : int
        Children per sum node and maximum children per product node; both
        must be >= 2.
    leaf_spec : sequence of tuple of str, optional
        ``leaf_spec[d]`` lists the family tags enabled for dimension ``d``.
        Defaults to ``("gaussian",)`` everywhere.

    Returns
    -------
    SpnGraph
    """
    if dims < 1:
        raise ValueError("dims must be >= 1")
    if sum_outdegree < 2:
        raise ValueError("sum_outdegree must be >= 2")
    if product_outdegree < 2:
        raise ValueError("product_outdegree must be >= 2")
    if leaf_spec is None:
        leaf_spec = [("gaussian",)] * dims
    if len(leaf_spec) != dims:
        raise ValueError("leaf_spec must list families for every dimension")
    for d, fams in enumerate(leaf_spec):
        if not fams:
            raise ValueError(f"leaf_spec[{d}] is empty")

    nodes: list[Node | None] = []

    def build_sum(scope):
        uid = len(nodes)
        nodes.append(None)
        children = []
        if len(scope) == 1:
            d = scope[0]
            fams = leaf_spec[d]
            for i in range(sum_outdegree):
                cid = len(nodes)
                nodes.append(
                    Node(LEAF, (d,), dim=d, family=fams[i % len(fams)])
                )
                children.append(cid)
        else:
            groups = _split_scope(scope, product_outdegree)
            for _ in range(sum_outdegree):
                pid = len(nodes)
                nodes.append(None)
                part = [build_sum(g) for g in groups]
                nodes[pid] = Node(PRODUCT, tuple(scope), tuple(part))
                children.append(pid)
        nodes[uid] = Node(SUM, tuple(scope), tuple(children))
        return uid

    root = build_sum(tuple(range(dims)))
    return SpnGraph(nodes, root, dims, sum_outdegree, product_outdegree)


# -- validation --------------------------------------------------------------


def validate(graph: SpnGraph) -> list[str]:
    """Check structural invariants; return a list of violation messages.

    An empty list means the graph is a valid tree-structured SPN: single sum
    root, every non-root node has exactly one parent, sum children share their
    parent's scope (completeness), product children have pairwise-disjoint
    scopes whose union is the parent scope (decomposability), sum nodes have
    exactly ``sum_outdegree`` children, product nodes between 2 and
    ``product_outdegree``, children of sums are products or leaves, children
    of products are sums or leaves, and every leaf has a singleton scope with
    a family tag.
    """
    out = []
    V = graph.num_nodes
    nodes = graph.nodes

    if not (0 <= graph.root < V):
        return [f"root id {graph.root} out of range"]
    if nodes[graph.root].kind != SUM:
        out.append(f"node {graph.root}: root must be a sum node")

    parents = {u: 0 for u in range(V)}
    for u in range(V):
        for c in graph.children[u]:
            if not (0 <= c < V):
                out.append(f"node {u}: child id {c} out of range")
            else:
                parents[c] += 1
    for u in range(V):
        if u == graph.root:
            if parents[u] != 0:
                out.append(f"node {u}: root must not have a parent")
        elif not graph.reachable[u]:
            out.append(f"node {u}: unreachable from root")
        elif parents[u] != 1:
            out.append(f"node {u}: has {parents[u]} parents, expected 1")

    for u, n in enumerate(nodes):
        if not graph.reachable[u]:
            continue
        kids = graph.children[u]
        if n.kind == LEAF:
            if kids:
                out.append(f"node {u}: leaf must not have children")
            if n.dim < 0 or n.scope != (n.dim,):
                out.append(f"node {u}: leaf scope must be exactly its dimension")
            if not (0 <= n.dim < graph.dims):
                out.append(f"node {u}: leaf dimension {n.dim} out of range")
            if not n.family:
                out.append(f"node {u}: leaf has no family tag")
            continue
        if n.kind == SUM:
            if len(kids) != graph.sum_outdegree:
                out.append(
                    f"node {u}: sum has {len(kids)} children, "
                    f"expected {graph.sum_outdegree}"
                )
            for c in kids:
                if 0 <= c < V and nodes[c].kind == SUM:
                    out.append(f"node {u}: sum child {c} is a sum node")
                if 0 <= c < V and nodes[c].scope != n.scope:
                    out.append(
                        f"node {u}: child {c} scope {nodes[c].scope} differs "
                        f"from sum scope {n.scope} (completeness)"
                    )
        elif n.kind == PRODUCT:
            if not (2 <= len(kids) <= graph.product_outdegree):
                out.append(
                    f"node {u}: product has {len(kids)} children, expected "
                    f"2..{graph.product_outdegree}"
                )
            seen: set[int] = set()
            union: set[int] = set()
            for c in kids:
                if not (0 <= c < V):
                    continue
                if nodes[c].kind == PRODUCT:
                    out.append(f"node {u}: product child {c} is a product node")
                cs = set(nodes[c].scope)
                if cs & seen:
                    out.append(
                        f"node {u}: children scopes overlap on "
                        f"{sorted(cs & seen)} (decomposability)"
                    )
                seen |= cs
                union |= cs
            if union != set(n.scope):
                out.append(
                    f"node {u}: children scopes union {sorted(union)} differs "
                    f"from product scope {n.scope} (decomposability)"
                )
        else:
            out.append(f"node {u}: unknown kind {n.kind}")
    return out


# -- closed-form sizes -------------------------------------------------------


def _integer_log(value, base):
    """Return k with base**k == value, or None."""
    k, v = 0, 1
    while v < value:
        v *= base
        k += 1
    return k if v == value else None


def closed_form_sizes(dims, sum_outdegree, product_outdegree, shape="complete"):
    """Exact size formulas for the two canonical tree shapes.

    ``shape="complete"`` requires ``dims`` to be an integer power of
    ``product_outdegree``; ``shape="skewed"`` requires
    ``(dims - 1) % (product_outdegree - 1) == 0``.  All values are exact
    integers (Python ints, so arbitrarily large graphs are fine).

    Returns
    -------
    SizeReport
    """
    cs, cp = int(sum_outdegree), int(product_outdegree)
    if dims < 1 or cs < 2 or cp < 2:
        raise ValueError("need dims >= 1 and outdegrees >= 2")
    if dims == 1:
        return SizeReport(1, 0, cs, 1 + cs, 2, cs, cs)

    if shape == "complete":
        k = _integer_log(dims, cp)
        if k is None:
            raise ValueError(
                f"complete shape needs dims to be a power of {cp}, got {dims}"
            )
        q = cp * cs
        num_sums = (q ** (k + 1) - 1) // (q - 1)
        num_products = (cs * q**k - cs) // (q - 1)
        num_leaves = cs * q**k
        height = 2 * k + 2
    elif shape == "skewed":
        if (dims - 1) % (cp - 1) != 0:
            raise ValueError(
                f"skewed shape needs (dims-1) divisible by {cp - 1}, got {dims}"
            )
        k = (dims - 1) // (cp - 1)
        num_sums = (cp * cs ** (k + 1) + (1 - cp) * cs - 1) // (cs - 1)
        num_products = (cs ** (k + 1) - cs) // (cs - 1)
        num_leaves = ((cp * cs - 1) * cs ** (k + 1) + (1 - cp) * cs * cs) // (
            cs - 1
        )
        height = 2 * k + 2
    else:
        raise ValueError(f"unknown shape {shape!r}")

    induced = cs ** (cp * (dims - 1) // (cp - 1) + 1)
    return SizeReport(
        num_sums=num_sums,
        num_products=num_products,
        num_leaves=num_leaves,
        num_nodes=num_sums + num_products + num_leaves,
        height=height,
        breadth=num_leaves,
        induced_trees=induced,
    )


def count_induced_trees(graph: SpnGraph) -> int:
    """Exact number of induced trees, by the product/sum recursion.

    Leaves count 1, products multiply over children, sums add over children.
    Exact integer arithmetic throughout.
    """
    memo = [0] * graph.num_nodes
    for u in graph.postorder:
        k = graph.kinds[u]
        if k == LEAF:
            memo[u] = 1
        elif k == PRODUCT:
            v = 1
            for c in graph.children[u]:
                v *= memo[c]
            memo[u] = v
        else:
            memo[u] = sum(memo[c] for c in graph.children[u])
    return memo[graph.root]


# -- induced-tree resolution --------------------------------------------------


def resolve_induced_tree(graph: SpnGraph, coords) -> InducedTree:
    """Walk top-down following one child per sum node.

    ``coords`` is the assignment vector, indexed by sum column (see
    ``SpnGraph.sum_cols``), values in ``0..sum_outdegree-1``.  Visits only
    in-tree nodes; the returned ``nodes_visited`` equals the induced tree
    size.
    """
    kinds = graph.kinds
    children = graph.children
    sum_cols = graph.sum_cols
    leaf_dim = graph.leaf_dim_of_node
    leaves = np.full(graph.dims, -1, dtype=np.int64)
    sums = []
    stack = [graph.root]
    visited = 0
    while stack:
        u = stack.pop()
        visited += 1
        k = kinds[u]
        if k == SUM:
            sums.append(u)
            stack.append(children[u][coords[sum_cols[u]]])
        elif k == PRODUCT:
            stack.extend(children[u])
        else:
            leaves[leaf_dim[u]] = u
    return InducedTree(leaves, sums, visited)


# -- evaluation ---------------------------------------------------------------


def _check_params(graph, params):
    lw = getattr(params, "log_weights", None)
    if lw is None or not hasattr(params, "leaf_log_pdfs"):
        raise ValueError(
            "params must be materialized (log_weights + leaf_log_pdfs); "
            "draw them with inference.materialize or build them explicitly"
        )
    if lw.shape != (graph.num_sums, graph.sum_outdegree):
        raise ValueError(
            f"params have weight table {lw.shape}, graph needs "
            f"({graph.num_sums}, {graph.sum_outdegree})"
        )


def eval_nodes(graph: SpnGraph, params, x, table=None):
    """Log-domain bottom-up pass; returns the full per-node value table.

    ``x`` is one data vector of length ``dims``; NaN entries mark missing
    dimensions, whose leaves contribute log 1 = 0 (exact marginalization).
    ``table[u]`` holds log of node ``u``'s value; ``table[root]`` is the log
    density.
    """
    _check_params(graph, params)
    if table is None:
        table = np.empty(graph.num_nodes)
    table[graph.leaf_node_ids] = params.leaf_log_pdfs(x)
    lw = params.log_weights
    kinds = graph.kinds
    children = graph.children
    sum_cols = graph.sum_cols
    exp, log = math.exp, math.log
    for u in graph.internal_postorder:
        ch = children[u]
        if kinds[u] == SUM:
            w = lw[sum_cols[u]]
            best = -math.inf
            for i, c in enumerate(ch):
                v = table[c] + w[i]
                if v > best:
                    best = v
            if best == -math.inf:
                table[u] = -math.inf
                continue
            acc = 0.0
            for i, c in enumerate(ch):
                acc += exp(table[c] + w[i] - best)
            table[u] = best + log(acc)
        else:
            acc = 0.0
            for c in ch:
                acc += table[c]
            table[u] = acc
    return table


def eval_log_density(graph: SpnGraph, params, x) -> float:
    """Log density of one data vector (NaN entries are marginalized out)."""
    return float(eval_nodes(graph, params, x)[graph.root])


def eval_log_density_batch(graph: SpnGraph, params, X) -> np.ndarray:
    """Log density of every row of ``X`` (shape ``(n, dims)``).

    Same semantics as :func:`eval_log_density`, vectorized over rows.
    """
    _check_params(graph, params)
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != graph.dims:
        raise ValueError(f"X must be (n, {graph.dims}), got {X.shape}")
    n = X.shape[0]
    table = np.empty((n, graph.num_nodes))
    table[:, graph.leaf_node_ids] = params.leaf_log_pdfs_batch(X)
    lw = params.log_weights
    for u in graph.internal_postorder:
        ch = list(graph.children[u])
        block = table[:, ch]
        if graph.kinds[u] == SUM:
            table[:, u] = np.logaddexp.reduce(
                block + lw[graph.sum_cols[u]], axis=1
            )
        else:
            table[:, u] = block.sum(axis=1)
    return table[:, graph.root]


# -- serialization ------------------------------------------------------------


def graph_to_dict(graph: SpnGraph) -> dict:
    """Plain-dict form of a graph (used by serialize and by model files)."""
    entries = []
    for n in graph.nodes:
        if n.kind == LEAF:
            entries.append(["leaf", n.dim, n.family])
        else:
            entries.append(
                [_KIND_TAGS[n.kind], list(n.scope), list(n.children)]
            )
    return {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "dims": graph.dims,
        "sum_outdegree": graph.sum_outdegree,
        "product_outdegree": graph.product_outdegree,
        "root": graph.root,
        "num_sums": graph.num_sums,
        "num_products": graph.num_products,
        "num_leaves": graph.num_leaves,
        "nodes": entries,
    }


def graph_from_dict(payload: dict) -> SpnGraph:
    """Inverse of :func:`graph_to_dict`; raises GraphFormatError on problems."""
    if not isinstance(payload, dict):
        raise GraphFormatError("graph payload must be a JSON object")
    if payload.get("format") != FORMAT_NAME:
        raise GraphFormatError(f"unknown format tag {payload.get('format')!r}")
    if payload.get("version") != FORMAT_VERSION:
        raise GraphFormatError(f"unsupported version {payload.get('version')!r}")
    for key in ("dims", "sum_outdegree", "product_outdegree", "root", "nodes"):
        if key not in payload:
            raise GraphFormatError(f"missing header field {key!r}")
    raw = payload["nodes"]
    nodes = []
    for i, entry in enumerate(raw):
        try:
            tag = entry[0]
            if tag == "leaf":
                dim, family = int(entry[1]), str(entry[2])
                nodes.append(Node(LEAF, (dim,), dim=dim, family=family))
            elif tag in _TAG_KINDS:
                scope = tuple(int(s) for s in entry[1])
                children = tuple(int(c) for c in entry[2])
                bad = [c for c in children if not (0 <= c < len(raw))]
                if bad:
                    raise GraphFormatError(
                        f"node {i}: child ids {bad} out of range"
                    )
                nodes.append(Node(_TAG_KINDS[tag], scope, children))
            else:
                raise GraphFormatError(f"node {i}: unknown kind tag {tag!r}")
        except GraphFormatError:
            raise
        except (TypeError, ValueError, IndexError) as exc:
            raise GraphFormatError(f"node {i}: malformed entry ({exc})") from exc
    g = SpnGraph(
        nodes,
        payload["root"],
        payload["dims"],
        payload["sum_outdegree"],
        payload["product_outdegree"],
    )
    for key, got in (
        ("num_sums", g.num_sums),
        ("num_products", g.num_products),
        ("num_leaves", g.num_leaves),
    ):
        if key in payload and payload[key] != got:
            raise GraphFormatError(
                f"header {key}={payload[key]} disagrees with node table ({got})"
            )
    return g


def serialize(graph: SpnGraph) -> bytes:
    """Canonical JSON bytes for a graph; stable across round trips."""
    return json.dumps(
        graph_to_dict(graph), sort_keys=True, separators=(",", ":")
    ).encode()


def deserialize(data: bytes) -> SpnGraph:
    """Parse bytes written by :func:`serialize`.

    Malformed JSON raises :class:`GraphFormatError` carrying the byte offset
    reported by the parser; structural problems name the offending node.
    """
    try:
        payload = json.loads(data.decode("utf-8", errors="strict"))
    except UnicodeDecodeError as exc:
        raise GraphFormatError("payload is not UTF-8", position=exc.start) from exc
    except json.JSONDecodeError as exc:
        raise GraphFormatError(exc.msg, position=exc.pos) from exc
    return graph_from_dict(payload)
