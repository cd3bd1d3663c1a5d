"""Build tree SPNs and account for their size.

Constructs a few balanced graphs, prints their size reports, checks them
against the closed-form size calculator, and walks one induced tree to show
how an assignment vector selects a distribution node per dimension.

Run:  python3 demos/01_build_and_size.py
"""

import numpy as np

from spngibbs.graph import (
    build_balanced,
    closed_form_sizes,
    resolve_induced_tree,
)


def main():
    print("== balanced builders ==")
    for dims, cs, cp in [(4, 2, 2), (9, 4, 2), (9, 3, 3), (16, 2, 4)]:
        g = build_balanced(dims, cs, cp)
        r = g.size_report()
        print(
            f"dims={dims:>2} cs={cs} cp={cp}:  "
            f"S={r.num_sums:>4}  P={r.num_products:>4}  L={r.num_leaves:>5}  "
            f"V={r.num_nodes:>5}  height={r.height}  breadth={r.breadth}  "
            f"induced trees={r.induced_trees}"
        )

    print("\n== closed forms match the builder on complete shapes ==")
    for dims, cs, cp in [(8, 2, 2), (9, 3, 3), (16, 4, 2), (27, 2, 3)]:
        want = closed_form_sizes(dims, cs, cp, "complete")
        got = build_balanced(dims, cs, cp).size_report()
        tag = "ok" if got == want else "MISMATCH"
        print(f"dims={dims:>2} cs={cs} cp={cp}:  formula V={want.num_nodes:>6}  {tag}")

    print("\n== one induced tree ==")
    g = build_balanced(4, 2, 2)
    rng = np.random.default_rng(0)
    coords = rng.integers(0, g.sum_outdegree, size=g.num_sums)
    tree = resolve_induced_tree(g, coords)
    print(f"graph has {g.num_nodes} nodes; the tree visited {tree.nodes_visited}")
    for d, leaf in enumerate(tree.leaf_by_dim):
        print(f"  dimension {d} -> leaf node {leaf} ({g.nodes[leaf].family})")
    print(f"  sum choices used: {len(tree.sum_ids)} of {g.num_sums} sum nodes")


if __name__ == "__main__":
    main()
