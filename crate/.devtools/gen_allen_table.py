#!/usr/bin/env python3
"""One-off generator for the Allen composition table constant.

Enumerates interval triples on a small integer grid and prints the
13x13 table as Rust source. A grid of 6 values is exhaustive for the
weak orderings of 6 endpoints.
"""
import itertools

NAMES = [
    "before", "after", "meets", "met_by", "overlaps", "overlapped_by",
    "starts", "started_by", "during", "contains", "finishes",
    "finished_by", "equals",
]


def rel(x1, x2, y1, y2):
    if x2 < y1:
        return "before"
    if y2 < x1:
        return "after"
    if x2 == y1:
        return "meets"
    if y2 == x1:
        return "met_by"
    if x1 == y1 and x2 == y2:
        return "equals"
    if x1 == y1 and x2 < y2:
        return "starts"
    if x1 == y1 and y2 < x2:
        return "started_by"
    if x2 == y2 and y1 < x1:
        return "finishes"
    if x2 == y2 and x1 < y1:
        return "finished_by"
    if y1 < x1 and x2 < y2:
        return "during"
    if x1 < y1 and y2 < x2:
        return "contains"
    if x1 < y1 < x2 < y2:
        return "overlaps"
    if y1 < x1 < y2 < x2:
        return "overlapped_by"
    raise AssertionError((x1, x2, y1, y2))


def main():
    idx = {n: i for i, n in enumerate(NAMES)}
    comp = [[0] * 13 for _ in range(13)]
    grid = range(6)
    for x1, x2 in itertools.combinations(grid, 2):
        for y1, y2 in itertools.combinations(grid, 2):
            rxy = idx[rel(x1, x2, y1, y2)]
            for z1, z2 in itertools.combinations(grid, 2):
                ryz = idx[rel(y1, y2, z1, z2)]
                rxz = idx[rel(x1, x2, z1, z2)]
                comp[rxy][ryz] |= 1 << rxz

    print("const COMPOSITION_BITS: [[u16; 13]; 13] = [")
    for i, row in enumerate(comp):
        cells = ", ".join(f"0x{c:04x}" for c in row)
        print(f"    // {NAMES[i]}")
        print(f"    [{cells}],")
    print("];")

    # sanity: equals row/column are identity
    for i in range(13):
        assert comp[idx["equals"]][i] == 1 << i
        assert comp[i][idx["equals"]] == 1 << i
    # paper sample rules
    assert comp[idx["before"]][idx["before"]] == 1 << idx["before"]
    assert comp[idx["after"]][idx["contains"]] == 1 << idx["after"]
    assert comp[idx["after"]][idx["after"]] == 1 << idx["after"]


if __name__ == "__main__":
    main()
