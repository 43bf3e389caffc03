#!/usr/bin/env python3
"""Recompute distinct-prediction and change counts for the reference
prediction-history table and compare with its stated columns."""

from longdist import fidelity as fid

# set size, majority set size, 15 predictions, stated distinct, stated changes
ROWS = [
    (841, 787, "0,0,0,4,4,4,4,4,4,4,4,4,4,4,4", 2, 1),
    (527, 480, "4,4,4,4,4,4,4,4,4,4,4,4,4,0,4", 2, 2),
    (527, 480, "4,4,4,4,4,4,4,4,4,4,4,4,4,0,4", 2, 2),
    (321, 321, "4,4,4,4,4,4,4,4,4,4,4,0,4,4,4", 2, 2),
    (321, 321, "4,4,4,4,4,4,4,4,4,4,4,0,4,4,4", 2, 2),
    (120, 120, "5,3,3,3,3,3,3,3,3,3,1,1,1,1,1", 2, 2),
    (32, 32, "6,6,6,6,6,6,0,4,0,4,0,0,4,4,4", 3, 6),
    (29, 29, "6,6,6,6,6,6,0,4,4,4,4,0,4,4,4", 3, 4),
    (15, 15, "6,6,6,6,6,6,0,4,4,4,0,0,4,4,4", 3, 4),
    (5, 5, "3,3,3,3,3,3,3,3,0,3,3,0,0,0,0", 2, 3),
]


def main() -> None:
    sizes, distinct, changes = [], [], []
    for i, (size, _, seq, d_ref, c_ref) in enumerate(ROWS, 1):
        labels = [int(v) for v in seq.split(",")]
        d, c = fid.distinct_count(labels), fid.change_count(labels)
        flag = "" if (d, c) == (d_ref, c_ref) else "  <- differs from stated"
        print(f"row {i:2d}: size={size:4d} distinct={d} (stated {d_ref}) "
              f"changes={c} (stated {c_ref}){flag}")
        sizes.append(size)
        distinct.append(d)
        changes.append(c)
    stated_d = [r[3] for r in ROWS]
    print(f"r(size, distinct) recomputed={fid.pearson(sizes, distinct):+.4f} "
          f"stated-column={fid.pearson(sizes, stated_d):+.4f}")
    print(f"r(size, changes)  recomputed={fid.pearson(sizes, changes):+.4f}")


if __name__ == "__main__":
    main()
