#!/usr/bin/env python3
"""Build crates/core/data/bunny.ply from the public-domain Stanford bunny mesh.

The mesh comes from the `bunny` npm package (github.com/mikolalysenko/bunny):

    npm pack bunny && tar xzf bunny-1.0.1.tgz
    python3 scripts/sample_bunny.py package/index.js crates/core/data/bunny.ply

Points are sampled uniformly by surface area (seeded), then scaled and shifted
so the bounding box matches the bun000 scan: side lengths of roughly
0.156 x 0.153 x 0.118 with the origin well away from the centroid.
"""
import re
import struct
import sys

import numpy as np

N_POINTS = 10_000
SEED = 20_200_101
TARGET_MIN = np.array([-0.0947, 0.0330, -0.0619])
TARGET_X_SIDE = 0.156


def load_mesh(path):
    text = open(path).read()
    pos_src = text.split("exports.positions=")[1].split("exports.cells=")[0]
    cell_src = text.split("exports.cells=")[1]
    positions = np.array(
        [float(v) for v in re.findall(r"-?\d+(?:\.\d+)?(?:e-?\d+)?", pos_src)]
    ).reshape(-1, 3)
    cells = np.array([int(v) for v in re.findall(r"\d+", cell_src)]).reshape(-1, 3)
    return positions, cells


def main(src, dst):
    positions, cells = load_mesh(src)
    a, b, c = (positions[cells[:, i]] for i in range(3))
    areas = 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)
    rng = np.random.default_rng(SEED)
    tri = rng.choice(len(cells), size=N_POINTS, p=areas / areas.sum())
    r1 = np.sqrt(rng.random(N_POINTS))[:, None]
    r2 = rng.random(N_POINTS)[:, None]
    pts = (1 - r1) * a[tri] + r1 * (1 - r2) * b[tri] + r1 * r2 * c[tri]

    lo, hi = positions.min(axis=0), positions.max(axis=0)
    scale = TARGET_X_SIDE / (hi[0] - lo[0])
    pts = (pts - lo) * scale + TARGET_MIN

    with open(dst, "wb") as f:
        header = (
            "ply\nformat binary_little_endian 1.0\n"
            "comment Stanford bunny, area-sampled from the bunny npm mesh\n"
            f"element vertex {N_POINTS}\n"
            "property float x\nproperty float y\nproperty float z\nend_header\n"
        )
        f.write(header.encode("ascii"))
        for p in pts.astype(np.float32):
            f.write(struct.pack("<3f", *p))
    span = pts.max(axis=0) - pts.min(axis=0)
    print(f"wrote {N_POINTS} points, extent {span}, centroid {pts.mean(axis=0)}")


if __name__ == "__main__":
    main(sys.argv[1], sys.argv[2])
