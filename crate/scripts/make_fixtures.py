#!/usr/bin/env python3
"""Write the small synthetic clouds under crates/core/tests/fixtures.

    python3 scripts/make_fixtures.py crates/core/tests/fixtures

plane.ply        400 points on a 20 x 20 grid in z = 0 (no keypoints, flat normals)
sphere.ply       600 points on a unit sphere (Fibonacci lattice)
two_surface.ply  a wavy sheet plus a hemisphere cap above it, 700 points
tiny.ply         three hand-picked vertices with an extra face element
comments.xyz     three points with comment and blank lines
"""
import math
import sys
from pathlib import Path


def write_ply(path, pts):
    with open(path, "w") as f:
        f.write("ply\nformat ascii 1.0\ncomment synthetic fixture\n")
        f.write(f"element vertex {len(pts)}\n")
        f.write("property double x\nproperty double y\nproperty double z\nend_header\n")
        for p in pts:
            f.write("{:.17g} {:.17g} {:.17g}\n".format(*p))


def plane():
    return [(0.01 * i, 0.01 * j, 0.0) for i in range(20) for j in range(20)]


def sphere(n=600):
    golden = math.pi * (3.0 - math.sqrt(5.0))
    out = []
    for i in range(n):
        z = 1.0 - 2.0 * (i + 0.5) / n
        r = math.sqrt(1.0 - z * z)
        out.append((r * math.cos(golden * i), r * math.sin(golden * i), z))
    return out


def two_surface():
    sheet = []
    for i in range(20):
        for j in range(20):
            x, y = 0.01 * i, 0.01 * j
            sheet.append((x, y, 0.02 * math.sin(12.0 * x) * math.cos(9.0 * y)))
    cap = []
    golden = math.pi * (3.0 - math.sqrt(5.0))
    for i in range(300):
        z = 1.0 - (i + 0.5) / 300
        r = math.sqrt(1.0 - z * z)
        cap.append((0.1 + 0.05 * r * math.cos(golden * i), 0.1 + 0.05 * r * math.sin(golden * i), 0.06 + 0.05 * z))
    return sheet + cap


def main(out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_ply(out / "plane.ply", plane())
    write_ply(out / "sphere.ply", sphere())
    write_ply(out / "two_surface.ply", two_surface())
    (out / "tiny.ply").write_text(
        "ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\nproperty float y\n"
        "property float z\nproperty uchar red\nelement face 1\nproperty list uchar int vertex_indices\n"
        "end_header\n0 0 0 255\n1.5 -2 3.25 0\n1e-3 2.5 -4 7\n3 0 1 2\n"
    )
    (out / "comments.xyz").write_text(
        "# x y z\n0.5 1 1.5\n\n# middle comment\n-1 -2 -3\n2.25,0,1\n"
    )


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "crates/core/tests/fixtures")
