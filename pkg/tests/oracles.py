"""Slow, loop-based reference implementations used only as test oracles.

Nothing here imports the package, so agreement with it is meaningful.
"""

import itertools
import math

PRIORS = {"vertical": 0.45, "horizontal": 0.26, "background": 0.03}
LAMBDA_B = {"horizontal": 1.46, "vertical": 0.57}


def rotation(pan, roll, tilt):
    """Rz(roll) @ Rx(tilt) @ Ry(pan) written out by hand."""
    cp, sp = math.cos(math.radians(pan)), math.sin(math.radians(pan))
    cr, sr = math.cos(math.radians(roll)), math.sin(math.radians(roll))
    ct, st = math.cos(math.radians(tilt)), math.sin(math.radians(tilt))
    rz = [[cr, -sr, 0], [sr, cr, 0], [0, 0, 1]]
    rx = [[1, 0, 0], [0, ct, -st], [0, st, ct]]
    ry = [[cp, 0, sp], [0, 1, 0], [-sp, 0, cp]]

    def mul(a, b):
        return [[sum(a[i][k] * b[k][j] for k in range(3)) for j in range(3)] for i in range(3)]

    return mul(mul(rz, rx), ry)


def vanishing_point(f, cx, cy, R, col):
    d = [R[0][col], R[1][col], R[2][col]]
    return (f * d[0] + cx * d[2], f * d[1] + cy * d[2], d[2])


def angle_b(seg, vp):
    """Undirected angle (deg) between the segment and the line from its midpoint to ``vp``."""
    x1, y1, x2, y2 = seg
    mx, my = (x1 + x2) / 2, (y1 + y2) / 2
    vx, vy, vw = vp
    if abs(vw) > 1e-12 * (abs(vx) + abs(vy) + abs(vw)):
        dx, dy = vx / vw - mx, vy / vw - my
    else:
        dx, dy = vx, vy
    a1 = math.atan2(y2 - y1, x2 - x1)
    a2 = math.atan2(dy, dx)
    diff = abs(a1 - a2) % math.pi
    return math.degrees(min(diff, math.pi - diff))


def objective_b(segs, pan, roll, tilt, hfov, width, height):
    """Length-weighted log mixture density with measure b and default settings."""
    f = width / 2 / math.tan(math.radians(hfov) / 2)
    R = rotation(pan, roll, tilt)
    total = 0.0
    for seg in segs:
        p = PRIORS["background"] / 90.0
        for col in range(3):
            kind = "vertical" if col == 1 else "horizontal"
            x = angle_b(seg, vanishing_point(f, width / 2, height / 2, R, col))
            lam = LAMBDA_B[kind]
            p += PRIORS[kind] * math.exp(-x / lam) / lam
        length = math.hypot(seg[2] - seg[0], seg[3] - seg[1])
        total += length * math.log(max(p, 1e-300))
    return total


def cell_centers(lo, hi, k):
    return [lo + (j + 0.5) * (hi - lo) / k for j in range(k)]


def exhaustive_grid(segs, k, width, height, bounds=((-45, 45), (-15, 15), (-35, 35), (50, 130))):
    """All grid nodes with their objective, best first (ties keep grid order)."""
    axes = [cell_centers(lo, hi, k) for lo, hi in bounds]
    nodes = [(node, objective_b(segs, *node, width, height)) for node in itertools.product(*axes)]
    order = sorted(range(len(nodes)), key=lambda i: -nodes[i][1])
    return [nodes[i] for i in order]


def same_ranking(grid, ref, rtol=1e-12):
    """Rankings agree up to exact ties.

    Some nodes tie mathematically (at zero pan and tilt the objective does not
    depend on the FOV), and roundoff then orders them arbitrarily in either
    implementation. At every rank the two nodes must carry the same objective.
    """
    value_of = {tuple(p): v for p, v in zip(grid.proposals.tolist(), grid.values)}
    if set(value_of) != {tuple(n) for n, _ in ref}:
        return False
    mine = [value_of[tuple(n)] for n, _ in ref]
    return all(abs(a - b) <= rtol * abs(b) for a, b in zip(mine, grid.values))
