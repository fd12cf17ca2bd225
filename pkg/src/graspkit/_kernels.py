"""Compiled candidate scorer.

Fuses width fitting, the three-box collision test, contact selection and
friction-cone scoring for every (view, angle, depth) candidate of a batch of
seed points. Local coordinates are formed with the same expression order as
:func:`graspkit.core.local_coords`, so the jaw-gap membership, width and
contact choice agree bit for bit with the modular path in ``quality``.

A scan over the neighbours of a candidate stops as soon as every depth is
either too wide or colliding. Both failures are final (the required width
only grows and intruders only get nearer as points are added), but which one
is reported first depends on scan order; both score 0.
"""

import math

import numpy as np
from numba import njit

OK = 0
EMPTY = 1
WIDE = 2
COLLIDE = 3
NO_CONTACT = 4


@njit(cache=True, nogil=True)
def score_points(
    points, normals, order, keys, starts, origin, dims, cell,
    query, rot, depths, finger_length, thickness, height, base_depth,
    max_width, clearance, min_inner, atan_mu, mu, reach,
    out_score, out_width, out_status,
):
    n = points.shape[0]
    V = rot.shape[0]
    A = rot.shape[1]
    D = depths.shape[0]
    G = mu.shape[0]
    L = finger_length
    h2 = height / 2.0
    half_clr = clearance / 2.0
    half_max = max_width / 2.0
    xlo = depths[0] - L - base_depth
    xhi = depths[D - 1]
    rad = math.sqrt((half_max + thickness) ** 2 + h2 * h2)
    rad2 = rad * rad * (1.0 + 1e-9) + 1e-18
    reach2 = reach * reach
    nx = dims[0]
    ny = dims[1]

    buf = np.empty(n, dtype=np.int64)
    dx = np.empty(n)
    dy = np.empty(n)
    dz = np.empty(n)
    dd = np.empty(n)
    cyl = np.empty(n, dtype=np.int64)
    cdx = np.empty(n)
    cdy = np.empty(n)
    cdz = np.empty(n)
    cx = np.empty(n)
    slab = np.empty(n, dtype=np.int64)
    px = np.empty(n)

    maxabs = np.empty(D)
    n_in = np.empty(D, dtype=np.int64)
    left_y = np.empty(D)
    left_k = np.empty(D, dtype=np.int64)
    right_y = np.empty(D)
    right_k = np.empty(D, dtype=np.int64)
    min_out = np.empty(D)
    min_base = np.empty(D)
    dead = np.empty(D, dtype=np.int64)
    gap_lo = np.empty(D)
    base_lo = np.empty(D)
    for q in range(D):
        gap_lo[q] = depths[q] - L
        base_lo[q] = depths[q] - L - base_depth

    for qi in range(query.shape[0]):
        pi = query[qi]
        c0 = points[pi, 0]
        c1 = points[pi, 1]
        c2 = points[pi, 2]

        # neighbours within the gripper's reach
        cnt = 0
        lo0 = max(int(math.floor((c0 - reach - origin[0]) / cell)), 0)
        lo1 = max(int(math.floor((c1 - reach - origin[1]) / cell)), 0)
        lo2 = max(int(math.floor((c2 - reach - origin[2]) / cell)), 0)
        hi0 = min(int(math.floor((c0 + reach - origin[0]) / cell)), dims[0] - 1)
        hi1 = min(int(math.floor((c1 + reach - origin[1]) / cell)), dims[1] - 1)
        hi2 = min(int(math.floor((c2 + reach - origin[2]) / cell)), dims[2] - 1)
        for iz in range(lo2, hi2 + 1):
            for iy in range(lo1, hi1 + 1):
                for ix in range(lo0, hi0 + 1):
                    key = ix + nx * (iy + ny * iz)
                    k = np.searchsorted(keys, key)
                    if k < keys.shape[0] and keys[k] == key:
                        for s in range(starts[k], starts[k + 1]):
                            p = order[s]
                            ex = points[p, 0] - c0
                            ey = points[p, 1] - c1
                            ez = points[p, 2] - c2
                            if ex * ex + ey * ey + ez * ez <= reach2:
                                buf[cnt] = p
                                cnt += 1
        # the seed first (it widens every jaw gap to at least zero, which arms
        # the intruder tests), then far points: those are the ones that make a
        # candidate too wide or collide, so most scans stop early
        for k in range(cnt):
            p = buf[k]
            ex = points[p, 0] - c0
            ey = points[p, 1] - c1
            ez = points[p, 2] - c2
            dd[k] = -(ex * ex + ey * ey + ez * ez)
            if p == pi:
                dd[k] = -np.inf
        perm = np.argsort(dd[:cnt], kind="mergesort")
        nb = np.empty(cnt, dtype=np.int64)
        for k in range(cnt):
            p = buf[perm[k]]
            nb[k] = p
            dx[k] = points[p, 0] - c0
            dy[k] = points[p, 1] - c1
            dz[k] = points[p, 2] - c2
        for k in range(cnt):
            dd[k] = dx[k] * dx[k] + dy[k] * dy[k] + dz[k] * dz[k]

        for v in range(V):
            a0 = rot[v, 0, 0, 0]
            a1 = rot[v, 0, 1, 0]
            a2 = rot[v, 0, 2, 0]
            for k in range(cnt):
                px[k] = dx[k] * a0 + dy[k] * a1 + dz[k] * a2
            ncyl = 0
            for k in range(cnt):
                x = px[k]
                cyl[ncyl] = k
                cx[ncyl] = x
                cdx[ncyl] = dx[k]
                cdy[ncyl] = dy[k]
                cdz[ncyl] = dz[k]
                ncyl += (x > xlo) & (x < xhi) & (dd[k] - x * x < rad2)

            for ai in range(A):
                b0 = rot[v, ai, 0, 1]
                b1 = rot[v, ai, 1, 1]
                b2 = rot[v, ai, 2, 1]
                e0 = rot[v, ai, 0, 2]
                e1 = rot[v, ai, 1, 2]
                e2 = rot[v, ai, 2, 2]
                for q in range(D):
                    maxabs[q] = -1.0
                    n_in[q] = 0
                    left_y[q] = 0.0
                    left_k[q] = -1
                    right_y[q] = 0.0
                    right_k[q] = -1
                    min_out[q] = np.inf
                    min_base[q] = np.inf
                    dead[q] = 0
                n_dead = 0
                # slab membership is computed block by block so that an early
                # exit also skips the projections
                for blo in range(0, ncyl, 64):
                    nsl = 0
                    for j in range(blo, min(blo + 64, ncyl)):
                        z = cdx[j] * e0 + cdy[j] * e1 + cdz[j] * e2
                        slab[nsl] = j
                        nsl += abs(z) < h2
                    for jj in range(nsl):
                        j = slab[jj]
                        k = cyl[j]
                        y = cdx[j] * b0 + cdy[j] * b1 + cdz[j] * b2
                        x = cx[j]
                        ay = abs(y)
                        p = nb[k]
                        for q in range(D):
                            if dead[q]:
                                continue
                            if x > gap_lo[q] and x < depths[q]:
                                if ay <= half_max:
                                    n_in[q] += 1
                                    if y < 0.0:
                                        if y < left_y[q] or (y == left_y[q] and p < nb[left_k[q]]):
                                            left_y[q] = y
                                            left_k[q] = k
                                    elif y > 0.0:
                                        if y > right_y[q] or (y == right_y[q] and p < nb[right_k[q]]):
                                            right_y[q] = y
                                            right_k[q] = k
                                    if ay > maxabs[q]:
                                        maxabs[q] = ay
                                        # width only grows and intruders only get
                                        # nearer, so a failure is final once seen
                                        if 2.0 * ay + clearance > max_width:
                                            dead[q] = WIDE
                                            n_dead += 1
                                        elif min(min_out[q], min_base[q]) < ay + half_clr + thickness:
                                            dead[q] = COLLIDE
                                            n_dead += 1
                                elif ay < min_out[q]:
                                    min_out[q] = ay
                                    if ay < maxabs[q] + half_clr + thickness:
                                        dead[q] = COLLIDE
                                        n_dead += 1
                            elif x > base_lo[q] and x < gap_lo[q]:
                                if ay < min_base[q]:
                                    min_base[q] = ay
                                    if ay < maxabs[q] + half_clr + thickness:
                                        dead[q] = COLLIDE
                                        n_dead += 1
                        if n_dead == D:
                            break
                    if n_dead == D:
                        break

                for q in range(D):
                    col = (v * A + ai) * D + q
                    out_score[qi, col] = 0.0
                    if dead[q] == WIDE:
                        out_width[qi, col] = max_width
                        out_status[qi, col] = WIDE
                        continue
                    if dead[q] == COLLIDE:
                        out_width[qi, col] = 2.0 * maxabs[q] + clearance
                        out_status[qi, col] = COLLIDE
                        continue
                    if n_in[q] == 0:
                        out_width[qi, col] = max_width
                        out_status[qi, col] = EMPTY
                        continue
                    w = 2.0 * maxabs[q] + clearance
                    out_width[qi, col] = w
                    if n_in[q] < min_inner:
                        out_status[qi, col] = COLLIDE
                        continue
                    if left_k[q] < 0 or right_k[q] < 0:
                        out_status[qi, col] = NO_CONTACT
                        continue
                    out_status[qi, col] = OK
                    l = nb[left_k[q]]
                    r = nb[right_k[q]]
                    u0 = points[r, 0] - points[l, 0]
                    u1 = points[r, 1] - points[l, 1]
                    u2 = points[r, 2] - points[l, 2]
                    un = math.sqrt(u0 * u0 + u1 * u1 + u2 * u2)
                    u0 /= un
                    u1 /= un
                    u2 /= un
                    th1 = _cone_angle(-normals[l, 0], -normals[l, 1], -normals[l, 2], u0, u1, u2)
                    th2 = _cone_angle(-normals[r, 0], -normals[r, 1], -normals[r, 2], -u0, -u1, -u2)
                    for g in range(G):
                        if th1 <= atan_mu[g] and th2 <= atan_mu[g]:
                            s = 1.1 - mu[g]
                            out_score[qi, col] = s if s > 0.0 else 0.0
                            break


@njit(cache=True, nogil=True)
def _cone_angle(n0, n1, n2, u0, u1, u2):
    c0 = n1 * u2 - n2 * u1
    c1 = n2 * u0 - n0 * u2
    c2 = n0 * u1 - n1 * u0
    return math.atan2(math.sqrt(c0 * c0 + c1 * c1 + c2 * c2), n0 * u0 + n1 * u1 + n2 * u2)
