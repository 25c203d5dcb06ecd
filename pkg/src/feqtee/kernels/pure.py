"""Pure numpy implementations of the hot kernels.

These are the fallback for the compiled `_speedups` extension; both
backends must agree to float precision (see tests/test_kernels.py).
"""

from __future__ import annotations

import numpy as np

BACKEND = "pure"


def _pairwise_dist(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    d = a[:, None, :] - b[None, :, :]
    return np.sqrt((d * d).sum(axis=2))


def dtw_table(a: np.ndarray, b: np.ndarray) -> float:
    """Classic DTW with Euclidean point cost and symmetric steps."""
    cost = _pairwise_dist(np.asarray(a, float), np.asarray(b, float))
    n, m = cost.shape
    prev = np.empty(m)
    prev[0] = cost[0, 0]
    for j in range(1, m):
        prev[j] = prev[j - 1] + cost[0, j]
    cur = np.empty(m)
    for i in range(1, n):
        cur[0] = prev[0] + cost[i, 0]
        row = cost[i]
        for j in range(1, m):
            cur[j] = row[j] + min(prev[j], prev[j - 1], cur[j - 1])
        prev, cur = cur, prev
    return float(prev[m - 1])


def dtw_cyclic(a: np.ndarray, b: np.ndarray) -> float:
    """Min DTW over all rotations of `a` (cyclic start alignment).

    All rotations are evaluated in one batched dynamic program: the cost
    tensor is indexed modulo n, and the table loops carry a vector over
    rotations instead of scalars.
    """
    a = np.asarray(a, dtype=np.float64).reshape(-1, 2)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 2)
    n, m = len(a), len(b)
    if n == 0 or m == 0:
        raise ValueError("empty sequence")
    cost = _pairwise_dist(a, b)  # (n, m)
    rot = np.arange(n)

    def c(i):  # cost row i for every rotation: (R,) per column j
        return cost[(rot + i) % n, :]  # (R, m)

    prev = np.empty((n, m))
    prev[:, 0] = c(0)[:, 0]
    ci = c(0)
    for j in range(1, m):
        prev[:, j] = prev[:, j - 1] + ci[:, j]
    cur = np.empty((n, m))
    for i in range(1, n):
        ci = c(i)
        cur[:, 0] = prev[:, 0] + ci[:, 0]
        for j in range(1, m):
            np.minimum(prev[:, j], prev[:, j - 1], out=cur[:, j])
            np.minimum(cur[:, j], cur[:, j - 1], out=cur[:, j])
            cur[:, j] += ci[:, j]
        prev, cur = cur, prev
    return float(prev[:, m - 1].min())


def _point_segment_dist2(p, s0, s1):
    """Squared point-to-segment distances; all arrays broadcast together,
    coordinates on the last axis."""
    d = s1 - s0
    L2 = (d * d).sum(axis=-1)
    L2 = np.where(L2 > 0, L2, 1.0)
    t = ((p - s0) * d).sum(axis=-1) / L2
    t = np.clip(t, 0.0, 1.0)
    proj = s0 + t[..., None] * d
    diff = p - proj
    return (diff * diff).sum(axis=-1)


def _segment_segment_dist(a0, a1, b0, b1):
    """Distance between 2D segments (elementwise over broadcast shapes)."""
    def cross(o, p, q):
        return (p[..., 0] - o[..., 0]) * (q[..., 1] - o[..., 1]) \
            - (p[..., 1] - o[..., 1]) * (q[..., 0] - o[..., 0])

    d1 = cross(b0, b1, a0)
    d2 = cross(b0, b1, a1)
    d3 = cross(a0, a1, b0)
    d4 = cross(a0, a1, b1)
    intersects = ((d1 * d2) < 0) & ((d3 * d4) < 0)
    cands = np.stack([
        _point_segment_dist2(a0, b0, b1),
        _point_segment_dist2(a1, b0, b1),
        _point_segment_dist2(b0, a0, a1),
        _point_segment_dist2(b1, a0, a1),
    ])
    d = np.sqrt(cands.min(axis=0))
    return np.where(intersects, 0.0, d)


def edge_weights(edges: np.ndarray, loop: np.ndarray, k: int) -> np.ndarray:
    """Flux-style weights of uv edges against a closed polyline.

    edges: (E,2,2) endpoint pairs. loop: (S,2) closed (segment i runs from
    loop[i] to loop[(i+1)%S]). For each of k equidistant interior samples
    on an edge, add |ê . n̂| + D² where n̂ is the normal of the sample's
    nearest loop segment and D the edge-to-that-segment distance.
    """
    edges = np.asarray(edges, dtype=np.float64)
    loop = np.asarray(loop, dtype=np.float64)
    E = len(edges)
    s0 = loop
    s1 = np.roll(loop, -1, axis=0)
    seg_dir = s1 - s0
    seg_len = np.linalg.norm(seg_dir, axis=1)
    good = seg_len > 0
    nrm = np.zeros_like(seg_dir)
    nrm[good] = np.stack([-seg_dir[good, 1], seg_dir[good, 0]], axis=1) \
        / seg_len[good, None]

    a = edges[:, 0]
    b = edges[:, 1]
    evec = b - a
    elen = np.linalg.norm(evec, axis=1)
    if (elen == 0).any():
        raise ValueError("zero-length edge")
    ehat = evec / elen[:, None]

    t = (np.arange(1, k + 1) / (k + 1.0))[None, :, None]  # (1,K,1)
    samples = a[:, None, :] + t * evec[:, None, :]        # (E,K,2)
    d2 = _point_segment_dist2(samples[:, :, None, :],
                              s0[None, None, :, :],
                              s1[None, None, :, :])       # (E,K,S)
    nearest = np.argmin(d2, axis=2)                       # (E,K)

    dots = np.abs((ehat[:, None, :] * nrm[nearest]).sum(axis=2))  # (E,K)
    # distance from the whole edge to each sample's chosen segment
    D = _segment_segment_dist(
        np.broadcast_to(a[:, None, :], nearest.shape + (2,)),
        np.broadcast_to(b[:, None, :], nearest.shape + (2,)),
        s0[nearest], s1[nearest],
    )
    return (dots + D * D).sum(axis=1)


def winding_numbers(loop: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Signed winding number of a closed polyline around each query point."""
    loop = np.asarray(loop, dtype=np.float64)
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    a = loop[None, :, :] - pts[:, None, :]
    b = np.roll(loop, -1, axis=0)[None, :, :] - pts[:, None, :]
    ang = np.arctan2(
        a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0],
        (a * b).sum(axis=-1),
    )
    return np.rint(ang.sum(axis=1) / (2.0 * np.pi)).astype(np.int64)
