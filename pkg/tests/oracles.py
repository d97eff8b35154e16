"""Slow, obviously-correct reference implementations used by the tests.

Nothing here imports the package's numeric code: each oracle is a direct
loop over the defining formula so that a vectorization or indexing slip in
the library shows up as a mismatch.
"""
from __future__ import annotations

import cmath
import math


# ---------------------------------------------------------------------------
# Signal transforms
# ---------------------------------------------------------------------------


def hann_periodic(n):
    return [0.5 - 0.5 * math.cos(2.0 * math.pi * k / n) for k in range(n)]


def naive_stft_magnitudes(x, frame_length, hop):
    """``[n_bins][n_frames]`` magnitudes by direct summation of the DFT."""
    w = hann_periodic(frame_length)
    n_frames = (len(x) - frame_length) // hop + 1
    n_bins = frame_length // 2 + 1
    out = [[0.0] * n_frames for _ in range(n_bins)]
    for f in range(n_frames):
        seg = [x[f * hop + n] * w[n] for n in range(frame_length)]
        for k in range(n_bins):
            acc = 0j
            for n in range(frame_length):
                acc += seg[n] * cmath.exp(-2j * math.pi * k * n / frame_length)
            out[k][f] = abs(acc)
    return out


def ricker(t):
    return 2.0 / (math.sqrt(3.0) * math.pi ** 0.25) * (1.0 - t * t) * math.exp(-t * t / 2.0)


def direct_cwt_row(x, scale):
    """``W(a, b) = sum_t x[t] psi((t - b) / a) / sqrt(a)`` over the whole signal."""
    n = len(x)
    norm = 1.0 / math.sqrt(scale)
    return [sum(x[t] * ricker((t - b) / scale) for t in range(n)) * norm for b in range(n)]


def dft_stft_magnitudes(x, frame_length, hop):
    """Same definition as ``naive_stft_magnitudes`` as an explicit DFT-matrix product.

    Used where the pure-Python loop would be too slow for a large batch; the
    acceptance suite checks the two against each other.
    """
    import numpy as np

    x = np.asarray(x, dtype=float)
    n = np.arange(frame_length)
    k = np.arange(frame_length // 2 + 1)
    basis = np.exp(-2j * np.pi * np.outer(k, n) / frame_length)
    w = np.array(hann_periodic(frame_length))
    n_frames = (len(x) - frame_length) // hop + 1
    frames = np.array([x[f * hop:f * hop + frame_length] * w for f in range(n_frames)])
    return np.abs(basis @ frames.T)


def direct_cwt_matrix(n, scale):
    """``M`` with ``(M @ x)[b] == direct_cwt_row(x, scale)[b]`` for length-``n`` input."""
    import numpy as np

    t = np.arange(n, dtype=float)
    d = (t[None, :] - t[:, None]) / scale
    c = 2.0 / (math.sqrt(3.0) * math.pi ** 0.25)
    return c * (1.0 - d * d) * np.exp(-d * d / 2.0) / math.sqrt(scale)


def loop_moving_average(values, window):
    n = len(values)
    out = []
    for i in range(n):
        lo = max(i - window // 2, 0)
        hi = min(i + (window - 1) // 2, n - 1)
        seg = [abs(values[j]) for j in range(lo, hi + 1)]
        out.append(sum(seg) / len(seg))
    return out


def gate_tau(m):
    return 8.0 * m * m + 2.4 * m + 0.024


def gate_keep(s, m):
    return s if abs(s) >= gate_tau(m) else 0.0


def loop_bilinear(a, out_h, out_w):
    """Corner-aligned bilinear resize, one output pixel at a time."""
    in_h, in_w = len(a), len(a[0])

    def coord(i, n_in, n_out):
        if n_in == 1 or n_out == 1:
            return 0.0
        return i * (n_in - 1) / (n_out - 1)

    out = [[0.0] * out_w for _ in range(out_h)]
    for r in range(out_h):
        y = coord(r, in_h, out_h)
        y0 = min(int(math.floor(y)), in_h - 1)
        y1 = min(y0 + 1, in_h - 1)
        fy = y - y0
        for c in range(out_w):
            x = coord(c, in_w, out_w)
            x0 = min(int(math.floor(x)), in_w - 1)
            x1 = min(x0 + 1, in_w - 1)
            fx = x - x0
            top = a[y0][x0] * (1 - fx) + a[y0][x1] * fx
            bot = a[y1][x0] * (1 - fx) + a[y1][x1] * fx
            out[r][c] = top * (1 - fy) + bot * fy
    return out


def waveform_column(value, size):
    """Set of lit rows for one waveform column."""
    mid = size // 2
    v = min(max(value, -1.0), 1.0)
    tip = int(round(mid * (1.0 - v)))
    tip = min(max(tip, 0), size - 1)
    return set(range(min(tip, mid), max(tip, mid) + 1))


def naive_peak_bin(x, n_fft):
    """Index of the largest one-sided DFT magnitude of zero-padded ``x``."""
    best, best_k = -1.0, 0
    for k in range(n_fft // 2 + 1):
        acc = 0j
        for n, v in enumerate(x):
            acc += v * cmath.exp(-2j * math.pi * k * n / n_fft)
        if abs(acc) > best + 1e-12:
            best, best_k = abs(acc), k
    return best_k


# ---------------------------------------------------------------------------
# Intervals
# ---------------------------------------------------------------------------


def loop_group(indices, max_gap):
    """Groups of sorted indices, split wherever the step exceeds ``max_gap``."""
    groups = []
    for i in indices:
        if groups and i - groups[-1][-1] <= max_gap:
            groups[-1].append(i)
        else:
            groups.append([i])
    return groups


def union_find_merge(intervals):
    """Connected components of overlapping-or-touching intervals as ``(lo, hi)``."""
    n = len(intervals)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            (a0, a1), (b0, b1) = intervals[i], intervals[j]
            if a0 <= b1 and b0 <= a1:
                parent[find(i)] = find(j)
    comps = {}
    for i in range(n):
        comps.setdefault(find(i), []).append(intervals[i])
    return sorted((min(s for s, _ in c), max(e for _, e in c)) for c in comps.values())


def pairwise_overlap_counts(det, ann, partial, full):
    """Counts from the all-pairs coverage definition."""

    def best_cov(a, others):
        d = a[1] - a[0]
        best = 0.0
        for b in others:
            inter = min(a[1], b[1]) - max(a[0], b[0])
            if d > 0:
                frac = max(inter, 0.0) / d
            else:
                frac = 1.0 if inter >= 0 else 0.0
            best = max(best, frac)
        return best

    dc = [best_cov(d, ann) for d in det]
    ac = [best_cov(a, det) for a in ann]
    return {
        "tp_partial": sum(c >= partial for c in dc),
        "tp_full": sum(c >= full for c in dc),
        "found_partial": sum(c >= partial for c in ac),
        "found_full": sum(c >= full for c in ac),
    }


def containment_counts(det, ann):
    tp = sum(any(a0 <= (d0 + d1) / 2 <= a1 for a0, a1 in ann) for d0, d1 in det)
    found = sum(any(a0 <= (d0 + d1) / 2 <= a1 for d0, d1 in det) for a0, a1 in ann)
    return tp, found


def pearson(xs, ys):
    n = len(xs)
    mx, my = sum(xs) / n, sum(ys) / n
    sxy = sum((x - mx) * (y - my) for x, y in zip(xs, ys))
    sxx = sum((x - mx) ** 2 for x in xs)
    syy = sum((y - my) ** 2 for y in ys)
    return sxy / math.sqrt(sxx * syy)


# ---------------------------------------------------------------------------
# Forest
# ---------------------------------------------------------------------------


def walk_tree(tree, row):
    node = 0
    while tree.feature[node] >= 0:
        f = tree.feature[node]
        node = tree.left[node] if row[f] <= tree.threshold[node] else tree.right[node]
    counts = list(tree.counts[node])
    return counts.index(max(counts))


def vote_count(trees, row, n_classes):
    votes = [0] * n_classes
    for t in trees:
        votes[walk_tree(t, row)] += 1
    winner = votes.index(max(votes))  # first maximum = lowest index
    return votes, winner


def gini_loop(labels, n_classes):
    n = len(labels)
    if n == 0:
        return 0.0
    return 1.0 - sum((labels.count(c) / n) ** 2 for c in range(n_classes))
