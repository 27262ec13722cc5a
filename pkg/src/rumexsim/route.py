"""Open-tour construction and improvement over detected targets.

The robot route is a Hamiltonian path with a fixed start and, by default, a
free end. Construction is greedy nearest-neighbor; improvement runs
sequential 2-opt and segment-relocation (3-opt style) exchanges driven by
nearest-neighbor candidate lists and don't-look bits, followed by full
2-opt sweeps so the result is 2-opt stable whenever the time budget is not
exhausted. An exhaustive-permutation oracle covers small instances.
"""
from __future__ import annotations

import itertools
import math
import time
from collections import deque
from dataclasses import dataclass, replace

import numpy as np

from .errors import TooManyTargets
from .geo import LocalPoint

BRUTE_FORCE_LIMIT = 10
CANDIDATES = 8
_EPS = 1e-10


@dataclass(frozen=True)
class Tour:
    """Visit order over a target set; ``order[k]`` indexes the targets."""

    start: LocalPoint
    order: tuple[int, ...]
    length_m: float
    closed: bool = False


def _as_points(targets) -> np.ndarray:
    if isinstance(targets, np.ndarray):
        return targets.reshape(-1, 2).astype(float)
    return np.array([t.xy if isinstance(t, LocalPoint) else tuple(t)
                     for t in targets], dtype=float).reshape(-1, 2)


def _path_length(pts: np.ndarray, start_xy: np.ndarray, order, closed: bool) -> float:
    if len(order) == 0:
        return 0.0
    chain = np.vstack([start_xy, pts[list(order)]])
    length = float(np.linalg.norm(np.diff(chain, axis=0), axis=1).sum())
    if closed:
        length += float(np.linalg.norm(chain[-1] - chain[0]))
    return length


def tour_length(tour: Tour, targets) -> float:
    """Recompute the Euclidean length of a tour from scratch."""
    pts = _as_points(targets)
    return _path_length(pts, np.array(tour.start.xy), tour.order, tour.closed)


def nearest_neighbor(start: LocalPoint, targets, closed: bool = False) -> Tour:
    """Greedy construction: repeatedly append the closest unvisited target.

    Distance ties break toward the lowest target index.
    """
    pts = _as_points(targets)
    n = len(pts)
    if n == 0:
        return Tour(start=start, order=(), length_m=0.0, closed=closed)
    order = []
    remaining = np.ones(n, dtype=bool)
    cur = np.array(start.xy)
    length = 0.0
    for _ in range(n):
        d = np.linalg.norm(pts - cur, axis=1)
        d[~remaining] = np.inf
        nxt = int(np.argmin(d))  # argmin returns the first (lowest) index on ties
        length += float(d[nxt])
        order.append(nxt)
        remaining[nxt] = False
        cur = pts[nxt]
    if closed:
        length += float(np.linalg.norm(cur - np.array(start.xy)))
    return Tour(start=start, order=tuple(order), length_m=length, closed=closed)


def brute_force_optimal(start: LocalPoint, targets, closed: bool = False) -> Tour:
    """Exhaustive permutation search; ties break lexicographically.

    Only intended as an oracle; limited to 10 targets.
    """
    pts = _as_points(targets)
    n = len(pts)
    if n > BRUTE_FORCE_LIMIT:
        raise TooManyTargets(f"{n} targets exceeds brute-force limit {BRUTE_FORCE_LIMIT}")
    if n == 0:
        return Tour(start=start, order=(), length_m=0.0, closed=closed)
    nodes = np.vstack([np.array(start.xy), pts])  # node 0 = start
    D = np.linalg.norm(nodes[:, None, :] - nodes[None, :, :], axis=2)
    best_len = math.inf
    best_perm: tuple[int, ...] = ()
    perms = itertools.permutations(range(1, n + 1))
    while True:
        chunk = np.array(list(itertools.islice(perms, 200_000)), dtype=np.int64)
        if chunk.size == 0:
            break
        lengths = D[0, chunk[:, 0]].copy()
        for c in range(chunk.shape[1] - 1):
            lengths += D[chunk[:, c], chunk[:, c + 1]]
        if closed:
            lengths += D[chunk[:, -1], 0]
        k = int(np.argmin(lengths))  # first occurrence = lexicographically first
        if lengths[k] < best_len:
            best_len = float(lengths[k])
            best_perm = tuple(int(v) - 1 for v in chunk[k])
    return Tour(start=start, order=best_perm, length_m=best_len, closed=closed)


class _Path:
    """Mutable path of node ids (0 = start) with position lookup."""

    def __init__(self, nodes: np.ndarray, order: list[int], closed: bool):
        self.nodes = nodes
        self.D = np.linalg.norm(nodes[:, None, :] - nodes[None, :, :], axis=2)
        self.order = order            # order[0] == 0 always
        self.closed = closed
        self.pos = [0] * len(order)
        for i, v in enumerate(order):
            self.pos[v] = i

    @property
    def m(self) -> int:
        return len(self.order)

    def d(self, a: int, b: int) -> float:
        return float(self.D[a, b])

    def after_cost(self, j: int, node: int) -> float:
        """Cost of the edge leaving position j when ``node`` sits there."""
        if j < self.m - 1:
            return self.d(node, self.order[j + 1])
        return self.d(node, self.order[0]) if self.closed else 0.0

    def length(self) -> float:
        total = sum(self.d(self.order[i], self.order[i + 1]) for i in range(self.m - 1))
        if self.closed:
            total += self.d(self.order[-1], self.order[0])
        return total

    def _reindex(self) -> None:
        for i, v in enumerate(self.order):
            self.pos[v] = i

    def two_opt_gain(self, i: int, j: int) -> float:
        """Gain of reversing positions [i..j], 1 <= i < j <= m-1."""
        o = self.order
        old = self.d(o[i - 1], o[i]) + self.after_cost(j, o[j])
        new = self.d(o[i - 1], o[j]) + self.after_cost(j, o[i])
        return old - new

    def apply_two_opt(self, i: int, j: int) -> None:
        self.order[i:j + 1] = reversed(self.order[i:j + 1])
        self._reindex()

    def or_opt_gain(self, i: int, seg_len: int, k: int, flip: bool) -> float:
        """Gain of moving positions [i..i+L-1] to sit after position k.

        ``k`` refers to the pre-move ordering and must be outside
        [i-1, i+L-1]. With ``flip`` the segment is inserted reversed.
        """
        o = self.order
        L = seg_len
        j = i + L - 1
        s0, s1 = o[i], o[j]
        removed = self.d(o[i - 1], s0) + self.after_cost(j, s1)
        bridge = self.after_cost(j, o[i - 1]) if j == self.m - 1 \
            else self.d(o[i - 1], o[j + 1])
        head, tail = (s1, s0) if flip else (s0, s1)
        old_kedge = self.after_cost(k, o[k])
        if k == self.m - 1:
            added = self.d(o[k], head) + (self.d(tail, o[0]) if self.closed else 0.0)
        else:
            added = self.d(o[k], head) + self.d(tail, o[k + 1])
        return removed + old_kedge - bridge - added

    def apply_or_opt(self, i: int, seg_len: int, k: int, flip: bool) -> None:
        seg = self.order[i:i + seg_len]
        if flip:
            seg = seg[::-1]
        rest = self.order[:i] + self.order[i + seg_len:]
        # position k in pre-move indexing; segment removal shifts later slots
        insert_at = k + 1 if k < i else k + 1 - seg_len
        self.order = rest[:insert_at] + seg + rest[insert_at:]
        self._reindex()


def _candidate_lists(nodes: np.ndarray, k: int) -> list[list[int]]:
    D = np.linalg.norm(nodes[:, None, :] - nodes[None, :, :], axis=2)
    cands = []
    for i in range(len(nodes)):
        near = np.argsort(D[i], kind="stable")
        cands.append([int(j) for j in near if j != i][:k])
    return cands


def improve(tour: Tour, targets, max_depth: int = 3,
            time_budget_ms: float | None = None) -> Tour:
    """Local-search improvement; never returns a longer tour.

    Runs candidate-driven first-improvement exchanges (2-opt, plus segment
    relocation when ``max_depth`` >= 3) with don't-look bits, then full
    best-improvement 2-opt sweeps. Terminates when no move improves or the
    wall-clock budget runs out.
    """
    pts = _as_points(targets)
    n = len(pts)
    if n <= 1:
        return replace(tour, length_m=tour_length(tour, targets))
    if sorted(tour.order) != list(range(n)):
        raise ValueError("tour order is not a permutation of the targets")
    deadline = None if time_budget_ms is None else \
        time.monotonic() + time_budget_ms / 1000.0

    nodes = np.vstack([np.array(tour.start.xy), pts])
    path = _Path(nodes, [0] + [t + 1 for t in tour.order], tour.closed)
    cands = _candidate_lists(nodes, min(CANDIDATES, n))

    def out_of_time() -> bool:
        return deadline is not None and time.monotonic() > deadline

    queue = deque(path.order[1:])
    queued = [False] * (n + 1)
    for v in queue:
        queued[v] = True

    def wake(*vs: int) -> None:
        for v in vs:
            if v != 0 and not queued[v]:
                queued[v] = True
                queue.append(v)

    def try_node(v: int) -> bool:
        pv = path.pos[v]
        for u in cands[v]:
            pu = path.pos[u]
            lo, hi = min(pv, pu), max(pv, pu)
            # 2-opt reversals that make u adjacent to v or to v's neighbors
            for i, j in ((lo, hi), (lo + 1, hi), (lo, hi - 1)):
                if 1 <= i < j <= path.m - 1:
                    if path.two_opt_gain(i, j) > _EPS:
                        o = path.order
                        affected = [o[i - 1], o[i], o[j]] + \
                            ([o[j + 1]] if j < path.m - 1 else [])
                        path.apply_two_opt(i, j)
                        wake(*affected)
                        return True
            if max_depth >= 3:
                for L in (1, 2, 3):
                    i = path.pos[v]
                    if i + L - 1 > path.m - 1 or i < 1:
                        continue
                    for k in (path.pos[u], path.pos[u] - 1):
                        if k < 0 or k > path.m - 1 or i - 1 <= k <= i + L - 1:
                            continue
                        for flip in (False, True):
                            if path.or_opt_gain(i, L, k, flip) > _EPS:
                                o = path.order
                                affected = [o[max(i - 1, 0)], o[i], o[i + L - 1], o[k]]
                                if i + L - 1 < path.m - 1:
                                    affected.append(o[i + L])
                                if k < path.m - 1:
                                    affected.append(o[k + 1])
                                path.apply_or_opt(i, L, k, flip)
                                wake(*affected)
                                return True
        return False

    def candidate_phase() -> None:
        while queue:
            if out_of_time():
                return
            v = queue.popleft()
            queued[v] = False
            while try_node(v):
                if out_of_time():
                    return

    def full_two_opt_sweep() -> bool:
        """Vectorized best-improvement 2-opt over all position pairs."""
        o = np.array(path.order)
        DC = path.D[np.ix_(o, o)]
        m = path.m
        e = np.array([DC[i, i + 1] for i in range(m - 1)])
        after = np.empty(m)
        after[:m - 1] = e
        after[m - 1] = DC[m - 1, 0] if path.closed else 0.0
        i_idx = np.arange(1, m)
        j_idx = np.arange(1, m)
        g = e[i_idx - 1][:, None] + after[j_idx][None, :]
        g -= DC[np.ix_(i_idx - 1, j_idx)]
        b = np.empty((m - 1, m - 1))
        b[:, :m - 2] = DC[np.ix_(i_idx, j_idx[:-1] + 1)]
        b[:, m - 2] = DC[i_idx, 0] if path.closed else 0.0
        g -= b
        g[np.tril_indices(m - 1)] = -np.inf  # keep strictly i < j
        flat = int(np.argmax(g))
        gi, gj = divmod(flat, m - 1)
        if g[gi, gj] <= _EPS:
            return False
        path.apply_two_opt(int(i_idx[gi]), int(j_idx[gj]))
        return True

    while True:
        candidate_phase()
        if out_of_time():
            break
        if not full_two_opt_sweep():
            break
        o = path.order
        wake(*o[1:])

    order = tuple(v - 1 for v in path.order[1:])
    length = _path_length(pts, nodes[0], order, tour.closed)
    if length > tour.length_m + 1e-9:
        # local search must never lose ground; fall back to the input
        return replace(tour, length_m=tour_length(tour, targets))
    return Tour(start=tour.start, order=order, length_m=length, closed=tour.closed)
