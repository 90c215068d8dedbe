"""Integral solutions: exact brute force, randomized rounding, baselines, local search.

A labeling is an int64 vector over all instance vertices whose entries are
terminal vertex ids, with every terminal fixed to itself.  All solvers are
pure in (instance, seed) and may be run concurrently on independent seeds;
costs are accumulated in edge-id order so reported values are bit-stable.
"""
from __future__ import annotations

import numpy as np

from .graphs import _fisher_yates
from .instance import ZeroExtInstance
from .relaxation import GapSemiMetric, SemiMetric


class SolverError(ValueError):
    pass


class TooLargeError(SolverError):
    pass


def validate_labeling(f: np.ndarray, inst: ZeroExtInstance) -> np.ndarray:
    f = np.asarray(f, dtype=np.int64)
    if f.shape != (inst.vertex_count,):
        raise SolverError(f"labeling has shape {f.shape}, expected ({inst.vertex_count},)")
    if np.any(inst.term_index[f] < 0):
        bad = int(np.flatnonzero(inst.term_index[f] < 0)[0])
        raise SolverError(f"vertex {bad} is labeled with non-terminal {f[bad]}")
    terms = inst.terminals
    if np.any(f[terms] != terms):
        bad = int(terms[np.flatnonzero(f[terms] != terms)[0]])
        raise SolverError(f"terminal {bad} is not fixed to itself")
    return f


def integral_cost(f: np.ndarray, inst: ZeroExtInstance) -> float:
    """Sum over edges of weight times terminal distance between the labels."""
    f = validate_labeling(f, inst)
    fi = inst.term_index[f]
    m = inst.graph.edge_count
    uu = np.fromiter((u for u, _ in inst.graph.edges), dtype=np.int64, count=m)
    vv = np.fromiter((v for _, v in inst.graph.edges), dtype=np.int64, count=m)
    return float(np.sum(inst.weights * inst.metric.pair_values(fi[uu], fi[vv])))


# -- exact oracle -------------------------------------------------------------


def brute_force(inst: ZeroExtInstance, cap: int = 10_000_000) -> tuple[np.ndarray, float]:
    """Global optimum by exhaustive enumeration of k^m labelings.

    Ties break to the lexicographically smallest labeling (in terminal-index
    digits over non-terminals in vertex order).  Refuses above `cap`.
    """
    nonterms = inst.nonterminals()
    m = nonterms.size
    k = inst.k
    total = k**m
    if total > cap:
        raise TooLargeError(f"{k}^{m} = {total} labelings exceed cap {cap}")
    D = inst.metric.matrix()
    pos_of = {int(v): i for i, v in enumerate(nonterms)}

    # Split edges by how many endpoints are free.
    const_cost = 0.0
    one_free: list[tuple[int, int, float]] = []   # (free position, terminal pos, w)
    two_free: list[tuple[int, int, float]] = []   # (free position u, free position v, w)
    for eid, (u, v) in enumerate(inst.graph.edges):
        w = float(inst.weights[eid])
        iu, iv = int(inst.term_index[u]), int(inst.term_index[v])
        if iu >= 0 and iv >= 0:
            const_cost += w * D[iu, iv]
        elif iu >= 0:
            one_free.append((pos_of[v], iu, w))
        elif iv >= 0:
            one_free.append((pos_of[u], iv, w))
        else:
            two_free.append((pos_of[u], pos_of[v], w))

    best_cost = np.inf
    best_digits = None
    chunk = 1 << 14
    powers = k ** np.arange(m - 1, -1, -1, dtype=np.int64) if m else np.zeros(0, dtype=np.int64)
    for start in range(0, max(total, 1), chunk):
        stop = min(start + chunk, total)
        idx = np.arange(start, stop, dtype=np.int64)
        digits = (idx[:, None] // powers[None, :]) % k if m else np.zeros((idx.size, 0), dtype=np.int64)
        costs = np.full(idx.size, const_cost)
        for pos, tpos, w in one_free:
            costs += w * D[digits[:, pos], tpos]
        for pu, pv, w in two_free:
            costs += w * D[digits[:, pu], digits[:, pv]]
        j = int(np.argmin(costs))
        if costs[j] < best_cost:  # strict: keeps the first (lex-least) optimum
            best_cost = float(costs[j])
            best_digits = digits[j].copy()
    f = np.zeros(inst.vertex_count, dtype=np.int64)
    f[inst.terminals] = inst.terminals
    if m:
        f[nonterms] = inst.terminals[best_digits]
    return f, best_cost


# -- randomized rounding -------------------------------------------------------


def ckr_round(inst: ZeroExtInstance, delta: SemiMetric, seed: int) -> np.ndarray:
    """Ball-growing rounding of a feasible fractional solution.

    Draw r uniform in [1, 2) and a uniform random terminal permutation;
    terminals are processed in permutation order and every still-unassigned
    non-terminal u joins the first terminal t with delta(u, t) <= r * A_u,
    where A_u is u's distance to its closest terminal.  Any leftover vertex
    (impossible in exact arithmetic, kept as a float guard) goes to its
    nearest terminal.  Deterministic given the seed; terminals stay fixed.
    """
    rng = np.random.default_rng(int(seed))
    r = 1.0 + float(rng.random())
    k = inst.k
    perm = _fisher_yates(rng, k)

    n = inst.vertex_count
    all_v = np.arange(n, dtype=np.int64)
    a_min = _nearest_terminal_distance(inst, delta)

    f = np.full(n, -1, dtype=np.int64)
    f[inst.terminals] = inst.terminals
    unassigned = inst.term_index < 0
    bound = r * a_min
    for tpos in perm:
        if not unassigned.any():
            break
        t_vertex = int(inst.terminals[tpos])
        col = delta.pair_values(all_v, np.full(n, t_vertex, dtype=np.int64))
        take = unassigned & (col <= bound)
        f[take] = t_vertex
        unassigned &= ~take
    if unassigned.any():
        for v in np.flatnonzero(unassigned):
            col = delta.pair_values(
                np.full(k, v, dtype=np.int64), inst.terminals.astype(np.int64)
            )
            f[v] = int(inst.terminals[int(np.argmin(col))])
    return f


def _nearest_terminal_distance(inst: ZeroExtInstance, delta: SemiMetric) -> np.ndarray:
    if isinstance(delta, GapSemiMetric) and delta.dx is not None:
        a = np.concatenate([delta.dx.min(axis=1) + delta.big_l, np.zeros(delta.k)])
        return a
    n = inst.vertex_count
    all_v = np.arange(n, dtype=np.int64)
    a = np.full(n, np.inf)
    for t in inst.terminals:
        col = delta.pair_values(all_v, np.full(n, int(t), dtype=np.int64))
        np.minimum(a, col, out=a)
    return a


# -- deterministic baselines ----------------------------------------------------


def baseline_labelings(inst: ZeroExtInstance) -> dict[str, np.ndarray]:
    """The two deterministic baselines: all_to_one and nearest_terminal.

    all_to_one scans every terminal exhaustively (k is capped at 4096) and
    keeps the cheapest; nearest_terminal assigns every vertex to its closest
    terminal under the instance's path lengths, ties to the smallest
    terminal id.  On gap instances the latter is the identity v -> v_T.
    """
    return {
        "all_to_one": all_to_one(inst),
        "nearest_terminal": nearest_terminal(inst),
    }


def all_to_one(inst: ZeroExtInstance) -> np.ndarray:
    k = inst.k
    if k > 4096:
        raise TooLargeError(f"all_to_one scan is capped at k=4096 terminals, got {k}")
    if inst.is_gap:
        # Only pendant edges can cross; they share weight 1/L.
        cost_vec = inst.weights[-1] * inst.metric.rowsums()
    else:
        D = inst.metric.matrix()
        cost_vec = np.zeros(k)
        for eid, (u, v) in enumerate(inst.graph.edges):
            iu, iv = int(inst.term_index[u]), int(inst.term_index[v])
            w = float(inst.weights[eid])
            if iu >= 0 and iv >= 0:
                cost_vec += w * D[iu, iv]
            elif iu >= 0:
                cost_vec += w * D[:, iu]
            elif iv >= 0:
                cost_vec += w * D[:, iv]
    # Tie-break on terminal id, not position.
    order = np.argsort(inst.terminals, kind="stable")
    best = order[int(np.argmin(cost_vec[order]))]
    t_star = int(inst.terminals[best])
    f = np.full(inst.vertex_count, t_star, dtype=np.int64)
    f[inst.terminals] = inst.terminals
    return f


def nearest_terminal(inst: ZeroExtInstance) -> np.ndarray:
    f = np.full(inst.vertex_count, -1, dtype=np.int64)
    f[inst.terminals] = inst.terminals
    if inst.is_gap:
        dx = inst.origin.dx
        if dx is None:
            # Pendant structure makes v -> v_T the unique nearest choice.
            f[: inst.k] = inst.terminals
            return f
        nearest = np.argmin(dx, axis=1)  # self-distance 0 wins; unique minimum
        f[: inst.k] = inst.terminals[nearest]
        return f
    from scipy.sparse import coo_matrix
    from scipy.sparse.csgraph import dijkstra

    w = inst.weights
    keep = w > 0
    us = np.array([u for u, _ in inst.graph.edges])[keep]
    vs = np.array([v for _, v in inst.graph.edges])[keep]
    lengths = 1.0 / w[keep]
    n = inst.vertex_count
    mat = coo_matrix((lengths, (us, vs)), shape=(n, n)).tocsr()
    order = np.argsort(inst.terminals, kind="stable")
    dist = dijkstra(mat, directed=False, indices=inst.terminals[order])
    if np.any(np.isinf(dist.min(axis=0))):
        bad = int(np.flatnonzero(np.isinf(dist.min(axis=0)))[0])
        raise SolverError(f"vertex {bad} cannot reach any terminal")
    choice = np.argmin(dist, axis=0)  # first occurrence = smallest terminal id
    f = inst.terminals[order][choice]
    f[inst.terminals] = inst.terminals
    return f.astype(np.int64)


# -- local search ----------------------------------------------------------------


def local_search(inst: ZeroExtInstance, f: np.ndarray, max_rounds: int = 100) -> np.ndarray:
    """Steepest single-vertex relabeling descent.

    Each round evaluates every (vertex, terminal) move and applies the single
    best strictly-improving one; stops at a local optimum or after
    max_rounds.  The result never costs more than the input.
    """
    f = validate_labeling(f, inst).copy()
    nonterms = inst.nonterminals()
    if nonterms.size == 0 or max_rounds <= 0:
        return f
    # Per-vertex incident edge data.
    incident: dict[int, list[tuple[int, float]]] = {int(v): [] for v in nonterms}
    for eid, (u, v) in enumerate(inst.graph.edges):
        w = float(inst.weights[eid])
        if u == v:
            continue
        if int(inst.term_index[u]) < 0:
            incident[int(u)].append((int(v), w))
        if int(inst.term_index[v]) < 0:
            incident[int(v)].append((int(u), w))
    order = np.argsort(inst.terminals, kind="stable")
    terminals_by_id = inst.terminals[order]

    for _ in range(int(max_rounds)):
        fi = inst.term_index[f]
        best_gain = 0.0
        best_move = None
        for v in nonterms:
            pairs = incident[int(v)]
            if not pairs:
                continue
            others = np.fromiter((fi[o] for o, _ in pairs), dtype=np.int64, count=len(pairs))
            ws = np.fromiter((w for _, w in pairs), dtype=float, count=len(pairs))
            rows = _metric_rows(inst, others)  # (deg, k)
            cand = ws @ rows
            cand = cand[order]
            cur = float(cand[np.flatnonzero(terminals_by_id == f[v])[0]])
            j = int(np.argmin(cand))
            gain = cur - float(cand[j])
            if gain > best_gain + 1e-12 * max(1.0, abs(cur)):
                best_gain = gain
                best_move = (int(v), int(terminals_by_id[j]))
        if best_move is None:
            break
        f[best_move[0]] = best_move[1]
    return f


def _metric_rows(inst: ZeroExtInstance, positions: np.ndarray) -> np.ndarray:
    met = inst.metric
    if met.kind == "dense":
        return met.mat[positions]
    if met.kind == "gap":
        rows = met.dx[positions] + met.two_l
        rows[np.arange(positions.size), positions] = 0.0
        return rows
    return np.stack([met.row(int(p)) for p in positions])


# -- labeling files ---------------------------------------------------------------


def save_labeling(f: np.ndarray, path) -> None:
    with open(path, "w") as fh:
        for v, t in enumerate(np.asarray(f, dtype=np.int64)):
            fh.write(f"{v} {int(t)}\n")


def load_labeling(path, inst: ZeroExtInstance) -> np.ndarray:
    f = np.full(inst.vertex_count, -1, dtype=np.int64)
    with open(path) as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            f[int(parts[0])] = int(parts[1])
    return validate_labeling(f, inst)
