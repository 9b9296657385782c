"""Priority belief propagation with dynamic label pruning.

Min-sum formulation: beliefs are stored as ``b_p(x) = -(V_p(x) + sum of
incoming messages)``, so the best label of a node has relative belief
``b_rel = b - b_max = 0`` and everything else is negative. A node whose
confident-label set ``{x : b_rel(x) >= b_conf}`` is small knows what it
wants and gets a high priority ``1 / |set|``; it is visited early, prunes
its labels to the confident ones (clamped to [l_min, l_max]), and sends
informative messages while undecided nodes wait. Each iteration is one such
forward pass followed by a backward sweep in reverse commit order.

The solver works on any graph + tables pair exposing the small interface
described by :class:`Graph` and :class:`DenseTables`; the image-backed
implementation is :class:`depthfill.potentials.PatchEnergy`.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class SolverParams:
    """Scheduling constants.

    ``b_conf = None`` uses the tables' own default (patch-energy tables
    derive it from the patch area; dense test tables fall back to -inf,
    meaning every label counts as confident).
    """

    b_conf: float | None = None
    l_min: int = 3
    l_max: int = 50
    max_iters: int = 2
    damping: float = 0.0
    tol: float = 1e-9

    def __post_init__(self):
        if not (1 <= self.l_min <= self.l_max):
            raise ValueError("need 1 <= labels-min <= labels-max")
        if self.max_iters < 1:
            raise ValueError("iters must be >= 1")
        if not (0.0 <= self.damping < 1.0):
            raise ValueError("damping must be in [0, 1)")
        if self.b_conf is not None and self.b_conf > 0:
            raise ValueError("bconf is a relative-belief threshold and must be <= 0")


@dataclass
class Graph:
    """Minimal MRF topology: node count and undirected edges."""

    n_nodes: int
    edges: list[tuple[int, int]]
    _adj: list[list[int]] | None = field(default=None, repr=False)

    def neighbors(self, p: int) -> list[int]:
        if self._adj is None:
            adj: list[list[int]] = [[] for _ in range(self.n_nodes)]
            for i, j in self.edges:
                adj[i].append(j)
                adj[j].append(i)
            for lst in adj:
                lst.sort()
            self._adj = adj
        return self._adj[p]


class DenseTables:
    """Explicit energy tables, mainly for tests and small synthetic MRFs.

    ``unary_tables[p]`` is a vector over node p's labels; ``pairwise_tables``
    maps an undirected edge (i, j) with i < j to a (K_i, K_j) matrix.
    """

    def __init__(self, unary_tables: list[np.ndarray], pairwise_tables: dict):
        self._unary = [np.asarray(u, dtype=np.float64) for u in unary_tables]
        self._pairwise = {k: np.asarray(v, dtype=np.float64) for k, v in pairwise_tables.items()}

    def labels_of(self, p: int) -> np.ndarray:
        return np.arange(len(self._unary[p]), dtype=np.int64)

    def unary(self, p: int) -> np.ndarray:
        return self._unary[p]

    def pairwise(self, p: int, q: int, ids_p: np.ndarray, ids_q: np.ndarray) -> np.ndarray:
        if (p, q) in self._pairwise:
            return self._pairwise[(p, q)][np.ix_(ids_p, ids_q)]
        return self._pairwise[(q, p)].T[np.ix_(ids_p, ids_q)]

    def default_b_conf(self) -> float:
        return -math.inf


@dataclass
class BeliefState:
    """Mutable solver state: per-node active labels, their data costs, and
    incoming messages per directed edge."""

    active: list[np.ndarray]
    unary: list[np.ndarray]
    messages: dict[tuple[int, int], np.ndarray]
    b_conf: float
    neighbors: list[list[int]]

    def beliefs(self, p: int) -> np.ndarray:
        e = self.unary[p].copy()
        for r in self.neighbors[p]:
            e += self.messages[(r, p)]
        return -e

    def relative_beliefs(self, p: int) -> np.ndarray:
        b = self.beliefs(p)
        return b - b.max()

    def confident_count(self, p: int) -> int:
        return int((self.relative_beliefs(p) >= self.b_conf).sum())


@dataclass
class Diagnostics:
    passes: int = 0
    converged: bool = False
    final_energy: float = float("nan")
    labels_pruned: int = 0
    commits: int = 0
    message_delta: float = float("inf")


def init_beliefs(graph, tables, params: SolverParams) -> BeliefState:
    """All messages zero; beliefs are the negated data costs."""
    b_conf = params.b_conf
    if b_conf is None:
        b_conf = tables.default_b_conf() if hasattr(tables, "default_b_conf") else -math.inf
    neighbors = [list(graph.neighbors(p)) for p in range(graph.n_nodes)]
    active = [np.array(tables.labels_of(p), dtype=np.int64) for p in range(graph.n_nodes)]
    unary = [np.array(tables.unary(p), dtype=np.float64) for p in range(graph.n_nodes)]
    messages = {}
    for p in range(graph.n_nodes):
        for q in neighbors[p]:
            messages[(p, q)] = np.zeros(len(active[q]))
    return BeliefState(active=active, unary=unary, messages=messages, b_conf=b_conf, neighbors=neighbors)


def node_priority(state: BeliefState, p: int) -> float:
    """1 / (number of confident labels); indetermined nodes score low."""
    return 1.0 / max(state.confident_count(p), 1)


def send_message(state: BeliefState, p: int, q: int, tables, params: SolverParams) -> float:
    """Min-sum update of the message p -> q over q's active labels.

    Minimizes data cost + full edge cost + incoming messages to p except the
    one from q, over p's active labels; the result is normalized to minimum
    0 and damped against the previous message. Returns the max absolute
    change (for convergence tracking).
    """
    ids_p, ids_q = state.active[p], state.active[q]
    e = state.unary[p].copy()
    for r in state.neighbors[p]:
        if r != q:
            e += state.messages[(r, p)]
    table = tables.pairwise(p, q, ids_p, ids_q)
    m_new = (e[:, None] + table).min(axis=0)
    m_new -= m_new.min()
    old = state.messages[(p, q)]
    if params.damping > 0.0:
        m_new = (1.0 - params.damping) * m_new + params.damping * old
    delta = float(np.abs(m_new - old).max()) if len(old) else 0.0
    state.messages[(p, q)] = m_new
    return delta


def prune_labels(state: BeliefState, p: int, params: SolverParams) -> int:
    """Drop low-belief labels of p at commit time.

    Keeps the confident labels, clamped to [l_min, l_max] in best-belief
    order; the maximum-belief label always survives. Incoming messages are
    sliced to the survivors. Returns the number of labels removed.
    """
    b = state.beliefs(p)
    rel = b - b.max()
    n_conf = int((rel >= state.b_conf).sum())
    n_keep = min(max(n_conf, params.l_min), params.l_max, len(b))
    if n_keep >= len(b):
        return 0
    # stable sort by belief descending; ties keep the lower label index
    order = np.argsort(-b, kind="stable")[:n_keep]
    keep = np.sort(order)
    removed = len(b) - n_keep
    state.active[p] = state.active[p][keep]
    state.unary[p] = state.unary[p][keep]
    for r in state.neighbors[p]:
        state.messages[(r, p)] = state.messages[(r, p)][keep]
    return removed


def _decode(state: BeliefState) -> np.ndarray:
    """Per-node argmax belief; ties resolve to the lowest label index."""
    out = np.empty(len(state.active), dtype=np.int64)
    for p in range(len(state.active)):
        b = state.beliefs(p)
        out[p] = state.active[p][int(np.argmax(b))]
    return out


def assignment_energy(graph, tables, assignment: np.ndarray) -> float:
    """Energy of an assignment of global label ids, via the tables."""
    assignment = np.asarray(assignment)
    e = 0.0
    buf_i = np.empty(1, dtype=np.int64)
    buf_j = np.empty(1, dtype=np.int64)
    for p in range(graph.n_nodes):
        ids = np.asarray(tables.labels_of(p))
        pos = int(np.searchsorted(ids, assignment[p]))
        e += float(np.asarray(tables.unary(p))[pos])
    for i, j in graph.edges:
        buf_i[0], buf_j[0] = assignment[i], assignment[j]
        e += float(tables.pairwise(i, j, buf_i, buf_j)[0, 0])
    return e


def run_priority_bp(graph, tables, params: SolverParams) -> tuple[np.ndarray, Diagnostics]:
    """Minimize the MRF energy; returns (assignment, diagnostics).

    Each iteration runs a forward pass (commit nodes in descending priority,
    prune, send outgoing messages) and a backward pass (messages in reverse
    commit order, no pruning). Non-convergence within ``max_iters`` is not
    an error: the best assignment seen is returned with ``converged=False``.
    """
    diag = Diagnostics()
    if graph.n_nodes == 0:
        diag.converged = True
        diag.final_energy = 0.0
        return np.empty(0, dtype=np.int64), diag

    state = init_beliefs(graph, tables, params)
    # the no-message decode (per-node data-cost argmin) seeds the best-so-far
    # tracker, so the result is never worse than the trivial baseline
    best_assignment = _decode(state)
    best_energy = assignment_energy(graph, tables, best_assignment)

    for it in range(params.max_iters):
        delta = 0.0

        # forward pass: lazy max-heap over (priority, node id), entries
        # invalidated by a version stamp when a node's beliefs change
        version = [0] * graph.n_nodes
        committed = [False] * graph.n_nodes
        heap: list[tuple[float, int, int]] = []
        for p in range(graph.n_nodes):
            heapq.heappush(heap, (-node_priority(state, p), p, 0))
        order: list[int] = []
        while len(order) < graph.n_nodes:
            neg_prio, p, stamp = heapq.heappop(heap)
            if committed[p] or stamp != version[p]:
                continue  # stale entry; a fresher one is in the heap
            diag.labels_pruned += prune_labels(state, p, params)
            committed[p] = True
            diag.commits += 1
            order.append(p)
            for q in state.neighbors[p]:
                delta = max(delta, send_message(state, p, q, tables, params))
                if not committed[q]:
                    version[q] += 1
                    heapq.heappush(heap, (-node_priority(state, q), q, version[q]))

        # backward pass: reverse commit order, no pruning
        for p in reversed(order):
            for q in state.neighbors[p]:
                delta = max(delta, send_message(state, p, q, tables, params))

        assignment = _decode(state)
        energy = assignment_energy(graph, tables, assignment)
        if energy < best_energy:
            best_energy = energy
            best_assignment = assignment
        diag.passes = it + 1
        diag.message_delta = delta
        if delta < params.tol:
            diag.converged = True
            break

    diag.final_energy = best_energy
    return best_assignment, diag


def brute_force_solve(graph, tables, limit: int = 10**6) -> tuple[np.ndarray, float]:
    """Exhaustive minimum over all assignments (test oracle).

    Enumerates in lexicographic order over node label positions, so ties
    resolve to the lexicographically smallest assignment. Refuses instances
    with more than ``limit`` assignments.
    """
    sizes = [len(tables.labels_of(p)) for p in range(graph.n_nodes)]
    if graph.n_nodes == 0:
        return np.empty(0, dtype=np.int64), 0.0
    total = math.prod(sizes)
    if total > limit:
        raise ValueError(f"instance too large for brute force: {total} > {limit}")

    grids = np.indices(sizes).reshape(graph.n_nodes, -1)  # lexicographic columns
    energy = np.zeros(grids.shape[1])
    for p in range(graph.n_nodes):
        energy += np.asarray(tables.unary(p))[grids[p]]
    for i, j in graph.edges:
        table = tables.pairwise(i, j, tables.labels_of(i), tables.labels_of(j))
        energy += table[grids[i], grids[j]]
    k = int(np.argmin(energy))
    assignment = np.array(
        [np.asarray(tables.labels_of(p))[grids[p, k]] for p in range(graph.n_nodes)],
        dtype=np.int64,
    )
    return assignment, float(energy[k])
