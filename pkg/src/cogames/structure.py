"""Response graphs, the harmonic-game test and sink strongly connected components."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import null_space
from scipy.optimize import linprog

from .core import CardinalGame, ContextOrdinalGame, PreferenceRelation
from .errors import UnsupportedRuleError

HARMONIC_MIN_WEIGHT = 1e-6


@dataclass(frozen=True)
class Arc:
    source: tuple
    target: tuple
    player: int
    weight: float | None  # payoff gain; None for purely ordinal arcs


@dataclass
class ResponseGraph:
    """Joint pure profiles linked by unilateral deviations that do not hurt the deviator."""

    action_counts: tuple
    arcs: list = field(default_factory=list)

    @property
    def nodes(self) -> list:
        return list(itertools.product(*(range(m) for m in self.action_counts)))

    def adjacency(self) -> dict:
        adj = {v: [] for v in self.nodes}
        for a in self.arcs:
            adj[a.source].append(a.target)
        return adj


def response_graph(game, strict: bool = False, tol: float = 1e-12) -> ResponseGraph:
    """Arcs for every unilateral deviation with non-negative gain (positive only if ``strict``).

    ``game`` is a cardinal game (arcs weighted by payoff gain) or a COG with deterministic
    preferences (arcs follow the ranking, no weights).
    """
    if isinstance(game, CardinalGame):
        def gain(i, a, b):
            return float(game.payoffs[i][b] - game.payoffs[i][a])
    elif isinstance(game, ContextOrdinalGame):
        def gain(i, a, b):
            pref = game.preference(i, tuple(v for j, v in enumerate(a) if j != i))
            if not isinstance(pref, PreferenceRelation):
                raise UnsupportedRuleError("ordinal response graphs need deterministic preferences")
            lv = pref.levels
            return float(np.sign(lv[a[i]] - lv[b[i]]))
    else:
        raise TypeError("response_graph needs a CardinalGame or a ContextOrdinalGame")
    weighted = isinstance(game, CardinalGame)
    g = ResponseGraph(tuple(game.action_counts))
    for a in g.nodes:
        for i, m in enumerate(g.action_counts):
            for alt in range(m):
                if alt == a[i]:
                    continue
                b = a[:i] + (alt,) + a[i + 1:]
                d = gain(i, a, b)
                if d > tol or (not strict and d >= -tol):
                    g.arcs.append(Arc(a, b, i, max(d, 0.0) if weighted else None))
    return g


# ------------------------------------------------------------ harmonic games


@dataclass
class HarmonicReport:
    is_harmonic: bool
    deviation_matrix: np.ndarray
    nullspace_dim: int
    rank: int
    weights: np.ndarray | None
    row_labels: list
    column_labels: list


def deviation_matrix(nfg: CardinalGame):
    """Rows: joint profiles; columns: (player, action); entry u_i(a) - u_i(a', a_{-i})."""
    counts = nfg.action_counts
    rows = list(itertools.product(*(range(m) for m in counts)))
    cols = [(i, k) for i, m in enumerate(counts) for k in range(m)]
    A = np.zeros((len(rows), len(cols)))
    for r, a in enumerate(rows):
        for c, (i, k) in enumerate(cols):
            b = a[:i] + (k,) + a[i + 1:]
            A[r, c] = nfg.payoffs[i][a] - nfg.payoffs[i][b]
    return A, rows, cols


def harmonic_check(nfg: CardinalGame) -> HarmonicReport:
    """Is there a strictly positive action weighting with zero net deviation flow everywhere?

    The nullspace of the deviation matrix is computed first; positivity (every weight at
    least 1e-6 after scaling) is then a linear feasibility problem over its span.
    """
    A, rows, cols = deviation_matrix(nfg)
    N = null_space(A)
    k = N.shape[1]
    weights = None
    if k > 0:
        # find z with N z >= eps componentwise
        res = linprog(np.zeros(k), A_ub=-N, b_ub=-np.full(len(cols), HARMONIC_MIN_WEIGHT),
                      bounds=[(None, None)] * k, method="highs")
        if res.status == 0:
            weights = N @ res.x
    return HarmonicReport(weights is not None, A, k, int(np.linalg.matrix_rank(A)) if A.size else 0,
                          weights, rows, cols)


# ------------------------------------------------------------ sink components


@dataclass
class Component:
    nodes: list
    is_sink: bool


def sink_components(graph, counter: dict | None = None) -> list:
    """Strongly connected components (Kosaraju) with a sink flag; no arc leaves a sink.

    ``graph`` is a :class:`ResponseGraph` or an adjacency dict.  If ``counter`` is given,
    ``counter["ops"]`` accumulates the number of node and arc visits.
    """
    adj = graph.adjacency() if isinstance(graph, ResponseGraph) else {v: list(w) for v, w in graph.items()}
    for ws in list(adj.values()):
        for w in ws:
            adj.setdefault(w, [])
    ops = 0
    order = []
    seen = set()
    for root in adj:
        if root in seen:
            continue
        seen.add(root)
        stack = [(root, iter(adj[root]))]
        while stack:
            v, it = stack[-1]
            advanced = False
            for w in it:
                ops += 1
                if w not in seen:
                    seen.add(w)
                    stack.append((w, iter(adj[w])))
                    advanced = True
                    break
            if not advanced:
                stack.pop()
                order.append(v)
                ops += 1
    radj = {v: [] for v in adj}
    for v, ws in adj.items():
        for w in ws:
            radj[w].append(v)
            ops += 1
    comp_of = {}
    comps = []
    for root in reversed(order):
        if root in comp_of:
            continue
        cid = len(comps)
        comp_of[root] = cid
        members = [root]
        stack = [root]
        while stack:
            v = stack.pop()
            for w in radj[v]:
                ops += 1
                if w not in comp_of:
                    comp_of[w] = cid
                    members.append(w)
                    stack.append(w)
        comps.append(members)
    sink = [True] * len(comps)
    for v, ws in adj.items():
        for w in ws:
            ops += 1
            if comp_of[v] != comp_of[w]:
                sink[comp_of[v]] = False
    if counter is not None:
        counter["ops"] = counter.get("ops", 0) + ops
    return [Component(sorted(c), s) for c, s in zip(comps, sink)]
