"""Layered DAG over cumulative demand levels.

Paths from the source to the sink are in bijection with undominated safe
strategies: visiting (l, z_l) in layer l means the l-th pair bids w_{z_l}
for z_l - z_{l-1} units. Edge weights turn hindsight optimization into a
max-weight path problem, and exponential-weights updates pushed onto edges
run Hedge over the exponentially many paths in O(|E|) per round.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .auction import CompetingBids, MUniformStrategy, TiePolicy, ValuationCurve
from .strategies import ENUM_CAP, size_undominated

# Out-probabilities at every node must sum to 1 within this after an update.
PROB_TOL = 1e-9


@dataclass(frozen=True)
class DagPath:
    """An s-d path: edge ids, node ids, and the demand breakpoints z_l."""

    edges: tuple[int, ...]
    nodes: tuple[int, ...]
    breakpoints: tuple[int, ...]


class LayeredDag:
    """The layered strategy DAG for M units and at most m pairs.

    Nodes: source s = (0,0); intermediate (l, j) for l in [m], j in {l..M}
    (layer l has M+1-l nodes); sink d = (m+1, inf). Edges go (l-1, j) to
    (l, j') for every j' > j, and every intermediate node to d. Per-edge
    state: an optional offline weight and a log-probability used by the
    weight-pushing updates.
    """

    def __init__(self, M: int, m: int):
        if not 1 <= m <= M:
            raise ValueError(f"need 1 <= m <= M, got m={m}, M={M}")
        self.M = M
        self.m = m

        # node ids: 0 = s, then layer 1..m with ascending j, then d
        self._layer_offset = [0] * (m + 1)
        nid = 1
        for layer in range(1, m + 1):
            self._layer_offset[layer] = nid
            nid += M + 1 - layer
        self.n_nodes = nid + 1
        self.sink = nid

        src, dst, jfrom, jto = [], [], [], []

        def node_id(layer: int, j: int) -> int:
            return self._layer_offset[layer] + (j - layer)

        # out-edges per node: next-layer targets with ascending j, sink last;
        # this matches lexicographic order on node labels, since the sink
        # sorts after every intermediate node
        for layer in range(0, m + 1):
            if layer == 0:
                js = [0]
            else:
                js = range(layer, M + 1)
            for j in js:
                u = 0 if layer == 0 else node_id(layer, j)
                if layer < m:
                    for j2 in range(j + 1, M + 1):
                        src.append(u)
                        dst.append(node_id(layer + 1, j2))
                        jfrom.append(j)
                        jto.append(j2)
                if layer >= 1:
                    src.append(u)
                    dst.append(self.sink)
                    jfrom.append(j)
                    jto.append(-1)  # sink marker

        self.src = np.asarray(src, dtype=np.int64)
        self.dst = np.asarray(dst, dtype=np.int64)
        self.jfrom = np.asarray(jfrom, dtype=np.int64)
        self.jto = np.asarray(jto, dtype=np.int64)
        self.n_edges = self.src.size
        self.is_sink_edge = self.jto < 0

        # contiguous out-edge slices (edges were emitted in src order)
        counts = np.bincount(self.src, minlength=self.n_nodes)
        self.out_start = np.concatenate(([0], np.cumsum(counts)))[:-1]
        self.out_end = self.out_start + counts

        # in-edge index lists for forward recursions
        order = np.argsort(self.dst, kind="stable")
        self.in_edges = order
        in_counts = np.bincount(self.dst[order], minlength=self.n_nodes)
        self.in_start = np.concatenate(([0], np.cumsum(in_counts)))[:-1]
        self.in_end = self.in_start + in_counts

        # per-layer node blocks so the DP sweeps run as segmented reductions
        # (reduceat) instead of a python loop over nodes; nodes within a layer
        # are contiguous ids and so are their out-edge (resp. permuted
        # in-edge) ranges
        blocks = [(0, 1)] + [
            (self._layer_offset[layer], self._layer_offset[layer] + M + 1 - layer)
            for layer in range(1, m + 1)
        ]
        self._bwd_blocks = []
        for lo, hi in blocks:
            elo = int(self.out_start[lo])
            ehi = int(self.out_end[hi - 1])
            bounds = self.out_start[lo:hi] - elo
            seg = np.repeat(
                np.arange(hi - lo), self.out_end[lo:hi] - self.out_start[lo:hi]
            )
            self._bwd_blocks.append((lo, hi, elo, ehi, bounds, seg))
        self._fwd_blocks = []
        for lo, hi in blocks[1:] + [(self.sink, self.sink + 1)]:
            blo = int(self.in_start[lo])
            bhi = int(self.in_end[hi - 1])
            es = self.in_edges[blo:bhi]
            bounds = self.in_start[lo:hi] - blo
            seg = np.repeat(
                np.arange(hi - lo), self.in_end[lo:hi] - self.in_start[lo:hi]
            )
            self._fwd_blocks.append((lo, hi, es, self.src[es], bounds, seg))

        self.weights = np.zeros(self.n_edges)
        self.log_phi = np.zeros(self.n_edges)  # phi^0(e) = 1
        self._normalized = False

    # -- structure ---------------------------------------------------------

    def node_id(self, layer: int, j: int) -> int:
        if layer == 0:
            return 0
        if not 1 <= layer <= self.m or not layer <= j <= self.M:
            raise ValueError(f"no node ({layer},{j})")
        return self._layer_offset[layer] + (j - layer)

    def node_label(self, nid: int) -> tuple[int, float]:
        """(layer, j) for intermediates, (0, 0) for s, (m+1, inf) for d."""
        if nid == 0:
            return (0, 0)
        if nid == self.sink:
            return (self.m + 1, math.inf)
        for layer in range(self.m, 0, -1):
            if nid >= self._layer_offset[layer]:
                return (layer, nid - self._layer_offset[layer] + layer)
        raise ValueError(f"bad node id {nid}")

    def layer_sizes(self) -> list[int]:
        return [self.M + 1 - layer for layer in range(1, self.m + 1)]

    def out_slice(self, u: int) -> slice:
        return slice(int(self.out_start[u]), int(self.out_end[u]))

    def num_paths(self) -> int:
        return size_undominated(self.M, self.m)

    def enumerate_paths(self):
        """All s-d paths, lexicographic in the node sequence."""
        if self.num_paths() > ENUM_CAP:
            raise ValueError("path count exceeds enumeration cap")
        stack = [(0, (), (), ())]
        while stack:
            u, edges, nodes, bps = stack.pop()
            if u == self.sink:
                yield DagPath(edges, nodes + (u,), bps)
                continue
            sl = self.out_slice(u)
            # push in reverse so the lexicographically first edge pops first
            for e in range(sl.stop - 1, sl.start - 1, -1):
                v = int(self.dst[e])
                bp = bps if v == self.sink else bps + (int(self.jto[e]),)
                stack.append((v, edges + (e,), nodes + (u,), bp))

    def path_from_breakpoints(self, breakpoints) -> DagPath:
        zs = tuple(int(z) for z in breakpoints)
        if not zs or any(b <= a for a, b in zip(zs, zs[1:])):
            raise ValueError("breakpoints must be strictly increasing")
        if len(zs) > self.m or zs[0] < 1 or zs[-1] > self.M:
            raise ValueError("breakpoints incompatible with the DAG")
        edges, nodes = [], [0]
        u = 0
        for layer, z in enumerate(zs, start=1):
            v = self.node_id(layer, z)
            e = int(self.out_start[u]) + (z - int(self.jto[self.out_start[u]]))
            assert self.dst[e] == v
            edges.append(e)
            nodes.append(v)
            u = v
        e = int(self.out_end[u]) - 1  # sink edge is last in the out slice
        assert self.dst[e] == self.sink
        edges.append(e)
        nodes.append(self.sink)
        return DagPath(tuple(edges), tuple(nodes), zs)

    # -- probabilities ------------------------------------------------------

    def update(self, eta: float, weights: np.ndarray) -> None:
        """One weight-pushing Hedge update, in log-space.

        Backward pass: Gamma(d) = 1 and Gamma(u) = sum over out-edges of
        phi(e) exp(eta w(e)) Gamma(dst(e)); then each edge is reweighted to
        phi(e) exp(eta w(e)) Gamma(dst) / Gamma(src), which renormalizes all
        out-probabilities while preserving the Hedge path distribution.
        """
        if eta < 0:
            raise ValueError("eta must be >= 0")
        score = self.log_phi + eta * np.asarray(weights)
        log_gamma = self._backward(score)
        self.log_phi = score + log_gamma[self.dst] - log_gamma[self.src]
        self._normalized = True

    def _backward(self, score: np.ndarray) -> np.ndarray:
        log_gamma = np.empty(self.n_nodes)
        log_gamma[self.sink] = 0.0
        for lo, hi, elo, ehi, bounds, seg in reversed(self._bwd_blocks):
            vals = score[elo:ehi] + log_gamma[self.dst[elo:ehi]]
            mx = np.maximum.reduceat(vals, bounds)
            sums = np.add.reduceat(np.exp(vals - mx[seg]), bounds)
            log_gamma[lo:hi] = mx + np.log(sums)
        return log_gamma

    def _forward(self, score: np.ndarray) -> np.ndarray:
        log_t = np.empty(self.n_nodes)
        log_t[0] = 0.0
        for lo, hi, es, srcs, bounds, seg in self._fwd_blocks:
            vals = score[es] + log_t[srcs]
            mx = np.maximum.reduceat(vals, bounds)
            sums = np.add.reduceat(np.exp(vals - mx[seg]), bounds)
            log_t[lo:hi] = mx + np.log(sums)
        return log_t

    def assert_normalized(self, tol: float = PROB_TOL) -> None:
        for u in range(self.n_nodes - 1):
            sl = self.out_slice(u)
            if sl.stop > sl.start:
                total = float(np.exp(self.log_phi[sl]).sum())
                assert abs(total - 1.0) <= tol, f"node {u} out-mass {total}"

    def sample_path(self, rng: np.random.Generator) -> DagPath:
        """Markovian walk from s choosing each out-edge with prob phi(e)."""
        if not self._normalized:
            raise RuntimeError("update must run before sampling")
        edges, nodes, bps = [], [0], []
        u = 0
        while u != self.sink:
            sl = self.out_slice(u)
            cum = np.cumsum(np.exp(self.log_phi[sl]))
            k = int(np.searchsorted(cum, rng.random() * cum[-1], side="right"))
            e = sl.start + min(k, sl.stop - sl.start - 1)
            v = int(self.dst[e])
            edges.append(e)
            nodes.append(v)
            if v != self.sink:
                bps.append(int(self.jto[e]))
            u = v
        return DagPath(tuple(edges), tuple(nodes), tuple(bps))

    def path_log_prob(self, path: DagPath) -> float:
        if not self._normalized:
            raise RuntimeError("update must run before querying probabilities")
        return float(self.log_phi[list(path.edges)].sum())

    def current_marginals(self) -> np.ndarray:
        """P(e in sampled path) under the current phi, by a forward pass."""
        if not self._normalized:
            raise RuntimeError("update must run before querying marginals")
        log_t = self._forward(self.log_phi)
        return np.exp(log_t[self.src] + self.log_phi)

    def copy_probabilities(self) -> np.ndarray:
        return self.log_phi.copy()


def build_dag(M: int, m: int) -> LayeredDag:
    return LayeredDag(M, m)


def num_edges(M: int, m: int) -> int:
    """Edge count of LayeredDag(M, m) without building it."""
    if not 1 <= m <= M:
        raise ValueError(f"need 1 <= m <= M, got m={m}, M={M}")
    between = sum(M - j for layer in range(1, m) for j in range(layer, M + 1))
    to_sink = sum(M + 1 - layer for layer in range(1, m + 1))
    return M + between + to_sink


# -- weights ---------------------------------------------------------------


def round_weights(
    dag: LayeredDag,
    curve: ValuationCurve,
    competing: CompetingBids,
    tie: TiePolicy = TiePolicy.FAVOR_BIDDER,
    shift: float = 0.0,
) -> np.ndarray:
    """Per-edge full-information weights for one round.

    Edge (l-1, j) -> (l, j') earns sum over k in (j, j'] of
    v_k * 1{w_{j'} + shift >= beta_minus(k)} (strict under the
    LOWER_INDEX_WINS tie policy); sink edges earn 0. Weights depend only on
    (j, j'), not on the layer.
    """
    M = dag.M
    if curve.m_units != M:
        raise ValueError("curve length must equal the DAG's M")
    thr = competing.thresholds(M)  # beta_minus(1..M), inf-padded
    w_col = curve.averaged + shift
    if tie is TiePolicy.FAVOR_BIDDER:
        ind = w_col[:, None] >= thr[None, :]
    else:
        ind = w_col[:, None] > thr[None, :]
    # csum[j'-1, j] = sum_{k <= j} v_k * 1{w_{j'} + shift >= beta_minus(k)}
    csum = np.concatenate(
        (np.zeros((M, 1)), np.cumsum(ind * curve.values[None, :], axis=1)), axis=1
    )
    out = np.zeros(dag.n_edges)
    layer = ~dag.is_sink_edge
    jt = dag.jto[layer]
    out[layer] = csum[jt - 1, jt] - csum[jt - 1, dag.jfrom[layer]]
    return out


def assign_offline_weights(
    dag: LayeredDag,
    history,
    curve: ValuationCurve,
    tie: TiePolicy = TiePolicy.FAVOR_BIDDER,
) -> None:
    """Accumulate round_weights over a full history into dag.weights."""
    total = np.zeros(dag.n_edges)
    for competing in history:
        total += round_weights(dag, curve, competing, tie)
    dag.weights = total


def max_weight_path(dag: LayeredDag) -> tuple[DagPath, float]:
    """Maximum-weight s-d path over dag.weights by backward DP.

    Ties break toward the lexicographically smallest node sequence, which is
    the first maximizing out-edge in each node's successor order.
    """
    w = dag.weights
    best = np.empty(dag.n_nodes)
    best[dag.sink] = 0.0
    choice = np.full(dag.n_nodes, -1, dtype=np.int64)
    for lo, hi, elo, ehi, bounds, seg in reversed(dag._bwd_blocks):
        vals = w[elo:ehi] + best[dag.dst[elo:ehi]]
        mx = np.maximum.reduceat(vals, bounds)
        best[lo:hi] = mx
        # first maximizer per segment = smallest qualifying edge id
        cand = np.where(vals == mx[seg], np.arange(elo, ehi), dag.n_edges)
        choice[lo:hi] = np.minimum.reduceat(cand, bounds)
    edges, nodes, bps = [], [0], []
    u = 0
    while u != dag.sink:
        e = int(choice[u])
        v = int(dag.dst[e])
        edges.append(e)
        nodes.append(v)
        if v != dag.sink:
            bps.append(int(dag.jto[e]))
        u = v
    return DagPath(tuple(edges), tuple(nodes), tuple(bps)), float(best[0])


# -- path <-> strategy ------------------------------------------------------


def path_to_strategy(path: DagPath, curve: ValuationCurve) -> MUniformStrategy:
    """The undominated strategy bidding w at each breakpoint of the path."""
    return MUniformStrategy.from_breakpoints(curve, path.breakpoints)


def strategy_to_path(
    dag: LayeredDag, strategy: MUniformStrategy, curve: ValuationCurve
) -> DagPath:
    """Inverse of path_to_strategy; rejects non-undominated strategies."""
    for b, Q in zip(strategy.bids, strategy.cumulative):
        if b != curve.w(Q):
            raise ValueError("strategy is not on the undominated frontier")
    return dag.path_from_breakpoints(strategy.cumulative)


# -- algorithm operations ---------------------------------------------------


def update_probabilities(dag: LayeredDag, eta: float, prev_weights) -> None:
    dag.update(eta, np.asarray(prev_weights, dtype=float))


def sample_path(dag: LayeredDag, rng: np.random.Generator) -> DagPath:
    return dag.sample_path(rng)


def edge_marginals(dag: LayeredDag, eta: float, prev_weights) -> np.ndarray:
    """Edge marginals of the post-update path distribution, pre-update state.

    p(e) = phi(e) exp(eta w(e)) Gamma_fwd(src) Gamma_bwd(dst) / Gamma_bwd(s),
    where both recursions run over the current (not yet updated) phi and the
    weights about to be applied. O(|E|), no mutation; agrees with a forward
    pass over the updated phi.
    """
    score = dag.log_phi + eta * np.asarray(prev_weights, dtype=float)
    log_g = dag._backward(score)
    log_t = dag._forward(score)
    return np.exp(log_t[dag.src] + score + log_g[dag.dst] - log_g[0])


def build_covering_set(dag: LayeredDag) -> list[DagPath]:
    """One canonical s-d path through every edge; |C| <= |E| after dedup.

    For an edge into layer-l node (l, j'), the prefix walks the tightest
    breakpoints ending at the edge's source, then hops straight to the sink.
    """
    seen: dict[tuple[int, ...], DagPath] = {}
    for e in range(dag.n_edges):
        u_layer = 0 if dag.src[e] == 0 else dag.node_label(int(dag.src[e]))[0]
        j = int(dag.jfrom[e])
        prefix = [j - u_layer + i for i in range(1, u_layer + 1)]
        bps = prefix + ([] if dag.is_sink_edge[e] else [int(dag.jto[e])])
        path = dag.path_from_breakpoints(bps)
        assert e in path.edges
        seen.setdefault(path.edges, path)
    cover = list(seen.values())
    assert len(cover) <= dag.n_edges
    covered = {e for p in cover for e in p.edges}
    assert len(covered) == dag.n_edges, "covering set missed an edge"
    return cover


def dump_edges(dag: LayeredDag, fp) -> None:
    """Debug CSV: layer_from, j_from, layer_to, j_to, weight, prob."""
    fp.write("layer_from,j_from,layer_to,j_to,weight,prob\n")
    prob = np.exp(dag.log_phi)
    for e in range(dag.n_edges):
        lf = 0 if dag.src[e] == 0 else dag.node_label(int(dag.src[e]))[0]
        if dag.is_sink_edge[e]:
            lt, jt = dag.m + 1, "inf"
        else:
            lt, jt = lf + 1, int(dag.jto[e])
        fp.write(
            f"{lf},{int(dag.jfrom[e])},{lt},{jt},"
            f"{dag.weights[e]!r},{prob[e]!r}\n"
        )
