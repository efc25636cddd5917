"""Optimal random response under ALIP and its subset variant.

The columns P(.|y) of an ALIP-feasible randomization are points v of the
polytope

    {v >= 0, sum v = 1, e^{-eps_l} <= sum_x l(s, x) v_x <= e^{eps_u}  for all s},

where l is the lift of the input joint. Since H(X|Y) = sum_y P(y) H(P(.|y))
is concave in each column, the optimum uses polytope vertices only, and the
output distribution solves the linear program

    min_beta sum_k H(v_k) beta_k   s.t.  sum_k v_k beta_k = P_X,  beta >= 0.

AORR does this over the whole alphabet; SRR does it per group of the greedy
subset-merging partition, which keeps the vertex count manageable.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import HalfspaceIntersection, QhullError, cKDTree

from .errors import CapExceeded, EmptyPolytope, EmptySubset, InfeasibleTarget, LiftlabError
from .lift import Budget
from .measures import ALIP, Measure, MeasureKind
from .prob import Channel, JointDistribution, entropy
from .watchdog import (
    MechanismReport,
    Partition,
    _column_stats,
    _report,
    subset_merge_mechanism,
    subset_merging,
)

#: Slack on polytope constraints when accepting a candidate vertex.
FEAS_TOL = 1e-9
#: Two vertices closer than this in max-norm are the same vertex.
DEDUP_TOL = 1e-9
#: Output weights at or below this are dropped from the support.
BETA_TOL = 1e-10
#: Active-set combinations tried exhaustively before switching to qhull.
COMBINATION_CAP = 400_000
#: Largest subset handed to qhull; beyond this vertex counts explode.
QHULL_MAX_DIM = 11
#: Basic solutions tried by the exhaustive LP route before deferring to HiGHS.
BFS_CAP = 50_000

_BATCH = 20_000


def _entropy_rows(v: np.ndarray) -> np.ndarray:
    v = np.clip(v, 0.0, None)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(v > 0, v * np.log(v), 0.0)
    return np.maximum(-t.sum(axis=1), 0.0)


@dataclass(eq=False)
class LiftPolytope:
    """Inequality system ``A v <= c`` plus ``sum v = 1`` over a subset of X.

    Rows are scaled by 1/P_S(s), so a lift constraint reads
    ``sum_x l(s, x) v_x <= e^{eps_u}``. Nonnegativity rows ``-v_x <= 0``
    come last. Rows that cannot bind anywhere on the simplex are dropped.
    """

    subset: tuple
    labels: tuple
    A: np.ndarray
    c: np.ndarray
    budget: Budget
    target: np.ndarray  # P_X restricted to the subset (not normalized)
    n_pruned: int = 0
    _vertices: np.ndarray | None = field(default=None, repr=False)

    @property
    def dim(self) -> int:
        return len(self.subset)

    def contains(self, v, tol: float = FEAS_TOL) -> bool:
        v = np.asarray(v, dtype=float)
        return bool(
            abs(v.sum() - 1.0) <= tol
            and np.all(self.A @ v <= self.c + tol * np.maximum(1.0, np.abs(self.c)))
        )

    @property
    def target_feasible(self) -> bool:
        """Is the normalized target, i.e. the merged group, inside the polytope?"""
        return self.contains(self.target / self.target.sum())

    @property
    def vertices(self) -> np.ndarray:
        if self._vertices is None:
            self._vertices = enumerate_vertices(self)
        return self._vertices


def build_polytope(j: JointDistribution, subset, b: Budget) -> LiftPolytope:
    subset = tuple(int(x) for x in subset)
    if not subset:
        raise EmptySubset("polytope subset must be nonempty")
    p = j.probs
    p_s = p.sum(axis=1)
    p_x = p.sum(axis=0)
    lifts = p[:, subset] / np.outer(p_s, p_x[list(subset)])
    d = len(subset)
    rows, rhs = [], []
    pruned = 0
    if math.isfinite(b.eps_u):
        hi = math.exp(b.eps_u)
        keep = lifts.max(axis=1) > hi
        rows.append(lifts[keep])
        rhs.append(np.full(keep.sum(), hi))
        pruned += int((~keep).sum())
    if math.isfinite(b.eps_l):
        lo = math.exp(-b.eps_l)
        keep = lifts.min(axis=1) < lo
        rows.append(-lifts[keep])
        rhs.append(np.full(keep.sum(), -lo))
        pruned += int((~keep).sum())
    rows.append(-np.eye(d))
    rhs.append(np.zeros(d))
    return LiftPolytope(
        subset=subset,
        labels=tuple(j.col_labels[x] for x in subset),
        A=np.vstack(rows),
        c=np.concatenate(rhs),
        budget=b,
        target=p_x[list(subset)].copy(),
        n_pruned=pruned,
    )


# ---------------------------------------------------------------------------
# vertex enumeration


def _feasible_mask(poly: LiftPolytope, v: np.ndarray) -> np.ndarray:
    slack = FEAS_TOL * np.maximum(1.0, np.abs(poly.c))
    return np.all(v @ poly.A.T <= poly.c + slack, axis=1)


def _dedup(v: np.ndarray) -> np.ndarray:
    if len(v) <= 1:
        return v
    pairs = cKDTree(v).query_pairs(DEDUP_TOL, p=np.inf, output_type="ndarray")
    drop = np.zeros(len(v), dtype=bool)
    for a, b in sorted(map(tuple, pairs)):
        if not drop[a]:
            drop[b] = True
    return v[~drop]


def _canonical_order(v: np.ndarray) -> np.ndarray:
    # lexicographically descending, so unit vectors come out as e_1, e_2, ...
    key = np.round(v, 12)
    order = np.lexsort(tuple(-key[:, k] for k in reversed(range(v.shape[1]))))
    return v[order]


def _nonsingular(mats: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Mask of square matrices whose determinant is not negligible.

    The determinant is compared against the product of row norms, its
    largest possible magnitude (Hadamard), so the test is scale free.
    """
    det = np.abs(np.linalg.det(mats))
    scale = np.prod(np.linalg.norm(mats, axis=2), axis=1)
    return det > tol * scale


def _active_set_vertices(poly: LiftPolytope) -> np.ndarray:
    A, c, d = poly.A, poly.c, poly.dim
    ones = np.ones((1, d))
    found = []
    combos = itertools.combinations(range(len(c)), d - 1)
    while True:
        chunk = np.array(list(itertools.islice(combos, _BATCH)), dtype=int).reshape(-1, d - 1)
        if len(chunk) == 0:
            break
        mats = np.concatenate([A[chunk], np.broadcast_to(ones, (len(chunk), 1, d))], axis=1)
        rhs = np.concatenate([c[chunk], np.ones((len(chunk), 1))], axis=1)
        ok = _nonsingular(mats)
        if not ok.any():
            continue
        v = np.linalg.solve(mats[ok], rhs[ok][..., None])[..., 0]
        found.append(v[_feasible_mask(poly, v)])
    return np.concatenate(found) if found else np.empty((0, d))


def _polish(poly: LiftPolytope, v: np.ndarray) -> np.ndarray:
    """Snap approximate vertices onto their active constraints."""
    A, c, d = poly.A, poly.c, poly.dim
    out = []
    for x in v:
        act = np.flatnonzero(np.abs(A @ x - c) <= 1e-7 * np.maximum(1.0, np.abs(c)))
        M = np.vstack([A[act], np.ones((1, d))])
        if np.linalg.matrix_rank(M, tol=1e-10) < d:
            continue
        y, *_ = np.linalg.lstsq(M, np.append(c[act], 1.0), rcond=None)
        out.append(y)
    if not out:
        return np.empty((0, d))
    out = np.array(out)
    return out[_feasible_mask(poly, out)]


def _qhull_vertices(poly: LiftPolytope) -> np.ndarray:
    A, c, d = poly.A, poly.c, poly.dim
    # eliminate v_d = 1 - sum(w)
    G = A[:, :-1] - A[:, -1:]
    h = c - A[:, -1]
    norms = np.linalg.norm(G, axis=1)
    lp = linprog(
        np.append(np.zeros(d - 1), -1.0),
        A_ub=np.hstack([G, norms[:, None]]),
        b_ub=h,
        bounds=[(None, None)] * (d - 1) + [(0, None)],
        method="highs",
    )
    if lp.status == 2:
        raise EmptyPolytope(f"no feasible point over subset {poly.labels}")
    if lp.status != 0 or lp.x[-1] <= 1e-9:
        raise CapExceeded(f"polytope over {poly.labels} is too flat for qhull")
    try:
        hs = HalfspaceIntersection(np.hstack([G, -h[:, None]]), lp.x[:-1])
    except QhullError as exc:
        raise CapExceeded(f"qhull failed on subset {poly.labels}: {exc}") from None
    w = hs.intersections
    v = np.hstack([w, 1.0 - w.sum(axis=1, keepdims=True)])
    return _polish(poly, v)


def enumerate_vertices(
    poly: LiftPolytope,
    method: str = "auto",
    cap: int = COMBINATION_CAP,
    max_qhull_dim: int = QHULL_MAX_DIM,
) -> np.ndarray:
    """Vertices of the polytope as rows of a (n, d) array.

    ``method="active-set"`` solves every choice of d-1 active inequalities
    together with ``sum v = 1`` and keeps the feasible solutions.
    ``method="qhull"`` intersects halfspaces around a Chebyshev centre.
    ``"auto"`` uses active sets unless there are more than ``cap``
    combinations, and raises :class:`CapExceeded` when qhull would have to
    work in more than ``max_qhull_dim`` coordinates. Vertices are
    deduplicated and returned in a fixed order.
    """
    d = poly.dim
    if method not in ("auto", "active-set", "qhull"):
        raise LiftlabError(f"unknown vertex method {method!r}")
    if d == 1:
        v = np.ones((1, 1))
        if not poly.contains(v[0]):
            raise EmptyPolytope(f"single symbol {poly.labels} violates the budget")
        return v
    n_comb = math.comb(len(poly.c), d - 1)
    if method == "auto":
        if n_comb <= cap:
            method = "active-set"
        elif d <= max_qhull_dim:
            method = "qhull"
        else:
            raise CapExceeded(
                f"{n_comb} active sets over {d} symbols exceed the cap of {cap}"
            )
    if method == "active-set":
        v = _active_set_vertices(poly)
    else:
        v = _qhull_vertices(poly)
    if len(v) == 0:
        raise EmptyPolytope(f"no feasible point over subset {poly.labels}")
    v = np.where(v < 1e-14, 0.0, v)  # round-off residue on active nonnegativity rows
    v /= v.sum(axis=1, keepdims=True)
    return _canonical_order(_dedup(v))


def active_constraints(poly: LiftPolytope, v, tol: float = 1e-8) -> np.ndarray:
    """Indices of inequality rows tight at ``v``."""
    v = np.asarray(v, dtype=float)
    return np.flatnonzero(np.abs(poly.A @ v - poly.c) <= tol * np.maximum(1.0, np.abs(poly.c)))


# ---------------------------------------------------------------------------
# column LP


@dataclass(frozen=True, eq=False)
class ColumnLP:
    beta: np.ndarray  # one weight per vertex
    support: tuple  # vertex indices with beta > BETA_TOL
    objective: float  # sum_k H(v_k) beta_k
    method: str


def _bfs_solve(V: np.ndarray, h: np.ndarray, target: np.ndarray):
    """Exhaustive search over basic feasible solutions of V beta = target."""
    d, M = V.shape
    u, sv, _ = np.linalg.svd(V, full_matrices=False)
    r = int(np.sum(sv > 1e-10 * sv[0]))
    if r < d:
        # restrict to the row space; the target must lie in it
        proj = u[:, :r]
        if np.abs(proj @ (proj.T @ target) - target).max() > 1e-10:
            return None
        V, target = proj.T @ V, proj.T @ target
    best, best_obj = None, math.inf
    combos = itertools.combinations(range(M), r)
    while True:
        chunk = np.array(list(itertools.islice(combos, _BATCH)), dtype=int).reshape(-1, r)
        if len(chunk) == 0:
            break
        mats = np.transpose(V[:, chunk], (1, 0, 2))  # (N, r, r)
        ok = _nonsingular(mats)
        if not ok.any():
            continue
        chunk, mats = chunk[ok], mats[ok]
        beta = np.linalg.solve(mats, np.broadcast_to(target, (len(chunk), r))[..., None])[..., 0]
        good = (beta >= -1e-12).all(axis=1)
        if not good.any():
            continue
        obj = (np.clip(beta[good], 0, None) * h[chunk[good]]).sum(axis=1)
        k = int(np.argmin(obj))
        # strict improvement keeps the lexicographically first optimal basis
        if obj[k] < best_obj - 1e-13:
            best_obj = float(obj[k])
            best = np.zeros(M)
            best[chunk[good][k]] = np.clip(beta[good][k], 0, None)
    return best


def solve_column_lp(vertices, target, method: str = "auto") -> ColumnLP:
    """Weights beta >= 0 with ``sum_k beta_k v_k = target`` minimizing sum H(v_k) beta_k.

    ``method="bfs"`` enumerates basic feasible solutions (exact, and returns
    the lexicographically first optimal basis on ties); ``"highs"`` calls the
    HiGHS dual simplex. ``"auto"`` uses bfs while the basis count is small.
    """
    V = np.asarray(vertices, dtype=float).T  # (d, M)
    target = np.asarray(target, dtype=float)
    if V.size == 0:
        raise InfeasibleTarget("empty vertex list")
    d, M = V.shape
    if target.shape != (d,):
        raise LiftlabError(f"target has shape {target.shape}, expected ({d},)")
    h = _entropy_rows(V.T)
    if method == "auto":
        r = np.linalg.matrix_rank(V, tol=1e-10)
        method = "bfs" if math.comb(M, r) <= BFS_CAP else "highs"
    if method == "bfs":
        beta = _bfs_solve(V, h, target)
        if beta is None:
            raise InfeasibleTarget("target is not in the convex hull of the vertices")
    elif method == "highs":
        res = linprog(h, A_eq=V, b_eq=target, bounds=(0, None), method="highs-ds")
        if res.status == 2:
            raise InfeasibleTarget("target is not in the convex hull of the vertices")
        if res.status != 0:
            raise LiftlabError(f"LP solver failed: {res.message}")
        beta = np.clip(res.x, 0.0, None)
    else:
        raise LiftlabError(f"unknown LP method {method!r}")

    support = np.flatnonzero(beta > BETA_TOL)
    # drop negligible weights and re-fit the equality on the kept support
    fit, *_ = np.linalg.lstsq(V[:, support], target, rcond=None)
    if np.all(fit >= 0) and np.abs(V[:, support] @ fit - target).max() <= 1e-12:
        beta = np.zeros(M)
        beta[support] = fit
    else:
        kept = beta[support]
        beta = np.zeros(M)
        beta[support] = kept * (target.sum() / kept.sum())
    if np.abs(V @ beta - target).max() > 1e-9:
        raise InfeasibleTarget("LP solution does not reproduce the target")
    support = np.flatnonzero(beta > 0)
    return ColumnLP(beta, tuple(int(k) for k in support), float(h @ beta), method)


# ---------------------------------------------------------------------------
# mechanisms


@dataclass(frozen=True, eq=False)
class RandomResponse:
    """Randomization pair for one subset: Q[x, y] = P(x|y) and q[y] = P(y)."""

    subset: tuple
    Q: np.ndarray  # (|subset|, |Y_i|), columns sum to one
    q: np.ndarray
    objective: float  # sum_y q(y) H(Q(.|y))
    n_vertices: int
    method: str = "lp"

    def channel_block(self) -> np.ndarray:
        """P(y|x) for x in the subset."""
        p_x = self.Q @ self.q
        return self.Q * self.q[None, :] / p_x[:, None]


def _solve_subset(
    j: JointDistribution, subset, b: Budget, vertex_method: str = "auto", max_dim=QHULL_MAX_DIM
) -> RandomResponse:
    poly = build_polytope(j, subset, b)
    V = enumerate_vertices(poly, vertex_method, max_qhull_dim=max_dim)
    lp = solve_column_lp(V, poly.target)
    sup = list(lp.support)
    return RandomResponse(
        subset=poly.subset,
        Q=V[sup].T.copy(),
        q=lp.beta[sup].copy(),
        objective=lp.objective,
        n_vertices=len(V),
    )


def _merge_block(j: JointDistribution, subset) -> RandomResponse:
    px = j.probs.sum(axis=0)[list(subset)]
    v = px / px.sum()
    return RandomResponse(
        tuple(subset), v[:, None], np.array([px.sum()]), float(px.sum() * entropy(v)), 0, "merge"
    )


def _output_label(labels, subset, col: np.ndarray, name: str, k: int) -> str:
    if np.count_nonzero(col > 0) == 1:
        return str(labels[subset[int(np.argmax(col))]])
    return f"{name}#{k + 1}"


def _assemble(j: JointDistribution, low, blocks) -> tuple[Channel, float]:
    labels = j.col_labels
    nx = len(labels)
    ny = len(low) + sum(len(blk.q) for blk in blocks)
    q = np.zeros((nx, ny))
    out = []
    for k, x in enumerate(low):
        q[x, k] = 1.0
        out.append(str(labels[x]))
    col = len(low)
    loss = 0.0
    for blk in blocks:
        name = "+".join(str(labels[x]) for x in blk.subset)
        block = blk.channel_block()
        for r, x in enumerate(blk.subset):
            q[x, col : col + block.shape[1]] = block[r]
        out.extend(
            _output_label(labels, blk.subset, blk.Q[:, k], name, k) for k in range(block.shape[1])
        )
        col += block.shape[1]
        loss += blk.objective
    if len(set(out)) != len(out):
        out = [f"y{k + 1}" for k in range(ny)]
    h = entropy(j.probs.sum(axis=0))
    return Channel.from_table(q, labels, out), max(h - loss, 0.0)


def aorr(
    j: JointDistribution, b: Budget | None = None, cap: int = 12, vertex_method: str = "auto"
) -> MechanismReport:
    """Utility-optimal ALIP channel over the whole alphabet."""
    b = b if b is not None else Budget.unbounded()
    nx = j.shape[1]
    if nx > cap:
        raise CapExceeded(f"|X| = {nx} exceeds the AORR cap of {cap}")
    blk = _solve_subset(j, range(nx), b, vertex_method, max_dim=max(nx, QHULL_MAX_DIM))
    channel, utility = _assemble(j, (), [blk])
    info = {"mechanism": "aorr", "vertices": blk.n_vertices, "outputs": len(blk.q), "blocks": (blk,)}
    return _report(j, channel, utility, ALIP, b, None, info)


def _merged_ok(j: JointDistribution, subset, b: Budget) -> bool:
    """Does merging the subset into one output meet the ALIP budget?

    Equivalent to the normalized target lying in the subset polytope, which
    is exactly when the column LP for the subset is feasible.
    """
    p = j.probs
    col = p[:, list(subset)].sum(axis=1)[:, None]
    bad, _ = _column_stats(col, p.sum(axis=1), ALIP, b)
    return not bad[0]


def _block_ok(j: JointDistribution, blk: RandomResponse, kind: MeasureKind, b: Budget) -> bool:
    p = j.probs
    cols = p[:, list(blk.subset)] @ blk.channel_block()
    bad, _ = _column_stats(cols, p.sum(axis=1), kind, b)
    return not bad.any()


def srr(
    j: JointDistribution,
    kind: MeasureKind = ALIP,
    b: Budget | None = None,
    vertex_method: str = "auto",
) -> MechanismReport:
    """Subset random response.

    The greedy merging partition is refined subset by subset: a subset whose
    polytope cannot host its own input distribution is united with the next
    group, or with the previously accepted subset when none is left. Each
    accepted subset then gets its optimal random response. If even the
    union of all high-risk symbols is infeasible, the subset-merging
    mechanism is returned instead.

    The polytopes encode ALIP constraints. For other kinds the initial
    partition uses that kind, and any subset whose random response breaks
    the kind's budget is merged into a single output instead. Subsets too
    large for vertex enumeration are merged as well.
    """
    b = b if b is not None else Budget.unbounded()
    part = subset_merging(j, kind, b)
    queue = [list(g) for g in part.effective_groups]
    accepted: list[list[int]] = []
    unions = 0
    limit = len(queue)
    while queue:
        cur = queue.pop(0)
        while not _merged_ok(j, cur, b) and (queue or accepted) and unions <= limit:
            cur = cur + queue.pop(0) if queue else accepted.pop() + cur
            unions += 1
        accepted.append(cur)
    info = {"mechanism": "srr", "unions": unions, "fallback": False, "capped": 0, "guarded": 0}
    if unions > limit:
        info["retry_bound_hit"] = True
    if len(accepted) == 1 and not _merged_ok(j, accepted[0], b):
        rep = subset_merge_mechanism(j, kind, b)
        rep.info.update(info, fallback=True)
        return rep

    blocks = []
    vertices = 0
    for sub in accepted:
        sub = sorted(sub)
        if not _merged_ok(j, sub, b):
            blk = _merge_block(j, sub)
        else:
            try:
                blk = _solve_subset(j, sub, b, vertex_method)
                vertices += blk.n_vertices
            except CapExceeded:
                blk = _merge_block(j, sub)
                info["capped"] += 1
            if kind.tag not in (Measure.ALIP, Measure.LIP) and not _block_ok(j, blk, kind, b):
                blk = _merge_block(j, sub)
                info["guarded"] += 1
        blocks.append(blk)
    channel, utility = _assemble(j, part.low_risk, blocks)
    partition = Partition(part.low_risk, part.high_risk, tuple(tuple(blk.subset) for blk in blocks))
    info.update(vertices=vertices, groups=len(blocks), blocks=tuple(blocks))
    return _report(j, channel, utility, kind, b, partition, info)
