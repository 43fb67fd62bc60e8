"""Wardrop equilibria, social optima, and the price of anarchy.

The equilibrium solver minimizes the congestion potential (sum over edges of
the cost primitive) over feasible path flows in two phases: a Frank-Wolfe
warm start that pins down the support, then an active-set refinement that
solves the support's stationarity system exactly by Newton.  The refined
edge costs are accurate enough for derivative work downstream.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import brentq

from .costs import (
    AffineCost,
    CostError,
    DEFAULT_EXTENSION_SLOPE,
    build_cost_table,
    fenchel_conjugate_affine,
    marginal,
)
from .fixed_regime import _newton_kkt
from .model import Commodity, Edge, FlowLoad, Network, build_incidence


class SolverError(RuntimeError):
    pass


class NonConvexCostError(SolverError):
    """Raised when a social-optimum computation needs convex x*c(x) and lacks it."""


@dataclass(frozen=True)
class SolverOptions:
    tol_gap: float = 1e-9
    eps_active: float = 1e-7
    fw_tol: float = 1e-4
    fw_max_iters: int = 10_000
    active_set_max_iters: int = 100
    newton_tol_res: float = 1e-12
    newton_tol_step: float = 1e-9
    newton_max_iters: int = 80
    sigma: float = DEFAULT_EXTENSION_SLOPE


DEFAULT_OPTIONS = SolverOptions()


@dataclass
class EquilibriumResult:
    x: np.ndarray  # per-edge loads
    tau: np.ndarray  # per-edge costs at x
    path_costs: np.ndarray
    lam: np.ndarray  # per-OD minimal path cost
    f: np.ndarray  # one nonnegative flow decomposition
    potential: float
    gap: float
    regime: tuple  # active path ids at eps_active
    sc: float  # total cost sum_e x_e tau_e
    fw_iters: int
    active_set_iters: int
    path_ids: tuple = ()
    path_od: tuple = ()  # per-path OD index

    def flow_load(self) -> FlowLoad:
        return FlowLoad(f=self.f.copy(), x=self.x.copy())


def _all_or_nothing(inc, path_costs, mu):
    """Send each OD's whole demand down its cheapest path (lowest index ties)."""
    f = np.zeros(inc.n_paths)
    for h in range(inc.n_ods):
        own = np.flatnonzero(inc.s[h])
        best = own[np.argmin(path_costs[own])]
        f[best] = mu[h]
    return f


def _relative_gap(inc, path_costs, f, mu):
    lam = np.array([np.min(path_costs[np.flatnonzero(inc.s[h])]) for h in range(inc.n_ods)])
    total = float(f @ path_costs)
    bound = float(mu @ lam)
    return total - bound, lam, bound


def solve_equilibrium(net: Network, commodities, mu,
                      opts: SolverOptions = DEFAULT_OPTIONS) -> EquilibriumResult:
    inc = build_incidence(net, commodities)
    mu = np.asarray(mu, dtype=float)
    if mu.shape != (inc.n_ods,):
        raise SolverError(f"demand has shape {mu.shape}, expected ({inc.n_ods},)")
    if np.any(mu < 0):
        raise SolverError("negative demand")
    table = build_cost_table(net.costs, opts.sigma)

    c0 = table.values(np.zeros(inc.n_edges))
    pc0 = inc.delta.T @ c0
    if not np.any(mu > 0):
        lam = np.array([np.min(pc0[np.flatnonzero(inc.s[h])]) for h in range(inc.n_ods)])
        return _assemble(inc, table, np.zeros(inc.n_paths), lam, opts, 0, 0)

    # Phase 1: Frank-Wolfe from an empty-network all-or-nothing start.
    f = _all_or_nothing(inc, pc0, mu)
    fw_iters = 0
    lam = np.zeros(inc.n_ods)
    for fw_iters in range(1, opts.fw_max_iters + 1):
        x = inc.delta @ f
        c = table.values(x)
        pc = inc.delta.T @ c
        gap, lam, bound = _relative_gap(inc, pc, f, mu)
        if gap <= opts.fw_tol * (1.0 + abs(bound)):
            break
        target = _all_or_nothing(inc, pc, mu)
        d = target - f
        dx = inc.delta @ d

        def slope(alpha):
            return float(table.values(x + alpha * dx) @ dx)

        if slope(1.0) <= 0:
            alpha = 1.0
        elif slope(0.0) >= 0:
            alpha = 0.0
        else:
            alpha = brentq(slope, 0.0, 1.0, xtol=1e-14)
        if alpha <= 0:
            break
        f = f + alpha * d

    # Phase 2: active-set refinement on the support.
    x = inc.delta @ f
    pc = inc.delta.T @ table.values(x)
    support = set()
    for h in range(inc.n_ods):
        own = np.flatnonzero(inc.s[h])
        thresh = 1e-8 * (1.0 + mu[h])
        support.update(int(j) for j in own if f[j] > thresh)
        support.add(int(own[np.argmin(pc[own])]))
    active = sorted(support)
    just_dropped = None
    as_iters = 0
    f_r = None
    for as_iters in range(1, opts.active_set_max_iters + 1):
        idx = np.asarray(active, dtype=int)
        delta_r = inc.delta[:, idx]
        s_r = inc.s[:, idx]
        f0 = f[idx]
        # Rebalance the warm start onto the demand constraint.
        for h in range(inc.n_ods):
            own = np.flatnonzero(s_r[h])
            tot = f0[own].sum()
            if tot > 0:
                f0[own] *= mu[h] / tot
            else:
                f0[own] = mu[h] / len(own)
        f_r, lam, x_r, res, nit, ok = _newton_kkt(
            table, delta_r, s_r, mu, f0, lam, np.zeros(inc.n_edges),
            tol_res=opts.newton_tol_res, tol_step=opts.newton_tol_step,
            max_iters=opts.newton_max_iters,
        )
        if not ok:
            raise SolverError(
                f"active-set Newton failed on regime of size {len(idx)}: residual {res:.3e}"
            )
        scale = 1.0 + float(np.max(mu, initial=0.0))
        neg = np.flatnonzero(f_r < -1e-10 * scale)
        if neg.size:
            # Drop the most negative path unless it is its OD's only one.
            order = neg[np.argsort(f_r[neg])]
            dropped = None
            for j_local in order:
                h = inc.od_of_path(int(idx[j_local]))
                if int(np.sum(s_r[h])) > 1:
                    dropped = int(idx[j_local])
                    break
            if dropped is not None:
                active.remove(dropped)
                just_dropped = dropped
                f = np.zeros(inc.n_paths)
                f[idx] = np.maximum(f_r, 0.0)
                continue
        c = table.values(np.maximum(inc.delta[:, idx] @ f_r, 0.0))
        pc = inc.delta.T @ c
        viol_j, viol_v = None, -np.inf
        for j in range(inc.n_paths):
            if j in active or j == just_dropped:
                continue
            h = inc.od_of_path(j)
            slack = pc[j] - lam[h]
            v = -slack / (1.0 + abs(lam[h]))
            if slack < -opts.tol_gap * (1.0 + abs(lam[h])) and v > viol_v:
                viol_j, viol_v = j, v
        if viol_j is None:
            break
        active = sorted(active + [viol_j])
        just_dropped = None
        f = np.zeros(inc.n_paths)
        f[idx] = np.maximum(f_r, 0.0)
    else:
        raise SolverError("active-set loop exceeded iteration budget")

    f_full = np.zeros(inc.n_paths)
    f_full[np.asarray(active, dtype=int)] = np.maximum(f_r, 0.0)
    return _assemble(inc, table, f_full, lam, opts, fw_iters, as_iters)


def _assemble(inc, table, f, lam, opts, fw_iters, as_iters) -> EquilibriumResult:
    mu = inc.s @ f
    x = inc.delta @ f
    # Prefer the minimal-norm decomposition when it stays nonnegative, so the
    # reported flow is a deterministic function of (x, mu) alone.
    stacked = np.vstack([inc.delta, inc.s])
    f_min = np.linalg.pinv(stacked) @ np.concatenate([x, mu])
    if np.min(f_min, initial=0.0) >= -1e-9:
        f = np.maximum(f_min, 0.0)
    scale = 1.0 + float(np.max(mu, initial=0.0))
    f[f <= 1e-12 * scale] = 0.0
    x = inc.delta @ f
    tau = table.values(x)
    pc = inc.delta.T @ tau
    lam = np.array([np.min(pc[np.flatnonzero(inc.s[h])]) for h in range(inc.n_ods)])
    gap = float(np.max((pc - inc.s.T @ lam) * (f > 0), initial=0.0))
    regime = tuple(
        inc.path_ids[j]
        for j in range(inc.n_paths)
        if pc[j] - lam[inc.od_of_path(j)] <= opts.eps_active * (1.0 + abs(lam[inc.od_of_path(j)]))
    )
    sc_edges = float(x @ tau)
    sc_dual = float(mu @ lam)
    if abs(sc_edges - sc_dual) > 1e-7 * (1.0 + abs(sc_edges)):
        raise SolverError(
            f"total-cost identity violated: edge sum {sc_edges!r} vs demand sum {sc_dual!r}"
        )
    return EquilibriumResult(
        x=x, tau=tau, path_costs=pc, lam=lam, f=f,
        potential=float(table.potential(np.maximum(x, 0.0))),
        gap=gap, regime=regime, sc=sc_dual,
        fw_iters=fw_iters, active_set_iters=as_iters,
        path_ids=inc.path_ids,
        path_od=tuple(inc.od_of_path(j) for j in range(inc.n_paths)),
    )


def wardrop_gap(net, commodities, fl: FlowLoad, mu) -> float:
    """Worst excess of a used path's cost over its OD's cheapest alternative."""
    inc = build_incidence(net, commodities)
    mu = np.asarray(mu, dtype=float)
    fl.check_consistent(inc)
    if np.max(np.abs(inc.s @ fl.f - mu), initial=0.0) > 1e-6 * (1.0 + np.max(np.abs(mu), initial=0.0)):
        raise SolverError("flow does not meet the demand vector")
    if np.min(fl.f, initial=0.0) < -1e-9:
        raise SolverError("flow has negative entries")
    table = build_cost_table(net.costs, DEFAULT_EXTENSION_SLOPE)
    pc = inc.delta.T @ table.values(np.maximum(fl.x, 0.0))
    worst = 0.0
    for h in range(inc.n_ods):
        own = np.flatnonzero(inc.s[h])
        best = np.min(pc[own])
        for j in own:
            if fl.f[j] > 0:
                worst = max(worst, float(pc[j] - best))
    return worst


def active_regime(res: EquilibriumResult, eps_active: float) -> tuple:
    """Paths whose cost is within a relative eps of their OD's equilibrium cost."""
    out = []
    for pid, cost, h in zip(res.path_ids, res.path_costs, res.path_od):
        lamv = res.lam[h]
        if cost - lamv <= eps_active * (1.0 + abs(lamv)):
            out.append(pid)
    return tuple(out)


def social_cost(net, fl: FlowLoad, commodities=None) -> float:
    """Total travel cost of a consistent flow-load pair."""
    table = build_cost_table(net.costs, DEFAULT_EXTENSION_SLOPE)
    c = table.values(np.maximum(fl.x, 0.0))
    edge_sum = float(fl.x @ c)
    if commodities is not None:
        inc = build_incidence(net, commodities)
        fl.check_consistent(inc)
        path_sum = float(fl.f @ (inc.delta.T @ c))
        if abs(edge_sum - path_sum) > 1e-9 * (1.0 + abs(edge_sum)):
            raise SolverError("edge-sum and path-sum total costs disagree")
    return edge_sum


def marginal_network(net: Network) -> Network:
    """Same graph with every cost replaced by its marginal-cost transform."""
    try:
        edges = [Edge(e.edge_id, e.tail, e.head, marginal(e.cost)) for e in net.edges]
    except CostError as exc:
        raise NonConvexCostError(
            f"total edge cost x*c(x) is not convex, optimum transform refused: {exc}"
        ) from exc
    return Network(net.vertices, edges)


def solve_social_optimum(net, commodities, mu,
                         opts: SolverOptions = DEFAULT_OPTIONS) -> EquilibriumResult:
    """System optimum as the equilibrium of the marginal-cost game.

    The returned result carries the marginal game's costs; `sc` is replaced
    by the original-cost total so it reads as the optimal social cost.
    """
    mnet = marginal_network(net)
    res = solve_equilibrium(mnet, commodities, mu, opts)
    sc_opt = social_cost(net, FlowLoad(f=res.f, x=res.x))
    return replace(res, sc=sc_opt)


def grad_social_optimum(net, commodities, mu,
                        opts: SolverOptions = DEFAULT_OPTIONS) -> np.ndarray:
    """Per-OD derivative of the optimal social cost (marginal-game costs)."""
    return solve_social_optimum(net, commodities, mu, opts).lam


def price_of_anarchy(net, commodities, mu,
                     opts: SolverOptions = DEFAULT_OPTIONS) -> float:
    mu = np.asarray(mu, dtype=float)
    if not np.any(mu > 0):
        return 1.0
    eq = solve_equilibrium(net, commodities, mu, opts)
    opt = solve_social_optimum(net, commodities, mu, opts)
    if opt.sc == 0.0:
        # Both totals vanish (demand negligible or all costs free at the
        # equilibrium loads); the ratio is taken as its limiting value.
        return 1.0
    return eq.sc / opt.sc


def dual_certificate_affine(net, commodities, mu, res: EquilibriumResult) -> float:
    """Duality gap certifying equilibrium loads, for strictly increasing affine costs."""
    for e in net.edges:
        if not isinstance(e.cost, AffineCost) or e.cost.a <= 0:
            raise SolverError(
                f"dual certificate needs affine costs with positive slope; edge {e.edge_id} fails"
            )
    inc = build_incidence(net, commodities)
    mu = np.asarray(mu, dtype=float)
    table = build_cost_table(net.costs, DEFAULT_EXTENSION_SLOPE)
    phi = float(table.potential(np.maximum(res.x, 0.0)))
    conj = sum(fenchel_conjugate_affine(e.cost, float(t)) for e, t in zip(net.edges, res.tau))
    pc = inc.delta.T @ res.tau
    dual = -conj + sum(
        mu[h] * float(np.min(pc[np.flatnonzero(inc.s[h])])) for h in range(inc.n_ods)
    )
    return phi - dual
