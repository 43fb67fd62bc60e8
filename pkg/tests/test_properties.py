"""Randomized invariants for the solver stack on small affine instances."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from poaphases.costs import AffineCost
from poaphases.equilibrium import (
    dual_certificate_affine,
    price_of_anarchy,
    solve_equilibrium,
    solve_social_optimum,
    wardrop_gap,
)
from poaphases.fixed_regime import solve_fixed_regime
from poaphases.model import Commodity, Edge, Network, Path, build_incidence

slopes = st.floats(min_value=0.1, max_value=2.0, allow_nan=False)
offsets = st.floats(min_value=0.0, max_value=5.0, allow_nan=False)
demands = st.floats(min_value=0.0, max_value=10.0, allow_nan=False)


def parallel_instance(params):
    """Single OD with three parallel edges, affine costs from params."""
    edges = [
        Edge(f"e{i}", "O", "D", AffineCost(a, b))
        for i, (a, b) in enumerate(params)
    ]
    net = Network(["O", "D"], edges)
    paths = tuple(Path(f"p{i}", "od", (f"e{i}",)) for i in range(len(edges)))
    return net, [Commodity("od", "O", "D", paths)]


@settings(max_examples=25, deadline=None)
@given(
    params=st.lists(st.tuples(slopes, offsets), min_size=3, max_size=3),
    mu=demands,
)
def test_equilibrium_gap_and_potential_minimality(params, mu):
    net, coms = parallel_instance(params)
    res = solve_equilibrium(net, coms, (mu,))
    assert res.gap <= 1e-8 * (1.0 + mu)
    assert wardrop_gap(net, coms, res.flow_load(), (mu,)) <= 1e-8 * (1.0 + mu)
    # Any feasible perturbation within the simplex cannot beat the potential.
    rng = np.random.default_rng(0)
    for _ in range(5):
        w = rng.dirichlet(np.ones(len(res.f)))
        f_alt = mu * w
        x_alt = build_incidence(net, coms).delta @ f_alt
        pot_alt = sum(
            e.cost.primitive(x) for e, x in zip(net.edges, x_alt)
        )
        assert res.potential <= pot_alt + 1e-9 * (1.0 + abs(pot_alt))


@settings(max_examples=25, deadline=None)
@given(
    params=st.lists(st.tuples(slopes, offsets), min_size=3, max_size=3),
    mu=demands,
)
def test_poa_at_least_one_and_duality(params, mu):
    net, coms = parallel_instance(params)
    assert price_of_anarchy(net, coms, (mu,)) >= 1.0 - 1e-12
    res = solve_equilibrium(net, coms, (mu,))
    gap = dual_certificate_affine(net, coms, (mu,), res)
    assert -1e-9 <= gap <= 1e-7 * (1.0 + res.potential)


@settings(max_examples=25, deadline=None)
@given(
    params=st.lists(st.tuples(slopes, offsets), min_size=3, max_size=3),
    mu1=demands,
    mu2=demands,
)
def test_lambda_monotone_in_demand(params, mu1, mu2):
    net, coms = parallel_instance(params)
    lo, hi = sorted((mu1, mu2))
    lam_lo = solve_equilibrium(net, coms, (lo,)).lam[0]
    lam_hi = solve_equilibrium(net, coms, (hi,)).lam[0]
    assert lam_hi >= lam_lo - 1e-8 * (1.0 + abs(lam_hi))


@settings(max_examples=25, deadline=None)
@given(
    params=st.lists(st.tuples(slopes, offsets), min_size=3, max_size=3),
    mu=st.floats(min_value=0.5, max_value=10.0),
)
def test_fixed_regime_reproduces_equilibrium(params, mu):
    net, coms = parallel_instance(params)
    res = solve_equilibrium(net, coms, (mu,))
    sol = solve_fixed_regime(net, coms, sorted(res.regime), (mu,))
    np.testing.assert_allclose(sol.x, res.x, atol=1e-7)
    assert sol.m[0] == pytest.approx(res.lam[0], abs=1e-7)


@settings(max_examples=25, deadline=None)
@given(
    params=st.lists(st.tuples(slopes, offsets), min_size=3, max_size=3),
    mu=demands,
)
def test_optimum_never_worse_than_equilibrium(params, mu):
    net, coms = parallel_instance(params)
    res = solve_equilibrium(net, coms, (mu,))
    opt = solve_social_optimum(net, coms, (mu,))
    assert opt.sc <= res.sc + 1e-9 * (1.0 + res.sc)


@settings(max_examples=15, deadline=None)
@given(
    params=st.lists(st.tuples(slopes, offsets), min_size=3, max_size=3),
    mu=demands,
    scale=st.floats(min_value=0.5, max_value=2.0),
)
def test_cost_scaling_preserves_loads(params, mu, scale):
    # Scaling every cost by the same factor rescales the potential but leaves
    # the equilibrium loads unchanged.
    net, coms = parallel_instance(params)
    scaled = parallel_instance([(a * scale, b * scale) for a, b in params])
    res = solve_equilibrium(net, coms, (mu,))
    res_s = solve_equilibrium(scaled[0], scaled[1], (mu,))
    np.testing.assert_allclose(res_s.x, res.x, atol=1e-7 * (1.0 + mu))
    assert res_s.sc == pytest.approx(scale * res.sc, rel=1e-7, abs=1e-9)
