"""Built-in example instances used by the test suite and the CLI.

Each builder returns (network, commodities, demand_curve).  The instances
cover the interesting regimes: a three-OD affine network with a derivative
jump under non-proportional demand, a single-OD seven-edge network with five
transition points, parallel links with non-convex kinked costs, a Wheatstone
graph, a parameterized graph where the transition is neither a growth nor a
shrinkage of the active set, and a two-link equality case.
"""

from __future__ import annotations

import math

from .costs import AffineCost, PiecewiseC1Cost, PolynomialCost
from .model import AffineDemand, Commodity, Edge, LinearDemand, Network, Path

SQRT2 = math.sqrt(2.0)


def _single_od(paths):
    return [Commodity("od", paths[0][1], paths[0][2], tuple(p[0] for p in paths))]


def build_fisk():
    """Three ODs on a triangle; the middle OD's demand grows affinely."""
    net = Network(
        ["a", "b", "c"],
        [
            Edge("ab", "a", "b", AffineCost(1.0, 0.0)),
            Edge("ac", "a", "c", AffineCost(1.0, 90.0)),
            Edge("bc", "b", "c", AffineCost(1.0, 0.0)),
        ],
    )
    commodities = [
        Commodity("ab", "a", "b", (Path("p1", "ab", ("ab",)),)),
        Commodity("ac", "a", "c", (
            Path("p2", "ac", ("ac",)),
            Path("p3", "ac", ("ab", "bc")),
        )),
        Commodity("bc", "b", "c", (Path("p4", "bc", ("bc",)),)),
    ]
    demand = AffineDemand(slope=(0.0, 1.0, 0.0), intercept=(1.0, 0.0, 100.0))
    return net, commodities, demand


def build_fig1():
    """Single OD, seven edges, five transition demands at 1, 3, 4, 6, 27/2."""
    net = Network(
        ["O", "v1", "v2", "D"],
        [
            Edge("e1", "O", "v1", AffineCost(1.0 / 3.0, 0.0)),
            Edge("e2", "O", "v2", AffineCost(0.0, 1.0)),
            Edge("e3", "v1", "v2", AffineCost(0.0, 0.0)),
            Edge("e4", "v1", "D", AffineCost(0.0, 1.0)),
            Edge("e5", "v2", "D", AffineCost(1.0, 0.0)),
            Edge("e6", "O", "D", AffineCost(1.0, 2.5)),
            Edge("e7", "O", "D", AffineCost(0.5, 4.0)),
        ],
    )
    commodities = [
        Commodity("od", "O", "D", (
            Path("p_upper", "od", ("e1", "e4")),
            Path("p_lower", "od", ("e2", "e5")),
            Path("p_zigzag", "od", ("e1", "e3", "e5")),
            Path("p_direct1", "od", ("e6",)),
            Path("p_direct2", "od", ("e7",)),
        )),
    ]
    return net, commodities, LinearDemand((1.0,))


def build_twolink():
    """Two parallel links with kinked non-convex costs; load kink at demand 2."""
    c1 = PiecewiseC1Cost(1.0, (0.0, 2.0, -1.0), (2.0, -2.0, 1.0))
    c2 = PiecewiseC1Cost(1.0, (0.0, 2.0, -1.0), (3.0, -4.0, 2.0))
    net = Network(
        ["O", "D"],
        [Edge("e1", "O", "D", c1), Edge("e2", "O", "D", c2)],
    )
    commodities = [
        Commodity("od", "O", "D", (
            Path("p1", "od", ("e1",)),
            Path("p2", "od", ("e2",)),
        )),
    ]
    return net, commodities, LinearDemand((1.0,))


def twolink_loads(mu: float):
    """Closed-form equilibrium loads of the two-link instance."""
    if mu < 2.0:
        return mu / 2.0, mu / 2.0
    return (SQRT2 * mu - SQRT2 + 1.0) / (SQRT2 + 1.0), (mu + SQRT2 - 1.0) / (SQRT2 + 1.0)


def build_wheatstone():
    """Wheatstone graph; the zig-zag path's flow vanishes exactly at demand 2."""
    c3 = PiecewiseC1Cost(1.0, (0.9, 0.2, -0.1), (11.0, -20.0, 10.0))
    c4 = PiecewiseC1Cost(1.0, (0.0, 2.0, -1.0), (2.0, -2.0, 1.0))
    net = Network(
        ["O", "v1", "v2", "D"],
        [
            Edge("e1", "O", "v1", AffineCost(1.0, 0.0)),
            Edge("e2", "O", "v2", AffineCost(1.0, 0.0)),
            Edge("e3", "v1", "D", c3),
            Edge("e4", "v2", "D", c4),
            Edge("e5", "v1", "v2", PolynomialCost((0.0, 0.0, 1.0))),
        ],
    )
    commodities = [
        Commodity("od", "O", "D", (
            Path("p1", "od", ("e1", "e3")),
            Path("p2", "od", ("e2", "e4")),
            Path("p3", "od", ("e1", "e5", "e4")),
        )),
    ]
    return net, commodities, LinearDemand((1.0,))


def build_contraction_expansion(eps: float = 1.0):
    """Single OD where the active set changes sideways at demand 2.

    The vertical edge's slope eps tunes whether the left derivative of the
    equilibrium cost (eps/(1+2eps)) is above, equal to, or below the right
    one (1/3).
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    net = Network(
        ["O", "v1", "v2", "D"],
        [
            Edge("e1", "O", "v1", AffineCost(1.0, 0.0)),
            Edge("e2", "O", "v2", AffineCost(0.0, 1.0)),
            Edge("e3", "v1", "v2", AffineCost(eps, 0.0)),
            Edge("e4", "v1", "D", AffineCost(0.0, 1.0)),
            Edge("e5", "v2", "D", AffineCost(1.0, 0.0)),
            Edge("e6", "O", "D", AffineCost(1.0, 2.0)),
        ],
    )
    commodities = [
        Commodity("od", "O", "D", (
            Path("p1", "od", ("e1", "e4")),
            Path("p2", "od", ("e2", "e5")),
            Path("p3", "od", ("e1", "e3", "e5")),
            Path("p4", "od", ("e6",)),
        )),
    ]
    return net, commodities, LinearDemand((1.0,))


def build_watling_equality():
    """Two parallel links whose equilibrium cost has matching zero slopes at 1."""
    c1 = PiecewiseC1Cost(1.0, (0.0, 2.0, -1.0), (2.0, -2.0, 1.0))
    c2 = PolynomialCost((1.0, 0.0, 1.0))
    net = Network(
        ["O", "D"],
        [Edge("e1", "O", "D", c1), Edge("e2", "O", "D", c2)],
    )
    commodities = [
        Commodity("od", "O", "D", (
            Path("p1", "od", ("e1",)),
            Path("p2", "od", ("e2",)),
        )),
    ]
    return net, commodities, LinearDemand((1.0,))


def build_pigou():
    """Constant link vs linear link; the textbook efficiency-gap instance."""
    net = Network(
        ["O", "D"],
        [
            Edge("e1", "O", "D", AffineCost(0.0, 1.0)),
            Edge("e2", "O", "D", AffineCost(1.0, 0.0)),
        ],
    )
    commodities = [
        Commodity("od", "O", "D", (
            Path("p1", "od", ("e1",)),
            Path("p2", "od", ("e2",)),
        )),
    ]
    return net, commodities, LinearDemand((1.0,))


BUILDERS = {
    "fisk": build_fisk,
    "fig1": build_fig1,
    "twolink": build_twolink,
    "wheatstone": build_wheatstone,
    "contraction-expansion": build_contraction_expansion,
    "watling-equality": build_watling_equality,
    "pigou": build_pigou,
}


def get_instance(name: str, **kwargs):
    if name not in BUILDERS:
        raise KeyError(f"unknown example {name!r}; choose from {sorted(BUILDERS)}")
    return BUILDERS[name](**kwargs)
