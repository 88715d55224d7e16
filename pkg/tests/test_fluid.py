import math
import random
import warnings

import numpy as np
import pytest

from coalition_forge.expr import parse
from coalition_forge.fluid import (
    FluidCost,
    FluidModel,
    QuadratureConfig,
    chi_surplus_threshold,
    core_violation_margin,
    efficiency_residual,
    fair_identity_residual,
    fluid_ad,
    fluid_chi,
    m_omega,
    noncontributing_providers,
    peer_split_equilibrium,
)
from coalition_forge.game import CapacityError, GameStructureError
from fluid_cases import (
    EXAMPLE1,
    EXAMPLE2,
    concave_text,
    curves,
    decreasing_text,
    grid_m,
    pair_oracle,
    random_costs,
    single_oracle,
)

GRID = [k / 10 for k in range(11)]


@pytest.fixture(scope="module")
def ex1():
    return FluidModel(curves(EXAMPLE1))


@pytest.fixture(scope="module")
def ex2():
    return FluidModel(curves(EXAMPLE2))


# -- joint minimal cost ------------------------------------------------------


def test_m_single_provider_is_the_curve(ex2):
    for x in GRID:
        assert ex2.m(["p"], x) == pytest.approx(1 - x**1.5, abs=1e-15)
        assert ex2.m([], x) == 0.0


def test_m_example2_closed_form(ex2):
    for x in np.linspace(0, 1, 41):
        assert ex2.m(["p", "q"], x) == pytest.approx(2 - max(x**1.5, 2 * x / 3), abs=1e-12)


@pytest.mark.parametrize("seed", range(8))
def test_m_two_providers_against_grid(seed):
    rng = random.Random(seed)
    costs = random_costs(rng, 2)
    model = FluidModel(costs)
    for x in (0.0, 0.13, 0.5, 0.77, 1.0):
        got, want = model.m(["p", "q"], x), grid_m(costs, ["p", "q"], x)
        assert got <= want + 1e-12
        assert got == pytest.approx(want, abs=1e-7)


@pytest.mark.parametrize("seed", range(3))
def test_m_three_providers_against_grid(seed):
    rng = random.Random(100 + seed)
    costs = random_costs(rng, 3)
    model = FluidModel(costs)
    for x in (0.0, 0.4, 1.0):
        got, want = model.m(["p", "q", "r"], x), grid_m(costs, ["p", "q", "r"], x)
        assert got <= want + 1e-12
        assert got == pytest.approx(want, abs=1e-4)


@pytest.mark.parametrize("seed", range(4))
def test_m_structure(seed):
    rng = random.Random(200 + seed)
    costs = random_costs(rng, 3)
    model = FluidModel(costs)
    xs = np.linspace(0, 1, 11)
    for s in (["p"], ["p", "q"], ["q", "r"], ["p", "q", "r"]):
        vals = [model.m(s, float(x)) for x in xs]
        assert all(b <= a + 1e-12 for a, b in zip(vals, vals[1:]))
        assert vals[0] == pytest.approx(sum(costs[n](0) for n in s), abs=1e-12)
    for x in xs:
        assert model.m(["p", "q"], x) <= model.m(["p"], x) + costs["q"](0) + 1e-12
        assert model.m(["p", "q", "r"], x) <= model.m(["p", "q"], x) + costs["r"](0) + 1e-12


def test_m_three_providers_has_no_jumps_near_an_entry_point():
    # a third provider starts taking peers just below x = 0.941 here; the
    # minimum must stay Lipschitz there, since quadrature stalls on jumps
    model = FluidModel(
        curves(
            {
                "p": "1.67*(1-x)^2 + 0.836",
                "q": "0.779 + 0.535*exp(-2.369*x)",
                "r": "0.081 + 0.818*(1 - x)",
            }
        )
    )
    x0 = 0.9409427356738693
    vals = [model.m(["p", "q", "r"], x0 + d) for d in (-1e-6, -1e-8, 0.0, 1e-8, 1e-6)]
    steps = [1e-6 - 1e-8, 1e-8, 1e-8, 1e-6 - 1e-8]
    for a, b, h in zip(vals, vals[1:], steps):
        assert 0.0 <= a - b <= 3.4 * h + 1e-13


def test_m_two_providers_has_no_jumps_where_the_basin_switches():
    # concave p plus convex q: two local minima trade places near y = 0.4794
    costs = curves({"p": "0.96 + 2.389*(1 - x^1.5)", "q": "0.199 + 1.147*exp(-3.566*x)"})
    model = FluidModel(costs)
    ys = 0.479368 + np.linspace(-1e-5, 1e-5, 41)
    vals = np.array([model.m(["p", "q"], float(y)) for y in ys])
    slopes = np.diff(vals) / np.diff(ys)
    assert np.all(slopes <= 1e-6) and np.all(slopes >= -4.2)
    for y in ys[::10]:
        assert model.m(["p", "q"], float(y)) <= grid_m(costs, ["p", "q"], float(y)) + 1e-12


@pytest.mark.parametrize("seed", range(3))
def test_slope_integral_routes_agree(seed):
    rng = random.Random(300 + seed)
    model = FluidModel(random_costs(rng, 2))
    s = ["p", "q"]
    for a, b in ((1, 0), (1, 1), (2, 1)):
        for x in (0.3, 1.0):
            by_parts = model._slope_integral(
                lambda y: model.m(s, y), lambda y: model.dm(s, y), a, b, x, 1e-10
            )
            direct = model._integrate(lambda u: u**a * (1 - u) ** b * model.dm(s, u * x), 1e-10)
            assert by_parts == pytest.approx(direct, abs=1e-6)


def test_m_rejects_four_providers():
    model = FluidModel({n: parse("1 - x") for n in "abcd"})
    with pytest.raises(CapacityError):
        model.m("abcd", 0.5)


def test_m_uses_running_minimum_for_rising_curves():
    with warnings.catch_warnings(record=True):
        warnings.simplefilter("always")
        model = FluidModel({"p": parse("(x - 0.5)^2")})
    assert model.m(["p"], 1.0) == pytest.approx(0.0, abs=1e-12)


def test_constant_cost_rejected():
    with pytest.raises(ValueError):
        FluidCost("p", parse("2"))


# -- A-D payoffs ---------------------------------------------------------------


def test_example2_closed_forms(ex2):
    for x in GRID:
        p = ex2.ad(["p"], x)
        q = ex2.ad(["q"], x)
        assert p.providers["p"] == pytest.approx(2 * x**1.5 / 5, abs=1e-6)
        assert p.peer == pytest.approx(3 * math.sqrt(x) / 5, abs=1e-6)
        assert q.providers["q"] == pytest.approx(x / 3, abs=1e-6)
        assert q.peer == pytest.approx(1 / 3, abs=1e-6)


def test_example1_peer_payoff_at_zero(ex1):
    assert ex1.ad(["p"], 0.0).peer == pytest.approx(21 / 32, abs=1e-6)


def test_empty_coalition_pays_nothing(ex2):
    pay = fluid_ad(ex2, [], 0.4)
    assert pay.providers == {} and pay.peer == 0.0


@pytest.mark.parametrize("seed", range(5))
def test_single_provider_matches_closed_integrals(seed):
    rng = random.Random(300 + seed)
    costs = random_costs(rng, 1)
    model = FluidModel(costs)
    for x in (0.0, 0.25, 0.6, 1.0):
        prov, peer = single_oracle(costs["p"], x)
        pay = model.ad(["p"], x)
        assert pay.providers["p"] == pytest.approx(prov, abs=1e-8)
        if peer is not None:
            assert pay.peer == pytest.approx(peer, abs=1e-7)


@pytest.mark.parametrize("seed", range(5))
def test_two_providers_match_closed_integrals(seed):
    rng = random.Random(400 + seed)
    costs = random_costs(rng, 2)
    model = FluidModel(costs)
    for x in (0.0, 0.3, 0.85):
        pp, pq, peer = pair_oracle(model, costs, "p", "q", x)
        pay = model.ad(["p", "q"], x)
        assert pay.providers["p"] == pytest.approx(pp, abs=1e-7)
        assert pay.providers["q"] == pytest.approx(pq, abs=1e-7)
        if peer is not None:
            assert pay.peer == pytest.approx(peer, abs=1e-6)


def test_example2_pair_matches_closed_integrals(ex2):
    costs = curves(EXAMPLE2)
    for x in (0.2, 25 / 81, 0.5, 1.0):
        pp, pq, peer = pair_oracle(ex2, costs, "p", "q", x)
        pay = ex2.ad(["p", "q"], x)
        assert (pay.providers["p"], pay.providers["q"], pay.peer) == pytest.approx(
            (pp, pq, peer), abs=1e-6
        )


@pytest.mark.parametrize("seed", range(8))
def test_efficiency_identity(seed):
    rng = random.Random(500 + seed)
    n = 1 + seed % 3
    model = FluidModel(random_costs(rng, n))
    names = model.providers
    for x in (0.0, 0.35, 1.0):
        for kind in ("ad", "chi"):
            pay = model.ad(names, x) if kind == "ad" else model.chi(names[:-1] or names, x)
            assert abs(efficiency_residual(model, pay)) <= 10 * model.cfg.tol


@pytest.mark.parametrize("seed", range(6))
def test_fair_identity(seed):
    rng = random.Random(600 + seed)
    n = 1 + seed % 3
    costs = random_costs(rng, n)
    model = FluidModel(costs)
    names = list(model.providers)
    for x in (0.0, 0.45, 1.0):
        for p in names:
            assert abs(fair_identity_residual(model, names, p, x)) <= 1e-4
    # second route: finite differences of the payoff itself, away from x = 0
    for p in names:
        assert abs(fair_identity_residual(model, names, p, 0.45, method="difference")) <= 1e-4


def test_fair_slope_matches_finite_difference_of_payoff(ex2):
    h = 1e-3
    for x in (0.2, 0.5, 0.8):
        fd = (ex2.provider_ad("pq", "p", x + h) - ex2.provider_ad("pq", "p", x - h)) / (2 * h)
        assert ex2.provider_slope("pq", "p", x) == pytest.approx(fd, abs=1e-5)


def test_fair_identity_example2(ex2):
    assert abs(fair_identity_residual(ex2, ["p", "q"], "q", 0.5)) <= 1e-4
    assert abs(fair_identity_residual(ex2, ["p"], "p", 0.5)) <= 1e-6
    # closed forms: 3 sqrt(x)/5 is the slope of 2 x^1.5/5
    assert ex2.provider_slope(["p"], "p", 0.5) == pytest.approx(0.6 * 0.5**0.5, abs=1e-8)
    assert abs(fair_identity_residual(ex2, ["p", "q"], "p", 0.0)) <= 1e-6


def test_fair_rejects_outside_provider(ex2):
    with pytest.raises(GameStructureError):
        fair_identity_residual(ex2, ["p"], "q", 0.5)


@pytest.mark.parametrize("seed", range(4))
def test_a_provider_earns_most_alone(seed):
    rng = random.Random(700 + seed)
    model = FluidModel(random_costs(rng, 2))
    for x in np.linspace(0.05, 1, 8):
        alone, pair = model.ad(["p"], float(x)), model.ad(["p", "q"], float(x))
        assert alone.providers["p"] > pair.providers["p"]


def convex_text(rng: random.Random) -> str:
    a = round(rng.uniform(0.3, 3), 3)
    c = round(rng.uniform(0, 1), 3)
    b = round(rng.uniform(0.5, 4), 3)
    k = rng.choice([1.5, 2, 3])
    return rng.choice([f"{a}*(1-x)^{k} + {c}", f"{c} + {a}*exp(-{b}*x)", f"{c} + {a}*(1 - x)"])


@pytest.mark.parametrize("seed", range(4))
def test_convex_pairs_pay_peers_more(seed):
    rng = random.Random(750 + seed)
    model = FluidModel(random_costs(rng, 2, convex_text))
    for x in np.linspace(0.05, 1, 8):
        assert model.ad(["p"], float(x)).peer < model.ad(["p", "q"], float(x)).peer


def test_a_concave_provider_can_pay_peers_more_alone():
    # p saves 1.969 x^3 and q saves 1.647 x; for x below 0.9146 the pair's
    # joint minimum uses q alone, so M(y) = 4.574 - 1.647 y and the payoffs
    # have closed forms. Peers do better with p alone once x > 0.835.
    model = FluidModel(curves({"p": "0.514 + 1.969*(1 - x^3)", "q": "0.444 + 1.647*(1 - x)"}))
    c = 3 * 1.969
    for x in (0.5, 0.8, 0.85, 0.9):
        alone, pair = model.ad(["p"], x), model.ad(["p", "q"], x)
        assert alone.peer == pytest.approx(c * x**2 / 4, abs=1e-8)
        assert pair.peer == pytest.approx(c * x**2 / 20 + 1.647 / 2, abs=1e-8)
        assert alone.providers["p"] > pair.providers["p"]
        assert (alone.peer > pair.peer) == (x > 0.835)


# -- chi payoffs ---------------------------------------------------------------


def test_chi_at_grand_coalition_is_shapley(ex2):
    chi = ex2.chi(["p", "q"], 1.0, {"p": 2.0, "q": 0.5})
    phi = ex2.shapley()
    assert chi.peer == pytest.approx(phi.peer, abs=10 * ex2.cfg.tol)
    for n in ("p", "q"):
        assert chi.providers[n] == pytest.approx(phi.providers[n], abs=1e-9)


def test_chi_surplus_shared_with_same_sign(ex2):
    phi = ex2.shapley()
    for coalition in (["p"], ["q"], ["p", "q"]):
        for x in GRID:
            chi = fluid_chi(ex2, coalition, x)
            signs = {np.sign(round(chi.peer - phi.peer, 12))}
            signs |= {np.sign(round(chi.providers[n] - phi.providers[n], 12)) for n in coalition}
            assert len(signs) == 1


def test_example1_surplus_threshold(ex1):
    assert chi_surplus_threshold(ex1, "q") == pytest.approx(0.5625, abs=1e-3)
    phi = ex1.shapley()
    above = ex1.chi(["q"], 0.7)
    assert above.peer > phi.peer and above.providers["q"] > phi.providers["q"]
    below = ex1.chi(["q"], 0.4)
    assert below.peer < phi.peer


def test_chi_rejects_nonpositive_weights(ex2):
    with pytest.raises(ValueError):
        ex2.chi(["p"], 0.5, {"p": 0.0})


# -- noncontributing providers and the core -----------------------------------


def test_noncontributing_example2(ex2):
    assert noncontributing_providers(ex2) == {"q"}
    assert core_violation_margin(ex2, "q") > 0


def test_single_provider_contributes():
    model = FluidModel({"p": parse("1 - x^2")})
    assert noncontributing_providers(model) == set()
    with pytest.raises(GameStructureError):
        core_violation_margin(model, "p")


@pytest.mark.parametrize("seed", range(6))
def test_concave_pairs_have_a_noncontributing_provider(seed):
    rng = random.Random(800 + seed)
    model = FluidModel(random_costs(rng, 2, concave_text))
    idle = noncontributing_providers(model)
    assert len(idle) >= 1
    for p in idle:
        assert core_violation_margin(model, p) > 0


# -- peer split ------------------------------------------------------------------


def test_example1_split(ex1):
    res = peer_split_equilibrium(ex1, "p", "q")
    assert res.monopoly is None
    assert res.x == pytest.approx(0.6163, abs=1e-3)


def test_example2_split_is_monopoly(ex2):
    res = peer_split_equilibrium(ex2, "p", "q")
    assert res.monopoly == "p" and res.x == 1.0
    assert any(abs(c - 25 / 81) < 1e-4 for c in res.crossings)
    for x in (0.35, 0.6, 0.9):
        assert ex2.ad(["p"], x).peer > ex2.ad(["q"], x).peer


def test_symmetric_convex_costs_split_evenly():
    model = FluidModel({"p": parse("(1-x)^2"), "q": parse("(1-x)^2")})
    res = peer_split_equilibrium(model, "p", "q")
    assert res.x == pytest.approx(0.5, abs=1e-9) and res.monopoly is None


def test_symmetric_concave_costs_tie_at_half():
    model = FluidModel({"p": parse("1 - x^2"), "q": parse("1 - x^2")})
    res = peer_split_equilibrium(model, "p", "q")
    assert res.x == pytest.approx(0.5, abs=1e-9)
    # both monopolies pay peers the same, so the unstable crossing between them is returned
    assert res.monopoly is None and res.stable == [] and not res.indifferent


def test_identical_linear_costs_are_indifferent():
    # a linear cost pays each peer 1/2 whatever the split
    model = FluidModel({"p": parse("1 - x"), "q": parse("1 - x")})
    res = peer_split_equilibrium(model, "p", "q")
    assert res.indifferent and res.x == 0.5


def test_start_point_selects_basin():
    model = FluidModel({"p": parse("1 - x^2"), "q": parse("1 - x^2")})
    assert peer_split_equilibrium(model, "p", "q", start=0.8).monopoly == "p"
    assert peer_split_equilibrium(model, "p", "q", start=0.2).monopoly == "q"


def test_split_needs_two_providers(ex2):
    with pytest.raises(GameStructureError):
        peer_split_equilibrium(FluidModel({"p": parse("1-x")}), "p", "q")


def test_looser_tolerance_config_is_used():
    model = FluidModel(curves(EXAMPLE2), QuadratureConfig(tol=1e-6))
    assert model.ad(["p"], 0.5).peer == pytest.approx(3 * math.sqrt(0.5) / 5, abs=1e-5)
