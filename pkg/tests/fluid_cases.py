"""Random cost instances and independent oracles for the fluid model."""

import random

import numpy as np
from scipy import integrate

from coalition_forge.expr import parse

EXAMPLE1 = {"p": "7*(1-x)^1.5/8 + 1/8", "q": "1 - x"}
EXAMPLE2 = {"p": "1 - x^1.5", "q": "1 - 2*x/3"}


def curves(texts):
    return {k: parse(v) for k, v in texts.items()}


def decreasing_text(rng: random.Random) -> str:
    """A smooth strictly decreasing nonnegative cost with a finite slope at 0."""
    a = round(rng.uniform(0.3, 3), 3)
    c = round(rng.uniform(0, 1), 3)
    b = round(rng.uniform(0.5, 4), 3)
    k = rng.choice([1.5, 2, 3])
    return rng.choice(
        [
            f"{a}*(1-x)^{k} + {c}",
            f"{c} + {a}*exp(-{b}*x)",
            f"{c} + {a}*(1 - x^{k})",
            f"{c} + {a}*(1 - x)",
        ]
    )


def concave_text(rng: random.Random) -> str:
    a = round(rng.uniform(0.3, 3), 3)
    c = round(rng.uniform(0, 1), 3)
    k = rng.choice([1.5, 2, 3])
    return rng.choice([f"{c} + {a}*(1 - x^{k})", f"{c} + {a}*(1 - x)"])


def random_costs(rng, n, maker=decreasing_text):
    names = ["p", "q", "r"][:n]
    return {name: parse(maker(rng)) for name in names}


def quad(f, a=0.0, b=1.0):
    return integrate.quad(f, a, b, epsabs=1e-12, epsrel=1e-12, limit=200)[0]


def grid_m(costs, names, x, points=20001):
    """Brute-force minimum of the summed costs over splits of ``x``."""
    if not names:
        return 0.0
    if len(names) == 1:
        return min(costs[names[0]](x), float(np.min(costs[names[0]].many(np.linspace(0, x, points)))))
    if len(names) == 2:
        y = np.linspace(0, x, points)
        return float(np.min(costs[names[0]].many(y) + costs[names[1]].many(x - y)))
    side = 401
    y = np.linspace(0, x, side)
    a, b = np.meshgrid(y, y, indexing="ij")
    ok = a + b <= x + 1e-15
    c = np.clip(x - a - b, 0, None)
    total = costs[names[0]].many(a) + costs[names[1]].many(b) + costs[names[2]].many(c)
    return float(np.min(total[ok]))


def single_oracle(cost, x):
    """Provider and peer payoffs of a one-provider coalition."""
    provider = cost(0) - quad(lambda u: cost(u * x))
    if x == 0:
        return provider, None
    peer = -cost(x) / x + quad(lambda u: cost(u * x)) / x
    return provider, peer


def pair_oracle(model, costs, p, q, x):
    """Two-provider payoffs; peer terms integrated by parts so no slope is needed."""
    mpq = lambda t: model.m([p, q], t)

    def prov(a, b):
        return (
            costs[a](0)
            - quad(lambda u: u * mpq(u * x))
            - quad(lambda u: (1 - u) * costs[a](u * x))
            + quad(lambda u: u * costs[b](u * x))
        )

    peer = None
    if x > 0:
        peer = -mpq(x) / x + 2 * quad(lambda u: u * mpq(u * x)) / x
        for name in (p, q):
            peer += quad(lambda u: (1 - 2 * u) * costs[name](u * x)) / x
    return prov(p, q), prov(q, p), peer
