import os
import random
import sys
from fractions import Fraction
from itertools import permutations
from math import factorial

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

from coalition_forge.game import Player, Role, WorthFunction, members  # noqa: E402
from coalition_forge.gamefile import load  # noqa: E402

settings.register_profile(
    "default", deadline=None, suppress_health_check=[HealthCheck.too_slow], max_examples=60
)
settings.register_profile(
    "thorough", deadline=None, suppress_health_check=[HealthCheck.too_slow], max_examples=1000
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def ex3():
    return load("example3.json").worth_function()


def random_game(rng: random.Random, n: int, lo: int = -5, hi: int = 10, den: int = 3) -> WorthFunction:
    players = [Player(f"a{i}", Role.PEER) for i in range(n)]
    values = [0] + [Fraction(rng.randint(lo, hi), rng.randint(1, den)) for _ in range((1 << n) - 1)]
    return WorthFunction(players, values)


def shapley_by_orderings(v: WorthFunction, coalition: int | None = None) -> dict[int, Fraction]:
    """Average marginal contribution over every ordering of ``coalition``."""
    coalition = v.grand if coalition is None else coalition
    ids = list(members(coalition))
    total = {i: Fraction(0) for i in ids}
    for order in permutations(ids):
        seen = 0
        for i in order:
            total[i] += v(seen | 1 << i) - v(seen)
            seen |= 1 << i
    return {i: x / factorial(len(ids)) for i, x in total.items()}


def set_partitions(items: list):
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in set_partitions(rest):
        yield [[first]] + part
        for k in range(len(part)):
            yield part[:k] + [[first] + part[k]] + part[k + 1 :]
