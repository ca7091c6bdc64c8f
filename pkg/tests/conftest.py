"""Shared fixtures and independent oracles used across the suite.

The oracles here are deliberately naive (exhaustive enumeration, from
scratch recomputation) so they stay independent of the code paths they
check.
"""

from __future__ import annotations

import random
import sys
from fractions import Fraction
from itertools import chain, combinations, product
from pathlib import Path

import pytest

SRC = Path(__file__).resolve().parents[1] / "src"
if str(SRC) not in sys.path:  # allow running the suite without installing
    sys.path.insert(0, str(SRC))

from tensorsplice import Block, required_new_modes  # noqa: E402


def mk(entries: dict, n_modes: int = 3) -> Block:
    return Block(n_modes, entries)


def random_block(
    rng: random.Random,
    n_modes: int = 3,
    max_id: int = 4,
    max_entries: int = 8,
    max_value: int = 9,
) -> Block:
    """Small random integer-valued block; duplicate keys accumulate."""
    entries: dict = {}
    for _ in range(rng.randint(1, max_entries)):
        key = tuple(rng.randrange(max_id) for _ in range(n_modes))
        entries[key] = entries.get(key, 0) + rng.randint(1, max_value)
    return Block(n_modes, entries)


def recomputed_mass(block: Block):
    return sum(block.entries.values())


def recomputed_size(block: Block) -> int:
    sets = [set() for _ in range(block.n_modes)]
    for key in block.entries:
        for mode, idx in enumerate(key):
            sets[mode].add(idx)
    return sum(len(s) for s in sets)


def _nonempty_subsets(ids):
    return list(
        chain.from_iterable(combinations(ids, r) for r in range(1, len(ids) + 1))
    )


def brute_force_best_density(block: Block) -> Fraction:
    """Exact maximum density over every per-mode index-subset restriction."""
    choices = [_nonempty_subsets(block.sorted_ids(m)) for m in range(block.n_modes)]
    best = Fraction(0)
    for picked in product(*choices):
        sets = [set(p) for p in picked]
        mass = sum(
            v
            for k, v in block.entries.items()
            if all(k[m] in sets[m] for m in range(block.n_modes))
        )
        size = sum(len(p) for p in picked)
        density = Fraction(mass, size)
        if density > best:
            best = density
    return best


def family_violations(b1: Block, b2: Block) -> list:
    """Donor sub-blocks of the splice family that would still raise b1.

    The family mirrors the splicer's candidate shapes for the pair's
    current forced modes: one new id per forced mode with every other id
    shared, plus (when nothing is forced) the fully-shared sub-block and
    all single-new-id sub-blocks. Exact integer arithmetic throughout;
    an exhausted splice must leave this list empty.
    """
    out = []
    if b2.is_empty:
        return out
    n = b1.n_modes
    g1 = Fraction(b1.mass, b1.size)
    report = required_new_modes(b1, b2)
    if report.q_modes:
        q = report.q_modes
        free = [m for m in range(n) if m not in q]
        for combo in product(*[b2.sorted_ids(m) for m in q]):
            mass = sum(
                v
                for k, v in b2.entries.items()
                if all(k[m] == c for m, c in zip(q, combo))
                and all(k[m] in b1.index_sets[m] for m in free)
            )
            if mass > len(q) * g1:
                out.append((combo, mass))
    else:
        common_mass = sum(
            v
            for k, v in b2.entries.items()
            if all(k[m] in b1.index_sets[m] for m in range(n))
        )
        if common_mass > 0:
            out.append((("shared",), common_mass))
        for mode in range(n):
            for idx in sorted(b2.index_sets[mode] - b1.index_sets[mode]):
                mass = sum(
                    v
                    for k, v in b2.entries.items()
                    if k[mode] == idx
                    and all(
                        k[m] in b1.index_sets[m] for m in range(n) if m != mode
                    )
                )
                if mass > g1:
                    out.append(((mode, idx), mass))
    return out


def ordered_pair(a: Block, b: Block) -> tuple[Block, Block]:
    """Denser block first, ties keeping the given order."""
    if a.mass * b.size >= b.mass * a.size:
        return a, b
    return b, a


@pytest.fixture
def rng():
    return random.Random(0xC0FFEE)
