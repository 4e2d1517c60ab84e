from __future__ import annotations

import numpy as np
import pytest

from softcoevo.genome import InnovationRegistry, MutationParams, mutate, new_minimal_genome

# structural rates well above the defaults so random genomes get deep quickly
BUSY = MutationParams(node_add_prob=0.6, conn_add_prob=0.7, node_delete_prob=0.05, conn_delete_prob=0.05)


def random_genome(rng, inputs=7, outputs=1, steps=12, registry=None, params=BUSY):
    registry = registry or InnovationRegistry(inputs, outputs)
    g = new_minimal_genome(inputs, outputs, rng, registry)
    for _ in range(steps):
        g = mutate(g, registry, params, rng)
    return g


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
