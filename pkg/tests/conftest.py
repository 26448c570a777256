"""Shared graph suite and expensive session-scoped solves."""
from __future__ import annotations

import pytest

from a2aflow.graphs import (gen_complete_bipartite, gen_gen_kautz,
                            gen_hypercube, gen_random_regular, gen_torus,
                            gen_twisted_hypercube, puncture)


def build_suite():
    """The 12-graph comparison suite: (name, graph, regular out-degree or None)."""
    return [
        ("ring3", gen_torus([3], bidirectional=False), 1),
        ("ring5", gen_torus([5]), 2),
        ("torus3x3", gen_torus([3, 3]), 4),
        ("torus3x3x3", gen_torus([3, 3, 3]), 6),
        ("hypercube3", gen_hypercube(3), 3),
        ("twisted3", gen_twisted_hypercube(3), 3),
        ("bipartite4", gen_complete_bipartite(4), 2),
        ("bipartite8", gen_complete_bipartite(8), 4),
        ("genkautz27", gen_gen_kautz(27, 4), 4),
        ("genkautz64", gen_gen_kautz(64, 4), 4),
        ("rrg16", gen_random_regular(16, 4, seed=7), 4),
        ("punctured27", puncture(gen_torus([3, 3, 3]), "edges", 3, seed=0),
         None),
    ]


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def suite():
    return build_suite()


@pytest.fixture(scope="session")
def decomp_solutions(suite):
    """Decomposed MCF with recovered per-commodity flows, per suite graph."""
    from a2aflow.mcf import mcf_decomposed

    return {name: mcf_decomposed(g) for name, g, _ in suite}


@pytest.fixture(scope="session")
def timed_link_gk64():
    """(solution, wall seconds) for link MCF on GenKautz n=64 d=4."""
    import time

    from a2aflow.mcf import mcf_link

    g = gen_gen_kautz(64, 4)
    t0 = time.perf_counter()
    sol = mcf_link(g)
    return sol, time.perf_counter() - t0


@pytest.fixture(scope="session")
def link_F(suite, timed_link_gk64):
    """Link-MCF concurrent rate per suite graph."""
    from a2aflow.mcf import mcf_link

    out = {}
    for name, g, _ in suite:
        if name == "genkautz64":
            out[name] = timed_link_gk64[0].F
        else:
            out[name] = mcf_link(g).F
    return out
