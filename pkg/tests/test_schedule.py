from collections import Counter

import numpy as np
import pytest

from lpu import deform, in_module_targets, merge_code_code, target_name
from schedule import (
    ConnectivityGraph,
    Schedule,
    bipartite_edge_coloring,
    color_schedule,
    export_ilp,
    local_improve,
    memory_terms,
    report,
    schedule_memory,
    validate,
)
from tables import ROOT, config_value, load_config, load_table


@pytest.fixture(scope="module")
def gross_memory(gross):
    return ConnectivityGraph.from_code(gross), schedule_memory(gross)


def test_memory_terms_are_a_permutation():
    terms = memory_terms()
    x_times = sorted(terms[f"{v}{i}"] for v in "ab" for i in range(3))
    z_times = sorted(terms[f"{v}{i}"] for v in "cd" for i in range(3))
    assert len(set(x_times)) == 6 and len(set(z_times)) == 6
    for i in range(3):
        for j in range(3):
            assert (terms[f"a{i}"] - terms[f"c{j}"]) * (terms[f"b{j}"] - terms[f"d{i}"]) > 0


def test_gross_memory_schedule(gross_memory):
    graph, sched = gross_memory
    assert validate(graph, sched) == []
    rep = report(graph, sched)
    assert rep.period == 8
    assert rep.cycle_time(10) == 81
    assert rep.period >= graph.degree_lower_bound()


def test_two_gross_memory_schedule(two_gross):
    graph = ConnectivityGraph.from_code(two_gross)
    sched = schedule_memory(two_gross)
    assert validate(graph, sched) == []
    assert report(graph, sched).period == 8


def test_memory_overlaps_have_size_two(gross_memory):
    graph, _ = gross_memory
    assert {len(qs) for qs in graph.anticommuting_overlaps.values()} == {2}


def test_unequality_violation(gross_memory):
    graph, sched = gross_memory
    times = dict(sched.times)
    (r, half), qs = next(iter(graph.check_qubits.items()))
    times[(r, qs[1])] = times[(r, qs[0])]
    problems = validate(graph, Schedule(times, t_max=sched.t_max))
    assert any(p.startswith("unequality") for p in problems)


def test_maxtime_violation(gross_memory):
    graph, sched = gross_memory
    problems = validate(graph, Schedule(dict(sched.times), t_max=5))
    assert any(p.startswith("maxtime") for p in problems)


def test_bell_prep_violation():
    stab = np.zeros((1, 8), dtype=np.uint8)
    stab[0, :4] = 1
    graph = ConnectivityGraph.from_stabilizers(stab, 4, bell_rows=[0])
    assert graph.check_qubits == {(0, 0): [0, 1], (0, 1): [2, 3]}
    times = {(0, 0): 2, (0, 1): 3, (0, 2): 2, (0, 3): 3}
    assert validate(graph, Schedule(times, {0: 1})) == []
    problems = validate(graph, Schedule(times, {0: 2}))
    assert any(p.startswith("bellprep") for p in problems)


def test_overlap_violation():
    # XX and ZZ on the same two qubits must not interleave
    stab = np.array([[1, 1, 0, 0], [0, 0, 1, 1]], dtype=np.uint8)
    graph = ConnectivityGraph.from_stabilizers(stab, 2)
    good = Schedule({(0, 0): 1, (0, 1): 2, (1, 0): 2, (1, 1): 3})
    bad = Schedule({(0, 0): 1, (0, 1): 3, (1, 0): 2, (1, 1): 2})
    assert validate(graph, good) == []
    assert any(p.startswith("overlap") for p in validate(graph, bad))


def test_bipartite_edge_coloring():
    edges = [(a, b) for a in range(3) for b in range(4) if (a + b) % 4 != 3]
    layers = bipartite_edge_coloring(edges)
    degree = max(sum(1 for e in edges if e[1] == b) for b in range(4))
    degree = max(degree, max(sum(1 for e in edges if e[0] == a) for a in range(3)))
    assert len(layers) == degree
    assert sorted(e for layer in layers for e in layer) == sorted(edges)
    for layer in layers:
        assert len({u for u, _ in layer}) == len(layer)
        assert len({v for _, v in layer}) == len(layer)
    assert bipartite_edge_coloring([]) == []


def _is_proper(edges, layers):
    if sorted(e for layer in layers for e in layer) != sorted(set(edges)):
        return False
    return all(len({u for u, _ in l}) == len(l) == len({v for _, v in l}) for l in layers)


@pytest.mark.parametrize("seed", range(5))
def test_edge_coloring_uses_max_degree_colors(seed):
    rng = np.random.default_rng(seed)
    left, right = 5, 16
    edges = set()
    for a in range(left):
        for b in rng.choice(right, size=5, replace=False):
            edges.add((a, int(b)))
    layers = bipartite_edge_coloring(edges)
    assert _is_proper(edges, layers)
    assert len(layers) == max(Counter(a for a, _ in edges).values())


def test_edge_coloring_of_lpu_cycles(gross_module):
    lpu = gross_module.lpu
    edges = [(c, k) for c, cycle in enumerate(lpu.cycles) for k in cycle.edges]
    layers = bipartite_edge_coloring(edges)
    assert _is_proper(edges, layers)
    per_edge = Counter(k for _, k in edges)
    assert len(layers) == max(max(len(c.edges) for c in lpu.cycles), max(per_edge.values()))


def _check_coloring_schedule(graph, code):
    sched = color_schedule(graph, code)
    assert validate(graph, sched) == []
    rep = report(graph, sched)
    assert rep.period >= graph.degree_lower_bound()
    assert rep.serial_period >= rep.period
    assert rep.serial_time(10) == 10 * rep.serial_period
    return sched, rep


@pytest.mark.parametrize("target", [target_name(t) for t in in_module_targets()])
def test_color_schedule_on_gross_targets(gross, gross_module, target):
    graph = ConnectivityGraph.from_deformed(deform(gross_module, target))
    sched, _ = _check_coloring_schedule(graph, gross)
    if graph.bell_rows:
        assert set(sched.bell_times.values()) == {1}
        assert min(sched.times[(r, q)] for r in graph.bell_rows for q in graph.supports[r]) >= 2


@pytest.mark.slow
@pytest.mark.parametrize("target", [target_name(t) for t in in_module_targets()])
def test_color_schedule_on_two_gross_targets(two_gross, two_gross_module, target):
    graph = ConnectivityGraph.from_deformed(deform(two_gross_module, target))
    _check_coloring_schedule(graph, two_gross)


def test_frozen_cycle_follows_lpu_gates(gross, gross_module):
    graph = ConnectivityGraph.from_deformed(deform(gross_module, "X1*Z7"))
    sched = color_schedule(graph, gross)
    for q, rows in graph.data_gates.items():
        if q >= graph.n_code:
            continue
        lpu = [sched.times[(r, q)] for r in rows if graph.row_kinds[r] == "lpu"]
        code = [sched.times[(r, q)] for r in rows if graph.row_kinds[r] == "code"]
        if lpu:
            assert max(lpu) < min(code)


def test_color_schedule_on_code_code_merge(gross, gross_module):
    merged = merge_code_code(gross_module, "X1", gross_module, "Z7")
    graph = ConnectivityGraph.from_deformed(merged)
    assert graph.bell_rows
    sched, _ = _check_coloring_schedule(graph, gross)
    assert set(sched.bell_times.values()) == {1}


def test_in_module_durations_cover_the_configured_cycles():
    cfg = load_config(ROOT / "config.yaml")
    table = load_table("logical_ops")
    for code in ("gross", "two-gross"):
        cycles = config_value(cfg, f"codes.{code}", "cycles")
        assert table["durations"][code]["M"] == 12 * cycles


def test_schedule_csv(gross_memory):
    graph, sched = gross_memory
    lines = sched.to_csv(graph).strip().split("\n")
    assert lines[0] == "check,data,timestep"
    assert len(lines) == 1 + 144 * 6


def test_local_improve_fixpoint(gross_memory):
    graph, sched = gross_memory
    assert local_improve(graph, sched).times == sched.times


def test_local_improve_shortens_delayed_check(gross_memory):
    graph, sched = gross_memory
    times = dict(sched.times)
    # pick a gate that is the last one on its data qubit, then push it later
    q, rows = next(iter(graph.data_gates.items()))
    row = max(rows, key=lambda r: times[(r, q)])
    times[(row, q)] = 12
    delayed = Schedule(times, t_max=14)
    assert validate(graph, delayed) == []
    before = report(graph, delayed).check_lifetimes[(row, 0)]
    improved = local_improve(graph, delayed)
    assert validate(graph, improved) == []
    assert report(graph, improved).check_lifetimes[(row, 0)] < before
    assert report(graph, improved).check_lifetimes[(row, 0)] == 6


def test_export_ilp():
    stab = np.array([[1, 1, 0, 0], [0, 0, 1, 1]], dtype=np.uint8)
    graph = ConnectivityGraph.from_stabilizers(stab, 2)
    text = export_ilp(graph, t_max=6)
    assert text.startswith("Minimize\n obj: F\n")
    assert "Binary" in text and text.endswith("End\n")
    assert " 1 <= t_0_0 <= 6" in text
    empty = ConnectivityGraph(0, [], [])
    assert export_ilp(empty, 4) == "Minimize\n obj: F\nSubject To\nEnd\n"
