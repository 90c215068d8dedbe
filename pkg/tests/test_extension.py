from __future__ import annotations

import numpy as np
import pytest
from scipy import stats

from zeroext import extension, graphs
from zeroext.extension import (
    ExtensionError,
    as_graph,
    edge_label,
    flatten,
    load_extension,
    project,
    project_path,
    sample_extension,
    save_extension,
    traverse_inter,
    vertex_id,
)
from zeroext.graphs import Graph, build_cayley, uniform_lengths


def edgeless(n):
    return Graph(vertex_count=n, edges=[])


def single_edge():
    return Graph(vertex_count=2, edges=[(0, 1)])


def c3():
    return build_cayley([3], [(1,)])


def test_matching_special_case():
    x = sample_extension(single_edge(), np.array([1.0]), edgeless(3), np.zeros(0), seed=5)
    g, lengths = as_graph(x)
    assert g.vertex_count == 6
    assert g.edge_count == 3
    assert np.all(g.degrees() == 1)  # a perfect matching between the clouds
    assert np.all(lengths == 1.0)


def test_single_vertex_base_copies_fiber():
    fiber = build_cayley([4], [(1,)])
    base = Graph(vertex_count=1, edges=[])
    x = sample_extension(base, np.zeros(0), fiber, uniform_lengths(fiber, 2.0), seed=0)
    g, lengths = as_graph(x)
    assert g.vertex_count == 4
    assert g.edges == fiber.edges
    assert np.all(lengths == 2.0)


def test_c3_by_c3_degrees_and_determinism(tmp_path):
    x1 = sample_extension(c3(), uniform_lengths(c3(), 1.0), c3(), uniform_lengths(c3(), 1.0), seed=42)
    x2 = sample_extension(c3(), uniform_lengths(c3(), 1.0), c3(), uniform_lengths(c3(), 1.0), seed=42)
    g1, _ = as_graph(x1)
    assert np.all(g1.degrees() == 4)  # deg_H + deg_G = 2 + 2
    p1, p2 = tmp_path / "x1", tmp_path / "x2"
    save_extension(x1, p1)
    save_extension(x2, p2)
    assert p1.read_bytes() == p2.read_bytes()
    x3 = sample_extension(c3(), uniform_lengths(c3(), 1.0), c3(), uniform_lengths(c3(), 1.0), seed=43)
    assert any(not np.array_equal(a, b) for a, b in zip(x1.matchings, x3.matchings))


def test_edge_counts():
    lift = sample_extension(c3(), uniform_lengths(c3(), 1.0), edgeless(4), np.zeros(0), seed=1)
    gl, _ = as_graph(lift)
    assert gl.edge_count == 3 * 4  # |E_G| * |V_H|
    x = sample_extension(c3(), uniform_lengths(c3(), 1.0), c3(), uniform_lengths(c3(), 1.0), seed=1)
    gx, _ = as_graph(x)
    assert gx.edge_count == 3 * 3 + 3 * 3  # intra + inter


def test_degree_identity_over_samples():
    base = graphs.random_regular(6, 3, seed=2)
    fiber = graphs.random_regular(8, 3, seed=3)
    for seed in range(5):
        x = sample_extension(
            base, uniform_lengths(base, 1.0), fiber, uniform_lengths(fiber, 1.0), seed=seed
        )
        g, _ = as_graph(x)
        deg = g.degrees()
        for v in range(g.vertex_count):
            assert deg[v] == 3 + 3


def test_projection_of_edges_and_paths():
    x = sample_extension(c3(), uniform_lengths(c3(), 1.0), c3(), uniform_lengths(c3(), 1.0), seed=42)
    flat = flatten(x)
    # An intra edge projects to a vertex, no base edge.
    intra = next(e for e in range(flat.graph.edge_count) if flat.edge_kind[e] == 0)
    u, v = flat.graph.edges[intra]
    bverts, bedges = project_path(x, [u, v])
    assert bedges == []
    assert bverts == [project(x, u)]
    # An inter edge projects to its base edge.
    inter = next(e for e in range(flat.graph.edge_count) if flat.edge_kind[e] == 1)
    u, v = flat.graph.edges[inter]
    bverts, bedges = project_path(x, [u, v])
    assert bedges == [int(flat.edge_origin[inter])]
    assert bverts == [project(x, u), project(x, v)]


def test_mixed_path_projection_hand_trace():
    x = sample_extension(c3(), uniform_lengths(c3(), 1.0), c3(), uniform_lengths(c3(), 1.0), seed=7)
    # Build a 4-step walk by hand: intra step in cloud 0, cross base edge
    # (0,1), intra step in cloud 1, cross base edge (1,2).
    e01 = x.base.edge_lookup()[(0, 1)]
    e12 = x.base.edge_lookup()[(1, 2)]
    start = vertex_id(x, 0, 0)
    step1 = vertex_id(x, 0, 1)  # fiber edge (0,1) inside cloud 0
    step2 = traverse_inter(x, e01, step1)
    h2 = step2 % 3
    step3 = vertex_id(x, 1, (h2 + 1) % 3)
    step4 = traverse_inter(x, e12, step3)
    bverts, bedges = project_path(x, [start, step1, step2, step3, step4])
    assert bedges == [e01, e12]
    assert bverts == [0, 1, 2]


def test_lift_covering_property():
    base = build_cayley([5], [(1,), (2,)])
    fiber = edgeless(3)
    for seed in range(5):
        x = sample_extension(base, uniform_lengths(base, 1.0), fiber, np.zeros(0), seed=seed)
        flat = flatten(x)
        star = {g: set() for g in range(base.vertex_count)}
        for eid, (u, v) in enumerate(base.edges):
            star[u].add(eid)
            star[v].add(eid)
        incident = {v: [] for v in range(flat.graph.vertex_count)}
        for eid, (u, v) in enumerate(flat.graph.edges):
            incident[u].append(eid)
            incident[v].append(eid)
        for v in range(flat.graph.vertex_count):
            base_edges = [int(flat.edge_origin[e]) for e in incident[v]]
            assert sorted(base_edges) == sorted(star[project(x, v)])


def test_labels_present_iff_both_labeled():
    labeled = build_cayley([4], [(1,)])
    x = sample_extension(labeled, uniform_lengths(labeled, 1.0), labeled, uniform_lengths(labeled, 1.0), seed=0)
    flat = flatten(x)
    assert flat.labels_present
    g, _ = as_graph(x)
    for v in range(g.vertex_count):
        incident = [g.labels[(v, eid)] for eid, (a, b) in enumerate(g.edges) if v in (a, b)]
        assert len(set(incident)) == len(incident)
    plain = graphs.random_regular(4, 3, seed=0)
    x2 = sample_extension(plain, uniform_lengths(plain, 1.0), labeled, uniform_lengths(labeled, 1.0), seed=0)
    assert not flatten(x2).labels_present
    assert flatten(x2).graph.labels is None


def test_edge_label_round_trip_directions():
    x = sample_extension(c3(), uniform_lengths(c3(), 1.0), c3(), uniform_lengths(c3(), 1.0), seed=9)
    flat = flatten(x)
    for eid in range(flat.graph.edge_count):
        u, v = flat.graph.edges[eid]
        lab_u = edge_label(x, eid, u)
        lab_v = edge_label(x, eid, v)
        assert lab_u.kind == lab_v.kind
        if lab_u.scheme == "gen":
            src = x.fiber if lab_u.kind == "intra" else x.base
            assert src.generator_inverse[lab_u.value] == lab_v.value


def test_extension_file_round_trip(tmp_path):
    base, fiber = c3(), c3()
    x = sample_extension(base, uniform_lengths(base, 1.0), fiber, uniform_lengths(fiber, 1.0), seed=31)
    path = tmp_path / "x.matchings"
    save_extension(x, path)
    back = load_extension(base, uniform_lengths(base, 1.0), fiber, uniform_lengths(fiber, 1.0), path)
    assert back.seed == 31
    assert all(np.array_equal(a, b) for a, b in zip(back.matchings, x.matchings))


def test_traverse_inter_errors():
    x = sample_extension(single_edge(), np.array([1.0]), edgeless(3), np.zeros(0), seed=2)
    with pytest.raises(ExtensionError):
        traverse_inter(x, 0, 99)


def test_matching_uniformity_quick():
    counts: dict[tuple, int] = {}
    h3 = edgeless(3)
    for seed in range(1200):
        x = sample_extension(single_edge(), np.array([1.0]), h3, np.zeros(0), seed=seed)
        key = tuple(int(i) for i in x.matchings[0])
        counts[key] = counts.get(key, 0) + 1
    assert len(counts) == 6
    _, p = stats.chisquare(list(counts.values()))
    assert p >= 0.001
