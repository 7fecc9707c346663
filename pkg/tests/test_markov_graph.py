import json
from fractions import Fraction

import pytest

from mixmap.errors import DomainError, ParameterError
from mixmap.construction.params import level_positions
from mixmap.chain.markov_graph import (TruncationMarker, Vertex, build_truncated_graph, export_graph, extension_graph,
                                       extra_vertices, graph_document, graph_dot, graph_from_document,
                                       is_edge, restrict, standard_osc_count, subgraph_Hn, successors,
                                       validate_edges, verify_markov_property, vertex_interval)


def test_vertex_labels():
    assert Vertex.osc(2, 5).label == 'Osc(2,5)'
    assert Vertex.scaled(3, 1).label == 'ScaledOsc(3,1)'
    assert Vertex.tail(4).label == 'Tail(4)'
    assert Vertex.special('Hump').label == 'S:Hump'
    assert Vertex.from_label('Gap(2, 0)') == Vertex.gap(2, 0)
    assert Vertex.from_label('S:Right') == Vertex.special('Right')


@pytest.mark.parametrize('label', ['Osc(2)', 'Loop(1,1)', 'S:Nowhere'])
def test_bad_labels(label):
    with pytest.raises(DomainError):
        Vertex.from_label(label)


def test_vertex_intervals(params14):
    assert vertex_interval(Vertex.osc(1, 1), params14) == (Fraction(2), Fraction(2) + Fraction(1, 26))
    assert vertex_interval(Vertex.scaled(1, 1), params14) == (Fraction(1, 7), Fraction(5, 28))
    x2 = level_positions(2)[0]
    assert vertex_interval(Vertex.gap(1, 0), params14) == (level_positions(2)[1], Fraction(2))
    assert vertex_interval(Vertex.tail(2), params14) == (Fraction(13, 8) / 196, Fraction(1, 14))
    assert vertex_interval(Vertex.special('Hump'), params14) == (Fraction(1, 2), Fraction(1))
    assert vertex_interval(Vertex.scaled(2, 2), params14)[0] == x2 / 196
    with pytest.raises(DomainError):
        vertex_interval(Vertex.osc(1, 14), params14)
    with pytest.raises(DomainError):
        vertex_interval(Vertex.tail(1), params14)


def test_successor_rules(params14):
    graph = build_truncated_graph(params14, 2)
    assert graph.successors(Vertex.osc(1, 1)) == [Vertex.scaled(1, 1)]
    assert graph.successors(Vertex.osc(1, 2)) == [Vertex.scaled(1, 1), Vertex.gap(1, 1)]
    assert graph.successors(Vertex.scaled(2, 2)) == [Vertex.scaled(2, 1)]
    assert graph.successors(Vertex.gap(2, 1)) == [Vertex.gap(2, 0)]
    assert graph.successors(Vertex.tail(2)) == [Vertex.scaled(1, 1), Vertex.gap(1, 1),
                                                 Vertex.special('LeftHump'), Vertex.special('Hump')]
    assert graph.successors(Vertex.special('LeftHump')) == [Vertex.special('Right')]
    assert graph.successors(Vertex.gap(1, 0)) == [Vertex.scaled(2, 1), Vertex.gap(1, 1),
                                                  Vertex.gap(2, 1), Vertex.tail(2)]


def test_truncation_marker(params14):
    out = list(successors(Vertex.gap(1, 0), params14, 1))
    assert isinstance(out[-1], TruncationMarker)
    assert out[-1].first_dropped_level == 2
    graph = build_truncated_graph(params14, 1)
    assert graph.is_truncated(Vertex.special('Hump'))
    assert not graph.is_truncated(Vertex.osc(1, 3))


def test_successors_are_edges(params14):
    graph = build_truncated_graph(params14, 2)
    osc_count = standard_osc_count(params14)
    for v, w in graph.edges():
        assert is_edge(v, w, osc_count)
    assert not is_edge(Vertex.osc(1, 1), Vertex.gap(1, 1), osc_count)


def test_counts(params14):
    g1 = build_truncated_graph(params14, 1)
    assert g1.vertex_count() == 19
    g2 = build_truncated_graph(params14, 2)
    assert g2.vertex_count() == 72
    assert g2.vertex_count() == sum(1 for _ in g2.vertices())
    assert g2.edge_count() == sum(1 for _ in g2.edges())
    assert g2.adjacency().sum() == g2.edge_count()


def test_negative_truncation_rejected(params14):
    with pytest.raises(ParameterError):
        build_truncated_graph(params14, -1)


def test_level_subgraph(params14):
    h1 = subgraph_Hn(params14, 1)
    assert h1.vertex_count() == 14
    assert h1.edge_count() == 26
    assert h1.truncated_out() == []
    quotient = h1.quotient()
    assert quotient.sizes == [1, 12, 1]
    scaled = quotient.class_of(Vertex.scaled(1, 1))
    assert quotient.entries[(scaled, quotient.class_of(Vertex.osc(1, 7)))] == 12
    with pytest.raises(DomainError):
        h1.successors(Vertex.gap(1, 0))


def test_extension_graph_adds_two_vertices(params14):
    extension = extension_graph(params14)
    extra = extra_vertices(params14)
    assert [v.label for v in extra] == ['Osc(2,48)', 'Osc(2,49)']
    for N in (2, 3):
        h = extension(N)
        g = build_truncated_graph(params14, N)
        assert h.vertex_count() - g.vertex_count() == 2
        assert all(h.contains(v) and not g.contains(v) for v in extra)
    vertices, edges = restrict(extension(2), extra)
    g2 = build_truncated_graph(params14, 2)
    assert vertices == list(g2.vertices())
    assert set(edges) == set(g2.edges())


def test_markov_property(f14):
    report = verify_markov_property(f14, 3)
    assert report.passed, report.failures
    assert report.details["vertices_checked"] > 0


def test_edges_are_image_inclusions(params14, f14):
    report = validate_edges(build_truncated_graph(params14, 1), f14)
    assert report.passed, report.failures


def test_dot_export(params14):
    dot = graph_dot(subgraph_Hn(params14, 1))
    assert dot.startswith('digraph "H1_N1" {')
    assert dot.count('shape=ellipse') == 14
    assert dot.count(' -> ') == 26
    assert '"..."' not in dot
    truncated = graph_dot(build_truncated_graph(params14, 1))
    assert '"S:Hump" -> "..." [style=dashed];' in truncated


def test_document_roundtrip(params14):
    document = graph_document(subgraph_Hn(params14, 1))
    assert document["graph"] == 'subgraph'
    assert len(document["vertices"]) == 14
    assert len(document["edges"]) == 26
    assert document["vertices"][0]["label"] == 'Osc(1,1)'
    rebuilt = graph_from_document(document)
    assert rebuilt.vertex_count() == 14
    assert graph_from_document(graph_document(extension_graph(params14)(2))).vertex_count() == 74


def test_export_graph(params14):
    empty = json.loads(export_graph(build_truncated_graph(params14, 0), 'json'))
    assert [v["label"] for v in empty["vertices"]] == ['S:LeftHump', 'S:Hump', 'S:Right']
    text = export_graph(subgraph_Hn(params14, 1), 'json')
    assert export_graph(graph_from_document(json.loads(text)), 'json') == text
    assert export_graph(subgraph_Hn(params14, 1)).count(' -> ') == 26
    with pytest.raises(ParameterError):
        export_graph(subgraph_Hn(params14, 1), 'csv')
