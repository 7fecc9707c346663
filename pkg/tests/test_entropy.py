import math
from fractions import Fraction

import numpy as np
import pytest
from scipy import sparse

from mixmap.errors import DomainError, ParameterError
from mixmap.construction.params import oscillation_count
from mixmap.chain.markov_graph import Vertex, build_truncated_graph, subgraph_Hn
from mixmap.chain.entropy import (EntropyReport, build_separated_set, entropy_chain, entropy_loop_count,
                                  entropy_spectral, entropy_subgraph_exact, greedy_separated_count,
                                  local_entropy_lower, measure_mu_n, mu_n_entropy_check, perron_root,
                                  separated_upper_bound, spectral_radius_of_derivative, spectral_trace,
                                  transience_evidence)

LOG14 = math.log(14)


def test_subgraph_exact_values(params14):
    assert entropy_subgraph_exact(params14, 1).value == math.log(13) / 2
    report = entropy_subgraph_exact(params14, 2)
    assert report.value == math.log(47) / 3
    assert report.value == pytest.approx(1.28333, abs=1e-5)
    assert [n for n, _ in report.trace] == [1, 2]
    assert report.details["M_n"] == 47


def test_subgraph_exact_increases_toward_log_lambda(params14):
    values = [v for _, v in entropy_subgraph_exact(params14, 8).trace]
    assert all(b > a for a, b in zip(values[1:], values[2:]))
    assert values[-1] == math.log(oscillation_count(Fraction(14), 8)) / 9
    assert values[-1] < LOG14


def test_report_validation_and_bits(params14):
    with pytest.raises(DomainError):
        EntropyReport(method='guess', value=1.0)
    with pytest.raises(ParameterError):
        entropy_subgraph_exact(params14, 0)
    document = entropy_subgraph_exact(params14, 1).to_dict(bits=True)
    assert document["value_bits"] == pytest.approx(math.log2(13) / 2)
    assert "value_nats" not in document


def test_perron_root():
    radius, width, _ = perron_root(sparse.csr_matrix(np.array([[1.0, 1.0], [1.0, 1.0]])))
    assert radius == pytest.approx(2.0, rel=1e-10)
    radius, _, _ = perron_root(sparse.csr_matrix(np.array([[0.0, 1.0], [4.0, 0.0]])))
    assert radius == pytest.approx(2.0, rel=1e-10)


@pytest.mark.parametrize('n', [1, 2, 3])
def test_spectral_matches_subgraph_formula(params14, n):
    report = entropy_spectral(subgraph_Hn(params14, n))
    assert report.value == pytest.approx(math.log(oscillation_count(Fraction(14), n)) / (n + 1), rel=1e-9)


def test_spectral_trace_is_monotone_and_bounded(params14):
    report = spectral_trace(params14, 4)
    values = [v for _, v in report.trace]
    assert len(values) == 4
    assert all(b >= a - 1e-12 for a, b in zip(values, values[1:]))
    assert values[-1] <= LOG14
    assert report.value >= entropy_subgraph_exact(params14, 4).value - 1e-9
    assert report.details["core_value"] is not None


def test_loop_counts_on_level_subgraph(params14):
    h1 = subgraph_Hn(params14, 1)
    report = entropy_loop_count(h1, Vertex.scaled(1, 1), 2)
    assert report.details["count"] == '13'
    assert report.value == math.log(13) / 2
    assert entropy_loop_count(h1, Vertex.scaled(1, 1), 3).value == float('-inf')
    merged = entropy_loop_count(h1, Vertex.osc(1, 5), 4)
    assert merged.details["count"] == '13'
    assert merged.value == pytest.approx(math.log(13) / 4)


def test_loop_count_bounded_by_spectral(params14):
    graph = build_truncated_graph(params14, 2)
    loops = entropy_loop_count(graph, Vertex.special('Hump'), 12)
    assert 0 < loops.value <= entropy_spectral(graph).value + 1e-9


def test_separated_upper_bound(params14):
    report = separated_upper_bound(params14, 2, 0.5)
    assert report.value == pytest.approx(math.log(196 / 0.5 + 1) / 2)
    assert report.value > LOG14
    assert separated_upper_bound(params14, 1, 1e-3).details["eps_dominated"]
    assert not separated_upper_bound(params14, 8, 1.0).details["eps_dominated"]
    with pytest.raises(ParameterError):
        separated_upper_bound(params14, 1, 0.0)


def test_greedy_separated_count(f14):
    count = greedy_separated_count(f14, 1, 0.5, grid=2000)
    assert count.count in (8, 9)
    assert count.within_bound
    assert count.bound == pytest.approx(29.0)


def test_separated_set_size(f14):
    separated = build_separated_set(f14, 1, 2)
    assert len(separated) == 49
    assert separated.words[0] == (1, 1)
    with pytest.raises(ParameterError):
        build_separated_set(f14, 3, 3)


def test_local_entropy_n1(f14):
    report = local_entropy_lower(f14, 1, 2)
    assert report.passed, report.details
    assert report.details["card"] == 49
    assert report.value == math.log(7) / 2


def test_local_entropy_n2(f14):
    report = local_entropy_lower(f14, 2, 2)
    assert report.passed, report.details
    assert report.details["card"] == 576
    assert report.value == math.log(24) / 3
    assert report.details["bowen_ok"] and report.details["separation_ok"]


def test_local_entropy_rejects_large_delta(f14):
    with pytest.raises(ParameterError):
        local_entropy_lower(f14, 1, 1, delta=1.0)


def test_derivative_radius(f14):
    radius = spectral_radius_of_derivative(f14, k_max_iter=3, samples=501)
    assert radius.exact == 14
    assert radius.sampled <= 14.0 * (1 + 1e-9)
    assert len(radius.per_k) == 3


@pytest.mark.parametrize('n', range(2, 9))
def test_mu_n_mass_near_zero(params14, n):
    measure = measure_mu_n(params14, n)
    assert measure.mass_below(Fraction(1, 5)) == Fraction(n, n + 1)
    assert measure.entropy == pytest.approx(math.log(oscillation_count(Fraction(14), n)) / (n + 1))
    assert measure.is_stationary()


def test_mu_n_histogram(params14):
    measure = measure_mu_n(params14, 3)
    edges, masses = measure.histogram(40)
    assert len(edges) == 41 and edges[-1] == 4
    assert sum(masses) == 1
    assert masses[0] == Fraction(3, 4)
    assert measure.weight(Vertex.osc(3, 10)) == Fraction(1, 4 * oscillation_count(Fraction(14), 3))
    assert measure.weight(Vertex.osc(2, 1)) == 0
    with pytest.raises(ParameterError):
        measure.histogram(1)


def test_mu_n_entropy_check(params14):
    report = mu_n_entropy_check(params14, 2)
    assert report.passed, report.failures


def test_transience_evidence(params14):
    report = transience_evidence(params14, N=6)
    assert report.levels == [4, 6]
    assert report.passed, report.to_dict()
    assert report.vertex_differences == [2, 2]
    assert all(value <= LOG14 for value in report.original + report.extended)
    assert report.gaps[1] < report.gaps[0]


def test_entropy_chain(f14):
    report = entropy_chain(f14, [1, 2, 3])
    assert report.passed, report.failures
    assert len(report.details["rows"]) == 3


def test_transience_evidence_to_level_eight(params14):
    report = transience_evidence(params14, N=8)
    assert report.levels == [4, 6, 8]
    assert report.passed, report.to_dict()
    assert report.vertex_differences == [2, 2, 2]
    assert report.gaps[2] < report.gaps[1] < report.gaps[0]
