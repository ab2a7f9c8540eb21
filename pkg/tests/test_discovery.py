import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _nets import random_net, triple_net
from cbnkit.data import Dataset, Variable, VariableSchema, forward_sample
from cbnkit.discovery import (
    Blacklist,
    EntropyTable,
    conditional_mi,
    discover,
    entropy,
    interaction_information,
    log2_regret,
    log2_regret_asymptotic,
    mutual_information,
    nml_complexity,
    prune_skeleton,
    skeleton_recall,
)
from cbnkit.errors import ConfigError, EmptyDatasetError
from cbnkit.graph import BIDIRECTED, DIRECTED, UNDIRECTED, CausalDag
from cbnkit.shs import SYNTHETIC_STRENGTHS, load_synthetic_fig3


def _dataset(cols, cards=None):
    cards = cards or {k: max(v) + 1 for k, v in cols.items()}
    schema = VariableSchema([Variable(k, tuple(str(i) for i in range(max(2, c)))) for k, c in cards.items()])
    return Dataset(schema, cols)


@st.composite
def categorical_data(draw, n_vars=3, max_card=4, max_rows=60):
    n = draw(st.integers(1, max_rows))
    cards = [draw(st.integers(2, max_card)) for _ in range(n_vars)]
    cols = {f"V{i}": draw(st.lists(st.integers(0, k - 1), min_size=n, max_size=n)) for i, k in enumerate(cards)}
    return _dataset(cols, {f"V{i}": k for i, k in enumerate(cards)})


def test_mi_of_copies_and_independence():
    d = _dataset({"A": [0, 1, 0, 1], "B": [0, 1, 0, 1], "C": [0, 0, 1, 1]})
    assert mutual_information(d, "A", "B").value == pytest.approx(1.0)
    assert mutual_information(d, "A", "C").value == pytest.approx(0.0, abs=1e-15)
    assert entropy(d, ["A", "C"]) == pytest.approx(2.0)


def test_xor_interaction_is_negative():
    d = _dataset({"X": [0, 0, 1, 1], "Y": [0, 1, 0, 1], "Z": [0, 1, 1, 0]})
    assert mutual_information(d, "X", "Y").value == pytest.approx(0.0, abs=1e-15)
    assert conditional_mi(d, "X", "Y", ["Z"]).value == pytest.approx(1.0)
    assert interaction_information(d, "X", "Y", "Z") == pytest.approx(-1.0)


def test_empty_dataset_rejected():
    with pytest.raises(EmptyDatasetError):
        EntropyTable(_dataset({"A": []}, {"A": 2}))


@settings(max_examples=200, deadline=None)
@given(categorical_data())
def test_information_identities(d):
    assert mutual_information(d, "V0", "V0").value == pytest.approx(entropy(d, ["V0"]), abs=1e-12)
    assert mutual_information(d, "V0", "V1").value == pytest.approx(mutual_information(d, "V1", "V0").value,
                                                                     abs=1e-12)
    assert conditional_mi(d, "V0", "V1", ["V2"]).value == pytest.approx(
        conditional_mi(d, "V1", "V0", ["V2"]).value, abs=1e-12)
    lhs = mutual_information(d, "V0", "V1").value
    rhs = conditional_mi(d, "V0", "V1", ["V2"]).value + interaction_information(d, "V0", "V1", "V2")
    assert abs(lhs - rhs) <= 1e-10
    assert mutual_information(d, "V0", "V1").value >= -1e-12


def _brute_regret(n, k):
    total = 0.0
    for c in itertools.product(range(n + 1), repeat=k):
        if sum(c) != n:
            continue
        coef = math.factorial(n) / math.prod(math.factorial(h) for h in c)
        total += coef * math.prod((h / n) ** h for h in c if h)
    return math.log2(total)


@pytest.mark.parametrize("n,k", [(1, 2), (5, 2), (7, 3), (10, 4), (6, 5), (12, 3)])
def test_regret_matches_brute_force(n, k):
    assert log2_regret(n, k) == pytest.approx(_brute_regret(n, k), abs=1e-10)


@pytest.mark.parametrize("n,k", [(10_000, 2), (20_000, 4), (50_000, 8)])
def test_regret_matches_asymptotic(n, k):
    assert log2_regret(n, k) == pytest.approx(log2_regret_asymptotic(n, k), abs=1e-5)


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 400), st.integers(2, 5), st.integers(2, 5))
def test_nml_monotone_in_n_and_cardinality(n, rx, ry):
    c = nml_complexity(n, rx, ry)
    assert c >= 0
    assert nml_complexity(n + 1, rx, ry) >= c
    assert nml_complexity(n, rx + 1, ry) >= c


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 4), st.integers(2, 4), st.lists(st.integers(2, 4), max_size=2), st.integers(2, 4),
       st.integers(1, 50))
def test_nml_monotone_in_conditioning(rx, ry, zs, extra, scale):
    # holds once each stratum keeps about rx * ry rows or more
    q = math.prod(zs) * extra
    n = q * rx * ry * scale
    assert nml_complexity(n, rx, ry, zs + [extra]) >= nml_complexity(n, rx, ry, zs)


def test_chain_skeleton_drops_end_to_end_edge():
    ok = 0
    for seed in range(20):
        d = forward_sample(triple_net("chain"), 10_000, seed=seed)
        ok += prune_skeleton(d).edges == [("X", "Z"), ("Y", "Z")]
    assert ok >= 19


def test_independent_pair_has_no_edge():
    rng = np.random.default_rng(0)
    d = _dataset({"A": rng.integers(0, 2, 10_000), "B": rng.integers(0, 3, 10_000)})
    assert prune_skeleton(d).edges == []


@pytest.mark.parametrize("n", [50, 200])
def test_copies_keep_their_edge(n):
    rng = np.random.default_rng(n)
    a = rng.integers(0, 3, n)
    assert prune_skeleton(_dataset({"A": a, "B": a}, {"A": 3, "B": 3})).edges == [("A", "B")]


def test_single_variable_gives_empty_graph():
    assert not discover(_dataset({"A": [0, 1, 1]})).graph.edges


def test_xor_recovers_v_structure():
    # biased inputs give Z pairwise dependence on each parent; balanced XOR is pairwise invisible
    for seed in range(10):
        rng = np.random.default_rng(seed)
        x, y = (rng.random(10_000) < 0.25).astype(int), (rng.random(10_000) < 0.3).astype(int)
        g = discover(_dataset({"X": x, "Y": y, "Z": x ^ y})).graph
        assert sorted(map(str, g.edges)) == ["X -> Z", "Y -> Z"]


def test_balanced_xor_is_pairwise_invisible():
    rng = np.random.default_rng(1)
    x, y = rng.integers(0, 2, 5000), rng.integers(0, 2, 5000)
    assert not discover(_dataset({"X": x, "Y": y, "Z": x ^ y})).graph.edges


def test_chain_and_fork_left_undirected_collider_oriented():
    for kind, want in [("chain", UNDIRECTED), ("fork", UNDIRECTED), ("collider", DIRECTED)]:
        g = discover(forward_sample(triple_net(kind), 10_000, seed=3)).graph
        assert {e.kind for e in g.edges} == {want}


def test_meek_rule_one_via_blacklist():
    # Z -> X forbidden forces X -> Z on the chain; Meek R1 then orients Z -> Y
    d = forward_sample(triple_net("chain"), 10_000, seed=5)
    g = discover(d, blacklist=Blacklist.of([("Z", "X")])).graph
    assert sorted(map(str, g.edges)) == ["X -> Z", "Z -> Y"]


def test_blacklist_rejects_unknown_names():
    d = forward_sample(triple_net("chain"), 100, seed=0)
    with pytest.raises(ConfigError):
        discover(d, blacklist=Blacklist.of([("X", "Q")]))


def _random_net_data(seed):
    rng = np.random.default_rng(seed)
    bn = random_net(rng, max_bits=10.0, max_nodes=6, p_edge=0.5)
    return bn, forward_sample(bn, 3000, seed=seed)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.data())
def test_blacklist_never_violated_and_no_cycles(seed, data):
    bn, d = _random_net_data(seed)
    pairs = list(itertools.permutations(bn.nodes, 2))
    chosen = data.draw(st.lists(st.sampled_from(pairs), max_size=min(6, len(pairs)), unique=True))
    bl = Blacklist.of(chosen)
    g = discover(d, blacklist=bl).graph
    for e in g.edges:
        if e.kind == DIRECTED:
            assert not bl.forbids(e.tail, e.head)
    directed = [(e.tail, e.head) for e in g.edges if e.kind == DIRECTED]
    CausalDag(g.nodes, directed)  # raises CycleError on a directed cycle


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.floats(1.0, 20.0))
def test_pruning_monotone_in_complexity_scale(seed, k):
    _, d = _random_net_data(seed)
    base = set(prune_skeleton(d).edges)
    assert set(prune_skeleton(d, complexity_scale=k).edges) <= base


def test_decision_log_has_required_fields():
    res = discover(forward_sample(triple_net("chain"), 2000, seed=0))
    pruning = [r for r in res.log if r["action"] in ("remove", "retain", "add_contributor")]
    assert pruning
    for rec in pruning:
        assert set(rec) == {"pair", "step", "contributor", "delta_mi", "residual_mi", "threshold", "action"}
    assert len(res.log_lines().splitlines()) == len(res.log)


def test_bidirected_from_conflicting_arrowheads():
    # A -> B <- U -> C <- D with U hidden: both colliders put an arrowhead on B - C
    rng = np.random.default_rng(2)
    n = 20_000
    a, d, u = (rng.integers(0, 2, n) for _ in range(3))
    b = (rng.random(n) < 0.1 + 0.4 * a + 0.4 * u).astype(int)
    c = (rng.random(n) < 0.1 + 0.4 * d + 0.4 * u).astype(int)
    g = discover(_dataset({"A": a, "B": b, "C": c, "D": d})).graph
    assert sorted(map(str, g.edges)) == ["A -> B", "B <-> C", "D -> C"]


def test_final_dag_recall_from_synthetic_sample():
    bn = load_synthetic_fig3()
    truth = [(a, b) for a, b in bn.dag.arcs if a not in bn.dag.latent]
    d = forward_sample(bn, 50_000, seed=0, hide=bn.dag.latent)
    found = discover(d).graph
    assert skeleton_recall(found, truth) >= 0.9
    assert set(SYNTHETIC_STRENGTHS) >= set(bn.dag.arcs)
