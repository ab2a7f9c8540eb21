import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _nets import binary_net, enumerate_joint, random_net
from cbnkit.bayesnet import (
    Cpt,
    DiscreteBayesNet,
    Factor,
    eliminate,
    fit_cpt,
    fit_mle,
    joint_factor,
    joint_probability,
    marginal,
    product,
)
from cbnkit.data import Dataset, Variable, VariableSchema, forward_sample, total_variation
from cbnkit.errors import (
    IncompleteAssignmentError,
    InvalidQueryError,
    LatentWithoutDataError,
    MissingColumnError,
    NegativeAlphaError,
    NumericalError,
    SchemaMismatchError,
    ZeroEvidenceProbabilityError,
    ZeroFrequencyError,
)
from cbnkit.graph import CausalDag
from cbnkit.shs import load_synthetic_fig3


def test_cpt_validation():
    with pytest.raises(NumericalError):
        Cpt("A", (), [0.5, 0.6])
    with pytest.raises(NumericalError):
        Cpt("A", ("B",), [0.5, 0.5])
    c = Cpt("A", (), [0.25, 0.75])
    with pytest.raises(ValueError):
        c.table[0] = 1.0


def test_cpt_shape_checked_against_cards():
    dag = CausalDag("AB", [("A", "B")])
    with pytest.raises(SchemaMismatchError):
        DiscreteBayesNet(dag, {"A": ("0", "1"), "B": ("0", "1")},
                         [Cpt("A", (), [0.5, 0.5]), Cpt("B", ("A",), [[0.2, 0.3, 0.5], [0.1, 0.1, 0.8]])])


def test_factor_product_and_marginalize():
    f = Factor(("A", "B"), [[0.1, 0.2], [0.3, 0.4]])
    g = Factor(("B", "C"), [[1.0, 2.0], [3.0, 4.0]])
    h = product([f, g], sum_out=["B"])
    want = np.einsum("ab,bc->ac", f.values, g.values)
    assert h.scope == ("A", "C")
    np.testing.assert_allclose(h.values, want)
    assert f.marginalize(["A"]).values.tolist() == pytest.approx([0.4, 0.6])
    assert f.reduce({"B": 1}).values.tolist() == [0.2, 0.4]


def test_joint_probability_and_incomplete_assignment():
    bn = binary_net([("A", "B")], {"A": [0.3, 0.7], "B": [[0.9, 0.1], [0.2, 0.8]]})
    assert joint_probability(bn, {"A": "1", "B": "0"}) == pytest.approx(0.7 * 0.2)
    with pytest.raises(IncompleteAssignmentError):
        joint_probability(bn, {"A": "1"})


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_elimination_matches_enumeration(seed):
    rng = np.random.default_rng(seed)
    bn = random_net(rng, max_bits=10.0, max_nodes=6)
    nodes, joint = enumerate_joint(bn)
    q = nodes[int(rng.integers(len(nodes)))]
    others = [n for n in nodes if n != q]
    ev = {e: bn.states(e)[0] for e in others[: int(rng.integers(0, len(others) + 1))]}
    sl = tuple(0 if n in ev else slice(None) for n in nodes)
    rest = [n for n in nodes if n not in ev]
    want = joint[sl].sum(axis=tuple(i for i, n in enumerate(rest) if n != q))
    assert np.allclose(eliminate(bn, (q,), ev).values, want / want.sum(), atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_elimination_order_invariance(seed):
    rng = np.random.default_rng(seed)
    bn = random_net(rng, max_bits=10.0, max_nodes=6)
    q = bn.nodes[-1]
    hidden = [n for n in bn.nodes if n != q]
    a = eliminate(bn, (q,), order=hidden).values
    b = eliminate(bn, (q,), order=hidden[::-1]).values
    c = eliminate(bn, (q,)).values
    assert np.allclose(a, b, atol=1e-13) and np.allclose(a, c, atol=1e-13)


def test_joint_factor_is_unnormalized():
    bn = binary_net([("A", "B")], {"A": [0.3, 0.7], "B": [[0.9, 0.1], [0.2, 0.8]]})
    f = joint_factor(bn, ("A",), {"B": "1"})
    np.testing.assert_allclose(f.values, [0.03, 0.56])


def test_query_errors():
    bn = binary_net([("A", "B")], {"A": [1.0, 0.0], "B": [[0.9, 0.1], [0.2, 0.8]]})
    with pytest.raises(ZeroEvidenceProbabilityError):
        eliminate(bn, "B", {"A": "1"})
    with pytest.raises(InvalidQueryError):
        eliminate(bn, ("A",), {"A": "0"})
    with pytest.raises(SchemaMismatchError):
        eliminate(bn, "B", {"A": "7"})


def test_marginal_of_root_is_its_cpt():
    bn = binary_net([("A", "B")], {"A": [0.3, 0.7], "B": [[0.9, 0.1], [0.2, 0.8]]})
    assert marginal(bn, "A").values.tolist() == [0.3, 0.7]


def _xy_schema():
    return VariableSchema([Variable("X", ("a", "b", "c")), Variable("Y", ("0", "1"))])


def test_fit_counts_and_zero_frequency_row():
    d = Dataset(_xy_schema(), {"X": [0, 0, 0, 1], "Y": [0, 0, 1, 1]})
    cpt = fit_cpt(d, "Y", ["X"], alpha=1e-5)
    assert cpt.table[0, 1] == pytest.approx(1 / 3, abs=1e-5)
    assert cpt.table[2].tolist() == [0.5, 0.5]
    with pytest.raises(ZeroFrequencyError):
        fit_cpt(d, "Y", ["X"], alpha=0.0)
    with pytest.raises(NegativeAlphaError):
        fit_mle(CausalDag("XY", [("X", "Y")]), d, alpha=-1.0)


def test_fit_requires_columns():
    d = Dataset(_xy_schema(), {"X": [0, 1]})
    with pytest.raises(MissingColumnError):
        fit_mle(CausalDag("XY", [("X", "Y")]), d)
    with pytest.raises(LatentWithoutDataError):
        fit_mle(CausalDag("XYU", [("U", "X"), ("X", "Y")], latent=["U"]), Dataset(_xy_schema(), {"X": [0], "Y": [1]}))


def test_fit_sample_fit_recovers_cpts():
    rng = np.random.default_rng(3)
    truth = random_net(rng, max_bits=5.0, max_nodes=4)
    d = forward_sample(truth, 100_000, seed=4)
    fitted = fit_mle(truth.dag, d)
    for n in truth.nodes:
        k = truth.card(n)
        for a, b in zip(truth.cpts[n].table.reshape(-1, k), fitted.cpts[n].table.reshape(-1, k)):
            assert total_variation(a, b) < 0.02


def test_json_round_trip_is_exact(tmp_path):
    bn = load_synthetic_fig3()
    again = DiscreteBayesNet.from_dict(json.loads(json.dumps(bn.to_dict())))
    assert again.dag == bn.dag
    assert all(again.cpts[n] == bn.cpts[n] for n in bn.nodes)
    bn.save(tmp_path / "net.json")
    assert DiscreteBayesNet.load(tmp_path / "net.json").cpts["Y"] == bn.cpts["Y"]
    with pytest.raises(SchemaMismatchError):
        DiscreteBayesNet.from_dict({"format": "other"})
