"""Random networks and small fixed nets shared by the test modules."""

import itertools
import math

import numpy as np

from cbnkit.bayesnet import Cpt, DiscreteBayesNet, VariableCard
from cbnkit.graph import CausalDag


def random_dag(rng, n_nodes, p_edge=0.4, latent=()):
    names = [f"N{i}" for i in range(n_nodes)]
    arcs = [(names[i], names[j]) for i, j in itertools.combinations(range(n_nodes), 2) if rng.random() < p_edge]
    return CausalDag(names, arcs, latent)


def random_cpts(rng, dag, cards, concentration=1.0):
    cpts = {}
    for n in dag.nodes:
        ps = tuple(sorted(dag.parents(n)))
        shape = tuple(len(cards[p]) for p in ps) + (len(cards[n]),)
        table = rng.dirichlet(np.full(len(cards[n]), concentration), size=shape[:-1] or None)
        cpts[n] = Cpt(n, ps, np.asarray(table).reshape(shape))
    return cpts


def random_net(rng, max_bits=12.0, max_nodes=7, p_edge=0.4):
    """Random DAG and CPTs whose joint has at most 2**max_bits cells."""
    while True:
        n = int(rng.integers(2, max_nodes + 1))
        ks = rng.integers(2, 4, size=n)
        if sum(math.log2(k) for k in ks) <= max_bits:
            break
    dag = random_dag(rng, n, p_edge)
    cards = {name: tuple(str(s) for s in range(k)) for name, k in zip(dag.nodes, ks)}
    return DiscreteBayesNet(dag, [VariableCard(v, cards[v]) for v in dag.nodes], random_cpts(rng, dag, cards))


def enumerate_joint(bn):
    """Full joint table over bn.dag.nodes by product of CPT entries."""
    nodes = list(bn.dag.nodes)
    shape = [bn.card(n) for n in nodes]
    joint = np.ones(shape)
    for idx in itertools.product(*[range(k) for k in shape]):
        a = dict(zip(nodes, idx))
        p = 1.0
        for n in nodes:
            cpt = bn.cpts[n]
            p *= cpt.table[tuple(a[q] for q in cpt.parents) + (a[n],)]
        joint[idx] = p
    return nodes, joint


def binary_net(arcs, tables, nodes=None):
    nodes = nodes or sorted({v for a in arcs for v in a})
    dag = CausalDag(nodes, arcs)
    cpts = [Cpt(n, tuple(sorted(dag.parents(n))), np.asarray(tables[n], float)) for n in nodes]
    return DiscreteBayesNet(dag, {n: ("0", "1") for n in nodes}, cpts)


def triple_net(kind):
    """Binary chain X->Z->Y, fork X<-Z->Y or collider X->Z<-Y with strong links."""
    one = [[0.8, 0.2], [0.25, 0.75]]
    two = [[[0.85, 0.15], [0.3, 0.7]], [[0.35, 0.65], [0.1, 0.9]]]
    if kind == "chain":
        return binary_net([("X", "Z"), ("Z", "Y")], {"X": [0.5, 0.5], "Z": one, "Y": one}, list("XYZ"))
    if kind == "fork":
        return binary_net([("Z", "X"), ("Z", "Y")], {"Z": [0.5, 0.5], "X": one, "Y": one}, list("XYZ"))
    return binary_net([("X", "Z"), ("Y", "Z")], {"X": [0.5, 0.5], "Y": [0.5, 0.5], "Z": two}, list("XYZ"))


def confounded_net(effect, pz=0.4, base=0.3, slope=0.2):
    """Z -> X, Z -> Y, X -> Y with P(Y=1 | x, z) = base + slope * z + effect * x."""
    ty = np.zeros((2, 2, 2))
    for x in range(2):
        for z in range(2):
            p = base + slope * z + effect * x
            ty[x, z] = [1 - p, p]
    return binary_net([("Z", "X"), ("Z", "Y"), ("X", "Y")],
                      {"Z": [1 - pz, pz], "X": [[0.7, 0.3], [0.35, 0.65]], "Y": ty}, list("XYZ"))
