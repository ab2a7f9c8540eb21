"""Household survey schema, recoding tables and a synthetic generator on the final DAG.

The survey microdata itself is not distributed. The generator below builds a
clearly synthetic network on the published final DAG whose observed
marginals are calibrated to the published state distributions.
"""

from __future__ import annotations

import json
from importlib import resources
from typing import Mapping

import numpy as np

from cbnkit.bayesnet import Cpt, DiscreteBayesNet, VariableCard, eliminate
from cbnkit.data import DROP, RecodeMap, Variable, VariableSchema
from cbnkit.graph import CausalDag, load_fig3

OUTCOME = "Y"
TREATMENT_PARKING = "V7"
TREATMENT_INCOME = "V1"

_VARS = [
    ("Y", "EV ownership status & intention",
     ["Already own electric car/van", "Thinking to buy one soon", "Thinking to buy one in the future",
      "Not considering to buy one"],
     [0.0485, 0.0462, 0.4149, 0.4904]),
    ("V1", "Household income",
     ["< £6000", "£6001-10,000", "£10,001-15,000", "£15,001-20,000", "£20,001-25,000", "£25,001-30,000",
      "£30,001-40,000", "> £40,000"],
     [0.0202, 0.0364, 0.0786, 0.1358, 0.1079, 0.1064, 0.1602, 0.3546]),
    ("V2", "No. of vehicles", ["No car", "One car", "Two cars or more"], [0.0719, 0.6157, 0.3124]),
    ("V3", "No. of adults in household", ["1", "2", "3", "4", ">= 5"], [0.3668, 0.5400, 0.0705, 0.0211, 0.0017]),
    ("V4", "No. of children in household", ["0", "1", "2", "3", ">= 4"], [0.7764, 0.1149, 0.0871, 0.0161, 0.0055]),
    ("V5", "Household composition",
     ["Single adult", "Small - multiple adults", "Single parent", "Small - family", "Large - family",
      "Large - multiple adults", "Small - old adults", "Single pensioner"],
     [0.1759, 0.2149, 0.0901, 0.1029, 0.0289, 0.0615, 0.2030, 0.1227]),
    ("V6", "Urban/rural classification", ["Urban", "Rural"], [0.8069, 0.1931]),
    ("V7", "Parking provision", ["Off-street", "On-street"], [0.6516, 0.3484]),
    ("V8", "Dwelling type",
     ["Detached house", "Semi-detached house", "Terraced house", "Tenement flat", "4-in-a-block flat",
      "Tower/slab flat", "Flat from converted house"],
     [0.2573, 0.2276, 0.2073, 0.1657, 0.0765, 0.0327, 0.0329]),
    ("V9", "Dwelling age", ["< 1919", "1919-1944", "1945-1964", "1965-1982", "1983-2002", "> 2002"],
     [0.2114, 0.1093, 0.1615, 0.2214, 0.1493, 0.1471]),
    ("V10", "Workplace charging infrastructure density (per 100,000 residents)",
     ["< 20", "21-40", "41-60", "61-80", "> 80"], [0.0821, 0.3346, 0.4562, 0.0910, 0.0361]),
    ("V11", "Public charging infrastructure density (per 100,000 residents)",
     ["< 50", "51-100", "101-150", "151-200", "> 200"], [0.2048, 0.5949, 0.1537, 0.0438, 0.0028]),
    ("V12", "Household working status", ["One or more working adults", "None working"], [0.6664, 0.3336]),
    ("V13", "Tenancy",
     ["Owned (outright or mortgage)", "Part mortgage, part rent", "Rented (LA, Co-op, private landlord)"],
     [0.7354, 0.0041, 0.2605]),
    ("V14", "Local Authority (LA)",
     ["South Ayrshire", "South Lanarkshire", "Stirling", "West Dunbartonshire", "West Lothian",
      "Na h-Eileanan Siar", "Aberdeen City", "Aberdeenshire", "Angus", "Argyll and Bute", "Scottish Borders",
      "Clackmannanshire", "Dumfries and Galloway", "Dundee City", "East Ayrshire", "East Dunbartonshire",
      "East Lothian", "East Renfrewshire", "City of Edinburgh", "Falkirk", "Fife", "Glasgow City", "Highland",
      "Inverclyde", "Midlothian", "Moray", "North Ayrshire", "North Lanarkshire", "Orkney Islands",
      "Perth and Kinross", "Renfrewshire", "Shetland Islands"],
     [0.0266, 0.0638, 0.0178, 0.0205, 0.0383, 0.0078, 0.0466, 0.0433, 0.0216, 0.0211, 0.0228, 0.0072, 0.0266,
      0.0244, 0.0250, 0.0183, 0.0182, 0.0117, 0.1077, 0.0327, 0.0527, 0.1038, 0.0411, 0.0128, 0.0172, 0.0183,
      0.0178, 0.0594, 0.0028, 0.0333, 0.0316, 0.0072]),
]

# lower-inclusive, upper-exclusive: "< 20" = [0, 20), "21-40" = [20, 40), ...
BAND_EDGES = {"V10": (20.0, 40.0, 60.0, 80.0), "V11": (50.0, 100.0, 150.0, 200.0)}

PARKING_RAW = (
    "Integral/attached garage", "Garage on plot", "Space on plot", "Space/garage elsewhere",
    "Adequate, on-street", "Inadequate on-street", "No parking provision", "Not Applicable", "Unobtainable",
)
PARKING_RECODE = RecodeMap("V7", {
    "Integral/attached garage": "Off-street",
    "Garage on plot": "Off-street",
    "Space on plot": "Off-street",
    "Space/garage elsewhere": "Off-street",
    "Adequate, on-street": "On-street",
    "Inadequate on-street": "On-street",
    "No parking provision": DROP,
    "Not Applicable": DROP,
    "Unobtainable": DROP,
}, target_states=("Off-street", "On-street"))

NON_DRIVER = "Do not drive/need a vehicle"
OUTCOME_RECODE = RecodeMap("Y", {**{s: s for s in _VARS[0][2]}, NON_DRIVER: DROP}, target_states=tuple(_VARS[0][2]))


def survey_schema(names=None) -> VariableSchema:
    """The fifteen survey variables with published marginals as metadata."""
    vs = [Variable(n, tuple(states), symbol=n, label=label, band_edges=BAND_EDGES.get(n), marginals=tuple(m))
          for n, label, states, m in _VARS]
    schema = VariableSchema(vs)
    return schema.subset(names) if names is not None else schema


def published_marginals(name: str) -> np.ndarray:
    for n, _, _, m in _VARS:
        if n == name:
            return np.array(m)
    raise KeyError(name)


def raw_schema(schema: VariableSchema | None = None) -> VariableSchema:
    """Schema of a raw extract: 9-fold parking and an extra non-driver outcome state."""
    schema = schema or survey_schema()
    y = schema["Y"]
    return (schema
            .with_variable(Variable("V7", PARKING_RAW, symbol="V7", label="Parking provision (9-fold)"))
            .with_variable(Variable("Y", y.states + (NON_DRIVER,), symbol="Y", label=y.label)))


# --- synthetic generator --------------------------------------------------

LATENT_STATES = ("0", "1")

# Association strengths per arc (logit units per unit of centred ordinal
# score). Purely synthetic; chosen so that every arc is detectable at
# n = 50,000 and the parking effect is confounded through V8, V9 and U2.
SYNTHETIC_STRENGTHS = {
    ("V3", "V5"): 2.5, ("V4", "V5"): -2.5,
    ("V5", "V12"): 2.0,
    ("V5", "V1"): -2.0, ("V12", "V1"): -1.5, ("U1", "V1"): 1.5,
    ("V1", "V13"): -1.5, ("V5", "V13"): 1.0,
    ("V1", "V8"): -2.0, ("V5", "V8"): 1.0, ("V13", "V8"): 1.5, ("V9", "V8"): -1.0, ("U2", "V8"): 1.5,
    ("V8", "V7"): 2.0, ("V9", "V7"): -1.0,
    ("V1", "V2"): 1.5, ("V5", "V2"): -1.0, ("U1", "V2"): 1.0, ("V7", "V2"): -1.0,
    ("V1", "Y"): -1.0, ("V7", "Y"): 1.0, ("U2", "Y"): -1.0,
}


def _score(k: int) -> np.ndarray:
    return np.linspace(-1.0, 1.0, k) if k > 1 else np.zeros(1)


def _softmax(z):
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def synthetic_fig3(strengths: Mapping[tuple[str, str], float] | None = None, calibration_rounds: int = 300,
                   dag: CausalDag | None = None) -> DiscreteBayesNet:
    """Network on the final survey DAG with observed marginals matched to the published ones.

    Each child's CPT is a softmax over child states of
    ``base + sum_p strength_p * score(parent state) * score(child state)``;
    the base logits are fitted node by node in topological order so the
    exact marginal equals the target distribution.
    """
    dag = dag or load_fig3()
    strengths = dict(SYNTHETIC_STRENGTHS if strengths is None else strengths)
    schema = survey_schema()
    cards = {}
    for n in dag.nodes:
        cards[n] = LATENT_STATES if n in dag.latent else schema[n].states
    cpts: dict[str, Cpt] = {}
    for node in dag.topological_order:
        parents = tuple(sorted(dag.parents(node)))
        k = len(cards[node])
        target = np.full(k, 1.0 / k) if node in dag.latent else published_marginals(node)
        target = target / target.sum()
        shape = tuple(len(cards[p]) for p in parents)
        m = np.zeros(shape + (k,))
        for i, p in enumerate(parents):
            s = _score(len(cards[p])).reshape([-1 if j == i else 1 for j in range(len(parents))] + [1])
            m = m + strengths.get((p, node), 0.0) * s * _score(k)
        if parents:
            sub = dag.subgraph(dag.ancestors(parents))
            partial = DiscreteBayesNet(sub, {n: cards[n] for n in sub.nodes}, {n: cpts[n] for n in sub.nodes})
            weight = eliminate(partial, parents).values[..., None]
        else:
            weight = np.ones(1)
        base = np.log(target)
        for _ in range(calibration_rounds):
            table = _softmax(base + m)
            got = (table * weight).reshape(-1, k).sum(axis=0)
            base = base + np.log(target / got)
        table = _softmax(base + m)
        cpts[node] = Cpt(node, parents, table)
    return DiscreteBayesNet(dag, [VariableCard(n, cards[n]) for n in dag.nodes], cpts)


def load_synthetic_fig3() -> DiscreteBayesNet:
    """The shipped, pre-generated synthetic network."""
    text = resources.files("cbnkit.resources").joinpath("fig3_synthetic.json").read_text()
    return DiscreteBayesNet.from_dict(json.loads(text))
