"""Back-door identification and estimation of interventional contrasts."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from cbnkit.bayesnet import DEFAULT_ALPHA, Cpt, DiscreteBayesNet, eliminate, fit_mle, joint_factor
from cbnkit.data import Dataset
from cbnkit.errors import (
    EmptyGroupError,
    GraphError,
    IdentificationError,
    UnknownNodeError,
    UnsupportedStratumError,
    ZeroDenominatorError,
    ZeroMassGroupError,
)
from cbnkit.graph import (
    COLLIDER,
    CausalDag,
    Path,
    classify_triple,
    d_separated,
    descendants,
    enumerate_backdoor_paths,
    find_adjustment_sets,
    first_open_backdoor_path,
    is_blocked,
    mutilate,
    satisfies_backdoor,
)

AUTO = "auto"


@dataclass(frozen=True)
class BlockedPath:
    path: Path
    blocker: str
    reason: str  # "conditioned" (non-collider in Z) or "collider" (unconditioned collider)

    def to_dict(self) -> dict:
        return {"path": str(self.path), "nodes": list(self.path.nodes), "blocker": self.blocker, "reason": self.reason}


@dataclass(frozen=True)
class AdjustmentEstimand:
    """X, Y and a back-door adjustment set Z, with its per-path certificate."""

    treatment: str
    outcome: str
    adjustment: frozenset
    certificate: tuple[BlockedPath, ...]
    dag: CausalDag = field(repr=False, compare=False)

    @property
    def adjustment_list(self) -> list[str]:
        return sorted(self.adjustment)

    def to_dict(self) -> dict:
        return {
            "treatment": self.treatment,
            "outcome": self.outcome,
            "adjustment": self.adjustment_list,
            "n_backdoor_paths": len(self.certificate),
            "certificate": [b.to_dict() for b in self.certificate],
        }


def blocking_witness(g: CausalDag, path: Path, z: Iterable[str]) -> tuple[str, str] | None:
    """The first interior node that blocks ``path`` given z, or None if it is open."""
    z = set(z)
    for i in range(1, len(path) - 1):
        m = path.nodes[i]
        if classify_triple(g, path, i) == COLLIDER:
            if m not in z and not (descendants(g, m) & z):
                return m, "collider"
        elif m in z:
            return m, "conditioned"
    return None


def identify(dag: CausalDag, treatment: str, outcome: str, adjustment: Iterable[str] | str = AUTO,
             max_size: int = 3) -> AdjustmentEstimand:
    """Certify a back-door adjustment set, or search for the first valid one.

    With ``adjustment="auto"`` the smallest valid observed set (ties broken
    lexicographically) is chosen. A rejected set raises IdentificationError
    carrying an open back-door path as witness when one exists.
    """
    if isinstance(adjustment, str):
        if adjustment != AUTO:
            raise IdentificationError(f"adjustment must be a set of names or {AUTO!r}, got {adjustment!r}")
        sets = find_adjustment_sets(dag, treatment, outcome, max_size)
        if not sets:
            witness = first_open_backdoor_path(dag, treatment, outcome, ())
            raise IdentificationError(
                f"no back-door adjustment set of size <= {max_size} for {treatment} -> {outcome}", witness)
        z = sets[0]
    else:
        z = frozenset(adjustment)
        dag.check(treatment, outcome, *z)
        latent = z & dag.latent
        if latent:
            raise IdentificationError(f"adjustment set contains latent nodes {sorted(latent)}")
        desc = z & descendants(dag, treatment)
        if desc:
            raise IdentificationError(f"adjustment set contains descendants of {treatment}: {sorted(desc)}")
        if not satisfies_backdoor(dag, treatment, outcome, z):
            witness = first_open_backdoor_path(dag, treatment, outcome, z)
            raise IdentificationError(
                f"{sorted(z)} leaves a back-door path open: {witness}", witness)
    gx = mutilate(dag, treatment)
    cert = []
    for p in enumerate_backdoor_paths(gx, treatment, outcome):
        w = blocking_witness(dag, p, z)
        if w is None:  # defensive: satisfies_backdoor already checked
            raise IdentificationError(f"path {p} is open given {sorted(z)}", p)
        cert.append(BlockedPath(p, *w))
    return AdjustmentEstimand(treatment, outcome, z, tuple(cert), dag)


def verify(est: AdjustmentEstimand, dag: CausalDag | None = None) -> bool:
    dag = dag or est.dag
    return all(is_blocked(dag, b.path, est.adjustment) for b in est.certificate) and (
        satisfies_backdoor(dag, est.treatment, est.outcome, est.adjustment))


# --- estimation -----------------------------------------------------------


def latent_projection(dag: CausalDag) -> CausalDag:
    """Observed-only DAG that can represent every distribution of ``dag`` marginalized over its latents.

    Each latent must be a root. Its children are taken in topological
    order; the j-th child additionally receives every earlier child and
    their other parents as parents.
    """
    arcs = set(dag.arcs)
    order = {n: i for i, n in enumerate(dag.topological_order)}
    for u in sorted(dag.latent):
        pa = {n: {a for a, b in arcs if b == n} for n in dag.nodes}
        if pa[u]:
            raise GraphError(f"latent node {u} has parents; only root latents can be projected out")
        kids = sorted((b for a, b in arcs if a == u), key=order.get)
        arcs = {(a, b) for a, b in arcs if a != u}
        for j, c in enumerate(kids):
            for prev in kids[:j]:
                for p in ({prev} | pa[prev]) - {u}:
                    if p != c:
                        arcs.add((p, c))
    observed = [n for n in dag.nodes if n not in dag.latent]
    return CausalDag(observed, arcs)


def marginal_imap(dag: CausalDag, keep: Iterable[str]) -> CausalDag:
    """Minimal I-map of the marginal over ``keep``, in ``dag``'s topological order.

    Each kept node's parents are the earlier kept nodes it is not
    d-separated from given all other earlier kept nodes. Latent nodes of
    ``dag`` may be among the marginalized ones.
    """
    keep = set(keep)
    dag.check(*keep)
    order = [n for n in dag.topological_order if n in keep]
    arcs = []
    for k, v in enumerate(order):
        before = order[:k]
        for p in before:
            rest = [q for q in before if q != p]
            if not d_separated(dag, v, p, rest):
                arcs.append((p, v))
    return CausalDag(order, arcs)


def estimand_variables(est: AdjustmentEstimand) -> list[str]:
    return sorted({est.treatment, est.outcome, *est.adjustment})


def fit_observed(dag: CausalDag, data: Dataset, alpha: float = DEFAULT_ALPHA,
                 variables: Iterable[str] | None = None) -> DiscreteBayesNet:
    """Fit a network whose distribution can stand in for ``dag``'s on the observed data.

    Without latents (or with latent columns present) ``dag`` itself is
    fitted. Otherwise the fitted structure is the minimal I-map of the
    observed marginal over ``variables`` (default: all observed nodes).
    Restricting ``variables`` to an estimand's treatment, outcome and
    adjustment set keeps the CPTs small without losing exactness for
    that estimand.
    """
    if variables is None and all(u in data for u in dag.latent):
        return fit_mle(dag, data, alpha)
    keep = list(variables) if variables is not None else list(dag.observed)
    return fit_mle(marginal_imap(dag, keep), data, alpha)


def _check_vars(bn: DiscreteBayesNet, est: AdjustmentEstimand):
    for v in (est.treatment, est.outcome, *est.adjustment):
        if v not in bn.cpts:
            raise UnknownNodeError(f"network has no node {v!r}")


def _adjustment_joint(bn: DiscreteBayesNet, est: AdjustmentEstimand) -> np.ndarray:
    _check_vars(bn, est)
    joint = joint_factor(bn, (est.outcome, est.treatment, *est.adjustment_list)).values  # P(y, x, z)
    return joint / joint.sum()


def _adjust_from_joint(bn: DiscreteBayesNet, est: AdjustmentEstimand, joint: np.ndarray, xi: int) -> np.ndarray:
    z = est.adjustment_list
    pz = joint.sum(axis=(0, 1))
    pxz = joint[:, xi].sum(axis=0)
    bad = (pz > 0) & (pxz <= 0)
    if np.any(bad):
        idx = tuple(int(i) for i in np.argwhere(bad)[0])
        stratum = {v: bn.states(v)[i] for v, i in zip(z, idx)}
        x = est.treatment
        raise UnsupportedStratumError(
            f"positivity violation: P({x}={bn.states(x)[xi]} | {stratum}) = 0 while P({stratum}) > 0", stratum)
    with np.errstate(divide="ignore", invalid="ignore"):
        cond = np.where(pxz > 0, joint[:, xi] / pxz, 0.0)  # P(y | x, z)
    out = (cond * pz).reshape(joint.shape[0], -1).sum(axis=1)
    return out / out.sum()


def backdoor_adjust(bn: DiscreteBayesNet, est: AdjustmentEstimand, x_value) -> np.ndarray:
    """P(Y | do(X=x)) = sum_z P(Y | x, z) P(z), all terms from one exact joint query."""
    xi = bn.index(est.treatment, x_value)
    return _adjust_from_joint(bn, est, _adjustment_joint(bn, est), xi)


def intervene(bn: DiscreteBayesNet, treatment: str, value) -> DiscreteBayesNet:
    """Graph surgery: cut the treatment's parents and pin it to ``value``."""
    xi = bn.index(treatment, value)
    dag = bn.dag
    cut = CausalDag(dag.nodes, [(a, b) for a, b in dag.arcs if b != treatment], dag.latent)
    pinned = np.zeros(bn.card(treatment))
    pinned[xi] = 1.0
    cpts = dict(bn.cpts)
    cpts[treatment] = Cpt(treatment, (), pinned)
    return DiscreteBayesNet(cut, bn.cards.values(), cpts)


def surgery_effect(bn: DiscreteBayesNet, treatment: str, outcome: str, value) -> np.ndarray:
    return eliminate(intervene(bn, treatment, value), (outcome,)).values


@dataclass
class EffectReport:
    """Outcome distributions under two treatment levels and their contrast."""

    kind: str  # "interventional" or "observational"
    treatment: str
    outcome: str
    states: tuple[str, ...]
    control: str
    treated: str
    p_control: np.ndarray
    p_treated: np.ndarray
    adjustment: tuple[str, ...] = ()

    @property
    def delta(self) -> np.ndarray:
        return self.p_treated - self.p_control

    @property
    def delta_pp(self) -> np.ndarray:
        return 100.0 * self.delta

    def contrast(self, state) -> float:
        """Signed difference in percentage points for one outcome state."""
        i = self.states.index(state) if isinstance(state, str) else int(state)
        return float(self.delta_pp[i])

    def rows(self) -> list[dict]:
        return [
            {"state": s, "control_p": float(c), "treated_p": float(t), "delta_pp": float(d)}
            for s, c, t, d in zip(self.states, self.p_control, self.p_treated, self.delta_pp)
        ]

    def to_dict(self) -> dict:
        return {
            "kind": self.kind, "treatment": self.treatment, "outcome": self.outcome,
            "control": self.control, "treated": self.treated, "adjustment": list(self.adjustment),
            "rows": self.rows(),
        }


def treatment_effect(bn: DiscreteBayesNet, est: AdjustmentEstimand, control, treated) -> EffectReport:
    """Delta_TE = P(Y | do(treated)) - P(Y | do(control)), per outcome state."""
    x = est.treatment
    ci, ti = bn.index(x, control), bn.index(x, treated)
    joint = _adjustment_joint(bn, est)
    pc = _adjust_from_joint(bn, est, joint, ci)
    pt = pc if ti == ci else _adjust_from_joint(bn, est, joint, ti)
    states = bn.states(x)
    return EffectReport("interventional", x, est.outcome, bn.states(est.outcome), states[ci], states[ti],
                        pc, pt, tuple(est.adjustment_list))


def observational_contrast(bn: DiscreteBayesNet, x: str, y: str, control, treated) -> EffectReport:
    """Delta_obs = P(Y | X=treated) - P(Y | X=control)."""
    c_label = bn.states(x)[bn.index(x, control)]
    t_label = bn.states(x)[bn.index(x, treated)]
    pc = eliminate(bn, (y,), {x: c_label}).values
    pt = pc if t_label == c_label else eliminate(bn, (y,), {x: t_label}).values
    return EffectReport("observational", x, y, bn.states(y), c_label, t_label, pc, pt)


def interventional_by_level(bn: DiscreteBayesNet, est: AdjustmentEstimand) -> dict[str, np.ndarray]:
    return {s: backdoor_adjust(bn, est, s) for s in bn.states(est.treatment)}


def aggregate_bands(per_band: Sequence[Sequence[float]], marginals: Sequence[float],
                    partition: Mapping[str, Sequence[int]] | None = None) -> dict[str, np.ndarray]:
    """Marginal-weighted average of per-band distributions within each group.

    Without a partition every band forms its own group.
    """
    per_band = np.asarray(per_band, dtype=float)
    marginals = np.asarray(marginals, dtype=float)
    if per_band.ndim != 2 or len(per_band) != len(marginals):
        raise ValueError("need one distribution per band and one marginal per band")
    if partition is None:
        partition = {str(i): (i,) for i in range(len(marginals))}
    used: list[int] = []
    for g, idx in partition.items():
        if len(idx) == 0:
            raise EmptyGroupError(f"group {g!r} has no bands")
        used += list(idx)
    if sorted(used) != list(range(len(marginals))):
        raise ValueError(f"partition must cover bands 0..{len(marginals) - 1} exactly once")
    out = {}
    for g, idx in partition.items():
        idx = list(idx)
        mass = marginals[idx].sum()
        if not mass > 0:
            raise ZeroMassGroupError(f"group {g!r} has zero marginal mass")
        if len(idx) == 1:
            out[g] = per_band[idx[0]].copy()
        else:
            out[g] = (per_band[idx] * marginals[idx, None]).sum(axis=0) / mass
    return out


def group_mass(marginals: Sequence[float], partition: Mapping[str, Sequence[int]]) -> dict[str, float]:
    m = np.asarray(marginals, dtype=float)
    return {g: float(m[list(idx)].sum()) for g, idx in partition.items()}


# --- risk ratio -----------------------------------------------------------


@dataclass(frozen=True)
class RiskRatioReport:
    rr: float
    e_value: float
    numerator: float
    denominator: float

    def to_dict(self) -> dict:
        return {"rr": self.rr, "e_value": self.e_value, "p_treated": self.numerator, "p_control": self.denominator}


def e_value(rr: float) -> float:
    """Minimum confounder strength (risk-ratio scale) to explain away ``rr``."""
    if rr <= 0:
        raise ValueError("risk ratio must be positive")
    if rr < 1:
        rr = 1.0 / rr
    return rr + math.sqrt(rr * (rr - 1.0))


def risk_ratio(p_treated: float, p_control: float) -> RiskRatioReport:
    if not p_control > 0:
        raise ZeroDenominatorError(f"risk ratio needs a positive control probability, got {p_control}")
    if p_treated <= 0:
        raise ZeroDenominatorError("risk ratio of zero treated probability has no E-value")
    rr = p_treated / p_control
    return RiskRatioReport(rr, e_value(rr), p_treated, p_control)
