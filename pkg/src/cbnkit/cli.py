"""Command-line pipeline: simulate | discover | identify | estimate | refute | report.

One YAML document configures every stage. Command-line flags override the
document, which overrides built-in defaults. Every output file records the
SHA-256 of the effective configuration and the master seed.
"""

from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import json
import logging
import sys
from pathlib import Path

import numpy as np
import yaml

from cbnkit.bayesnet import DEFAULT_ALPHA, DiscreteBayesNet, marginal
from cbnkit.causal import (
    AUTO,
    aggregate_bands,
    estimand_variables,
    fit_observed,
    group_mass,
    identify,
    interventional_by_level,
    observational_contrast,
    risk_ratio,
    treatment_effect,
)
from cbnkit.data import (
    DEFAULT_WEIGHT_COLUMN,
    VariableSchema,
    forward_sample,
    income_partition,
    load_csv,
    recode,
    weighted_resample,
    write_csv,
)
from cbnkit.discovery import Blacklist, discover
from cbnkit.errors import CbnError, ConfigError, ZeroDenominatorError
from cbnkit.graph import UNDIRECTED, as_dag, format_graph, read_graph
from cbnkit.refutation import RefutationConfig, placebo_test, subsample_test
from cbnkit.shs import OUTCOME_RECODE, PARKING_RECODE, load_synthetic_fig3, raw_schema, survey_schema

log = logging.getLogger("cbnkit")

DEFAULTS = {
    "seed": 0,
    "paths": {"data": None, "graph": "fig3", "output": "out", "schema": "survey", "network": "fig3_synthetic"},
    "weight_column": DEFAULT_WEIGHT_COLUMN,
    "resample": {"enabled": False, "n_out": None},
    "alpha": DEFAULT_ALPHA,
    "blacklist": [],
    "discovery": {"max_contributors": 3, "complexity_scale": 1.0, "variables": None},
    "identification": {"max_size": 3},
    "estimands": [],
    "refutation": {"iterations": 1000, "subsample_fraction": 0.8, "n_jobs": 1, "tests": ["placebo", "subsample"]},
    "simulate": {"n": 5000, "hide_latent": True},
}


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in (over or {}).items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


class Pipeline:
    """Effective configuration plus the shared helpers every subcommand uses."""

    def __init__(self, cfg: dict, base_dir: Path):
        self.cfg = cfg
        self.base_dir = base_dir
        text = json.dumps(cfg, sort_keys=True, separators=(",", ":"), default=str)
        self.sha = hashlib.sha256(text.encode()).hexdigest()
        self.seed = int(cfg["seed"])
        self.out = self.path(cfg["paths"]["output"])
        self._schema = None
        self._data = None

    # --- provenance and io
    @property
    def provenance(self) -> dict:
        return {"config_sha256": self.sha, "seed": self.seed}

    @property
    def stamp(self) -> str:
        return f"config_sha256={self.sha} seed={self.seed}"

    def path(self, p) -> Path:
        p = Path(p)
        return p if p.is_absolute() else self.base_dir / p

    def output(self, name: str) -> Path:
        self.out.mkdir(parents=True, exist_ok=True)
        return self.out / name

    def write_json(self, name: str, payload: dict) -> Path:
        path = self.output(name)
        payload = {"provenance": self.provenance, **payload}
        path.write_text(json.dumps(payload, indent=2, sort_keys=False) + "\n")
        return path

    def write_table(self, name: str, rows: list[dict]) -> Path:
        path = self.output(name)
        with path.open("w", newline="") as fh:
            fh.write(f"# {self.stamp}\n")
            if rows:
                w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
                w.writeheader()
                w.writerows(rows)
        return path

    # --- inputs
    @property
    def schema(self) -> VariableSchema:
        if self._schema is None:
            spec = self.cfg["paths"]["schema"]
            if spec in ("survey", "survey_raw"):
                self._schema = survey_schema() if spec == "survey" else raw_schema()
            else:
                try:
                    self._schema = VariableSchema.from_dict(json.loads(self.path(spec).read_text()))
                except FileNotFoundError:
                    raise ConfigError(f"schema file not found: {spec}") from None
        return self._schema

    @property
    def data(self):
        if self._data is None:
            p = self.cfg["paths"]["data"]
            if not p:
                raise ConfigError("paths.data is not set")
            path = self.path(p)
            if not path.exists():
                raise ConfigError(f"data file not found: {path}")
            data = load_csv(path, self.schema, self.cfg["weight_column"], strict=False)
            if self.cfg["paths"]["schema"] == "survey_raw":
                for rmap in (PARKING_RECODE, OUTCOME_RECODE):
                    if rmap.variable in data:
                        data = recode(data, rmap)
            rs = self.cfg["resample"]
            if rs.get("enabled"):
                data = weighted_resample(data, rs.get("n_out") or data.n_rows, seed=self.seed)
            self._data = data
        return self._data

    def graph(self):
        spec = str(self.cfg["paths"]["graph"])
        path = self.path(spec)
        return read_graph(path if path.exists() else spec)

    def dag(self):
        """The graph as a DAG; detached undirected clusters are dropped first."""
        g = self.graph()
        undirected = g.edges_of_kind(UNDIRECTED)
        if undirected:
            touched = {v for e in undirected for v in (e.tail, e.head)}
            detached = {v for v in touched if all(e.kind == UNDIRECTED for e in g.edges if v in (e.tail, e.head))}
            used = {v for e in self.cfg["estimands"] or [] for v in (e.get("treatment"), e.get("outcome"))}
            if detached == touched and not detached & used:
                log.info("dropping undirected cluster %s", sorted(detached))
                g = g.without_nodes(detached)
        return as_dag(g)

    def blacklist(self) -> Blacklist:
        try:
            return Blacklist.of(self.cfg["blacklist"] or [])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad blacklist: {exc}") from None

    def estimands(self) -> list[dict]:
        out = []
        for i, e in enumerate(self.cfg["estimands"] or []):
            for key in ("treatment", "outcome"):
                if key not in e:
                    raise ConfigError(f"estimand {i} lacks {key!r}")
            e = {"name": e.get("name", f"{e['treatment']}_{e['outcome']}"), "adjustment": AUTO, **e}
            out.append(e)
        return out

    def validate(self, need_states: bool = True) -> None:
        names = set(self.schema.names)
        bl = self.blacklist()
        bl.validate(names)
        for e in self.estimands():
            for key in ("treatment", "outcome"):
                if e[key] not in names:
                    raise ConfigError(f"estimand {e['name']}: unknown variable {e[key]!r}")
            adj = e["adjustment"]
            if adj != AUTO:
                if isinstance(adj, str) or not all(isinstance(v, str) for v in adj):
                    raise ConfigError(f"estimand {e['name']}: adjustment must be 'auto' or a list of names")
            if need_states:
                for key in ("control", "treated"):
                    if key not in e:
                        raise ConfigError(f"estimand {e['name']} lacks {key!r}")
                states = self.schema[e["treatment"]].states
                for key in ("control", "treated"):
                    if str(e[key]) not in states:
                        raise ConfigError(f"estimand {e['name']}: {key} state {e[key]!r} not in {states}")
                if "outcome_state" in e and e["outcome_state"] not in self.schema[e["outcome"]].states:
                    raise ConfigError(f"estimand {e['name']}: unknown outcome state {e['outcome_state']!r}")

    def estimand(self, e: dict):
        return identify(self.dag(), e["treatment"], e["outcome"], e["adjustment"],
                        self.cfg["identification"]["max_size"])


# --- subcommands ----------------------------------------------------------


def cmd_simulate(p: Pipeline, args) -> int:
    net = p.cfg["paths"]["network"]
    bn = load_synthetic_fig3() if net == "fig3_synthetic" else DiscreteBayesNet.load(p.path(net))
    n = int(p.cfg["simulate"]["n"])
    hide = bn.dag.latent if p.cfg["simulate"].get("hide_latent", True) else ()
    data = forward_sample(bn, n, seed=p.seed, hide=hide)
    target = args.out or p.cfg["paths"]["data"] or str(p.output("simulated.csv"))
    path = p.path(target)
    path.parent.mkdir(parents=True, exist_ok=True)
    write_csv(data, path, header_comment=p.stamp)
    print(f"wrote {data.n_rows} rows x {len(data.columns)} columns to {path}")
    return 0


def cmd_discover(p: Pipeline, args) -> int:
    bl = p.blacklist()
    data = p.data
    variables = p.cfg["discovery"].get("variables") or list(data.columns)
    bl.validate(variables)
    schema = data.schema.subset(variables)
    res = discover(data, schema, bl, int(p.cfg["discovery"]["max_contributors"]),
                   float(p.cfg["discovery"]["complexity_scale"]))
    gpath = p.output("mag.graph")
    gpath.write_text(f"# {p.stamp}\n" + format_graph(res.graph))
    lpath = p.output("discovery_log.jsonl")
    lpath.write_text(json.dumps({"provenance": p.provenance}) + "\n" + res.log_lines())
    print(f"{len(res.graph.edges)} edges -> {gpath}")
    return 0


def cmd_identify(p: Pipeline, args) -> int:
    p.validate(need_states=False)
    dag = p.dag()
    results, failed = [], []
    for e in p.estimands():
        try:
            est = identify(dag, e["treatment"], e["outcome"], e["adjustment"], p.cfg["identification"]["max_size"])
            results.append({"name": e["name"], "status": "identified", **est.to_dict()})
            print(f"{e['name']}: adjust for {{{', '.join(est.adjustment_list)}}} "
                  f"({len(est.certificate)} back-door paths blocked)")
        except CbnError as exc:
            witness = getattr(exc, "witness", None)
            results.append({"name": e["name"], "status": "rejected", "treatment": e["treatment"],
                            "outcome": e["outcome"], "adjustment": e["adjustment"], "error": str(exc),
                            "witness": str(witness) if witness is not None else None})
            failed.append((e["name"], exc))
            print(f"{e['name']}: REJECTED: {exc}", file=sys.stderr)
    p.write_json("identify.json", {"estimands": results})
    if failed:
        return failed[0][1].exit_code
    return 0


def _effect_rows(te, obs) -> list[dict]:
    rows = []
    for rep in (te, obs):
        for r in rep.rows():
            rows.append({"kind": rep.kind, **r})
    return rows


def cmd_estimate(p: Pipeline, args) -> int:
    p.validate()
    dag = p.dag()
    out = []
    for e in p.estimands():
        est = p.estimand(e)
        bn = fit_observed(dag, p.data, float(p.cfg["alpha"]), estimand_variables(est))
        te = treatment_effect(bn, est, e["control"], e["treated"])
        obs = observational_contrast(bn, e["treatment"], e["outcome"], e["control"], e["treated"])
        rr = {}
        for i, s in enumerate(te.states):
            try:
                rr[s] = risk_ratio(float(te.p_treated[i]), float(te.p_control[i])).to_dict()
            except ZeroDenominatorError as exc:
                rr[s] = {"error": str(exc)}
        entry = {"name": e["name"], "estimand": est.to_dict(), "interventional": te.to_dict(),
                 "observational": obs.to_dict(), "risk_ratios": rr}
        p.write_table(f"effect_{e['name']}.csv", _effect_rows(te, obs))
        if e.get("bands"):
            entry["bands"] = _bands(p, bn, est, e)
        out.append(entry)
        for r in te.rows():
            print(f"{e['name']}: {r['state']}: {r['delta_pp']:+.2f} pp")
    p.write_json("estimate.json", {"estimands": out})
    return 0


def _bands(p: Pipeline, bn, est, e) -> dict:
    """Per-level interventional distributions aggregated into groups of treatment levels."""
    spec = e["bands"]
    x = est.treatment
    if spec.get("partition"):
        partition = {k: tuple(int(i) for i in v) for k, v in spec["partition"].items()}
    else:
        partition = income_partition(bn.schema(), x, int(spec.get("low_bands", 6)))
    if spec.get("marginals") == "published":
        marg = np.asarray(p.schema[x].marginals, dtype=float)
    else:
        marg = marginal(bn, x).values
    per_level = interventional_by_level(bn, est)
    per_band = [per_level[s] for s in bn.states(x)]
    groups = aggregate_bands(per_band, marg, partition)
    names = list(groups)
    rows = []
    for i, s in enumerate(bn.states(est.outcome)):
        row = {"state": s, **{f"{g}_p": float(groups[g][i]) for g in names}}
        if len(names) == 2:
            row["delta_pp"] = 100.0 * float(groups[names[1]][i] - groups[names[0]][i])
        rows.append(row)
    p.write_table(f"bands_{e['name']}.csv", rows)
    return {"partition": {k: list(v) for k, v in partition.items()}, "group_mass": group_mass(marg, partition),
            "rows": rows}


def cmd_refute(p: Pipeline, args) -> int:
    p.validate()
    dag = p.dag()
    rc = p.cfg["refutation"]
    out = []
    for e in p.estimands():
        est = p.estimand(e)
        state = e.get("outcome_state") or rc.get("outcome_state") or p.schema[e["outcome"]].states[0]
        cfg = RefutationConfig(est, state, str(e["control"]), str(e["treated"]), int(rc["iterations"]), p.seed,
                               float(rc["subsample_fraction"]), float(p.cfg["alpha"]), int(rc.get("n_jobs", 1)))
        reports = {}
        for kind in rc.get("tests", ["placebo", "subsample"]):
            fn = {"placebo": placebo_test, "subsample": subsample_test}.get(kind)
            if fn is None:
                raise ConfigError(f"unknown refutation test {kind!r}")
            rep = fn(p.data, dag, cfg)
            reports[kind] = rep.to_dict()
            print(f"{e['name']}: {kind}: delta={rep.baseline:+.3f} pp mean={rep.mean:+.3f} p={rep.p_value:.3f}")
        out.append({"name": e["name"], "outcome_state": state, "tests": reports})
    p.write_json("refute.json", {"estimands": out})
    return 0


def cmd_report(p: Pipeline, args) -> int:
    lines = ["# cbnkit report", "", f"config sha256 `{p.sha}`, seed {p.seed}", ""]
    ident = p.out / "identify.json"
    if ident.exists():
        lines += ["## Identification", ""]
        for e in json.loads(ident.read_text())["estimands"]:
            if e["status"] == "identified":
                lines.append(f"- {e['name']}: {e['treatment']} -> {e['outcome']}, adjust for "
                             f"{{{', '.join(e['adjustment'])}}}, {e['n_backdoor_paths']} back-door paths blocked")
            else:
                lines.append(f"- {e['name']}: rejected, open path {e['witness']}")
        lines.append("")
    est = p.out / "estimate.json"
    if est.exists():
        lines += ["## Effects (percentage points)", ""]
        for e in json.loads(est.read_text())["estimands"]:
            te, obs = e["interventional"], e["observational"]
            lines += [f"### {e['name']}: {te['treated']} vs {te['control']}", "",
                      "| state | interventional | observational | RR | E-value |", "|---|---|---|---|---|"]
            for r, o in zip(te["rows"], obs["rows"]):
                rr = e["risk_ratios"].get(r["state"], {})
                rr_s = f"{rr['rr']:.3f}" if "rr" in rr else "-"
                ev_s = f"{rr['e_value']:.3f}" if "e_value" in rr else "-"
                lines.append(f"| {r['state']} | {r['delta_pp']:+.2f} | {o['delta_pp']:+.2f} | {rr_s} | {ev_s} |")
            lines.append("")
    ref = p.out / "refute.json"
    if ref.exists():
        lines += ["## Refutation", "", "| estimand | test | delta | mean | median | 1% | 99% | p |",
                  "|---|---|---|---|---|---|---|---|"]
        for e in json.loads(ref.read_text())["estimands"]:
            for kind, r in e["tests"].items():
                lines.append(f"| {e['name']} | {kind} | {r['baseline_pp']:+.3f} | {r['mean_pp']:+.3f} | "
                             f"{r['median_pp']:+.3f} | {r['p01_pp']:+.3f} | {r['p99_pp']:+.3f} | {r['p_value']:.3f} |")
        lines.append("")
    text = "\n".join(lines)
    p.output("report.md").write_text(text + "\n")
    print(text)
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "discover": cmd_discover,
    "identify": cmd_identify,
    "estimate": cmd_estimate,
    "refute": cmd_refute,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cbnkit", description="Discrete causal Bayesian network pipeline.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("-c", "--config", help="YAML pipeline configuration")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--data")
        sp.add_argument("--graph")
        sp.add_argument("--output", help="output directory")
        sp.add_argument("--alpha", type=float)
        if name == "simulate":
            sp.add_argument("-n", type=int, dest="n_rows")
            sp.add_argument("--network")
            sp.add_argument("--out", help="CSV file to write (defaults to paths.data)")
        if name == "refute":
            sp.add_argument("--iterations", type=int)
            sp.add_argument("--n-jobs", type=int)
    return ap


def load_config(args) -> tuple[dict, Path]:
    raw, base = {}, Path.cwd()
    if getattr(args, "config", None):
        path = Path(args.config)
        try:
            raw = yaml.safe_load(path.read_text()) or {}
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except yaml.YAMLError as exc:
            raise ConfigError(f"config is not valid YAML: {exc}") from None
        if not isinstance(raw, dict):
            raise ConfigError("config must be a mapping")
        base = path.resolve().parent
    cfg = _merge(DEFAULTS, raw)
    over = {"seed": args.seed, "alpha": args.alpha}
    cfg.update({k: v for k, v in over.items() if v is not None})
    for key, dest in (("data", "data"), ("graph", "graph"), ("output", "output"), ("network", "network")):
        v = getattr(args, key, None)
        if v is not None:
            cfg["paths"][dest] = v
    if getattr(args, "n_rows", None) is not None:
        cfg["simulate"]["n"] = args.n_rows
    if getattr(args, "iterations", None) is not None:
        cfg["refutation"]["iterations"] = args.iterations
    if getattr(args, "n_jobs", None) is not None:
        cfg["refutation"]["n_jobs"] = args.n_jobs
    return cfg, base


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg, base = load_config(args)
        return COMMANDS[args.command](Pipeline(cfg, base), args)
    except CbnError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
