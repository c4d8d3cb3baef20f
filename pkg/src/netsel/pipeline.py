"""End-to-end stages: data -> networks -> evaluation -> selection ->
significance -> noise -> reports. Each stage reads and writes artifacts in
the output directory so it can be rerun on its own."""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import artifacts, mdl, reports
from . import weights as wm
from .artifacts import Manifest
from .classifiers import PredictorSpec
from .config import ConfigError, RunConfig
from .dataset import (PARTITIONS, Dataset, dataset_from_log, generate_synthetic, limit_group_items,
                      load_events, load_item_groups, write_id_map)
from .netinfer import EdgeSet, build_network, load_explicit, rewire
from .predict import cc_job, derive_seed, lp_job
from .selection import (ModelScore, consistency_stats, cross_task_matrix, efficiency_table,
                        match_mismatch_delta, noise_sweep, rank_models, ranking_tau, select_best,
                        significance, topk_intersection)

log = logging.getLogger(__name__)

EVAL_PARTS = ("validation", "testing")


class PipelineError(RuntimeError):
    """A module error raised inside a stage, with the job context attached."""


def pmap(fn, items, workers: int):
    """Order-preserving map; results never depend on ``workers``."""
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


# --------------------------------------------------------------------------
# model catalogue
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ModelDef:
    weighting: str
    network: str = ""

    @property
    def base(self) -> str:
        return f"{self.network}-{self.weighting}" if self.network else self.weighting

    @property
    def is_adjacency(self) -> bool:
        return self.weighting in wm.ADJACENCY_KINDS

    def model_id(self, predictor: str, task: str) -> str:
        return f"{self.base}|{predictor}|{task}"


def enumerate_models(cfg: RunConfig) -> list[ModelDef]:
    names = [n.name for n in cfg.networks]
    if len(set(names)) != len(names):
        raise ConfigError(f"network names must be distinct, got {names}")
    out = []
    for kind in cfg.weights:
        if kind in wm.NETWORK_KINDS:
            out.extend(ModelDef(kind, name) for name in names)
        else:
            out.append(ModelDef(kind))
    return out


def build_weight_model(cfg: RunConfig, mdef: ModelDef, attrs, edges: EdgeSet | None) -> wm.NodeWeightModel:
    kind = mdef.weighting
    if kind == "activity_flat":
        return wm.make_activity_flat(attrs)
    if kind == "random":
        return wm.make_random(attrs.node_count)
    if kind == "activity_net":
        return wm.make_activity_net(attrs, cfg.exemplar_fraction, cfg.exemplar_budget)
    if edges is None:
        raise ConfigError(f"{mdef.base} needs a network")
    if kind == "degree_flat":
        return wm.make_degree_flat(edges, cfg.degree_mode)
    if kind == "cluster":
        return wm.make_cluster(edges, seed=derive_seed(cfg.seed, "louvain", mdef.base) % 2**32)
    if kind == "bfs":
        return wm.make_bfs(edges)
    if kind == "degree_net":
        return wm.make_degree_net(edges, attrs, cfg.exemplar_fraction, cfg.exemplar_budget, cfg.degree_mode)
    raise ConfigError(f"unknown weight kind {kind!r}")


def model_weights(cfg, ds: Dataset, nets: dict, mdef: ModelDef, partitions=("training",)) -> dict:
    """Weight model of ``mdef`` built on each requested partition."""
    return {p: build_weight_model(cfg, mdef, ds.partition(p), nets[mdef.network][p] if mdef.network else None)
            for p in partitions}


# --------------------------------------------------------------------------
# stage: dataset
# --------------------------------------------------------------------------


def make_dataset(cfg: RunConfig, out_dir: Path | None = None) -> Dataset:
    d = cfg.data
    if d.synthetic is not None:
        params = dict(d.synthetic)
        params.setdefault("seed", cfg.seed)
        try:
            return generate_synthetic(**params)
        except TypeError as exc:
            raise ConfigError(f"bad [data.synthetic] parameters: {exc}") from exc
    event_log = load_events(d.events)
    groups = load_item_groups(d.item_groups, event_log.item_ids)
    if d.top_items is not None:
        groups = limit_group_items(groups, event_log, d.top_items)
    explicit = None
    if d.explicit_edges is not None:
        id_map = {orig: dense for dense, orig in enumerate(event_log.node_ids)}
        explicit, drops = load_explicit(d.explicit_edges, id_map=id_map)
        log.info("explicit edges: dropped %s", drops)
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        write_id_map(out_dir / "node_ids.csv", event_log.node_ids)
        write_id_map(out_dir / "item_ids.csv", event_log.item_ids)
    return dataset_from_log(event_log, groups, d.fractions, d.value_threshold, d.item_threshold, explicit)


def infer_networks(cfg: RunConfig, ds: Dataset) -> dict:
    nets = {}
    for spec in cfg.networks:
        nets[spec.name] = {p: build_network(ds.partition(p), spec, ds.explicit_edges) for p in PARTITIONS}
    return nets


# --------------------------------------------------------------------------
# stage: evaluation
# --------------------------------------------------------------------------


def label_names(cfg: RunConfig, ds: Dataset) -> list[str]:
    names = list(cfg.labels) if cfg.labels is not None else ds.label_names
    missing = [n for n in names if n not in ds.label_names]
    if missing:
        raise ConfigError(f"unknown label sets {missing}; available: {ds.label_names}")
    return names


def _eval_nodes(ds: Dataset, label: str) -> dict:
    """node -> evaluation partitions in which it is positive."""
    out: dict[int, list] = {}
    for part in EVAL_PARTS:
        for i in ds.label(part, label).sorted().tolist():
            out.setdefault(i, []).append(part)
    return dict(sorted(out.items()))


def run_jobs(cfg: RunConfig, ds: Dataset, mdef: ModelDef, W: dict, spec: PredictorSpec, task: str,
             labels: list[str], workers: int) -> list[list]:
    """Every (label, node, k, replicate) job of one model.

    Record layout: ``[label, node, k, replicate, cost, skipped, {part: [correct, total]}, subset]``.
    """
    mid = mdef.model_id(spec.kind, task)
    train = ds.partition("training")
    W_train = W["training"]
    grid = tuple(cfg.k_grid) if task == "cc" else (0,)
    units = []
    for label in labels:
        y = ds.label("training", label).mask(ds.node_count).astype(np.int64)
        for node, parts in _eval_nodes(ds, label).items():
            units.append((label, y, node, parts))

    def run_unit(unit):
        label, y, node, parts = unit
        rows = []
        for k in grid:
            for r in range(cfg.bootstrap):
                seed = derive_seed(cfg.seed, mid, label, node, k, r)
                try:
                    if task == "cc":
                        res = cc_job(W_train, train, y, {p: ds.partition(p).csr[node] for p in parts},
                                     node, k, spec, seed, r, codec=cfg.codec)
                    else:
                        nets = {p: (W[p].adjacency, ds.partition(p)) for p in parts}
                        res = lp_job(W_train.adjacency, train, nets, node, spec, seed, r,
                                     cap=cfg.lp_pair_cap, signed=cfg.lp_signed, codec=cfg.codec)
                except Exception as exc:
                    raise PipelineError(f"model {mid}, label {label}, node {node}, k {k}, "
                                        f"replicate {r}: {exc}") from exc
                outcome = {p: [res.correct(p), res.total(p)] for p in res.outcomes}
                rows.append([label, node, k, r, res.cost, res.skipped, outcome, res.subset])
        return rows

    return [row for rows in pmap(run_unit, units, workers) for row in rows]


def _median(values) -> float:
    return float(np.median(np.asarray(values, dtype=np.float64)))


def aggregate(cfg: RunConfig, records: list, W_train: wm.NodeWeightModel, grid, partition: str) -> dict:
    """Per-partition precision by k and efficiency over nodes at their kappa."""
    by_kr: dict = {}
    per_node: dict = {}
    for label, node, k, r, cost, skipped, outcome, subset in records:
        if skipped or partition not in outcome:
            continue
        c, t = outcome[partition]
        acc = by_kr.setdefault((k, r), [0, 0])
        acc[0] += c
        acc[1] += t
        per_node.setdefault((label, node), {}).setdefault(k, []).append((c, cost, subset))

    precision_by_k = {}
    for k in grid:
        ratios = [by_kr[(k, r)][0] / by_kr[(k, r)][1] for r in range(cfg.bootstrap)
                  if (k, r) in by_kr and by_kr[(k, r)][1] > 0]
        precision_by_k[k] = _median(ratios) if ratios else 0.0

    kappa, correct, task_cost, reached = [], [], [], []
    for (label, node), ks in sorted(per_node.items()):
        avail = [k for k in grid if k in ks]
        c = [_median([x[0] for x in ks[k]]) for k in avail]
        cost = [_median([x[1] for x in ks[k]]) for k in avail]
        _, kap = mdl.node_efficiency(c, cost, avail)
        j = avail.index(kap)
        kappa.append(kap)
        correct.append(c[j])
        task_cost.append(cost[j])
        reached.extend(x[2] for x in ks[kap])
        reached.append(np.array([node]))
    R = wm.reach_set(reached) if reached else np.zeros(0, np.int64)
    W_star = wm.restrict_representation(W_train, R)
    netcost = mdl.cost(W_star.representation(), cfg.codec)
    rec = mdl.total_efficiency("", kappa, correct, task_cost, netcost)
    return {"precision_by_k": precision_by_k, "taskcorrect": rec.taskcorrect, "taskcost": rec.taskcost,
            "netcost": netcost, "efficiency": rec.efficiency, "mean_kappa": rec.mean_kappa,
            "net_share": rec.net_share, "reach": int(R.size), "nodes": len(kappa)}


def evaluate_model(cfg: RunConfig, ds: Dataset, mdef: ModelDef, W: dict, spec: PredictorSpec, task: str,
                   labels: list[str], workers: int) -> dict:
    records = run_jobs(cfg, ds, mdef, W, spec, task, labels, workers)
    grid = tuple(cfg.k_grid) if task == "cc" else (0,)
    parts = {p: aggregate(cfg, records, W["training"], grid, p) for p in EVAL_PARTS}
    val = parts["validation"]["precision_by_k"]
    k_star = min(grid, key=lambda k: (-val[k], k))
    for p in EVAL_PARTS:
        parts[p]["k"] = k_star
        parts[p]["precision"] = parts[p]["precision_by_k"][k_star]
        parts[p]["precision_by_k"] = [[k, v] for k, v in sorted(parts[p]["precision_by_k"].items())]
    outcome_rows = []
    skips = 0
    for label, node, k, r, cost, skipped, outcome, _ in records:
        if skipped:
            skips += 1
        for p, (c, t) in sorted(outcome.items()):
            outcome_rows.append([label, node, k, r, c, t, p])
    return {"model_id": mdef.model_id(spec.kind, task), "base": mdef.base, "network": mdef.network,
            "weighting": mdef.weighting, "predictor": spec.kind, "task": task, "k_star": k_star,
            "partitions": parts, "outcomes": outcome_rows, "skipped": skips}


def evaluate_all(cfg: RunConfig, ds: Dataset, nets: dict, workers: int | None = None) -> dict:
    workers = cfg.workers if workers is None else workers
    labels = label_names(cfg, ds)
    models = []
    excluded = []
    for mdef in enumerate_models(cfg):
        needs_lp = "lp" in cfg.tasks and mdef.is_adjacency
        W = model_weights(cfg, ds, nets, mdef, PARTITIONS if needs_lp else ("training",))
        for spec in cfg.predictors:
            for task in cfg.tasks:
                if task == "lp" and not mdef.is_adjacency:
                    excluded.append({"model_id": mdef.model_id(spec.kind, task),
                                     "reason": "link prediction needs an adjacency representation"})
                    continue
                log.info("evaluating %s", mdef.model_id(spec.kind, task))
                models.append(evaluate_model(cfg, ds, mdef, W, spec, task, labels, workers))
    return {"labels": labels, "models": models, "excluded": excluded}


def scores_from(evaluation: dict, partition: str, task: str | None = None,
                predictor: str | None = None) -> list[ModelScore]:
    out = []
    for m in evaluation["models"]:
        if (task and m["task"] != task) or (predictor and m["predictor"] != predictor):
            continue
        a = m["partitions"][partition]
        out.append(ModelScore(m["model_id"], a["precision"], a["taskcorrect"], a["taskcost"], a["netcost"],
                              a["efficiency"], partition, m["network"], m["weighting"], m["predictor"],
                              m["task"], a["k"], a["mean_kappa"]))
    return out


def groups(evaluation: dict) -> list[tuple[str, str]]:
    return sorted({(m["task"], m["predictor"]) for m in evaluation["models"]})


# --------------------------------------------------------------------------
# stage: selection statistics
# --------------------------------------------------------------------------


def _consistency_dict(c) -> dict:
    return {"selected": c.selected, "mu": c.mu, "mu_top": c.mu_top, "p_best": c.p_best,
            "p_selected": c.p_selected, "delta_p": c.delta_p, "rank": c.rank, "bold": c.bold}


def select_stage(cfg: RunConfig, evaluation: dict) -> dict:
    out = {"groups": [], "cross_task": []}
    for task, pred in groups(evaluation):
        val = scores_from(evaluation, "validation", task, pred)
        test = scores_from(evaluation, "testing", task, pred)
        g = {"task": task, "predictor": pred, "models": len(val)}
        chosen = select_best(val, "precision")
        g["precision"] = _consistency_dict(consistency_stats(test, chosen, "precision", cfg.top))
        rv, rt = rank_models(val, "precision"), rank_models(test, "precision")
        if len(val) >= 2:
            tau, p = ranking_tau(rv, rt)
            tau_top, p_top = ranking_tau(rv, rt, top=cfg.top) if min(len(val), cfg.top) >= 2 else (math.nan,) * 2
        else:
            tau = p = tau_top = p_top = math.nan
        inter = topk_intersection(rv, rt, cfg.top)
        g["tau"] = {"tau": tau, "p": p, "tau_top": tau_top, "p_top": p_top, "intersection": inter,
                    "bold": bool(p < 1e-3 and inter >= 5) if not math.isnan(p) else False}
        g["ranking_validation"] = list(rv.model_ids)
        g["ranking_testing"] = list(rt.model_ids)
        mm = {}
        for grouping in ("network", "weighting"):
            try:
                mm[grouping] = {"delta": match_mismatch_delta(test, grouping), "note": ""}
            except ValueError as exc:
                mm[grouping] = {"delta": math.nan, "note": str(exc)}
        g["match_mismatch"] = mm
        chosen_e = select_best(val, "efficiency")
        g["efficiency_selected"] = chosen_e
        g["efficiency"] = [vars(r) for r in efficiency_table(val, test, 3)]
        g["features"] = [{"model_id": s.model_id, "net_share": s.netcost / s.total_cost if s.total_cost else 0.0,
                          "mean_kappa": s.mean_kappa} for s in sorted(val, key=lambda s: s.model_id)]
        out["groups"].append(g)

    tasks = sorted({t for t, _ in groups(evaluation)})
    if len(tasks) > 1:
        for pred in sorted({p for _, p in groups(evaluation)}):
            v = {t: {s.model_id.rsplit("|", 1)[0]: s.precision for s in scores_from(evaluation, "validation", t, pred)}
                 for t in tasks}
            te = {t: {s.model_id.rsplit("|", 1)[0]: s.precision for s in scores_from(evaluation, "testing", t, pred)}
                  for t in tasks}
            ct = cross_task_matrix(v, te)
            for (row, col), (delta, rank, chosen) in sorted(ct.cells.items()):
                out["cross_task"].append({"predictor": pred, "select_on": row, "evaluate_on": col,
                                          "selected": chosen, "delta_p": delta, "rank": rank})
            out.setdefault("cross_task_excluded", {})[pred] = ct.excluded
    return out


# --------------------------------------------------------------------------
# stage: significance
# --------------------------------------------------------------------------


def significance_stage(cfg: RunConfig, evaluation: dict) -> dict:
    rows = []
    for task, pred in groups(evaluation):
        eff = {s.model_id: s.efficiency for s in scores_from(evaluation, "validation", task, pred)}
        for mid in sorted(eff):
            if len(eff) < 4:
                rows.append({"model_id": mid, "task": task, "predictor": pred, "efficiency": eff[mid],
                             "score": math.nan, "significant": False, "degenerate": False,
                             "note": "fewer than three competing models"})
                continue
            s = significance(eff, mid, cfg.lam)
            rows.append({"model_id": mid, "task": task, "predictor": pred, "efficiency": eff[mid],
                         "score": s.score, "significant": s.significant, "degenerate": s.degenerate,
                         "note": "degenerate IQR" if s.degenerate else ""})
    return {"rows": rows}


# --------------------------------------------------------------------------
# stage: noise
# --------------------------------------------------------------------------


def _find_model(cfg: RunConfig, model_id: str) -> tuple[ModelDef, PredictorSpec, str]:
    base, pred, task = model_id.split("|")
    for mdef in enumerate_models(cfg):
        if mdef.base == base:
            for spec in cfg.predictors:
                if spec.kind == pred:
                    return mdef, spec, task
    raise ConfigError(f"noise target {model_id!r} is not a configured model")


def rewired_efficiency(cfg: RunConfig, ds: Dataset, nets: dict, model_id: str, p: float,
                       workers: int, partition: str = "validation") -> float:
    """Efficiency of ``model_id`` after rewiring its training representation at level ``p``."""
    mdef, spec, task = _find_model(cfg, model_id)
    if not mdef.is_adjacency:
        raise ValueError(f"{model_id}: rewiring is undefined for the list representation "
                         f"of {mdef.weighting}")
    W = model_weights(cfg, ds, nets, mdef, PARTITIONS if task == "lp" else ("training",))
    train = W["training"]
    noisy = train.with_adjacency(rewire(train.adjacency, p, derive_seed(cfg.seed, "rewire", model_id, p)))
    W = dict(W, training=noisy)
    labels = label_names(cfg, ds)
    return evaluate_model(cfg, ds, mdef, W, spec, task, labels, workers)["partitions"][partition]["efficiency"]


def noise_stage(cfg: RunConfig, ds: Dataset, nets: dict, evaluation: dict, sig: dict,
                workers: int | None = None) -> dict:
    workers = cfg.workers if workers is None else workers
    if cfg.noise_targets is not None:
        targets = list(cfg.noise_targets)
    else:
        adjacency = {m["model_id"] for m in evaluation["models"] if m["weighting"] in wm.ADJACENCY_KINDS}
        targets = sorted(r["model_id"] for r in sig["rows"] if r["significant"] and r["model_id"] in adjacency)
    rows = []
    for target in targets:
        _, pred, task = target.split("|")
        eff = {s.model_id: s.efficiency for s in scores_from(evaluation, "validation", task, pred)}
        if target not in eff:
            raise ConfigError(f"noise target {target!r} was not evaluated")
        points = noise_sweep(target, eff, cfg.noise_levels,
                             lambda p: rewired_efficiency(cfg, ds, nets, target, p, workers), cfg.lam)
        rows.extend({"model_id": target, "p": pt.p, "efficiency": pt.efficiency,
                     "score": pt.significance, "significant": pt.significant} for pt in points)
    return {"targets": targets, "rows": rows}


# --------------------------------------------------------------------------
# stage runner
# --------------------------------------------------------------------------


class Runner:
    """Runs stages against an output directory, keeping the manifest current."""

    def __init__(self, cfg: RunConfig, force: bool = False):
        self.cfg = cfg
        self.force = force
        self.out = Path(cfg.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.manifest = Manifest(self.out, cfg.digest())

    def _load(self, stage):
        return artifacts.load(self.manifest.artifact_path(stage))

    def _save(self, stage, obj, inputs, started, counts=None):
        digest = artifacts.save(self.manifest.artifact_path(stage), obj)
        self.manifest.record(stage, digest, inputs, started, counts)

    def dataset(self) -> None:
        t0 = time.perf_counter()
        ds = make_dataset(self.cfg, self.out)
        self._save("dataset", artifacts.dataset_to_plain(ds), {}, t0,
                   {"nodes": ds.node_count, "labels": len(ds.label_names)})

    def _ds(self) -> Dataset:
        return artifacts.dataset_from_plain(self._load("dataset"))

    def _nets(self) -> dict:
        raw = self._load("infer")
        return {name: {p: artifacts.edges_from_plain(e) for p, e in parts.items()} for name, parts in raw.items()}

    def infer(self) -> None:
        t0 = time.perf_counter()
        inputs = self.manifest.check_upstream("infer", self.force)
        nets = infer_networks(self.cfg, self._ds())
        plain = {name: {p: artifacts.edges_to_plain(e) for p, e in parts.items()} for name, parts in nets.items()}
        self._save("infer", plain, inputs, t0,
                   {f"{name}/{p}": e.edge_count for name, parts in nets.items() for p, e in parts.items()})

    def evaluate(self) -> None:
        t0 = time.perf_counter()
        inputs = self.manifest.check_upstream("evaluate", self.force)
        ev = evaluate_all(self.cfg, self._ds(), self._nets())
        self._save("evaluate", ev, inputs, t0,
                   {"models": len(ev["models"]), "skipped_jobs": sum(m["skipped"] for m in ev["models"])})

    def select(self) -> None:
        t0 = time.perf_counter()
        inputs = self.manifest.check_upstream("select", self.force)
        self._save("select", select_stage(self.cfg, self._load("evaluate")), inputs, t0)

    def significance(self) -> None:
        t0 = time.perf_counter()
        inputs = self.manifest.check_upstream("significance", self.force)
        self._save("significance", significance_stage(self.cfg, self._load("evaluate")), inputs, t0)

    def noise(self) -> None:
        t0 = time.perf_counter()
        inputs = self.manifest.check_upstream("noise", self.force)
        res = noise_stage(self.cfg, self._ds(), self._nets(), self._load("evaluate"), self._load("significance"))
        self._save("noise", res, inputs, t0, {"targets": len(res["targets"])})

    def report(self) -> dict:
        stages = ["evaluate", "select", "significance"] + (["noise"] if self.manifest.has("noise") else [])
        self.manifest.check_stages(stages, self.force)
        noise = self._load("noise") if "noise" in stages else None
        files = reports.write_all(self.out, self._load("evaluate"), self._load("select"),
                                  self._load("significance"), noise)
        self.manifest.record_reports({name: artifacts.file_hash(self.out / name) for name in files})
        return files

    def run_all(self) -> dict:
        for stage in ("dataset", "infer", "evaluate", "select", "significance", "noise"):
            getattr(self, stage)()
        return self.report()


def run_pipeline(cfg: RunConfig, force: bool = False) -> dict:
    """Every stage in order; returns the manifest data (report hashes included)."""
    runner = Runner(cfg, force=force)
    runner.run_all()
    return runner.manifest.data
