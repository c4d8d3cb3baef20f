"""CSV reports shaped like the result tables. Headers are fixed; reals are
written with 10 significant digits so reruns compare byte for byte."""

from __future__ import annotations

import csv
import math
from pathlib import Path

REPORTS = ("scores.csv", "outcomes.csv", "perf.csv", "rank.csv", "tau.csv", "match_mismatch.csv",
           "cross_task.csv", "efficiency.csv", "significance.csv", "noise.csv", "excluded.csv")


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return format(x, ".10g")
    return str(x)


def write_csv(path, header, rows) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def _score_rows(evaluation):
    for m in sorted(evaluation["models"], key=lambda m: m["model_id"]):
        for part in ("validation", "testing"):
            a = m["partitions"][part]
            yield [m["model_id"], m["task"], m["predictor"], m["network"], m["weighting"], part, a["k"],
                   a["precision"], a["taskcorrect"], a["taskcost"], a["netcost"], a["efficiency"],
                   a["mean_kappa"], a["net_share"], a["reach"], a["nodes"], m["skipped"]]


def _outcome_rows(evaluation):
    for m in sorted(evaluation["models"], key=lambda m: m["model_id"]):
        for label, node, k, r, c, t, part in m["outcomes"]:
            yield [m["model_id"], label, node, k, r, c, t, part]


def write_all(out_dir, evaluation: dict, selection: dict, significance: dict, noise: dict | None) -> list[str]:
    out = Path(out_dir)
    groups = selection["groups"]

    write_csv(out / "scores.csv",
              ["model_id", "task", "predictor", "network", "weighting", "partition", "k", "precision",
               "correct", "taskcost", "netcost", "efficiency", "mean_kappa", "net_share", "reach",
               "nodes", "skipped_jobs"], _score_rows(evaluation))
    write_csv(out / "outcomes.csv", ["model", "label", "node", "k", "replicate", "correct", "total", "partition"],
              _outcome_rows(evaluation))
    write_csv(out / "perf.csv",
              ["task", "predictor", "models", "selected", "mu", "mu_top10", "p_best", "p_selected",
               "delta_p", "rank", "bold"],
              ([g["task"], g["predictor"], g["models"], g["precision"]["selected"], g["precision"]["mu"],
                g["precision"]["mu_top"], g["precision"]["p_best"], g["precision"]["p_selected"],
                g["precision"]["delta_p"], g["precision"]["rank"], g["precision"]["bold"]] for g in groups))

    def _parts(model_id):
        base = model_id.split("|")[0]
        return base.rsplit("-", 1) if "-" in base else ("", base)

    write_csv(out / "rank.csv", ["task", "predictor", "selected", "network", "weighting", "rank", "top_decile"],
              ([g["task"], g["predictor"], g["precision"]["selected"], *_parts(g["precision"]["selected"]),
                g["precision"]["rank"], g["precision"]["rank"] >= 0.9] for g in groups))
    write_csv(out / "tau.csv",
              ["task", "predictor", "tau", "p_value", "tau_top10", "p_value_top10", "intersection_top10",
               "bold_if_p<0.001_and_intersection>=5"],
              ([g["task"], g["predictor"], g["tau"]["tau"], g["tau"]["p"], g["tau"]["tau_top"],
                g["tau"]["p_top"], g["tau"]["intersection"], g["tau"]["bold"]] for g in groups))
    write_csv(out / "match_mismatch.csv", ["task", "predictor", "grouping", "delta", "note"],
              ([g["task"], g["predictor"], grouping, v["delta"], v["note"]]
               for g in groups for grouping, v in sorted(g["match_mismatch"].items())))
    write_csv(out / "cross_task.csv", ["predictor", "select_on", "evaluate_on", "selected", "delta_p", "rank"],
              ([c["predictor"], c["select_on"], c["evaluate_on"], c["selected"], c["delta_p"], c["rank"]]
               for c in selection["cross_task"]))
    write_csv(out / "efficiency.csv",
              ["task", "predictor", "position", "selected", "best_by_correct", "efficiency_ratio",
               "cost_ratio", "correct_ratio"],
              ([g["task"], g["predictor"], pos + 1, e["selected"], e["best"], e["efficiency_ratio"],
                e["cost_ratio"], e["correct_ratio"]] for g in groups for pos, e in enumerate(g["efficiency"])))
    write_csv(out / "significance.csv",
              ["task", "predictor", "model_id", "efficiency", "score", "significant", "degenerate", "note"],
              ([r["task"], r["predictor"], r["model_id"], r["efficiency"], r["score"], r["significant"],
                r["degenerate"], r["note"]] for r in significance["rows"]))
    write_csv(out / "noise.csv", ["model_id", "p", "efficiency", "score", "significant"],
              ([r["model_id"], r["p"], r["efficiency"], r["score"], r["significant"]]
               for r in (noise or {"rows": []})["rows"]))
    excluded = [[e["model_id"], e["reason"]] for e in evaluation.get("excluded", [])]
    for _, ids in sorted(selection.get("cross_task_excluded", {}).items()):
        excluded.extend([mid, "cross-task: not scored on every task"] for mid in ids)
    write_csv(out / "excluded.csv", ["model_id", "reason"], excluded)
    return list(REPORTS)
