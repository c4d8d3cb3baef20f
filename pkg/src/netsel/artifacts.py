"""Stage artifacts (lz4-compressed canonical JSON) and the run manifest."""

from __future__ import annotations

import hashlib
import json
import time
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from . import mdl
from .dataset import AttributeMatrix, Dataset, LabelSet
from .netinfer import EdgeSet

MANIFEST = "manifest.json"

# stage -> (artifact file, upstream stages)
STAGES = {
    "dataset": ("dataset.json.lz4", ()),
    "infer": ("networks.json.lz4", ("dataset",)),
    "evaluate": ("evaluation.json.lz4", ("dataset", "infer")),
    "select": ("selection.json.lz4", ("evaluate",)),
    "significance": ("significance.json.lz4", ("evaluate",)),
    "noise": ("noise.json.lz4", ("dataset", "infer", "evaluate", "significance")),
}


class StaleArtifact(RuntimeError):
    """An upstream artifact is missing or was built from different inputs."""


def file_hash(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def save(path, obj) -> str:
    data = mdl.compress(mdl.canonical(obj, digits=None, nonfinite=True), "lz4")
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(data)
    tmp.replace(path)
    return hashlib.sha256(data).hexdigest()


def load(path):
    return mdl.parse_canonical(mdl.decompress(Path(path).read_bytes(), "lz4"))


# --------------------------------------------------------------------------
# domain objects <-> plain form
# --------------------------------------------------------------------------


def edges_to_plain(E: EdgeSet) -> dict:
    return {"n": E.node_count, "indptr": E.indptr, "indices": E.indices, "directed": E.directed}


def edges_from_plain(d) -> EdgeSet:
    return EdgeSet(int(d["n"]), np.array(d["indptr"], np.int64), np.array(d["indices"], np.int64),
                   bool(d["directed"]))


def matrix_to_plain(A: AttributeMatrix) -> dict:
    c = A.csr
    return {"shape": list(c.shape), "indptr": c.indptr.astype(np.int64), "indices": c.indices.astype(np.int64),
            "data": c.data.astype(np.float64)}


def matrix_from_plain(d) -> AttributeMatrix:
    csr = sp.csr_matrix((np.array(d["data"], np.float64), np.array(d["indices"], np.int64),
                         np.array(d["indptr"], np.int64)), shape=tuple(d["shape"]))
    return AttributeMatrix(csr)


def dataset_to_plain(ds: Dataset) -> dict:
    return {
        "node_count": ds.node_count,
        "partitions": [matrix_to_plain(p) for p in ds.partitions],
        "labels": [[{"name": ls.name, "positives": sorted(ls.positives)} for ls in part]
                   for part in ds.label_sets],
        "explicit": None if ds.explicit_edges is None else edges_to_plain(ds.explicit_edges),
        "communities": None if ds.communities is None else np.asarray(ds.communities),
        "node_ids": list(ds.node_ids),
        "item_ids": list(ds.item_ids),
    }


def dataset_from_plain(d) -> Dataset:
    labels = tuple(tuple(LabelSet(x["name"], frozenset(x["positives"])) for x in part) for part in d["labels"])
    comm = None if d["communities"] is None else np.array(d["communities"], np.int64)
    if comm is not None:
        comm.setflags(write=False)
    return Dataset(tuple(matrix_from_plain(p) for p in d["partitions"]), labels, int(d["node_count"]),
                   None if d["explicit"] is None else edges_from_plain(d["explicit"]), comm,
                   tuple(d["node_ids"]), tuple(d["item_ids"]))


# --------------------------------------------------------------------------
# manifest
# --------------------------------------------------------------------------


class Manifest:
    """``manifest.json``: config digest plus one record per completed stage."""

    def __init__(self, out_dir, config_digest: str):
        self.dir = Path(out_dir)
        self.path = self.dir / MANIFEST
        self.config_digest = config_digest
        if self.path.exists():
            self.data = json.loads(self.path.read_text(encoding="utf-8"))
        else:
            self.data = {"stages": {}}
        self.data["config"] = config_digest

    def artifact_path(self, stage: str) -> Path:
        return self.dir / STAGES[stage][0]

    def _check(self, up: str, force: bool, needed_by: str) -> str:
        rec = self.data["stages"].get(up)
        path = self.artifact_path(up)
        if rec is None or not path.exists():
            raise StaleArtifact(f"{needed_by!r} needs stage {up!r}, which has not been run in {self.dir}")
        current = file_hash(path)
        problems = []
        if rec.get("config") != self.config_digest:
            problems.append("it was built with a different configuration")
        if current != rec.get("hash"):
            problems.append("its file no longer matches the recorded hash")
        stale_inputs = [u for u, h in rec.get("inputs", {}).items()
                        if self.data["stages"].get(u, {}).get("hash") != h]
        if stale_inputs:
            problems.append(f"its own inputs {stale_inputs} have since changed")
        if problems and not force:
            raise StaleArtifact(f"stage {up!r} needed by {needed_by!r} is stale: " + "; ".join(problems)
                                + " (rerun it or pass --force)")
        return current

    def check_upstream(self, stage: str, force: bool = False) -> dict:
        """Hashes of this stage's inputs; raises if any is missing or stale."""
        return {up: self._check(up, force, stage) for up in STAGES[stage][1]}

    def check_stages(self, stages, force: bool = False, needed_by: str = "report") -> dict:
        return {s: self._check(s, force, needed_by) for s in stages}

    def has(self, stage: str) -> bool:
        return stage in self.data["stages"] and self.artifact_path(stage).exists()

    def record(self, stage: str, digest: str, inputs: dict, started: float, counts: dict | None = None) -> None:
        self.data["stages"][stage] = {
            "artifact": STAGES[stage][0], "hash": digest, "inputs": inputs,
            "config": self.config_digest, "seconds": round(time.perf_counter() - started, 3),
            "counts": counts or {},
        }
        self.write()

    def record_reports(self, files: dict) -> None:
        self.data["reports"] = files
        self.write()

    def write(self) -> None:
        self.dir.mkdir(parents=True, exist_ok=True)
        self.path.write_text(json.dumps(self.data, indent=2, sort_keys=True) + "\n", encoding="utf-8")
