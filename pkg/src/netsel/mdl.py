"""Canonical serialisation, compressed-size cost, and efficiency (correct
predictions per byte)."""

from __future__ import annotations

import json
import math
import zlib
from dataclasses import dataclass

import lz4.frame
import numpy as np

K_GRID = (5, 10, 25, 50, 75, 100, 150)
CODECS = ("lz4", "deflate")


def _render_float(x: float, digits: int | None, nonfinite: bool = False) -> str:
    if not math.isfinite(x):
        if nonfinite:
            return "NaN" if math.isnan(x) else ("Infinity" if x > 0 else "-Infinity")
        raise ValueError(f"non-finite value {x!r} has no canonical form")
    if digits is None:
        return repr(float(x))
    return format(x, f".{digits}g")


def _emit(obj, out: list, digits, nonfinite=False):
    if obj is None:
        out.append("null")
    elif isinstance(obj, (bool, np.bool_)):
        out.append("true" if obj else "false")
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.append(_render_float(float(obj), digits, nonfinite))
    elif isinstance(obj, str):
        out.append(json.dumps(obj, ensure_ascii=False))
    elif isinstance(obj, dict):
        out.append("{")
        keys = sorted(obj, key=lambda k: str(k).encode("utf-8"))
        for n, key in enumerate(keys):
            if n:
                out.append(",")
            out.append(json.dumps(str(key), ensure_ascii=False))
            out.append(":")
            _emit(obj[key], out, digits, nonfinite)
        out.append("}")
    elif isinstance(obj, (list, tuple, np.ndarray)):
        items = obj.tolist() if isinstance(obj, np.ndarray) else obj
        if items and all(type(v) is int for v in items):  # fast path, same bytes
            out.append("[" + ",".join(map(str, items)) + "]")
            return
        if items and all(type(v) is float for v in items):
            out.append("[" + ",".join([_render_float(v, digits, nonfinite) for v in items]) + "]")
            return
        out.append("[")
        for n, item in enumerate(items):
            if n:
                out.append(",")
            _emit(item, out, digits, nonfinite)
        out.append("]")
    elif hasattr(obj, "to_canonical"):
        _emit(obj.to_canonical(), out, digits, nonfinite)
    else:
        raise TypeError(f"cannot serialise {type(obj).__name__}")


def canonical(obj, digits: int | None = 6, nonfinite: bool = False) -> bytes:
    """Compact JSON with byte-sorted keys and reals at ``digits`` significant digits.

    ``digits=None`` keeps full round-trip precision and ``nonfinite=True``
    writes NaN/Infinity tokens; both are for stage artifacts, never for costs.
    """
    out: list[str] = []
    _emit(obj, out, digits, nonfinite)
    return "".join(out).encode("utf-8")


def parse_canonical(data: bytes):
    return json.loads(data.decode("utf-8"))


def compress(data: bytes, codec: str = "lz4") -> bytes:
    if codec == "lz4":
        return lz4.frame.compress(data)
    if codec == "deflate":
        return zlib.compress(data, 6)
    raise ValueError(f"unknown codec {codec!r}")


def decompress(data: bytes, codec: str = "lz4") -> bytes:
    if codec == "lz4":
        return lz4.frame.decompress(data)
    if codec == "deflate":
        return zlib.decompress(data)
    raise ValueError(f"unknown codec {codec!r}")


@dataclass(frozen=True)
class CostReport:
    object_id: str
    raw_bytes: int
    compressed_bytes: int


def cost_report(obj, object_id: str = "", codec: str = "lz4") -> CostReport:
    raw = canonical(obj)
    return CostReport(object_id, len(raw), len(compress(raw, codec)))


def cost(obj, codec: str = "lz4") -> int:
    """Length in bytes of the compressed canonical form."""
    return len(compress(canonical(obj), codec))


# --------------------------------------------------------------------------
# efficiency
# --------------------------------------------------------------------------


def node_efficiency(correct, costs, k_grid) -> tuple[float, int]:
    """Best correct-per-byte over the grid and the ``k`` attaining it (smallest on ties)."""
    correct = np.asarray(correct, dtype=np.float64)
    costs = np.asarray(costs, dtype=np.float64)
    if len(k_grid) == 0 or correct.shape != (len(k_grid),) or costs.shape != correct.shape:
        raise ValueError("correct and cost must have one entry per grid value")
    if np.any(costs <= 0):
        raise ValueError("costs must be positive")
    ratio = correct / costs
    order = np.argsort(np.asarray(k_grid), kind="stable")
    best = order[int(np.argmax(ratio[order]))]
    return float(ratio[best]), int(k_grid[best])


@dataclass(frozen=True)
class EfficiencyRecord:
    model_id: str
    kappa: np.ndarray
    correct: np.ndarray
    task_cost: np.ndarray
    netcost: int

    @property
    def taskcorrect(self) -> float:
        return float(np.sum(self.correct))

    @property
    def taskcost(self) -> float:
        return float(np.sum(self.task_cost))

    @property
    def efficiency(self) -> float:
        return self.taskcorrect / (self.taskcost + self.netcost)

    @property
    def mean_kappa(self) -> float:
        return float(np.mean(self.kappa)) if len(self.kappa) else 0.0

    @property
    def net_share(self) -> float:
        """Representation cost as a fraction of the total encoding cost."""
        return self.netcost / (self.taskcost + self.netcost)


def total_efficiency(model_id: str, kappa, correct, task_cost, netcost: int) -> EfficiencyRecord:
    """Sum per-node correct counts and predictor costs at each node's chosen
    ``k`` and divide by their total encoding cost plus ``netcost``."""
    if netcost <= 0:
        raise ValueError("netcost must be positive")
    return EfficiencyRecord(model_id, np.asarray(kappa, dtype=np.int64),
                            np.asarray(correct, dtype=np.float64),
                            np.asarray(task_cost, dtype=np.float64), int(netcost))
