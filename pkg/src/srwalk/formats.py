"""Text formats: edge files, instance files, weight files, config files and CSV output."""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable

import numpy as np

from .graph_model import FeatureTransform, Graph
from .loss import LossSpec
from .strength import Model
from .synthgen import SynthConfig
from .trainer import TrainConfig


class ParseError(ValueError):
    def __init__(self, path, lineno: int, message: str):
        super().__init__(f"{path}:{lineno}: {message}")
        self.path = path
        self.lineno = lineno


class ConfigError(ValueError):
    pass


def fmt(x: float) -> str:
    """Shortest round-trip text for a float."""
    return repr(float(x))


def _floats(text: str, path, lineno: int) -> list[float]:
    text = text.strip()
    if not text:
        return []
    try:
        vals = [float(t) for t in text.split(",")]
    except ValueError:
        raise ParseError(path, lineno, f"bad number list {text!r}") from None
    if not all(np.isfinite(vals)):
        raise ParseError(path, lineno, "non-finite feature value")
    return vals


def _ints(text: str, path, lineno: int) -> list[int]:
    text = text.strip()
    if not text:
        return []
    try:
        return [int(t) for t in text.split(",")]
    except ValueError:
        raise ParseError(path, lineno, f"bad node list {text!r}") from None


def read_edge_file(path) -> Graph:
    """Parse ``#m=<int>`` / ``#undirected`` headers and ``src<TAB>dst<TAB>f1,...,fm`` lines."""
    m = None
    undirected = False
    declared_n = 0
    src, dst, feats = [], [], []
    seen: dict[tuple[int, int], int] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.rstrip("\n").rstrip("\r")
            if not line.strip():
                continue
            if line.startswith("#"):
                head = line[1:].strip()
                if head.startswith("m="):
                    try:
                        m = int(head[2:])
                    except ValueError:
                        raise ParseError(path, lineno, f"bad header {line!r}") from None
                elif head == "undirected":
                    undirected = True
                elif head.startswith("n="):
                    try:
                        declared_n = int(head[2:])
                    except ValueError:
                        raise ParseError(path, lineno, f"bad header {line!r}") from None
                continue
            if m is None:
                raise ParseError(path, lineno, "arc before '#m=<int>' header")
            parts = line.split("\t")
            if len(parts) not in (2, 3):
                raise ParseError(path, lineno, "expected src<TAB>dst<TAB>features")
            try:
                u, v = int(parts[0]), int(parts[1])
            except ValueError:
                raise ParseError(path, lineno, "node ids must be integers") from None
            if u < 0 or v < 0:
                raise ParseError(path, lineno, "negative node id")
            if u == v:
                raise ParseError(path, lineno, f"self-loop at node {u}")
            f = _floats(parts[2] if len(parts) == 3 else "", path, lineno)
            if len(f) != m:
                raise ParseError(path, lineno, f"expected {m} features, got {len(f)}")
            keys = [(u, v), (v, u)] if undirected else [(u, v)]
            for key in keys:
                if key in seen:
                    raise ParseError(path, lineno, f"duplicate arc {key} (first on line {seen[key]})")
                seen[key] = lineno
            src.append(u)
            dst.append(v)
            feats.append(f)
    if m is None:
        raise ParseError(path, 1, "missing '#m=<int>' header")
    n = max([declared_n] + [x + 1 for x in src] + [x + 1 for x in dst])
    feats = np.asarray(feats, dtype=np.float64).reshape(len(src), m)
    if undirected:
        return Graph.from_undirected(n, np.column_stack([src, dst]) if src else np.zeros((0, 2)), feats)
    return Graph(n, src, dst, feats)


def write_edge_file(path, graph: Graph, undirected: bool = False) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"#m={graph.m}\n#n={graph.node_count}\n")
        if undirected:
            fh.write("#undirected\n")
            _, first = np.unique(graph.edge_ids, return_index=True)
            arcs = first[np.argsort(graph.edge_ids[first])]
        else:
            arcs = range(graph.arc_count)
        for i in arcs:
            feats = ",".join(fmt(x) for x in graph.features[i])
            fh.write(f"{graph.src[i]}\t{graph.dst[i]}\t{feats}\n")


def read_instance_file(path) -> list[tuple[int, list[int], list[int] | None]]:
    """Rows ``seed<TAB>d1,d2,...[<TAB>l1,l2,...]``; a missing L column gives ``None``."""
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.rstrip("\n").rstrip("\r")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) not in (2, 3):
                raise ParseError(path, lineno, "expected seed<TAB>destinations[<TAB>no-links]")
            try:
                seed = int(parts[0])
            except ValueError:
                raise ParseError(path, lineno, "seed must be an integer") from None
            d = _ints(parts[1], path, lineno)
            l = _ints(parts[2], path, lineno) if len(parts) == 3 else None
            rows.append((seed, d, l))
    return rows


def write_instance_file(path, rows: Iterable[tuple[int, Iterable[int], Iterable[int] | None]]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for seed, d, l in rows:
            line = f"{seed}\t{','.join(str(int(x)) for x in d)}"
            if l is not None:
                line += "\t" + ",".join(str(int(x)) for x in l)
            fh.write(line + "\n")


def write_weights(path, model: Model) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"family={model.family}\n")
        fh.write(f"edge_types={model.edge_types}\n")
        t = model.transform
        if t is not None:
            fh.write("transform_mean=" + ",".join(fmt(x) for x in t.mean) + "\n")
            fh.write("transform_scale=" + ",".join(fmt(x) for x in t.scale) + "\n")
            fh.write("transform_degenerate=" + ",".join(str(int(x)) for x in t.degenerate) + "\n")
        for code, row in enumerate(model.weights):
            fh.write(f"type={code} w=" + ",".join(fmt(x) for x in row) + "\n")


def read_weights(path) -> Model:
    head: dict[str, str] = {}
    rows: dict[int, list[float]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if line.startswith("type="):
                try:
                    code_part, w_part = line.split(None, 1)
                    code = int(code_part[5:])
                except ValueError:
                    raise ParseError(path, lineno, "expected 'type=<code> w=<f1,...>'") from None
                if not w_part.startswith("w="):
                    raise ParseError(path, lineno, "expected 'w=' after type code")
                rows[code] = _floats(w_part[2:], path, lineno)
            elif "=" in line:
                k, v = line.split("=", 1)
                head[k.strip()] = v.strip()
            else:
                raise ParseError(path, lineno, f"unrecognised line {line!r}")
    if "family" not in head or not rows:
        raise ParseError(path, 1, "weights file needs a family line and at least one type line")
    weights = np.array([rows[c] for c in sorted(rows)])
    transform = None
    if "transform_mean" in head:
        transform = FeatureTransform(
            np.array(_floats(head["transform_mean"], path, 0)),
            np.array(_floats(head["transform_scale"], path, 0)),
            np.array([bool(int(x)) for x in head["transform_degenerate"].split(",") if x]),
        )
    return Model(head["family"], weights, transform)


# key -> (section, attribute, parser)
def _BOOL(text: str) -> bool:
    return text.strip().lower() in ("1", "true", "yes", "on")


_TRAIN_KEYS = {
    "alpha": ("alpha", float),
    "lambda": ("lam", float),
    "strength": ("family", str),
    "edge_types": ("edge_types", str),
    "epsilon": ("eps", float),
    "max_power_iters": ("max_power_iters", int),
    "outer_tol": ("outer_tol", float),
    "max_outer_iters": ("max_outer_iters", int),
    "restarts": ("restarts", int),
    "seed": ("seed", int),
    "normalize": ("normalize", _BOOL),
    "threads": ("threads", int),
}
_SYNTH_KEYS = {
    "n": ("n", int),
    "edges_per_node": ("edges_per_node", int),
    "uniform_prob": ("uniform_prob", float),
    "true_weights": ("true_weights", lambda s: tuple(float(x) for x in s.split(","))),
    "synth_alpha": ("alpha", float),
    "k": ("k", int),
    "target_mode": ("target_mode", str),
    "noise": ("noise", float),
    "seed": ("seed", int),
    "two_hop_only": ("two_hop_only", _BOOL),
}
_OTHER_KEYS = {
    "loss": str,
    "loss_b": float,
    "loss_z": float,
    "min_common": int,
    "n_graphs": int,
    "common_friends_feature": _BOOL,
    "top_k": int,
}


def read_config(path) -> dict[str, str]:
    """``key=value`` lines; ``#`` starts a comment."""
    out: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ParseError(path, lineno, "expected key=value")
            k, v = (s.strip() for s in line.split("=", 1))
            if k not in _TRAIN_KEYS and k not in _SYNTH_KEYS and k not in _OTHER_KEYS:
                raise ParseError(path, lineno, f"unknown config key {k!r}")
            out[k] = v
    return out


def _convert(key, parser, value):
    try:
        return parser(value)
    except ValueError:
        raise ConfigError(f"bad value for {key}: {value!r}") from None


def train_config(values: dict[str, str]) -> TrainConfig:
    kwargs = {attr: _convert(k, parse, values[k]) for k, (attr, parse) in _TRAIN_KEYS.items() if k in values}
    kind = values.get("loss", "wmw")
    spec = LossSpec.default(kind) if kind in ("wmw", "squared", "huber") else None
    if spec is None:
        raise ConfigError(f"unknown loss {kind!r}")
    b = _convert("loss_b", float, values["loss_b"]) if "loss_b" in values else spec.b
    z = _convert("loss_z", float, values["loss_z"]) if "loss_z" in values else spec.z
    try:
        return TrainConfig(loss=LossSpec(kind, b, z), **kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def synth_config(values: dict[str, str]) -> SynthConfig:
    kwargs = {attr: _convert(k, parse, values[k]) for k, (attr, parse) in _SYNTH_KEYS.items() if k in values}
    try:
        return SynthConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def other(values: dict[str, str], key: str, default):
    return _convert(key, _OTHER_KEYS[key], values[key]) if key in values else default


def write_csv(path, header: list[str], rows: Iterable[Iterable]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(x) if isinstance(x, (float, np.floating)) else x for x in row])


def ensure_dir(path) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p
