"""Model container: a JSON manifest plus one binary blob of arrays.

A model directory holds ``manifest.json`` (format version, method tag,
configuration echo, achieved metrics, and array descriptors) and
``blobs.bin`` (the referenced arrays as raw little-endian bytes).
Keeping arrays binary makes save/load round trips bit-exact; the
manifest itself round-trips byte-identically apart from the creation
timestamp.
"""

from __future__ import annotations

import dataclasses
import json
import time
from pathlib import Path

import numpy as np

from .baselines import QuadraticModel
from .cpn import CoefficientNode, CpnModel, FitConfig, Metrics
from .polyfit import PolynomialModel

__all__ = ["save_model", "load_model", "MANIFEST_NAME", "BLOB_NAME"]

MANIFEST_NAME = "manifest.json"
BLOB_NAME = "blobs.bin"
FORMAT_VERSION = 1


class _BlobWriter:
    def __init__(self):
        self.chunks = []
        self.descriptors = []
        self.offset = 0

    def add(self, name: str, arr: np.ndarray):
        arr = np.ascontiguousarray(arr)
        dtype = "<i8" if arr.dtype.kind in "iub" else "<f8"
        raw = arr.astype(dtype).tobytes()
        self.descriptors.append({
            "name": name,
            "dtype": dtype,
            "shape": list(arr.shape),
            "offset": self.offset,
        })
        self.chunks.append(raw)
        self.offset += len(raw)


class _BlobReader:
    def __init__(self, raw: bytes, descriptors: list):
        self.raw = raw
        self.by_name = {d["name"]: d for d in descriptors}

    def get(self, name: str) -> np.ndarray:
        d = self.by_name[name]
        count = int(np.prod(d["shape"])) if d["shape"] else 1
        size = count * 8
        end = d["offset"] + size
        if end > len(self.raw):
            raise ValueError(f"array {name!r} extends past the end of the blob file")
        arr = np.frombuffer(self.raw[d["offset"]:end], dtype=d["dtype"])
        return arr.reshape(d["shape"]).copy()


def _config_dict(config: FitConfig | None) -> dict | None:
    return dataclasses.asdict(config) if config is not None else None


def _metrics_dict(metrics: Metrics | None) -> dict | None:
    if metrics is None:
        return None
    return {
        "re": metrics.re,
        "per_coefficient": {str(k): v for k, v in metrics.per_coefficient.items()},
        "n": metrics.n,
        "N": metrics.N,
        "n_comp": metrics.n_comp,
        "wall_time": metrics.wall_time,
    }


def _metrics_from_dict(d: dict | None) -> Metrics | None:
    if d is None:
        return None
    return Metrics(
        re=d["re"],
        per_coefficient={int(k): v for k, v in d["per_coefficient"].items()},
        n=d["n"], N=d["N"], n_comp=d["n_comp"], wall_time=d["wall_time"],
    )


def save_model(model, out_dir) -> None:
    """Write a fitted model (composed-polynomial, linear, or quadratic)
    to a directory."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    blob = _BlobWriter()
    manifest: dict = {"format_version": FORMAT_VERSION, "created": time.strftime("%Y-%m-%dT%H:%M:%S")}

    if isinstance(model, QuadraticModel):
        manifest["method"] = "quadratic"
        manifest["setting"] = model.setting
        manifest["ridge"] = model.ridge
        blob.add("offset", model.offset)
        blob.add("basis_lin", model.basis_lin)
        blob.add("basis_quad", model.basis_quad)
        blob.add("sqrt_weights", model.sqrt_weights)
    elif isinstance(model, CpnModel):
        manifest["method"] = model.method
        manifest["setting"] = model.setting
        manifest["config"] = _config_dict(model.config)
        manifest["achieved"] = _metrics_dict(model.achieved)
        manifest["node_order"] = [node.index for node in model.nodes]
        blob.add("offset", model.offset)
        blob.add("basis", model.basis)
        blob.add("sqrt_weights", model.sqrt_weights)
        blob.add("encoder_indices", np.array(model.encoder_indices, dtype=np.int64))
        for node in model.nodes:
            tag = f"node{node.index}"
            blob.add(f"{tag}/input_set", np.array(node.input_set, dtype=np.int64))
            idx = np.array(node.poly.indices, dtype=np.int64)
            if idx.size == 0:
                idx = idx.reshape(0, node.poly.dim)
            blob.add(f"{tag}/indices", idx)
            blob.add(f"{tag}/coeffs", node.poly.coeffs)
            blob.add(f"{tag}/box_lo", node.poly.box_lo)
            blob.add(f"{tag}/box_hi", node.poly.box_hi)
            blob.add(f"{tag}/constant_mask", node.poly.constant_mask.astype(np.int64))
            blob.add(f"{tag}/scalars", np.array([
                node.eps, node.gamma, node.omega, node.tilde_omega,
                node.bound_eps, node.bound_gamma,
            ]))
    else:
        raise TypeError(f"cannot serialize model of type {type(model).__name__}")

    manifest["arrays"] = blob.descriptors
    with open(out / BLOB_NAME, "wb") as fh:
        fh.write(b"".join(blob.chunks))
    with open(out / MANIFEST_NAME, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_model(model_dir):
    """Load a model directory written by :func:`save_model`."""
    path = Path(model_dir)
    with open(path / MANIFEST_NAME) as fh:
        manifest = json.load(fh)
    if manifest.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"unsupported container version {manifest.get('format_version')}")
    with open(path / BLOB_NAME, "rb") as fh:
        reader = _BlobReader(fh.read(), manifest["arrays"])

    method = manifest["method"]
    if method == "quadratic":
        return QuadraticModel(
            offset=reader.get("offset"),
            basis_lin=reader.get("basis_lin"),
            basis_quad=reader.get("basis_quad"),
            sqrt_weights=reader.get("sqrt_weights"),
            ridge=manifest["ridge"],
            setting=manifest["setting"],
        )
    if method not in ("cpn", "linear"):
        raise ValueError(f"unknown method tag {method!r}")

    cfg = FitConfig(**manifest["config"]) if manifest.get("config") else None
    nodes = []
    for i in manifest.get("node_order", []):
        tag = f"node{i}"
        scalars = reader.get(f"{tag}/scalars")
        box_lo = reader.get(f"{tag}/box_lo")
        indices = reader.get(f"{tag}/indices").astype(int)
        poly = PolynomialModel(
            dim=box_lo.size,
            indices=tuple(map(tuple, indices)),
            coeffs=reader.get(f"{tag}/coeffs"),
            box_lo=box_lo,
            box_hi=reader.get(f"{tag}/box_hi"),
            constant_mask=reader.get(f"{tag}/constant_mask").astype(bool),
        )
        nodes.append(CoefficientNode(
            index=int(i),
            input_set=tuple(int(v) for v in reader.get(f"{tag}/input_set")),
            poly=poly,
            eps=float(scalars[0]), gamma=float(scalars[1]),
            omega=float(scalars[2]), tilde_omega=float(scalars[3]),
            bound_eps=float(scalars[4]), bound_gamma=float(scalars[5]),
        ))
    return CpnModel(
        offset=reader.get("offset"),
        basis=reader.get("basis"),
        sqrt_weights=reader.get("sqrt_weights"),
        encoder_indices=tuple(int(v) for v in reader.get("encoder_indices")),
        nodes=tuple(nodes),
        setting=manifest["setting"],
        config=cfg,
        achieved=_metrics_from_dict(manifest.get("achieved")),
        method=method,
    )
