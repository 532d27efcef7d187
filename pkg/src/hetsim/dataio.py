"""File formats: network bundles, similarity dumps, factors, points, heatmaps.

All text formats are UTF-8 CSV with a header row; the bundle schema is one
JSON document naming the per-type entity files and per-relation edge files.
Values are written with 17 significant digits so doubles round-trip exactly.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Mapping

import numpy as np

from .dense import SimilaritySet
from .lowrank import FactoredSimilarity
from .model import HeteroNetwork, WeightMatrix, build_network
from .synth import PointCloud

SCHEMA_NAME = "schema.json"
FACTORS_NAME = "factors.json"

_FMT = "%.17g"


class BundleError(ValueError):
    """Missing files, unknown ids, or malformed rows (reported with line numbers)."""


def _read_rows(path: Path, expected_header: list[str]):
    if not path.is_file():
        raise BundleError(f"missing file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise BundleError(f"{path}: empty file") from None
        if header != expected_header:
            raise BundleError(
                f"{path}:1: expected header {','.join(expected_header)!r}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(expected_header):
                raise BundleError(f"{path}:{lineno}: expected {len(expected_header)} fields")
            yield lineno, row


def save_network(
    network: HeteroNetwork, bundle_dir, weights: WeightMatrix | None = None
) -> None:
    """Write schema.json plus one entities CSV per type and one edges CSV per relation."""
    bundle = Path(bundle_dir)
    bundle.mkdir(parents=True, exist_ok=True)
    schema = {"types": [], "relations": []}
    for t in network.types:
        fname = f"entities_{t.name}.csv"
        schema["types"].append({"name": t.name, "entities_csv": fname})
        with open(bundle / fname, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["id"])
            for eid in t.ids:
                w.writerow([eid])
    for r in network.relations:
        fname = f"edges_{r.name}.csv"
        schema["relations"].append(
            {"name": r.name, "src": r.src.name, "dst": r.dst.name, "edges_csv": fname}
        )
        with open(bundle / fname, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["src_id", "dst_id"])
            for a, b in r.edge_ids():
                w.writerow([a, b])
    if weights is not None:
        rel_by_name = {r.name: r for r in network.relations}
        schema["weights"] = [
            {
                "type": t,
                "partner": (
                    rel_by_name[r].dst.name
                    if rel_by_name[r].src.name == t
                    else rel_by_name[r].src.name
                ),
                "relation": r,
                "weight": w,
            }
            for (t, r), w in sorted(weights.entries.items())
        ]
    with open(bundle / SCHEMA_NAME, "w", encoding="utf-8") as fh:
        json.dump(schema, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_network(bundle_dir) -> tuple[HeteroNetwork, WeightMatrix | None]:
    """Load a bundle; index order is file row order, so loading is order-stable."""
    bundle = Path(bundle_dir)
    schema_path = bundle / SCHEMA_NAME
    if not schema_path.is_file():
        raise BundleError(f"missing file: {schema_path}")
    with open(schema_path, encoding="utf-8") as fh:
        try:
            schema = json.load(fh)
        except json.JSONDecodeError as exc:
            raise BundleError(f"{schema_path}: invalid JSON ({exc})") from exc

    type_specs = []
    for tspec in schema.get("types", []):
        path = bundle / tspec["entities_csv"]
        ids, seen = [], set()
        for lineno, row in _read_rows(path, ["id"]):
            if row[0] in seen:
                raise BundleError(f"{path}:{lineno}: duplicate id {row[0]!r}")
            seen.add(row[0])
            ids.append(row[0])
        type_specs.append((tspec["name"], ids))
    id_sets = {name: set(ids) for name, ids in type_specs}

    relation_specs = []
    for rspec in schema.get("relations", []):
        path = bundle / rspec["edges_csv"]
        src, dst = rspec["src"], rspec["dst"]
        if src not in id_sets or dst not in id_sets:
            raise BundleError(f"{schema_path}: relation {rspec['name']!r} references unknown type")
        edges = []
        for lineno, row in _read_rows(path, ["src_id", "dst_id"]):
            if row[0] not in id_sets[src]:
                raise BundleError(f"{path}:{lineno}: unknown {src} id {row[0]!r}")
            if row[1] not in id_sets[dst]:
                raise BundleError(f"{path}:{lineno}: unknown {dst} id {row[1]!r}")
            edges.append((row[0], row[1]))
        relation_specs.append((rspec["name"], src, dst, edges))

    network = build_network(type_specs, relation_specs)
    weights = None
    if "weights" in schema:
        entries = {
            (e["type"], e["relation"]): float(e["weight"]) for e in schema["weights"]
        }
        weights = WeightMatrix(entries)
    return network, weights


def save_similarity(state: SimilaritySet, network: HeteroNetwork, path) -> None:
    """Dense similarity as CSV (upper triangle, diagonal included)."""
    for name, block in state.blocks.items():
        if not np.isfinite(block).all():
            raise ValueError(f"non-finite similarity values in type {name!r}")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["type", "row_id", "col_id", "value"])
        for t in network.types:
            block = state.blocks[t.name]
            for i in range(t.size):
                for j in range(i, t.size):
                    w.writerow([t.name, t.ids[i], t.ids[j], _FMT % block[i, j]])


def load_similarity(path, network: HeteroNetwork) -> SimilaritySet:
    blocks = {t.name: np.eye(t.size) for t in network.types}
    types = {t.name: t for t in network.types}
    p = Path(path)
    for lineno, row in _read_rows(p, ["type", "row_id", "col_id", "value"]):
        tname, rid, cid, value = row
        if tname not in types:
            raise BundleError(f"{p}:{lineno}: unknown type {tname!r}")
        t = types[tname]
        if rid not in t.index or cid not in t.index:
            raise BundleError(f"{p}:{lineno}: unknown entity id")
        i, j = t.index[rid], t.index[cid]
        try:
            v = float(value)
        except ValueError:
            raise BundleError(f"{p}:{lineno}: malformed value {value!r}") from None
        blocks[tname][i, j] = v
        blocks[tname][j, i] = v
    return SimilaritySet(blocks)


def read_similarity_block(path, type_name: str) -> tuple[list[str], np.ndarray]:
    """One block from a similarity CSV without the originating network.

    Ids are taken in first-appearance order, which matches entity file order
    for upper-triangle dumps.
    """
    p = Path(path)
    order: list[str] = []
    seen: dict[str, int] = {}
    entries: list[tuple[str, str, float]] = []
    for lineno, row in _read_rows(p, ["type", "row_id", "col_id", "value"]):
        if row[0] != type_name:
            continue
        for eid in (row[1], row[2]):
            if eid not in seen:
                seen[eid] = len(order)
                order.append(eid)
        try:
            entries.append((row[1], row[2], float(row[3])))
        except ValueError:
            raise BundleError(f"{p}:{lineno}: malformed value {row[3]!r}") from None
    if not order:
        raise BundleError(f"{p}: no rows for type {type_name!r}")
    n = len(order)
    block = np.eye(n)
    for rid, cid, v in entries:
        i, j = seen[rid], seen[cid]
        block[i, j] = v
        block[j, i] = v
    return order, block


def save_factors(
    states: Mapping[str, FactoredSimilarity],
    network: HeteroNetwork,
    out_dir,
    seed: int,
    iterations: int,
) -> None:
    """Factored similarity container: manifest plus coordinate CSVs per type."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {"seed": seed, "iterations": iterations, "types": []}
    for t in network.types:
        f = states[t.name]
        u_name, d_name = f"U_{t.name}.csv", f"D_{t.name}.csv"
        manifest["types"].append(
            {"name": t.name, "n": t.size, "rank": f.rank, "u_csv": u_name, "d_csv": d_name}
        )
        with open(out / u_name, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["row", "col", "value"])
            for i in range(f.n):
                for k in range(f.rank):
                    w.writerow([i, k, _FMT % f.U[i, k]])
        with open(out / d_name, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["k", "value"])
            for k in range(f.rank):
                w.writerow([k, _FMT % f.d[k]])
    with open(out / FACTORS_NAME, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_factors(in_dir) -> dict[str, FactoredSimilarity]:
    base = Path(in_dir)
    manifest_path = base / FACTORS_NAME
    if not manifest_path.is_file():
        raise BundleError(f"missing file: {manifest_path}")
    with open(manifest_path, encoding="utf-8") as fh:
        manifest = json.load(fh)
    states = {}
    for tspec in manifest["types"]:
        n, rank = int(tspec["n"]), int(tspec["rank"])
        u = np.zeros((n, rank))
        p = base / tspec["u_csv"]
        for lineno, row in _read_rows(p, ["row", "col", "value"]):
            try:
                u[int(row[0]), int(row[1])] = float(row[2])
            except (ValueError, IndexError):
                raise BundleError(f"{p}:{lineno}: malformed factor row") from None
        d = np.zeros(rank)
        p = base / tspec["d_csv"]
        for lineno, row in _read_rows(p, ["k", "value"]):
            try:
                d[int(row[0])] = float(row[1])
            except (ValueError, IndexError):
                raise BundleError(f"{p}:{lineno}: malformed factor row") from None
        states[tspec["name"]] = FactoredSimilarity(u, d)
    return states


def save_points(points: PointCloud, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["layer", "x", "y"])
        for k, layer in enumerate(points.layers):
            for x, y in layer:
                w.writerow([k, _FMT % x, _FMT % y])


def load_points(path) -> PointCloud:
    p = Path(path)
    layers: dict[int, list[tuple[float, float]]] = {}
    for lineno, row in _read_rows(p, ["layer", "x", "y"]):
        try:
            layers.setdefault(int(row[0]), []).append((float(row[1]), float(row[2])))
        except ValueError:
            raise BundleError(f"{p}:{lineno}: malformed point row") from None
    if not layers:
        raise BundleError(f"{p}: no points")
    ordered = [np.asarray(layers[k], dtype=float) for k in sorted(layers)]
    return PointCloud(tuple(ordered))


# Two-stop linear color ramp for heatmaps (low -> high).
_RAMP_LOW = (247, 251, 255)
_RAMP_HIGH = (8, 48, 107)


def export_heatmap(matrix: np.ndarray, path, cell: int = 8) -> None:
    """Matrix heatmap as SVG: row/column order preserved, linear value ramp.

    Values map linearly from the matrix minimum (light) to the maximum
    (dark); a constant matrix renders entirely light.
    """
    m = np.asarray(matrix, dtype=float)
    if m.ndim != 2:
        raise ValueError("heatmap input must be 2-D")
    if not np.isfinite(m).all():
        raise ValueError("heatmap input must be finite")
    lo, hi = float(m.min()), float(m.max())
    span = hi - lo
    rows, cols = m.shape
    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>\n'
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{cols * cell}" '
        f'height="{rows * cell}" viewBox="0 0 {cols * cell} {rows * cell}">\n'
        f"<!-- linear ramp: {lo:.6g} -> rgb{_RAMP_LOW}, {hi:.6g} -> rgb{_RAMP_HIGH} -->\n"
    ]
    for i in range(rows):
        for j in range(cols):
            frac = (m[i, j] - lo) / span if span > 0 else 0.0
            rgb = tuple(
                round(a + frac * (b - a)) for a, b in zip(_RAMP_LOW, _RAMP_HIGH)
            )
            parts.append(
                f'<rect x="{j * cell}" y="{i * cell}" width="{cell}" height="{cell}" '
                f'fill="rgb({rgb[0]},{rgb[1]},{rgb[2]})"/>\n'
            )
    parts.append("</svg>\n")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("".join(parts))
