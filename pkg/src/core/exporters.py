"""Map files: CSV, JSON and a grayscale PPM (P5) heatmap."""

import csv
import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Union

import numpy as np

from .anisotropy import AnisotropyMap
from .exceptions import MapFormatError
from .models import CriticalPointCensus, ExportFormat, Quantity

logger = logging.getLogger(__name__)

CSV_HEADER = ["theta_rad", "phi_rad", "value_s"]


def _fmt(value: float) -> str:
    return "inf" if math.isinf(value) else format(value, ".17g")


def write_csv(amap: AnisotropyMap, path: Union[str, Path]) -> Path:
    """theta-major rows, full double precision"""
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for i, theta in enumerate(amap.theta_grid):
            for j, phi in enumerate(amap.phi_grid):
                writer.writerow([_fmt(theta), _fmt(phi), _fmt(amap.values[i, j])])
    return path


def map_document(amap: AnisotropyMap, census: Optional[CriticalPointCensus] = None) -> Dict[str, Any]:
    metadata = dict(amap.metadata)
    if census is not None:
        metadata["census"] = census.model_dump(mode="json")
    return {
        "quantity": amap.quantity.value,
        "theta_rad": amap.theta_grid.tolist(),
        "phi_rad": amap.phi_grid.tolist(),
        "values_s": [[None if math.isinf(v) else float(v) for v in row] for row in amap.values],
        "metadata": metadata,
    }


def write_json(
    amap: AnisotropyMap, path: Union[str, Path], census: Optional[CriticalPointCensus] = None
) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(map_document(amap, census), f, indent=2)
        f.write("\n")
    return path


def write_ppm(amap: AnisotropyMap, path: Union[str, Path]) -> Path:
    """Binary P5 graymap, one pixel per grid point; no-decay entries are white"""
    path = Path(path)
    values = amap.values
    finite = np.isfinite(values)
    pixels = np.full(values.shape, 255, dtype=np.uint8)
    if finite.any():
        lo, hi = values[finite].min(), values[finite].max()
        span = hi - lo
        scaled = np.zeros(values.shape) if span == 0 else (values - lo) / span
        pixels[finite] = np.rint(scaled[finite] * 255).astype(np.uint8)
    height, width = values.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{width} {height}\n255\n".encode("ascii"))
        f.write(pixels.tobytes())
    return path


def export_map(
    amap: AnisotropyMap,
    directory: Union[str, Path],
    formats: Iterable[Union[ExportFormat, str]],
    stem: Optional[str] = None,
    census: Optional[CriticalPointCensus] = None,
) -> List[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    stem = stem or f"{amap.quantity.value}_map"
    written = []
    for fmt in formats:
        fmt = ExportFormat(fmt)
        target = directory / f"{stem}.{fmt.value}"
        if fmt is ExportFormat.CSV:
            written.append(write_csv(amap, target))
        elif fmt is ExportFormat.JSON:
            written.append(write_json(amap, target, census))
        else:
            written.append(write_ppm(amap, target))
        logger.info("wrote %s", target)
    return written


def _parse_float(text: str, where: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise MapFormatError(f"{where}: '{text}' is not a number")


def _load_csv(path: Path, quantity: Quantity) -> AnisotropyMap:
    with open(path, newline="", encoding="utf-8") as f:
        rows = list(csv.reader(f))
    if not rows or [c.strip() for c in rows[0]] != CSV_HEADER:
        raise MapFormatError(f"{path}: header must be {','.join(CSV_HEADER)}")
    body = [r for r in rows[1:] if r]
    if any(len(r) != 3 for r in body):
        raise MapFormatError(f"{path}: every row needs three columns")
    data = np.array(
        [[_parse_float(c, f"{path} row {n + 2}") for c in r] for n, r in enumerate(body)]
    )
    if data.size == 0:
        raise MapFormatError(f"{path}: no data rows")
    theta = np.array(list(dict.fromkeys(data[:, 0].tolist())))
    n_theta = len(theta)
    if len(data) % n_theta:
        raise MapFormatError(f"{path}: rows do not form a theta-major grid")
    n_phi = len(data) // n_theta
    grid = data.reshape(n_theta, n_phi, 3)
    phi = grid[0, :, 1]
    if not (np.all(grid[:, :, 0] == theta[:, None]) and np.all(grid[:, :, 1] == phi[None, :])):
        raise MapFormatError(f"{path}: rows do not form a theta-major grid")
    return AnisotropyMap(theta, phi, grid[:, :, 2].copy(), quantity, {"source": str(path)})


def _load_json(path: Path) -> AnisotropyMap:
    try:
        document = json.loads(path.read_text(encoding="utf-8"))
        theta = np.asarray(document["theta_rad"], dtype=float)
        phi = np.asarray(document["phi_rad"], dtype=float)
        values = np.array(
            [[math.inf if v is None else v for v in row] for row in document["values_s"]],
            dtype=float,
        )
        quantity = Quantity(document.get("quantity", Quantity.T2.value))
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
        raise MapFormatError(f"{path}: {e}")
    if values.shape != (len(theta), len(phi)):
        raise MapFormatError(
            f"{path}: values shape {values.shape} does not match grids ({len(theta)}, {len(phi)})"
        )
    return AnisotropyMap(theta, phi, values, quantity, document.get("metadata", {}))


def load_map(path: Union[str, Path], quantity: Quantity = Quantity.T2) -> AnisotropyMap:
    """Read a map written by ``write_csv`` or ``write_json``"""
    path = Path(path)
    if not path.exists():
        raise MapFormatError(f"{path}: no such file")
    if path.suffix.lower() == ".json":
        return _load_json(path)
    return _load_csv(path, quantity)
