"""
Anisotropy maps over the field-direction sphere.

Calibration fits noise strengths to a measured reference T2, ``sweep``
evaluates T1 or T2 on a (theta, phi) grid, and ``census`` counts maxima,
minima and saddles of a finished map for the N_max + N_min = N_s + 2 check.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.cluster.hierarchy import DisjointSet
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .coherence import (
    NO_DECAY,
    background_rates,
    charge_models,
    combine_t2,
    dephasing_coefficients,
    gamma,
    solve_dephasing_times,
    total_t1_rates,
)
from .device import DeviceParams
from .exceptions import CalibrationError, InvalidArgumentError
from .geometry import FieldDirection, direction_from_angles, unit_vectors
from .models import (
    CalibrationRecord,
    CriticalPointCensus,
    EWJNModel,
    HyperfineModel,
    Quantity,
    ReferenceMeasurement,
    Resolution,
    dump_models,
    is_charge_model,
    model_label,
)
from .noise_sources import NoiseSourceFactory
from .spectra import SpectralShape

logger = logging.getLogger(__name__)

DEFAULT_FLAT_TOLERANCE = 1e-9
# pairs closer than this many (grid step)^2 value spans are grid noise
DEFAULT_PERSISTENCE = 0.25
# critical pairs closer than this many grid steps are lattice artifacts
DEFAULT_MERGE_RADIUS = 4.0
MAX_FLAGGED_CELLS = 1000


@dataclass(frozen=True)
class AnisotropyMap:
    """T1 or T2 over a theta-major (n_theta, n_phi) grid"""
    theta_grid: np.ndarray
    phi_grid: np.ndarray
    values: np.ndarray
    quantity: Quantity
    metadata: Dict[str, Any] = field(default_factory=dict)

    @property
    def resolution(self) -> Resolution:
        return Resolution(n_theta=len(self.theta_grid), n_phi=len(self.phi_grid))


def direction_grid(resolution: Resolution) -> Tuple[np.ndarray, np.ndarray]:
    theta = np.linspace(0.0, math.pi, resolution.n_theta)
    phi = np.arange(resolution.n_phi) * (2.0 * math.pi / resolution.n_phi)
    return theta, phi


# ---------------------------------------------------------------------------
# Point evaluations


def t2_at(
    direction: FieldDirection,
    models: Sequence[Any],
    device: DeviceParams,
    include_t1: bool = False,
    spectrum: Optional[SpectralShape] = None,
) -> float:
    """T2 from every listed model at one direction"""
    values = _t2_values(direction.unit_vector()[None, :], models, device, include_t1, spectrum)
    return float(values[0])


def _t2_values(
    vectors: np.ndarray,
    models: Sequence[Any],
    device: DeviceParams,
    include_t1: bool,
    spectrum: Optional[SpectralShape],
    grid_points: Optional[np.ndarray] = None,
) -> np.ndarray:
    coefficients, taus = dephasing_coefficients(vectors, models, device)
    if taus.size:
        tphi = solve_dephasing_times(coefficients, taus, spectrum, grid_points)
    else:
        tphi = np.full(vectors.shape[0], NO_DECAY)
    t1 = None
    if include_t1:
        with np.errstate(divide="ignore"):
            t1 = 1.0 / total_t1_rates(vectors, models, device, spectrum)
    return np.asarray(combine_t2(tphi, background_rates(vectors, models, device), t1))


# ---------------------------------------------------------------------------
# Calibration


def calibrate_many(
    fitted: Sequence[Any],
    device: DeviceParams,
    reference_dir: FieldDirection,
    target_t2: float,
    hyperfine_rate: float,
    background: Sequence[Any] = (),
    spectrum: Optional[SpectralShape] = None,
) -> Tuple[List[Any], List[CalibrationRecord]]:
    """
    Scale the strengths of ``fitted`` by one common factor so that T2 at the
    reference direction equals ``target_t2``.

    Gamma is linear in each strength, so the factor is exact:
    s = (1 - Gamma_fixed(T*)) / Gamma_fit(T*), with T* the charge-only
    dephasing time the target leaves after the background rates.
    """
    if target_t2 <= 0:
        raise CalibrationError(f"target T2 must be positive, got {target_t2}")
    if not fitted:
        raise CalibrationError("no model to calibrate")
    for model in fitted:
        if not is_charge_model(model):
            raise CalibrationError(f"{model_label(model)} has no fittable strength")

    n_ref = reference_dir.unit_vector()[None, :]
    ewjn = [m for m in background if isinstance(m, EWJNModel)]
    background_rate = hyperfine_rate + float(background_rates(n_ref, ewjn, device)[0])
    charge_rate = 1.0 / target_t2 - background_rate
    if charge_rate <= 0.0:
        raise CalibrationError(
            f"background dephasing rate {background_rate:.6g} /s already reaches the "
            f"target rate {1.0 / target_t2:.6g} /s"
        )
    t_star = 1.0 / charge_rate

    fixed = charge_models(background)
    gamma_fixed = gamma(t_star, reference_dir, fixed, device, spectrum) if fixed else 0.0
    if gamma_fixed >= 1.0:
        raise CalibrationError(
            f"fixed charge noise alone gives Gamma(T*) = {gamma_fixed:.6g} >= 1"
        )
    gamma_fit = gamma(t_star, reference_dir, fitted, device, spectrum)
    if gamma_fit <= 0.0:
        raise CalibrationError(
            "fitted models do not dephase the qubit at the reference direction"
        )
    scale = (1.0 - gamma_fixed) / gamma_fit

    results, records = [], []
    for model in fitted:
        block = NoiseSourceFactory.get_block(model.type)
        calibrated = block.scale_strength(model, scale).model_copy(update={"fit": False})
        results.append(calibrated)
        records.append(
            CalibrationRecord(
                model=model_label(model),
                parameter=block.strength_parameter,
                initial_value=block.strength(model),
                fitted_value=block.strength(calibrated),
                scale=scale,
                reference_theta_rad=reference_dir.theta,
                reference_phi_rad=reference_dir.phi,
                target_t2_s=target_t2,
                charge_tphi_s=t_star,
                background_rate_per_s=background_rate,
                fixed_charge_gamma=gamma_fixed,
                hyperfine_share=hyperfine_rate * target_t2,
                tau_s=model.tau_s,
            )
        )
        logger.info(
            "calibrated %s: %s = %.6g (scale %.6g, T* = %.6g s)",
            model_label(model), block.strength_parameter, block.strength(calibrated), scale, t_star,
        )
    return results, records


def calibrate_with_record(
    model: Any,
    device: DeviceParams,
    reference_dir: FieldDirection,
    target_t2: float,
    hyperfine_rate: float,
    background: Sequence[Any] = (),
    spectrum: Optional[SpectralShape] = None,
) -> Tuple[Any, CalibrationRecord]:
    models, records = calibrate_many(
        [model], device, reference_dir, target_t2, hyperfine_rate, background, spectrum
    )
    return models[0], records[0]


def calibrate(
    model: Any,
    device: DeviceParams,
    reference_dir: FieldDirection,
    target_t2: float,
    hyperfine_rate: float,
    background: Sequence[Any] = (),
    spectrum: Optional[SpectralShape] = None,
) -> Any:
    """Model with its strength fitted to the reference T2"""
    return calibrate_with_record(
        model, device, reference_dir, target_t2, hyperfine_rate, background, spectrum
    )[0]


def calibrate_models(
    models: Sequence[Any],
    device: DeviceParams,
    reference: Optional[ReferenceMeasurement],
    spectrum: Optional[SpectralShape] = None,
) -> Tuple[List[Any], List[CalibrationRecord]]:
    """Fit every model flagged ``fit`` in a run; the others are background"""
    to_fit = [m for m in models if getattr(m, "fit", False)]
    if not to_fit:
        return list(models), []
    if reference is None:
        raise CalibrationError("a reference measurement is needed to fit noise strengths")

    hyperfine = sum(m.rate_per_s for m in models if isinstance(m, HyperfineModel))
    background = [
        m for m in models if not getattr(m, "fit", False) and not isinstance(m, HyperfineModel)
    ]
    reference_dir = direction_from_angles(reference.theta_rad, reference.phi_rad)
    fitted, records = calibrate_many(
        to_fit, device, reference_dir, reference.t2_s, hyperfine, background, spectrum
    )
    replacements = iter(fitted)
    calibrated = [next(replacements) if getattr(m, "fit", False) else m for m in models]
    return calibrated, records


# ---------------------------------------------------------------------------
# Sweep


def sweep(
    quantity: Quantity,
    models: Sequence[Any],
    device: DeviceParams,
    resolution: Optional[Resolution] = None,
    include_t1_in_t2: bool = False,
    spectrum: Optional[SpectralShape] = None,
    calibration: Sequence[CalibrationRecord] = (),
) -> AnisotropyMap:
    """Evaluate T1 or T2 over the sphere; pole rows are computed once"""
    resolution = resolution or Resolution()
    quantity = Quantity(quantity)
    theta, phi = direction_grid(resolution)
    n_theta, n_phi = len(theta), len(phi)

    tt, pp = np.meshgrid(theta[1:-1], phi, indexing="ij")
    points = np.concatenate(
        [np.array([[0.0, 0.0], [math.pi, 0.0]]), np.stack([tt.ravel(), pp.ravel()], axis=1)]
    )
    vectors = unit_vectors(points[:, 0], points[:, 1])

    if quantity is Quantity.T1:
        with np.errstate(divide="ignore"):
            flat = 1.0 / total_t1_rates(vectors, models, device, spectrum)
    else:
        flat = _t2_values(vectors, models, device, include_t1_in_t2, spectrum, points)

    values = np.empty((n_theta, n_phi))
    values[0, :] = flat[0]
    values[-1, :] = flat[1]
    values[1:-1, :] = flat[2:].reshape(n_theta - 2, n_phi)

    taus = sorted({m.tau_s for m in charge_models(models)})
    metadata = {
        "quantity": quantity.value,
        "resolution": str(resolution),
        "device_sha256": device.config_hash(),
        "models": dump_models(list(models)),
        "tau_s": taus,
        "include_t1_in_t2": include_t1_in_t2,
        "calibration": [record.model_dump() for record in calibration],
    }
    logger.info("swept %s map at %s", quantity.value, resolution)
    return AnisotropyMap(theta, phi, values, quantity, metadata)


# ---------------------------------------------------------------------------
# Topology


@dataclass(frozen=True)
class _SphereMesh:
    """Triangulated (theta, phi) grid with each pole collapsed to one vertex"""
    values: np.ndarray  # (V,)
    cells: List[Tuple[int, int]]  # grid index of each vertex
    edges: np.ndarray  # (E, 2), every edge once
    neighbors: List[np.ndarray]


def _sphere_mesh(grid: np.ndarray) -> _SphereMesh:
    """
    Quads between interior rows are split along one diagonal; the diagonal
    flips at the equator so the mesh maps onto itself under the antipode.
    Each pole is joined to every vertex of the adjacent row.
    """
    n_theta, n_phi = grid.shape
    interior = 2 + np.arange((n_theta - 2) * n_phi).reshape(n_theta - 2, n_phi)
    east = np.roll(interior, -1, axis=1)

    pairs = [
        (interior, east),
        (interior[:-1], interior[1:]),
        (np.zeros(n_phi, dtype=int), interior[0]),
        (np.ones(n_phi, dtype=int), interior[-1]),
    ]
    for band in range(n_theta - 3):
        if band + 1 < (n_theta - 1) / 2:
            pairs.append((interior[band], east[band + 1]))
        else:
            pairs.append((east[band], interior[band + 1]))
    edges = np.stack(
        [np.concatenate([a.ravel() for a, _ in pairs]), np.concatenate([b.ravel() for _, b in pairs])],
        axis=1,
    )
    edges = np.unique(np.sort(edges[edges[:, 0] != edges[:, 1]], axis=1), axis=0)

    n = 2 + interior.size
    values = np.empty(n)
    values[0] = grid[0, 0]
    values[1] = grid[-1, 0]
    values[2:] = grid[1:-1, :].ravel()
    cells = [(0, 0), (n_theta - 1, 0)] + [
        (i, j) for i in range(1, n_theta - 1) for j in range(n_phi)
    ]

    adjacency = coo_matrix(
        (np.ones(2 * len(edges)), (np.r_[edges[:, 0], edges[:, 1]], np.r_[edges[:, 1], edges[:, 0]])),
        shape=(n, n),
    ).tocsr()
    neighbors = [adjacency.indices[adjacency.indptr[v]:adjacency.indptr[v + 1]] for v in range(n)]
    return _SphereMesh(values, cells, edges, neighbors)


def _persistence_pairs(
    mesh: _SphereMesh, descending: bool
) -> Tuple[int, List[Tuple[int, int, float]]]:
    """
    Union-find sweep over the sublevel (or superlevel) sets.

    Returns the vertex of the global extremum and (birth, death, persistence)
    for every other component: when a vertex joins several components, all
    but the one born first die there.
    """
    n = mesh.values.size
    index = np.arange(n)
    if descending:
        signed = -mesh.values
        order = np.lexsort((-index, signed))
    else:
        signed = mesh.values
        order = np.lexsort((index, signed))
    rank = np.empty(n, dtype=int)
    rank[order] = index
    level = signed.tolist()

    seen = np.zeros(n, dtype=bool)
    components = DisjointSet()
    oldest: Dict[int, int] = {}
    pairs: List[Tuple[int, int, float]] = []
    for v in order.tolist():
        ring = mesh.neighbors[v]
        births = {}
        for u in ring[seen[ring]].tolist():
            root = components[u]
            births[root] = oldest[root]
        components.add(v)
        seen[v] = True
        if not births:
            oldest[v] = v
            continue
        survivor = min(births.values(), key=lambda b: rank[b])
        for birth in births.values():
            if birth != survivor:
                persistence = level[v] - level[birth]
                # inf - inf: both ends are no-decay entries
                pairs.append((birth, v, 0.0 if math.isnan(persistence) else persistence))
        for root in births:
            components.merge(root, v)
        oldest[components[v]] = survivor
    return int(order[0]), pairs


def _plateaus(mesh: _SphereMesh, tolerance: float, span: float) -> Tuple[int, np.ndarray]:
    """Number of flat regions and the vertices on them"""
    a = mesh.values[mesh.edges[:, 0]]
    b = mesh.values[mesh.edges[:, 1]]
    with np.errstate(invalid="ignore"):
        gap = np.abs(a - b)
    flat = np.isnan(gap) | (gap <= tolerance * span)
    n = mesh.values.size
    graph = coo_matrix(
        (np.ones(int(flat.sum())), (mesh.edges[flat, 0], mesh.edges[flat, 1])), shape=(n, n)
    )
    n_groups, labels = connected_components(graph, directed=False)
    sizes = np.bincount(labels, minlength=n_groups)
    return int(np.count_nonzero(sizes > 1)), np.flatnonzero(sizes[labels] > 1)


def _grid_step(n_theta: int, n_phi: int) -> float:
    return max(math.pi / (n_theta - 1), 2.0 * math.pi / n_phi)


def _raw_census(
    grid: np.ndarray,
    theta: np.ndarray,
    phi: np.ndarray,
    tolerance: float,
    persistence: float,
    merge_radius: float,
) -> Tuple[CriticalPointCensus, List[Tuple[int, int]]]:
    mesh = _sphere_mesh(grid)
    finite = mesh.values[np.isfinite(mesh.values)]
    span = float(finite.max() - finite.min()) if finite.size else 0.0
    step = _grid_step(*grid.shape)
    threshold = persistence * step**2 * span
    rows, cols = (np.array(index) for index in zip(*mesh.cells))
    points = unit_vectors(theta[rows], phi[cols])
    min_separation = math.cos(merge_radius * step)

    def resolved(pair: Tuple[int, int, float]) -> bool:
        birth, death, height = pair
        return height > threshold and float(points[birth] @ points[death]) < min_separation

    lowest, sub_pairs = _persistence_pairs(mesh, descending=False)
    highest, super_pairs = _persistence_pairs(mesh, descending=True)
    kept_sub = [p for p in sub_pairs if resolved(p)]
    kept_super = [p for p in super_pairs if resolved(p)]
    logger.debug(
        "census cancelled %d of %d pairs (persistence %.3g, radius %.3g rad)",
        len(sub_pairs) + len(super_pairs) - len(kept_sub) - len(kept_super),
        len(sub_pairs) + len(super_pairs),
        threshold,
        merge_radius * step,
    )

    # a merged extremum far from every kept critical point sits on a ridge
    strays = [
        birth for birth, death, height in sub_pairs + super_pairs
        if height > threshold and not resolved((birth, death, height))
    ]
    ridge: List[int] = []
    if strays:
        anchors = [lowest, highest] + [v for birth, death, _ in kept_sub + kept_super for v in (birth, death)]
        nearest = np.max(points[strays] @ points[anchors].T, axis=1)
        reach = math.cos(min(2.0 * merge_radius * step, math.pi))
        ridge = [v for v, dot in zip(strays, nearest.tolist()) if dot < reach]

    def located(vertices: Sequence[int]) -> List[Tuple[float, float]]:
        out = []
        for v in vertices:
            i, j = mesh.cells[v]
            out.append((float(theta[i]), float(phi[j])))
        return sorted(out)

    saddle_vertices = [death for _, death, _ in kept_sub + kept_super]
    n_plateaus, flat_vertices = _plateaus(mesh, tolerance, span)
    reasons = []
    if n_plateaus:
        reasons.append(
            f"{n_plateaus} plateau regions ({flat_vertices.size} grid points) within the flat tolerance"
        )
    if ridge:
        reasons.append(f"{len(ridge)} extrema strung along a ridge away from any isolated critical point")
    flagged = [mesh.cells[v] for v in flat_vertices.tolist() + ridge]
    # an extremum on a plateau has no single location
    on_plateau = set(flat_vertices.tolist())
    maxima = [v for v in [highest] + [birth for birth, _, _ in kept_super] if v not in on_plateau]
    minima = [v for v in [lowest] + [birth for birth, _, _ in kept_sub] if v not in on_plateau]
    result = CriticalPointCensus(
        n_max=1 + len(kept_super),
        n_min=1 + len(kept_sub),
        n_saddle=len(saddle_vertices),
        degenerate=bool(n_plateaus or ridge),
        flagged_cells=flagged[:MAX_FLAGGED_CELLS],
        reasons=reasons,
        maxima=located(maxima),
        minima=located(minima),
        saddles=located(saddle_vertices),
    )
    return result, [mesh.cells[v] for v in saddle_vertices]


def _coarse_grid(amap: AnisotropyMap) -> Optional[Tuple[np.ndarray, np.ndarray, np.ndarray]]:
    n_theta, n_phi = amap.values.shape
    row_step = 2 if (n_theta - 1) % 2 == 0 else 1
    col_step = 2 if n_phi % 2 == 0 else 1
    if row_step == col_step == 1:
        return None
    theta, phi = amap.theta_grid[::row_step], amap.phi_grid[::col_step]
    if len(theta) < 3 or len(phi) < 4:
        return None
    return amap.values[::row_step, ::col_step], theta, phi


def census(
    amap: AnisotropyMap,
    flat_tolerance: float = DEFAULT_FLAT_TOLERANCE,
    persistence: float = DEFAULT_PERSISTENCE,
    merge_radius: float = DEFAULT_MERGE_RADIUS,
) -> CriticalPointCensus:
    """
    Discrete critical-point census of a map.

    The grid is triangulated (phi periodic, each pole one vertex) and swept
    by value with a union-find: minima are where sublevel components are
    born, and the vertices where two of them merge are saddles; the same
    sweep from the top finds maxima and the remaining saddles. A
    minimum/saddle or maximum/saddle pair is grid noise and dropped when its
    values differ by no more than ``persistence`` * (grid step)^2 * (value
    span), or when its two vertices lie within ``merge_radius`` grid steps
    of each other. Counting this way always gives N_max + N_min = N_s + 2.

    The census is degenerate when neighboring values agree within
    ``flat_tolerance`` of the span (a plateau). A ridge of extrema shows up
    either as merged extrema lying far from every kept critical point or as
    counts that change on the half-resolution subgrid; both also set the flag.
    """
    result, saddle_cells = _raw_census(
        amap.values, amap.theta_grid, amap.phi_grid, flat_tolerance, persistence, merge_radius
    )
    coarse = _coarse_grid(amap)
    if coarse is not None:
        coarse_result, _ = _raw_census(*coarse, flat_tolerance, persistence, merge_radius)
        if coarse_result.counts != result.counts:
            result.degenerate = True
            result.reasons.append(
                f"counts {result.counts} change to {coarse_result.counts} at half resolution"
            )
            room = MAX_FLAGGED_CELLS - len(result.flagged_cells)
            result.flagged_cells.extend(saddle_cells[:max(room, 0)])
    if result.degenerate:
        logger.warning("degenerate critical-point census: %s", "; ".join(result.reasons))
    return result


def euler_check(result: CriticalPointCensus) -> bool:
    """N_max + N_min = N_s + 2, or not applicable for a degenerate census"""
    if result.degenerate:
        return True
    return result.n_max + result.n_min == result.n_saddle + 2


def extremal_ratio(amap: AnisotropyMap) -> float:
    """max/min over the finite entries"""
    finite = np.isfinite(amap.values)
    excluded = int(finite.size - np.count_nonzero(finite))
    if excluded:
        logger.warning("extremal ratio excludes %d no-decay entries", excluded)
    if not finite.any():
        raise InvalidArgumentError("map has no finite values")
    values = amap.values[finite]
    return float(values.max() / values.min())


def argmin_locations(
    amap: AnisotropyMap, flat_tolerance: float = DEFAULT_FLAT_TOLERANCE
) -> List[Tuple[float, float]]:
    """(theta, phi) of every minimum found by the census"""
    return list(census(amap, flat_tolerance).minima)


def antipodal_mismatch(amap: AnisotropyMap) -> float:
    """Largest relative gap between value(theta, phi) and value(pi - theta, phi + pi)"""
    n_theta, n_phi = amap.values.shape
    if n_phi % 2:
        raise InvalidArgumentError("antipodal comparison needs an even n_phi")
    mirrored = np.roll(amap.values[::-1, :], -n_phi // 2, axis=1)
    a, b = amap.values, mirrored
    both_inf = np.isinf(a) & np.isinf(b)
    with np.errstate(invalid="ignore"):
        gap = np.abs(a - b) / np.maximum(np.abs(a), np.abs(b))
    gap = np.where(both_inf, 0.0, gap)
    return float(np.max(gap))
