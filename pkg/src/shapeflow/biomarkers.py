"""Quantities of interest and statistics for generated geometries.

Scalar-sample statistics (Monte Carlo estimates, Wasserstein-1
comparisons), batch shape-variability statistics, the three-element
Windkessel outlet model, and the hemodynamic wall/section biomarkers
(wall shear stress, oscillatory shear index, secondary flow degree,
normalized flow displacement, pressure and outflow quantities).

Undefined biomarkers (0/0 situations) are returned as NaN, never silently
zeroed; the aggregation helpers skip NaNs and report coverage counts.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .geometry import CrossSection, _HexLocator, interpolate_field, volume_mean
from .meshes import HexMesh, NodalField
from .registration import chamfer

__all__ = [
    "THIRD_CYCLE_WINDOW",
    "TimeSeries",
    "WindkesselParams",
    "BatchStats",
    "wasserstein1",
    "monte_carlo_estimate",
    "pairwise_chamfer_mm",
    "batch_shape_stats",
    "windkessel_step",
    "wall_shear_stress",
    "osi",
    "sfd",
    "nfd",
    "pressure_qois",
    "nanmean_with_coverage",
]


# common evaluation window for oscillatory indices: the third simulated
# cardiac cycle of a 1 s period
THIRD_CYCLE_WINDOW = (2.0, 3.0)


@dataclass(frozen=True)
class TimeSeries:
    """Strictly increasing sample times with per-time values."""

    times: np.ndarray
    values: np.ndarray
    units: str = "dimensionless"

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.ndim != 1 or len(t) != len(v):
            raise ValueError("times and values must have equal leading length")
        if np.any(np.diff(t) <= 0):
            raise ValueError("times must be strictly increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class WindkesselParams:
    """Three-element (RCR) Windkessel outlet model parameters."""

    r_proximal: float
    r_distal: float
    capacitance: float
    pi0: float = 0.0

    def __post_init__(self):
        if self.r_distal <= 0 or self.capacitance <= 0 or self.r_proximal < 0:
            raise ValueError("resistances and capacitance must be positive")


@dataclass
class BatchStats:
    """Shape-variability summary of a batch of generated geometries."""

    mean_pairwise_chamfer: float
    rms_vertex_std: float | None
    qoi_stats: dict = field(default_factory=dict)


# --- scalar statistics ----------------------------------------------------------

def wasserstein1(samples_a, samples_b) -> float:
    """Exact W1 between two empirical distributions of scalars.

    Piecewise-constant quantile-function integration; for equal sample
    sizes this reduces to the mean absolute difference of the sorted
    samples.
    """
    a = np.sort(np.asarray(samples_a, dtype=float).ravel())
    b = np.sort(np.asarray(samples_b, dtype=float).ravel())
    if len(a) == 0 or len(b) == 0:
        raise ValueError("wasserstein1 needs nonempty samples")
    if len(a) == len(b):
        return float(np.abs(a - b).mean())
    # merge the quantile breakpoints i/n and j/m; both quantile functions
    # are constant on each merged interval
    qa = np.arange(1, len(a) + 1) / len(a)
    qb = np.arange(1, len(b) + 1) / len(b)
    q = np.union1d(qa, qb)
    widths = np.diff(np.concatenate([[0.0], q]))
    # value of the quantile function on (q_{k-1}, q_k]: index by midpoint
    mids = q - widths / 2.0
    ia = np.minimum((mids * len(a)).astype(int), len(a) - 1)
    ib = np.minimum((mids * len(b)).astype(int), len(b) - 1)
    return float(np.sum(widths * np.abs(a[ia] - b[ib])))


def monte_carlo_estimate(qoi_values):
    """Mean, (n-1)-denominator std, and standard error of scalar samples."""
    x = np.asarray(qoi_values, dtype=float).ravel()
    if len(x) == 0:
        raise ValueError("monte_carlo_estimate needs at least one sample")
    mean = float(x.mean())
    if len(x) < 2:
        return mean, float("nan"), float("nan")
    std = float(x.std(ddof=1))
    return mean, std, std / np.sqrt(len(x))


def nanmean_with_coverage(values):
    """Mean over defined (non-NaN) entries plus the coverage count."""
    x = np.asarray(values, dtype=float).ravel()
    good = np.isfinite(x)
    if not np.any(good):
        return float("nan"), 0
    return float(x[good].mean()), int(good.sum())


# --- batch shape statistics -------------------------------------------------------

def pairwise_chamfer_mm(cloud_a, cloud_b) -> float:
    """Chamfer distance reported on the millimeter scale.

    The squared-distance Chamfer sum is divided by the total number of
    nearest-neighbor terms (|A| + |B|) and rooted, i.e. the RMS
    nearest-neighbor distance pooled over both directions.
    """
    a = np.atleast_2d(np.asarray(cloud_a, dtype=float))
    b = np.atleast_2d(np.asarray(cloud_b, dtype=float))
    return float(np.sqrt(chamfer(a, b) / (len(a) + len(b))))


def batch_shape_stats(meshes, allow_missing_correspondence: bool = False,
                      qoi_samples: dict | None = None) -> BatchStats:
    """Variability statistics of a batch of shapes.

    ``meshes`` are SurfaceMesh instances or raw ``(n, 3)`` point clouds.
    The mean pairwise Chamfer (millimeter form, see
    :func:`pairwise_chamfer_mm`) is always computed; the RMS
    vertex-coordinate sample standard deviation needs vertex
    correspondence (identical vertex counts) and raises without it unless
    ``allow_missing_correspondence`` is set.  ``qoi_samples`` maps QoI
    names to scalar sample arrays summarized via
    :func:`monte_carlo_estimate`.
    """
    clouds = [np.atleast_2d(np.asarray(getattr(m, "vertices", m), dtype=float))
              for m in meshes]
    if len(clouds) < 2:
        raise ValueError("batch statistics need at least two shapes")
    pair_values = []
    for i in range(len(clouds)):
        for j in range(i + 1, len(clouds)):
            pair_values.append(pairwise_chamfer_mm(clouds[i], clouds[j]))
    d_mean = float(np.mean(pair_values))

    sizes = {len(c) for c in clouds}
    if len(sizes) == 1:
        stack = np.stack(clouds)  # (m, n, 3)
        per_coord_std = stack.std(axis=0, ddof=1)  # (n, 3)
        rms_std = float(np.sqrt((per_coord_std ** 2).mean()))
    elif allow_missing_correspondence:
        rms_std = None
    else:
        raise ValueError(
            "vertex-wise std needs identical vertex counts; pass "
            "allow_missing_correspondence=True to skip it"
        )
    qoi_stats = {}
    for name, samples in (qoi_samples or {}).items():
        qoi_stats[name] = monte_carlo_estimate(samples)
    return BatchStats(mean_pairwise_chamfer=d_mean, rms_vertex_std=rms_std,
                      qoi_stats=qoi_stats)


# --- Windkessel -------------------------------------------------------------------

def windkessel_step(params: WindkesselParams, flow: TimeSeries) -> TimeSeries:
    """Outlet pressure from a flow-rate series via the RCR model.

    Integrates ``C dpi/dt + pi/R_d = Q`` with the exact exponential
    integrator per interval, treating ``Q`` as piecewise linear, then
    returns ``P = R_p Q + pi``.  Exact for piecewise-linear flow rates.
    """
    t = flow.times
    q = np.asarray(flow.values, dtype=float).ravel()
    tau = params.r_distal * params.capacitance
    pi = np.empty(len(t))
    pi[0] = params.pi0
    for k in range(len(t) - 1):
        dt = t[k + 1] - t[k]
        decay = np.exp(-dt / tau)
        slope = (q[k + 1] - q[k]) / dt
        integral = (q[k] * tau * (1.0 - decay)
                    + slope * (tau * dt - tau * tau * (1.0 - decay)))
        pi[k + 1] = pi[k] * decay + integral / params.capacitance
    pressure = params.r_proximal * q + pi
    return TimeSeries(t, pressure, units="Pa")


# --- wall shear stress ---------------------------------------------------------------

def wall_shear_stress(volume_field: NodalField, surface_points, normals,
                      viscosity: float, probe_spacing=None):
    """Wall shear stress vectors at boundary points.

    The tangential velocity ``u - (u.n) n`` is sampled at the wall and at
    inward offsets ``x - h n`` and ``x - 2 h n``; the normal derivative
    uses the one-sided second-order stencil (first-order fallback when
    only one probe lies inside the mesh), multiplied by the viscosity
    coefficient.  Homogeneous shear over a plane yields stress opposite
    to the flow direction.

    ``probe_spacing`` is a scalar or per-point array; by default half the
    local boundary-face edge length.  Returns ``(tau (k, 3), valid mask)``
    -- points whose first probe leaves the mesh are flagged invalid and
    carry NaN.
    """
    mesh = volume_field.mesh
    if not isinstance(mesh, HexMesh) or not volume_field.is_vector:
        raise TypeError("wall shear stress needs a vector field on a HexMesh")
    pts = np.atleast_2d(np.asarray(surface_points, dtype=float))
    nrm = np.atleast_2d(np.asarray(normals, dtype=float))
    nrm = nrm / np.linalg.norm(nrm, axis=1, keepdims=True)
    if probe_spacing is None:
        h = _local_boundary_edge(mesh, pts) * 0.5
    else:
        h = np.broadcast_to(np.asarray(probe_spacing, dtype=float),
                            (len(pts),)).copy()

    locator = _HexLocator(mesh)

    def tangential(points):
        vals, inside = interpolate_field(volume_field, points, locator)
        tang = vals - np.einsum("kd,kd->k", vals, nrm)[:, None] * nrm
        return tang, inside

    u0, _ = tangential(pts)  # wall value from the field (no-slip not assumed)
    u1, in1 = tangential(pts - h[:, None] * nrm)
    u2, in2 = tangential(pts - 2.0 * h[:, None] * nrm)

    tau = np.full_like(u0, np.nan)
    valid = in1.copy()
    second = in1 & in2
    first = in1 & ~in2
    hh = h[:, None]
    # d/dn with n the outward normal; probes step inward
    tau[second] = viscosity * (3.0 * u0[second] - 4.0 * u1[second]
                               + u2[second]) / (2.0 * hh[second])
    tau[first] = viscosity * (u0[first] - u1[first]) / hh[first]
    return tau, valid


def _local_boundary_edge(mesh: HexMesh, points) -> np.ndarray:
    faces = mesh.boundary_faces
    centers = mesh.vertices[faces].mean(axis=1)
    edges = np.linalg.norm(
        mesh.vertices[faces] - mesh.vertices[np.roll(faces, -1, axis=1)],
        axis=2,
    ).mean(axis=1)
    _, idx = cKDTree(centers).query(points)
    return edges[idx]


# --- time-window biomarkers -----------------------------------------------------------

def _window_slice(times, values, window):
    if window is None:
        return times, values
    ta, tb = window
    if ta < times[0] - 1e-12 or tb > times[-1] + 1e-12 or tb <= ta:
        raise ValueError("window must lie inside the sampled time range")
    inner = (times > ta) & (times < tb)
    t = np.concatenate([[ta], times[inner], [tb]])
    va = _interp_time(times, values, ta)
    vb = _interp_time(times, values, tb)
    v = np.concatenate([va[None], values[inner], vb[None]], axis=0)
    return t, v


def _interp_time(times, values, t):
    i = np.searchsorted(times, t)
    if i == 0:
        return values[0]
    if i >= len(times):
        return values[-1]
    w = (t - times[i - 1]) / (times[i] - times[i - 1])
    return (1.0 - w) * values[i - 1] + w * values[i]


def osi(series: TimeSeries, window=None):
    """Oscillatory shear index per point, in [0, 1/2].

    ``series.values`` has shape (T, 3) for one point or (T, k, 3).
    Trapezoidal integrals of the stress vector and of its magnitude over
    the window (default: the whole series).  Points with zero
    magnitude integral are undefined and return NaN.
    """
    values = series.values
    squeeze = values.ndim == 2
    if squeeze:
        values = values[:, None, :]
    t, v = _window_slice(series.times, values, window)
    vec = np.trapezoid(v, t, axis=0)  # (k, 3)
    mag = np.trapezoid(np.linalg.norm(v, axis=2), t, axis=0)  # (k,)
    out = np.full(len(mag), np.nan)
    ok = mag > 0
    ratio = np.linalg.norm(vec[ok], axis=1) / mag[ok]
    # |integral tau| <= integral |tau| mathematically; quadrature round-off
    # can leave the ratio an ulp short of 1 for constant-direction stress,
    # so values inside the round-off band snap to the exact bound
    ratio = np.where(1.0 - ratio <= 1e-13, 1.0, ratio)
    out[ok] = np.clip(0.5 * (1.0 - ratio), 0.0, 0.5)
    return float(out[0]) if squeeze else out


def sfd(section: CrossSection) -> float:
    """Secondary flow degree: tangential over normal flow of a section."""
    if section.values is None or section.values.ndim != 2:
        raise ValueError("section must carry vector velocity values")
    u = section.values
    n = section.normal
    un = u @ n
    tang = u - un[:, None] * n[None, :]
    denom = float(np.sum(section.weights * np.abs(un)))
    if denom == 0.0:
        return float("nan")
    numer = float(np.sum(section.weights * np.linalg.norm(tang, axis=1)))
    return numer / denom


def nfd(section: CrossSection) -> float:
    """Normalized flow displacement of a section.

    Distance between the |u.n|-weighted centroid and the area centroid,
    normalized by the hydraulic radius estimated as 3/4 of the mean
    distance to the area centroid (equals the area/perimeter definition
    on a disc).
    """
    if section.values is None or section.values.ndim != 2:
        raise ValueError("section must carry vector velocity values")
    w = section.weights
    area = w.sum()
    x_g = (w[:, None] * section.points).sum(axis=0) / area
    r_h = 0.75 * float(np.sum(w * np.linalg.norm(section.points - x_g, axis=1))) / area
    flux = np.abs(section.values @ section.normal)
    total = float(np.sum(w * flux))
    if total == 0.0 or r_h == 0.0:
        return float("nan")
    x_n = ((w * flux)[:, None] * section.points).sum(axis=0) / total
    return float(np.linalg.norm(x_n - x_g) / r_h)


def pressure_qois(times, pressure_fields, velocity_fields, inlet_section,
                  outlet_sections):
    """Pressure and outflow series over a simulation window.

    ``pressure_fields`` / ``velocity_fields`` are per-time NodalFields on
    the same hex mesh; sections are precomputed :class:`CrossSection`
    geometries (their quadrature is reused; fields are re-interpolated at
    the section points each time step).  Returns a dict of TimeSeries:
    ``p_mean`` (volume mean), ``dp`` (descending-outlet minus inlet
    section means, first outlet by convention), and ``q_<i>`` outflows.
    """
    times = np.asarray(times, dtype=float)
    n_t = len(times)
    if len(pressure_fields) != n_t:
        raise ValueError("need one pressure field per time")
    if velocity_fields is not None and len(velocity_fields) != n_t:
        raise ValueError("need one velocity field per time")
    p_mean = np.empty(n_t)
    dp = np.empty(n_t)
    flows = np.zeros((n_t, len(outlet_sections)))
    locator = _HexLocator(pressure_fields[0].mesh)
    for k in range(n_t):
        pf = pressure_fields[k]
        p_mean[k] = float(volume_mean(pf))
        p_in, _ = interpolate_field(pf, inlet_section.points, locator)
        p_out, _ = interpolate_field(pf, outlet_sections[0].points, locator)
        dp[k] = (np.sum(outlet_sections[0].weights * p_out)
                 / outlet_sections[0].weights.sum()
                 - np.sum(inlet_section.weights * p_in)
                 / inlet_section.weights.sum())
        if velocity_fields is not None:
            vf = velocity_fields[k]
            for j, sec in enumerate(outlet_sections):
                u, _ = interpolate_field(vf, sec.points, locator)
                flows[k, j] = float(np.sum(sec.weights * (u @ sec.normal)))
    out = {
        "p_mean": TimeSeries(times, p_mean, units="Pa"),
        "dp": TimeSeries(times, dp, units="Pa"),
    }
    for j in range(len(outlet_sections)):
        out[f"q_{j + 1}"] = TimeSeries(times, flows[:, j], units="m^3/s")
    return out
