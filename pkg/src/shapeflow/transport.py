"""Volume extension of surface displacements over hexahedral hierarchies.

A generated surface displacement is propagated into the volume by solving
a sequence of fictitious linear elasticity problems with an exponential
boundary-value schedule, repairing inverted cells between steps, then
reducing bad aspect ratios by adaptive gradient descent on the interior
vertices, coarsest hierarchy level first.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .geometry import (
    InvertedCellError,
    cell_jacobians,
    default_aspect_samples,
    detect_inverted_cells,
    hex_shape_gradients,
)
from .meshes import HEX_EDGES, HexHierarchy, HexMesh

__all__ = [
    "ElasticExtensionConfig",
    "SmoothingConfig",
    "InvalidVolumeMeshError",
    "ElasticSolveError",
    "boundary_schedule",
    "solve_elastic_step",
    "repair_inversions",
    "RepairReport",
    "extend_displacement",
    "smooth_aspect_ratio",
    "propagate_hierarchy",
]


class InvalidVolumeMeshError(RuntimeError):
    """Inverted cells could not be repaired; the volume mesh is unusable."""


class ElasticSolveError(RuntimeError):
    """The elastic linear system could not be solved."""


@dataclass
class ElasticExtensionConfig:
    n_steps: int = 8
    poisson: float = 0.3
    solver_tol: float = 1e-10
    solver_maxiter: int = 20000
    repair_max_passes: int = 20

    def __post_init__(self):
        if not 0.0 < self.poisson < 0.5:
            raise ValueError("Poisson ratio must lie in (0, 0.5)")
        if self.n_steps < 1:
            raise ValueError("need at least one extension step")


@dataclass
class SmoothingConfig:
    bad_fraction: float = 0.75
    stop_threshold: float = 100.0
    max_iters: int = 500
    step_init: float = 0.05
    step_growth: float = 1.1
    rms_beta: float = 0.9
    max_backtracks: int = 15
    tie_tol: float = 1e-8

    def __post_init__(self):
        if not 0.0 < self.bad_fraction <= 1.0:
            raise ValueError("bad-cell threshold fraction must lie in (0, 1]")
        if self.stop_threshold <= 1.0:
            raise ValueError("stop threshold must exceed 1")


def boundary_schedule(n: int, n_steps: int) -> float:
    """Exponential boundary-value ramp: 0 at n=0, 1 at n=n_steps."""
    if n < 0 or n > n_steps:
        raise ValueError("step index must lie in [0, n_steps]")
    num = np.exp(-n / n_steps) - 1.0
    den = np.exp(-1.0) - 1.0
    return float(num / den) + 0.0  # normalize -0.0 at n=0


# --- linear elasticity ---------------------------------------------------------

def _element_stiffness(vertices, cells, young, poisson):
    """Per-cell 24x24 stiffness matrices, 2x2x2 Gauss quadrature."""
    g1 = 0.5 - 0.5 / np.sqrt(3.0)
    g2 = 0.5 + 0.5 / np.sqrt(3.0)
    gp = np.array([[a, b, c] for a in (g1, g2) for b in (g1, g2) for c in (g1, g2)])
    w = np.full(8, 1.0 / 8.0)
    grads_ref = hex_shape_gradients(gp)  # (s, 8, 3)
    jac = cell_jacobians(vertices, cells, gp)  # (c, s, 3, 3)
    det = np.linalg.det(jac)
    if np.any(det <= 0):
        raise InvertedCellError("cannot assemble on an inverted configuration")
    inv = np.linalg.inv(jac)
    # physical shape gradients: grad N_i = J^{-T} grad_ref N_i
    g = np.einsum("sid,csdk->csik", grads_ref, inv)  # (c, s, 8, 3)
    wdet = det * w[None, :]  # (c, s)

    mu = young / (2.0 * (1.0 + poisson))
    lam = young * poisson / ((1.0 + poisson) * (1.0 - 2.0 * poisson))

    dot = np.einsum("csik,csjk->csij", g, g)
    eye = np.eye(3)
    k_iso = np.einsum("csij,ab->csiajb", dot, eye)
    k_shear = np.einsum("csib,csja->csiajb", g, g)
    k_vol = np.einsum("csia,csjb->csiajb", g, g)
    part_mu = np.einsum("cs,csiajb->ciajb", wdet, k_iso + k_shear)
    part_lam = np.einsum("cs,csiajb->ciajb", wdet, k_vol)
    k = (mu[:, None, None, None, None] * part_mu
         + lam[:, None, None, None, None] * part_lam)
    return k.reshape(len(cells), 24, 24)


def _assemble(vertices, cells, young, poisson):
    k_cells = _element_stiffness(vertices, cells, young, poisson)
    dof = (3 * cells[:, :, None] + np.arange(3)[None, None, :]).reshape(-1, 24)
    rows = np.repeat(dof, 24, axis=1).ravel()
    cols = np.tile(dof, (1, 24)).ravel()
    n_dof = 3 * len(vertices)
    mat = sp.coo_matrix((k_cells.ravel(), (rows, cols)), shape=(n_dof, n_dof))
    return mat.tocsr()


def solve_elastic_step(mesh: HexMesh, boundary_displacement, young_modulus,
                       poisson: float = 0.3, tol: float = 1e-10,
                       maxiter: int = 20000, vertices=None) -> np.ndarray:
    """Trilinear FEM solve of nonhomogeneous linear elasticity.

    Dirichlet data ``boundary_displacement`` (one 3-vector per boundary
    vertex, ordered by ascending vertex index) is imposed on all boundary
    vertices; the interior solve uses diagonally preconditioned conjugate
    gradients to relative residual ``tol``.  ``young_modulus`` is per cell.
    Returns the per-vertex displacement (boundary rows carry the data).
    """
    verts = mesh.vertices if vertices is None else np.asarray(vertices, float)
    young = np.asarray(young_modulus, dtype=float).ravel()
    if len(young) != mesh.n_cells:
        raise ValueError("need one Young modulus per cell")
    if np.any(young <= 0):
        raise ValueError("Young moduli must be positive")

    bmask = mesh.boundary_vertex_mask()
    bverts = np.flatnonzero(bmask)
    bdata = np.asarray(boundary_displacement, dtype=float)
    if bdata.shape != (len(bverts), 3):
        raise ValueError(
            f"boundary displacement must have shape ({len(bverts)}, 3)"
        )
    n_dof = 3 * mesh.n_vertices
    full = np.zeros(n_dof)
    bdof = (3 * bverts[:, None] + np.arange(3)[None, :]).ravel()
    full[bdof] = bdata.ravel()

    free = np.setdiff1d(np.arange(n_dof), bdof)
    if len(free) == 0:
        return full.reshape(-1, 3)

    mat = _assemble(verts, mesh.cells, young, poisson)
    k_ff = mat[free][:, free]
    rhs = -(mat[free][:, bdof] @ full[bdof])

    diag = k_ff.diagonal()
    if np.any(diag <= 0):
        raise ElasticSolveError("singular stiffness matrix (zero diagonal)")
    precond = sp.diags(1.0 / diag)
    rhs_norm = np.linalg.norm(rhs)
    if rhs_norm == 0.0:
        sol = np.zeros(len(free))
    else:
        sol, info = spla.cg(k_ff, rhs, rtol=tol, atol=0.0, maxiter=maxiter,
                            M=precond)
        if info != 0:
            resid = np.linalg.norm(k_ff @ sol - rhs) / rhs_norm
            raise ElasticSolveError(
                f"conjugate gradients did not converge (info={info}, "
                f"relative residual {resid:.3e})"
            )
    full[free] = sol
    return full.reshape(-1, 3)


# --- inversion repair ------------------------------------------------------------

@dataclass
class RepairReport:
    passes_used: int
    remaining: np.ndarray

    @property
    def resolved(self) -> bool:
        return len(self.remaining) == 0


def _edge_neighbors(mesh: HexMesh):
    pairs = set()
    for cell in mesh.cells:
        for a, b in HEX_EDGES:
            i, j = int(cell[a]), int(cell[b])
            pairs.add((min(i, j), max(i, j)))
    nbrs = [[] for _ in range(mesh.n_vertices)]
    for i, j in sorted(pairs):
        nbrs[i].append(j)
        nbrs[j].append(i)
    return [np.asarray(v, dtype=np.int64) for v in nbrs]


def repair_inversions(mesh: HexMesh, displacement, max_passes: int = 20,
                      samples=None):
    """Relax the displacement at vertices of inverted cells.

    Each pass moves every interior vertex of an inverted cell halfway
    toward the average displacement of its edge neighbors (simultaneous
    update).  Boundary vertices are never modified.  Returns
    ``(displacement, RepairReport)``; unresolved inversions are reported,
    not raised.
    """
    disp = np.array(displacement, dtype=float)
    if disp.shape != (mesh.n_vertices, 3):
        raise ValueError("displacement must be per-vertex")
    if samples is None:
        samples = default_aspect_samples()
    interior = ~mesh.boundary_vertex_mask()
    neighbors = None
    passes = 0
    inverted = detect_inverted_cells(mesh, mesh.vertices + disp, samples)
    while len(inverted) and passes < max_passes:
        if neighbors is None:
            neighbors = _edge_neighbors(mesh)
        touched = np.unique(mesh.cells[inverted].ravel())
        touched = touched[interior[touched]]
        if len(touched) == 0:
            break  # inversions pinned entirely on the boundary
        new = disp.copy()
        for v in touched:
            nbr = neighbors[v]
            new[v] = 0.5 * disp[v] + 0.5 * disp[nbr].mean(axis=0)
        disp = new
        passes += 1
        inverted = detect_inverted_cells(mesh, mesh.vertices + disp, samples)
    return disp, RepairReport(passes_used=passes, remaining=inverted)


# --- aspect-ratio helpers ---------------------------------------------------------

def _det3(a):
    """Determinant of a (..., 3, 3) batch, explicit cofactor formula."""
    return (
        a[..., 0, 0] * (a[..., 1, 1] * a[..., 2, 2] - a[..., 1, 2] * a[..., 2, 1])
        - a[..., 0, 1] * (a[..., 1, 0] * a[..., 2, 2] - a[..., 1, 2] * a[..., 2, 0])
        + a[..., 0, 2] * (a[..., 1, 0] * a[..., 2, 1] - a[..., 1, 1] * a[..., 2, 0])
    )


def _sym3_eigvals(m):
    """Ascending eigenvalues of a symmetric (..., 3, 3) batch (Cardano).

    About 1e-6 relative accuracy near eigenvalue ties; plenty for the
    smoothing loop, which only compares losses.  The public aspect-ratio
    functions keep the LAPACK path for their tighter tolerances.
    """
    q = (m[..., 0, 0] + m[..., 1, 1] + m[..., 2, 2]) / 3.0
    b = m - q[..., None, None] * np.eye(3)
    p2 = np.einsum("...ab,...ab->...", b, b) / 6.0
    p = np.sqrt(np.maximum(p2, 0.0))
    # p == 0 means an exactly isotropic matrix: all eigenvalues equal q
    safe_p = np.where(p < 1e-100, 1.0, p)
    r = np.clip(_det3(b) / (2.0 * safe_p ** 3), -1.0, 1.0)
    phi = np.arccos(r) / 3.0
    l_hi = q + 2.0 * p * np.cos(phi)
    l_lo = q + 2.0 * p * np.cos(phi + 2.0 * np.pi / 3.0)
    l_mid = 3.0 * q - l_hi - l_lo
    return np.stack([l_lo, l_mid, l_hi], axis=-1)


def _batched_jacobians(corner, grads_flat, n_samples):
    """(c, 8, 3) corners x (8, s*3) flattened gradients -> (c, s, 3, 3)."""
    prod = np.matmul(corner.transpose(0, 2, 1), grads_flat)  # (c, 3, s*3)
    return prod.reshape(len(corner), 3, n_samples, 3).transpose(0, 2, 1, 3)


def _aspect_state(verts, cells, grads_flat, n_samples, bad_fraction):
    """Loss, bad set, and quantities needed for the gradient.

    Returns None when the configuration contains an inverted cell.
    """
    jac = _batched_jacobians(verts[cells], grads_flat, n_samples)
    det = _det3(jac)
    if det.min() <= 0.0:
        return None
    m = np.einsum("csab,csad->csbd", jac, jac)
    lam = _sym3_eigvals(m)
    asp2 = lam[..., 2] / np.maximum(lam[..., 0], 1e-300)
    s_star = asp2.argmax(axis=1)
    cell_asp2 = asp2[np.arange(len(cells)), s_star]
    asp = np.sqrt(cell_asp2)
    max_asp = asp.max()
    bad = np.flatnonzero(asp > bad_fraction * max_asp)
    loss = float(cell_asp2[bad].mean())
    return {
        "jac": jac, "s_star": s_star, "bad": bad, "loss": loss,
        "max_asp": float(max_asp), "cell_asp2": cell_asp2,
    }


def _aspect_gradient(verts, cells, grads_ref, state, tie_tol):
    """d(loss)/d(vertex coordinates) for the current bad-cell set.

    Eigenvalue derivatives use the symmetric perturbation formula; tied
    eigenvalues (gap below ``tie_tol * trace``) are handled by averaging
    over the tied group, which smooths the otherwise non-differentiable
    ratio.
    """
    bad = state["bad"]
    grad = np.zeros_like(verts)
    if len(bad) == 0:
        return grad
    s_star = state["s_star"][bad]
    jac = state["jac"][bad, s_star]  # (n, 3, 3)
    m = np.einsum("nab,nad->nbd", jac, jac)
    lam, vec = np.linalg.eigh(m)  # ascending; vec columns are eigenvectors
    g_ref = grads_ref[s_star]  # (n, 8, 3)

    jv = np.einsum("nab,nbk->nak", jac, vec)  # (n, 3, k)
    gv = np.einsum("nib,nbk->nik", g_ref, vec)  # (n, 8, k)
    dlam = 2.0 * np.einsum("nak,nik->nkia", jv, gv)  # (n, 3, 8, 3)

    trace = lam.sum(axis=1)
    tol = tie_tol * np.maximum(trace, 1e-300)
    low_pair = (lam[:, 1] - lam[:, 0]) < tol  # lambda_1 ~ lambda_2
    high_pair = (lam[:, 2] - lam[:, 1]) < tol  # lambda_2 ~ lambda_3
    all_tied = low_pair & high_pair

    lam_low = np.where(low_pair, 0.5 * (lam[:, 0] + lam[:, 1]), lam[:, 0])
    lam_high = np.where(high_pair, 0.5 * (lam[:, 1] + lam[:, 2]), lam[:, 2])
    dlam_low = np.where(low_pair[:, None, None],
                        0.5 * (dlam[:, 0] + dlam[:, 1]), dlam[:, 0])
    dlam_high = np.where(high_pair[:, None, None],
                         0.5 * (dlam[:, 1] + dlam[:, 2]), dlam[:, 2])

    coeff = 1.0 / len(bad)
    d_asp2 = coeff * (dlam_high / lam_low[:, None, None]
                      - (lam_high / lam_low ** 2)[:, None, None] * dlam_low)
    d_asp2[all_tied] = 0.0  # fully isotropic: ratio is at its minimum

    np.add.at(grad, cells[bad], d_asp2)
    return grad


def _padded_adjacency(mesh: HexMesh):
    """Edge adjacency as a padded rectangular array plus neighbor counts."""
    nbrs = _edge_neighbors(mesh)
    width = max(len(v) for v in nbrs)
    adj = np.empty((len(nbrs), width), dtype=np.int64)
    count = np.empty(len(nbrs))
    for i, v in enumerate(nbrs):
        adj[i, : len(v)] = v
        adj[i, len(v):] = i  # self-padding contributes the vertex itself
        count[i] = len(v)
    return adj, count


def smooth_aspect_ratio(mesh: HexMesh, cfg: SmoothingConfig = None,
                        fixed_mask=None, vertices=None):
    """Reduce the squared aspect ratio of the worst cells.

    Minimizes the mean squared sampled aspect ratio over the bad-cell set
    (cells above ``bad_fraction`` of the maximum, recomputed every
    iteration).  Each iteration proposes an adaptive per-coordinate
    gradient step (backtracking ladder) and a Laplacian neighbor-average
    sweep, and keeps the better proposal; any proposal that would invert a
    cell or increase the loss is rejected, so the accepted-loss sequence
    is non-increasing.  The Laplacian alternative is what lets the
    optimizer hop over the upward jumps the bad-cell set produces when a
    marginal cell drops out of it.  Stops when the loss falls below
    ``stop_threshold``.

    Returns ``(vertices, trace)`` where ``trace`` rows are
    ``(iteration, loss, max_aspect, n_bad)`` for the accepted iterates.
    """
    cfg = cfg or SmoothingConfig()
    verts = np.array(mesh.vertices if vertices is None else vertices,
                     dtype=float)
    fixed = mesh.boundary_vertex_mask() if fixed_mask is None \
        else np.asarray(fixed_mask, dtype=bool)
    free = ~fixed
    samples = default_aspect_samples()
    grads_ref = hex_shape_gradients(samples)
    grads_flat = grads_ref.transpose(1, 0, 2).reshape(8, -1)
    n_samples = len(samples)
    cells = mesh.cells

    def evaluate(v):
        return _aspect_state(v, cells, grads_flat, n_samples,
                             cfg.bad_fraction)

    state = evaluate(verts)
    if state is None:
        raise InvertedCellError("input mesh contains inverted cells")
    trace = [(0, state["loss"], state["max_asp"], len(state["bad"]))]
    if state["loss"] < cfg.stop_threshold or not np.any(free):
        return verts, trace

    edge = verts[cells[:, 1]] - verts[cells[:, 0]]
    h_mesh = float(np.median(np.linalg.norm(edge, axis=1)))
    lr = cfg.step_init * h_mesh
    ms = np.zeros_like(verts)
    adj = count = None
    for it in range(1, cfg.max_iters + 1):
        grad = _aspect_gradient(verts, cells, grads_ref, state, cfg.tie_tol)
        grad[fixed] = 0.0
        ms = cfg.rms_beta * ms + (1.0 - cfg.rms_beta) * grad * grad
        rms = np.sqrt(ms)
        direction = grad / (rms + 1e-2 * rms.max() + 1e-300)
        best = None
        gradient_scale = None
        for t in (1.0, 0.5, 0.25, 0.125, 0.0625, 2.0, 4.0):
            if 0.0625 * lr * t < 1e-14 * h_mesh:
                continue
            cand = verts - (t * lr) * direction
            cand_state = evaluate(cand)
            if cand_state is not None and cand_state["loss"] <= state["loss"]:
                best = (cand, cand_state)
                gradient_scale = t
                break
        if adj is None:
            adj, count = _padded_adjacency(mesh)
        for omega in (0.6, 0.3, 0.15, 0.075):
            avg = (verts[adj].sum(axis=1)
                   - (adj.shape[1] - count)[:, None] * verts) / count[:, None]
            cand = verts.copy()
            cand[free] = (1.0 - omega) * verts[free] + omega * avg[free]
            cand_state = evaluate(cand)
            if cand_state is not None and cand_state["loss"] <= state["loss"]:
                if best is None or cand_state["loss"] < best[1]["loss"]:
                    best = (cand, cand_state)
                    gradient_scale = None
                break
        if best is None:
            lr *= 0.5
            if lr < 1e-14 * h_mesh:
                break
            continue
        verts, state = best
        if gradient_scale is not None:
            lr = min(lr * gradient_scale * cfg.step_growth, 0.5 * h_mesh)
        trace.append((it, state["loss"], state["max_asp"], len(state["bad"])))
        if state["loss"] < cfg.stop_threshold:
            break
    return verts, trace


# --- extension driver ---------------------------------------------------------------

def _young_moduli(verts, cells, grads_ref):
    """Square of the sampled aspect ratio of each (current) cell.

    Cells that are inverted mid-pipeline (only possible after a failed
    repair) fall back to the stiffest valid modulus so the solve stays
    positive definite.
    """
    jac = np.einsum("cia,sib->csab", verts[cells], grads_ref)
    det = np.linalg.det(jac)
    valid = det.min(axis=1) > 0.0
    lam = np.linalg.eigvalsh(np.einsum("csab,csad->csbd", jac, jac))
    asp2 = (lam[..., 2] / np.maximum(lam[..., 0], 1e-300)).max(axis=1)
    young = np.where(valid, asp2, 1.0)
    if np.any(~valid):
        young[~valid] = young[valid].max() if np.any(valid) else 1.0
    return young


def extend_displacement(hierarchy, surface_disp,
                        cfg: ElasticExtensionConfig = None):
    """Extend a surface displacement into the finest-level volume mesh.

    ``surface_disp`` has one 3-vector per boundary vertex of the finest
    level, ordered by ascending vertex index.  The displacement is ramped
    with the exponential boundary schedule over ``cfg.n_steps`` elastic
    solves, each assembled on the currently deformed geometry with
    per-cell Young modulus equal to the squared aspect ratio of the
    current cell; inverted cells are repaired after each step.

    Returns ``(displaced HexMesh, accumulated displacement, trace)``.
    Raises :class:`InvalidVolumeMeshError` when inversions survive the
    final repair.
    """
    cfg = cfg or ElasticExtensionConfig()
    mesh = hierarchy.finest if isinstance(hierarchy, HexHierarchy) else hierarchy
    bmask = mesh.boundary_vertex_mask()
    bverts = np.flatnonzero(bmask)
    target = np.asarray(surface_disp, dtype=float)
    if target.shape != (len(bverts), 3):
        raise ValueError(
            f"surface displacement must have shape ({len(bverts)}, 3)"
        )
    samples = default_aspect_samples()
    grads_ref = hex_shape_gradients(samples)
    accum = np.zeros((mesh.n_vertices, 3))
    trace = []
    prev = 0.0
    for n in range(1, cfg.n_steps + 1):
        s = boundary_schedule(n, cfg.n_steps)
        current = mesh.vertices + accum
        young = _young_moduli(current, mesh.cells, grads_ref)
        u = solve_elastic_step(mesh, (s - prev) * target, young,
                               poisson=cfg.poisson, tol=cfg.solver_tol,
                               maxiter=cfg.solver_maxiter, vertices=current)
        accum += u
        accum[bverts] = s * target  # scheduled value, exact
        n_before = len(detect_inverted_cells(mesh, mesh.vertices + accum,
                                             samples))
        accum, report = repair_inversions(mesh, accum,
                                          max_passes=cfg.repair_max_passes,
                                          samples=samples)
        trace.append((n, s, n_before, len(report.remaining)))
        if not report.resolved:
            # the next step cannot even be assembled on a folded geometry
            raise InvalidVolumeMeshError(
                f"invalid volume mesh: {len(report.remaining)} inverted "
                f"cells remain after step {n}"
            )
        prev = s
    remaining = detect_inverted_cells(mesh, mesh.vertices + accum, samples)
    if len(remaining):
        raise InvalidVolumeMeshError(
            f"invalid volume mesh: {len(remaining)} inverted cells remain"
        )
    displaced = mesh.with_vertices(mesh.vertices + accum)
    return displaced, accum, trace


def propagate_hierarchy(hierarchy: HexHierarchy, finest_displacement,
                        cfg: SmoothingConfig = None) -> HexHierarchy:
    """Displace every hierarchy level and smooth coarsest-first.

    Every level takes its vertex displacements from the finest level
    (matching by the exact-equality inheritance maps).  Aspect-ratio
    smoothing then runs level by level; on each level the vertices
    inherited from the coarser level (and the boundary) stay fixed, and
    the smoothed positions are copied bit-exactly into all finer levels,
    preserving the shared-vertex invariant.
    """
    cfg = cfg or SmoothingConfig()
    disp = np.asarray(finest_displacement, dtype=float)
    finest = hierarchy.finest
    if disp.shape != (finest.n_vertices, 3):
        raise ValueError("finest displacement must be per-finest-vertex")
    to_finest = [hierarchy.vertex_map_to_finest(l)
                 for l in range(hierarchy.n_levels)]
    new_verts = [hierarchy.levels[l].vertices + disp[to_finest[l]]
                 for l in range(hierarchy.n_levels)]

    inherit = [hierarchy.vertex_inheritance(l)
               for l in range(hierarchy.n_levels - 1)]
    for l, level in enumerate(hierarchy.levels):
        fixed = level.boundary_vertex_mask()
        if l > 0:
            fixed = fixed.copy()
            fixed[inherit[l - 1]] = True
        smoothed, _ = smooth_aspect_ratio(level, cfg, fixed_mask=fixed,
                                          vertices=new_verts[l])
        new_verts[l] = smoothed
        # push the accepted positions into every finer level, bit-exact
        idx = np.arange(level.n_vertices)
        for m in range(l, hierarchy.n_levels - 1):
            idx = inherit[m][idx]
            new_verts[m + 1][idx] = smoothed
    levels = tuple(
        lvl.with_vertices(v) for lvl, v in zip(hierarchy.levels, new_verts)
    )
    return HexHierarchy(levels, hierarchy.parent_maps)
