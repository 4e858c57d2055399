#!/usr/bin/env python3
# Hemodynamic quantities of interest on a synthetic vessel.
#
# A straight tube with an analytic Poiseuille profile exercises the whole
# biomarker chain: wall shear stress from one-sided normal derivatives,
# oscillatory shear index over a time window, cross-sectional secondary
# flow and flow displacement, outlet pressure from the RCR Windkessel
# model, and Wasserstein-1 comparisons of sample statistics.

import numpy as np

from shapeflow.biomarkers import (
    TimeSeries, WindkesselParams, monte_carlo_estimate, nfd, osi, sfd,
    wall_shear_stress, wasserstein1, windkessel_step,
)
from shapeflow.geometry import cross_section
from shapeflow.meshes import NodalField
from shapeflow.primitives import tube_mesh

mu, u_max, radius = 3.5e-3, 1.2, 1.0
mesh = tube_mesh(24, 18, radius=radius, length=3.0)
r = np.linalg.norm(mesh.vertices[:, :2], axis=1)
uz = u_max * (1.0 - (r / radius) ** 2)
zeros = np.zeros_like(uz)
velocity = NodalField(mesh, np.stack([zeros, zeros, uz], axis=1), "m/s")

# --- wall shear stress: analytic value is 2 mu u_max / R -------------------
wall = np.unique(mesh.boundary_faces[mesh.boundary_patches["wall"]].ravel())
pts = mesh.vertices[wall]
keep = (pts[:, 2] > 0.6) & (pts[:, 2] < 2.4)
pts = pts[keep]
normals = np.zeros_like(pts)
normals[:, :2] = pts[:, :2] / np.linalg.norm(pts[:, :2], axis=1, keepdims=True)
tau, valid = wall_shear_stress(velocity, pts, normals, viscosity=mu)
mags = np.linalg.norm(tau[valid], axis=1)
print(f"WSS magnitude: {mags.mean():.5f} Pa "
      f"(analytic {2 * mu * u_max / radius:.5f} Pa)")

# --- OSI: steady stress gives 0, alternating stress gives 1/2 ---------------
t = np.linspace(0, 1, 21)
steady = TimeSeries(t, np.tile(tau[valid][0], (21, 1)))
print(f"OSI steady: {osi(steady)}")
v = np.array([1.0, 0.0, 0.0])
alternating = TimeSeries(np.array([0.0, 0.25, 0.75, 1.0]),
                         np.stack([v, v, -v, -v]))
print(f"OSI balanced alternation: {osi(alternating)}")

# --- cross-sectional quantities ----------------------------------------------
sec = cross_section(mesh, velocity, [0, 0, 1.4], [0, 0, 1],
                    polar_grid=(48, 96))
print(f"section area {sec.area:.4f} (pi R^2 = {np.pi * radius ** 2:.4f})")
print(f"SFD {sfd(sec):.4f} (purely axial flow -> 0), NFD {nfd(sec):.4f}")
q = float(np.sum(sec.weights * (sec.values @ sec.normal)))
print(f"flux {q:.4f} (analytic {np.pi * radius ** 2 * u_max / 2:.4f})")

# --- Windkessel outlet pressure ------------------------------------------------
params = WindkesselParams(r_proximal=80.0, r_distal=1200.0,
                          capacitance=1e-4, pi0=0.0)
tt = np.linspace(0.0, 3.0, 600)
flow_wave = q * (1.0 + 0.5 * np.sin(2 * np.pi * tt)) * 1e-3
pressure = windkessel_step(params, TimeSeries(tt, flow_wave, "m^3/s"))
print(f"outlet pressure range: [{pressure.values.min():.2f}, "
      f"{pressure.values.max():.2f}] Pa")

# --- sample statistics -----------------------------------------------------------
rng = np.random.default_rng(0)
batch_a = rng.normal(10.0, 1.0, 200)     # e.g. a WSS sample per geometry
batch_b = rng.normal(10.4, 1.1, 150)
mean, std, se = monte_carlo_estimate(batch_a)
print(f"batch A: mean {mean:.3f} +- {se:.3f} (std {std:.3f})")
print(f"W1(batch A, batch B) = {wasserstein1(batch_a, batch_b):.3f} "
      "(same units as the samples)")
