"""Meshes and finite-volume / finite-difference operators for the cell."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DomainError


class RadialMethod(str, enum.Enum):
    FVM_HERMITE = "fvm_hermite"
    FDM = "fdm"

    @classmethod
    def parse(cls, value) -> "RadialMethod":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ConfigurationError(
                f"unknown radial_method {value!r}; use 'fvm_hermite' or 'fdm'") from None


@dataclass(frozen=True)
class ParticleGrid:
    """Uniform shells of a sphere of radius ``R``."""

    R: float
    n: int
    edges: np.ndarray = field(repr=False)
    volumes: np.ndarray = field(repr=False)
    areas: np.ndarray = field(repr=False)  # at the n+1 shell boundaries
    centers: np.ndarray = field(repr=False)

    @property
    def dr(self) -> float:
        return self.R / self.n


def particle_grid(R: float, n: int) -> ParticleGrid:
    if n < 2:
        raise ConfigurationError(f"particle needs at least 2 shells, got {n}")
    if not R > 0:
        raise ConfigurationError(f"particle radius must be positive, got {R}")
    edges = np.linspace(0.0, R, n + 1)
    volumes = 4.0 / 3.0 * np.pi * np.diff(edges**3)
    areas = 4.0 * np.pi * edges**2
    centers = 0.5 * (edges[:-1] + edges[1:])
    return ParticleGrid(R, n, edges, volumes, areas, centers)


@dataclass(frozen=True)
class Mesh:
    """Uniform control volumes through the cell plus one particle grid per electrode."""

    nx_n: int
    nx_s: int
    nx_p: int
    dx: np.ndarray = field(repr=False)
    x_centers: np.ndarray = field(repr=False)
    particle_n: ParticleGrid
    particle_p: ParticleGrid
    a_s_n: float
    a_s_p: float
    radial_method: RadialMethod = RadialMethod.FVM_HERMITE

    @property
    def nx(self) -> int:
        return self.nx_n + self.nx_s + self.nx_p

    @property
    def nr_n(self) -> int:
        return self.particle_n.n

    @property
    def nr_p(self) -> int:
        return self.particle_p.n


def build_mesh(nx_n: int, nx_s: int, nx_p: int, nr_n: int, nr_p: int, params,
               radial_method=RadialMethod.FVM_HERMITE) -> Mesh:
    """Uniform mesh with the given node counts for the cell ``params``."""
    for name, n in (("nx_neg", nx_n), ("nx_sep", nx_s), ("nx_pos", nx_p),
                    ("nr_neg", nr_n), ("nr_pos", nr_p)):
        if int(n) != n or n < 2:
            raise ConfigurationError(f"{name} must be an integer >= 2, got {n!r}")
    dx = np.concatenate([
        np.full(nx_n, params.L_n / nx_n),
        np.full(nx_s, params.L_s / nx_s),
        np.full(nx_p, params.L_p / nx_p),
    ])
    faces = np.concatenate([[0.0], np.cumsum(dx)])
    return Mesh(
        nx_n=int(nx_n), nx_s=int(nx_s), nx_p=int(nx_p),
        dx=dx, x_centers=0.5 * (faces[:-1] + faces[1:]),
        particle_n=particle_grid(params.R_p_neg, int(nr_n)),
        particle_p=particle_grid(params.R_p_pos, int(nr_p)),
        a_s_n=3.0 * params.eps_s_n / params.R_p_neg,
        a_s_p=3.0 * params.eps_s_p / params.R_p_pos,
        radial_method=RadialMethod.parse(radial_method),
    )


def effective_property(value, eps, brugg):
    """Bruggeman-corrected transport property ``value * eps**brugg``."""
    eps = np.asarray(eps, dtype=float)
    if np.any(eps <= 0) or np.any(eps > 1):
        raise DomainError(f"volume fraction must lie in (0, 1], got {eps!r}")
    return value * eps**brugg


def _shell_average_rows(grid: ParticleGrid, a: float, b: float, origin: float, scale: float):
    """Row of the linear map from cubic coefficients to the r^2-weighted mean over [a, b]."""
    xg, wg = np.polynomial.legendre.leggauss(4)
    r = 0.5 * (b - a) * xg + 0.5 * (a + b)
    w = 0.5 * (b - a) * wg * r**2
    xi = (r - origin) / scale
    basis = np.vander(xi, 4, increasing=True)
    return (w @ basis) / w.sum()


def hermite_weights(grid: ParticleGrid) -> tuple[float, float, float]:
    """Weights ``(w_inner, w_outer, w_grad)`` of the surface reconstruction.

    A cubic spanning the two outermost shells matches both shell averages,
    the surface gradient, and the finite-volume gradient at their shared
    face. Its surface value is
    ``w_inner*c[-2] + w_outer*c[-1] + w_grad*dc/dr(R)``.
    """
    n, R, dr = grid.n, grid.R, grid.dr
    e = grid.edges
    # coefficients in xi = (r - R)/dr
    A = np.zeros((4, 4))
    A[0] = _shell_average_rows(grid, e[n - 2], e[n - 1], R, dr)
    A[1] = _shell_average_rows(grid, e[n - 1], e[n], R, dr)
    A[2] = [0.0, 1.0 / dr, 0.0, 0.0]  # p'(R)
    xi_f = (e[n - 1] - R) / dr
    A[3] = [0.0, 1.0 / dr, 2.0 * xi_f / dr, 3.0 * xi_f**2 / dr]  # p'(inner face)
    Ainv = np.linalg.inv(A)
    # right-hand side: [c_in, c_out, g_surf, (c_out - c_in)/dr]; p(R) = q0
    row = Ainv[0]
    w_in = row[0] - row[3] / dr
    w_out = row[1] + row[3] / dr
    w_grad = row[2]
    return float(w_in), float(w_out), float(w_grad)


def particle_surface_concentration(shell_averages, surface_flux, Ds, grid: ParticleGrid,
                                   method=RadialMethod.FVM_HERMITE):
    """Surface concentration of one particle.

    ``surface_flux`` is the outward molar flux [mol/(m^2 s)], so the surface
    gradient is ``-surface_flux / Ds``. Works on the last axis, so a 2-D
    array of shell averages (one particle per row) is accepted.
    """
    c = np.asarray(shell_averages, dtype=float)
    if c.shape[-1] != grid.n:
        raise ConfigurationError(f"expected {grid.n} shell values, got {c.shape[-1]}")
    if not Ds > 0:
        raise DomainError(f"solid diffusivity must be positive, got {Ds}")
    method = RadialMethod.parse(method)
    if method is RadialMethod.FDM:
        return c[..., -1].copy()
    w_in, w_out, w_grad = hermite_weights(grid)
    return w_in * c[..., -2] + w_out * c[..., -1] - w_grad * np.asarray(surface_flux) / Ds


def spherical_fvm_rates(c, surface_flux, Ds, grid: ParticleGrid):
    """d/dt of the shell averages under Fick diffusion with outward surface flux."""
    c = np.asarray(c, dtype=float)
    flux = np.zeros(c.shape[:-1] + (grid.n + 1,))
    # outward diffusive transport through interior faces
    flux[..., 1:-1] = -Ds * grid.areas[1:-1] * np.diff(c, axis=-1) / grid.dr
    flux[..., -1] = grid.areas[-1] * np.asarray(surface_flux)
    return -np.diff(flux, axis=-1) / grid.volumes


def spherical_fdm_rates(c, surface_flux, Ds, grid: ParticleGrid):
    """Node-based central differences with ghost nodes at the center and surface."""
    c = np.asarray(c, dtype=float)
    dr = grid.dr
    r = grid.centers
    ghost_in = c[..., :1]
    ghost_out = c[..., -1:] - dr * np.asarray(surface_flux)[..., None] / Ds
    ext = np.concatenate([ghost_in, c, ghost_out], axis=-1)
    lap = (ext[..., 2:] - 2.0 * c + ext[..., :-2]) / dr**2
    grad = (ext[..., 2:] - ext[..., :-2]) / (2.0 * dr)
    return Ds * (lap + 2.0 / r * grad)
