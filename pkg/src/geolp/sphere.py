"""Spectral round-sphere substrate for scalar fields.

Fields live as coefficient vectors in a real orthonormal spherical-harmonic
basis (orthonormal w.r.t. the unit-sphere measure dOmega), so the
Laplace-Beltrami operator acts diagonally with eigenvalue -l(l+1)/r^2.
Pointwise values, L^p norms and sup norms are obtained by synthesis on a
Gauss-Legendre x uniform-phi quadrature grid, which integrates products of
basis functions exactly at the chosen resolution.

Only scalars are supported here; tensor calculus lives on the periodic
chart substrate (surface module).
"""

from __future__ import annotations

import numpy as np
from scipy.special import sph_harm_y

__all__ = ["SpectralSphere", "SphereField"]


class SpectralSphere:
    """Round sphere of radius r, scalar fields truncated at degree l_max."""

    def __init__(self, l_max: int, r: float = 1.0, n_theta: int | None = None, n_phi: int | None = None):
        if l_max < 1:
            raise ValueError("l_max must be >= 1")
        if r <= 0:
            raise ValueError("radius must be positive")
        self.l_max = l_max
        self.r = float(r)
        ls, ms = [], []
        for l in range(l_max + 1):
            for m in range(-l, l + 1):
                ls.append(l)
                ms.append(m)
        self.l_index = np.array(ls)
        self.m_index = np.array(ms)
        self.n_basis = len(ls)
        self.eigenvalues = self.l_index * (self.l_index + 1) / self.r**2

        n_theta = n_theta or (2 * l_max + 2)
        n_phi = n_phi or (4 * l_max + 4)
        x, wx = np.polynomial.legendre.leggauss(n_theta)
        theta = np.arccos(x)
        phi = np.arange(n_phi) * 2.0 * np.pi / n_phi
        wphi = 2.0 * np.pi / n_phi
        th, ph = np.meshgrid(theta, phi, indexing="ij")
        self.grid_shape = th.shape
        self.quad_weights = (wx[:, None] * wphi * np.ones(n_phi)[None, :]).ravel()
        self._design = self._synthesis_matrix(th.ravel(), ph.ravel())

    def _synthesis_matrix(self, theta: np.ndarray, phi: np.ndarray) -> np.ndarray:
        """Real orthonormal harmonics evaluated at the quadrature nodes."""
        npts = theta.size
        mat = np.empty((npts, self.n_basis))
        for j, (l, m) in enumerate(zip(self.l_index, self.m_index)):
            if m == 0:
                mat[:, j] = np.real(sph_harm_y(l, 0, theta, phi))
            elif m > 0:
                mat[:, j] = np.sqrt(2.0) * (-1.0) ** m * np.real(sph_harm_y(l, m, theta, phi))
            else:
                mat[:, j] = np.sqrt(2.0) * (-1.0) ** m * np.imag(sph_harm_y(l, -m, theta, phi))
        return mat

    # -- field constructors ------------------------------------------------
    def field(self, coeffs: np.ndarray) -> "SphereField":
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape != (self.n_basis,):
            raise ValueError(f"expected {self.n_basis} coefficients")
        return SphereField(self, coeffs)

    def harmonic(self, l: int, m: int) -> "SphereField":
        c = np.zeros(self.n_basis)
        c[self.index_of(l, m)] = 1.0
        return SphereField(self, c)

    def index_of(self, l: int, m: int) -> int:
        return l * l + (m + l)

    def random_field(self, rng: np.random.Generator, slope: float = 2.0, l_cut: int | None = None) -> "SphereField":
        """Random field with coefficients ~ (1+lambda)^(-slope/2)."""
        c = rng.normal(size=self.n_basis) * (1.0 + self.eigenvalues) ** (-slope / 2.0)
        if l_cut is not None:
            c[self.l_index > l_cut] = 0.0
        return SphereField(self, c)

    # -- scalar calculus ---------------------------------------------------
    def synthesize(self, coeffs: np.ndarray) -> np.ndarray:
        return self._design @ coeffs

    def integrate(self, values: np.ndarray) -> float:
        """Integral against the area element of the radius-r sphere."""
        return float(np.sum(values * self.quad_weights) * self.r**2)

    @property
    def area(self) -> float:
        return 4.0 * np.pi * self.r**2

    def gauss_curvature(self) -> float:
        return 1.0 / self.r**2


class SphereField:
    """Scalar field on a SpectralSphere, stored by coefficients."""

    __slots__ = ("sphere", "coeffs")

    def __init__(self, sphere: SpectralSphere, coeffs: np.ndarray):
        self.sphere = sphere
        self.coeffs = np.asarray(coeffs, dtype=float)

    def values(self) -> np.ndarray:
        return self.sphere.synthesize(self.coeffs)

    def laplacian(self) -> "SphereField":
        return SphereField(self.sphere, -self.sphere.eigenvalues * self.coeffs)

    def evolve(self, tau: float) -> "SphereField":
        if tau < 0:
            raise ValueError("heat time must be nonnegative")
        return SphereField(self.sphere, np.exp(-self.sphere.eigenvalues * tau) * self.coeffs)

    def l2_norm(self) -> float:
        return float(self.sphere.r * np.sqrt(np.sum(self.coeffs**2)))

    def grad_l2_norm(self) -> float:
        """||nabla f||_{L^2}; spectral, via -int f Delta f."""
        return float(np.sqrt(np.sum(self.sphere.eigenvalues * self.coeffs**2)) * self.sphere.r)

    def lebesgue_norm(self, p: float) -> float:
        vals = self.values()
        if np.isinf(p):
            return float(np.max(np.abs(vals)))
        return float(self.sphere.integrate(np.abs(vals) ** p) ** (1.0 / p))

    def __add__(self, other):
        return SphereField(self.sphere, self.coeffs + other.coeffs)

    def __sub__(self, other):
        return SphereField(self.sphere, self.coeffs - other.coeffs)

    def __mul__(self, c):
        return SphereField(self.sphere, self.coeffs * c)

    __rmul__ = __mul__
