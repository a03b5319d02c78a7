"""Discrete 2-surface substrate: periodic charts, metrics, tensor calculus.

The chart is a doubly periodic square [0,2pi)^2 sampled on an n x n grid.
A metric is a symmetric positive definite 2x2 matrix field gamma_ab; all
covariant operations (nabla, div, Delta) are realized through

  - spectral (FFT) derivatives of tensor-field components, and
  - 4th-order centered finite differences of gamma for the Christoffel
    symbols, which are precomputed and cached per metric.

Conventions
-----------
Tensor fields are covariant, components indexed on the grid first:
rank-r fields have shape (n, n, 2, ..., 2) with r trailing index axes.
The covariant derivative prepends the derivative index, so nabla(F) has
components (nabla F)[b, a1..ar] stored with axis order (x, y, b, a1..ar).
Pointwise magnitudes contract every index with the inverse metric:
|F|^2 = gamma^{a1 b1} ... F_{a1..} F_{b1..}.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ChartGrid",
    "MetricField",
    "TensorField",
    "MetricError",
    "build_torus_metric",
    "gauss_curvature",
    "covariant_derivative",
    "divergence",
    "laplace_beltrami",
    "integrate",
    "inner_product",
    "pointwise_norm",
    "lebesgue_norm",
    "bochner_residual",
]


class MetricError(ValueError):
    """Raised when a metric fails positive definiteness at some node."""


@dataclass(frozen=True)
class ChartGrid:
    """Doubly periodic n x n chart on [0, 2pi)^2 with spacing h = 2pi/n."""

    n: int

    def __post_init__(self):
        if self.n < 8 or self.n % 2 != 0:
            raise ValueError(f"grid size must be even and >= 8, got {self.n}")

    @property
    def h(self) -> float:
        return 2.0 * np.pi / self.n

    @property
    def axes(self):
        w = np.arange(self.n) * self.h
        return np.meshgrid(w, w, indexing="ij")

    @property
    def wavenumbers(self) -> np.ndarray:
        return np.fft.fftfreq(self.n, d=1.0 / self.n)


def fft_derivative(values: np.ndarray, axis: int, n: int) -> np.ndarray:
    """Spectral derivative along one of the two grid axes (axis 0 or 1).

    The unpaired Nyquist bin of an even grid carries no sign information for
    a real field, so its derivative symbol is zero; all fully paired modes
    are differentiated exactly.
    """
    k = np.fft.fftfreq(n, d=1.0 / n)
    k[n // 2] = 0.0
    shape = [1] * values.ndim
    shape[axis] = n
    ik = (1j * k).reshape(shape)
    return np.real(np.fft.ifft(ik * np.fft.fft(values, axis=axis), axis=axis))


def fd4_derivative(values: np.ndarray, axis: int, h: float) -> np.ndarray:
    """4th-order centered difference along a periodic grid axis."""
    f1 = np.roll(values, -1, axis=axis)
    f_1 = np.roll(values, 1, axis=axis)
    f2 = np.roll(values, -2, axis=axis)
    f_2 = np.roll(values, 2, axis=axis)
    return (-f2 + 8.0 * f1 - 8.0 * f_1 + f_2) / (12.0 * h)


class TensorField:
    """Covariant S-tangent tensor sampled on the chart (rank 0 = scalar).

    components has shape (n, n) + (2,)*rank.
    """

    __slots__ = ("rank", "components", "n")

    def __init__(self, components: np.ndarray, rank: int | None = None):
        components = np.asarray(components, dtype=float)
        if rank is None:
            rank = components.ndim - 2
        expected = (components.shape[0], components.shape[0]) + (2,) * rank
        if components.shape != expected:
            raise ValueError(
                f"rank-{rank} components must have shape {expected}, got {components.shape}"
            )
        self.rank = rank
        self.components = components
        self.n = components.shape[0]

    @classmethod
    def zeros(cls, n: int, rank: int) -> "TensorField":
        return cls(np.zeros((n, n) + (2,) * rank), rank)

    @property
    def flat(self) -> np.ndarray:
        """(n^2, 2^rank) view used by dense linear algebra."""
        return self.components.reshape(self.n * self.n, 2**self.rank)

    @classmethod
    def from_flat(cls, flat: np.ndarray, n: int, rank: int) -> "TensorField":
        return cls(np.asarray(flat, dtype=float).reshape((n, n) + (2,) * rank), rank)

    def __add__(self, other):
        return TensorField(self.components + other.components, self.rank)

    def __sub__(self, other):
        return TensorField(self.components - other.components, self.rank)

    def __mul__(self, c):
        return TensorField(self.components * c, self.rank)

    __rmul__ = __mul__


class MetricField:
    """Riemannian metric gamma_ab on a ChartGrid, with cached derived data.

    Immutable after construction: inverse, area density sqrt|gamma| and the
    Christoffel symbols are computed once.  Eigenbases attached by the heat
    module are memoized on the instance and never mutated afterwards.
    """

    def __init__(self, grid: ChartGrid, gamma: np.ndarray):
        gamma = np.asarray(gamma, dtype=float)
        if gamma.shape != (grid.n, grid.n, 2, 2):
            raise ValueError(f"gamma must have shape {(grid.n, grid.n, 2, 2)}")
        tr = gamma[..., 0, 0] + gamma[..., 1, 1]
        det = gamma[..., 0, 0] * gamma[..., 1, 1] - gamma[..., 0, 1] * gamma[..., 1, 0]
        bad = ~((tr > 0) & (det > 0))
        if np.any(bad):
            i, j = np.argwhere(bad)[0]
            raise MetricError(
                f"metric not positive definite at node ({i},{j}): "
                f"gamma={gamma[i, j].tolist()}"
            )
        self.grid = grid
        self.gamma = gamma
        self.det = det
        self.sqrt_det = np.sqrt(det)
        inv = np.empty_like(gamma)
        inv[..., 0, 0] = gamma[..., 1, 1] / det
        inv[..., 1, 1] = gamma[..., 0, 0] / det
        inv[..., 0, 1] = -gamma[..., 0, 1] / det
        inv[..., 1, 0] = -gamma[..., 1, 0] / det
        self.inv_gamma = inv
        self.christoffel = self._christoffel()
        self._cache: dict = {}

    @property
    def n(self) -> int:
        return self.grid.n

    @property
    def h(self) -> float:
        return self.grid.h

    def _christoffel(self) -> np.ndarray:
        """Gamma^c_{ab} from 4th-order differences of gamma; shape (n,n,2,2,2)."""
        h = self.grid.h
        dg = np.stack(
            [fd4_derivative(self.gamma, axis=ax, h=h) for ax in (0, 1)], axis=2
        )  # dg[..., d, a, b] = partial_d gamma_ab
        # Gamma^c_{ab} = 1/2 g^{cd} (d_a g_db + d_b g_da - d_d g_ab);
        # direct loop keeps the index gymnastics honest, only 2^3 terms.
        gam = np.zeros((self.n, self.n, 2, 2, 2))
        for c in range(2):
            for a in range(2):
                for b in range(2):
                    acc = np.zeros((self.n, self.n))
                    for d in range(2):
                        acc += self.inv_gamma[..., c, d] * (
                            dg[..., a, d, b] + dg[..., b, d, a] - dg[..., d, a, b]
                        )
                    gam[..., c, a, b] = 0.5 * acc
        return gam

    def metric_distortion(self) -> float:
        """sup-node operator norm of gamma - identity."""
        diff = self.gamma - np.eye(2)
        return float(np.max(np.linalg.norm(diff, ord=2, axis=(2, 3))))


def _band_limited_symmetric(n: int, modes: int, rng: np.random.Generator) -> np.ndarray:
    """Random real symmetric 2x2 field from Fourier modes |m|_inf <= modes."""
    w1, w2 = np.meshgrid(np.arange(n) * 2 * np.pi / n, np.arange(n) * 2 * np.pi / n, indexing="ij")
    out = np.zeros((n, n, 2, 2))
    for a in range(2):
        for b in range(a, 2):
            f = np.zeros((n, n))
            for m1 in range(-modes, modes + 1):
                for m2 in range(-modes, modes + 1):
                    if m1 == 0 and m2 == 0:
                        continue
                    amp = rng.normal() / (1.0 + m1 * m1 + m2 * m2)
                    ph = rng.uniform(0, 2 * np.pi)
                    f += amp * np.cos(m1 * w1 + m2 * w2 + ph)
            out[..., a, b] = f
            out[..., b, a] = f
    return out


def build_torus_metric(n: int, spec: dict | str) -> tuple[ChartGrid, MetricField]:
    """Build a metric on the periodic chart from a recipe.

    spec is one of
      "flat" or {"recipe": "flat"}
      {"recipe": "conformal", "amplitude": a, "modes": m, "seed": s}
          gamma = exp(2 phi) delta with band-limited phi;
          with seed omitted, phi = amplitude * sin(w1) * sin(w2)
          (a fixed deterministic profile used by closed-form tests).
      {"recipe": "perturbed", "epsilon": e, "seed": s, "modes": m}
          gamma = delta + perturbation, normalized so the sup-node
          operator norm of (gamma - delta) equals epsilon.
    """
    grid = ChartGrid(n)
    if isinstance(spec, str):
        spec = {"recipe": spec}
    recipe = spec.get("recipe", "flat")
    eye = np.broadcast_to(np.eye(2), (n, n, 2, 2)).copy()
    if recipe == "flat":
        return grid, MetricField(grid, eye)
    if recipe == "conformal":
        amplitude = float(spec.get("amplitude", 0.1))
        modes = int(spec.get("modes", 1))
        w1, w2 = grid.axes
        if "seed" in spec and spec["seed"] is not None:
            rng = np.random.default_rng(int(spec["seed"]))
            phi = np.zeros((n, n))
            for m1 in range(-modes, modes + 1):
                for m2 in range(-modes, modes + 1):
                    if m1 == 0 and m2 == 0:
                        continue
                    phi += (
                        rng.normal()
                        / (1.0 + m1 * m1 + m2 * m2)
                        * np.cos(m1 * w1 + m2 * w2 + rng.uniform(0, 2 * np.pi))
                    )
            phi *= amplitude / max(np.max(np.abs(phi)), 1e-300)
        else:
            phi = amplitude * np.sin(modes * w1) * np.sin(modes * w2)
        gamma = np.exp(2.0 * phi)[..., None, None] * eye
        return grid, MetricField(grid, gamma)
    if recipe == "perturbed":
        eps = float(spec.get("epsilon", 0.05))
        modes = int(spec.get("modes", 2))
        rng = np.random.default_rng(int(spec.get("seed", 0)))
        pert = _band_limited_symmetric(n, modes, rng)
        sup = np.max(np.linalg.norm(pert, ord=2, axis=(2, 3)))
        gamma = eye + pert * (eps / max(sup, 1e-300))
        return grid, MetricField(grid, gamma)
    raise ValueError(f"unknown metric recipe {recipe!r}")


def conformal_phi(grid: ChartGrid, amplitude: float, modes: int = 1) -> np.ndarray:
    """The deterministic conformal profile used by build_torus_metric."""
    w1, w2 = grid.axes
    return amplitude * np.sin(modes * w1) * np.sin(modes * w2)


def gauss_curvature(metric: MetricField) -> TensorField:
    """Gauss curvature by the Brioschi formula from finite differences of gamma."""
    h = metric.h
    E = metric.gamma[..., 0, 0]
    F = metric.gamma[..., 0, 1]
    G = metric.gamma[..., 1, 1]

    def d(f, ax):
        return fd4_derivative(f, axis=ax, h=h)

    Eu, Ev = d(E, 0), d(E, 1)
    Gu, Gv = d(G, 0), d(G, 1)
    Fu, Fv = d(F, 0), d(F, 1)
    Evv = d(Ev, 1)
    Guu = d(Gu, 0)
    Fuv = d(Fu, 1)

    det = E * G - F * F
    m1 = (
        (-0.5 * Evv + Fuv - 0.5 * Guu) * (E * G - F * F)
        - (0.5 * Eu) * ((Fv - 0.5 * Gu) * G - F * (0.5 * Gv))
        + (Fu - 0.5 * Ev) * ((Fv - 0.5 * Gu) * F - E * (0.5 * Gv))
    )
    # Expand both 3x3 determinants along the first row.
    a11, a12, a13 = -0.5 * Evv + Fuv - 0.5 * Guu, 0.5 * Eu, Fu - 0.5 * Ev
    a21, a22, a23 = Fv - 0.5 * Gu, E, F
    a31, a32, a33 = 0.5 * Gv, F, G
    det1 = a11 * (a22 * a33 - a23 * a32) - a12 * (a21 * a33 - a23 * a31) + a13 * (
        a21 * a32 - a22 * a31
    )
    b11, b12, b13 = np.zeros_like(E), 0.5 * Ev, 0.5 * Gu
    b21, b22, b23 = 0.5 * Ev, E, F
    b31, b32, b33 = 0.5 * Gu, F, G
    det2 = b11 * (b22 * b33 - b23 * b32) - b12 * (b21 * b33 - b23 * b31) + b13 * (
        b21 * b32 - b22 * b31
    )
    K = (det1 - det2) / (det * det)
    return TensorField(K, 0)


def covariant_derivative(F: TensorField, metric: MetricField) -> TensorField:
    """nabla_b F_{a1..ar}: spectral partials minus Christoffel corrections.

    The derivative index is prepended: result rank r+1 with axes (b, a1..ar).
    """
    if F.rank > 3:
        raise ValueError("covariant_derivative capped at rank 3 input")
    n = metric.n
    comps = F.components
    out_shape = (n, n, 2) + (2,) * F.rank
    out = np.empty(out_shape)
    for b in range(2):
        out[:, :, b, ...] = fft_derivative(comps, axis=b, n=n)
    gam = metric.christoffel  # Gamma^c_{ab} at [..., c, a, b], symmetric in (a, b)
    for i in range(F.rank):
        # subtract Gamma^c_{b a_i} F_{a1..c..ar}; contract F's slot i against
        # the upper index c, leaving the derivative index b and the fresh
        # lower index a_i free.
        moved = np.moveaxis(comps, 2 + i, -1)
        corr = np.einsum("xycab,xy...c->xyab...", gam, moved)
        # corr axes: (x, y, b, a_i, a_1..a_{i-1}, a_{i+1}..a_r); put a_i back.
        out -= np.moveaxis(corr, 3, 3 + i)
    return TensorField(out, F.rank + 1)


def divergence(F: TensorField, metric: MetricField) -> TensorField:
    """(div F)_{a2..} = gamma^{bc} nabla_b F_{c a2..}."""
    if F.rank < 1:
        raise ValueError("divergence requires rank >= 1")
    dF = covariant_derivative(F, metric)
    out = np.einsum("xybc,xybc...->xy...", metric.inv_gamma, dF.components)
    return TensorField(out, F.rank - 1)


def laplace_beltrami(F: TensorField, metric: MetricField) -> TensorField:
    """Delta F = gamma^{bc} nabla_b nabla_c F (trace of two covariant derivatives)."""
    if F.rank > 2:
        raise ValueError("laplace_beltrami capped at rank 2")
    return divergence(covariant_derivative(F, metric), metric)


def pointwise_norm(F: TensorField, metric: MetricField) -> np.ndarray:
    """|F| with full metric contraction, shape (n, n)."""
    sq = F.components.copy()
    other = F.components
    for i in range(F.rank):
        other = np.einsum(
            "xyab,xy...b->xy...a",
            metric.inv_gamma,
            np.moveaxis(other, 2 + i, -1),
        )
        other = np.moveaxis(other, -1, 2 + i)
    normsq = np.sum(sq * other, axis=tuple(range(2, sq.ndim))) if F.rank else sq * other
    return np.sqrt(np.maximum(normsq, 0.0))


def integrate(f: TensorField | np.ndarray, metric: MetricField) -> float:
    """integral of a scalar against the area element sqrt|gamma| h^2."""
    values = f.components if isinstance(f, TensorField) else np.asarray(f)
    return float(np.sum(values * metric.sqrt_det) * metric.h**2)


def inner_product(F: TensorField, G: TensorField, metric: MetricField) -> float:
    """L^2(dmu) pairing with metric contraction of all indices."""
    if F.rank != G.rank:
        raise ValueError("rank mismatch")
    other = G.components
    for i in range(F.rank):
        other = np.einsum(
            "xyab,xy...b->xy...a", metric.inv_gamma, np.moveaxis(other, 2 + i, -1)
        )
        other = np.moveaxis(other, -1, 2 + i)
    comps = F.components
    dens = np.sum(comps * other, axis=tuple(range(2, comps.ndim))) if F.rank else comps * other
    return integrate(dens, metric)


def lebesgue_norm(F: TensorField, p: float, metric: MetricField) -> float:
    """||F||_{L^p(S)} with |F| metric-contracted; p = inf gives the sup."""
    mag = pointwise_norm(F, metric)
    if np.isinf(p):
        return float(np.max(mag))
    return float(integrate(mag**p, metric) ** (1.0 / p))


def save_field(path: str, F: TensorField) -> None:
    """CSV dump: header row `rank,n`, then the row-major component values."""
    with open(path, "w") as fh:
        fh.write(f"{F.rank},{F.n}\n")
        for row in F.flat:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def load_field(path: str) -> TensorField:
    with open(path) as fh:
        rank, n = (int(v) for v in fh.readline().split(","))
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    return TensorField.from_flat(data, n, rank)


def bochner_residual(F: TensorField, metric: MetricField) -> tuple[float, float, float]:
    """Evaluate both sides of the Bochner identity; returns (lhs, rhs, residual).

    Scalars:  int |nabla^2 f|^2 = int |Delta f|^2 - int K |nabla f|^2
    Rank 1 :  int |nabla^2 F|^2 = int |Delta F|^2
                  - int K (2 |nabla F|^2 - |div F|^2) + int K^2 |F|^2
    """
    if F.rank not in (0, 1):
        raise ValueError("bochner_residual accepts rank 0 or 1")
    K = gauss_curvature(metric).components
    dF = covariant_derivative(F, metric)
    d2F = covariant_derivative(dF, metric)
    lhs = integrate(pointwise_norm(d2F, metric) ** 2, metric)
    lap = laplace_beltrami(F, metric)
    lap_sq = pointwise_norm(lap, metric) ** 2
    grad_sq = pointwise_norm(dF, metric) ** 2
    if F.rank == 0:
        rhs = integrate(lap_sq, metric) - integrate(K * grad_sq, metric)
    else:
        div_sq = pointwise_norm(divergence(F, metric), metric) ** 2
        f_sq = pointwise_norm(F, metric) ** 2
        rhs = (
            integrate(lap_sq, metric)
            - integrate(K * (2.0 * grad_sq - div_sq), metric)
            + integrate(K * K * f_sq, metric)
        )
    return lhs, rhs, lhs - rhs
