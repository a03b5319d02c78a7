"""Synthetic geodesic foliations of [0,1] x S with prescribed connection data.

The slice metric evolves by the first variation along the null generator,

    d/ds gamma_ab = 2 chi_ab,    chi = (1/2) tr_chi gamma + chi_hat,

with tr_chi, chi_hat (trace-free), the torsion zeta and the curvature
1-form beta all prescribed as band-limited families rather than derived
from any field equations: the estimate harness only consumes the norms
appearing in the smallness conditions, so synthetic data spans the
hypothesis class directly.  No compatibility between beta and chi is
enforced.

On the periodic-chart substrate everything is available for tensors; the
sphere substrate supports exactly one foliation, the round cone
gamma(s) = ((r0+s)/r0)^2 gamma(0), restricted to scalar fields.

nabla_L acts on covariant components in transported coordinates as

    (nabla_L F)_{a1..ar} = d/ds F_{a1..ar} - sum_i chi_{a_i}^c F_{..c..},

the unique realization compatible with nabla_L gamma = 0; s-derivatives
use 4th-order stencils (one-sided at the endpoints) and transport
equations are integrated by a classical one-step 4th-order scheme with
cubic-spline evaluation of off-grid data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from . import heat
from . import surface as sf
from .sphere import SpectralSphere, SphereField
from .surface import ChartGrid, MetricField, TensorField

__all__ = [
    "FoliationConfig",
    "FoliatedMetric",
    "FoliatedTensor",
    "SphereCone",
    "minkowski_cone",
    "perturbed_cone",
    "product_config",
    "build_foliation",
    "nabla_L",
    "transport_solve",
    "commutator_residual",
    "reverse_pair",
    "assumption_report",
]

VOLUME_COMPARABILITY = 2.0 * (1.5) ** 6


def _s_derivative(values: np.ndarray, h: float) -> np.ndarray:
    """4th-order d/ds along axis 0, one-sided at the ends."""
    n = values.shape[0]
    if n < 6:
        raise ValueError("need at least 6 slices for 4th-order s-derivatives")
    out = np.empty_like(values)
    out[2:-2] = (values[:-4] - 8 * values[1:-3] + 8 * values[3:-1] - values[4:]) / (12 * h)
    out[0] = (-25 * values[0] + 48 * values[1] - 36 * values[2] + 16 * values[3] - 3 * values[4]) / (12 * h)
    out[1] = (-3 * values[0] - 10 * values[1] + 18 * values[2] - 6 * values[3] + values[4]) / (12 * h)
    out[-1] = (25 * values[-1] - 48 * values[-2] + 36 * values[-3] - 16 * values[-4] + 3 * values[-5]) / (12 * h)
    out[-2] = (3 * values[-1] + 10 * values[-2] - 18 * values[-3] + 6 * values[-4] - values[-5]) / (12 * h)
    return out


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

@dataclass
class FoliationConfig:
    """Prescribed foliation data; the field entries are callables of s.

    trchi(s) -> (n, n) scalar field (or float broadcast);
    chi_hat_raw(s) -> (n, n, 2, 2) symmetric field, projected to its
    gamma(s)-trace-free part during integration; zeta/beta(s) -> (n, n, 2).
    trchi_integral, when provided with chi_hat_raw None, switches the
    metric integration to the exact exponential path.
    """

    substrate: dict
    r0: float
    n_s: int
    delta0_target: float = 0.05
    trchi: object = None
    trchi_integral: object = None
    chi_hat_raw: object = None
    zeta: object = None
    beta: object = None
    recipe: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.r0 <= 0:
            raise ValueError("r0 must be positive")
        if self.n_s < 6:
            raise ValueError("need n_s >= 6")


def minkowski_cone(r0: float, substrate: dict, n_s: int = 24, delta0_target: float = 0.05) -> FoliationConfig:
    """Exact round-cone background: tr_chi = 2/(r0+s), all perturbations zero."""
    return FoliationConfig(
        substrate=substrate,
        r0=r0,
        n_s=n_s,
        delta0_target=delta0_target,
        trchi=lambda s: 2.0 / (r0 + s),
        trchi_integral=lambda s: 2.0 * np.log((r0 + s) / r0),
        recipe={"kind": "minkowski_cone", "substrate": substrate, "r0": r0, "n_s": n_s,
                "delta0_target": delta0_target},
    )


def product_config(substrate: dict, n_s: int = 24, delta0_target: float = 0.05) -> FoliationConfig:
    """Static product metric (chi = 0): the A1 negative control."""
    return FoliationConfig(
        substrate=substrate,
        r0=1.0,
        n_s=n_s,
        delta0_target=delta0_target,
        trchi=lambda s: 0.0,
        trchi_integral=lambda s: 0.0,
        recipe={"kind": "product", "substrate": substrate, "n_s": n_s,
                "delta0_target": delta0_target},
    )


def _trig_pattern(grid: ChartGrid, rng: np.random.Generator, modes: int, s_modes: int):
    """Smooth unit-sup pattern (s, omega) as a closed-form callable."""
    w1, w2 = grid.axes
    terms = []
    for m1 in range(-modes, modes + 1):
        for m2 in range(0, modes + 1):
            if m2 == 0 and m1 <= 0:
                continue
            for q in range(0, s_modes + 1):
                amp = rng.normal() / (1.0 + m1 * m1 + m2 * m2 + q * q)
                ph = rng.uniform(0, 2 * np.pi)
                terms.append((amp, m1, m2, q, ph))
    sup = sum(abs(t[0]) for t in terms) or 1.0

    def pat(s):
        acc = np.zeros_like(w1)
        for amp, m1, m2, q, ph in terms:
            acc += amp * np.cos(m1 * w1 + m2 * w2 + ph) * np.cos(np.pi * q * s)
        return acc / sup

    return pat


def perturbed_cone(
    r0: float,
    substrate: dict,
    eps: float,
    seed: int = 0,
    n_s: int = 24,
    modes: int = 2,
    s_modes: int = 2,
    delta0_target: float = 0.05,
) -> FoliationConfig:
    """Cone background plus eps-scaled band-limited perturbations of all fields.

    Channel scalings are chosen so each measured smallness norm is close to
    eps itself (the A1 channel exactly linear in eps).
    """
    if substrate.get("kind") != "torus":
        raise ValueError("perturbed foliations require the torus substrate")
    grid = ChartGrid(substrate["n"])
    rng = np.random.default_rng(seed)
    pat_tr = _trig_pattern(grid, rng, modes, s_modes)
    pats_hat = [[_trig_pattern(grid, rng, modes, s_modes) for _ in range(2)] for _ in range(2)]
    pats_zeta = [_trig_pattern(grid, rng, modes, s_modes) for _ in range(2)]
    pats_beta = [_trig_pattern(grid, rng, modes, s_modes) for _ in range(2)]

    area = (2.0 * np.pi) ** 2

    def trchi(s):
        return 2.0 / (r0 + s) + (eps / (r0 + s)) * pat_tr(s)

    def chi_hat_raw(s):
        out = np.empty((grid.n, grid.n, 2, 2))
        out[..., 0, 0] = pats_hat[0][0](s)
        out[..., 1, 1] = pats_hat[1][1](s)
        off = 0.5 * (pats_hat[0][1](s) + pats_hat[1][0](s))
        out[..., 0, 1] = off
        out[..., 1, 0] = off
        return (eps / 4.0) * out

    def zeta(s):
        return (eps / 4.0) * np.stack([p(s) for p in pats_zeta], axis=-1)

    def beta(s):
        return (eps / (2.0 * math.sqrt(area))) * np.stack([p(s) for p in pats_beta], axis=-1)

    return FoliationConfig(
        substrate=substrate,
        r0=r0,
        n_s=n_s,
        delta0_target=delta0_target,
        trchi=trchi,
        chi_hat_raw=chi_hat_raw,
        zeta=zeta,
        beta=beta,
        recipe={"kind": "perturbed_cone", "substrate": substrate, "r0": r0, "n_s": n_s,
                "eps": eps, "seed": seed, "modes": modes, "s_modes": s_modes,
                "delta0_target": delta0_target},
    )


def config_from_recipe(recipe: dict) -> FoliationConfig:
    kind = recipe.get("kind", "minkowski_cone")
    args = {k: v for k, v in recipe.items() if k != "kind"}
    if kind == "minkowski_cone":
        return minkowski_cone(**args)
    if kind == "product":
        return product_config(**args)
    if kind == "perturbed_cone":
        return perturbed_cone(**args)
    raise ValueError(f"unknown foliation recipe {kind!r}")


# ---------------------------------------------------------------------------
# Foliated metric (torus substrate)
# ---------------------------------------------------------------------------

class FoliatedMetric:
    """s-indexed family of slice metrics with connection data on the grid."""

    def __init__(self, config: FoliationConfig, grid: ChartGrid, slices, chi_full, trchi_vals,
                 chi_hat, zeta, beta):
        self.config = config
        self.grid = grid
        self.s_grid = np.linspace(0.0, 1.0, config.n_s)
        self.h_s = self.s_grid[1] - self.s_grid[0]
        self.slices: list[MetricField] = slices
        self.chi_full = chi_full          # chi_ab per slice, (n_s, n, n, 2, 2)
        self.trchi_vals = trchi_vals      # (n_s, n, n)
        self.chi_hat = chi_hat            # trace-free part, same layout
        self.zeta = zeta                  # (n_s, n, n, 2)
        self.beta = beta
        self.r = config.r0 + self.s_grid
        self._cache: dict = {}

    @property
    def n_s(self) -> int:
        return len(self.s_grid)

    @property
    def n(self) -> int:
        return self.grid.n

    def chi_mixed(self) -> np.ndarray:
        """chi_a{}^c = chi_ab gamma^{bc} per slice."""
        if "chi_mixed" not in self._cache:
            gam_inv = np.stack([m.inv_gamma for m in self.slices])
            self._cache["chi_mixed"] = np.einsum("sxyab,sxybc->sxyac", self.chi_full, gam_inv)
        return self._cache["chi_mixed"]

    def curvature(self, i: int) -> np.ndarray:
        key = ("K", i)
        if key not in self._cache:
            self._cache[key] = sf.gauss_curvature(self.slices[i]).components
        return self._cache[key]

    def basis(self, i: int, rank: int = 0) -> heat.EigenBasis:
        return heat.eigendecompose(self.slices[i], rank)

    def spectrum_union(self) -> np.ndarray:
        return np.concatenate([self.basis(i, 0).lam for i in range(self.n_s)])

    def chi_spline(self) -> CubicSpline:
        if "chi_spline" not in self._cache:
            self._cache["chi_spline"] = CubicSpline(self.s_grid, self.chi_mixed(), axis=0)
        return self._cache["chi_spline"]

    def trchi_spline(self):
        if "trchi_spline" not in self._cache:
            cfg = self.config
            if cfg.trchi is not None:
                self._cache["trchi_spline"] = lambda s: np.broadcast_to(
                    np.asarray(cfg.trchi(s), dtype=float), (self.n, self.n)
                )
            else:
                spl = CubicSpline(self.s_grid, self.trchi_vals, axis=0)
                self._cache["trchi_spline"] = spl
        return self._cache["trchi_spline"]


@dataclass
class FoliatedTensor:
    """Rank-r covariant field on the foliation, sampled per slice.

    values has shape (n_s, n, n) + (2,)*rank.
    """

    values: np.ndarray
    rank: int
    foliation: "FoliatedMetric"

    def __post_init__(self):
        expected = (self.foliation.n_s, self.foliation.n, self.foliation.n) + (2,) * self.rank
        if self.values.shape != expected:
            raise ValueError(f"expected shape {expected}, got {self.values.shape}")

    def slice(self, i: int) -> TensorField:
        return TensorField(self.values[i], self.rank)

    @classmethod
    def from_slices(cls, fields: list[TensorField], foliation: "FoliatedMetric") -> "FoliatedTensor":
        vals = np.stack([f.components for f in fields])
        return cls(vals, fields[0].rank, foliation)

    def __add__(self, other):
        return FoliatedTensor(self.values + other.values, self.rank, self.foliation)

    def __sub__(self, other):
        return FoliatedTensor(self.values - other.values, self.rank, self.foliation)

    def __mul__(self, c):
        return FoliatedTensor(self.values * c, self.rank, self.foliation)

    __rmul__ = __mul__


def _trace_free(raw: np.ndarray, metric_gamma: np.ndarray, metric_inv: np.ndarray) -> np.ndarray:
    tr = np.einsum("...ab,...ab->...", metric_inv, raw)
    return raw - 0.5 * tr[..., None, None] * metric_gamma


def build_foliation(config: FoliationConfig, metric0: MetricField | None = None):
    """Integrate the first-variation system on the s grid.

    Returns a FoliatedMetric on the torus substrate or a SphereCone on the
    sphere substrate (which only admits the exact cone).  Loss of positive
    definiteness reports the slice and node.
    """
    sub = config.substrate
    if sub.get("kind") == "sphere":
        if config.chi_hat_raw is not None:
            raise ValueError("sphere substrate supports only the exact cone foliation")
        return SphereCone(config)
    grid, m0 = (metric0.grid, metric0) if metric0 is not None else sf.build_torus_metric(
        sub["n"], sub.get("spec", "flat")
    )
    n_s = config.n_s
    s_grid = np.linspace(0.0, 1.0, n_s)
    h = s_grid[1] - s_grid[0]
    n = grid.n

    def eval_trchi(s):
        val = config.trchi(s) if config.trchi is not None else 0.0
        return np.broadcast_to(np.asarray(val, dtype=float), (n, n)).copy()

    def rhs(s, gamma):
        det = gamma[..., 0, 0] * gamma[..., 1, 1] - gamma[..., 0, 1] ** 2
        inv = np.empty_like(gamma)
        inv[..., 0, 0] = gamma[..., 1, 1] / det
        inv[..., 1, 1] = gamma[..., 0, 0] / det
        inv[..., 0, 1] = inv[..., 1, 0] = -gamma[..., 0, 1] / det
        tr = eval_trchi(s)
        chi = 0.5 * tr[..., None, None] * gamma
        if config.chi_hat_raw is not None:
            chi = chi + _trace_free(config.chi_hat_raw(s), gamma, inv)
        return 2.0 * chi

    gammas = [m0.gamma]
    if config.chi_hat_raw is None and config.trchi_integral is not None:
        for s in s_grid[1:]:
            factor = np.exp(np.broadcast_to(np.asarray(config.trchi_integral(s), dtype=float), (n, n)))
            gammas.append(factor[..., None, None] * m0.gamma)
    else:
        gam = m0.gamma.copy()
        for i in range(n_s - 1):
            s = s_grid[i]
            k1 = rhs(s, gam)
            k2 = rhs(s + h / 2, gam + h / 2 * k1)
            k3 = rhs(s + h / 2, gam + h / 2 * k2)
            k4 = rhs(s + h, gam + h * k3)
            gam = gam + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            gammas.append(gam.copy())

    slices = []
    for i, gam in enumerate(gammas):
        try:
            slices.append(MetricField(grid, gam))
        except sf.MetricError as exc:
            raise sf.MetricError(f"slice {i} (s={s_grid[i]:.4f}): {exc}") from exc

    trchi_vals = np.stack([eval_trchi(s) for s in s_grid])
    chi_full = np.empty((n_s, n, n, 2, 2))
    chi_hat = np.empty_like(chi_full)
    for i, s in enumerate(s_grid):
        gam = gammas[i]
        hat = np.zeros((n, n, 2, 2))
        if config.chi_hat_raw is not None:
            hat = _trace_free(config.chi_hat_raw(s), gam, slices[i].inv_gamma)
        chi_hat[i] = hat
        chi_full[i] = 0.5 * trchi_vals[i][..., None, None] * gam + hat
    zeros1 = np.zeros((n_s, n, n, 2))
    zeta = np.stack([np.asarray(config.zeta(s), dtype=float) for s in s_grid]) if config.zeta else zeros1
    beta = np.stack([np.asarray(config.beta(s), dtype=float) for s in s_grid]) if config.beta else zeros1.copy()
    return FoliatedMetric(config, grid, slices, chi_full, trchi_vals, chi_hat, zeta, beta)


# ---------------------------------------------------------------------------
# nabla_L and transport
# ---------------------------------------------------------------------------

def nabla_L(F: FoliatedTensor) -> FoliatedTensor:
    """Projected derivative along the null generator, in transported coordinates."""
    if F.rank > 2:
        raise ValueError("nabla_L capped at rank 2")
    fol = F.foliation
    out = _s_derivative(F.values, fol.h_s)
    chi = fol.chi_mixed()
    for i in range(F.rank):
        moved = np.moveaxis(F.values, 3 + i, -1)
        corr = np.einsum("sxyac,sxy...c->sxya...", chi, moved)
        out -= np.moveaxis(corr, 3, 3 + i)
    return FoliatedTensor(out, F.rank, fol)


def _chi_correction(chi_s: np.ndarray, values: np.ndarray, rank: int) -> np.ndarray:
    """sum_i chi_{a_i}{}^c values_{..c..} at a single slice."""
    acc = np.zeros_like(values)
    for i in range(rank):
        moved = np.moveaxis(values, 2 + i, -1)
        corr = np.einsum("xyac,xy...c->xya...", chi_s, moved)
        acc += np.moveaxis(corr, 2, 2 + i)
    return acc


def transport_solve(
    k_weight: float,
    G: FoliatedTensor,
    F0: TensorField,
    foliation: FoliatedMetric | None = None,
    chi_coeff: float = 1.0,
) -> FoliatedTensor:
    """Integrate nabla_L F + k_weight trchi F = G with F(0) = F0.

    chi_coeff scales the chi term of nabla_L (chi_coeff=2.0 realizes the
    equation nabla_L W - chi . W = F used by the reverse transport pair).
    """
    fol = foliation or G.foliation
    rank = F0.rank
    s_grid = fol.s_grid
    h = fol.h_s
    chi_spl = fol.chi_spline()
    tr_spl = fol.trchi_spline()
    g_spl = CubicSpline(s_grid, G.values, axis=0)

    def rhs(s, vals):
        tr = np.asarray(tr_spl(s), dtype=float)
        out = g_spl(s) - k_weight * tr[(...,) + (None,) * rank] * vals
        if rank:
            out += chi_coeff * _chi_correction(chi_spl(s), vals, rank)
        return out

    vals = F0.components.copy()
    sol = [vals]
    for i in range(len(s_grid) - 1):
        s = s_grid[i]
        k1 = rhs(s, vals)
        k2 = rhs(s + h / 2, vals + h / 2 * k1)
        k3 = rhs(s + h / 2, vals + h / 2 * k2)
        k4 = rhs(s + h, vals + h * k3)
        vals = vals + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        sol.append(vals.copy())
    return FoliatedTensor(np.stack(sol), rank, fol)


def integrate_along_L(G: FoliatedTensor) -> FoliatedTensor:
    """Cumulative integral int_0^s G, a transport solve with zero weight."""
    fol = G.foliation
    return transport_solve(0.0, G, TensorField.zeros(fol.n, G.rank), fol)


# ---------------------------------------------------------------------------
# Commutators, reverse pair, assumptions
# ---------------------------------------------------------------------------

def _foliate_op(F: FoliatedTensor, op) -> FoliatedTensor:
    fields = [op(F.slice(i), F.foliation.slices[i]) for i in range(F.foliation.n_s)]
    return FoliatedTensor.from_slices(fields, F.foliation)


def grad_f(F: FoliatedTensor) -> FoliatedTensor:
    return _foliate_op(F, sf.covariant_derivative)


def div_f(F: FoliatedTensor) -> FoliatedTensor:
    return _foliate_op(F, sf.divergence)


def lap_f(F: FoliatedTensor) -> FoliatedTensor:
    return _foliate_op(F, sf.laplace_beltrami)


def commutator_residual(F: FoliatedTensor, which: str = "scalar") -> dict:
    """Evaluate both sides of a commutator identity on the discrete foliation.

    which = "scalar":     [nabla_L, nabla] f = -chi . nabla f
    which = "divergence": L(div F) - div(nabla_L F)
                          = -chi . nabla F + (trchi/2 zeta + chi_hat . zeta - beta) . F
    which = "laplacian":  L(Delta f) - Delta(L f)
                          = -trchi Delta f - 2 chi_hat . nabla^2 f
                            + (nabla trchi + 2 chi_hat . zeta + trchi zeta) . nabla f
    Returns sup-norm residual and the sup of both sides.
    """
    fol = F.foliation
    inv = np.stack([m.inv_gamma for m in fol.slices])
    if which == "scalar":
        if F.rank != 0:
            raise ValueError("scalar commutator needs a scalar input")
        lhs = nabla_L(grad_f(F)).values - grad_f(nabla_L(F)).values
        gradF = grad_f(F).values
        rhs = -np.einsum("sxyac,sxyc->sxya", np.einsum("sxyab,sxybc->sxyac", fol.chi_full, inv), gradF)
    elif which == "divergence":
        if F.rank != 1:
            raise ValueError("divergence commutator needs a 1-form")
        lhs = _s_derivative(div_f(F).values, fol.h_s) - div_f(nabla_L(F)).values
        gradF = grad_f(F).values  # (s,x,y,b,a)
        chi_up = np.einsum("sxyab,sxybc,sxyad->sxydc", fol.chi_full, inv, inv)  # chi^{dc}
        term1 = -np.einsum("sxydc,sxydc->sxy", chi_up, gradF)
        coeff = (
            0.5 * fol.trchi_vals[..., None] * fol.zeta
            + np.einsum("sxyab,sxybc,sxyc->sxya", fol.chi_hat, inv, fol.zeta)
            - fol.beta
        )
        rhs = term1 + np.einsum("sxya,sxyab,sxyb->sxy", coeff, inv, F.values)
    elif which == "laplacian":
        if F.rank != 0:
            raise ValueError("laplacian commutator needs a scalar input")
        lhs = _s_derivative(lap_f(F).values, fol.h_s) - lap_f(nabla_L(F)).values
        lap = lap_f(F).values
        hess = grad_f(grad_f(F)).values  # (s,x,y,b,a)
        gradF = grad_f(F).values
        hat_up = np.einsum("sxyab,sxybc,sxyad->sxydc", fol.chi_hat, inv, inv)
        dtr = np.stack(
            [np.stack([sf.fft_derivative(fol.trchi_vals[i], axis=ax, n=fol.n) for ax in (0, 1)], axis=-1)
             for i in range(fol.n_s)]
        )
        coeff = dtr + 2.0 * np.einsum("sxyab,sxybc,sxyc->sxya", fol.chi_hat, inv, fol.zeta) \
            + fol.trchi_vals[..., None] * fol.zeta
        rhs = (
            -fol.trchi_vals * lap
            - 2.0 * np.einsum("sxydc,sxydc->sxy", hat_up, hess)
            + np.einsum("sxya,sxyab,sxyb->sxy", coeff, inv, gradF)
        )
    else:
        raise ValueError(f"unknown commutator {which!r}")
    return {
        "which": which,
        "residual_sup": float(np.max(np.abs(lhs - rhs))),
        "lhs_sup": float(np.max(np.abs(lhs))),
        "rhs_sup": float(np.max(np.abs(rhs))),
    }


def reverse_pair(F: FoliatedTensor):
    """Solve the paired transport problems for a 1-form F and their defect.

    w solves nabla_L w = div F, w(0) = 0; W solves nabla_L W - chi.W = F,
    W(0) = 0.  Returns (w, W, defect) where defect = div W - w.
    """
    if F.rank != 1:
        raise ValueError("reverse_pair needs a 1-form")
    fol = F.foliation
    w = transport_solve(0.0, div_f(F), TensorField.zeros(fol.n, 0), fol)
    W = transport_solve(0.0, F, TensorField.zeros(fol.n, 1), fol, chi_coeff=2.0)
    defect = div_f(W) - w
    return w, W, defect


def assumption_report(fol) -> dict:
    """Measured smallness constants of the foliation hypotheses.

    Returns every norm of the A1/A2/WS/K1/K2 groups plus volume
    comparability and the radius bracket, with pass flags against
    delta0_target.  The fractional smoothing in K2 is the spectral
    multiplier (1 + lam)^(-g/2) at g = 0.55 on each slice.
    """
    from . import norms  # local import; norms depends on this module

    if isinstance(fol, SphereCone):
        return fol.assumption_report()
    cfg = fol.config
    delta0 = cfg.delta0_target
    r = fol.r
    s = fol.s_grid

    trchi = fol.trchi_vals
    mean_tr = np.array(
        [sf.integrate(trchi[i], fol.slices[i]) / sf.integrate(np.ones((fol.n, fol.n)), fol.slices[i])
         for i in range(fol.n_s)]
    )
    a1_mean = float(np.max(np.abs(r * (mean_tr - 2.0 / r))))
    a1_osc = float(np.max(np.abs(r[:, None, None] * (trchi - mean_tr[:, None, None]))))

    def fol_field(vals, rank):
        return FoliatedTensor(vals, rank, fol)

    chi_hat_f = fol_field(fol.chi_hat, 2)
    zeta_f = fol_field(fol.zeta, 1)
    a_fields = {
        "trchi_dev": fol_field(trchi - 2.0 / r[:, None, None], 0),
        "chi_hat": chi_hat_f,
        "zeta": zeta_f,
    }
    dtr = np.stack(
        [np.stack([sf.fft_derivative(trchi[i], axis=ax, n=fol.n) for ax in (0, 1)], axis=-1)
         for i in range(fol.n_s)]
    )
    a2 = {
        "chi_hat_LxinfLt2": norms.mixed_norm(chi_hat_f, "Lx_inf_Lt_2"),
        "zeta_LxinfLt2": norms.mixed_norm(zeta_f, "Lx_inf_Lt_2"),
        "grad_trchi_Lx2Ltinf": norms.mixed_norm(fol_field(dtr, 1), "Lx_2_Lt_inf"),
        "n1_chi_hat": norms.n1(chi_hat_f),
        "n1_zeta": norms.n1(zeta_f),
    }
    a_inf = max(norms.mixed_norm(v, "Lx_inf_Lt_2") for v in a_fields.values())
    n1_a = max(norms.n1(v) for v in a_fields.values())

    # WS: deviation from the scaled initial metric in transported coordinates
    a_scale = ((r / r[0]) ** 2)[:, None, None, None, None]
    gam = np.stack([m.gamma for m in fol.slices])
    dev = gam - a_scale * fol.slices[0].gamma
    grads = [_s_derivative(dev, fol.h_s)]
    for ax in (0, 1):
        grads.append(np.stack([sf.fft_derivative(dev[i], axis=ax, n=fol.n) for i in range(fol.n_s)]))
    ddev = np.sqrt(np.sum(np.stack([g**2 for g in grads]).sum(axis=0), axis=(-1, -2)))
    ws_dev = norms.mixed_norm(fol_field(ddev, 0), "Lx_2_Lt_inf")
    gam_sup = float(np.max(np.abs(gam)))
    inv_sup = float(np.max(np.abs(np.stack([m.inv_gamma for m in fol.slices]))))

    # K1 and K2
    Ks = np.stack([fol.curvature(i) for i in range(fol.n_s)])
    kdev = fol_field(Ks - (1.0 / r**2)[:, None, None], 0)
    k1_K = norms.mixed_norm(kdev, "Lt_2_Lx_2")
    k1_beta = norms.mixed_norm(fol_field(fol.beta, 1), "Lt_2_Lx_2")
    gamma_exp = 0.55
    smoothed = []
    for i in range(fol.n_s):
        basis = fol.basis(i, 0)
        c = basis.analyze(TensorField(kdev.values[i], 0))
        sm = basis.synthesize((1.0 + basis.lam) ** (-gamma_exp / 2.0) * c)
        smoothed.append(sm.components)
    k2 = norms.mixed_norm(fol_field(np.stack(smoothed), 0), "Lx_2_Lt_inf")

    sqrt_dets = np.stack([m.sqrt_det for m in fol.slices])
    vol_ratio = sqrt_dets / fol.slices[0].sqrt_det
    report = {
        "delta0_target": delta0,
        "A1_mean": a1_mean,
        "A1_osc": a1_osc,
        "A2": a2,
        "A_LxinfLt2": a_inf,
        "N1_A": n1_a,
        "WS_gamma_sup": gam_sup,
        "WS_inv_gamma_sup": inv_sup,
        "WS_deviation": ws_dev,
        "K1_curvature": k1_K,
        "K1_beta": k1_beta,
        "K2": k2,
        "K2_gamma_exponent": gamma_exp,
        "vol_ratio_min": float(vol_ratio.min()),
        "vol_ratio_max": float(vol_ratio.max()),
        "r_bracket_ok": bool(np.all((r >= r[0] + 0.5 * s) & (r <= r[0] + 1.5 * s))),
    }
    report["pass_A1"] = a1_mean <= delta0 and a1_osc <= delta0
    report["pass_A2"] = all(v <= delta0 for v in a2.values())
    report["pass_WS"] = ws_dev <= delta0
    report["pass_K1"] = k1_K <= delta0 and k1_beta <= delta0
    report["pass_K2"] = k2 <= delta0
    report["pass_vol"] = bool(vol_ratio.min() >= 1.0 - 1e-9 and vol_ratio.max() <= VOLUME_COMPARABILITY)
    report["pass"] = all(report[f"pass_{k}"] for k in ("A1", "A2", "WS", "K1", "K2", "vol"))
    return report


# ---------------------------------------------------------------------------
# Sphere cone
# ---------------------------------------------------------------------------

class SphereCone:
    """The exact round-cone foliation over the spectral sphere (scalars only)."""

    def __init__(self, config: FoliationConfig):
        sub = config.substrate
        self.config = config
        self.sphere = SpectralSphere(sub["l_max"], r=config.r0)
        self.s_grid = np.linspace(0.0, 1.0, config.n_s)
        self.h_s = self.s_grid[1] - self.s_grid[0]
        self.r = config.r0 + self.s_grid
        self.l_eigen = self.sphere.l_index * (self.sphere.l_index + 1)

    @property
    def n_s(self) -> int:
        return len(self.s_grid)

    def lam(self, i: int) -> np.ndarray:
        """Slice Laplacian eigenvalues l(l+1)/r(s)^2."""
        return self.l_eigen / self.r[i] ** 2

    def spectrum_union(self) -> np.ndarray:
        return np.concatenate([self.lam(i) for i in range(self.n_s)])

    def area_radius(self, i: int) -> float:
        return float(np.sqrt(self.r[i] ** 2 * 4.0 * np.pi / (4.0 * np.pi)))

    def trchi(self, i: int) -> float:
        return 2.0 / self.r[i]

    def assumption_report(self) -> dict:
        r, s = self.r, self.s_grid
        report = {
            "delta0_target": self.config.delta0_target,
            "A1_mean": 0.0,
            "A1_osc": 0.0,
            "A2": {k: 0.0 for k in ("chi_hat_LxinfLt2", "zeta_LxinfLt2", "grad_trchi_Lx2Ltinf",
                                     "n1_chi_hat", "n1_zeta")},
            "A_LxinfLt2": 0.0,
            "N1_A": 0.0,
            "WS_deviation": 0.0,
            "K1_curvature": 0.0,
            "K1_beta": 0.0,
            "K2": 0.0,
            "K2_gamma_exponent": 0.55,
            "vol_ratio_min": float((r[0] / r[0]) ** 2),
            "vol_ratio_max": float((r[-1] / r[0]) ** 2),
            "r_area_matches": True,
            "r_bracket_ok": bool(np.all((r >= r[0] + 0.5 * s) & (r <= r[0] + 1.5 * s))),
        }
        for k in ("A1", "A2", "WS", "K1", "K2"):
            report[f"pass_{k}"] = True
        report["pass_vol"] = report["vol_ratio_max"] <= VOLUME_COMPARABILITY
        report["pass"] = report["pass_vol"]
        return report


@dataclass
class SphereFoliatedScalar:
    """Scalar family on the sphere cone, stored as per-slice coefficients."""

    coeffs: np.ndarray  # (n_s, n_basis)
    cone: SphereCone

    def slice(self, i: int) -> SphereField:
        return SphereField(self.cone.sphere, self.coeffs[i])

    def nabla_L(self) -> "SphereFoliatedScalar":
        return SphereFoliatedScalar(_s_derivative(self.coeffs, self.cone.h_s), self.cone)

    def __add__(self, other):
        return SphereFoliatedScalar(self.coeffs + other.coeffs, self.cone)

    def __sub__(self, other):
        return SphereFoliatedScalar(self.coeffs - other.coeffs, self.cone)

    def __mul__(self, c):
        return SphereFoliatedScalar(self.coeffs * c, self.cone)

    __rmul__ = __mul__


def sphere_transport_solve(k_weight: float, G: SphereFoliatedScalar, f0: SphereField,
                           cone: SphereCone) -> SphereFoliatedScalar:
    """nabla_L f + k_weight trchi f = g on the cone (coefficient-wise RK4)."""
    s_grid = cone.s_grid
    h = cone.h_s
    g_spl = CubicSpline(s_grid, G.coeffs, axis=0)
    r0 = cone.config.r0

    def rhs(s, c):
        return g_spl(s) - k_weight * (2.0 / (r0 + s)) * c

    c = f0.coeffs.copy()
    sol = [c]
    for i in range(len(s_grid) - 1):
        s = s_grid[i]
        k1 = rhs(s, c)
        k2 = rhs(s + h / 2, c + h / 2 * k1)
        k3 = rhs(s + h / 2, c + h / 2 * k2)
        k4 = rhs(s + h, c + h * k3)
        c = c + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        sol.append(c.copy())
    return SphereFoliatedScalar(np.stack(sol), cone)
