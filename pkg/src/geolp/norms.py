"""Mixed, Besov and hypersurface norms on foliated fields.

Conventions.  Pointwise magnitudes always contract with the metric of the
slice the value lives on.  Norms whose inner variable is x integrate each
slice against its own area element; norms whose outer variable is x reduce
along s first (trapezoid for finite exponents, max for infinity) and then
integrate over the chart against the initial-slice area element, matching
the way the two orderings are used on a foliated hypersurface.  The
product-metric variant (all slices weighted by the initial area element)
is available through measure="initial" for volume-comparability checks.

The hypersurface Besov norms apply the projections slice by slice with the
slice's own eigenbasis; the dyadic range is fixed once per foliation from
the union of the slice spectra so band sums are aligned across slices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import foliation as fl
from . import lp
from . import surface as sf
from .heat import eigendecompose
from .lp import LPFamily
from .sphere import SphereField
from .surface import TensorField

__all__ = [
    "NormSpec",
    "mixed_norm",
    "besov_surface",
    "hyper_B",
    "hyper_P",
    "n1",
    "n2",
    "n1_envelope",
    "foliation_family",
    "NORM_IDS",
]


@dataclass(frozen=True)
class NormSpec:
    """Mixed-norm specification: variable order and exponents."""

    order: str  # "x_then_t" (x outer) or "t_then_x" (t outer)
    p: float
    q: float

    def __post_init__(self):
        if self.order not in ("x_then_t", "t_then_x"):
            raise ValueError("order must be 'x_then_t' or 't_then_x'")
        for e in (self.p, self.q):
            if not (e >= 1):
                raise ValueError("exponents must lie in [1, inf]")


_NAMED = {
    "Lx_inf_Lt_2": NormSpec("x_then_t", np.inf, 2),
    "Lx_2_Lt_inf": NormSpec("x_then_t", 2, np.inf),
    "Lx_2_Lt_1": NormSpec("x_then_t", 2, 1),
    "Lx_inf_Lt_1": NormSpec("x_then_t", np.inf, 1),
    "Lt_2_Lx_2": NormSpec("t_then_x", 2, 2),
    "Lt_inf_Lx_2": NormSpec("t_then_x", 2, np.inf),
    "Lt_1_Lx_2": NormSpec("t_then_x", 2, 1),
    "Lt_2_Lx_inf": NormSpec("t_then_x", np.inf, 2),
    "Lt_inf_Lx_inf": NormSpec("t_then_x", np.inf, np.inf),
}

NORM_IDS = tuple(_NAMED) + ("B:0", "B:1", "P:0", "P:1", "N1", "N2")


def _spec_of(spec) -> NormSpec:
    if isinstance(spec, NormSpec):
        return spec
    return _NAMED[spec]


def _trapz(values: np.ndarray, h: float, axis: int = 0) -> np.ndarray:
    w = np.ones(values.shape[axis])
    w[0] = w[-1] = 0.5
    shape = [1] * values.ndim
    shape[axis] = values.shape[axis]
    return np.sum(values * w.reshape(shape), axis=axis) * h


def _t_reduce(values: np.ndarray, q: float, h: float) -> np.ndarray:
    if np.isinf(q):
        return np.max(values, axis=0)
    return _trapz(values**q, h, axis=0) ** (1.0 / q)


def _trapz_scalar(values: np.ndarray, h: float) -> float:
    return float(_trapz(np.asarray(values, dtype=float), h))


def _pointwise_mag(F) -> np.ndarray:
    """(n_s, n, n) slice-contracted magnitudes."""
    if isinstance(F, fl.SphereFoliatedScalar):
        return np.abs(np.stack([F.cone.sphere.synthesize(F.coeffs[i]) for i in range(F.cone.n_s)]))
    fol = F.foliation
    return np.stack([sf.pointwise_norm(F.slice(i), fol.slices[i]) for i in range(fol.n_s)])


def mixed_norm(F, spec, measure: str = "slice") -> float:
    """Mixed Lebesgue norm of a foliated field.

    measure applies to x-integrations: "slice" uses each slice's area
    element (x-inner norms) or the initial slice's (x-outer norms);
    "initial" forces the initial area element everywhere, giving the
    product-metric norm used in volume-comparability checks.
    """
    spec = _spec_of(spec)
    mag = _pointwise_mag(F)
    sphere = isinstance(F, fl.SphereFoliatedScalar)
    fol = F.cone if sphere else F.foliation
    h_s = fol.h_s

    if sphere:
        weights = [F.cone.sphere.quad_weights * r**2 for r in fol.r]
        w0 = weights[0]
        mag = mag.reshape(fol.n_s, -1)
    else:
        h2 = fol.slices[0].h ** 2
        weights = [m.sqrt_det.reshape(-1) * h2 for m in fol.slices]
        w0 = weights[0]
        mag = mag.reshape(fol.n_s, -1)

    if spec.order == "x_then_t":
        tred = _t_reduce(mag, spec.q, h_s)
        if np.isinf(spec.p):
            return float(np.max(tred))
        return float(np.sum(tred**spec.p * w0) ** (1.0 / spec.p))

    per_slice = []
    for i in range(fol.n_s):
        w = w0 if measure == "initial" else weights[i]
        if np.isinf(spec.p):
            per_slice.append(np.max(mag[i]))
        else:
            per_slice.append(np.sum(mag[i] ** spec.p * w) ** (1.0 / spec.p))
    per_slice = np.array(per_slice)
    if np.isinf(spec.q):
        return float(np.max(per_slice))
    return float(_trapz(per_slice**spec.q, h_s) ** (1.0 / spec.q))


def l2_hypersurface(F) -> float:
    """The intrinsic L^2 norm of the foliated region (slice area elements)."""
    return mixed_norm(F, "Lt_2_Lx_2", measure="slice")


# ---------------------------------------------------------------------------
# Surface Besov norm
# ---------------------------------------------------------------------------

def besov_surface(F, a: float, family: LPFamily, basis=None) -> float:
    """B^a_{2,1}(S) = sum_{k>=0} 2^{ak} ||P_k F||_{L^2} + ||P_{<0} F||_{L^2}."""
    if a < 0:
        raise ValueError("besov exponent must be >= 0")

    if isinstance(F, SphereField):
        def l2(G):
            return G.l2_norm()
    else:
        metric = basis.metric

        def l2(G):
            return math.sqrt(max(sf.inner_product(G, G, metric), 0.0))

    total = 0.0
    for k in range(0, family.k_max + 1):
        total += 2.0 ** (a * k) * l2(lp.project(F, k, family, basis))
    total += l2(lp.low_part(F, family, basis))
    return float(total)


# ---------------------------------------------------------------------------
# Hypersurface Besov norms
# ---------------------------------------------------------------------------

def foliation_family(fol, kernel=None, mode: str = "normalized") -> LPFamily:
    """LP family with a k range bracketing every slice spectrum (cached)."""
    cache = getattr(fol, "_cache", None)
    key = ("family", mode, kernel)
    if cache is not None and key in cache:
        return cache[key]
    fam = lp.family_for(fol.spectrum_union(), kernel=kernel, mode=mode)
    if cache is not None:
        cache[key] = fam
    return fam


def _project_slicewise(F, k_or_low, family: LPFamily):
    """Apply P_k (or the low piece) on every slice with the slice basis."""
    if isinstance(F, fl.SphereFoliatedScalar):
        cone = F.cone
        out = np.empty_like(F.coeffs)
        for i in range(cone.n_s):
            lam = cone.lam(i)
            mult = family.low_multiplier(lam) if k_or_low == "low" else family.multiplier(k_or_low, lam)
            out[i] = mult * F.coeffs[i]
        return fl.SphereFoliatedScalar(out, cone)
    fol = F.foliation
    outs = []
    for i in range(fol.n_s):
        basis = fol.basis(i, F.rank)
        G = F.slice(i)
        if k_or_low == "low":
            outs.append(lp.low_part(G, family, basis))
        else:
            outs.append(lp.project(G, k_or_low, family, basis))
    return fl.FoliatedTensor.from_slices(outs, fol)


def _hyper(F, a: float, family: LPFamily, spec_name: str) -> float:
    total = 0.0
    for k in range(0, family.k_max + 1):
        total += 2.0 ** (a * k) * mixed_norm(_project_slicewise(F, k, family), spec_name)
    total += mixed_norm(_project_slicewise(F, "low", family), spec_name)
    return float(total)


def hyper_B(F, a: float, family: LPFamily | None = None) -> float:
    """B^a norm: ell^1 dyadic sum of L_t^inf L_x^2 band norms plus the low piece."""
    if not 0 <= a <= 1:
        raise ValueError("hypersurface Besov exponent must lie in [0, 1]")
    family = family or foliation_family(F.cone if isinstance(F, fl.SphereFoliatedScalar) else F.foliation)
    return _hyper(F, a, family, "Lt_inf_Lx_2")


def hyper_P(F, a: float, family: LPFamily | None = None) -> float:
    """P^a norm: same dyadic sum in L_t^2 L_x^2."""
    if not 0 <= a <= 1:
        raise ValueError("hypersurface Besov exponent must lie in [0, 1]")
    family = family or foliation_family(F.cone if isinstance(F, fl.SphereFoliatedScalar) else F.foliation)
    return _hyper(F, a, family, "Lt_2_Lx_2")


# ---------------------------------------------------------------------------
# N-norms and envelopes
# ---------------------------------------------------------------------------

def _sphere_grad_l2sq(F: fl.SphereFoliatedScalar) -> np.ndarray:
    cone = F.cone
    return np.array([np.sum(cone.lam(i) * F.coeffs[i] ** 2) * cone.r[i] ** 2 for i in range(cone.n_s)])


def n1(F) -> float:
    """N1 = ||F|| + ||nabla F|| + ||nabla_L F|| in L_t^2 L_x^2."""
    if isinstance(F, fl.SphereFoliatedScalar):
        base = mixed_norm(F, "Lt_2_Lx_2")
        grad = math.sqrt(max(_trapz_scalar(_sphere_grad_l2sq(F), F.cone.h_s), 0.0))
        dl = mixed_norm(F.nabla_L(), "Lt_2_Lx_2")
        return base + grad + dl
    return (
        mixed_norm(F, "Lt_2_Lx_2")
        + mixed_norm(fl.grad_f(F), "Lt_2_Lx_2")
        + mixed_norm(fl.nabla_L(F), "Lt_2_Lx_2")
    )


def n2(F) -> float:
    """N2 = N1 + ||nabla^2 F|| + ||nabla nabla_L F|| in L_t^2 L_x^2."""
    if isinstance(F, fl.SphereFoliatedScalar):
        cone = F.cone
        # scalar Bochner identity, exact on the round slices:
        # ||nabla^2 f||^2 = ||Delta f||^2 - K ||nabla f||^2 with K = 1/r^2
        hess_sq = np.array(
            [np.sum(cone.lam(i) * (cone.lam(i) - 1.0 / cone.r[i] ** 2) * F.coeffs[i] ** 2)
             * cone.r[i] ** 2
             for i in range(cone.n_s)]
        )
        hess = math.sqrt(max(_trapz_scalar(hess_sq, cone.h_s), 0.0))
        dl = F.nabla_L()
        grad_dl = math.sqrt(max(_trapz_scalar(_sphere_grad_l2sq(dl), cone.h_s), 0.0))
        return n1(F) + hess + grad_dl
    return (
        n1(F)
        + mixed_norm(fl.grad_f(fl.grad_f(F)), "Lt_2_Lx_2")
        + mixed_norm(fl.grad_f(fl.nabla_L(F)), "Lt_2_Lx_2")
    )


def n1_envelope(F, eps: float = 0.125, family: LPFamily | None = None) -> np.ndarray:
    """Slowly varying dyadic majorant of the band-wise N1 norms.

    Builds bar N1[F_k] = ||F_k|| + ||nabla F_k|| + ||(nabla_L F)_k|| in
    L_t^2 L_x^2 for k = 0..k_max and convolves with 2^{-eps|k-k'|}; the
    result varies by at most 2^{eps|k-k'|} between bands, exactly.
    """
    if not 0 < eps <= 0.25:
        raise ValueError("envelope order must lie in (0, 1/4]")
    family = family or foliation_family(F.cone if isinstance(F, fl.SphereFoliatedScalar) else F.foliation)
    ks = np.arange(0, family.k_max + 1)
    dLF = F.nabla_L() if isinstance(F, fl.SphereFoliatedScalar) else fl.nabla_L(F)
    bar = np.empty(len(ks))
    for j, k in enumerate(ks):
        Fk = _project_slicewise(F, int(k), family)
        dLFk = _project_slicewise(dLF, int(k), family)
        base = mixed_norm(Fk, "Lt_2_Lx_2")
        if isinstance(F, fl.SphereFoliatedScalar):
            grad = math.sqrt(max(_trapz_scalar(_sphere_grad_l2sq(Fk), F.cone.h_s), 0.0))
        else:
            grad = mixed_norm(fl.grad_f(Fk), "Lt_2_Lx_2")
        bar[j] = base + grad + mixed_norm(dLFk, "Lt_2_Lx_2")
    weights = 2.0 ** (-eps * np.abs(ks[:, None] - ks[None, :]))
    return weights @ bar
