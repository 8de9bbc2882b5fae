"""Catalog of structural nonlinearities f(u) = grad G(u) + (h_1(u_1), h_2(u_2), h_3(u_3)).

Each catalog entry carries closed-form evaluators for f, the potential
density G + sum_i H_i (H_i the antiderivative of h_i), the pointwise
Jacobian, and analytically derived structural constants:

    p      growth exponent of the coupled part, 1 <= p < 3
    M_g    coefficient in |grad g_i(u)| <= M_g (1 + sum_j |u_j|^(p-1))
    c_h    coefficient in |h_i'(s)| <= c_h (1 + s^2)
    M, m_f coercivity slack in
               f(u).u - G(u) - sum_i H_i(u_i) >= -M |u|^2 - m_f
               G(u) + sum_i H_i(u_i)          >= -M |u|^2 - m_f

The pairing constraint M < mu * lambda_1 / 2 couples a spec to the material
parameters and grid; `validate_assumptions` checks all five conditions on a
sampled ball and reports margins instead of throwing.

All evaluators broadcast: ``u`` may be a single 3-vector or any array of
shape (..., 3).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .mesh import Grid, VectorField, inner_l2
from .operators import LameParams, first_eigenvalue


class NumericOverflowError(FloatingPointError):
    """A nonlinearity evaluation produced non-finite values."""


def _diag_embed(values: np.ndarray) -> np.ndarray:
    out = np.zeros(values.shape[:-1] + (3, 3))
    idx = np.arange(3)
    out[..., idx, idx] = values
    return out


@dataclass(frozen=True)
class NonlinearitySpec:
    """One admissible structural forcing, with its analytic constants."""

    name: str
    g_eval: Callable[[np.ndarray], np.ndarray]
    G_eval: Callable[[np.ndarray], np.ndarray]
    h_eval: Callable[[np.ndarray], np.ndarray]  # componentwise, h(u)[..., i] = h_i(u_i)
    H_eval: Callable[[np.ndarray], np.ndarray]
    g_jacobian_eval: Callable[[np.ndarray], np.ndarray]  # (..., 3, 3), symmetric
    h_prime_eval: Callable[[np.ndarray], np.ndarray]
    p: float
    M_g: float
    c_h: float
    M: float
    m_f: float
    params: dict = field(default_factory=dict)

    def f_eval(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        return self.g_eval(u) + self.h_eval(u)

    def jacobian_eval(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        return self.g_jacobian_eval(u) + _diag_embed(self.h_prime_eval(u))

    def potential_density(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        return self.G_eval(u) + np.sum(self.H_eval(u), axis=-1)

    def with_constants(self, **kw) -> "NonlinearitySpec":
        """Copy with overridden structural constants (test plumbing)."""
        return replace(self, **kw)


def _zeros_like_vec(u):
    return np.zeros_like(u)


def _zero_scalar(u):
    return np.zeros(u.shape[:-1])


def _zero_jacobian(u):
    return np.zeros(u.shape[:-1] + (3, 3))


def catalog(name: str, kappa: float = 1.0, p: float = 2.0, delta: float = 0.1) -> NonlinearitySpec:
    """Build a named nonlinearity.

    Names: ``zero``, ``coupled_power`` (g = kappa (|u|^2 + delta^2)^((p-1)/2) u),
    ``cubic`` (h_i(s) = kappa s^3), ``coupled_power_plus_cubic``, and
    ``bounded_sine`` (g_i = kappa sin(u_i), the sign-indefinite M > 0 case).
    """
    if name == "zero":
        return NonlinearitySpec(
            name=name,
            g_eval=_zeros_like_vec,
            G_eval=_zero_scalar,
            h_eval=_zeros_like_vec,
            H_eval=_zeros_like_vec,
            g_jacobian_eval=_zero_jacobian,
            h_prime_eval=_zeros_like_vec,
            p=1.0,
            M_g=1e-12,
            c_h=1e-12,
            M=0.0,
            m_f=0.0,
        )
    if name == "coupled_power":
        return _coupled_power(kappa, p, delta)
    if name == "cubic":
        return _cubic(kappa)
    if name == "coupled_power_plus_cubic":
        return _combine(name, _coupled_power(kappa, p, delta), _cubic(kappa))
    if name == "bounded_sine":
        return _bounded_sine(kappa)
    raise ValueError(f"unknown nonlinearity {name!r}")


def _coupled_power(kappa: float, p: float, delta: float) -> NonlinearitySpec:
    if not 1.0 <= p < 3.0:
        raise ValueError(f"growth exponent must satisfy 1 <= p < 3, got {p}")
    if delta < 0.0:
        raise ValueError(f"smoothing offset must be >= 0, got delta={delta}")
    if delta == 0.0 and p < 2.0:
        raise ValueError("delta = 0 loses C^1 regularity at the origin for p < 2")
    d2 = delta * delta

    def g(u):
        r2 = np.sum(u * u, axis=-1, keepdims=True)
        return kappa * (r2 + d2) ** ((p - 1.0) / 2.0) * u

    def G(u):
        r2 = np.sum(u * u, axis=-1)
        q = (p + 1.0) / 2.0
        return kappa / (p + 1.0) * ((r2 + d2) ** q - d2**q)

    def jac_g(u):
        r2 = np.sum(u * u, axis=-1)[..., None, None]
        eye = np.eye(3)
        out = (r2 + d2) ** ((p - 1.0) / 2.0) * eye
        if p != 1.0:
            outer = u[..., :, None] * u[..., None, :]
            out = out + (p - 1.0) * (r2 + d2) ** ((p - 3.0) / 2.0) * outer
        return kappa * out

    return NonlinearitySpec(
        name="coupled_power",
        g_eval=g,
        G_eval=G,
        h_eval=_zeros_like_vec,
        H_eval=_zeros_like_vec,
        g_jacobian_eval=jac_g,
        h_prime_eval=_zeros_like_vec,
        p=p,
        M_g=kappa * p * max(3.0, delta ** (p - 1.0) if delta > 0 else 0.0),
        c_h=1e-12,
        M=0.0,
        m_f=kappa * delta ** (p + 1.0),
        params={"kappa": kappa, "p": p, "delta": delta},
    )


def _cubic(kappa: float) -> NonlinearitySpec:
    return NonlinearitySpec(
        name="cubic",
        g_eval=_zeros_like_vec,
        G_eval=_zero_scalar,
        h_eval=lambda u: kappa * u**3,
        H_eval=lambda u: kappa * u**4 / 4.0,
        g_jacobian_eval=_zero_jacobian,
        h_prime_eval=lambda u: 3.0 * kappa * u**2,
        p=1.0,
        M_g=1e-12,
        c_h=3.0 * abs(kappa),
        M=0.0,
        m_f=0.0,
        params={"kappa": kappa},
    )


def _bounded_sine(kappa: float) -> NonlinearitySpec:
    # per component: u sin u - (1 - cos u) >= -(u^2/4 + 3), hence M = kappa/4, m_f = 9 kappa
    def jac_g(u):
        return _diag_embed(kappa * np.cos(u))

    return NonlinearitySpec(
        name="bounded_sine",
        g_eval=lambda u: kappa * np.sin(u),
        G_eval=lambda u: kappa * np.sum(1.0 - np.cos(u), axis=-1),
        h_eval=_zeros_like_vec,
        H_eval=_zeros_like_vec,
        g_jacobian_eval=jac_g,
        h_prime_eval=_zeros_like_vec,
        p=1.0,
        M_g=abs(kappa),
        c_h=1e-12,
        M=abs(kappa) / 4.0,
        m_f=9.0 * abs(kappa),
        params={"kappa": kappa},
    )


def _combine(name: str, a: NonlinearitySpec, b: NonlinearitySpec) -> NonlinearitySpec:
    return NonlinearitySpec(
        name=name,
        g_eval=lambda u: a.g_eval(u) + b.g_eval(u),
        G_eval=lambda u: a.G_eval(u) + b.G_eval(u),
        h_eval=lambda u: a.h_eval(u) + b.h_eval(u),
        H_eval=lambda u: a.H_eval(u) + b.H_eval(u),
        g_jacobian_eval=lambda u: a.g_jacobian_eval(u) + b.g_jacobian_eval(u),
        h_prime_eval=lambda u: a.h_prime_eval(u) + b.h_prime_eval(u),
        p=max(a.p, b.p),
        M_g=a.M_g + b.M_g,
        c_h=a.c_h + b.c_h,
        M=a.M + b.M,
        m_f=a.m_f + b.m_f,
        params={**a.params, **b.params},
    )


# --- field-level evaluation ---------------------------------------------------


def _nodes_view(u: VectorField) -> np.ndarray:
    # (N, 3) view of nodal values
    return np.moveaxis(u.data, 0, -1).reshape(-1, 3)


def eval_f(spec: NonlinearitySpec, u: VectorField) -> VectorField:
    """Nodewise forcing f(u(x)); raises on non-finite output."""
    vals = spec.f_eval(_nodes_view(u))
    if not np.all(np.isfinite(vals)):
        raise NumericOverflowError(f"nonlinearity {spec.name!r} overflowed on the given field")
    data = np.moveaxis(vals.reshape(*u.grid.shape, 3), -1, 0)
    return VectorField(u.grid, data)


def eval_potential(spec: NonlinearitySpec, u: VectorField) -> float:
    """Cell-volume quadrature of the potential density G(u) + sum_i H_i(u_i)."""
    dens = spec.potential_density(_nodes_view(u))
    return float(np.sum(dens) * u.grid.cell_volume)


def eval_jacobian(spec: NonlinearitySpec, u_point) -> np.ndarray:
    """Pointwise Jacobian df/du, a 3x3 matrix (or a stack for batched input)."""
    return spec.jacobian_eval(np.asarray(u_point, dtype=float))


# --- structural-condition validator -------------------------------------------

CONDITION_IDS = (
    "potential_coercivity",  # f.u - G - sum H >= -M|u|^2 - m_f
    "potential_lower_bound",  # G + sum H >= -M|u|^2 - m_f
    "mass_gap",  # M < mu lambda_1 / 2 (discrete lambda_1)
    "gradient_growth",  # |grad g_i| <= M_g (1 + sum |u_j|^(p-1))
    "componentwise_growth",  # |h_i'| <= c_h (1 + s^2)
)

MARGIN_SLACK = -1e-9


@dataclass
class ConditionCheck:
    condition: str
    samples: int
    worst_margin: float
    passed: bool


@dataclass
class ValidationReport:
    checks: list[ConditionCheck]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, condition: str) -> ConditionCheck:
        for c in self.checks:
            if c.condition == condition:
                return c
        raise KeyError(condition)


def _sample_points(n_samples: int, radius: float, rng: np.random.Generator) -> np.ndarray:
    """Uniform ball samples plus deterministic origin/axis/corner points."""
    dirs = rng.standard_normal((n_samples, 3))
    dirs /= np.maximum(np.linalg.norm(dirs, axis=1, keepdims=True), 1e-300)
    radii = radius * rng.random(n_samples) ** (1.0 / 3.0)
    pts = [dirs * radii[:, None], np.zeros((1, 3))]
    eye = np.eye(3)
    pts.append(radius * np.vstack([eye, -eye]))
    corners = np.array([[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)])
    pts.append(radius / np.sqrt(3.0) * corners)
    return np.vstack(pts)


def validate_assumptions(
    spec: NonlinearitySpec,
    params: LameParams,
    grid: Grid,
    n_samples: int = 10_000,
    radius: float = 10.0,
    seed: int = 0,
) -> ValidationReport:
    """Sample-check the five structural conditions; failures are reported, not raised."""
    if n_samples < 1:
        raise ValueError("need at least one sample")
    if radius <= 0.0:
        raise ValueError("sampling radius must be positive")
    rng = np.random.default_rng(seed)
    u = _sample_points(n_samples, radius, rng)
    coercivity_slack = spec.M * np.sum(u * u, axis=-1) + spec.m_f

    f_dot_u = np.sum(spec.f_eval(u) * u, axis=-1)
    pot = spec.potential_density(u)
    m1 = f_dot_u - pot + coercivity_slack
    m2 = pot + coercivity_slack

    lam1 = first_eigenvalue(grid).discrete
    m3 = np.array([params.mu * lam1 / 2.0 - spec.M - 1e-15])  # strict inequality

    row_norms = np.linalg.norm(spec.g_jacobian_eval(u), axis=-1)  # |grad g_i| per row i
    growth = spec.M_g * (1.0 + np.sum(np.abs(u) ** (spec.p - 1.0), axis=-1))
    m4 = (growth[..., None] - row_norms).reshape(-1)

    s = u.reshape(-1)
    h_prime = spec.h_prime_eval(u).reshape(-1)
    m5 = spec.c_h * (1.0 + s * s) - np.abs(h_prime)

    checks = []
    for cond, margins in zip(CONDITION_IDS, (m1, m2, m3, m4, m5)):
        worst = float(np.min(margins))
        checks.append(
            ConditionCheck(
                condition=cond,
                samples=int(np.size(margins)),
                worst_margin=worst,
                passed=bool(worst >= MARGIN_SLACK),
            )
        )
    return ValidationReport(checks=checks)


def directional_derivative_check(
    spec: NonlinearitySpec, u: VectorField, w: VectorField, tau: float = 1e-5
) -> tuple[float, float]:
    """Central finite difference of the potential against <f(u), w>."""
    plus = eval_potential(spec, u + tau * w)
    minus = eval_potential(spec, u - tau * w)
    fd = (plus - minus) / (2.0 * tau)
    exact = inner_l2(eval_f(spec, u), w)
    return fd, exact
