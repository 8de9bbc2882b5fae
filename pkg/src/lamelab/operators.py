"""Discrete Lame operator, elastic inner product, and dispersion diagnostics.

The operator applied here is

    E u = mu * (-Laplacian u) + eps * (D^T D u),       eps = lambda + mu >= 0,

acting componentwise with the 7-point second-order Laplacian stencil and a
grad-div block assembled as D^T D, where D is the central-difference
divergence and D^T its exact adjoint under the mesh module's L2 product.
Ghost values are identically zero (homogeneous Dirichlet), so both blocks
are symmetric and positive semidefinite by construction, and

    <E u, v> == elastic_inner(u, v)

holds to rounding for all interior fields; that identity is the single
source of truth tying the energy forms to the operator.

Dispersion bookkeeping: product-sine box modes diagonalize the Laplacian
block exactly, but not the grad-div block (central differencing turns a
sine mode into cosine modes, which Dirichlet walls fold back).  What is
exact on a box mode is its Rayleigh quotient, and the cos^2/sin^2 line sums
it involves have the closed-form ratio (n_i - 1)/(n_i + 1).  The functions
below expose both that exact modal quadratic form and the interior
plane-wave symbol, whose longitudinal/transverse eigenvalues converge at
second order to (lambda + 2 mu)|k|^2 and mu |k|^2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import (
    Grid,
    ScalarField,
    VectorField,
    _as_triple,
    inner_l2,
    laplacian_mode_eigenvalue,
    mode_numbers,
    plane_wave,
)


@dataclass(frozen=True)
class LameParams:
    """Material and damping parameters.

    ``eps = lam + mu`` is the grad-div coefficient; the degenerate case
    eps = 0 (lambda -> -mu) decouples the system into three damped wave
    equations.  ``rho`` only enters the physical wave speeds.
    """

    mu: float
    lam: float
    alpha: float
    rho: float = 1.0

    def __post_init__(self):
        if self.mu <= 0.0:
            raise ValueError(f"shear modulus must be positive, got mu={self.mu}")
        if self.alpha <= 0.0:
            raise ValueError(f"damping coefficient must be positive, got alpha={self.alpha}")
        if self.rho <= 0.0:
            raise ValueError(f"density must be positive, got rho={self.rho}")
        if self.lam + self.mu < 0.0:
            raise ValueError(f"need lambda + mu >= 0, got {self.lam + self.mu}")

    @property
    def eps(self) -> float:
        return self.lam + self.mu

    @classmethod
    def from_eps(cls, mu: float, eps: float, alpha: float, rho: float = 1.0) -> "LameParams":
        return cls(mu=mu, lam=eps - mu, alpha=alpha, rho=rho)


def _axis_slices(axis: int):
    lo = [slice(None)] * 3
    hi = [slice(None)] * 3
    lo[axis] = slice(0, -1)
    hi[axis] = slice(1, None)
    return tuple(lo), tuple(hi)


def _second_diff(a: np.ndarray, axis: int, h: float) -> np.ndarray:
    # (a[j-1] - 2 a[j] + a[j+1]) / h^2 with zero ghosts
    out = -2.0 * a
    lo, hi = _axis_slices(axis)
    out[lo] += a[hi]
    out[hi] += a[lo]
    return out / h**2


def _central_diff(a: np.ndarray, axis: int, h: float) -> np.ndarray:
    # (a[j+1] - a[j-1]) / (2h) with zero ghosts
    out = np.zeros_like(a)
    lo, hi = _axis_slices(axis)
    out[lo] += a[hi]
    out[hi] -= a[lo]
    return out / (2.0 * h)


def _laplacian_raw(data: np.ndarray, h) -> np.ndarray:
    out = np.zeros_like(data)
    for c in range(3):
        for axis in range(3):
            out[c] += _second_diff(data[c], axis, h[axis])
    return out


def _divergence_raw(data: np.ndarray, h) -> np.ndarray:
    return sum(_central_diff(data[axis], axis, h[axis]) for axis in range(3))


def _grad_div_raw(data: np.ndarray, h) -> np.ndarray:
    # D^T D: the adjoint of the central difference is its negative
    div = _divergence_raw(data, h)
    return np.stack([-_central_diff(div, axis, h[axis]) for axis in range(3)])


def _lame_raw(data: np.ndarray, h, mu: float, eps: float) -> np.ndarray:
    out = -mu * _laplacian_raw(data, h)
    if eps != 0.0:
        out += eps * _grad_div_raw(data, h)
    return out


def apply_laplacian(grid: Grid, u: VectorField) -> VectorField:
    """Componentwise 7-point Laplacian with zero Dirichlet ghosts."""
    _require_on_grid(grid, u)
    return VectorField(grid, _laplacian_raw(u.data, grid.h))


def apply_divergence(grid: Grid, u: VectorField) -> ScalarField:
    """Central-difference divergence sum_i d_i u_i with zero ghosts."""
    _require_on_grid(grid, u)
    return ScalarField(grid, _divergence_raw(u.data, grid.h))


def apply_grad_div(grid: Grid, u: VectorField) -> VectorField:
    """Symmetric positive semidefinite grad-div block D^T D u."""
    _require_on_grid(grid, u)
    return VectorField(grid, _grad_div_raw(u.data, grid.h))


def apply_lame(params: LameParams, grid: Grid, u: VectorField) -> VectorField:
    """E u = mu (-Laplacian u) + eps (D^T D u)."""
    _require_on_grid(grid, u)
    return VectorField(grid, _lame_raw(u.data, grid.h, params.mu, params.eps))


def _require_on_grid(grid: Grid, u):
    if u.grid != grid:
        raise ValueError("field does not live on the given grid")


def gradient_inner(grid: Grid, u: VectorField, v: VectorField) -> float:
    """<grad u, grad v> via forward differences on cell faces (zero ghosts).

    The adjoint composition of this forward gradient is exactly the 7-point
    Laplacian, so gradient_inner(u, u) == inner_l2(-Laplacian u, u).
    """
    _require_on_grid(grid, u)
    _require_on_grid(grid, v)
    total = 0.0
    for c in range(3):
        for axis in range(3):
            du = _face_diff(u.data[c], axis, grid.h[axis])
            dv = _face_diff(v.data[c], axis, grid.h[axis])
            total += float(np.sum(du * dv))
    return total * grid.cell_volume


def _face_diff(a: np.ndarray, axis: int, h: float) -> np.ndarray:
    pad = [(0, 0)] * 3
    pad[axis] = (1, 1)
    return np.diff(np.pad(a, pad), axis=axis) / h


def grad_norm_sq(grid: Grid, u: VectorField) -> float:
    return gradient_inner(grid, u, u)


def div_inner(grid: Grid, u: VectorField, v: VectorField) -> float:
    """<div u, div v> with the central-difference divergence."""
    _require_on_grid(grid, u)
    _require_on_grid(grid, v)
    du = _divergence_raw(u.data, grid.h)
    dv = _divergence_raw(v.data, grid.h)
    return float(np.sum(du * dv)) * grid.cell_volume


def elastic_inner(params: LameParams, u: VectorField, v: VectorField) -> float:
    """Elastic inner product mu <grad u, grad v> + eps <div u, div v>."""
    if u.grid != v.grid:
        raise ValueError("fields live on different grids")
    out = params.mu * gradient_inner(u.grid, u, v)
    if params.eps != 0.0:
        out += params.eps * div_inner(u.grid, u, v)
    return out


def elastic_norm_sq(params: LameParams, u: VectorField) -> float:
    return elastic_inner(params, u, u)


@dataclass
class EllipticReport:
    """Two-sided comparison of the elastic norm against mu/a0 times |grad u|^2."""

    norm_grad_sq: float
    norm_e_sq: float
    a0: float
    sandwich_ok: bool


def equivalence_constant(params: LameParams) -> float:
    """a0 = max(mu, 3 (lambda + mu)) of the elastic/H1 norm comparison."""
    return max(params.mu, 3.0 * params.eps)


def norm_sandwich(params: LameParams, u: VectorField, scaled: bool = False) -> EllipticReport:
    """Check mu |grad u|^2 <= |u|_e^2 <= a0 |grad u|^2 on the given field.

    With ``scaled=True`` the upper constant is max(mu, 3), the eps-uniform
    variant used on the parameter range eps in [0, 1].
    """
    g = grad_norm_sq(u.grid, u)
    e = elastic_norm_sq(params, u)
    a0 = max(params.mu, 3.0) if scaled else equivalence_constant(params)
    slack = 1e-12 * max(1.0, abs(e), abs(g))
    ok = (params.mu * g <= e + slack) and (e <= a0 * g + slack)
    return EllipticReport(norm_grad_sq=g, norm_e_sq=e, a0=a0, sandwich_ok=bool(ok))


@dataclass(frozen=True)
class EigenvalueReport:
    discrete: float
    continuum: float


def first_eigenvalue(grid: Grid) -> EigenvalueReport:
    """Smallest eigenvalue of the discrete (and continuum) Dirichlet Laplacian."""
    k1 = tuple(np.pi / L for L in grid.lengths)
    discrete = laplacian_mode_eigenvalue(grid, k1)
    continuum = float(sum((np.pi / L) ** 2 for L in grid.lengths))
    return EigenvalueReport(discrete=discrete, continuum=continuum)


def max_eigenvalue_estimate(
    params: LameParams, grid: Grid, iters: int = 60, seed: int = 0
) -> float:
    """Power-iteration upper-scale estimate of the largest eigenvalue of E."""
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((3, *grid.shape))
    x /= np.sqrt(np.sum(x * x))
    lam = 0.0
    for _ in range(iters):
        y = _lame_raw(x, grid.h, params.mu, params.eps)
        lam = float(np.sum(x * y))
        ny = np.sqrt(np.sum(y * y))
        if ny == 0.0:
            break
        x = y / ny
    return lam


# --- dispersion --------------------------------------------------------------


def dispersion_speeds(params: LameParams, k) -> tuple[float, float]:
    """Continuum P- and S-wave speeds sqrt((lambda+2mu)/rho), sqrt(mu/rho)."""
    k = _as_triple(k, float)
    if all(ki == 0.0 for ki in k):
        raise ValueError("wavevector must be nonzero")
    m_p = params.lam + 2.0 * params.mu
    if m_p <= 0.0:
        raise ValueError(f"lambda + 2 mu = {m_p} <= 0 gives an imaginary P speed")
    c_p = float(np.sqrt(m_p / params.rho))
    c_s = float(np.sqrt(params.mu / params.rho))
    return c_p, c_s


def central_symbol(grid: Grid, k) -> np.ndarray:
    """First-order central-difference symbol, lambda_i = sin(k_i h_i)/h_i."""
    k = _as_triple(k, float)
    return np.array([np.sin(ki * h) / h for ki, h in zip(k, grid.h)])


def graddiv_mode_quadratic(grid: Grid, k, d) -> float:
    """Exact Rayleigh quotient of D^T D on the product-sine box mode (k, d).

    On a Dirichlet box mode the divergence is a sum of per-axis cosine
    profiles; their line sums obey sum cos^2 / sum sin^2 = (n-1)/(n+1)
    exactly, and all cross terms cancel, giving

        <D^T D u, u> / <u, u> = sum_i d_i^2 lambda_i^2 (n_i - 1)/(n_i + 1).
    """
    mode_numbers(grid, k)
    d = np.asarray(d, dtype=float)
    lam = central_symbol(grid, k)
    w = np.array([(n - 1.0) / (n + 1.0) for n in grid.n])
    return float(np.sum(d**2 * lam**2 * w))


def lame_mode_quadratic(params: LameParams, grid: Grid, k, d) -> float:
    """Exact Rayleigh quotient of E on the product-sine box mode (k, d)."""
    return params.mu * laplacian_mode_eigenvalue(grid, k) + params.eps * graddiv_mode_quadratic(
        grid, k, d
    )


def measured_mode_rayleigh(params: LameParams, grid: Grid, k, d, amp: float = 1.0) -> float:
    """Rayleigh quotient <E u, u>/<u, u> measured by applying the operator."""
    u = plane_wave(grid, k, d, amp)
    return inner_l2(apply_lame(params, grid, u), u) / inner_l2(u, u)


def symbol_eigenvalues(params: LameParams, grid: Grid, k) -> tuple[float, float]:
    """Longitudinal/transverse eigenvalues of the interior plane-wave symbol.

    The symbol matrix mu Lambda_h(k) I + eps lambda(k) lambda(k)^T has the
    P-family eigenvalue mu Lambda_h + eps |lambda|^2 and the doubly
    degenerate S-family eigenvalue mu Lambda_h; both converge at second
    order to (lambda + 2 mu)|k|^2 and mu |k|^2.  At eps = 0 the families
    coincide identically.
    """
    lam_h = laplacian_mode_eigenvalue(grid, k)
    lam = central_symbol(grid, k)
    eig_p = params.mu * lam_h + params.eps * float(np.sum(lam**2))
    eig_s = params.mu * lam_h
    return eig_p, eig_s
