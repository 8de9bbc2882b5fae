"""Stationary states E u + f(u) = b and the bounded set they live in.

Multiplying the stationary equation by u and applying the structural
conditions of the forcing catalog yields the a-priori bound

    (1 - 2M/(lambda_1 mu) - 1/(4 lambda_1 mu eps_hat)) ||u||_e^2
        <= 2 m_f |Omega| + eps_hat ||b||_2^2,

with the same eps_hat closed form used by the energy-bound constants; every
equilibrium must land inside that elastic-norm ball, which is also where the
multistart search draws its initial guesses.

The solver is a damped Newton iteration.  Since the coupled forcing part is
a gradient and the componentwise part acts diagonally, the Jacobian
E + df/du is symmetric, and the inner solves use conjugate gradients.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import State, energy
from .forcing import NonlinearitySpec, eval_f
from .krylov import conjugate_gradient
from .mesh import Grid, VectorField, inner_l2, norm_l2, random_field
from .operators import LameParams, _lame_raw, elastic_norm_sq, first_eigenvalue


class NoConvergenceError(RuntimeError):
    """Newton ran out of iterations; carries the last iterate and residual."""

    def __init__(self, message: str, last_iterate: VectorField, residual: float):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.residual = residual


@dataclass
class Equilibrium:
    u: VectorField
    residual_norm: float
    lyapunov_value: float


@dataclass
class StationarySet:
    members: list[Equilibrium]
    n_starts: int
    n_failed: int

    def lyapunov_max(self) -> float:
        return max(m.lyapunov_value for m in self.members)


def _residual(params, grid, spec, b, u_data):
    out = _lame_raw(u_data, grid.h, params.mu, params.eps)
    out += eval_f(spec, VectorField(grid, u_data)).data
    if b is not None:
        out -= b.data
    return out


def _jacobian_field(spec: NonlinearitySpec, grid: Grid, u_data: np.ndarray) -> np.ndarray:
    nodes = np.moveaxis(u_data, 0, -1).reshape(-1, 3)
    return spec.jacobian_eval(nodes)  # (N, 3, 3)


def solve_stationary(
    params: LameParams,
    spec: NonlinearitySpec,
    b: VectorField | None,
    guess: VectorField,
    tol: float = 1e-10,
    max_iter: int = 50,
    cg_rtol: float = 1e-12,
) -> Equilibrium:
    """Damped Newton iteration for the stationary problem.

    Stops when ||E u + f(u) - b||_2 <= tol; the line search halves the step
    up to 30 times on residual increase.  Raises NoConvergenceError after
    ``max_iter`` iterations.
    """
    if tol <= 0.0:
        raise ValueError(f"tolerance must be positive, got {tol}")
    grid = guess.grid
    shape = (3, *grid.shape)
    u = guess.data.copy()
    res = _residual(params, grid, spec, b, u)
    res_norm = np.sqrt(np.sum(res * res) * grid.cell_volume)

    for _ in range(max_iter):
        if res_norm <= tol:
            return _make_equilibrium(params, spec, b, grid, u, res_norm)
        jac = _jacobian_field(spec, grid, u)

        def matvec(x):
            xx = x.reshape(shape)
            lin = _lame_raw(xx, grid.h, params.mu, params.eps)
            nodes = np.moveaxis(xx, 0, -1).reshape(-1, 3)
            nl = np.einsum("nij,nj->ni", jac, nodes)
            lin += np.moveaxis(nl.reshape(*grid.shape, 3), -1, 0)
            return lin.ravel()

        delta = conjugate_gradient(matvec, -res.ravel(), rtol=cg_rtol, maxiter=20 * res.size)
        delta = delta.reshape(shape)

        scale = 1.0
        for _ in range(31):
            trial = u + scale * delta
            trial_res = _residual(params, grid, spec, b, trial)
            trial_norm = np.sqrt(np.sum(trial_res * trial_res) * grid.cell_volume)
            if trial_norm < res_norm or trial_norm <= tol:
                break
            scale *= 0.5
        u, res, res_norm = trial, trial_res, trial_norm

    if res_norm <= tol:
        return _make_equilibrium(params, spec, b, grid, u, res_norm)
    raise NoConvergenceError(
        f"Newton stalled at residual {res_norm:.3e} after {max_iter} iterations (tol {tol:.1e})",
        VectorField(grid, u),
        float(res_norm),
    )


def _make_equilibrium(params, spec, b, grid, u_data, res_norm) -> Equilibrium:
    u = VectorField(grid, u_data)
    lyap = energy(State(u, VectorField.zeros(grid)), params, spec, b).total
    return Equilibrium(u=u, residual_norm=float(res_norm), lyapunov_value=float(lyap))


# --- the stationary-set bound ---------------------------------------------------


@dataclass
class StationaryBoundReport:
    coefficient: float
    lhs: float
    rhs: float
    margin: float
    ok: bool


def _eps_hat(params: LameParams, spec: NonlinearitySpec, lam1: float) -> float:
    m_ratio = 2.0 * spec.M / (lam1 * params.mu)
    if m_ratio >= 1.0:
        raise ValueError(
            f"mass-gap condition violated: M = {spec.M} >= mu lambda_1^h / 2 = {lam1 * params.mu / 2.0}"
        )
    return 4.0 / (lam1 * params.mu * (1.0 - m_ratio))


def bound_check(
    eq: Equilibrium, params: LameParams, spec: NonlinearitySpec, b: VectorField | None
) -> StationaryBoundReport:
    """Evaluate the stationary-set elastic-norm bound on one equilibrium."""
    grid = eq.u.grid
    lam1 = first_eigenvalue(grid).discrete
    eps_hat = _eps_hat(params, spec, lam1)
    coef = 1.0 - 2.0 * spec.M / (lam1 * params.mu) - 1.0 / (4.0 * lam1 * params.mu * eps_hat)
    vol = grid.num_nodes * grid.cell_volume
    b_norm_sq = inner_l2(b, b) if b is not None else 0.0
    lhs = coef * elastic_norm_sq(params, eq.u)
    rhs = 2.0 * spec.m_f * vol + eps_hat * b_norm_sq
    margin = rhs - lhs
    return StationaryBoundReport(
        coefficient=coef, lhs=lhs, rhs=rhs, margin=margin, ok=bool(margin >= -1e-9 * max(1.0, rhs))
    )


def stationary_ball_radius(
    params: LameParams, spec: NonlinearitySpec, b: VectorField | None, grid: Grid
) -> float:
    """Elastic-norm radius of the ball guaranteed to contain all equilibria."""
    lam1 = first_eigenvalue(grid).discrete
    eps_hat = _eps_hat(params, spec, lam1)
    coef = 1.0 - 2.0 * spec.M / (lam1 * params.mu) - 1.0 / (4.0 * lam1 * params.mu * eps_hat)
    vol = grid.num_nodes * grid.cell_volume
    b_norm_sq = inner_l2(b, b) if b is not None else 0.0
    rhs = 2.0 * spec.m_f * vol + eps_hat * b_norm_sq
    return float(np.sqrt(max(rhs, 0.0) / coef))


def multistart_stationary(
    params: LameParams,
    spec: NonlinearitySpec,
    b: VectorField | None,
    grid: Grid,
    n_starts: int = 16,
    seed: int = 0,
    tol: float = 1e-10,
    merge_tol: float = 1e-6,
) -> StationarySet:
    """Newton from the zero guess plus random guesses inside the a-priori ball.

    Non-converged starts are dropped and counted; converged iterates are
    deduplicated by pairwise elastic-norm distance.
    """
    if n_starts < 1:
        raise ValueError(f"need at least one start, got {n_starts}")
    rng = np.random.default_rng(seed)
    radius = stationary_ball_radius(params, spec, b, grid)

    guesses = [VectorField.zeros(grid)]
    for _ in range(n_starts):
        u = random_field(grid, rng)
        e = np.sqrt(elastic_norm_sq(params, u))
        target = radius * rng.random() if radius > 0.0 else 0.0
        guesses.append(u * (target / e) if e > 0.0 else u)

    members: list[Equilibrium] = []
    n_failed = 0
    for guess in guesses:
        try:
            eq = solve_stationary(params, spec, b, guess, tol=tol)
        except NoConvergenceError:
            n_failed += 1
            continue
        if not any(
            np.sqrt(elastic_norm_sq(params, eq.u - m.u)) <= merge_tol for m in members
        ):
            members.append(eq)
    return StationarySet(members=members, n_starts=len(guesses), n_failed=n_failed)
