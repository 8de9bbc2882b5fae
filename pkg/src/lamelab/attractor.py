"""Attractor clouds, Hausdorff semidistances, and the eps -> 0 sweep.

Attractors are approximated the standard desk way: evolve an ensemble of
initial states drawn inside the absorbing ball, discard a transient, and
record the tail states.  For the gradient dynamics at hand the attractor is
the unstable set of the stationary states, so the tail clusters near those
states and the connecting orbits; the cloud is a proxy, not the exact set.

Clouds produced at different eps are compared in the eps-independent norm

    ||(u, v)||_{H0}^2 = mu ||grad u||_2^2 + ||v||_2^2,

which is dominated by every eps-norm, so the single absorbing radius
computed from the energy-bound constants works for the whole family.
Distances are Hausdorff semidistances (sup-inf), evaluated brute force on
the point clouds.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .dynamics import BoundConstants, State, Trajectory, bound_constants, simulate
from .equilibria import StationarySet, multistart_stationary, stationary_ball_radius
from .forcing import NonlinearitySpec
from .mesh import Grid, VectorField, inner_l2, random_field, mode_wavevector, plane_wave
from .operators import LameParams, _face_diff, grad_norm_sq


class InvariantViolationError(RuntimeError):
    """A sampled cloud point escaped a bound the theory guarantees."""


def h0_norm_sq(mu: float, state: State) -> float:
    """Squared eps-independent phase norm mu ||grad u||^2 + ||v||^2."""
    g = state.grid
    return mu * grad_norm_sq(g, state.u) + inner_l2(state.v, state.v)


def _h0_features(mu: float, state: State) -> np.ndarray:
    """Flat vector whose Euclidean norm equals the H0 norm of the state."""
    g = state.grid
    root_cv = np.sqrt(g.cell_volume)
    parts = []
    for c in range(3):
        for axis in range(3):
            parts.append(np.sqrt(mu) * root_cv * _face_diff(state.u.data[c], axis, g.h[axis]).ravel())
    parts.append(root_cv * state.v.data.ravel())
    return np.concatenate(parts)


@dataclass
class AttractorCloud:
    eps: float
    points: list[State]
    mu: float
    norm_tag: str = "h0"
    provenance: dict = field(default_factory=dict)
    _features: np.ndarray | None = None

    @property
    def grid(self) -> Grid:
        return self.points[0].grid

    def features(self) -> np.ndarray:
        if self._features is None:
            self._features = np.vstack([_h0_features(self.mu, s) for s in self.points])
        return self._features

    def max_h0_norm(self) -> float:
        return float(np.max(np.linalg.norm(self.features(), axis=1)))


def hausdorff_semidistance(a: AttractorCloud, b: AttractorCloud) -> float:
    """sup over a of the H0 distance to the nearest point of b."""
    if not b.points:
        raise ValueError("cannot measure distance to an empty cloud")
    if a.grid != b.grid or a.norm_tag != b.norm_tag or a.mu != b.mu:
        raise ValueError("clouds are not comparable (grid or norm mismatch)")
    dists = cdist(a.features(), b.features())
    return float(np.max(np.min(dists, axis=1)))


def absorbing_radius(
    params: LameParams, spec: NonlinearitySpec, b: VectorField | None, grid: Grid, seed: int = 0
) -> tuple[float, BoundConstants]:
    """Radius R1 with sup_{z in attractor} ||z||_{H_eps}^2 <= R1^2, eps-free.

    Chains the energy sandwich through the Lyapunov cap over the stationary
    states: R1^2 = (k1 R_N^4 + 2 k3)/k2 with R_N the stationary ball radius.
    No ingredient depends on the grad-div coefficient.
    """
    consts = bound_constants(params, spec, b, grid, seed=seed)
    r_n = stationary_ball_radius(params, spec, b, grid)
    r1_sq = (consts.k1 * r_n**4 + 2.0 * consts.k3) / consts.k2
    return float(np.sqrt(r1_sq)), consts


def default_ensemble(
    grid: Grid,
    params: LameParams,
    spec: NonlinearitySpec,
    b: VectorField | None,
    n_members: int,
    seed: int = 0,
    amp: float = 1.0,
) -> list[State]:
    """Deterministic ensemble: box modes, perturbed equilibria, random fields.

    Every member is rescaled to an H0 norm of at most ``amp`` (and at most
    the absorbing radius), so the whole ensemble starts inside the ball the
    sweep asserts on.
    """
    if n_members < 1:
        raise ValueError(f"need at least one member, got {n_members}")
    rng = np.random.default_rng(seed)
    r1, _ = absorbing_radius(params, spec, b, grid, seed=seed)
    cap = min(amp, r1)

    members: list[State] = []
    modes = [(1, 1, 1), (2, 1, 1), (1, 2, 1), (1, 1, 2)]
    axes = np.eye(3)
    for i in range(min(n_members // 4, len(modes) * 3)):
        m = modes[i % len(modes)]
        d = axes[i % 3]
        u = plane_wave(grid, mode_wavevector(grid, m), d, 1.0)
        members.append(State(u, VectorField.zeros(grid), 0.0))

    base = multistart_stationary(params, spec, b, grid, n_starts=1, seed=seed).members
    n_eq = min(max(n_members // 4, 1), n_members - len(members))
    for i in range(n_eq):
        u = base[i % len(base)].u + 0.3 * random_field(grid, rng)
        members.append(State(u, 0.1 * random_field(grid, rng), 0.0))

    while len(members) < n_members:
        members.append(State(random_field(grid, rng), random_field(grid, rng), 0.0))

    scaled = []
    for i, s in enumerate(members[:n_members]):
        norm = np.sqrt(h0_norm_sq(params.mu, s))
        target = cap * (0.3 + 0.7 * rng.random())
        factor = target / norm if norm > 0.0 else 0.0
        scaled.append(State(factor * s.u, factor * s.v, 0.0))
    return scaled


def sample_attractor(
    params: LameParams,
    spec: NonlinearitySpec,
    b: VectorField | None,
    ensemble: list[State],
    T_transient: float,
    T_sample: float,
    stride: int,
    dt: float,
    stationary_set: StationarySet | None = None,
    r1: float | None = None,
    seed: int = 0,
) -> AttractorCloud:
    """Transient-discarded ensemble sampling of the attractor at one eps.

    Asserts the absorbing-ball invariant on every recorded point, and, when
    a stationary set is supplied, the Lyapunov cap
    max Psi(cloud) <= max Psi(stationary set) + 1e-3.
    """
    if not ensemble:
        raise ValueError("ensemble must be nonempty")
    if T_transient <= 0.0 or T_sample <= 0.0:
        raise ValueError("transient and sampling windows must be positive")
    grid = ensemble[0].grid
    if r1 is None:
        r1, _ = absorbing_radius(params, spec, b, grid, seed=seed)

    points: list[State] = []
    trajectories: list[Trajectory] = []
    for member in ensemble:
        settle = simulate(member, params, spec, b, T_transient, dt, stride=max(1, int(round(T_transient / dt))))
        tail = simulate(settle.final_state(), params, spec, b, T_sample, dt, stride=stride)
        trajectories.append(tail)
        points.extend(s.copy() for s in tail.states)

    cloud = AttractorCloud(
        eps=params.eps,
        points=points,
        mu=params.mu,
        provenance={
            "members": len(ensemble),
            "T_transient": T_transient,
            "T_sample": T_sample,
            "stride": stride,
            "dt": dt,
        },
    )
    bad = cloud.max_h0_norm()
    if bad > r1 + 1.0:
        raise InvariantViolationError(
            f"cloud point with H0 norm {bad:.6g} escaped the absorbing ball radius {r1 + 1.0:.6g}"
        )
    if stationary_set is not None and stationary_set.members:
        from .dynamics import energy

        psi_cloud = max(energy(s, params, spec, b).total for s in points)
        psi_cap = stationary_set.lyapunov_max()
        if psi_cloud > psi_cap + 1e-3:
            raise InvariantViolationError(
                f"cloud Lyapunov maximum {psi_cloud:.6g} exceeds the stationary cap {psi_cap:.6g} + 1e-3"
            )
    cloud.provenance["trajectories"] = len(trajectories)
    return cloud


# --- eps sweep ------------------------------------------------------------------


@dataclass
class ProbeRow:
    eps: float
    sup_dist: float


def singular_limit_probe(
    initial: State,
    base: LameParams,
    spec: NonlinearitySpec,
    b: VectorField | None,
    eps_list,
    T: float,
    dt: float,
    stride: int = 1,
) -> list[ProbeRow]:
    """sup_t H0-distance between each eps trajectory and the eps = 0 one.

    ``eps_list`` must be strictly decreasing and end at 0; all runs share
    the initial data, grid, and step size.
    """
    eps_list = [float(e) for e in eps_list]
    if eps_list[-1] != 0.0:
        raise ValueError("eps list must end at 0")
    if any(e1 <= e2 for e1, e2 in zip(eps_list[:-1], eps_list[1:])):
        raise ValueError(f"eps list must be strictly decreasing, got {eps_list}")

    runs = {}
    for eps in eps_list:
        params = LameParams.from_eps(base.mu, eps, base.alpha, base.rho)
        runs[eps] = simulate(initial.copy(), params, spec, b, T, dt, stride=stride)

    ref = runs[0.0]
    rows = []
    for eps in eps_list:
        worst = 0.0
        for s, s0 in zip(runs[eps].states, ref.states):
            worst = max(worst, h0_norm_sq(base.mu, State(s.u - s0.u, s.v - s0.v)))
        rows.append(ProbeRow(eps=eps, sup_dist=float(np.sqrt(worst))))
    return rows


@dataclass
class SweepConfig:
    grid: Grid
    mu: float
    alpha: float
    spec: NonlinearitySpec
    b: VectorField | None
    eps_list: tuple
    n_members: int = 32
    T_transient: float = 20.0
    T_sample: float = 4.0
    stride: int = 50
    dt: float = 0.02
    probe_T: float = 2.0
    seed: int = 0
    rho: float = 1.0
    ensemble_amp: float = 1.0
    threads: int = 1


@dataclass
class SweepReport:
    eps_list: list
    distances: list  # d_H0(A_eps, A_0) per eps
    cloud_sizes: list
    max_h0_norms: list
    probe_rows: list  # ProbeRow, trajectory-level convergence
    r1: float
    lyapunov_cap: float


def epsilon_sweep(config: SweepConfig) -> SweepReport:
    """Sample the attractor family over eps and measure distances to eps = 0."""
    eps_list = [float(e) for e in config.eps_list]
    if 0.0 not in eps_list:
        raise ValueError("the eps list of a sweep must include 0")
    grid = config.grid
    base = LameParams.from_eps(config.mu, 0.0, config.alpha, config.rho)
    ensemble = default_ensemble(
        grid, base, config.spec, config.b, config.n_members, seed=config.seed, amp=config.ensemble_amp
    )
    r1, _ = absorbing_radius(base, config.spec, config.b, grid, seed=config.seed)

    clouds = {}
    stationary = {}
    for eps in eps_list:
        params = LameParams.from_eps(config.mu, eps, config.alpha, config.rho)
        stationary[eps] = multistart_stationary(
            params, config.spec, config.b, grid, n_starts=4, seed=config.seed
        )
        clouds[eps] = sample_attractor(
            params,
            config.spec,
            config.b,
            [s.copy() for s in ensemble],
            config.T_transient,
            config.T_sample,
            config.stride,
            config.dt,
            stationary_set=stationary[eps],
            r1=r1,
            seed=config.seed,
        )

    ref = clouds[0.0]
    distances = [hausdorff_semidistance(clouds[eps], ref) for eps in eps_list]

    probe_eps = sorted((e for e in eps_list), reverse=True)
    if probe_eps[-1] != 0.0:
        probe_eps.append(0.0)
    probe_rows = singular_limit_probe(
        ensemble[0],
        LameParams.from_eps(config.mu, max(eps_list), config.alpha, config.rho),
        config.spec,
        config.b,
        probe_eps,
        config.probe_T,
        config.dt,
        stride=max(1, config.stride // 10),
    )

    return SweepReport(
        eps_list=eps_list,
        distances=distances,
        cloud_sizes=[len(clouds[e].points) for e in eps_list],
        max_h0_norms=[clouds[e].max_h0_norm() for e in eps_list],
        probe_rows=probe_rows,
        r1=r1,
        lyapunov_cap=max(stationary[e].lyapunov_max() for e in eps_list),
    )
