"""Box-domain grids, nodal vector fields, and discrete integral functionals.

The computational domain is the open box (0, L1) x (0, L2) x (0, L3) with
homogeneous Dirichlet boundary values.  Only interior nodes are stored; the
boundary is an implicit ring of zeros and is never materialized.  Along axis
i there are n_i interior nodes with spacing h_i = L_i / (n_i + 1), so node
(ix, iy, iz) sits at ((ix+1) h1, (iy+1) h2, (iz+1) h3).  Flat node indices
run x-fastest, then y, then z.

All integral functionals use midpoint-type quadrature with the uniform cell
volume h1*h2*h3 as weight, which keeps every difference operator built on
top of this module exactly symmetric in the discrete L2 inner product.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def _as_triple(value, kind=float):
    out = tuple(kind(v) for v in value)
    if len(out) != 3:
        raise ValueError(f"expected 3 entries, got {len(out)}")
    return out


@dataclass(frozen=True)
class Grid:
    """Uniform tensor grid of interior nodes on a Dirichlet box."""

    lengths: tuple[float, float, float]
    n: tuple[int, int, int]
    h: tuple[float, float, float] = field(init=False)

    def __post_init__(self):
        lengths = _as_triple(self.lengths, float)
        n = _as_triple(self.n, int)
        if any(L <= 0.0 for L in lengths):
            raise ValueError(f"box lengths must be positive, got {lengths}")
        if any(m < 1 for m in n):
            raise ValueError(f"need at least one interior node per axis, got {n}")
        object.__setattr__(self, "lengths", lengths)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "h", tuple(L / (m + 1) for L, m in zip(lengths, n)))

    @property
    def num_nodes(self) -> int:
        return self.n[0] * self.n[1] * self.n[2]

    @property
    def cell_volume(self) -> float:
        return self.h[0] * self.h[1] * self.h[2]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.n

    def axis_coordinates(self, axis: int) -> np.ndarray:
        """Interior node coordinates along one axis."""
        return self.h[axis] * np.arange(1, self.n[axis] + 1)

    def meshgrid(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Coordinate arrays X, Y, Z of shape ``n`` (ij indexing)."""
        return np.meshgrid(*(self.axis_coordinates(a) for a in range(3)), indexing="ij")

    def flat_index(self, ix: int, iy: int, iz: int) -> int:
        n1, n2, n3 = self.n
        if not (0 <= ix < n1 and 0 <= iy < n2 and 0 <= iz < n3):
            raise ValueError(f"node ({ix},{iy},{iz}) outside grid {self.n}")
        return ix + n1 * (iy + n2 * iz)

    def multi_index(self, flat: int) -> tuple[int, int, int]:
        n1, n2, n3 = self.n
        if not (0 <= flat < self.num_nodes):
            raise ValueError(f"flat index {flat} outside grid with {self.num_nodes} nodes")
        ix = flat % n1
        rest = flat // n1
        return ix, rest % n2, rest // n2

    def node_position(self, flat: int) -> tuple[float, float, float]:
        ix, iy, iz = self.multi_index(flat)
        return ((ix + 1) * self.h[0], (iy + 1) * self.h[1], (iz + 1) * self.h[2])


def build_grid(lengths, n) -> Grid:
    """Grid on the box with the given side lengths and interior resolution."""
    return Grid(_as_triple(lengths, float), _as_triple(n, int))


def _check_finite(data: np.ndarray, what: str):
    if not np.all(np.isfinite(data)):
        raise ValueError(f"{what} contains non-finite entries")


@dataclass
class ScalarField:
    """One scalar value per interior node."""

    grid: Grid
    data: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float)
        if self.data.shape != self.grid.shape:
            raise ValueError(f"scalar data shape {self.data.shape} != grid {self.grid.shape}")
        _check_finite(self.data, "scalar field")

    @classmethod
    def zeros(cls, grid: Grid) -> "ScalarField":
        return cls(grid, np.zeros(grid.shape))


@dataclass
class VectorField:
    """Three-component displacement/velocity field on interior nodes.

    ``data`` has shape (3, n1, n2, n3); component c of the field is
    ``data[c]``.  Fields are value objects: arithmetic returns new fields.
    """

    grid: Grid
    data: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float)
        if self.data.shape != (3, *self.grid.shape):
            raise ValueError(f"vector data shape {self.data.shape} != (3, {self.grid.shape})")
        _check_finite(self.data, "vector field")

    @classmethod
    def zeros(cls, grid: Grid) -> "VectorField":
        return cls(grid, np.zeros((3, *grid.shape)))

    @classmethod
    def from_flat(cls, grid: Grid, flat: np.ndarray) -> "VectorField":
        """Inverse of :meth:`flat` (component-major, x-fastest node order)."""
        comps = np.asarray(flat, dtype=float).reshape(3, grid.num_nodes)
        data = np.stack([c.reshape(grid.shape, order="F") for c in comps])
        return cls(grid, data)

    def flat(self) -> np.ndarray:
        """Component-major vector of length 3N in x-fastest node order."""
        return np.concatenate([self.data[c].ravel(order="F") for c in range(3)])

    def copy(self) -> "VectorField":
        return VectorField(self.grid, self.data.copy())

    def __add__(self, other: "VectorField") -> "VectorField":
        _require_same_grid(self, other)
        return VectorField(self.grid, self.data + other.data)

    def __sub__(self, other: "VectorField") -> "VectorField":
        _require_same_grid(self, other)
        return VectorField(self.grid, self.data - other.data)

    def __mul__(self, scalar: float) -> "VectorField":
        return VectorField(self.grid, self.data * float(scalar))

    __rmul__ = __mul__

    def __neg__(self) -> "VectorField":
        return VectorField(self.grid, -self.data)


def _require_same_grid(a, b):
    if a.grid != b.grid:
        raise ValueError("fields live on different grids")


def inner_l2(a: VectorField, b: VectorField) -> float:
    """Discrete (L2)^3 inner product with cell-volume quadrature weight."""
    _require_same_grid(a, b)
    return float(np.sum(a.data * b.data) * a.grid.cell_volume)


def inner_l2_scalar(a: ScalarField, b: ScalarField) -> float:
    _require_same_grid(a, b)
    return float(np.sum(a.data * b.data) * a.grid.cell_volume)


def norm_l2(a: VectorField) -> float:
    return float(np.sqrt(max(inner_l2(a, a), 0.0)))


def norm_lp(a: VectorField, p: float) -> float:
    """Discrete Lp norm, ||u||_p^p = sum_i |u_i|_p^p with cell-volume weights."""
    if p < 1.0:
        raise ValueError(f"Lp norm requires p >= 1, got {p}")
    total = float(np.sum(np.abs(a.data) ** p) * a.grid.cell_volume)
    return total ** (1.0 / p)


def mode_wavevector(grid: Grid, m) -> tuple[float, float, float]:
    """Wavevector (m1 pi/L1, m2 pi/L2, m3 pi/L3) of a Dirichlet box mode."""
    m = _as_triple(m, int)
    if any(mi < 1 for mi in m):
        raise ValueError(f"mode numbers must be >= 1, got {m}")
    return tuple(mi * np.pi / L for mi, L in zip(m, grid.lengths))


def mode_numbers(grid: Grid, k) -> tuple[int, int, int]:
    """Recover integer mode numbers from a wavevector; reject non-box modes."""
    k = _as_triple(k, float)
    m = []
    for ki, L in zip(k, grid.lengths):
        mi = ki * L / np.pi
        if mi < 0.5 or abs(mi - round(mi)) > 1e-9:
            raise ValueError(f"wavevector {k} is not a Dirichlet box mode of the grid")
        m.append(int(round(mi)))
    return tuple(m)


def plane_wave(grid: Grid, k, d, amp: float = 1.0) -> VectorField:
    """Polarized product-sine box mode, u_c(x) = amp * d_c * sin(k1 x1) sin(k2 x2) sin(k3 x3).

    ``k`` must be a Dirichlet box-mode wavevector and ``d`` a unit polarization.
    These modes are exact eigenfields of the discrete vector Laplacian with
    eigenvalue -laplacian_mode_eigenvalue(grid, k).
    """
    mode_numbers(grid, k)  # validates k
    d = np.asarray(d, dtype=float)
    if d.shape != (3,):
        raise ValueError("polarization must be a 3-vector")
    if abs(np.linalg.norm(d) - 1.0) > 1e-9:
        raise ValueError(f"polarization must be a unit vector, |d| = {np.linalg.norm(d)}")
    sines = [np.sin(ki * grid.axis_coordinates(a)) for a, ki in enumerate(k)]
    prod = sines[0][:, None, None] * sines[1][None, :, None] * sines[2][None, None, :]
    data = amp * d[:, None, None, None] * prod[None, :, :, :]
    return VectorField(grid, data)


def laplacian_mode_eigenvalue(grid: Grid, k) -> float:
    """Eigenvalue Lambda_h(k) = sum_i (4/h_i^2) sin^2(k_i h_i / 2) of -Laplacian on the mode."""
    k = _as_triple(k, float)
    return float(sum(4.0 / h**2 * np.sin(ki * h / 2.0) ** 2 for ki, h in zip(k, grid.h)))


def random_field(grid: Grid, rng: np.random.Generator, amp: float = 1.0) -> VectorField:
    """Field with iid normal nodal values scaled by ``amp``."""
    return VectorField(grid, amp * rng.standard_normal((3, *grid.shape)))


# --- serialization -----------------------------------------------------------
#
# Layout: a 6-entry header (n1, n2, n3, L1, L2, L3) followed by 3N values in
# component-major order, nodes x-fastest.  CSV carries one value per line in
# full-precision scientific notation; the binary variant is the same sequence
# as little-endian float64.

_BIN_MAGIC = b"LLF1"


def save_field(field_: VectorField, path, fmt: str = "csv"):
    g = field_.grid
    header = [*g.n, *g.lengths]
    values = field_.flat()
    if fmt == "csv":
        with open(path, "w") as fh:
            fh.write(",".join(_fmt(v) for v in header) + "\n")
            for v in values:
                fh.write(_fmt(v) + "\n")
    elif fmt == "bin":
        with open(path, "wb") as fh:
            fh.write(_BIN_MAGIC)
            np.asarray(header, dtype="<f8").tofile(fh)
            values.astype("<f8").tofile(fh)
    else:
        raise ValueError(f"unknown field format {fmt!r}")


def load_field(path) -> VectorField:
    with open(path, "rb") as fh:
        magic = fh.read(4)
    if magic == _BIN_MAGIC:
        raw = np.fromfile(path, dtype="<f8", offset=4)
        header, values = raw[:6], raw[6:]
    else:
        with open(path) as fh:
            header = np.array([float(t) for t in fh.readline().split(",")])
            values = np.array([float(line) for line in fh if line.strip()])
    n = tuple(int(round(v)) for v in header[:3])
    grid = build_grid(tuple(header[3:6]), n)
    if values.size != 3 * grid.num_nodes:
        raise ValueError(f"field file has {values.size} values, expected {3 * grid.num_nodes}")
    return VectorField.from_flat(grid, values)


def _fmt(v: float) -> str:
    return format(float(v), ".17e")
