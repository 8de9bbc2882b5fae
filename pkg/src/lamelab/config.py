"""Experiment configuration: INI-style key/value files with strict validation.

One file describes one experiment.  Either ``eps`` or ``lambda`` may be
given under ``[params]`` (never both); internally the grad-div coefficient
eps = lambda + mu is the single source of truth.  Parsing round-trips
losslessly through :meth:`ExperimentConfig.to_text`.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field

from .forcing import NonlinearitySpec, catalog
from .mesh import Grid, VectorField, build_grid, load_field, mode_wavevector, plane_wave
from .operators import LameParams

EXPERIMENTS = ("simulate", "stationary", "attractor", "sweep", "dispersion", "validate")


class ConfigError(ValueError):
    """A config file failed to parse or validate; message names the field."""


@dataclass
class ExperimentConfig:
    experiment: str
    seed: int = 0
    # domain
    lengths: tuple = (1.0, 1.0, 1.0)
    n: tuple = (6, 6, 6)
    # material
    mu: float = 1.0
    eps: float = 1.0
    alpha: float = 1.0
    rho: float = 1.0
    # forcing
    forcing_name: str = "zero"
    kappa: float = 1.0
    p: float = 2.0
    delta: float = 0.1
    # external force b
    b_kind: str = "zero"  # zero | mode | file
    b_m: tuple = (1, 1, 1)
    b_amp: float = 1.0
    b_path: str = ""
    # initial data (simulate experiment)
    initial_kind: str = "mode"  # zero | mode | random
    initial_m: tuple = (1, 1, 1)
    initial_amp: float = 0.1
    # time discretization
    T: float = 5.0
    dt: float = 0.01
    stride: int = 10
    scheme: str = "midpoint"
    # stationary search
    n_starts: int = 8
    # attractor / sweep
    n_members: int = 32
    T_transient: float = 20.0
    T_sample: float = 4.0
    eps_list: tuple = (1.0, 0.5, 0.25, 0.0)
    ensemble_amp: float = 1.0
    probe_T: float = 2.0
    # validator
    n_samples: int = 10_000
    radius: float = 10.0

    def build_grid(self) -> Grid:
        return build_grid(self.lengths, self.n)

    def build_params(self, eps: float | None = None) -> LameParams:
        return LameParams.from_eps(self.mu, self.eps if eps is None else eps, self.alpha, self.rho)

    def build_spec(self) -> NonlinearitySpec:
        return catalog(self.forcing_name, kappa=self.kappa, p=self.p, delta=self.delta)

    def build_b(self, grid: Grid) -> VectorField | None:
        if self.b_kind == "zero":
            return None
        if self.b_kind == "mode":
            d = (1.0, 0.0, 0.0)
            return plane_wave(grid, mode_wavevector(grid, self.b_m), d, self.b_amp)
        if self.b_kind == "file":
            b = load_field(self.b_path)
            if b.grid != grid:
                raise ConfigError(f"b.path field grid {b.grid.n} does not match domain.n {grid.n}")
            return b
        raise ConfigError(f"b.kind must be zero|mode|file, got {self.b_kind!r}")

    def build_initial(self, grid: Grid):
        from .dynamics import State
        from .mesh import random_field
        import numpy as np

        if self.initial_kind == "zero":
            u = VectorField.zeros(grid)
        elif self.initial_kind == "mode":
            u = plane_wave(grid, mode_wavevector(grid, self.initial_m), (1.0, 0.0, 0.0), self.initial_amp)
        elif self.initial_kind == "random":
            u = self.initial_amp * random_field(grid, np.random.default_rng(self.seed))
        else:
            raise ConfigError(f"initial.kind must be zero|mode|random, got {self.initial_kind!r}")
        return State(u, VectorField.zeros(grid), 0.0)

    def to_text(self) -> str:
        lines = [
            "[experiment]",
            f"name = {self.experiment}",
            f"seed = {self.seed}",
            "",
            "[domain]",
            f"lengths = {_fmt_tuple(self.lengths)}",
            f"n = {_fmt_tuple(self.n)}",
            "",
            "[params]",
            f"mu = {self.mu!r}",
            f"eps = {self.eps!r}",
            f"alpha = {self.alpha!r}",
            f"rho = {self.rho!r}",
            "",
            "[forcing]",
            f"name = {self.forcing_name}",
            f"kappa = {self.kappa!r}",
            f"p = {self.p!r}",
            f"delta = {self.delta!r}",
            "",
            "[b]",
            f"kind = {self.b_kind}",
            f"m = {_fmt_tuple(self.b_m)}",
            f"amp = {self.b_amp!r}",
            f"path = {self.b_path}",
            "",
            "[initial]",
            f"kind = {self.initial_kind}",
            f"m = {_fmt_tuple(self.initial_m)}",
            f"amp = {self.initial_amp!r}",
            "",
            "[time]",
            f"T = {self.T!r}",
            f"dt = {self.dt!r}",
            f"stride = {self.stride}",
            f"scheme = {self.scheme}",
            "",
            "[stationary]",
            f"n_starts = {self.n_starts}",
            "",
            "[attractor]",
            f"n_members = {self.n_members}",
            f"T_transient = {self.T_transient!r}",
            f"T_sample = {self.T_sample!r}",
            f"eps_list = {_fmt_tuple(self.eps_list)}",
            f"ensemble_amp = {self.ensemble_amp!r}",
            f"probe_T = {self.probe_T!r}",
            "",
            "[validate]",
            f"n_samples = {self.n_samples}",
            f"radius = {self.radius!r}",
            "",
        ]
        return "\n".join(lines)


def _fmt_tuple(t) -> str:
    return ", ".join(repr(x) for x in t)


def _parse_tuple(text: str, kind, where: str):
    try:
        return tuple(kind(tok.strip()) for tok in text.split(",") if tok.strip())
    except ValueError as exc:
        raise ConfigError(f"{where}: cannot parse {text!r} as a list of {kind.__name__}") from exc


class _Section:
    def __init__(self, parser: configparser.ConfigParser, name: str):
        self._name = name
        self._data = parser[name] if parser.has_section(name) else {}

    def get(self, key, kind, default=None):
        where = f"[{self._name}] {key}"
        if key not in self._data:
            if default is None:
                raise ConfigError(f"{where}: missing required key")
            return default
        raw = self._data[key].strip()
        if kind is tuple_float:
            return _parse_tuple(raw, float, where)
        if kind is tuple_int:
            return _parse_tuple(raw, int, where)
        if kind is str:
            return raw
        try:
            return kind(raw)
        except ValueError as exc:
            raise ConfigError(f"{where}: cannot parse {raw!r} as {kind.__name__}") from exc

    def has(self, key) -> bool:
        return key in self._data


def tuple_float(_):  # sentinel types for _Section.get
    raise TypeError


def tuple_int(_):
    raise TypeError


def parse_config(text: str) -> ExperimentConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config syntax error: {exc}") from exc

    exp = _Section(parser, "experiment")
    name = exp.get("name", str)
    if name not in EXPERIMENTS:
        raise ConfigError(f"[experiment] name: {name!r} is not one of {EXPERIMENTS}")

    dom = _Section(parser, "domain")
    par = _Section(parser, "params")
    mu = par.get("mu", float, 1.0)
    if par.has("eps") and par.has("lambda"):
        raise ConfigError("[params]: give either eps or lambda, not both")
    if par.has("lambda"):
        eps = par.get("lambda", float) + mu
    else:
        eps = par.get("eps", float, 1.0)

    forc = _Section(parser, "forcing")
    bsec = _Section(parser, "b")
    init = _Section(parser, "initial")
    time = _Section(parser, "time")
    stat = _Section(parser, "stationary")
    attr = _Section(parser, "attractor")
    vali = _Section(parser, "validate")

    cfg = ExperimentConfig(
        experiment=name,
        seed=exp.get("seed", int, 0),
        lengths=dom.get("lengths", tuple_float, (1.0, 1.0, 1.0)),
        n=dom.get("n", tuple_int, (6, 6, 6)),
        mu=mu,
        eps=eps,
        alpha=par.get("alpha", float, 1.0),
        rho=par.get("rho", float, 1.0),
        forcing_name=forc.get("name", str, "zero"),
        kappa=forc.get("kappa", float, 1.0),
        p=forc.get("p", float, 2.0),
        delta=forc.get("delta", float, 0.1),
        b_kind=bsec.get("kind", str, "zero"),
        b_m=bsec.get("m", tuple_int, (1, 1, 1)),
        b_amp=bsec.get("amp", float, 1.0),
        b_path=bsec.get("path", str, ""),
        initial_kind=init.get("kind", str, "mode"),
        initial_m=init.get("m", tuple_int, (1, 1, 1)),
        initial_amp=init.get("amp", float, 0.1),
        T=time.get("T", float, 5.0),
        dt=time.get("dt", float, 0.01),
        stride=time.get("stride", int, 10),
        scheme=time.get("scheme", str, "midpoint"),
        n_starts=stat.get("n_starts", int, 8),
        n_members=attr.get("n_members", int, 32),
        T_transient=attr.get("T_transient", float, 20.0),
        T_sample=attr.get("T_sample", float, 4.0),
        eps_list=attr.get("eps_list", tuple_float, (1.0, 0.5, 0.25, 0.0)),
        ensemble_amp=attr.get("ensemble_amp", float, 1.0),
        probe_T=attr.get("probe_T", float, 2.0),
        n_samples=vali.get("n_samples", int, 10_000),
        radius=vali.get("radius", float, 10.0),
    )
    _validate(cfg)
    return cfg


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


def _validate(cfg: ExperimentConfig):
    if len(cfg.lengths) != 3 or any(L <= 0 for L in cfg.lengths):
        raise ConfigError(f"[domain] lengths: need three positive values, got {cfg.lengths}")
    if len(cfg.n) != 3 or any(m < 1 for m in cfg.n):
        raise ConfigError(f"[domain] n: need three values >= 1, got {cfg.n}")
    if cfg.mu <= 0:
        raise ConfigError(f"[params] mu: must be positive, got {cfg.mu}")
    if cfg.eps < 0:
        raise ConfigError(f"[params] eps: must be >= 0 (lambda >= -mu), got {cfg.eps}")
    if cfg.alpha <= 0:
        raise ConfigError(f"[params] alpha: must be positive, got {cfg.alpha}")
    if cfg.rho <= 0:
        raise ConfigError(f"[params] rho: must be positive, got {cfg.rho}")
    if cfg.dt <= 0 or cfg.T <= 0:
        raise ConfigError(f"[time]: T and dt must be positive, got T={cfg.T}, dt={cfg.dt}")
    if cfg.stride < 1:
        raise ConfigError(f"[time] stride: must be >= 1, got {cfg.stride}")
    if cfg.scheme not in ("midpoint", "leapfrog"):
        raise ConfigError(f"[time] scheme: must be midpoint|leapfrog, got {cfg.scheme!r}")
    if cfg.experiment == "sweep" and 0.0 not in tuple(float(e) for e in cfg.eps_list):
        raise ConfigError(f"[attractor] eps_list: a sweep must include eps = 0, got {cfg.eps_list}")
