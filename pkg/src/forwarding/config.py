"""JSON scenario configuration for the command-line front end."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .cascade import CascadeSystem
from .errors import AssumptionViolation, ConfigError, ForwardingError
from .operators import build_grid
from .scenario import build_heat_cascade, constant_profile, gaussian_profile

DESIGN_SIGNS = ("plus", "minus", "auto")


def _matrix(value, path):
    try:
        arr = np.array(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: not a numeric matrix ({exc})") from None
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    if arr.ndim > 2 or not np.all(np.isfinite(arr)):
        raise ConfigError(f"{path}: expected a finite row-major matrix")
    return arr


def _number(value, path, positive=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}: expected a number, got {value!r}")
    value = float(value)
    if not math.isfinite(value) or (positive and value <= 0):
        raise ConfigError(f"{path}: expected a {'positive ' if positive else ''}finite number")
    return value


def _section(raw, key):
    sec = raw.get(key, {})
    if not isinstance(sec, dict):
        raise ConfigError(f"{key}: expected an object")
    return sec


@dataclass
class ScenarioConfig:
    n_interior: int
    ell: float
    S: np.ndarray
    Gamma: np.ndarray
    Q: np.ndarray | None = None
    b: dict = field(default_factory=lambda: {"kind": "constant", "value": 1.0})
    plant_type: str = "heat"
    k: float | str = "auto"
    sign: str = "plus"
    epsilon: float | None = None
    T: float = 10.0
    dt: float = 0.01
    scheme: str = "auto"
    phi0: str | list = "sine"
    z0: list | None = None
    output_dir: Path = Path("out")
    base_dir: Path = Path(".")

    @classmethod
    def from_dict(cls, raw: dict, base_dir=".") -> "ScenarioConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config root must be an object")
        grid = _section(raw, "grid")
        plant = _section(raw, "plant")
        exo = _section(raw, "exo")
        des = _section(raw, "design")
        sim = _section(raw, "sim")
        out = _section(raw, "output")

        n = grid.get("n_interior")
        if isinstance(n, bool) or not isinstance(n, int) or n < 2:
            raise ConfigError(f"grid.n_interior: expected an integer >= 2, got {n!r}")
        ptype = plant.get("type", "heat")
        if ptype != "heat":
            raise ConfigError(f"plant.type: only 'heat' is supported, got {ptype!r}")
        if "ell" not in plant:
            raise ConfigError("plant.ell: missing")
        ell = _number(plant["ell"], "plant.ell")
        if not 0.0 < ell < 1.0:
            raise ConfigError(f"plant.ell: must lie in (0, 1), got {ell}")
        b = plant.get("b", "constant")
        if isinstance(b, str):
            b = {"kind": b}
        if not isinstance(b, dict) or b.get("kind") not in ("constant", "gaussian", "samples-file"):
            raise ConfigError("plant.b: expected 'constant', 'gaussian' or 'samples-file'")
        if b["kind"] == "gaussian":
            for key in ("center", "width"):
                if key not in b:
                    raise ConfigError(f"plant.b.{key}: missing")
                _number(b[key], f"plant.b.{key}", positive=(key == "width"))
        if b["kind"] == "samples-file" and not isinstance(b.get("path"), str):
            raise ConfigError("plant.b.path: missing samples file path")

        if "S" not in exo or "Gamma" not in exo:
            raise ConfigError("exo: both S and Gamma are required")
        S = _matrix(exo["S"], "exo.S")
        if S.ndim != 2 or S.shape[0] != S.shape[1]:
            raise ConfigError(f"exo.S: must be square, got shape {S.shape}")
        r = S.shape[0]
        Gamma = _matrix(exo["Gamma"], "exo.Gamma")
        if Gamma.ndim == 1:
            Gamma = Gamma.reshape(r, -1) if Gamma.size % r == 0 else Gamma
        if Gamma.ndim != 2 or Gamma.shape[0] != r:
            raise ConfigError(f"exo.Gamma: must have {r} rows, got shape {Gamma.shape}")
        if Gamma.shape[1] != 1:
            raise ConfigError("exo.Gamma: the heat plant has one point output, so Gamma must be r x 1")
        Q = exo.get("Q")
        if Q is not None:
            Q = _matrix(Q, "exo.Q")
            if Q.shape != (r, r):
                raise ConfigError(f"exo.Q: must be {r}x{r}, got shape {Q.shape}")

        k = des.get("k", "auto")
        if k != "auto":
            k = _number(k, "design.k", positive=True)
        sign = des.get("sign", "plus")
        if sign not in DESIGN_SIGNS:
            raise ConfigError(f"design.sign: expected one of {DESIGN_SIGNS}, got {sign!r}")
        eps = des.get("epsilon")
        if eps is not None:
            eps = _number(eps, "design.epsilon")
            if not 0 < eps < 1:
                raise ConfigError("design.epsilon: must lie in (0, 1)")

        T = _number(sim.get("T", 10.0), "sim.T", positive=True)
        dt = _number(sim.get("dt", 0.01), "sim.dt", positive=True)
        if T < dt:
            raise ConfigError("sim.T: must be at least sim.dt")
        scheme = sim.get("scheme", "auto")
        if scheme not in ("auto", "exact-exponential", "theta-implicit"):
            raise ConfigError(f"sim.scheme: unknown scheme {scheme!r}")
        phi0 = sim.get("phi0", "sine")
        if isinstance(phi0, str):
            if phi0 not in ("sine", "zero"):
                raise ConfigError("sim.phi0: expected 'sine', 'zero' or a list of node values")
        elif not (isinstance(phi0, list) and len(phi0) == n):
            raise ConfigError(f"sim.phi0: list must have {n} node values")
        z0 = sim.get("z0")
        if z0 is not None and (not isinstance(z0, list) or len(z0) != r):
            raise ConfigError(f"sim.z0: expected a list of {r} numbers")

        return cls(
            n_interior=n, ell=ell, S=S, Gamma=Gamma, Q=Q, b=b, plant_type=ptype,
            k=k, sign=sign, epsilon=eps, T=T, dt=dt, scheme=scheme, phi0=phi0, z0=z0,
            output_dir=Path(out.get("dir", "out")), base_dir=Path(base_dir),
        )

    @classmethod
    def load(cls, path) -> "ScenarioConfig":
        path = Path(path)
        try:
            raw = json.loads(path.read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        return cls.from_dict(raw, base_dir=path.parent)

    @property
    def r(self) -> int:
        return self.S.shape[0]

    def _profile(self, grid):
        kind = self.b["kind"]
        if kind == "constant":
            return constant_profile(grid, float(self.b.get("value", 1.0)))
        if kind == "gaussian":
            return gaussian_profile(grid, float(self.b["center"]), float(self.b["width"]))
        path = Path(self.b["path"])
        if not path.is_absolute():
            path = self.base_dir / path
        try:
            values = np.loadtxt(path, delimiter=",", ndmin=1)
        except OSError as exc:
            raise ConfigError(f"plant.b.path: cannot read {path} ({exc})") from None
        if values.shape != (grid.n_interior,):
            raise ConfigError(f"plant.b.path: expected {grid.n_interior} samples, got {values.size}")
        from .operators import DiscreteFunction
        return DiscreteFunction(values, grid)

    def build_system(self) -> CascadeSystem:
        grid = build_grid(self.n_interior)
        try:
            return build_heat_cascade(self.n_interior, self.ell, self.S, self.Gamma, self.Q,
                                      b=self._profile(grid))
        except (ConfigError, AssumptionViolation):
            raise
        except ForwardingError as exc:
            raise ConfigError(f"exo: {exc}") from exc

    def initial_state(self, sys: CascadeSystem) -> np.ndarray:
        x = np.arange(1, sys.n + 1) * sys.h
        if isinstance(self.phi0, list):
            phi = np.asarray(self.phi0, dtype=float)
        elif self.phi0 == "zero":
            phi = np.zeros(sys.n)
        else:
            phi = np.sin(np.pi * x)
        if self.z0 is None:
            z = np.zeros(sys.r)
            z[0] = 1.0
        else:
            z = np.asarray(self.z0, dtype=float)
        return np.concatenate([phi, z])
