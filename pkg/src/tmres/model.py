"""Physical configuration, geometry and truncation settings."""
from __future__ import annotations

import hashlib
import json
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Any, Mapping, Sequence

import numpy as np

from .modulation import ModulationEntry, ModulationProfile, default_phases


class ConfigError(ValueError):
    """Malformed or inconsistent configuration document."""


@dataclass(frozen=True)
class PhysicalParams:
    rho_out: float
    rho_in: float
    kappa_out: float
    kappa_in: float
    delta: float = field(init=False)
    v_out: float = field(init=False)
    v_in: float = field(init=False)

    def __post_init__(self) -> None:
        for name in ("rho_out", "rho_in", "kappa_out", "kappa_in"):
            value = getattr(self, name)
            if not (value > 0.0 and math.isfinite(value)):
                raise ConfigError(f"{name} must be positive and finite, got {value!r}")
        object.__setattr__(self, "delta", self.rho_in / self.rho_out)
        object.__setattr__(self, "v_out", math.sqrt(self.kappa_out / self.rho_out))
        object.__setattr__(self, "v_in", math.sqrt(self.kappa_in / self.rho_in))
        if not (0.0 < self.delta < 1.0):
            warnings.warn(f"contrast delta={self.delta:g} lies outside the subwavelength regime (0, 1)")

    @classmethod
    def from_contrast(cls, delta: float, v_out: float = 1.0, v_in: float = 1.0) -> "PhysicalParams":
        """Exterior density 1; the rest follows from ``delta`` and the speeds."""
        return cls(rho_out=1.0, rho_in=delta, kappa_out=v_out**2, kappa_in=delta * v_in**2)


@dataclass(frozen=True)
class ResonatorArray:
    """Resonators ``D_i = (x_i^-, x_i^+)`` given by their ``2N`` sorted endpoints."""

    boundaries: tuple[float, ...]

    def __post_init__(self) -> None:
        b = tuple(float(x) for x in self.boundaries)
        if len(b) < 2 or len(b) % 2:
            raise ConfigError(f"need an even, nonzero number of boundary points, got {len(b)}")
        if not all(math.isfinite(x) for x in b):
            raise ConfigError("boundary points must be finite")
        if any(b[k + 1] <= b[k] for k in range(len(b) - 1)):
            raise ConfigError(f"boundary points must be strictly increasing: {list(b)}")
        object.__setattr__(self, "boundaries", b)

    @property
    def n(self) -> int:
        return len(self.boundaries) // 2

    @property
    def left(self) -> np.ndarray:
        """``x_i^-``."""
        return np.asarray(self.boundaries[0::2])

    @property
    def right(self) -> np.ndarray:
        """``x_i^+``."""
        return np.asarray(self.boundaries[1::2])

    @property
    def lengths(self) -> np.ndarray:
        return self.right - self.left

    @property
    def gaps(self) -> np.ndarray:
        return self.left[1:] - self.right[:-1]

    def mirrored(self) -> "ResonatorArray":
        """Reflect about the array midpoint."""
        lo, hi = self.boundaries[0], self.boundaries[-1]
        return ResonatorArray(tuple(lo + hi - x for x in reversed(self.boundaries)))


def uniform_array(n: int, length: float, gap: float = 1.0, origin: float = 0.0) -> ResonatorArray:
    """``n`` equal resonators with equal spacing, starting at ``origin``."""
    if n < 1:
        raise ConfigError(f"need at least one resonator, got n={n}")
    if not length > 0.0:
        raise ConfigError(f"resonator length must be positive, got {length!r}")
    if n > 1 and not gap > 0.0:
        raise ConfigError(f"gap must be positive, got {gap!r}")
    pts = []
    x = float(origin)
    for _ in range(n):
        pts.extend((x, x + length))
        x = x + length + gap
    return ResonatorArray(tuple(pts))


@dataclass(frozen=True)
class Truncation:
    K: int = 4
    M: int = 1

    def __post_init__(self) -> None:
        if int(self.K) != self.K or int(self.M) != self.M:
            raise ConfigError("K and M must be integers")
        if not (self.K >= self.M >= 0):
            raise ConfigError(f"need K >= M >= 0, got K={self.K}, M={self.M}")

    @property
    def modes(self) -> np.ndarray:
        return np.arange(-self.K, self.K + 1)


@dataclass(frozen=True)
class IncidentSpec:
    """Plane wave(s) arriving from the left (``theta1``) and/or right (``theta2``)."""

    direction: str = "left"
    theta1: complex = 1.0
    theta2: complex = 0.0
    omega: complex = 0.0

    def __post_init__(self) -> None:
        if self.direction not in ("left", "right", "both"):
            raise ConfigError(f"incident direction must be left, right or both, got {self.direction!r}")
        object.__setattr__(self, "theta1", complex(self.theta1) if self.direction != "right" else 0j)
        object.__setattr__(self, "theta2", complex(self.theta2) if self.direction != "left" else 0j)
        object.__setattr__(self, "omega", complex(self.omega))


@dataclass(frozen=True)
class SimulationConfig:
    params: PhysicalParams
    array: ResonatorArray
    modulation: ModulationProfile
    truncation: Truncation = Truncation()
    incident: IncidentSpec = IncidentSpec()

    def __post_init__(self) -> None:
        if self.modulation.n != self.array.n:
            raise ConfigError(
                f"modulation has {self.modulation.n} entries but the array has {self.array.n} resonators"
            )
        if self.modulation.order > self.truncation.M:
            raise ConfigError(
                f"modulation order {self.modulation.order} exceeds truncation M={self.truncation.M}"
            )
        ratio = self.modulation.omega_mod / math.sqrt(self.params.delta)
        if not (0.1 <= ratio <= 10.0):
            warnings.warn(f"Omega/sqrt(delta) = {ratio:g} is outside [0.1, 10]")

    @property
    def n(self) -> int:
        return self.array.n

    @property
    def omega_mod(self) -> float:
        return self.modulation.omega_mod

    def with_eps(self, eps: float, phi: Sequence[float] | None = None) -> "SimulationConfig":
        """Same config with a uniform cosine amplitude on every resonator."""
        if phi is None:
            phi = [e.phi if e.phi is not None else p
                   for e, p in zip(self.modulation.entries, default_phases(self.n))]
        mod = ModulationProfile.cosine(self.omega_mod, [eps] * self.n, phi)
        return replace(self, modulation=mod)

    def with_omega(self, omega: complex) -> "SimulationConfig":
        return replace(self, incident=replace(self.incident, omega=omega))

    def with_K(self, K: int) -> "SimulationConfig":
        return replace(self, truncation=Truncation(K, self.truncation.M))

    def with_array(self, array: ResonatorArray) -> "SimulationConfig":
        return replace(self, array=array)

    def to_dict(self) -> dict[str, Any]:
        return config_to_dict(self)

    def digest(self) -> str:
        """SHA-256 of the canonical JSON form."""
        text = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()


def paper_config(
    n: int = 6,
    eps: float = 0.0,
    *,
    length: float = 2.0,
    gap: float = 10.0,
    delta: float = 1e-4,
    v: float = 1.0,
    omega_mod: float = 0.03,
    K: int = 4,
    omega: complex = 0.0,
) -> SimulationConfig:
    """The standard experiment: equal resonators, ``phi_i = pi/i``, left incidence."""
    return SimulationConfig(
        params=PhysicalParams.from_contrast(delta, v, v),
        array=uniform_array(n, length, gap),
        modulation=ModulationProfile.cosine(omega_mod, [eps] * n),
        truncation=Truncation(K, 1),
        incident=IncidentSpec("left", 1.0, 0.0, omega),
    )


# --- JSON document ---------------------------------------------------------

_TOP_KEYS = {"physical", "geometry", "modulation", "truncation", "incident"}


def _check_keys(section: str, doc: Mapping, allowed: set[str], required: set[str] = frozenset()):
    if not isinstance(doc, Mapping):
        raise ConfigError(f"'{section}' must be an object")
    unknown = set(doc) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in '{section}': {sorted(unknown)}")
    missing = set(required) - set(doc)
    if missing:
        raise ConfigError(f"missing keys in '{section}': {sorted(missing)}")


def _number(value, what: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{what} must be a number, got {value!r}")
    return float(value)


def parse_complex(value, what: str = "value") -> complex:
    """Number, ``[re, im]`` pair, or a string such as ``"0.01-2e-4j"``."""
    if isinstance(value, bool):
        raise ConfigError(f"{what} must be numeric, got {value!r}")
    if isinstance(value, (int, float)):
        return complex(value)
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return complex(_number(value[0], what), _number(value[1], what))
    if isinstance(value, str):
        s = value.strip().replace(" ", "").replace("i", "j")
        try:
            return complex(s)
        except ValueError as exc:
            raise ConfigError(f"cannot parse {what} {value!r} as complex") from exc
    raise ConfigError(f"{what} must be a number or [re, im], got {value!r}")


def _complex_out(z: complex):
    z = complex(z)
    return z.real if z.imag == 0.0 else [z.real, z.imag]


def build_config(raw: Mapping[str, Any]) -> SimulationConfig:
    """Validate a configuration document and build the config."""
    _check_keys("<root>", raw, _TOP_KEYS, {"physical", "geometry", "modulation", "truncation"})

    phys = raw["physical"]
    _check_keys("physical", phys, {"rho_out", "rho_in", "kappa_out", "kappa_in"},
                {"rho_out", "rho_in", "kappa_out", "kappa_in"})
    params = PhysicalParams(**{k: _number(v, f"physical.{k}") for k, v in phys.items()})

    geo = raw["geometry"]
    _check_keys("geometry", geo, {"boundaries", "uniform"})
    if ("boundaries" in geo) == ("uniform" in geo):
        raise ConfigError("geometry needs exactly one of 'boundaries' or 'uniform'")
    if "boundaries" in geo:
        if not isinstance(geo["boundaries"], list):
            raise ConfigError("geometry.boundaries must be a list")
        array = ResonatorArray(tuple(_number(x, "boundary") for x in geo["boundaries"]))
    else:
        uni = geo["uniform"]
        _check_keys("geometry.uniform", uni, {"n", "length", "gap", "origin"}, {"n", "length"})
        n = uni["n"]
        if isinstance(n, bool) or not isinstance(n, int):
            raise ConfigError("geometry.uniform.n must be an integer")
        array = uniform_array(n, _number(uni["length"], "length"),
                              _number(uni.get("gap", 1.0), "gap"),
                              _number(uni.get("origin", 0.0), "origin"))

    mod = raw["modulation"]
    _check_keys("modulation", mod, {"omega", "entries"}, {"omega", "entries"})
    entries_doc = mod["entries"]
    if not isinstance(entries_doc, list):
        raise ConfigError("modulation.entries must be a list")
    if len(entries_doc) != array.n:
        raise ConfigError(f"modulation.entries has {len(entries_doc)} items for {array.n} resonators")
    entries = []
    for i, item in enumerate(entries_doc, start=1):
        _check_keys(f"modulation.entries[{i - 1}]", item, {"eps", "phi", "fourier"})
        try:
            if "fourier" in item:
                if "eps" in item or "phi" in item:
                    raise ConfigError("an entry takes either eps/phi or fourier, not both")
                coeffs = {}
                for term in item["fourier"]:
                    _check_keys("fourier term", term, {"m", "k"}, {"m", "k"})
                    coeffs[int(term["m"])] = parse_complex(term["k"], "fourier k")
                entries.append(ModulationEntry.from_coefficients(coeffs))
            else:
                eps = _number(item.get("eps", 0.0), "eps")
                phi = _number(item.get("phi", math.pi / i), "phi")
                entries.append(ModulationEntry.cosine(eps, phi))
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    try:
        modulation = ModulationProfile(_number(mod["omega"], "modulation.omega"), tuple(entries))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    tr = raw["truncation"]
    _check_keys("truncation", tr, {"K", "M"}, {"K", "M"})
    truncation = Truncation(int(tr["K"]), int(tr["M"]))

    incident = IncidentSpec()
    if "incident" in raw:
        inc = raw["incident"]
        _check_keys("incident", inc, {"direction", "amplitude", "amplitudes", "omega"}, {"omega"})
        direction = inc.get("direction", "left")
        if "amplitude" in inc and "amplitudes" in inc:
            raise ConfigError("give either 'amplitude' or 'amplitudes'")
        if "amplitudes" in inc:
            amps = inc["amplitudes"]
            if not isinstance(amps, list) or len(amps) != 2:
                raise ConfigError("incident.amplitudes must be [theta1, theta2]")
            th1, th2 = (parse_complex(a, "amplitude") for a in amps)
        else:
            a = parse_complex(inc.get("amplitude", 1.0), "amplitude")
            th1, th2 = (a, 0j) if direction == "left" else (0j, a) if direction == "right" else (a, a)
        incident = IncidentSpec(direction, th1, th2, parse_complex(inc["omega"], "incident.omega"))

    return SimulationConfig(params, array, modulation, truncation, incident)


def config_to_dict(cfg: SimulationConfig) -> dict[str, Any]:
    entries = []
    for e in cfg.modulation.entries:
        if e.is_cosine:
            entries.append({"eps": e.eps, "phi": e.phi})
        else:
            entries.append({"fourier": [{"m": m, "k": _complex_out(c)}
                                        for m, c in sorted(e.coefficients.items())]})
    inc = cfg.incident
    return {
        "physical": {
            "rho_out": cfg.params.rho_out,
            "rho_in": cfg.params.rho_in,
            "kappa_out": cfg.params.kappa_out,
            "kappa_in": cfg.params.kappa_in,
        },
        "geometry": {"boundaries": list(cfg.array.boundaries)},
        "modulation": {"omega": cfg.modulation.omega_mod, "entries": entries},
        "truncation": {"K": cfg.truncation.K, "M": cfg.truncation.M},
        "incident": {
            "direction": inc.direction,
            "amplitudes": [_complex_out(inc.theta1), _complex_out(inc.theta2)],
            "omega": _complex_out(inc.omega),
        },
    }


def load_config(path) -> SimulationConfig:
    with open(path) as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return build_config(raw)
