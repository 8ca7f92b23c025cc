"""Atomic-path geometry: effective interaction times and the resulting asymmetry.

Coordinates: the atom flies along +x, the cavity axis is z, and y is the
remaining transverse direction. The collimator exit sits at x = 0; cavity
A is centred at x = D0 and cavity B at x = D0 + D1. A straight path is
y(x) = y0 + x tan(phi), z(x) = z0 + x tan(theta), traversed at speed v.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy import integrate

from .config import ConfigError, read_flat
from .protocol import asymmetric_fidelity


class GeometryError(ValueError):
    pass


class QuadratureError(RuntimeError):
    pass


class UndefinedAsymmetry(GeometryError):
    """Cavity A sees (numerically) zero effective interaction time."""


def waist(L: float, R: float, wavelength: float) -> float:
    """Mode waist [m] from mirror separation L [m], curvature radius R [m] and wavelength [m]."""
    if not (L > 0 and R > L and wavelength > 0):
        raise GeometryError(f"need R > L > 0 and wavelength > 0 (L={L}, R={R}, lambda={wavelength})")
    return math.sqrt(wavelength * math.sqrt(L) / (2 * math.pi) * math.sqrt(R - L))


@dataclass(frozen=True)
class CavityMode:
    w0: float
    wavelength: float
    L: float | None = None
    R: float | None = None

    def __post_init__(self):
        if not (self.w0 > 0 and self.wavelength > 0):
            raise GeometryError("w0 and wavelength must be positive")
        if (self.L is None) != (self.R is None):
            raise GeometryError("give both L and R, or neither")
        if self.L is not None:
            w = waist(self.L, self.R, self.wavelength)
            if abs(w - self.w0) > 1e-9 * self.w0:
                raise GeometryError(f"w0={self.w0} inconsistent with waist(L, R, lambda)={w}")

    @classmethod
    def from_mirrors(cls, L: float, R: float, wavelength: float) -> "CavityMode":
        return cls(waist(L, R, wavelength), wavelength, L, R)

    @property
    def k(self) -> float:
        return 2 * math.pi / self.wavelength


def mode_function(x, y, z, mode: CavityMode):
    """exp(-(x^2 + y^2)/w0^2) cos(2 pi z / lambda), with z along the cavity axis."""
    return np.exp(-(np.square(x) + np.square(y)) / mode.w0**2) * np.cos(mode.k * np.asarray(z))


@dataclass(frozen=True)
class PathParams:
    y0: float = 0.0
    z0: float = 0.0
    phi: float = 0.0
    theta: float = 0.0
    v: float = 500.0
    D0: float = 0.05
    D1: float = 0.05

    def __post_init__(self):
        if not self.v > 0:
            raise GeometryError("v must be positive")
        if self.D0 < 0 or self.D1 < 0:
            raise GeometryError("D0 and D1 must be >= 0")
        if abs(self.phi) >= math.pi / 2 or abs(self.theta) >= math.pi / 2:
            raise GeometryError("|phi| and |theta| must be below pi/2")

    def scaled(self, s: float) -> "PathParams":
        return replace(self, y0=self.y0 * s, z0=self.z0 * s, phi=self.phi * s, theta=self.theta * s)


@dataclass(frozen=True)
class EffectiveTimes:
    tau_a: float
    tau_b: float
    epsilon: float


def displacements(path: PathParams, distance: float, literal: bool = False) -> tuple[float, float]:
    """Transverse offsets (delta_y, delta_z) of the path in the plane of a cavity centre.

    ``literal=True`` reproduces the printed cos(angle) * D form, which is
    not dimensionally consistent with the second-order asymmetry; the
    default is the straight-line value offset + D tan(angle).
    """
    if literal:
        return path.y0 + math.cos(path.phi) * distance, path.z0 + math.cos(path.theta) * distance
    return path.y0 + distance * math.tan(path.phi), path.z0 + distance * math.tan(path.theta)


def central_time(mode: CavityMode, v: float) -> float:
    """sqrt(pi) w0 / v: effective time along the cavity centre line."""
    return math.sqrt(math.pi) * mode.w0 / v


def effective_time_quadrature(path: PathParams, mode: CavityMode, cavity_center_distance: float) -> float:
    """Integral of the mode function along the path [s], by adaptive quadrature."""
    dy, dz = displacements(path, cavity_center_distance)
    ty, tz = math.tan(path.phi), math.tan(path.theta)
    w0, k = mode.w0, mode.k
    # path length per unit of x travelled
    stretch = math.sqrt(1.0 + ty * ty + tz * tz)
    # integrate over u = (x - x_centre) / w0, centred on the Gaussian peak
    u_peak = -ty * dy / ((1.0 + ty * ty) * w0)
    half = 8.0 / math.cos(max(abs(path.phi), abs(path.theta)))

    def f(u):
        return math.exp(-(u * u + (dy / w0 + ty * u) ** 2)) * math.cos(k * (dz + tz * w0 * u))

    val, err, info = _quad(f, u_peak - half, u_peak + half)
    return val * w0 * stretch / path.v


def _quad(f, a, b):
    val, err, info, *msg = integrate.quad(f, a, b, epsabs=1e-12, epsrel=1e-12, limit=400, full_output=1)
    if msg and "roundoff" not in msg[0] and err > 1e-10:
        raise QuadratureError(f"quadrature did not converge: {msg[0].strip()}")
    return val, err, info


def effective_time_closed(
    path: PathParams, mode: CavityMode, cavity_center_distance: float, literal: bool = False
) -> float:
    """Closed-form effective interaction time [s] for a tilted, displaced path."""
    dy, dz = displacements(path, cavity_center_distance, literal)
    w0, k = mode.w0, mode.k
    ph, th = path.phi, path.theta
    pref = math.sqrt(math.pi) * w0 / (path.v * math.cos(th))
    gauss = math.exp(-(dy * dy / (w0 * w0)) * (1.0 - math.sin(th) ** 2 / math.cos(ph) ** 2))
    tilt = math.exp(-(k * w0 * math.tan(th)) ** 2 / 4.0)
    phase = math.cos(k * dz - k * dy * math.sin(th) * math.sin(ph) / math.cos(th) ** 2)
    return pref * gauss * tilt * phase


def epsilon_exact(path: PathParams, mode: CavityMode) -> EffectiveTimes:
    tau_a = effective_time_quadrature(path, mode, path.D0)
    tau_b = effective_time_quadrature(path, mode, path.D0 + path.D1)
    if abs(tau_a) <= 1e-12 * mode.w0 / path.v:
        raise UndefinedAsymmetry(f"tau_a = {tau_a:.3g} s; the path misses cavity A's mode")
    return EffectiveTimes(tau_a, tau_b, 1.0 - tau_b / tau_a)


def epsilon_second_order(path: PathParams, mode: CavityMode) -> float:
    """Asymmetry to second order in (y0, z0, phi, theta)."""
    a, b = path.D1 * path.phi, path.D1 * path.theta
    ypart = (a * a + a * (2 * path.D0 * path.phi) + 2 * path.y0 * a) / mode.w0**2
    zpart = 2 * math.pi**2 / mode.wavelength**2 * (b * b + b * (2 * path.D0 * path.theta) + 2 * path.z0 * b)
    return ypart + zpart


def _disk(rng: np.random.Generator, radius: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    r = radius * np.sqrt(rng.random(n))
    ang = 2 * np.pi * rng.random(n)
    return r * np.cos(ang), r * np.sin(ang)


def sample_beam_paths(
    beam_radius: float,
    angular_radius: float,
    D0: float,
    D1: float,
    v: float,
    rng: np.random.Generator,
    n: int,
) -> list[PathParams]:
    """Paths with (y0, z0) uniform on a disk of ``beam_radius`` and (phi, theta) on a disk of ``angular_radius``."""
    if beam_radius < 0 or angular_radius < 0:
        raise GeometryError("radii must be >= 0")
    if n < 1:
        raise GeometryError("n must be >= 1")
    y0, z0 = _disk(rng, beam_radius, n)
    phi, theta = _disk(rng, angular_radius, n)
    return [
        PathParams(float(a), float(b), float(c), float(d), v, D0, D1)
        for a, b, c, d in zip(y0, z0, phi, theta)
    ]


@dataclass(frozen=True)
class BeamConfig:
    mode: CavityMode
    beam_radius: float
    angular_radius: float
    D0: float
    D1: float
    v: float


def collimation_fidelity_stats(x: float, config: BeamConfig, n: int, seed: int = 0) -> dict[str, float]:
    """Distribution of Bell fidelities over a sampled beam of atomic paths."""
    rng = np.random.default_rng(seed)
    paths = sample_beam_paths(config.beam_radius, config.angular_radius, config.D0, config.D1, config.v, rng, n)
    eps = np.array([epsilon_exact(p, config.mode).epsilon for p in paths])
    fid = np.array([asymmetric_fidelity(x, e) for e in eps])
    return {
        "n": n,
        "mean": float(fid.mean()),
        "min": float(fid.min()),
        "p05": float(np.percentile(fid, 5)),
        "p50": float(np.percentile(fid, 50)),
        "p95": float(np.percentile(fid, 95)),
        "max": float(fid.max()),
        "epsilon_min": float(eps.min()),
        "epsilon_max": float(eps.max()),
    }


# flat key-value configs --------------------------------------------------

CONFIG_KEYS = (
    "w0", "lambda", "L", "R", "y0", "z0", "phi", "theta", "v", "D0", "D1", "beam_radius", "angular_radius",
)


def parse_config(text: str, allowed: tuple[str, ...] = CONFIG_KEYS) -> dict[str, float]:
    """Parse ``key = value`` lines (SI units, '#' comments). Unknown keys are rejected."""
    try:
        raw = read_flat(text)
    except ConfigError as exc:
        raise GeometryError(str(exc)) from exc
    out = {}
    for key, value in raw.items():
        if key not in allowed:
            raise GeometryError(f"unknown config key {key!r}")
        try:
            out[key] = float(value)
        except ValueError:
            raise GeometryError(f"config key {key!r}: not a number: {value!r}") from None
        if not math.isfinite(out[key]):
            raise GeometryError(f"config key {key!r} must be finite")
    return out


def load_config(path: str | Path, allowed: tuple[str, ...] = CONFIG_KEYS) -> dict[str, float]:
    return parse_config(Path(path).read_text(encoding="utf-8"), allowed)


def mode_from_config(cfg: dict[str, float]) -> CavityMode:
    if "L" in cfg or "R" in cfg:
        if "L" not in cfg or "R" not in cfg or "lambda" not in cfg:
            raise GeometryError("L and R need each other and lambda")
        if "w0" in cfg:
            return CavityMode(cfg["w0"], cfg["lambda"], cfg["L"], cfg["R"])
        return CavityMode.from_mirrors(cfg["L"], cfg["R"], cfg["lambda"])
    missing = {"w0", "lambda"} - cfg.keys()
    if missing:
        raise GeometryError(f"missing config keys: {sorted(missing)}")
    return CavityMode(cfg["w0"], cfg["lambda"])


def path_from_config(cfg: dict[str, float]) -> PathParams:
    missing = {"v", "D0", "D1"} - cfg.keys()
    if missing:
        raise GeometryError(f"missing config keys: {sorted(missing)}")
    return PathParams(
        cfg.get("y0", 0.0), cfg.get("z0", 0.0), cfg.get("phi", 0.0), cfg.get("theta", 0.0),
        cfg["v"], cfg["D0"], cfg["D1"],
    )
