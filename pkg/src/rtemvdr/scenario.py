"""Array geometry, interference-plus-noise covariance and compound-Gaussian snapshots.

Snapshots are stored row-wise: a batch of ``n`` snapshots of an ``N``-sensor
array is an ``(n, N)`` complex array whose row ``i`` is ``x_i``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

__all__ = [
    "TextureLaw",
    "Scenario",
    "SnapshotBatch",
    "steering_vector",
    "physical_angle_to_spatial_freq",
    "build_covariance",
    "hermitian_sqrt",
    "sample_snapshots",
    "scenario_from_config",
    "reference_scenario",
]

TEXTURE_KINDS = ("constant", "inverse-gamma", "exponential")


@dataclass(frozen=True)
class TextureLaw:
    """Distribution of the positive texture ``tau`` modulating each snapshot.

    ``inverse-gamma`` is parametrised by its shape and normalised to unit mean
    (scale = shape - 1), so ``shape`` must exceed 1. ``constant`` always
    returns ``value``.
    """

    kind: str = "inverse-gamma"
    shape: float = 2.0
    value: float = 1.0

    def __post_init__(self):
        if self.kind not in TEXTURE_KINDS:
            raise ValueError(f"unknown texture kind {self.kind!r}; expected one of {TEXTURE_KINDS}")
        if self.kind == "inverse-gamma" and not self.shape > 1:
            raise ValueError("inverse-gamma texture needs shape > 1 for a unit mean")
        if self.kind == "constant" and not self.value > 0:
            raise ValueError("constant texture must be positive")

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.kind == "constant":
            return np.full(n, float(self.value))
        if self.kind == "exponential":
            return rng.standard_exponential(n)
        # 1/Gamma(shape, 1) scaled by (shape - 1) has unit mean
        return (self.shape - 1.0) / rng.standard_gamma(self.shape, n)


@dataclass(frozen=True)
class Scenario:
    """Uniform linear array scenario.

    Parameters
    ----------
    n_sensors : int
        Number of array elements ``N``.
    noise_floor : float
        White noise power (linear).
    interferers : sequence of (spatial_freq, power)
        One entry per interferer, power in linear scale.
    look_spatial_freq : float
        Spatial frequency of the desired source.
    texture : TextureLaw
    """

    n_sensors: int
    noise_floor: float = 1.0
    interferers: tuple[tuple[float, float], ...] = ()
    look_spatial_freq: float = 0.0
    texture: TextureLaw = field(default_factory=TextureLaw)

    def __post_init__(self):
        if int(self.n_sensors) != self.n_sensors or self.n_sensors < 1:
            raise ValueError("n_sensors must be a positive integer")
        if not self.noise_floor > 0:
            raise ValueError("noise_floor must be positive")
        object.__setattr__(
            self, "interferers", tuple((float(f), float(p)) for f, p in self.interferers)
        )
        for _, power in self.interferers:
            if not power > 0:
                raise ValueError("interferer powers must be positive")

    @property
    def covariance(self) -> np.ndarray:
        return build_covariance(self)

    @property
    def steering(self) -> np.ndarray:
        """Unnormalised look-direction steering vector (norm sqrt(N))."""
        return steering_vector(self.look_spatial_freq, self.n_sensors)

    def with_sensors(self, n_sensors: int) -> "Scenario":
        return Scenario(n_sensors, self.noise_floor, self.interferers,
                        self.look_spatial_freq, self.texture)

    def with_texture(self, texture: TextureLaw) -> "Scenario":
        return Scenario(self.n_sensors, self.noise_floor, self.interferers,
                        self.look_spatial_freq, texture)


@dataclass(frozen=True)
class SnapshotBatch:
    samples: np.ndarray
    textures: np.ndarray
    gaussians: np.ndarray

    @property
    def n(self) -> int:
        return self.samples.shape[0]

    @property
    def n_sensors(self) -> int:
        return self.samples.shape[1]


def steering_vector(spatial_freq: float, n_sensors: int) -> np.ndarray:
    """Return ``a(theta)`` with entries ``exp(j 2 pi k theta)``, ``k = 0..N-1``."""
    if n_sensors < 1:
        raise ValueError("n_sensors must be >= 1")
    k = np.arange(n_sensors)
    return np.exp(2j * np.pi * k * spatial_freq)


def physical_angle_to_spatial_freq(angle_deg: float) -> float:
    """Spatial frequency of a plane wave at ``angle_deg`` for half-wavelength spacing."""
    if not -90.0 <= angle_deg <= 90.0:
        raise ValueError(f"angle {angle_deg} deg outside [-90, 90]")
    return 0.5 * np.sin(np.deg2rad(angle_deg))


def build_covariance(s: Scenario) -> np.ndarray:
    N = s.n_sensors
    sigma = s.noise_floor * np.eye(N, dtype=complex)
    for freq, power in s.interferers:
        a = steering_vector(freq, N)
        sigma += power * np.outer(a, a.conj())
    return 0.5 * (sigma + sigma.conj().T)


def hermitian_sqrt(sigma: np.ndarray) -> np.ndarray:
    """Hermitian PSD square root through the eigendecomposition."""
    lam, U = np.linalg.eigh(sigma)
    lam = np.clip(lam, 0.0, None)
    root = (U * np.sqrt(lam)) @ U.conj().T
    return 0.5 * (root + root.conj().T)


def _child_rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(stream,)))


def standard_complex_gaussian(rng: np.random.Generator, n: int, N: int) -> np.ndarray:
    """``(n, N)`` i.i.d. circular complex Gaussians with unit variance."""
    g = rng.standard_normal((n, N, 2))
    return (g[..., 0] + 1j * g[..., 1]) / np.sqrt(2.0)


def sample_snapshots(s: Scenario, n: int, seed: int,
                     sqrt_sigma: np.ndarray | None = None) -> SnapshotBatch:
    """Draw ``n`` compound-Gaussian snapshots ``x_i = sqrt(tau_i) Sigma^{1/2} w_i``.

    Gaussians and textures come from two independent streams derived from
    ``seed``. Both are consumed sequentially, so snapshot ``i`` depends only on
    ``(seed, i)``: the first ``m`` rows of a batch of size ``n > m`` equal the
    batch of size ``m``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    N = s.n_sensors
    if sqrt_sigma is None:
        sqrt_sigma = hermitian_sqrt(build_covariance(s))
    w = standard_complex_gaussian(_child_rng(seed, 0), n, N)
    tau = s.texture.draw(_child_rng(seed, 1), n)
    x = np.sqrt(tau)[:, None] * (w @ sqrt_sigma.T)
    return SnapshotBatch(samples=x, textures=tau, gaussians=w)


def reference_scenario(n_sensors: int = 4, texture: TextureLaw | None = None) -> Scenario:
    """Half-wavelength ULA, look at 0 deg, interferers at -35 and 70 deg, 10 dB INR."""
    s = scenario_from_config({
        "n_sensors": n_sensors,
        "noise_floor_db": 0.0,
        "interferer_angles_deg": [-35.0, 70.0],
        "interferer_inr_db": [10.0, 10.0],
        "look_angle_deg": 0.0,
    })
    return s if texture is None else s.with_texture(texture)


def scenario_from_config(cfg: dict) -> Scenario:
    """Build a :class:`Scenario` from a config mapping.

    Recognised keys: ``n_sensors``, ``noise_floor_db``,
    ``interferer_angles_deg``, ``interferer_inr_db`` (relative to the noise
    floor), ``look_angle_deg`` and ``texture`` (``kind``, ``shape``,
    ``value``). Dotted keys such as ``texture.kind`` are accepted too.
    Other keys (e.g. ``seed``) are ignored here.
    """
    cfg = dict(cfg)
    texture_cfg = dict(cfg.get("texture") or {})
    for key in list(cfg):
        if key.startswith("texture."):
            texture_cfg[key.split(".", 1)[1]] = cfg.pop(key)
    angles: Sequence[float] = cfg.get("interferer_angles_deg", []) or []
    inrs = cfg.get("interferer_inr_db", []) or []
    if np.isscalar(inrs):
        inrs = [inrs] * len(angles)
    if len(inrs) != len(angles):
        raise ValueError("interferer_angles_deg and interferer_inr_db differ in length")
    noise_floor = 10.0 ** (float(cfg.get("noise_floor_db", 0.0)) / 10.0)
    interferers = tuple(
        (physical_angle_to_spatial_freq(float(a)), noise_floor * 10.0 ** (float(r) / 10.0))
        for a, r in zip(angles, inrs)
    )
    texture = TextureLaw(
        kind=texture_cfg.get("kind", "inverse-gamma"),
        shape=float(texture_cfg.get("shape", 2.0)),
        value=float(texture_cfg.get("value", 1.0)),
    )
    return Scenario(
        n_sensors=int(cfg["n_sensors"]),
        noise_floor=noise_floor,
        interferers=interferers,
        look_spatial_freq=physical_angle_to_spatial_freq(float(cfg.get("look_angle_deg", 0.0))),
        texture=texture,
    )
