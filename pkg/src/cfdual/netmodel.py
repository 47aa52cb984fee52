"""Network geometry, large-scale fading and small-scale channel generation.

APs sit on a rectangular (by default square) grid and users are dropped
uniformly over the same area.
Large-scale fading follows a log-distance pathloss with shadowing that is
spatially correlated between users (per AP) and independent across APs.
Small-scale fading is correlated Rayleigh, with the correlation matrix of
each (user, AP) pair given by the Gaussian local scattering approximation
for a half-wavelength uniform linear array.

All arrays are indexed user-first: ``beta[k, l]``, ``R[k, l]``, ``H[k, l]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericalError

__all__ = [
    "NetworkConfig", "Geometry", "LargeScaleFading", "ChannelRealization",
    "generate_geometry", "pathloss_db", "shadow_covariance", "sample_shadowing",
    "large_scale_fading", "spatial_correlation", "correlation_matrices",
    "sample_channel", "sample_channels", "draw_realization", "trial_rng",
    "db2lin",
]

SHADOW_JITTER = 1e-10


def db2lin(x):
    return 10.0 ** (np.asarray(x, dtype=float) / 10.0)


@dataclass(frozen=True)
class NetworkConfig:
    """Physical layout and propagation parameters.

    ``area_side`` defaults to the side of the AP grid (``sqrt(L) * spacing``).
    ``ap_grid_rows`` selects a rectangular ``rows x (L / rows)`` grid; the
    default 0 means a square grid. The carrier (2 GHz) only enters through
    the pathloss constants.
    """

    num_aps: int = 100
    antennas_per_ap: int = 4
    num_users: int = 20
    ap_grid_spacing: float = 100.0
    ap_grid_rows: int = 0
    area_side: float | None = None
    ap_height_delta: float = 10.0
    shadow_std: float = 4.0
    shadow_decorrelation: float = 9.0
    asd_deg: float = 15.0
    rho_max_db: float = 94.0
    pathloss_intercept: float = -30.5
    pathloss_exponent_coeff: float = 36.7

    def __post_init__(self):
        for name in ("num_aps", "antennas_per_ap", "num_users"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        for name in ("ap_grid_spacing", "shadow_std", "shadow_decorrelation", "asd_deg"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be > 0, got {getattr(self, name)}")
        if self.ap_height_delta < 0:
            raise ConfigError("ap_height_delta must be >= 0")
        rows, cols = self.grid
        if self.area_side is not None and self.area_side < max(rows, cols) * self.ap_grid_spacing:
            raise ConfigError(
                f"area_side={self.area_side} m cannot hold a {rows}x{cols} grid "
                f"at {self.ap_grid_spacing} m spacing")

    @property
    def grid(self) -> tuple:
        """``(rows, cols)`` of the AP grid."""
        if self.ap_grid_rows:
            rows = int(self.ap_grid_rows)
            if rows < 1 or self.num_aps % rows:
                raise ConfigError(f"num_aps={self.num_aps} does not fill {rows} grid rows")
            return rows, self.num_aps // rows
        side = grid_side(self.num_aps)
        return side, side

    @property
    def extent(self) -> tuple:
        """``(width, height)`` of the deployment area in meters."""
        if self.area_side is not None:
            return float(self.area_side), float(self.area_side)
        rows, cols = self.grid
        return cols * self.ap_grid_spacing, rows * self.ap_grid_spacing

    @property
    def side(self) -> float:
        return max(self.extent)

    @property
    def rho_max(self) -> float:
        return float(db2lin(self.rho_max_db))

    @property
    def asd(self) -> float:
        return math.radians(self.asd_deg)


@dataclass(frozen=True)
class Geometry:
    ap_positions: np.ndarray    # (L, 2) meters
    user_positions: np.ndarray  # (K, 2) meters


@dataclass(frozen=True)
class LargeScaleFading:
    beta: np.ndarray            # (K, L) linear
    beta_db: np.ndarray         # (K, L)
    shadow: np.ndarray          # (K, L) dB
    distances: np.ndarray       # (K, L) 3-D, meters
    user_distances: np.ndarray  # (K, K) meters
    angles: np.ndarray          # (K, L) azimuth AP -> user, radians


@dataclass(frozen=True)
class ChannelRealization:
    """One coherence interval worth of channels.

    ``H[k, l]`` is the length-N channel between user k and AP l and
    ``R[k, l]`` its correlation matrix.
    """

    H: np.ndarray               # (K, L, N) complex
    R: np.ndarray               # (K, L, N, N) complex
    fading: LargeScaleFading
    geometry: Geometry
    trial: int = 0

    @property
    def beta(self) -> np.ndarray:
        return self.fading.beta


def grid_side(num_aps: int) -> int:
    side = math.isqrt(int(num_aps))
    if side * side != num_aps:
        raise ConfigError(f"num_aps={num_aps} is not a square grid count")
    return side


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    """Counter-based generator for one trial.

    The stream depends only on ``(seed, trial)``, so trials can run in any
    order or in parallel and still reproduce.
    """
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(trial),))
    return np.random.Generator(np.random.Philox(ss))


def generate_geometry(config: NetworkConfig, rng) -> Geometry:
    """Place APs on the configured grid and drop users uniformly.

    ``rng`` is a Generator or an integer seed.
    """
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    rows, cols = config.grid
    width, height = config.extent
    spacing = config.ap_grid_spacing
    xs = (width - cols * spacing) / 2.0 + (np.arange(cols) + 0.5) * spacing
    ys = (height - rows * spacing) / 2.0 + (np.arange(rows) + 0.5) * spacing
    gx, gy = np.meshgrid(xs, ys, indexing="xy")
    aps = np.column_stack([gx.ravel(), gy.ravel()])
    users = rng.uniform(0.0, 1.0, size=(config.num_users, 2)) * np.array([width, height])
    return Geometry(ap_positions=aps, user_positions=users)


def pathloss_db(d, intercept=-30.5, exponent_coeff=36.7):
    """Distance-dependent pathloss in dB (no shadowing); ``d`` in meters."""
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distance must be positive")
    out = intercept - exponent_coeff * np.log10(d)
    return float(out) if out.ndim == 0 else out


def shadow_covariance(user_distances, std=4.0, decorrelation=9.0):
    """Covariance (dB^2) of the shadowing seen by users at one AP."""
    return std ** 2 * 2.0 ** (-np.asarray(user_distances) / decorrelation)


def sample_shadowing(geometry: Geometry, config: NetworkConfig, rng) -> np.ndarray:
    """Draw the K x L shadowing matrix in dB.

    Each AP column is an independent draw from N(0, shadow_covariance), so
    users close to each other see similar shadowing from the same AP.
    """
    up = geometry.user_positions
    delta = np.linalg.norm(up[:, None, :] - up[None, :, :], axis=-1)
    cov = shadow_covariance(delta, config.shadow_std, config.shadow_decorrelation)
    cov[np.diag_indices_from(cov)] += SHADOW_JITTER
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("shadow covariance is not positive definite") from exc
    z = rng.standard_normal((config.num_users, config.num_aps))
    return chol @ z


def large_scale_fading(geometry: Geometry, config: NetworkConfig, rng) -> LargeScaleFading:
    up, ap = geometry.user_positions, geometry.ap_positions
    diff = up[:, None, :] - ap[None, :, :]
    horizontal = np.linalg.norm(diff, axis=-1)
    d = np.sqrt(horizontal ** 2 + config.ap_height_delta ** 2)
    shadow = sample_shadowing(geometry, config, rng)
    beta_db = pathloss_db(d, config.pathloss_intercept, config.pathloss_exponent_coeff) + shadow
    delta = np.linalg.norm(up[:, None, :] - up[None, :, :], axis=-1)
    angles = np.arctan2(diff[..., 1], diff[..., 0])
    return LargeScaleFading(beta=db2lin(beta_db), beta_db=beta_db, shadow=shadow,
                            distances=d, user_distances=delta, angles=angles)


def spatial_correlation(beta, theta, asd, N):
    """Gaussian local scattering correlation matrix for a half-wavelength ULA.

    Uses the small-angle closed form

        R[m, n] = beta * exp(j*pi*(m-n)*sin(theta))
                       * exp(-asd**2/2 * (pi*(m-n)*cos(theta))**2)

    Broadcasts over array-valued ``beta`` and ``theta`` (same shape), returning
    ``shape + (N, N)``. The diagonal equals ``beta``, so ``trace(R)/N == beta``.

    Parameters
    ----------
    beta : float or np.ndarray
        Linear pathloss, > 0.
    theta : float or np.ndarray
        Nominal angle of arrival in radians.
    asd : float
        Angular standard deviation in radians, >= 0.
    N : int
        Number of antennas.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    if asd < 0:
        raise ValueError("asd must be >= 0")
    beta = np.asarray(beta, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if np.any(beta <= 0):
        raise ValueError("beta must be positive")
    lag = np.subtract.outer(np.arange(N), np.arange(N)).astype(float)
    s = np.sin(theta)[..., None, None]
    c = np.cos(theta)[..., None, None]
    R = np.exp(1j * np.pi * lag * s) * np.exp(-0.5 * asd ** 2 * (np.pi * lag * c) ** 2)
    R = beta[..., None, None] * R
    # diagonal is exactly beta already; pin it against rounding
    idx = np.arange(N)
    R[..., idx, idx] = beta[..., None]
    return R


def correlation_matrices(fading: LargeScaleFading, config: NetworkConfig) -> np.ndarray:
    return spatial_correlation(fading.beta, fading.angles, config.asd, config.antennas_per_ap)


def _psd_sqrt(R):
    w, V = np.linalg.eigh(R)
    w = np.clip(w, 0.0, None)
    return (V * np.sqrt(w)[..., None, :]) @ np.swapaxes(V.conj(), -1, -2)


def sample_channel(R, rng) -> np.ndarray:
    """Draw ``h ~ CN(0, R)`` for one N x N correlation matrix."""
    R = np.asarray(R)
    z = (rng.standard_normal(R.shape[0]) + 1j * rng.standard_normal(R.shape[0])) / np.sqrt(2)
    return _psd_sqrt(R) @ z


def sample_channels(R, rng) -> np.ndarray:
    """Draw one channel per correlation matrix in a ``(..., N, N)`` stack."""
    R = np.asarray(R)
    shape = R.shape[:-1]
    try:
        S = _psd_sqrt(R)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("eigendecomposition of correlation stack failed") from exc
    bad = ~np.isfinite(S).all(axis=(-2, -1))
    if np.any(bad):
        pairs = [tuple(int(i) for i in ix) for ix in np.argwhere(bad)]
        raise NumericalError(f"non-finite correlation square root at (user, AP) pairs {pairs}")
    z = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)
    return np.einsum("...ij,...j->...i", S, z)


def draw_realization(config: NetworkConfig, rng, trial: int = 0) -> ChannelRealization:
    """Geometry, fading and channels for one trial, drawn in a fixed order."""
    geometry = generate_geometry(config, rng)
    fading = large_scale_fading(geometry, config, rng)
    R = correlation_matrices(fading, config)
    H = sample_channels(R, rng)
    return ChannelRealization(H=H, R=R, fading=fading, geometry=geometry, trial=trial)
