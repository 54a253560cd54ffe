"""Synthetic AR series with controlled drift.

Noise is Gaussian from Box-Muller on PCG64 uniforms (``Generator.random``,
53-bit doubles), seeded through ``SeedSequence([seed, channel])`` so a
channel's stream does not depend on how many other channels are generated.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.signal import lfilter, lfiltic

from .exceptions import UnstableProcessError
from .series import MultivariateSeries


@dataclass(frozen=True)
class ArSpec:
    """``x_t = sum_k phi_k x_{t-k} + noise_std * e_t``."""

    coefficients: tuple
    length: int
    noise_std: float = 1.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "coefficients", tuple(float(c) for c in np.atleast_1d(self.coefficients)))
        if self.noise_std <= 0:
            raise ValueError("noise_std must be > 0")
        if self.length < 1:
            raise ValueError("length must be >= 1")

    @property
    def order(self) -> int:
        return len(self.coefficients)


@dataclass(frozen=True)
class DriftSpec:
    """Drift applied to a copy of the generated channels.

    kind : {"coefficient_shift", "trend_break", "anomaly"}
        ``coefficient_shift`` switches to ``new_coefficients`` from ``t0`` on
        (same noise stream); ``trend_break`` adds ``slope * (t - t0)`` after
        ``t0``; ``anomaly`` adds ``magnitude`` channel standard deviations on
        ``[t0, t0 + width)``.
    """

    kind: str
    t0: int
    channels: tuple = (0,)
    new_coefficients: Optional[tuple] = None
    slope: float = 0.0
    magnitude: float = 0.0
    width: int = 1

    def __post_init__(self):
        if self.kind not in ("coefficient_shift", "trend_break", "anomaly"):
            raise ValueError(f"unknown drift kind {self.kind!r}")
        if self.kind == "coefficient_shift" and self.new_coefficients is None:
            raise ValueError("coefficient_shift needs new_coefficients")


def spectral_radius(coefficients) -> float:
    phi = np.asarray(coefficients, dtype=np.float64)
    p = phi.shape[0]
    if p == 0:
        return 0.0
    companion = np.zeros((p, p))
    companion[0] = phi
    companion[1:, :-1] = np.eye(p - 1)
    return float(np.max(np.abs(np.linalg.eigvals(companion))))


def check_stationary(coefficients):
    rad = spectral_radius(coefficients)
    if rad >= 1.0:
        raise UnstableProcessError(
            f"AR coefficients {tuple(coefficients)} are not stationary (spectral radius {rad:.6g})"
        )


def rng_for(seed: int, channel: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), int(channel)])))


def gaussian_noise(rng: np.random.Generator, n: int) -> np.ndarray:
    """Standard normals by the Box-Muller transform.

    Uniforms are consumed in pairs ``(u1, u2)`` and each pair yields the cosine
    then the sine variate, so the first ``k`` outputs do not depend on ``n``.
    """
    m = (n + 1) // 2
    u = rng.random(2 * m)
    u1, u2 = u[0::2], u[1::2]
    r = np.sqrt(-2.0 * np.log1p(-u1))
    theta = 2.0 * np.pi * u2
    z = np.empty(2 * m)
    z[0::2] = r * np.cos(theta)
    z[1::2] = r * np.sin(theta)
    return z[:n]


def _filter(phi, noise, history=None):
    a = np.concatenate([[1.0], -np.asarray(phi, dtype=np.float64)])
    if history is None:
        return lfilter([1.0], a, noise)
    zi = lfiltic([1.0], a, history[::-1])
    return lfilter([1.0], a, noise, zi=zi)[0]


def _generate(spec: ArSpec, channel: int, new_coefficients=None, t0=None, noise=None):
    check_stationary(spec.coefficients)
    burn = 10 * spec.order
    if noise is None:
        noise = spec.noise_std * gaussian_noise(rng_for(spec.seed, channel), spec.length + burn)
    if new_coefficients is None:
        return _filter(spec.coefficients, noise)[burn:]
    check_stationary(new_coefficients)
    cut = burn + t0
    head = _filter(spec.coefficients, noise[:cut])
    p_new = len(new_coefficients)
    hist = head[-p_new:] if p_new else np.empty(0)
    if p_new > head.shape[0]:
        hist = np.concatenate([np.zeros(p_new - head.shape[0]), head])
    tail = _filter(new_coefficients, noise[cut:], hist if p_new else None)
    return np.concatenate([head, tail])[burn:]


def gen_ar(spec: ArSpec, channel: int = 0) -> np.ndarray:
    """Single stationary AR(p) path of ``spec.length`` samples after a burn-in of 10 p."""
    return _generate(spec, channel)


def gen_multichannel(
    specs: Sequence[ArSpec],
    drift: Optional[DriftSpec] = None,
    mixing: float = 0.0,
    channel_names: Optional[Sequence[str]] = None,
    granularity: str = "1step",
) -> MultivariateSeries:
    """Stack independent AR channels; ``mixing`` in [0, 1) blends a shared
    noise stream into every channel to correlate them."""
    if not specs:
        raise ValueError("need at least one ArSpec")
    T = specs[0].length
    if any(s.length != T for s in specs):
        raise ValueError("all channels must have the same length")
    if not 0.0 <= mixing < 1.0:
        raise ValueError("mixing must lie in [0, 1)")
    shared = None
    if mixing:
        burn = 10 * max(s.order for s in specs)
        shared = gaussian_noise(rng_for(specs[0].seed, -1 % 2**32), T + burn)

    cols = []
    for c, spec in enumerate(specs):
        noise = None
        if shared is not None:
            burn = 10 * spec.order
            own = gaussian_noise(rng_for(spec.seed, c), T + burn)
            noise = spec.noise_std * (np.sqrt(1 - mixing**2) * own + mixing * shared[-(T + burn):])
        shift = drift is not None and drift.kind == "coefficient_shift" and c in drift.channels
        if shift:
            cols.append(_generate(spec, c, drift.new_coefficients, drift.t0, noise))
        else:
            cols.append(_generate(spec, c, noise=noise))
    values = np.column_stack(cols)

    if drift is not None and drift.kind != "coefficient_shift":
        if not 0 <= drift.t0 < T:
            raise ValueError(f"drift t0={drift.t0} outside series of length {T}")
        t = np.arange(T)
        for c in drift.channels:
            if drift.kind == "trend_break":
                values[:, c] += drift.slope * np.clip(t - drift.t0, 0, None)
            else:
                sd = values[:, c].std()
                end = min(T, drift.t0 + drift.width)
                values[drift.t0:end, c] += drift.magnitude * sd
    names = tuple(channel_names) if channel_names else tuple(f"ch{c}" for c in range(len(specs)))
    return MultivariateSeries(values, names, granularity)
