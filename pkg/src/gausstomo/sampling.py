"""Seeded, reproducible synthetic measurement records.

Randomness comes from the Philox4x64 counter-based generator addressed by
an explicit (key, counter) pair, with Gaussian variates produced by the
inverse normal CDF applied to 53-bit uniforms.  Every random quantity is a
pure function of (master_seed, stream_id, word index), so a run of n
samples can be split across workers by word blocks and reassembled into
exactly the single-threaded sequence on any platform.

Word layout: sample i consumes the two 64-bit words (2i, 2i + 1) of its
stream; homodyne uses word 2i for the quadrature angle (discarded under a
deterministic angle grid, keeping the layout policy-independent) and word
2i + 1 for the quadrature value, heterodyne uses both words for the
phase-space pair.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.random import Philox
from scipy.special import ndtri

from .core import (Covariance2, DomainError, GaussianStateSpec, SchemeKind,
                   SQRT2, effective_covariance)

_WORDS_PER_SAMPLE = 2
_WORDS_PER_BLOCK = 4  # one Philox4x64 counter increment yields four words


@dataclass(frozen=True)
class SeedSpec:
    """Addressable randomness: equal (master_seed, stream_id) means equal samples."""

    master_seed: int
    stream_id: int = 0

    def __post_init__(self):
        for name in ("master_seed", "stream_id"):
            v = getattr(self, name)
            if not isinstance(v, int) or not 0 <= v < 2 ** 64:
                raise DomainError(f"{name} must be an integer in [0, 2^64)")

    def stream(self, offset: int) -> "SeedSpec":
        return SeedSpec(self.master_seed, self.stream_id + offset)

    def to_json_dict(self) -> dict:
        return {"master_seed": self.master_seed, "stream_id": self.stream_id}

    @classmethod
    def from_json_dict(cls, d: dict) -> "SeedSpec":
        try:
            return cls(master_seed=int(d["master_seed"]), stream_id=int(d.get("stream_id", 0)))
        except KeyError as exc:
            raise DomainError(f"seed record is missing key {exc}") from exc


@dataclass(frozen=True)
class QuadratureSample:
    """One homodyne record: local-oscillator phase and measured quadrature."""

    theta: float
    x: float


@dataclass(frozen=True)
class PhaseSpaceSample:
    """One heterodyne record: simultaneously measured quadrature pair."""

    x: float
    p: float


@dataclass(frozen=True)
class ContinuousSweep:
    """Local-oscillator phase drawn uniformly on [0, pi) per shot."""


@dataclass(frozen=True)
class UniformGrid:
    """Phases cycle through theta_j = j pi / d, giving a balanced allocation."""

    d: int

    def __post_init__(self):
        if not isinstance(self.d, int) or self.d < 1:
            raise DomainError(f"grid size d = {self.d} must be a positive integer")


AnglePolicy = ContinuousSweep | UniformGrid


def raw_words(seed: SeedSpec, start: int, count: int) -> np.ndarray:
    """uint64 words [start, start + count) of the stream, O(1) in start.

    Positions the Philox counter directly at the containing block, so a
    worker can read any window of the stream without generating its prefix.
    """
    if count == 0:
        return np.zeros(0, dtype=np.uint64)
    key = np.array([seed.master_seed, seed.stream_id], dtype=np.uint64)
    block0, offset = divmod(start, _WORDS_PER_BLOCK)
    nblocks = (offset + count + _WORDS_PER_BLOCK - 1) // _WORDS_PER_BLOCK
    gen = Philox(key=key, counter=block0)
    words = gen.random_raw(nblocks * _WORDS_PER_BLOCK)
    return words[offset:offset + count]


def _uniform01(words: np.ndarray) -> np.ndarray:
    # 53-bit mantissa in (0, 1), strictly inside so ndtri stays finite
    return (words >> np.uint64(11)).astype(float) * 2.0 ** -53 + 2.0 ** -54


def _standard_normal(words: np.ndarray) -> np.ndarray:
    return ndtri(_uniform01(words))


def _marginal_variances(cov: Covariance2, thetas: np.ndarray) -> np.ndarray:
    c, s = np.cos(thetas), np.sin(thetas)
    return cov.g1 * c * c + cov.g2 * s * s + SQRT2 * cov.g3 * s * c


def _homodyne_arrays(spec: GaussianStateSpec, n: int, policy: AnglePolicy,
                     seed: SeedSpec, start: int = 0) -> tuple[np.ndarray, np.ndarray]:
    words = raw_words(seed, _WORDS_PER_SAMPLE * start, _WORDS_PER_SAMPLE * n)
    words = words.reshape(n, _WORDS_PER_SAMPLE)
    if isinstance(policy, ContinuousSweep):
        thetas = math.pi * (words[:, 0] >> np.uint64(11)).astype(float) * 2.0 ** -53
    elif isinstance(policy, UniformGrid):
        idx = (np.arange(start, start + n) % policy.d).astype(float)
        thetas = math.pi * idx / policy.d
    else:
        raise DomainError(f"unknown angle policy {policy!r}")
    cov = effective_covariance(spec, SchemeKind.HOMODYNE)
    x = np.sqrt(_marginal_variances(cov, thetas)) * _standard_normal(words[:, 1])
    return thetas, x


def _cholesky_lower(cov: Covariance2) -> tuple[float, float, float]:
    q = cov.g3 / SQRT2
    l11 = math.sqrt(cov.g1)
    l21 = q / l11
    l22 = math.sqrt(cov.g2 - l21 * l21)
    return l11, l21, l22


def _heterodyne_arrays(spec: GaussianStateSpec, n: int, seed: SeedSpec,
                       start: int = 0) -> tuple[np.ndarray, np.ndarray]:
    words = raw_words(seed, _WORDS_PER_SAMPLE * start, _WORDS_PER_SAMPLE * n)
    z = _standard_normal(words).reshape(n, _WORDS_PER_SAMPLE)
    l11, l21, l22 = _cholesky_lower(effective_covariance(spec, SchemeKind.HETERODYNE))
    return l11 * z[:, 0], l21 * z[:, 0] + l22 * z[:, 1]


def sample_homodyne(spec: GaussianStateSpec, n: int,
                    angle_policy: AnglePolicy | None = None,
                    seed: SeedSpec = SeedSpec(0)) -> list[QuadratureSample]:
    """Draw n homodyne records (theta_i, x_i).

    x_i is zero-mean Gaussian with variance C(theta_i) = u^T G_hom u; the
    state mean is fixed at zero, only the profile is modelled.  Default
    angle policy is the continuous sweep (the infinite-quadrature limit);
    a UniformGrid(d) realises a finite set of d angle settings with
    balanced counts.
    """
    if n < 1:
        raise DomainError(f"n = {n} must be at least 1")
    policy = ContinuousSweep() if angle_policy is None else angle_policy
    thetas, x = _homodyne_arrays(spec, n, policy, seed)
    return [QuadratureSample(float(t), float(v)) for t, v in zip(thetas, x)]


def sample_heterodyne(spec: GaussianStateSpec, n: int,
                      seed: SeedSpec = SeedSpec(0)) -> list[PhaseSpaceSample]:
    """Draw n i.i.d. phase-space pairs from the heterodyne data Gaussian.

    The covariance is G_W + (2 - eta)/(2 eta) I, sampled through its
    Cholesky factor.
    """
    if n < 1:
        raise DomainError(f"n = {n} must be at least 1")
    x, p = _heterodyne_arrays(spec, n, seed)
    return [PhaseSpaceSample(float(a), float(b)) for a, b in zip(x, p)]


def homodyne_arrays(spec: GaussianStateSpec, n: int,
                    angle_policy: AnglePolicy | None = None,
                    seed: SeedSpec = SeedSpec(0),
                    start: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Array view of sample_homodyne, with an optional window start.

    Samples [start, start + n) equal the same slice of the full run, so
    workers covering disjoint windows reproduce the single-threaded
    sequence exactly after reassembly.
    """
    if n < 1:
        raise DomainError(f"n = {n} must be at least 1")
    policy = ContinuousSweep() if angle_policy is None else angle_policy
    return _homodyne_arrays(spec, n, policy, seed, start)


def heterodyne_arrays(spec: GaussianStateSpec, n: int,
                      seed: SeedSpec = SeedSpec(0),
                      start: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Array view of sample_heterodyne, with an optional window start."""
    if n < 1:
        raise DomainError(f"n = {n} must be at least 1")
    return _heterodyne_arrays(spec, n, seed, start)
