"""Multichannel Fourier-domain observation model and noise injection.

Each channel nu observes one row of ``Y_hat = H_hat o (A S_hat) + N_hat``:
the mixed sources, degraded entrywise by a channel-dependent Fourier kernel
(a binary mask, a Gaussian beam, or a masked beam), plus noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "SourceSet",
    "SpectralSourceSet",
    "MixingMatrix",
    "KernelSet",
    "SpectralData",
    "forward_observe",
    "add_noise",
    "hermitian_defect",
]

KERNEL_KINDS = ("mask", "psf", "masked_psf")


@dataclass
class SourceSet:
    """Real sources, one per row: shape (n_sources, n_samples)."""

    data: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float)
        if self.data.ndim != 2:
            raise ValueError("sources must form a 2-D (n_sources, n_samples) array")
        if self.data.shape[0] < 1 or self.data.shape[1] < 1:
            raise ValueError("sources need at least one row and one sample")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("sources contain non-finite entries")

    @property
    def n_sources(self) -> int:
        return self.data.shape[0]

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]


@dataclass
class SpectralSourceSet:
    """Fourier coefficients of the sources: complex (n_sources, n_samples).

    Rows of real sources are Hermitian-symmetric; ``hermitian_defect``
    measures how far a row strays.
    """

    data: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=complex)
        if self.data.ndim != 2:
            raise ValueError("spectra must form a 2-D array")

    @property
    def n_sources(self) -> int:
        return self.data.shape[0]

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]


@dataclass
class MixingMatrix:
    """Real mixing matrix, channels x sources; full column rank expected."""

    data: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float)
        if self.data.ndim != 2:
            raise ValueError("mixing matrix must be 2-D")
        if self.data.shape[0] < self.data.shape[1]:
            raise ValueError(
                "mixing matrix needs at least as many channels as sources"
            )
        if not np.all(np.isfinite(self.data)):
            raise ValueError("mixing matrix contains non-finite entries")

    @property
    def n_channels(self) -> int:
        return self.data.shape[0]

    @property
    def n_sources(self) -> int:
        return self.data.shape[1]


@dataclass
class KernelSet:
    """Per-channel Fourier kernels H_hat: complex (n_channels, n_samples).

    kind "mask": entries in {0, 1}. kind "psf": real entries, peak-normalized
    to |H| <= 1. kind "masked_psf": a psf with a mask applied on top.
    """

    data: np.ndarray
    kind: str = "mask"

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=complex)
        if self.data.ndim != 2:
            raise ValueError("kernels must form a 2-D array")
        if self.kind not in KERNEL_KINDS:
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.kind == "mask":
            vals = self.data
            if np.any(vals.imag != 0) or not np.all(
                (vals.real == 0) | (vals.real == 1)
            ):
                raise ValueError("mask kernels must have entries in {0, 1}")
        else:
            if np.any(np.abs(self.data.imag) > 0):
                raise ValueError(f"{self.kind} kernels must be real")
            if np.any(np.abs(self.data) > 1 + 1e-12):
                raise ValueError(f"{self.kind} kernels must satisfy |H| <= 1")

    @property
    def n_channels(self) -> int:
        return self.data.shape[0]

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]


@dataclass
class SpectralData:
    """Observed Fourier data Y_hat plus the per-channel noise level sigma
    recorded when the noise was generated (zero for noise-free data)."""

    data: np.ndarray
    noise_sigma: np.ndarray = None

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=complex)
        if self.data.ndim != 2:
            raise ValueError("data must form a 2-D array")
        if self.noise_sigma is None:
            self.noise_sigma = np.zeros(self.data.shape[0])
        self.noise_sigma = np.asarray(self.noise_sigma, dtype=float)
        if self.noise_sigma.shape != (self.data.shape[0],):
            raise ValueError("noise_sigma must hold one value per channel")

    @property
    def n_channels(self) -> int:
        return self.data.shape[0]

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]


def forward_observe(
    A: MixingMatrix, S_hat: SpectralSourceSet, H_hat: KernelSet
) -> SpectralData:
    """Noise-free observation: Y_hat[nu, k] = H_hat[nu, k] * (A S_hat)[nu, k].

    Raises
    ------
    ValueError
        On any dimension mismatch between A, S_hat and H_hat.
    """
    if A.n_sources != S_hat.n_sources:
        raise ValueError(
            f"mixing matrix has {A.n_sources} sources, spectra have {S_hat.n_sources}"
        )
    if H_hat.data.shape != (A.n_channels, S_hat.n_samples):
        raise ValueError(
            f"kernel shape {H_hat.data.shape} does not match "
            f"({A.n_channels}, {S_hat.n_samples})"
        )
    mixed = A.data @ S_hat.data
    return SpectralData(H_hat.data * mixed, np.zeros(A.n_channels))


def add_noise(Y: SpectralData, snr_db: float, rng_seed: int) -> SpectralData:
    """Add white Gaussian noise at a global SNR, deterministically by seed.

    Noise is drawn on the N_p real samples of each channel and transformed,
    so the injected Fourier noise is Hermitian-symmetric and downstream
    source estimates stay real. The single scale factor is chosen so that
    10*log10(||signal||_F^2 / ||noise||_F^2) equals ``snr_db`` exactly over
    the whole data cube. ``snr_db = inf`` is the noise-free sentinel.
    """
    if math.isinf(snr_db) and snr_db > 0:
        return SpectralData(Y.data.copy(), np.zeros(Y.n_channels))
    if not np.isfinite(snr_db):
        raise ValueError("snr_db must be finite or +inf")
    rng = np.random.default_rng(rng_seed)
    noise_t = rng.standard_normal((Y.n_channels, Y.n_samples))
    noise_f = np.fft.fft(noise_t, axis=1)
    signal_norm = np.linalg.norm(Y.data)
    noise_norm = np.linalg.norm(noise_f)
    if noise_norm == 0:
        raise ValueError("degenerate noise draw")
    scale = signal_norm / (noise_norm * 10.0 ** (snr_db / 20.0))
    sigma = scale * np.sqrt(np.mean(np.abs(noise_f) ** 2, axis=1))
    return SpectralData(Y.data + scale * noise_f, sigma)


def hermitian_defect(spectrum) -> float:
    """Relative departure of a 1-D spectrum from Hermitian symmetry."""
    spectrum = np.asarray(spectrum, dtype=complex)
    flipped = np.conj(np.roll(spectrum[::-1], 1))
    denom = np.linalg.norm(spectrum)
    if denom == 0:
        return 0.0
    return float(np.linalg.norm(spectrum - flipped) / denom)
