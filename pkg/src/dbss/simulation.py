"""Synthetic experiment generators.

Sources are sparse Bernoulli spike trains with Gaussian amplitudes,
smoothed by circular convolution with a Laplacian kernel; mixing matrices
are Gaussian with unit columns; degradations are Hermitian-symmetric binary
Fourier masks, channel-dependent Gaussian Fourier beams of linearly
increasing resolution, or their product. A small versioned container stores
a complete generated instance on disk.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import ndimage

from .model import KernelSet, MixingMatrix, SourceSet

__all__ = [
    "KernelSpec",
    "ExperimentSpec",
    "gen_sources",
    "gen_mixing",
    "gen_mask",
    "gen_psf",
    "gen_masked_psf",
    "gen_kernel",
    "save_dataset",
    "load_dataset",
]

logger = logging.getLogger(__name__)

DATASET_FORMAT_VERSION = 1


@dataclass
class KernelSpec:
    """Which degradation to synthesize and its parameters."""

    kind: str = "mask"
    active_fraction: float = 1.0
    ratio: float = 1.0
    sigma_max: float = 1800.0

    def __post_init__(self):
        if self.kind not in ("mask", "psf", "masked_psf"):
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if not (0 < self.active_fraction <= 1):
            raise ValueError("active_fraction must lie in (0, 1]")
        if self.ratio < 1:
            raise ValueError("ratio must be >= 1")
        if self.sigma_max <= 0:
            raise ValueError("sigma_max must be positive")


@dataclass
class ExperimentSpec:
    """Full description of one synthetic instance."""

    n_channels: int = 20
    n_sources: int = 2
    n_samples: int = 1024
    k_active: int = 20
    source_fwhm: float = 20.0
    kernel: KernelSpec = None
    snr_db: float = 60.0
    seed: int = 0
    exact_k: bool = False

    def __post_init__(self):
        if self.kernel is None:
            self.kernel = KernelSpec()
        elif isinstance(self.kernel, dict):
            self.kernel = KernelSpec(**self.kernel)
        if self.n_channels < 1 or self.n_sources < 1 or self.n_samples < 1:
            raise ValueError("channel, source and sample counts must be positive")
        if self.n_channels < self.n_sources:
            raise ValueError("need at least as many channels as sources")
        if not (0 <= self.k_active <= self.n_samples):
            raise ValueError("k_active must lie in [0, n_samples]")
        if self.source_fwhm <= 0:
            raise ValueError("source_fwhm must be positive")


def laplacian_kernel(fwhm: float, n_samples: int) -> np.ndarray:
    """Symmetric exp(-|x|/b) smoothing kernel, b = FWHM / (2 ln 2).

    Truncated at lag floor(8 b) (clamped to the circular half-length) and
    normalized to unit sum, so its value at lag FWHM/2 is half its peak.
    """
    b = fwhm / (2.0 * math.log(2.0))
    half = min(int(8.0 * b), (n_samples - 1) // 2)
    lags = np.arange(-half, half + 1)
    kernel = np.exp(-np.abs(lags) / b)
    return kernel / kernel.sum()


def gen_sources(spec: ExperimentSpec, rng: np.random.Generator) -> SourceSet:
    """Sparse smoothed sources.

    Activations are i.i.d. Bernoulli(k_active / n_samples) per sample
    (``exact_k`` instead samples exactly k_active positions per source
    without replacement); active amplitudes are standard Gaussian; the spike
    train is circularly convolved with the Laplacian kernel.
    """
    n_s, n_p = spec.n_sources, spec.n_samples
    if spec.exact_k:
        active = np.zeros((n_s, n_p), dtype=bool)
        for j in range(n_s):
            active[j, rng.choice(n_p, size=spec.k_active, replace=False)] = True
    else:
        active = rng.random((n_s, n_p)) < spec.k_active / n_p
    amplitudes = rng.standard_normal((n_s, n_p))
    spikes = np.where(active, amplitudes, 0.0)
    kernel = laplacian_kernel(spec.source_fwhm, n_p)
    return SourceSet(ndimage.convolve1d(spikes, kernel, axis=1, mode="wrap"))


def gen_mixing(
    n_channels: int, n_sources: int, rng: np.random.Generator,
    orthogonal: bool = False,
) -> MixingMatrix:
    """Gaussian mixing matrix with unit-norm columns.

    With ``orthogonal`` (square case only) the Gaussian draw is
    orthogonalized so A^T A = I. The condition number goes to the module
    logger at DEBUG level.
    """
    A = rng.standard_normal((n_channels, n_sources))
    if orthogonal:
        if n_channels != n_sources:
            raise ValueError("orthogonal mixing requires n_channels == n_sources")
        A, _ = np.linalg.qr(A)
    A = A / np.linalg.norm(A, axis=0)
    logger.debug("mixing condition number %.3e", np.linalg.cond(A))
    return MixingMatrix(A)


def gen_mask(
    n_channels: int, n_samples: int, active_fraction: float,
    rng: np.random.Generator,
) -> KernelSet:
    """Random binary Fourier mask, Hermitian-symmetric per channel.

    Bins 1..floor(N_p/2) are i.i.d. Bernoulli(active_fraction) and mirrored
    onto their conjugate partners so masked data of real signals stays
    conjugate-consistent; the DC bin is always active.
    """
    if not (0 < active_fraction <= 1):
        raise ValueError("active_fraction must lie in (0, 1]")
    m = n_samples // 2
    mask = np.empty((n_channels, n_samples))
    mask[:, 0] = 1.0
    if m >= 1:
        draw = rng.random((n_channels, m)) < active_fraction
        mask[:, 1 : m + 1] = draw
        mask[:, m + 1 :] = mask[:, 1 : n_samples - m][:, ::-1]
    return KernelSet(mask.astype(complex), kind="mask")


def _signed_frequencies(n_samples: int) -> np.ndarray:
    # Symmetric coordinate [-N_p/2 + 1, N_p/2] in FFT bin order.
    k = np.arange(n_samples)
    return np.where(k <= n_samples // 2, k, k - n_samples)


def gen_psf(
    n_channels: int, n_samples: int, ratio: float, sigma_max: float
) -> KernelSet:
    """Channel-dependent Gaussian Fourier beams exp(-x^2 / 2 sigma_nu^2).

    sigma_nu runs linearly from sigma_max / ratio (channel 1, worst
    resolved) to sigma_max (last channel, best resolved) over the symmetric
    frequency grid; each beam peaks at 1 on the DC bin. A single channel
    uses sigma_max (the ratio is meaningless there).
    """
    if ratio < 1:
        raise ValueError("ratio must be >= 1")
    if sigma_max <= 0:
        raise ValueError("sigma_max must be positive")
    x = _signed_frequencies(n_samples).astype(float)
    if n_channels == 1:
        sigmas = np.array([sigma_max])
    else:
        sigmas = np.linspace(sigma_max / ratio, sigma_max, n_channels)
    H = np.exp(-(x[None, :] ** 2) / (2.0 * sigmas[:, None] ** 2))
    return KernelSet(H.astype(complex), kind="psf")


def gen_masked_psf(spec: ExperimentSpec, rng: np.random.Generator) -> KernelSet:
    """Product of a Gaussian beam set and a random mask."""
    psf = gen_psf(
        spec.n_channels, spec.n_samples, spec.kernel.ratio, spec.kernel.sigma_max
    )
    mask = gen_mask(
        spec.n_channels, spec.n_samples, spec.kernel.active_fraction, rng
    )
    return KernelSet(psf.data * mask.data, kind="masked_psf")


def gen_kernel(spec: ExperimentSpec, rng: np.random.Generator) -> KernelSet:
    """Dispatch on the spec's kernel kind."""
    kind = spec.kernel.kind
    if kind == "mask":
        return gen_mask(
            spec.n_channels, spec.n_samples, spec.kernel.active_fraction, rng
        )
    if kind == "psf":
        return gen_psf(
            spec.n_channels, spec.n_samples, spec.kernel.ratio,
            spec.kernel.sigma_max,
        )
    return gen_masked_psf(spec, rng)


def _le(a: np.ndarray) -> np.ndarray:
    # Fix the on-disk byte order to little-endian.
    kind = a.dtype.kind
    width = a.dtype.itemsize
    return np.ascontiguousarray(a.astype(f"<{kind}{width}"))


def save_dataset(path, spec: ExperimentSpec, sources: SourceSet,
                 mixing: MixingMatrix, kernel: KernelSet, data) -> None:
    """Write one generated instance to ``path`` (npz container, version 1).

    Arrays are stored little-endian; the header is a JSON echo of the
    experiment spec plus the kernel kind and format version. ``data`` is the
    observed SpectralData.
    """
    header = {
        "format_version": DATASET_FORMAT_VERSION,
        "byte_order": "little",
        "kernel_kind": kernel.kind,
        "spec": asdict(spec),
    }
    np.savez(
        path,
        header=np.frombuffer(json.dumps(header).encode(), dtype="<u1"),
        sources=_le(sources.data),
        mixing=_le(mixing.data),
        kernel=_le(kernel.data),
        data=_le(data.data),
        noise_sigma=_le(data.noise_sigma),
    )


def load_dataset(path):
    """Read a container written by ``save_dataset``.

    Returns (spec, sources, mixing, kernel, data).
    """
    from .model import SpectralData

    with np.load(path) as archive:
        header = json.loads(bytes(archive["header"]).decode())
        if header.get("format_version") != DATASET_FORMAT_VERSION:
            raise ValueError(
                f"unsupported dataset format version {header.get('format_version')}"
            )
        spec = ExperimentSpec(**header["spec"])
        sources = SourceSet(archive["sources"])
        mixing = MixingMatrix(archive["mixing"])
        kernel = KernelSet(archive["kernel"], kind=header["kernel_kind"])
        data = SpectralData(archive["data"], archive["noise_sigma"])
    return spec, sources, mixing, kernel, data
