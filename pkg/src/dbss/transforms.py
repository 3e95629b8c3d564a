"""Fourier and starlet transforms plus robust noise estimation.

Conventions fixed for the whole package:

* DFT: forward unnormalized, inverse carries 1/N_p (numpy convention), so
  Parseval reads ``sum |x|^2 == sum |x_hat|^2 / N_p``.
* Starlet: isotropic a trous wavelet with the B3-spline kernel
  (1/16)[1, 4, 6, 4, 1], hole spacing 2^j at scale j, mirror (half-sample
  symmetric) boundary, additive reconstruction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

__all__ = [
    "WaveletCoeffs",
    "dft_forward",
    "dft_inverse",
    "starlet_decompose",
    "starlet_reconstruct",
    "mad_sigma",
]

# B3-spline refinement weights of the a trous scheme.
_B3 = np.array([1.0, 4.0, 6.0, 4.0, 1.0]) / 16.0

# MAD of a unit Gaussian; divides the raw MAD for consistency with sigma.
MAD_TO_SIGMA = 0.6745


@dataclass
class WaveletCoeffs:
    """Starlet analysis coefficients of a single 1-D signal.

    ``detail_scales[j]`` holds scale j (fine to coarse) and ``coarse`` the
    final smooth; their plain sum reconstructs the signal exactly.
    """

    detail_scales: list = field(default_factory=list)
    coarse: np.ndarray = None

    def __post_init__(self):
        self.detail_scales = [np.asarray(d, dtype=float) for d in self.detail_scales]
        self.coarse = np.asarray(self.coarse, dtype=float)
        n = self.coarse.shape[-1]
        if self.coarse.ndim != 1:
            raise ValueError("coarse scale must be a 1-D vector")
        for j, d in enumerate(self.detail_scales):
            if d.shape != (n,):
                raise ValueError(
                    f"detail scale {j} has length {d.shape}, expected ({n},)"
                )

    @property
    def n_scales(self) -> int:
        return len(self.detail_scales)

    @property
    def n_samples(self) -> int:
        return self.coarse.shape[0]


def dft_forward(signal) -> np.ndarray:
    """Forward DFT (unnormalized) of a length-N_p signal."""
    signal = np.asarray(signal)
    if signal.ndim != 1 or signal.size < 1:
        raise ValueError("signal must be a nonempty 1-D vector")
    return np.fft.fft(signal)


def dft_inverse(spectrum) -> np.ndarray:
    """Inverse DFT carrying the 1/N_p factor; returns a complex vector.

    Callers working with real-signal models take the real part themselves
    (the model guarantees Hermitian-symmetric spectra there).
    """
    spectrum = np.asarray(spectrum)
    if spectrum.ndim != 1 or spectrum.size < 1:
        raise ValueError("spectrum must be a nonempty 1-D vector")
    return np.fft.ifft(spectrum)


def _dilated_b3(step: int) -> np.ndarray:
    # B3 taps at offsets {-2h, -h, 0, h, 2h}; zeros in the holes.
    kernel = np.zeros(4 * step + 1)
    kernel[::step] = _B3
    return kernel


def starlet_decompose(signal, n_scales: int) -> WaveletCoeffs:
    """A trous starlet analysis into ``n_scales`` detail scales plus a coarse.

    Parameters
    ----------
    signal : array_like, shape (N_p,)
        Real input signal.
    n_scales : int
        Number of detail scales J; requires 2**J <= N_p so the mirror
        extension never leaves the first reflection period.

    Returns
    -------
    WaveletCoeffs
    """
    signal = np.asarray(signal, dtype=float)
    if signal.ndim != 1:
        raise ValueError("signal must be a 1-D vector")
    if n_scales < 1:
        raise ValueError("n_scales must be a positive integer")
    n = signal.shape[0]
    if 2 ** n_scales > n:
        raise ValueError(
            f"scale too deep: 2**{n_scales} > signal length {n}"
        )
    smooth = signal
    details = []
    for j in range(n_scales):
        smooth_next = ndimage.convolve1d(smooth, _dilated_b3(2 ** j), mode="reflect")
        details.append(smooth - smooth_next)
        smooth = smooth_next
    return WaveletCoeffs(detail_scales=details, coarse=smooth)


def starlet_reconstruct(coeffs: WaveletCoeffs) -> np.ndarray:
    """Additive starlet synthesis: coarse plus the sum of all detail scales."""
    out = coeffs.coarse.copy()
    for d in coeffs.detail_scales:
        out += d
    return out


def mad_sigma(values) -> float:
    """Robust noise level: median absolute deviation over 0.6745.

    The constant makes the estimate consistent with the standard deviation
    of Gaussian samples. Median of an even-length vector is the mean of the
    two central order statistics (numpy convention).
    """
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ValueError("mad_sigma of an empty vector")
    med = np.median(values)
    return float(np.median(np.abs(values - med)) / MAD_TO_SIGMA)
