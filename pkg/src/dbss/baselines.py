"""Comparison pipelines: plain separation, completion-then-separation, and
channel-wise deconvolution-then-separation.

``gmca`` is the alternating solver run with an all-ones kernel, i.e. it
deliberately ignores the true degradation — that is the point of the
baseline. ``svt_complete`` fills masked Fourier data by singular value
thresholding before separation, and ``forward_deconvolve`` applies a
regularized Fourier inverse plus starlet shrinkage one channel at a time,
ignoring inter-channel structure.
"""

from __future__ import annotations

import logging

import numpy as np

from .model import KernelSet, SpectralData
from .solver import SolverConfig, _threshold_array, decgmca
from .transforms import mad_sigma, starlet_decompose, starlet_reconstruct

__all__ = [
    "gmca",
    "svt_complete",
    "forward_deconvolve",
    "pipeline_mc_gmca",
    "pipeline_forward_gmca",
]

logger = logging.getLogger(__name__)


def ones_kernel(n_channels: int, n_samples: int) -> KernelSet:
    """The trivial all-pass kernel (a mask with every bin active)."""
    return KernelSet(np.ones((n_channels, n_samples), dtype=complex), kind="mask")


def gmca(Y: SpectralData, n_sources: int, config: SolverConfig):
    """Blind separation without deconvolution.

    Exactly the alternating solver with the kernel replaced by all-ones;
    bit-identical to ``decgmca`` on such a kernel for equal seeds. Returns
    (A, S).
    """
    A, S, _ = decgmca(Y, ones_kernel(Y.n_channels, Y.n_samples), n_sources, config)
    return A, S


def svt_complete(
    Y: SpectralData,
    mask: KernelSet,
    step: float = None,
    threshold: float = None,
    max_iter: int = 100,
    err_tol: float = 1e-5,
) -> SpectralData:
    """Low-rank completion of masked data by singular value thresholding.

    Dual ascent on Z with singular-value shrinkage: X = shrink(Z) by
    ``threshold``, then Z += step * (observed - masked X), stopping when the
    relative data fit on the observed entries drops below ``err_tol`` or at
    ``max_iter``. The returned matrix has its observed entries replaced by
    the observations, so they agree with Y_hat regardless of where the
    iteration stopped. Defaults: threshold = 5 sqrt(N_c N_p) / 10 and
    step = 1.2 / active fraction.

    A fully active mask returns the data unchanged; all-zero observations
    return the zero matrix.
    """
    if mask.kind != "mask":
        raise ValueError("svt_complete requires a mask kernel")
    if mask.data.shape != Y.data.shape:
        raise ValueError("mask and data shapes disagree")
    m = mask.data.real
    n_c, n_p = Y.data.shape
    if np.all(m == 1):
        return SpectralData(Y.data.copy(), Y.noise_sigma.copy())
    observed = m * Y.data
    obs_norm = np.linalg.norm(observed)
    if obs_norm == 0:
        return SpectralData(np.zeros_like(Y.data), Y.noise_sigma.copy())
    if threshold is None:
        threshold = 5.0 * np.sqrt(n_c * n_p) / 10.0
    if step is None:
        step = 1.2 / float(np.mean(m))
    if threshold <= 0 or step <= 0:
        raise ValueError("threshold and step must be positive")
    Z = np.zeros_like(Y.data)
    X = np.zeros_like(Y.data)
    for it in range(1, max_iter + 1):
        U, s, Vh = np.linalg.svd(Z, full_matrices=False)
        s = np.maximum(s - threshold, 0.0)
        X = (U * s) @ Vh
        resid = observed - m * X
        rel = np.linalg.norm(resid) / obs_norm
        if rel <= err_tol:
            logger.debug("svt converged at iteration %d (rel %.3e)", it, rel)
            break
        Z += step * resid
    return SpectralData(X + m * (Y.data - X), Y.noise_sigma.copy())


def _band_gains(filter_hat: np.ndarray, n_scales: int) -> np.ndarray:
    """RMS gain of ``filter_hat`` composed with each starlet detail band.

    The transform is linear and shift invariant, so decomposing a unit
    impulse yields the exact band kernels; the gain of scale l is the RMS of
    the filter response multiplied by that band's frequency response.
    """
    delta = np.zeros(filter_hat.size)
    delta[0] = 1.0
    bands = starlet_decompose(delta, n_scales).detail_scales
    gains = np.array(
        [
            np.sqrt(np.mean(np.abs(filter_hat * np.fft.fft(band)) ** 2))
            for band in bands
        ]
    )
    return gains


def forward_deconvolve(
    y_hat, h_hat, reg: float, n_scales: int, tau: float
) -> np.ndarray:
    """Single-channel deconvolution: regularized Fourier inverse plus
    starlet shrinkage.

    The inverse is x_hat = conj(h) y / (|h|^2 + reg); callers fold any noise
    leveling into ``reg``. The sample-domain result is then hard-thresholded
    per detail scale at tau times the propagated noise level of that scale:
    the level is anchored on the MAD of the finest detail scale and carried
    to coarser scales by the band gains of the inverse filter, tracking the
    colored noise that deconvolution leaves behind.
    """
    y_hat = np.asarray(y_hat, dtype=complex)
    h_hat = np.asarray(h_hat, dtype=complex)
    if y_hat.shape != h_hat.shape or y_hat.ndim != 1:
        raise ValueError("y_hat and h_hat must be 1-D vectors of equal length")
    if reg <= 0:
        raise ValueError("reg must be positive")
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    denom = h_hat.real ** 2 + h_hat.imag ** 2 + reg
    g_hat = np.conj(h_hat) / denom
    x = np.fft.ifft(g_hat * y_hat).real
    coeffs = starlet_decompose(x, n_scales)
    gains = _band_gains(g_hat, n_scales)
    sigma = mad_sigma(coeffs.detail_scales[0])
    coeffs.detail_scales = [
        _threshold_array(d, tau * sigma * gains[l] / gains[0], "hard")
        for l, d in enumerate(coeffs.detail_scales)
    ]
    return starlet_reconstruct(coeffs)


def pipeline_mc_gmca(
    Y: SpectralData,
    mask: KernelSet,
    n_sources: int,
    config: SolverConfig,
    svt_step: float = None,
    svt_threshold: float = None,
    svt_max_iter: int = 100,
    svt_err_tol: float = 1e-5,
):
    """Matrix completion followed by blind separation. Returns (A, S)."""
    completed = svt_complete(
        Y,
        mask,
        step=svt_step,
        threshold=svt_threshold,
        max_iter=svt_max_iter,
        err_tol=svt_err_tol,
    )
    return gmca(completed, n_sources, config)


def deconvolved_data(
    Y: SpectralData, H_hat: KernelSet, n_scales: int, reg: float = None,
    tau: float = 3.0,
) -> SpectralData:
    """Channel-by-channel deconvolution of the whole data cube.

    ``reg`` defaults to 1e-3 * max|h_nu|^2 per channel (a flat-prior noise
    leveling).
    """
    out = np.empty_like(Y.data)
    for nu in range(Y.n_channels):
        h = H_hat.data[nu]
        reg_nu = reg if reg is not None else 1e-3 * float(
            np.max(h.real ** 2 + h.imag ** 2)
        )
        out[nu] = np.fft.fft(
            forward_deconvolve(Y.data[nu], h, reg_nu, n_scales, tau)
        )
    return SpectralData(out, Y.noise_sigma.copy())


def pipeline_forward_gmca(
    Y: SpectralData,
    H_hat: KernelSet,
    n_sources: int,
    config: SolverConfig,
    reg: float = None,
    tau: float = 3.0,
):
    """Channel-wise deconvolution followed by blind separation.

    Deliberately ignores inter-channel correlation during deconvolution.
    Returns (A, S).
    """
    Y_deconv = deconvolved_data(
        Y, H_hat, config.n_wavelet_scales, reg=reg, tau=tau
    )
    return gmca(Y_deconv, n_sources, config)
