"""Alternating deconvolving source separation.

The solver alternates, per iteration, a per-frequency Tikhonov-regularized
least-squares estimate of the source spectra, sparsity-enforcing starlet
thresholding of the sample-domain sources with a decreasing threshold
schedule, and a closed-form least-squares update of the mixing matrix with
column renormalization. The regularization weight follows a decreasing
schedule of its own so early iterations are heavily stabilized and late
iterations approach the plain normal equations.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .model import (
    KernelSet,
    MixingMatrix,
    SourceSet,
    SpectralData,
    SpectralSourceSet,
)
from .transforms import mad_sigma, starlet_decompose, starlet_reconstruct

__all__ = [
    "SolverConfig",
    "SolverState",
    "update_sources",
    "spectral_norm_psd",
    "threshold_sources",
    "compute_threshold_schedule",
    "update_mixing",
    "normalize_columns",
    "eps_schedule",
    "init_mixing",
    "decgmca",
]

EPS_DECAY_MODES = ("linear", "exponential")
THRESHOLD_MODES = ("hard", "soft")
INIT_METHODS = ("random", "svd", "mc_svd")


@dataclass
class SolverConfig:
    """Knobs of the alternating solver.

    ``eps_start``/``eps_final`` bound the decreasing regularization schedule
    (mask-type kernels typically 1 -> 1e-3, beam-type 1 -> 1e-5);
    ``tau_final`` is the final threshold in noise-sigma units (commonly 2-4);
    ``p0`` the initially kept fraction of significant coefficients.
    """

    n_iterations: int = 50
    eps_start: float = 1.0
    eps_final: float = 1e-3
    eps_decay: str = "exponential"
    tau_final: float = 3.0
    p0: float = 0.05
    n_wavelet_scales: int = 4
    init: str = "svd"
    threshold_mode: str = "hard"
    rng_seed: int = 0

    def __post_init__(self):
        if self.n_iterations < 2:
            raise ValueError("n_iterations must be at least 2")
        if not (self.eps_start >= self.eps_final > 0):
            raise ValueError("need eps_start >= eps_final > 0")
        if not (0 < self.p0 <= 1):
            raise ValueError("p0 must lie in (0, 1]")
        if self.tau_final <= 0:
            raise ValueError("tau_final must be positive")
        if self.n_wavelet_scales < 1:
            raise ValueError("n_wavelet_scales must be positive")
        if self.eps_decay not in EPS_DECAY_MODES:
            raise ValueError(f"unknown eps_decay {self.eps_decay!r}")
        if self.threshold_mode not in THRESHOLD_MODES:
            raise ValueError(f"unknown threshold_mode {self.threshold_mode!r}")
        if self.init not in INIT_METHODS:
            raise ValueError(f"unknown init method {self.init!r}")


@dataclass
class SolverState:
    """Iterates of one alternating run (kept for diagnostics)."""

    A: MixingMatrix = None
    S: SourceSet = None
    S_hat: SpectralSourceSet = None
    iteration: int = 0
    thresholds: np.ndarray = field(default_factory=lambda: np.zeros(0))
    eps_current: float = 0.0


def _weighted_normal_terms(Y, A, H):
    """P(k) = sum_nu |H[nu,k]|^2 a_nu^T a_nu and b(k) = sum_nu conj(H) Y a_nu^T."""
    W = H.real ** 2 + H.imag ** 2
    P = np.einsum("vk,vi,vj->kij", W, A, A, optimize=True)
    b = np.einsum("vk,vi->ki", np.conj(H) * Y, A, optimize=True)
    return P, b


def _psd_stack_norms(P):
    """Largest eigenvalue of each matrix in a stack of Hermitian PSD matrices."""
    if P.shape[-1] == 1:
        return np.abs(P[..., 0, 0])
    return np.linalg.eigvalsh(P)[..., -1]


def update_sources(
    Y: SpectralData, A: MixingMatrix, H_hat: KernelSet, eps: float
) -> SpectralSourceSet:
    """Per-frequency regularized source estimate.

    Solves, independently at every frequency k,

        (P(k) + eps * ||P(k)||_2 * I) s_hat^k = b(k)

    with P(k) = sum_nu |H[nu,k]|^2 a_nu^T a_nu and
    b(k) = sum_nu conj(H[nu,k]) Y[nu,k] a_nu^T. The spectral-norm scaling
    keeps the relative conditioning uniform across frequencies. At a fully
    degenerate frequency (every channel masked) both P(k) and b(k) vanish;
    the ridge there falls back to the identity so the solve returns the
    minimum-norm answer s_hat^k = 0 without touching any active frequency.

    With ``eps = 0`` the plain normal equations are solved and a singular
    P(k) raises a ValueError.
    """
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    if Y.data.shape != H_hat.data.shape or Y.n_channels != A.n_channels:
        raise ValueError("data, kernel and mixing shapes disagree")
    n_s = A.n_sources
    P, b = _weighted_normal_terms(Y.data, A.data, H_hat.data)
    if eps > 0:
        norms = _psd_stack_norms(P)
        ridge = np.where(norms > 0, eps * norms, 1.0)
        P = P + ridge[:, None, None] * np.eye(n_s)
    try:
        s_hat = np.linalg.solve(P, b[..., None])[..., 0]
    except np.linalg.LinAlgError as exc:
        raise ValueError(
            "singular per-frequency system; use eps > 0 to regularize"
        ) from exc
    return SpectralSourceSet(s_hat.T)


def spectral_norm_psd(P) -> float:
    """Largest eigenvalue of a Hermitian PSD matrix.

    Raises
    ------
    ValueError
        If P is not Hermitian within 1e-10 (relative to its magnitude).
    """
    P = np.asarray(P)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise ValueError("P must be a square matrix")
    scale = max(1.0, float(np.max(np.abs(P))))
    if np.max(np.abs(P - P.conj().T)) > 1e-10 * scale:
        raise ValueError("P is not Hermitian within tolerance")
    return float(np.linalg.eigvalsh(P)[-1])


def _threshold_array(values, lam, mode):
    if mode == "hard":
        return np.where(np.abs(values) >= lam, values, 0.0)
    if mode == "soft":
        return np.sign(values) * np.maximum(np.abs(values) - lam, 0.0)
    raise ValueError(f"unknown threshold mode {mode!r}")


def threshold_sources(S: SourceSet, thresholds, mode: str, n_scales: int) -> SourceSet:
    """Starlet-domain thresholding of every source at its own level.

    Each source is decomposed into ``n_scales`` detail scales, every detail
    coefficient is thresholded at lambda_j (hard keeps |x| >= lambda), and
    the signal is rebuilt. The coarse scale is never thresholded: shrinking
    it would bias the low-frequency content the deconvolution must preserve.
    """
    thresholds = np.asarray(thresholds, dtype=float)
    if thresholds.shape != (S.n_sources,):
        raise ValueError("need one threshold per source")
    if np.any(thresholds < 0):
        raise ValueError("thresholds must be nonnegative")
    out = np.empty_like(S.data)
    for j in range(S.n_sources):
        coeffs = starlet_decompose(S.data[j], n_scales)
        coeffs.detail_scales = [
            _threshold_array(d, thresholds[j], mode) for d in coeffs.detail_scales
        ]
        out[j] = starlet_reconstruct(coeffs)
    return SourceSet(out)


def compute_threshold_schedule(coeffs, sigma_j, iteration: int, config: SolverConfig):
    """Per-source thresholds of the percentage-decreasing schedule.

    Parameters
    ----------
    coeffs : sequence of 1-D arrays
        Per-source detail-coefficient magnitudes |alpha_j| (all scales
        pooled; any order).
    sigma_j : sequence of float
        Per-source noise levels.
    iteration : int
        Current iteration i, 1-based.

    The significant set of source j is {|alpha| >= tau * sigma_j}, of size
    M_j. The kept count grows linearly from ceil(p0 * M_j) at i = 1 to M_j
    at i = N_i (clamped to [1, M_j]); the threshold is the kept-count-th
    largest significant magnitude. At i = N_i, or when the significant set
    is empty, the threshold is tau * sigma_j exactly.
    """
    if not (1 <= iteration <= config.n_iterations):
        raise ValueError("iteration out of schedule range")
    tau = config.tau_final
    out = np.empty(len(coeffs))
    for j, (alpha, sig) in enumerate(zip(coeffs, sigma_j)):
        floor = tau * float(sig)
        if iteration == config.n_iterations:
            out[j] = floor
            continue
        alpha = np.abs(np.asarray(alpha, dtype=float).ravel())
        significant = alpha[alpha >= floor]
        m = significant.size
        if m == 0:
            out[j] = floor
            continue
        frac = (1.0 - config.p0) * (iteration - 1) / (config.n_iterations - 1)
        keep = int(np.ceil((frac + config.p0) * m))
        keep = min(max(keep, 1), m)
        out[j] = np.partition(significant, m - keep)[m - keep]
    return out


def update_mixing(
    Y: SpectralData, S_hat: SpectralSourceSet, H_hat: KernelSet
) -> MixingMatrix:
    """Closed-form least-squares mixing update, one channel at a time.

    Row nu solves a_nu G_nu = c_nu with the kernel-weighted source Gram
    G_nu = sum_k |H[nu,k]|^2 s_hat^k (s_hat^k)^H and cross term
    c_nu = sum_k conj(H[nu,k]) Y[nu,k] (s_hat^k)^H. The result is real for
    Hermitian-consistent inputs; any imaginary residue is discarded and a
    warning is emitted when it exceeds 1e-8 relatively.

    Callers renormalize the columns afterwards (``normalize_columns``).
    """
    if Y.data.shape != H_hat.data.shape or Y.n_samples != S_hat.n_samples:
        raise ValueError("data, kernel and spectra shapes disagree")
    H = H_hat.data
    S = S_hat.data
    W = H.real ** 2 + H.imag ** 2
    G = np.einsum("vk,ik,jk->vij", W, S, np.conj(S), optimize=True)
    c = np.einsum("vk,ik->vi", np.conj(H) * Y.data, np.conj(S), optimize=True)
    try:
        # a_nu G_nu = c_nu  =>  G_nu^T a_nu^T = c_nu^T, and G^T = conj(G).
        rows = np.linalg.solve(np.conj(G), c[..., None])[..., 0]
    except np.linalg.LinAlgError as exc:
        raise ValueError(
            "degenerate sources: a source is identically zero on some "
            "channel's kernel support"
        ) from exc
    scale = np.max(np.abs(rows))
    if scale > 0 and np.max(np.abs(rows.imag)) > 1e-8 * scale:
        warnings.warn(
            "discarding a non-negligible imaginary part in the mixing update",
            RuntimeWarning,
            stacklevel=2,
        )
    return MixingMatrix(rows.real)


def normalize_columns(A: MixingMatrix) -> MixingMatrix:
    """Scale every column of A to unit l2 norm.

    Raises
    ------
    ValueError
        On a zero column (a collapsed source; the divergence guard of the
        alternating scheme).
    """
    norms = np.linalg.norm(A.data, axis=0)
    if np.any(norms == 0):
        raise ValueError("zero column in mixing matrix (source collapse)")
    return MixingMatrix(A.data / norms)


def eps_schedule(iteration: int, config: SolverConfig) -> float:
    """Regularization weight at iteration i (1-based).

    Linear mode interpolates eps affinely from eps_start (i = 1) to
    eps_final (i = N_i); exponential mode interpolates log(eps) the same
    way (geometric decay).
    """
    if not (1 <= iteration <= config.n_iterations):
        raise ValueError("iteration out of schedule range")
    t = (iteration - 1) / (config.n_iterations - 1)
    if config.eps_decay == "linear":
        return config.eps_start + (config.eps_final - config.eps_start) * t
    return float(
        config.eps_start * (config.eps_final / config.eps_start) ** t
    )


def _phase_aligned_real(U):
    # Rotate each singular vector so its dominant entry is real-positive
    # before dropping the imaginary part; bare Re() can annihilate a vector
    # whose arbitrary SVD phase sits near +-i.
    out = np.empty(U.shape, dtype=float)
    for j in range(U.shape[1]):
        col = U[:, j]
        lead = col[np.argmax(np.abs(col))]
        phase = lead / abs(lead) if abs(lead) > 0 else 1.0
        out[:, j] = (col * np.conj(phase)).real
    return out


def init_mixing(
    Y: SpectralData,
    H_hat: KernelSet,
    method: str,
    rng_seed: int,
    n_sources: int,
) -> MixingMatrix:
    """Initial mixing matrix.

    random
        Standard Gaussian entries, columns normalized.
    svd
        First ``n_sources`` left singular vectors of Y_hat (phase-aligned
        real part), columns normalized.
    mc_svd
        Complete the masked data by singular value thresholding first, then
        the svd path; only defined for mask kernels.
    """
    if method not in INIT_METHODS:
        raise ValueError(f"unknown init method {method!r}")
    if n_sources > Y.n_channels:
        raise ValueError("need at least as many channels as sources")
    if method == "random":
        rng = np.random.default_rng(rng_seed)
        A0 = rng.standard_normal((Y.n_channels, n_sources))
        return normalize_columns(MixingMatrix(A0))
    data = Y.data
    if method == "mc_svd":
        if H_hat.kind != "mask":
            raise ValueError("mc_svd initialization requires a mask kernel")
        from .baselines import svt_complete  # deferred: baselines wraps this module

        data = svt_complete(Y, H_hat).data
    U, _, _ = np.linalg.svd(data, full_matrices=False)
    A0 = _phase_aligned_real(U[:, :n_sources])
    return normalize_columns(MixingMatrix(A0))


def _pooled_detail_magnitudes(coeff_list):
    return [np.concatenate([np.abs(d) for d in cw.detail_scales]) for cw in coeff_list]


def data_fidelity(Y: SpectralData, A: MixingMatrix, S_hat, H_hat: KernelSet) -> float:
    """Quadratic data fit 0.5/N_p * ||Y_hat - H_hat o (A S_hat)||_F^2.

    The 1/N_p makes the value equal to the sample-domain residual energy
    (Parseval with this package's DFT convention).
    """
    S = S_hat.data if isinstance(S_hat, SpectralSourceSet) else np.asarray(S_hat)
    resid = Y.data - H_hat.data * (A.data @ S)
    return float(0.5 * np.sum(resid.real ** 2 + resid.imag ** 2) / Y.n_samples)


def decgmca(
    Y: SpectralData, H_hat: KernelSet, n_sources: int, config: SolverConfig
):
    """Run the alternating solver and return (A, S, diagnostics).

    Per iteration: regularized per-frequency source solve with the scheduled
    eps, inverse DFT and real part, per-source noise level from the MAD of
    the finest detail scale, scheduled starlet thresholding, forward DFT,
    mixing update, column normalization. Diagnostics hold one record per
    iteration (eps, thresholds, noise sigmas, objective value, detail-l1,
    detail-l0). The proximal refinement stage is a separate operation that
    pipelines invoke on the result.

    Raises
    ------
    RuntimeError
        If an iterate turns non-finite (divergence), naming the iteration.
    """
    if n_sources > Y.n_channels:
        raise ValueError("need at least as many channels as sources")
    if Y.data.shape != H_hat.data.shape:
        raise ValueError("data and kernel shapes disagree")
    state = SolverState(
        A=init_mixing(Y, H_hat, config.init, config.rng_seed, n_sources)
    )
    diagnostics = []
    for i in range(1, config.n_iterations + 1):
        state.iteration = i
        state.eps_current = eps_schedule(i, config)
        S_hat = update_sources(Y, state.A, H_hat, state.eps_current)
        S_raw = np.fft.ifft(S_hat.data, axis=1).real
        coeff_list = [
            starlet_decompose(S_raw[j], config.n_wavelet_scales)
            for j in range(n_sources)
        ]
        sigma = np.array([mad_sigma(cw.detail_scales[0]) for cw in coeff_list])
        lam = compute_threshold_schedule(
            _pooled_detail_magnitudes(coeff_list), sigma, i, config
        )
        state.thresholds = lam
        S_thr = np.empty_like(S_raw)
        l1 = np.empty(n_sources)
        l0 = np.empty(n_sources, dtype=int)
        for j, cw in enumerate(coeff_list):
            cw.detail_scales = [
                _threshold_array(d, lam[j], config.threshold_mode)
                for d in cw.detail_scales
            ]
            pooled = np.concatenate(cw.detail_scales)
            l1[j] = np.sum(np.abs(pooled))
            l0[j] = int(np.count_nonzero(pooled))
            S_thr[j] = starlet_reconstruct(cw)
        state.S = SourceSet(S_thr)
        state.S_hat = SpectralSourceSet(np.fft.fft(S_thr, axis=1))
        state.A = normalize_columns(update_mixing(Y, state.S_hat, H_hat))
        if not (
            np.all(np.isfinite(state.A.data)) and np.all(np.isfinite(S_thr))
        ):
            raise RuntimeError(f"solver diverged at iteration {i}")
        diagnostics.append(
            {
                "iteration": i,
                "eps": state.eps_current,
                "thresholds": lam.copy(),
                "sigma": sigma,
                "objective": data_fidelity(Y, state.A, state.S_hat, H_hat)
                + float(np.dot(lam, l1)),
                "detail_l1": l1,
                "detail_l0": l0,
            }
        )
    return state.A, state.S, diagnostics
