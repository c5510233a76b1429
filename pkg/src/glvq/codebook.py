"""Per-group lattice codec fitting.

A weight group is reshaped into d-dimensional column blocks, optionally
companded, and encoded as integer lattice codes via Babai rounding under
a learned d x d generation matrix.  The alternating optimizer refreshes
the codes, then takes monotone (step-halved) gradient steps on the basis
and the companding curvature, with spectral normalization keeping the
basis singular values in a stable range.  RTN and greedy coordinate
descent live here as baselines.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from . import companding
from .lattice import babai_round, check_basis

SIGMA_MIN_DEFAULT = 1e-2
SIGMA_MAX_DEFAULT = 10.0
COV_RIDGE = 1e-6


@dataclass
class GroupCodec:
    """Side information needed to decode one group.

    ``mu == 0.0`` marks a group coded without companding (the expand
    stage is skipped); active curvatures always lie in [10, 255].
    """

    basis: np.ndarray  # d x d generation matrix
    mu: float
    bits: int
    scale: float
    dim: int
    pad: int
    rows: int
    cols: int

    @property
    def columns(self) -> int:
        return (self.rows * self.cols + self.pad) // self.dim


@dataclass
class FitConfig:
    """Optimizer settings for fit_group."""

    eta_basis: float = 1e-3
    eta_mu: float = 1e-1
    tol: float = 1e-4
    max_iters: int = 200
    lam: float = 0.1
    sigma_min: float = SIGMA_MIN_DEFAULT
    sigma_max: float = SIGMA_MAX_DEFAULT
    companding: bool = True
    fixed_basis: bool = False
    rounding: str = "babai"  # "babai" | "gcd"
    gcd_sweeps: int = 1


@dataclass
class FitReport:
    loss_history: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    final_loss: float = float("inf")


def code_range(bits: int):
    """Inclusive integer code range [-2^(b-1), 2^(b-1) - 1]."""
    if bits < 1:
        raise ValueError(f"bits must be >= 1, got {bits}")
    return -(2 ** (bits - 1)), 2 ** (bits - 1) - 1


def reshape_group(weights, dim: int):
    """Flatten column-major, zero-pad to a multiple of ``dim`` and chunk
    into consecutive length-d column vectors.  Returns (d x l array, pad).
    """
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    w = np.asarray(weights, dtype=float)
    flat = w.ravel(order="F")
    pad = (-flat.size) % dim
    if pad:
        flat = np.concatenate([flat, np.zeros(pad)])
    return flat.reshape(-1, dim).T.copy(), int(pad)


def unreshape_group(latent, rows: int, cols: int, pad: int) -> np.ndarray:
    """Exact inverse of reshape_group (drops the zero padding)."""
    flat = np.asarray(latent, dtype=float).T.ravel()
    if pad:
        flat = flat[: rows * cols]
    return flat.reshape((rows, cols), order="F")


def quantize_columns(latent, codec: GroupCodec) -> np.ndarray:
    """Babai-round every latent column, then clamp into the code range."""
    z = babai_round(codec.basis, latent)
    lo, hi = code_range(codec.bits)
    return np.clip(z, lo, hi)


def gcd_quantize_columns(latent, codec: GroupCodec, sweeps: int = 1) -> np.ndarray:
    """Greedy coordinate descent index assignment (ablation baseline).

    Starting from all-zero codes, round-robin over coordinates setting
    each to the in-range integer that minimizes the column residual with
    the other coordinates fixed.  Deterministic; per-column residuals
    never increase across updates.
    """
    if sweeps < 1:
        raise ValueError("sweeps must be >= 1")
    b = check_basis(codec.basis)
    lat = np.asarray(latent, dtype=float)
    lo, hi = code_range(codec.bits)
    d = b.shape[0]
    col_norm2 = (b * b).sum(axis=0)
    z = np.zeros((d, lat.shape[1]))
    resid = lat.copy()
    for _ in range(sweeps):
        for i in range(d):
            partial = resid + np.outer(b[:, i], z[i])
            t = (b[:, i] @ partial) / col_norm2[i]
            zi = np.clip(np.floor(t + 0.5), lo, hi)
            resid = partial - np.outer(b[:, i], zi)
            z[i] = zi
    return z.astype(np.int64)


def _latent_of(weights, codec: GroupCodec) -> np.ndarray:
    lat, pad = reshape_group(weights, codec.dim)
    if pad != codec.pad:
        raise ValueError("weights do not match codec geometry")
    lat /= codec.scale
    if codec.mu > 0.0:
        lat = companding.compand(lat, codec.mu)
    return lat


def reconstruct(codes, codec: GroupCodec) -> np.ndarray:
    """Decode codes to an m x n weight matrix: scale * expand(G Z)."""
    v = codec.basis @ np.asarray(codes, dtype=float)
    y = companding.expand(v, codec.mu) if codec.mu > 0.0 else v
    return unreshape_group(codec.scale * y, codec.rows, codec.cols, codec.pad)


def group_loss(weights, codec: GroupCodec, codes, calib, basis_init, lam: float = 0.1) -> float:
    """Output reconstruction error plus basis anchor penalty:
    ||W X - W_hat X||_F^2 + lam ||G - G_init||_F^2."""
    w = np.asarray(weights, dtype=float)
    x = np.asarray(calib, dtype=float)
    w_hat = reconstruct(codes, codec)
    r = (w_hat - w) @ x
    dg = codec.basis - np.asarray(basis_init, dtype=float)
    return float((r * r).sum() + lam * (dg * dg).sum())


def _loss_and_grads(weights, calib, codec, codes, basis_init, lam, wx=None):
    """Loss plus analytic gradients w.r.t. basis and mu, with codes held
    constant (straight-through past the rounding)."""
    w = np.asarray(weights, dtype=float)
    x = np.asarray(calib, dtype=float)
    zf = np.asarray(codes, dtype=float)
    v = codec.basis @ zf
    if codec.mu > 0.0:
        y = companding.expand(v, codec.mu)
        didy, didmu = companding.expand_grad(v, codec.mu)
    else:
        y = v
    w_hat = unreshape_group(codec.scale * y, codec.rows, codec.cols, codec.pad)
    if wx is None:
        wx = w @ x
    r = w_hat @ x - wx
    dg = codec.basis - np.asarray(basis_init, dtype=float)
    loss = float((r * r).sum() + lam * (dg * dg).sum())
    g_out = 2.0 * (r @ x.T)  # m x n
    g_lat, _ = reshape_group(g_out, codec.dim)  # pad positions land on zeros
    if codec.mu > 0.0:
        g_v = g_lat * (codec.scale * didy)
        grad_mu = float((g_lat * (codec.scale * didmu)).sum())
    else:
        g_v = g_lat * codec.scale
        grad_mu = 0.0
    grad_basis = g_v @ zf.T + 2.0 * lam * dg
    return loss, grad_basis, grad_mu


def grad_basis(weights, calib, codec, codes, basis_init, lam: float = 0.1) -> np.ndarray:
    """Analytic d x d gradient of group_loss w.r.t. the generation matrix."""
    return _loss_and_grads(weights, calib, codec, codes, basis_init, lam)[1]


def grad_mu(weights, calib, codec, codes, basis_init, lam: float = 0.1) -> float:
    """Analytic gradient of group_loss w.r.t. the companding curvature."""
    return _loss_and_grads(weights, calib, codec, codes, basis_init, lam)[2]


def spectral_normalize(basis, sigma_min: float = SIGMA_MIN_DEFAULT,
                       sigma_max: float = SIGMA_MAX_DEFAULT) -> np.ndarray:
    """Clamp the singular values into [sigma_min, sigma_max], keeping the
    singular vectors.  Identity on inputs already in range; idempotent."""
    if not 0.0 < sigma_min < sigma_max:
        raise ValueError("need 0 < sigma_min < sigma_max")
    b = np.asarray(basis, dtype=float)
    u, s, vt = np.linalg.svd(b)
    if np.all((s >= sigma_min) & (s <= sigma_max)):
        return b
    return (u * np.clip(s, sigma_min, sigma_max)) @ vt


def init_codec(weights, dim: int, bits: int, *, companding_enabled: bool = True,
               identity_basis: bool = False,
               sigma_min: float = SIGMA_MIN_DEFAULT,
               sigma_max: float = SIGMA_MAX_DEFAULT) -> GroupCodec:
    """Build the initial codec for a weight group.

    With companding the group is normalized by its max magnitude and the
    curvature comes from the sample kurtosis.  The basis starts from the
    Cholesky factor of the latent covariance (or the identity when
    ``identity_basis``), scaled so the 99th percentile of the coordinate
    magnitudes sits at 2^(b-1) - 0.5, then spectrally normalized.
    """
    w = np.asarray(weights, dtype=float)
    if w.ndim != 2:
        raise ValueError(f"weights must be 2-D, got shape {w.shape}")
    if not np.all(np.isfinite(w)):
        raise ValueError("weights have non-finite entries")
    rows, cols = w.shape
    if rows * cols < dim:
        raise ValueError(f"group of size {rows * cols} cannot host dim={dim} blocks")
    lo, hi = code_range(bits)

    amax = float(np.max(np.abs(w)))
    if amax == 0.0:
        _, pad = reshape_group(w, dim)
        basis = 2.0 ** (1 - bits) * np.eye(dim)
        mu = companding.MU_MIN if companding_enabled else 0.0
        return GroupCodec(basis=basis, mu=mu, bits=bits, scale=1.0, dim=dim,
                          pad=pad, rows=rows, cols=cols)

    scale = amax
    lat, pad = reshape_group(w, dim)
    lat /= scale
    if companding_enabled:
        try:
            mu = companding.init_mu(companding.kurtosis(w.ravel()))
        except companding.DegenerateSampleError:
            mu = companding.MU_MIN
        lat = companding.compand(lat, mu)
    else:
        mu = 0.0

    if identity_basis:
        chol = np.eye(dim)
        coords = lat
    else:
        cov = lat @ lat.T / lat.shape[1] + COV_RIDGE * np.eye(dim)
        chol = np.linalg.cholesky(cov)
        coords = np.linalg.solve(chol, lat)
    q = float(np.percentile(np.abs(coords), 99.0))
    alpha = q / (2 ** (bits - 1) - 0.5)
    if not np.isfinite(alpha) or alpha <= 0.0:
        alpha = 1.0
    basis = spectral_normalize(alpha * chol, sigma_min, sigma_max)
    return GroupCodec(basis=basis, mu=mu, bits=bits, scale=scale, dim=dim,
                      pad=pad, rows=rows, cols=cols)


def _quantize(latent, codec, cfg: FitConfig):
    if cfg.rounding == "gcd":
        return gcd_quantize_columns(latent, codec, cfg.gcd_sweeps)
    if cfg.rounding == "babai":
        return quantize_columns(latent, codec)
    raise ValueError(f"unknown rounding mode {cfg.rounding!r}")


def fit_group(weights, calib, dim: int, bits: int, config: FitConfig | None = None,
              init: GroupCodec | None = None):
    """Fit one group's codec by alternating code refresh and gradient steps.

    Proposals (gradient step, spectral normalization, mu projection, code
    refresh) are accepted only if the loss does not increase; on a
    rejection both step sizes are halved, and after 5 consecutive accepts
    they are doubled back toward their defaults.  Stops when the relative
    loss change of an accepted step falls below ``tol`` or after
    ``max_iters`` proposals.  Returns (codec, codes, FitReport).
    """
    cfg = config or FitConfig()
    w = np.asarray(weights, dtype=float)
    x = np.asarray(calib, dtype=float)
    if w.ndim != 2 or x.ndim != 2 or w.shape[1] != x.shape[0]:
        raise ValueError(f"shape mismatch: weights {w.shape} vs calib {x.shape}")
    if not (np.all(np.isfinite(w)) and np.all(np.isfinite(x))):
        raise ValueError("non-finite inputs")

    codec = init if init is not None else init_codec(
        w, dim, bits, companding_enabled=cfg.companding,
        identity_basis=cfg.fixed_basis, sigma_min=cfg.sigma_min,
        sigma_max=cfg.sigma_max)
    basis_init = codec.basis.copy()
    wx = w @ x

    codes = _quantize(_latent_of(w, codec), codec, cfg)
    loss, g_b, g_m = _loss_and_grads(w, x, codec, codes, basis_init, cfg.lam, wx)
    history = [loss]
    eta_b, eta_m = cfg.eta_basis, cfg.eta_mu
    streak_b = streak_m = 0
    converged = False
    iterations = 0
    update_basis = not cfg.fixed_basis
    update_mu = cfg.companding and codec.mu > 0.0
    eta_floor_b = cfg.eta_basis * 1e-15
    eta_floor_m = cfg.eta_mu * 1e-15

    def propose(cand):
        cand_codes = _quantize(_latent_of(w, cand), cand, cfg)
        cand_loss, cand_gb, cand_gm = _loss_and_grads(
            w, x, cand, cand_codes, basis_init, cfg.lam, wx)
        return cand, cand_codes, cand_loss, cand_gb, cand_gm

    for _ in range(cfg.max_iters):
        iterations += 1
        loss_start = loss
        accepted_any = False

        if update_basis:
            # backtracking line search: halve until the step stops hurting
            while eta_b > eta_floor_b:
                new_basis = spectral_normalize(codec.basis - eta_b * g_b,
                                               cfg.sigma_min, cfg.sigma_max)
                cand, c_codes, c_loss, c_gb, c_gm = propose(
                    replace(codec, basis=new_basis))
                if c_loss <= loss:
                    codec, codes, loss = cand, c_codes, c_loss
                    g_b, g_m = c_gb, c_gm
                    history.append(loss)
                    accepted_any = True
                    streak_b += 1
                    if streak_b >= 5:
                        eta_b = min(eta_b * 2.0, cfg.eta_basis)
                        streak_b = 0
                    break
                eta_b *= 0.5
                streak_b = 0

        if update_mu:
            while eta_m > eta_floor_m:
                new_mu = float(np.clip(codec.mu - eta_m * g_m,
                                       companding.MU_MIN, companding.MU_MAX))
                cand, c_codes, c_loss, c_gb, c_gm = propose(
                    replace(codec, mu=new_mu))
                if c_loss <= loss:
                    codec, codes, loss = cand, c_codes, c_loss
                    g_b, g_m = c_gb, c_gm
                    history.append(loss)
                    accepted_any = True
                    streak_m += 1
                    if streak_m >= 5:
                        eta_m = min(eta_m * 2.0, cfg.eta_mu)
                        streak_m = 0
                    break
                eta_m *= 0.5
                streak_m = 0

        stalled_b = (not update_basis) or eta_b <= eta_floor_b
        stalled_m = (not update_mu) or eta_m <= eta_floor_m
        if stalled_b and stalled_m:
            converged = True
            break
        if accepted_any or (stalled_b and stalled_m):
            if abs(loss - loss_start) / max(loss_start, 1e-30) < cfg.tol:
                converged = True
                break
        if not accepted_any:
            converged = True
            break

    return codec, codes, FitReport(loss_history=history, iterations=iterations,
                                   converged=converged, final_loss=loss)


def rtn_quantize(weights, bits: int) -> np.ndarray:
    """Symmetric round-to-nearest scalar quantization baseline."""
    lo, hi = code_range(bits)
    w = np.asarray(weights, dtype=float)
    amax = float(np.max(np.abs(w))) if w.size else 0.0
    if amax == 0.0:
        return np.zeros_like(w)
    s = amax if bits == 1 else amax / (2 ** (bits - 1) - 1)
    q = np.clip(np.floor(w / s + 0.5), lo, hi)
    return s * q
