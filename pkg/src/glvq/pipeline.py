"""Layer-level quantization pipeline.

Partitions a weight matrix into column groups, optionally runs
salience-driven bit allocation, fits every group's codec, and assembles
archive records plus evaluation metrics.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import bitalloc, codebook, container


@dataclass
class RunConfig:
    """Everything a quantization run needs besides the tensors."""

    dim: int = 8
    bits: float = 2.0
    group_width: int = 128
    eta_basis: float = 1e-3
    eta_mu: float = 1e-1
    tol: float = 1e-4
    max_iters: int = 200
    lam: float = 0.1
    sigma_min: float = 1e-2
    sigma_max: float = 10.0
    companding: bool = True
    bit_alloc: bool = True
    fixed_basis: bool = False
    rounding: str = "babai"
    seed: int = 0

    def validate(self) -> None:
        if self.dim < 1:
            raise ValueError(f"dim must be >= 1, got {self.dim}")
        if self.bits < 1.0 or self.bits > 8.0:
            raise ValueError(f"bits must lie in [1, 8], got {self.bits}")
        if self.group_width < 1:
            raise ValueError(f"group_width must be >= 1, got {self.group_width}")
        if self.rounding not in ("babai", "gcd"):
            raise ValueError(f"rounding must be babai or gcd, got {self.rounding!r}")
        for name in ("eta_basis", "eta_mu", "tol"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        if not 0 < self.sigma_min < self.sigma_max:
            raise ValueError("need 0 < sigma_min < sigma_max")

    def fit_config(self) -> codebook.FitConfig:
        return codebook.FitConfig(
            eta_basis=self.eta_basis, eta_mu=self.eta_mu, tol=self.tol,
            max_iters=self.max_iters, lam=self.lam, sigma_min=self.sigma_min,
            sigma_max=self.sigma_max, companding=self.companding,
            fixed_basis=self.fixed_basis, rounding=self.rounding)


@dataclass
class QuantizeResult:
    records: list  # (GroupCodec, codes) per group, in column order
    spans: list  # (start, stop) column span per group
    bits: np.ndarray
    allocation: bitalloc.BitAllocation | None
    reports: list = field(default_factory=list)

    def archive_bytes(self) -> bytes:
        return container.write_archive(self.records)

    def mean_bits(self) -> float:
        weights = np.array([(b - a) for a, b in self.spans], dtype=float)
        return float((self.bits * weights).sum() / weights.sum())


def partition_columns(cols: int, width: int):
    """Column spans [start, stop) of at most ``width`` columns each."""
    return [(a, min(a + width, cols)) for a in range(0, cols, width)]


def _is_integer_target(bits: float) -> bool:
    return abs(bits - round(bits)) < 1e-9


def quantize_matrix(weights, calib, config: RunConfig) -> QuantizeResult:
    """Run the two-stage pipeline: allocate bit-widths, then fit groups."""
    config.validate()
    w = np.asarray(weights, dtype=float)
    x = np.asarray(calib, dtype=float)
    if w.ndim != 2 or x.ndim != 2:
        raise ValueError("weights and calib must be 2-D")
    if w.shape[0] < 1 or w.shape[1] < 1 or x.shape[1] < 1:
        raise ValueError("weights and calib must be non-empty")
    if w.shape[1] != x.shape[0]:
        raise ValueError(
            f"calib feature dim {x.shape[0]} does not match weight columns {w.shape[1]}")
    if not (np.all(np.isfinite(w)) and np.all(np.isfinite(x))):
        raise ValueError("non-finite inputs")

    spans = partition_columns(w.shape[1], config.group_width)
    groups = [w[:, a:b] for a, b in spans]
    n_groups = len(groups)

    allocation = None
    if config.bit_alloc and n_groups >= 2:
        probe_bits = max(1, int(math.floor(config.bits + 0.5)))
        salience = bitalloc.compute_salience(groups, x, probe_bits)
        if _is_integer_target(config.bits):
            ref = w @ x

            def probe(bit_vec):
                w_hat = np.hstack([codebook.rtn_quantize(g, int(b))
                                   for g, b in zip(groups, bit_vec)])
                return w_hat @ x

            allocation = bitalloc.allocate_bits(salience, config.bits, probe, ref)
        else:
            allocation = bitalloc.allocate_bits(salience, config.bits)
        bits = allocation.bits
    else:
        if not _is_integer_target(config.bits):
            raise ValueError(
                "fractional bit targets need bit allocation over >= 2 groups")
        bits = np.full(n_groups, int(round(config.bits)), dtype=np.int64)

    fit_cfg = config.fit_config()
    records, reports = [], []
    for (a, b), g, bg in zip(spans, groups, bits):
        codec, codes, report = codebook.fit_group(
            g, x[a:b, :], dim=config.dim, bits=int(bg), config=fit_cfg)
        records.append((codec, codes))
        reports.append(report)
    return QuantizeResult(records=records, spans=spans, bits=np.asarray(bits),
                          allocation=allocation, reports=reports)


def dequantize_records(records) -> np.ndarray:
    """Decode (codec, codes) records and concatenate along columns."""
    parts = [codebook.reconstruct(codes, codec) for codec, codes in records]
    if not parts:
        return np.zeros((0, 0))
    return np.hstack(parts)


def evaluate(original, archive: container.GlvqArchive, calib) -> dict:
    """Error metrics of an archive against the original weights."""
    w = np.asarray(original, dtype=float)
    x = np.asarray(calib, dtype=float)
    w_hat = archive.decode_matrix()
    if w_hat.shape != w.shape:
        raise ValueError(f"archive decodes to {w_hat.shape}, original is {w.shape}")
    if w.shape[1] != x.shape[0]:
        raise ValueError(
            f"calib feature dim {x.shape[0]} does not match weight columns {w.shape[1]}")
    m, _ = w.shape
    t = x.shape[1]
    dw = w_hat - w
    out_ref = w @ x
    out_hat = w_hat @ x
    dout = out_hat - out_ref
    total_weights = sum(g.codec.rows * g.codec.cols for g in archive)
    code_bits = sum(g.codec.bits * g.codec.rows * g.codec.cols for g in archive)
    side_bits = sum(16 * g.codec.dim**2 + 16 for g in archive)  # bits
    side_actual = sum(container.record_side_bytes(g.codec.dim) for g in archive)
    return {
        "weight_mse": float((dw * dw).mean()),
        "output_mse": float((dout * dout).sum() / (m * t)),
        "kl": bitalloc.kl_objective(out_ref, out_hat),
        "bits_per_weight": code_bits / total_weights,
        "overhead_pct": 100.0 * side_bits / code_bits,
        "actual_side_bytes": side_actual,
    }
