"""Mu-law companding with a per-group curvature parameter.

The forward (compress) transform and its inverse (expand) are

    F(x)      = sgn(x) * ln(1 + mu |x|) / ln(1 + mu)
    F_inv(y)  = sgn(y) * ((1 + mu)^|y| - 1) / mu

with mu > 0 controlling compression strength.  F maps [-1, 1] onto
[-1, 1], is odd and strictly increasing.  The curvature is initialized
from the sample kurtosis of the data being compressed, then kept inside
the practical range [MU_MIN, MU_MAX].
"""

import numpy as np

MU_MIN = 10.0
MU_MAX = 255.0


class DegenerateSampleError(ValueError):
    """Raised when a sample has zero variance, so kurtosis is undefined."""


def _check_mu(mu) -> float:
    mu = float(mu)
    if not MU_MIN <= mu <= MU_MAX:
        raise ValueError(f"mu must lie in [{MU_MIN}, {MU_MAX}], got {mu}")
    return mu


def _check_finite(x, name: str) -> np.ndarray:
    a = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has non-finite entries")
    return a


def compand(x, mu):
    """Compress ``x`` with the mu-law transform.  Scalar in, scalar out."""
    mu = _check_mu(mu)
    a = _check_finite(x, "compand input")
    out = np.sign(a) * np.log1p(mu * np.abs(a)) / np.log1p(mu)
    return out if out.ndim else float(out)


def expand(y, mu):
    """Invert the mu-law transform: expand(compand(x)) == x."""
    mu = _check_mu(mu)
    a = _check_finite(y, "expand input")
    out = np.sign(a) * np.expm1(np.abs(a) * np.log1p(mu)) / mu
    return out if out.ndim else float(out)


def compand_grad(x, mu):
    """Derivatives (dF/dx, dF/dmu) of the compress transform.

    dF/dx is even in x and equals mu / ln(1 + mu) at x = 0 (the analytic
    limit).  dF/dmu vanishes at x = 0 and at |x| = 1.
    """
    mu = _check_mu(mu)
    a = _check_finite(x, "compand_grad input")
    log1p_mu = np.log1p(mu)
    absx = np.abs(a)
    dfdx = mu / ((1.0 + mu * absx) * log1p_mu)
    dfdmu = (
        np.sign(a)
        * (absx / (1.0 + mu * absx) * log1p_mu - np.log1p(mu * absx) / (1.0 + mu))
        / log1p_mu**2
    )
    if dfdx.ndim:
        return dfdx, dfdmu
    return float(dfdx), float(dfdmu)


def expand_grad(y, mu):
    """Derivatives (dF_inv/dy, dF_inv/dmu) of the expand transform.

    dF_inv/dy = (1 + mu)^|y| ln(1 + mu) / mu, positive and even in y.
    """
    mu = _check_mu(mu)
    a = _check_finite(y, "expand_grad input")
    log1p_mu = np.log1p(mu)
    absy = np.abs(a)
    p = np.exp(absy * log1p_mu)  # (1 + mu)^|y|
    didy = p * log1p_mu / mu
    didmu = np.sign(a) * (absy * p / (1.0 + mu) * mu - (p - 1.0)) / mu**2
    if didy.ndim:
        return didy, didmu
    return float(didy), float(didmu)


def grad(x, mu):
    """All four transform derivatives at a point.

    Returns (dF/dx, dF/dmu, dF_inv/dy, dF_inv/dmu) where the inverse
    derivatives are evaluated at y = compand(x, mu).
    """
    dfdx, dfdmu = compand_grad(x, mu)
    y = compand(x, mu)
    didy, didmu = expand_grad(y, mu)
    return dfdx, dfdmu, didy, didmu


def kurtosis(sample, excess: bool = True) -> float:
    """Sample kurtosis m4 / m2^2 from biased central moments.

    With ``excess`` (the default) 3 is subtracted, so a Gaussian sample
    scores near 0 and a balanced +/-1 sample scores exactly -2.
    """
    s = _check_finite(sample, "kurtosis sample").ravel()
    if s.size < 4:
        raise ValueError(f"kurtosis needs at least 4 samples, got {s.size}")
    c = s - s.mean()
    m2 = float(np.mean(c * c))
    if m2 <= 0.0:
        raise DegenerateSampleError("sample has zero variance")
    m4 = float(np.mean(c**4))
    k = m4 / m2**2
    return k - 3.0 if excess else k


def init_mu(kurtosis_value: float) -> float:
    """Initial curvature 100*tanh(kappa/10), clamped into [MU_MIN, MU_MAX]."""
    raw = 100.0 * np.tanh(float(kurtosis_value) / 10.0)
    return float(np.clip(raw, MU_MIN, MU_MAX))
