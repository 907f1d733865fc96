"""Adjustment of network-emitted Beta parameters by auxiliary covariates.

The log pseudo-parameters are regressed on the auxiliary design (shared
regressors, two responses); the residual covariance is kept so adjusted
parameters can either take the fitted conditional mean or be sampled
around it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InsufficientDataError, ShapeError

#: admissible range for adjusted Beta parameters
CLIP_LO = 1e-3
CLIP_HI = 1e6

_RIDGE = 1e-8


@dataclass(frozen=True)
class RegressionFit:
    """Bivariate least-squares fit of (log a', log b') on [1, Xa]."""

    mu_a: float
    mu_b: float
    delta_a: np.ndarray
    delta_b: np.ndarray
    sigma: np.ndarray  # 2x2 residual covariance
    q: int

    def __post_init__(self):
        da = np.asarray(self.delta_a, dtype=np.float64).ravel()
        db = np.asarray(self.delta_b, dtype=np.float64).ravel()
        S = np.asarray(self.sigma, dtype=np.float64)
        for arr in (da, db, S):
            arr.flags.writeable = False
        object.__setattr__(self, "delta_a", da)
        object.__setattr__(self, "delta_b", db)
        object.__setattr__(self, "sigma", S)
        if da.shape != (self.q,) or db.shape != (self.q,):
            raise ShapeError("coefficient length must equal q")
        if S.shape != (2, 2) or abs(S[0, 1] - S[1, 0]) > 1e-12:
            raise DomainError("sigma must be a symmetric 2x2 matrix")
        if S[0, 0] < 0 or S[1, 1] < 0 or S[0, 1] ** 2 > S[0, 0] * S[1, 1] + 1e-12:
            raise DomainError("sigma must be positive semidefinite")

    def to_dict(self) -> dict:
        return {
            "mu_a": float(self.mu_a),
            "mu_b": float(self.mu_b),
            "delta_a": [float(v) for v in self.delta_a],
            "delta_b": [float(v) for v in self.delta_b],
            "sigma": [[float(self.sigma[i, j]) for j in range(2)] for i in range(2)],
            "q": self.q,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RegressionFit":
        return cls(
            mu_a=d["mu_a"], mu_b=d["mu_b"],
            delta_a=np.array(d["delta_a"], dtype=np.float64),
            delta_b=np.array(d["delta_b"], dtype=np.float64),
            sigma=np.array(d["sigma"], dtype=np.float64),
            q=d["q"],
        )


@dataclass(frozen=True)
class BetaParams:
    """Final per-test Beta parameters plus the pre-adjustment pair."""

    a: np.ndarray
    b: np.ndarray
    a_raw: np.ndarray
    b_raw: np.ndarray

    def __post_init__(self):
        for name in ("a", "b", "a_raw", "b_raw"):
            arr = np.asarray(getattr(self, name), dtype=np.float64).ravel()
            if np.any(arr <= 0) or not np.all(np.isfinite(arr)):
                raise DomainError(f"{name} must be strictly positive and finite")
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)


def fit_bivariate_ols(Xa, a_raw, b_raw) -> RegressionFit:
    """Regress log a' and log b' on the auxiliary covariates.

    Both responses share the design [1, Xa]; the normal equations carry a
    1e-8 ridge so collinear or constant designs stay solvable (the
    unidentifiable directions are pinned at zero). The residual pairs'
    sample covariance (denominator n-1) becomes ``sigma``.
    """
    Xa = np.asarray(Xa, dtype=np.float64)
    if Xa.ndim == 1:
        Xa = Xa[:, None]
    a_raw = np.asarray(a_raw, dtype=np.float64).ravel()
    b_raw = np.asarray(b_raw, dtype=np.float64).ravel()
    n = a_raw.shape[0]
    q = Xa.shape[1]
    if Xa.shape[0] != n or b_raw.shape[0] != n:
        raise ShapeError("Xa, a_raw and b_raw must agree on row count")
    if n < q + 2:
        raise InsufficientDataError(f"need at least q + 2 = {q + 2} rows, got {n}")
    if np.any(a_raw <= 0) or np.any(b_raw <= 0):
        raise DomainError("pseudo-parameters must be strictly positive")

    Y = np.column_stack((np.log(a_raw), np.log(b_raw)))
    D = np.column_stack((np.ones(n), Xa))
    gram = D.T @ D + _RIDGE * np.eye(q + 1)
    beta = np.linalg.solve(gram, D.T @ Y)  # (q+1) x 2
    resid = Y - D @ beta
    sigma = np.cov(resid[:, 0], resid[:, 1], ddof=1)
    sigma = (sigma + sigma.T) / 2.0
    return RegressionFit(
        mu_a=float(beta[0, 0]), mu_b=float(beta[0, 1]),
        delta_a=beta[1:, 0].copy(), delta_b=beta[1:, 1].copy(),
        sigma=sigma, q=q,
    )


def _psd_factor(sigma: np.ndarray) -> np.ndarray:
    w, V = np.linalg.eigh(sigma)
    return V * np.sqrt(np.clip(w, 0.0, None))


def adjust(fit: RegressionFit, Xa, a_raw, b_raw,
           mode: str = "mean", seed: int = 0) -> BetaParams:
    """Produce adjusted Beta parameters from a regression fit.

    ``mean`` exponentiates the fitted conditional means; ``sample`` draws
    once per row from the fitted bivariate normal (deterministic given
    ``seed``) before exponentiating. Outputs are clipped to
    [CLIP_LO, CLIP_HI].
    """
    Xa = np.asarray(Xa, dtype=np.float64)
    if Xa.ndim == 1:
        Xa = Xa[:, None]
    a_raw = np.asarray(a_raw, dtype=np.float64).ravel()
    b_raw = np.asarray(b_raw, dtype=np.float64).ravel()
    n = a_raw.shape[0]
    if Xa.shape != (n, fit.q):
        raise ShapeError(f"Xa must be (n, {fit.q}), got {Xa.shape}")
    if mode not in ("mean", "sample"):
        raise DomainError(f"unknown adjustment mode {mode!r}")

    mean = np.column_stack((fit.mu_a + Xa @ fit.delta_a,
                            fit.mu_b + Xa @ fit.delta_b))
    if mode == "sample":
        rng = np.random.default_rng(seed)
        mean = mean + rng.standard_normal((n, 2)) @ _psd_factor(fit.sigma).T
    ab = np.clip(np.exp(mean), CLIP_LO, CLIP_HI)
    return BetaParams(a=ab[:, 0], b=ab[:, 1], a_raw=a_raw, b_raw=b_raw)
