"""Core data model: datasets, link functions, and fitted working models.

Everything here is immutable after construction and all operations are pure,
so values can be shared freely across processes and threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from .errors import (
    LengthMismatchError,
    NonBinaryExposureError,
    NonBinaryOutcomeError,
    NonFiniteError,
)

# Fitted probabilities are clipped away from {0, 1} before they feed weights
# w = p(1-p), deviances, or IRLS working responses.  The threshold sits far
# below any statistically meaningful probability.
MEAN_CLIP = 1e-10


class LinkFunction(Enum):
    """Mean link of a working model: identity for unconstrained means,
    logit for means in (0, 1)."""

    IDENTITY = "identity"
    LOGIT = "logit"


def expit(t):
    """Numerically stable inverse logit, 1 / (1 + exp(-t)).

    Accepts scalars or arrays.  The computation branches on the sign of
    ``t`` so the exponential never overflows for |t| <= 700.
    """
    t = np.asarray(t, dtype=float)
    z = np.exp(-np.abs(t))
    out = np.where(t >= 0, 1.0 / (1.0 + z), z / (1.0 + z))
    if out.ndim == 0:
        return float(out)
    return out


@dataclass(frozen=True, eq=False)
class WorkingModel:
    """A fitted parametric mean model: link, unpenalized intercept, and a
    dense coefficient vector over the covariate columns.

    ``dropped`` records covariate indices removed during an unpenalized
    refit because they were collinear with earlier columns (lowest index
    kept); their coefficients are exactly zero.
    """

    link: LinkFunction
    intercept: float
    coef: np.ndarray
    dropped: tuple[int, ...] = ()

    def __post_init__(self):
        coef = np.asarray(self.coef, dtype=float)
        object.__setattr__(self, "coef", coef)
        object.__setattr__(self, "intercept", float(self.intercept))

    @property
    def support(self) -> np.ndarray:
        """Indices (0-based) of exactly nonzero coefficients."""
        return np.flatnonzero(self.coef)


def predict_mean(model: WorkingModel, L: np.ndarray) -> np.ndarray:
    """Row-wise fitted means: intercept + coef . L_i through the inverse link.

    Logit means are clipped to [MEAN_CLIP, 1 - MEAN_CLIP] so downstream
    weight and deviance computations never see 0 or 1.
    """
    L = np.asarray(L, dtype=float)
    if L.ndim != 2:
        raise LengthMismatchError(f"covariate matrix must be 2-d, got ndim={L.ndim}")
    if L.shape[1] != model.coef.shape[0]:
        raise LengthMismatchError(
            f"model has {model.coef.shape[0]} coefficients but matrix has "
            f"{L.shape[1]} columns"
        )
    eta = model.intercept + L @ model.coef
    if model.link is LinkFunction.IDENTITY:
        return eta
    p = expit(eta)
    return np.clip(p, MEAN_CLIP, 1.0 - MEAN_CLIP)


@dataclass(frozen=True, eq=False)
class Dataset:
    """An i.i.d. sample: outcome ``y``, exposure ``a``, covariate matrix ``L``.

    Construction only coerces dtypes; use :func:`validate_dataset` to check
    the invariants demanded by a given pair of working-model links.
    """

    y: np.ndarray
    a: np.ndarray
    L: np.ndarray
    column_names: tuple[str, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "y", np.ascontiguousarray(self.y, dtype=float))
        object.__setattr__(self, "a", np.ascontiguousarray(self.a, dtype=float))
        object.__setattr__(self, "L", np.ascontiguousarray(self.L, dtype=float))
        if self.column_names is not None:
            object.__setattr__(self, "column_names", tuple(self.column_names))

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def p(self) -> int:
        return self.L.shape[1]


def _first_nonfinite(x: np.ndarray) -> tuple[int, ...] | None:
    bad = ~np.isfinite(x)
    if not bad.any():
        return None
    return tuple(int(i) for i in np.argwhere(bad)[0])


def _is_binary(x: np.ndarray) -> np.ndarray:
    return (x == 0.0) | (x == 1.0)


def validate_dataset(
    d: Dataset,
    exposure_link: LinkFunction = LinkFunction.LOGIT,
    outcome_link: LinkFunction = LinkFunction.IDENTITY,
) -> None:
    """Check all dataset invariants plus the binariness demanded by the
    requested links.  Raises on the first violation; row/column locations
    in messages are 1-based.

    Raises
    ------
    LengthMismatchError, NonFiniteError, NonBinaryExposureError,
    NonBinaryOutcomeError
    """
    if d.L.ndim != 2:
        raise LengthMismatchError("covariate matrix must be 2-dimensional")
    n = d.y.shape[0]
    if d.a.shape[0] != n or d.L.shape[0] != n:
        raise LengthMismatchError(
            f"length mismatch: y has {n} rows, a has {d.a.shape[0]}, "
            f"L has {d.L.shape[0]}"
        )
    if n < 2:
        raise LengthMismatchError(f"need at least 2 observations, got {n}")
    if d.L.shape[1] < 1:
        raise LengthMismatchError("need at least 1 covariate column")
    if d.column_names is not None and len(d.column_names) != d.L.shape[1]:
        raise LengthMismatchError(
            f"{len(d.column_names)} column names for {d.L.shape[1]} columns"
        )

    loc = _first_nonfinite(d.y)
    if loc is not None:
        raise NonFiniteError("outcome", row=loc[0] + 1)
    loc = _first_nonfinite(d.a)
    if loc is not None:
        raise NonFiniteError("exposure", row=loc[0] + 1)
    loc = _first_nonfinite(d.L)
    if loc is not None:
        raise NonFiniteError("covariates", row=loc[0] + 1, col=loc[1] + 1)

    if exposure_link is LinkFunction.LOGIT:
        ok = _is_binary(d.a)
        if not ok.all():
            raise NonBinaryExposureError(row=int(np.flatnonzero(~ok)[0]) + 1)
    if outcome_link is LinkFunction.LOGIT:
        ok = _is_binary(d.y)
        if not ok.all():
            raise NonBinaryOutcomeError(row=int(np.flatnonzero(~ok)[0]) + 1)
