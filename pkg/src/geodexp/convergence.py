"""Convergence-order estimation by log-log slope fitting.

Truncation-order checks sweep a scale parameter over dyadic values and fit
log(error) against log(scale) by least squares.  Scales whose error sits at
the oracle noise floor are discarded before fitting; a fit needs at least
three surviving points.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InsufficientSignalError

__all__ = ["SlopeFit", "fit_loglog_slope"]


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    scales: tuple
    errors: tuple
    used: tuple          # mask of scales that survived the floor filter
    exact: bool          # every error sat below the noise floor

    def __str__(self):
        if self.exact:
            return "exact"
        return f"slope={self.slope:.3f}"


def fit_loglog_slope(scales, errors, floor=0.0):
    """Least-squares slope of log(error) vs log(scale).

    Parameters
    ----------
    scales, errors : sequences of positive floats
    floor : float
        Noise floor; points with error <= floor are discarded.  If all points
        sit at the floor the fit is reported as exact (slope = nan).

    Raises
    ------
    InsufficientSignalError
        If fewer than three points survive the filter (and not all are
        at the floor).
    """
    scales = np.asarray(scales, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if scales.shape != errors.shape or scales.ndim != 1:
        raise ValueError("scales and errors must be 1-D sequences of equal length")
    used = errors > floor
    if not used.any():
        return SlopeFit(float("nan"), float("nan"), tuple(scales), tuple(errors),
                        tuple(used), exact=True)
    if used.sum() < 3:
        raise InsufficientSignalError(
            f"only {int(used.sum())} of {scales.size} scales above the noise floor "
            f"{floor:g}; need >= 3")
    ls = np.log(scales[used])
    le = np.log(errors[used])
    slope, intercept = np.polyfit(ls, le, 1)
    return SlopeFit(float(slope), float(intercept), tuple(scales), tuple(errors),
                    tuple(used), exact=False)
