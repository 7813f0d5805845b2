"""Angular geometry, the poly-cylindrical dataset container, and track ingestion.

Angles are plain floats (or float arrays) kept in ``[0, 2*pi)`` by convention;
``wrap_angle`` is the canonical normalizer and every constructor in this module
applies it.  All functions here are pure and safe for concurrent use.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateStepWarning, DomainError, InsufficientDataError

TWO_PI = 2.0 * np.pi

__all__ = [
    "TWO_PI",
    "wrap_angle",
    "atan_star",
    "polar_embed",
    "angular_distance",
    "circular_mean",
    "derive_track_features",
    "TrackFeatures",
    "PolyCylObservation",
    "PolyCylDataset",
]


def wrap_angle(x):
    """Reduce an angle (radians) to ``[0, 2*pi)``; scalar in, scalar out."""
    out = np.mod(x, TWO_PI)
    # mod can round up to exactly 2*pi for tiny negative inputs
    out = np.where(out >= TWO_PI, 0.0, out)
    return float(out) if np.isscalar(x) or np.ndim(x) == 0 else out


def atan_star(s, c):
    """Quadrant-corrected arctangent of ``s / c`` with values in ``[0, 2*pi)``.

    ``c`` plays the role of the cosine (first) coordinate and ``s`` of the
    sine (second) coordinate.  The five-case definition is applied literally:

    * ``c > 0, s >= 0``: ``atan(s/c)``
    * ``c = 0, s > 0``:  ``pi/2``
    * ``c < 0``:         ``atan(s/c) + pi``
    * ``c >= 0, s < 0``: ``atan(s/c) + 2*pi``
    * ``c = 0, s = 0``:  undefined -> :class:`DomainError`

    Accepts scalars or broadcastable arrays.
    """
    # adding 0.0 turns negative zeros positive so the case split sees C = 0
    s_arr = np.asarray(s, dtype=float) + 0.0
    c_arr = np.asarray(c, dtype=float) + 0.0
    if np.any((s_arr == 0.0) & (c_arr == 0.0)):
        raise DomainError("atan_star is undefined at (s, c) = (0, 0)")
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        base = np.arctan(s_arr / c_arr)
    out = np.select(
        [
            (c_arr > 0) & (s_arr >= 0),
            (c_arr == 0) & (s_arr > 0),
            c_arr < 0,
            (c_arr >= 0) & (s_arr < 0),
        ],
        [base, np.pi / 2.0, base + np.pi, base + TWO_PI],
    )
    # c=0, s<0 falls in the fourth case: atan(-inf) + 2*pi = 3*pi/2
    out = wrap_angle(out)
    if np.isscalar(s) and np.isscalar(c):
        return float(out)
    return out


def polar_embed(theta, r):
    """Map polar coordinates to the plane: ``(r*cos(theta), r*sin(theta))``.

    ``r`` must be strictly positive.  Scalars give a shape-(2,) vector;
    arrays of shape ``(...,)`` give ``(..., 2)``.
    """
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr <= 0):
        raise DomainError("polar_embed requires r > 0")
    t_arr = np.asarray(theta, dtype=float)
    return np.stack([r_arr * np.cos(t_arr), r_arr * np.sin(t_arr)], axis=-1)


def angular_distance(a, b):
    """Shortest arc length between two angles, in ``[0, pi]``."""
    d = np.abs(np.asarray(wrap_angle(a)) - np.asarray(wrap_angle(b)))
    out = np.pi - np.abs(np.pi - d)
    return float(out) if out.ndim == 0 else out


def circular_mean(angles):
    """Circular mean direction of a sample, in ``[0, 2*pi)``."""
    angles = np.asarray(angles, dtype=float)
    s = np.sin(angles).mean()
    c = np.cos(angles).mean()
    if s == 0.0 and c == 0.0:
        raise DomainError("circular mean undefined: resultant length is zero")
    return atan_star(s, c)


@dataclass(frozen=True)
class TrackFeatures:
    """Turning angles and log step lengths derived from a planar track.

    All arrays have length ``n - 2`` for ``n`` input positions; entry ``t``
    pairs the turn made at position ``t+1`` with the outgoing step from
    ``t+1`` to ``t+2``.  Entries touching a zero-length step are flagged
    missing instead of raising.
    """

    turning_angles: np.ndarray
    log_step_lengths: np.ndarray
    turning_missing: np.ndarray
    step_missing: np.ndarray


def derive_track_features(positions):
    """Compute turning angles and log step lengths from planar positions.

    Parameters
    ----------
    positions : array_like, shape (n, 2)
        Consecutive planar coordinates, n >= 3.

    Returns
    -------
    TrackFeatures
        Aligned arrays of length ``n - 2`` plus missingness flags.

    Raises
    ------
    InsufficientDataError
        If fewer than 3 positions are given.
    """
    pos = np.asarray(positions, dtype=float)
    if pos.ndim != 2 or pos.shape[1] != 2:
        raise DomainError("positions must have shape (n, 2)")
    n = pos.shape[0]
    if n < 3:
        raise InsufficientDataError("at least 3 positions are needed")

    disp = np.diff(pos, axis=0)                      # (n-1, 2)
    steps = np.hypot(disp[:, 0], disp[:, 1])         # (n-1,)
    zero = steps == 0.0
    if np.any(zero):
        warnings.warn(
            f"{int(zero.sum())} zero-length step(s); derived entries marked missing",
            DegenerateStepWarning,
            stacklevel=2,
        )

    headings = np.zeros(n - 1)
    ok = ~zero
    headings[ok] = atan_star(disp[ok, 1], disp[ok, 0])

    turning = wrap_angle(headings[1:] - headings[:-1])      # (n-2,)
    turning_missing = zero[:-1] | zero[1:]
    step_missing = zero[1:]
    turning = np.where(turning_missing, 0.0, turning)
    log_steps = np.zeros(n - 2)
    log_steps[~step_missing] = np.log(steps[1:][~step_missing])
    return TrackFeatures(turning, log_steps, turning_missing, step_missing)


@dataclass(frozen=True)
class PolyCylObservation:
    """One poly-cylindrical observation: p angles, q reals, and missing flags."""

    angles: np.ndarray
    linears: np.ndarray
    angles_missing: np.ndarray
    linears_missing: np.ndarray


@dataclass
class PolyCylDataset:
    """T observations of p circular and q linear variables, stored columnwise.

    ``theta`` has shape (T, p) with values in ``[0, 2*pi)``; ``y`` has shape
    (T, q).  The boolean masks mark entries whose stored value must be
    ignored by all likelihood code.
    """

    p: int
    q: int
    theta: np.ndarray
    y: np.ndarray
    theta_missing: np.ndarray = None
    y_missing: np.ndarray = None
    labels: tuple = field(default=None)

    def __post_init__(self):
        if self.p < 0 or self.q < 0 or self.p + self.q < 1:
            raise DomainError("need p >= 0, q >= 0 and p + q >= 1")
        if self.p > 0:
            self.theta = np.atleast_2d(np.asarray(self.theta, dtype=float)).reshape(-1, self.p)
        if self.q > 0:
            self.y = np.atleast_2d(np.asarray(self.y, dtype=float)).reshape(-1, self.q)
        if self.p > 0 and self.q > 0 and self.theta.shape[0] != self.y.shape[0]:
            raise DomainError("theta and y must have the same number of rows")
        t_rows = self.theta.shape[0] if self.p > 0 else np.asarray(self.y).shape[0]
        if self.p == 0:
            self.theta = np.zeros((t_rows, 0))
        if self.q == 0:
            self.y = np.zeros((t_rows, 0))
        self.theta = np.asarray(wrap_angle(self.theta)).reshape(t_rows, self.p)
        if self.theta_missing is None:
            self.theta_missing = np.zeros_like(self.theta, dtype=bool)
        if self.y_missing is None:
            self.y_missing = np.zeros_like(self.y, dtype=bool)
        self.theta_missing = np.asarray(self.theta_missing, dtype=bool).reshape(t_rows, self.p)
        self.y_missing = np.asarray(self.y_missing, dtype=bool).reshape(t_rows, self.q)
        if self.labels is not None:
            self.labels = tuple(self.labels)
            if len(self.labels) != self.p + self.q:
                raise DomainError("labels must name all p + q dimensions")

    @property
    def n_obs(self):
        return self.theta.shape[0] if self.p > 0 else self.y.shape[0]

    def observation(self, t):
        """Row ``t`` as a :class:`PolyCylObservation`."""
        return PolyCylObservation(
            self.theta[t].copy(),
            self.y[t].copy(),
            self.theta_missing[t].copy(),
            self.y_missing[t].copy(),
        )

    @classmethod
    def from_observations(cls, p, q, observations, labels=None):
        theta = np.array([o.angles for o in observations], dtype=float).reshape(-1, p)
        y = np.array([o.linears for o in observations], dtype=float).reshape(-1, q)
        tm = np.array([o.angles_missing for o in observations], dtype=bool).reshape(-1, p)
        ym = np.array([o.linears_missing for o in observations], dtype=bool).reshape(-1, q)
        return cls(p, q, theta, y, tm, ym, labels)

    def copy(self):
        return PolyCylDataset(
            self.p,
            self.q,
            self.theta.copy(),
            self.y.copy(),
            self.theta_missing.copy(),
            self.y_missing.copy(),
            self.labels,
        )
