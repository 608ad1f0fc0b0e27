"""Bivariate test surfaces for the simulation study, with analytic Hessians.

Targets 1-6 cover polynomial, logarithmic, trigonometric, square-root,
quadratic and exponential behaviour on S_2; target 0 is an affine debug
surface (zero Hessian) that any local linear fit must reproduce exactly.
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class TargetFunction:
    id: int
    name: str
    value: callable  # (..., 2) array -> (...) values
    hessian: callable  # (2,) point -> (2, 2) matrix


def _v0(s):
    s = np.asarray(s, dtype=np.float64)
    return 1.0 + 2.0 * s[..., 0] - s[..., 1]


def _h0(s):
    return np.zeros((2, 2))


def _v1(s):
    s = np.asarray(s, dtype=np.float64)
    return s[..., 0] * s[..., 1]


def _h1(s):
    return np.array([[0.0, 1.0], [1.0, 0.0]])


def _v2(s):
    s = np.asarray(s, dtype=np.float64)
    return np.log1p(s[..., 0] + s[..., 1])


def _h2(s):
    c = -1.0 / (1.0 + s[0] + s[1]) ** 2
    return np.array([[c, c], [c, c]])


def _v3(s):
    s = np.asarray(s, dtype=np.float64)
    return np.sin(s[..., 0]) + np.cos(s[..., 1])


def _h3(s):
    return np.array([[-np.sin(s[0]), 0.0], [0.0, -np.cos(s[1])]])


def _v4(s):
    s = np.asarray(s, dtype=np.float64)
    return np.sqrt(s[..., 0]) + np.sqrt(s[..., 1])


def _h4(s):
    return np.array([[-0.25 * s[0] ** -1.5, 0.0], [0.0, -0.25 * s[1] ** -1.5]])


def _v5(s):
    s = np.asarray(s, dtype=np.float64)
    return (s[..., 0] + 0.25) ** 2 + (s[..., 1] + 0.75) ** 2


def _h5(s):
    return np.array([[2.0, 0.0], [0.0, 2.0]])


def _v6(s):
    s = np.asarray(s, dtype=np.float64)
    return (1.0 + s[..., 0]) * np.exp(s[..., 1])


def _h6(s):
    e = np.exp(s[1])
    return np.array([[0.0, e], [e, (1.0 + s[0]) * e]])


TARGETS = {
    0: TargetFunction(0, "m0", _v0, _h0),
    1: TargetFunction(1, "m1", _v1, _h1),
    2: TargetFunction(2, "m2", _v2, _h2),
    3: TargetFunction(3, "m3", _v3, _h3),
    4: TargetFunction(4, "m4", _v4, _h4),
    5: TargetFunction(5, "m5", _v5, _h5),
    6: TargetFunction(6, "m6", _v6, _h6),
}


def get_target(tid):
    """Target by id; 1-6 are the study surfaces, 0 the affine debug surface."""
    try:
        return TARGETS[int(tid)]
    except (KeyError, ValueError, TypeError):
        raise ValueError(f"unknown target id {tid!r}; valid ids are 0-6") from None


def target_value(tid, s):
    return get_target(tid).value(s)


def target_hessian(tid, s):
    return get_target(tid).hessian(np.asarray(s, dtype=np.float64))
