"""Exact Pauli / Dirac matrix algebra and spinor arithmetic.

All matrices are dense complex128 ndarrays whose entries are 0, +-1 or +-i,
hence exactly representable; composed products are checked elsewhere against
tolerance 1e-12. The module-level constants are frozen (writeable=False) and
the factory functions hand out fresh copies, so nothing here can be mutated
by accident.

Index convention: Pauli and alpha matrices are addressed 1..3, matching the
usual sigma_1, sigma_2, sigma_3 labeling.
"""

from __future__ import annotations

import numpy as np
from numpy.typing import NDArray

ArrayC = NDArray[np.complex128]
ArrayR = NDArray[np.float64]

__all__ = [
    "pauli",
    "sigma_dot",
    "dirac_alpha",
    "dirac_beta",
    "spinor2",
    "spinor4",
    "norm2",
    "herm_inner",
]


def _frozen(a: list) -> ArrayC:
    m = np.array(a, dtype=np.complex128)
    m.flags.writeable = False
    return m


_SIGMA = (
    _frozen([[0, 1], [1, 0]]),
    _frozen([[0, -1j], [1j, 0]]),
    _frozen([[1, 0], [0, -1]]),
)

_I2 = _frozen([[1, 0], [0, 1]])
_ZERO2 = _frozen([[0, 0], [0, 0]])

# alpha_j = [[0, sigma_j], [sigma_j, 0]], beta = diag(I2, -I2)
_ALPHA = tuple(
    _frozen(np.block([[np.zeros((2, 2)), s], [s, np.zeros((2, 2))]]).tolist())
    for s in _SIGMA
)
_BETA = _frozen(np.block([[np.eye(2), np.zeros((2, 2))], [np.zeros((2, 2)), -np.eye(2)]]).tolist())


def pauli(j: int) -> ArrayC:
    """Pauli matrix sigma_j, j in {1, 2, 3}.

    Returns a fresh writeable copy; the values are Hermitian, unitary and
    traceless with entries in {0, +-1, +-i}.
    """
    if j not in (1, 2, 3):
        raise IndexError(f"Pauli index must be 1, 2 or 3, got {j}")
    return _SIGMA[j - 1].copy()


def sigma_dot(v) -> ArrayC:
    """Contraction sigma.v = sum_j v_j sigma_j for a real 3-vector v.

    Hermitian for real v, and (sigma.v)^2 = |v|^2 I2 by the anti-commutation
    relations.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (3,):
        raise ValueError(f"expected a 3-vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError("sigma_dot requires finite components")
    return np.array(
        [[v[2], v[0] - 1j * v[1]], [v[0] + 1j * v[1], -v[2]]],
        dtype=np.complex128,
    )


def dirac_alpha(j: int) -> ArrayC:
    """Dirac matrix alpha_j = [[0, sigma_j], [sigma_j, 0]], j in {1, 2, 3}."""
    if j not in (1, 2, 3):
        raise IndexError(f"alpha index must be 1, 2 or 3, got {j}")
    return _ALPHA[j - 1].copy()


def dirac_beta() -> ArrayC:
    """Dirac matrix beta = diag(I2, -I2)."""
    return _BETA.copy()


def spinor2(c0: complex, c1: complex) -> ArrayC:
    """Two-component spinor value as a length-2 complex array."""
    s = np.array([c0, c1], dtype=np.complex128)
    if not np.all(np.isfinite(s.view(np.float64))):
        raise ValueError("spinor components must be finite")
    return s


def spinor4(upper: ArrayC, lower: ArrayC) -> ArrayC:
    """Four-component spinor from upper and lower 2-spinor blocks."""
    upper = np.asarray(upper, dtype=np.complex128).reshape(2)
    lower = np.asarray(lower, dtype=np.complex128).reshape(2)
    return np.concatenate([upper, lower])


def norm2(s: ArrayC) -> float:
    """Squared Euclidean norm |s|^2 of a spinor value."""
    s = np.asarray(s)
    return float(np.sum(np.abs(s) ** 2))


def herm_inner(a: ArrayC, b: ArrayC) -> complex:
    """Hermitian inner product <a, b>, antilinear in the first slot."""
    return complex(np.vdot(a, b))
