"""Closed-form zero modes, threshold lifts, and the large-r asymptotic limit.

The reference mode is phi(x) = <x>^-3 (I + i sigma.x) phi0 with |phi(x)| =
<x>^-2 exactly. Paired with the matching potential it satisfies
sigma.(D - A) phi = 0 pointwise, which this module checks with the
hand-differentiated gradient (machine precision, no grid involved).

A zero mode lifts to a pair of threshold eigenfunctions of the 4x4 operator:
(phi, 0) at +m and (0, phi) at -m, the field independent of the mass. Its
large-r limit u(omega) = lim r^2 phi(r omega) is recovered two ways: in
closed form, u(omega) = i (sigma.omega) phi0, and by the limit integral

    u(omega) = (i/4pi) integral { (omega.A(y)) I + i sigma.(omega x A(y)) } phi(y) dy,

evaluated by product quadrature over a truncated ball with a power-law
radial-tail correction. The integral only needs the three moment vectors
integral A_m phi dy, so one quadrature pass serves every direction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional

import numpy as np
from numpy.typing import NDArray

from diraclab.potentials import (
    ClassificationUndetermined,
    DecayClassReport,
    PotentialSpec,
    default_classification,
)
from diraclab.quadrature import radial_panels, sphere_product_rule

ArrayC = NDArray[np.complex128]
ArrayR = NDArray[np.float64]

__all__ = [
    "ZeroModeSpec",
    "LossYauMode",
    "RegisteredMode",
    "ThresholdMode",
    "AsymptoticReport",
    "QuadratureParams",
    "HypothesisViolation",
    "AccuracyError",
    "ModeRegistryError",
    "register_zero_mode",
    "eval_zero_mode",
    "sigma_d_analytic",
    "t_residual_analytic",
    "lift_to_threshold",
    "asymptotic_limit_quadrature",
    "asymptotic_convergence",
    "mode_l2_norm",
    "write_convergence_csv",
]


class ModeRegistryError(KeyError):
    """Requested a zero-mode variant that has not been registered."""


class HypothesisViolation(RuntimeError):
    """The potential fails the decay hypothesis the asymptotic limit needs."""


class AccuracyError(RuntimeError):
    """The quadrature error estimate exceeds the requested tolerance."""


def _sigma_vec_apply(v, phi: ArrayC) -> ArrayC:
    """(sigma . v) phi for vector components v (..., 3), spinors phi (..., 2)."""
    v0, v1, v2 = v[..., 0], v[..., 1], v[..., 2]
    a, b = phi[..., 0], phi[..., 1]
    return np.stack([v2 * a + (v0 - 1j * v1) * b, (v0 + 1j * v1) * a - v2 * b], axis=-1)


class ZeroModeSpec:
    """Base class for zero-mode descriptions; evaluators map (..., 3) -> (..., 2)."""

    def eval(self, points) -> ArrayC:
        raise NotImplementedError

    def gradient(self, points) -> Optional[ArrayC]:
        """Analytic spatial gradient, shape (..., 3, 2), or None when unknown."""
        return None

    def closed_form_limit(self, omegas) -> Optional[ArrayC]:
        """u(omega) = lim r^2 phi(r omega) in closed form, or None when unknown."""
        return None


@dataclass(frozen=True)
class LossYauMode(ZeroModeSpec):
    """phi(x) = <x>^-3 (I + i sigma.x) phi0 for a unit reference spinor phi0."""

    phi0: tuple = ((1.0, 0.0), (0.0, 0.0))  # ((re, im), (re, im))

    def __post_init__(self) -> None:
        if abs(np.linalg.norm(self.phi0_spinor()) - 1.0) > 1e-12:
            raise ValueError("phi0 must have unit norm")

    def phi0_spinor(self) -> ArrayC:
        (a_re, a_im), (b_re, b_im) = self.phi0
        return np.array([a_re + 1j * a_im, b_re + 1j * b_im])

    def eval(self, points) -> ArrayC:
        pts = np.asarray(points, dtype=np.float64)
        phi0 = self.phi0_spinor()
        jb2 = 1.0 + np.sum(pts**2, axis=-1)
        core = phi0 + 1j * _sigma_vec_apply(pts, np.broadcast_to(phi0, pts.shape[:-1] + (2,)))
        return jb2[..., None] ** -1.5 * core

    def gradient(self, points) -> ArrayC:
        # d_j phi = -3 x_j <x>^-5 (I + i sigma.x) phi0 + i <x>^-3 sigma_j phi0
        pts = np.asarray(points, dtype=np.float64)
        phi0 = self.phi0_spinor()
        a, b = phi0
        jb2 = 1.0 + np.sum(pts**2, axis=-1)
        core = phi0 + 1j * _sigma_vec_apply(pts, np.broadcast_to(phi0, pts.shape[:-1] + (2,)))
        sig_phi0 = np.array([[b, a], [-1j * b, 1j * a], [a, -b]])  # sigma_j phi0 rows
        grad = (
            -3.0 * pts[..., :, None] * jb2[..., None, None] ** -2.5 * core[..., None, :]
            + 1j * jb2[..., None, None] ** -1.5 * sig_phi0
        )
        return grad

    def closed_form_limit(self, omegas) -> ArrayC:
        om = np.asarray(omegas, dtype=np.float64)
        phi0 = self.phi0_spinor()
        return 1j * _sigma_vec_apply(om, np.broadcast_to(phi0, om.shape[:-1] + (2,)))


# Registered evaluators: mode_id -> (evaluator, gradient or None).
_MODE_REGISTRY: dict[str, tuple[Callable, Optional[Callable]]] = {}


def register_zero_mode(mode_id: str, evaluator: Callable, gradient: Optional[Callable] = None) -> None:
    """Register a custom zero-mode evaluator (points (..., 3) -> spinors (..., 2))."""
    _MODE_REGISTRY[str(mode_id)] = (evaluator, gradient)


@dataclass(frozen=True)
class RegisteredMode(ZeroModeSpec):
    """Zero mode looked up from the registry by id."""

    mode_id: str

    def _entry(self) -> tuple[Callable, Optional[Callable]]:
        try:
            return _MODE_REGISTRY[self.mode_id]
        except KeyError:
            raise ModeRegistryError(f"no zero mode registered under id {self.mode_id!r}") from None

    def eval(self, points) -> ArrayC:
        evaluator, _ = self._entry()
        return np.asarray(evaluator(np.asarray(points, dtype=np.float64)), dtype=np.complex128)

    def gradient(self, points) -> Optional[ArrayC]:
        _, grad = self._entry()
        if grad is None:
            return None
        return np.asarray(grad(np.asarray(points, dtype=np.float64)), dtype=np.complex128)


def eval_zero_mode(spec: ZeroModeSpec, x) -> ArrayC:
    """phi(x) for a single point or batch (..., 3)."""
    values = spec.eval(x)
    if not np.all(np.isfinite(values)):
        raise ValueError("zero-mode evaluator produced non-finite values")
    return values


def sigma_d_analytic(spec: ZeroModeSpec, points) -> ArrayC:
    """sigma.D phi with D = (1/i) grad, from the analytic gradient."""
    grad = spec.gradient(points)
    if grad is None:
        raise ModeRegistryError(f"{type(spec).__name__} carries no analytic gradient")
    g1, g2, g3 = grad[..., 0, :], grad[..., 1, :], grad[..., 2, :]
    sig_grad = np.stack(
        [g1[..., 1] - 1j * g2[..., 1] + g3[..., 0], g1[..., 0] + 1j * g2[..., 0] - g3[..., 1]],
        axis=-1,
    )
    return -1j * sig_grad


def t_residual_analytic(spec: ZeroModeSpec, pot: PotentialSpec, points) -> ArrayR:
    """Pointwise |sigma.(D - A) phi| from analytic derivatives; grid-free oracle."""
    pts = np.asarray(points, dtype=np.float64)
    res = sigma_d_analytic(spec, pts) - _sigma_vec_apply(pot.eval(pts), spec.eval(pts))
    return np.linalg.norm(res, axis=-1)


@dataclass(frozen=True)
class ThresholdMode:
    """Threshold eigenfunction f of the 4x4 operator at sign * mass.

    sign=+1 puts the zero mode in the upper block (f = (phi, 0)), sign=-1 in
    the lower ((0, phi)); the field itself never depends on the mass.
    """

    source: ZeroModeSpec
    sign: int
    mass: float

    def eval(self, points) -> ArrayC:
        pts = np.asarray(points, dtype=np.float64)
        phi = self.source.eval(pts)
        out = np.zeros(pts.shape[:-1] + (4,), dtype=np.complex128)
        if self.sign > 0:
            out[..., 0:2] = phi
        else:
            out[..., 2:4] = phi
        return out

    def eigenvalue(self) -> float:
        return self.sign * self.mass


def lift_to_threshold(spec: ZeroModeSpec, sign: int, mass: float) -> ThresholdMode:
    """Lift a zero mode of sigma.(D - A) to the eigenvalue sign * mass."""
    if sign not in (+1, -1):
        raise ValueError("sign must be +1 or -1")
    if not (np.isfinite(mass) and mass > 0):
        raise ValueError("mass must be positive")
    return ThresholdMode(source=spec, sign=int(sign), mass=float(mass))


# ----------------------------------------------------------------------------
# Asymptotic limit by quadrature


@dataclass(frozen=True)
class QuadratureParams:
    """Product rule: geometric Gauss-Legendre panels in r x sphere rule in omega.

    The ball is truncated at r_max and the radial tail is added back from a
    power-law fit of the shell integrand over the outer panels; tol bounds the
    accepted error estimate.
    """

    r_min: float = 1e-3
    r_max: float = 2000.0
    panels: int = 36
    nodes_per_panel: int = 8
    n_theta: int = 12
    n_phi: int = 24
    tol: float = 1e-3

    def __post_init__(self) -> None:
        if not (0 < self.r_min < self.r_max):
            raise ValueError("need 0 < r_min < r_max")
        if self.panels < 8 or self.nodes_per_panel < 2:
            raise ValueError("need >= 8 panels and >= 2 nodes per panel")


# sig_eps[j, m] = sum_l eps_{l j m} sigma_l, the 2x2 blocks behind sigma.(omega x A)
def _sig_eps_tensor() -> ArrayC:
    sig = np.array(
        [[[0, 1], [1, 0]], [[0, -1j], [1j, 0]], [[1, 0], [0, -1]]], dtype=np.complex128
    )
    eps = np.zeros((3, 3, 3))
    for (l, j, m), s in {(0, 1, 2): 1, (1, 2, 0): 1, (2, 0, 1): 1,
                         (0, 2, 1): -1, (2, 1, 0): -1, (1, 0, 2): -1}.items():
        eps[l, j, m] = s
    return np.einsum("ljm,lab->jmab", eps, sig)


_SIG_EPS = _sig_eps_tensor()


def _fit_power(r: ArrayR, amp: ArrayR) -> float:
    lx, ly = np.log(r), np.log(np.maximum(amp, 1e-300))
    vx = lx - lx.mean()
    return -float(np.dot(vx, ly - ly.mean()) / np.dot(vx, vx))


def _shell_sums(
    spec: ZeroModeSpec, pot: Optional[PotentialSpec], quad: QuadratureParams
) -> tuple[ArrayR, ArrayR, ArrayC]:
    """Radial nodes, weights, and shell integrands S(r) = r^2 * sphere-avg.

    With a potential the shells are the moment integrands (shape (nr, 3, 2));
    without one they are the scalar |phi|^2 shells (shape (nr,)).
    """
    r, w = radial_panels(quad.r_min, quad.r_max, quad.panels, quad.nodes_per_panel)
    dirs, dw = sphere_product_rule(quad.n_theta, quad.n_phi)
    pts = r[:, None, None] * dirs[None, :, :]
    phi = spec.eval(pts)  # (nr, ns, 2)
    if pot is None:
        dens = np.sum(np.abs(phi) ** 2, axis=-1)
        shells = r**2 * (dens @ dw)
    else:
        A = pot.eval(pts)  # (nr, ns, 3)
        moments = np.einsum("rsm,rsa,s->rma", A.astype(np.complex128), phi, dw)
        shells = r[:, None, None] ** 2 * moments
    return r, w, shells


def _integrate_with_tail(r: ArrayR, w: ArrayR, shells, quad: QuadratureParams):
    """Integral of the shells over (r_min, inf): core sum + power-law tail.

    Returns (value, error_estimate). The power p is fit over the outermost
    three panels and the tail S(edge) edge / (p-1) is attached at the panel
    edge so it never overlaps the core sum; the error estimate re-runs the
    construction truncated at 7/8 of the panels and takes the difference.
    """
    amp = np.abs(shells) if shells.ndim == 1 else np.linalg.norm(shells, axis=(1, 2))
    edges = np.geomspace(quad.r_min, quad.r_max, quad.panels + 1)
    npp = quad.nodes_per_panel

    def truncated_value(panel_count: int):
        idx = panel_count * npp
        sub = slice(max(0, idx - 3 * npp), idx)
        p = _fit_power(r[sub], amp[sub])
        if not np.isfinite(p) or p <= 1.05:
            raise AccuracyError(
                f"radial shell integrand decays like r^-{p:.2f}; tail does not converge"
            )
        edge = edges[panel_count]
        tail = shells[idx - 1] * (edge / r[idx - 1]) ** -p * (edge / (p - 1.0))
        return np.tensordot(w[:idx], shells[:idx], axes=(0, 0)) + tail

    full = truncated_value(quad.panels)
    alt = truncated_value((7 * quad.panels) // 8)
    err = float(np.max(np.abs(full - alt)))
    return full, err


# Decay classifications by potential identity; the spec object is retained so
# the id cannot be recycled while cached.
_CLASS_CACHE: dict[int, tuple[PotentialSpec, DecayClassReport]] = {}


def _check_su(pot: PotentialSpec) -> None:
    key = id(pot)
    hit = _CLASS_CACHE.get(key)
    if hit is None or hit[0] is not pot:
        _CLASS_CACHE[key] = (pot, default_classification(pot))
    report = _CLASS_CACHE[key][1]
    if not report.in_SU:
        raise HypothesisViolation(
            f"potential decays like <x>^-{report.rho_fit:.2f}; the asymptotic limit "
            "needs a power bound with exponent > 1"
        )


def _moment_integrals(
    spec: ZeroModeSpec, pot: PotentialSpec, quad: QuadratureParams
) -> tuple[ArrayC, float]:
    """I[m] = integral A_m(y) phi(y) dy as a (3, 2) block, with error estimate."""
    r, w, shells = _shell_sums(spec, pot, quad)
    if np.max(np.linalg.norm(shells, axis=(1, 2))) < 1e-300:
        return np.zeros((3, 2), dtype=np.complex128), 0.0
    _check_su(pot)
    moments, err = _integrate_with_tail(r, w, shells, quad)
    if err > quad.tol * 4.0 * np.pi:
        raise AccuracyError(
            f"moment-integral error estimate {err:.2e} exceeds tolerance; "
            "raise r_max or the panel count"
        )
    return moments, err


def _u_from_moments(moments: ArrayC, omegas: ArrayR) -> ArrayC:
    # u = (i/4pi) [ sum_j w_j I_j + i sum_{j,m} w_j sig_eps[j,m] I_m ]
    term1 = np.einsum("oj,ja->oa", omegas, moments)
    term2 = np.einsum("oj,jmab,mb->oa", omegas.astype(np.complex128), _SIG_EPS, moments)
    return (1j / (4.0 * np.pi)) * (term1 + 1j * term2)


def asymptotic_limit_quadrature(
    spec: ZeroModeSpec,
    pot: PotentialSpec,
    omega,
    quad: Optional[QuadratureParams] = None,
) -> tuple[ArrayC, float]:
    """u(omega) from the limit integral, with an error estimate.

    Returns (u, err) where err bounds the estimated quadrature error on u.
    Raises HypothesisViolation when the potential lacks the required decay and
    AccuracyError when the radial tail refuses to converge within tolerance.
    A numerically zero potential short-circuits to ((0, 0), 0).
    """
    quad = quad or QuadratureParams()
    om = np.asarray(omega, dtype=np.float64)
    single = om.ndim == 1
    om = np.atleast_2d(om)
    if om.shape[-1] != 3 or np.any(np.abs(np.linalg.norm(om, axis=-1) - 1.0) > 1e-9):
        raise ValueError("omega must be a unit 3-vector")
    moments, err_m = _moment_integrals(spec, pot, quad)
    u = _u_from_moments(moments, om)
    err = err_m / (2.0 * np.pi)  # |omega| = 1 and the sig_eps blocks have unit norm
    return (u[0], err) if single else (u, err)


@dataclass(frozen=True)
class AsymptoticReport:
    """Asymptotic-limit comparison: quadrature u, optional closed form, decay table.

    convergence_table rows are (r, sup_omega |r^2 f(r omega) - u(omega)|) with
    u taken in the 4-component block layout of the threshold mode.
    sup_deviation is sup_omega |u_quadrature - u_closed| when a closed form
    exists, otherwise the quadrature error estimate.
    """

    omega_samples: ArrayR
    u_quadrature: ArrayC
    u_closed: Optional[ArrayC]
    sup_deviation: float
    convergence_table: tuple
    quad_error: float

    def to_dict(self) -> dict:
        def c2(u):
            return [[[v.real, v.imag] for v in row] for row in np.atleast_2d(u)]

        return {
            "omega_samples": self.omega_samples.tolist(),
            "u_quadrature": c2(self.u_quadrature),
            "u_closed": None if self.u_closed is None else c2(self.u_closed),
            "sup_deviation": self.sup_deviation,
            "convergence_table": [[float(r), float(d)] for r, d in self.convergence_table],
            "quad_error": self.quad_error,
        }


def asymptotic_convergence(
    mode: ThresholdMode,
    pot: PotentialSpec,
    radii,
    omegas,
    quad: Optional[QuadratureParams] = None,
) -> AsymptoticReport:
    """Tabulate sup_omega |r^2 f(r omega) - u(omega)| over increasing radii.

    u is the closed form when the source mode carries one, else the quadrature
    value; the quadrature is always run for the report. The comparison embeds
    u in the upper or lower block according to the mode's sign.
    """
    radii = np.asarray(radii, dtype=np.float64)
    om = np.asarray(omegas, dtype=np.float64)
    if radii.ndim != 1 or len(radii) < 1 or np.any(np.diff(radii) <= 0):
        raise ValueError("radii must be strictly increasing")
    if om.ndim != 2 or om.shape[1] != 3 or np.any(np.abs(np.linalg.norm(om, axis=1) - 1) > 1e-9):
        raise ValueError("omegas must be unit 3-vectors")

    u_quad, err = asymptotic_limit_quadrature(mode.source, pot, om, quad)
    u_closed = mode.source.closed_form_limit(om)
    u_ref = u_closed if u_closed is not None else u_quad

    u4 = np.zeros(om.shape[:-1] + (4,), dtype=np.complex128)
    if mode.sign > 0:
        u4[..., 0:2] = u_ref
    else:
        u4[..., 2:4] = u_ref

    pts = radii[:, None, None] * om[None, :, :]
    f = mode.eval(pts)  # (nr, no, 4)
    dev = np.linalg.norm(radii[:, None, None] ** 2 * f - u4[None, :, :], axis=-1)
    table = tuple((float(r), float(d)) for r, d in zip(radii, dev.max(axis=1)))

    if u_closed is not None:
        sup_dev = float(np.max(np.linalg.norm(u_quad - u_closed, axis=-1)))
    else:
        sup_dev = err
    return AsymptoticReport(
        omega_samples=om,
        u_quadrature=u_quad,
        u_closed=u_closed,
        sup_deviation=sup_dev,
        convergence_table=table,
        quad_error=err,
    )


def write_convergence_csv(report: AsymptoticReport, path) -> None:
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["r", "sup_deviation"])
        for r, d in report.convergence_table:
            writer.writerow([f"{r:.17g}", f"{d:.17g}"])


def mode_l2_norm(spec: ZeroModeSpec, quad: Optional[QuadratureParams] = None) -> float:
    """L2 norm of the mode over R^3 by radial quadrature with tail correction."""
    quad = quad or QuadratureParams()
    r, w, shells = _shell_sums(spec, None, quad)
    if np.max(shells) < 1e-300:
        return 0.0
    total, err = _integrate_with_tail(r, w, shells, quad)
    norm2 = float(np.real(total))
    if norm2 < 0 or err > quad.tol * max(norm2, 1.0):
        raise AccuracyError(f"norm quadrature failed to converge (estimate {err:.2e})")
    return float(np.sqrt(norm2))
