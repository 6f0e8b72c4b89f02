"""Magnetic vector potentials with known zero modes, and decay classification.

The central object is the closed-form potential

    A(x) = 3 <x>^-4 { (1 - |x|^2) w0 + 2 (w0.x) x + 2 w0 x x }

(<x> = sqrt(1+|x|^2), w0 the unit Bloch vector of a fixed unit spinor phi0,
the last term a cross product). Its pointwise norm is exactly 3 <x>^-2, which
drives every oracle here. Variants wrap it: scaling by a coupling t, gauging
by a grid-built gauge function chi, the one-parameter family A = c <x>^-2 w(x)
built from a registered spinor ansatz (the ell = 0 member coincides with the
closed form above), and raw sampled data.

Decay classes certified by sampling:
- weighted power bound  |A(x)| <= C <x>^-rho with rho > 1,
- cubic integrability   integral |A|^3 < infinity,
- o(1/|x|) smallness.
Classification is evidence on samples, not proof; reports say which.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field as dc_field
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from numpy.typing import NDArray
from scipy.integrate import simpson

from diraclab.grid import Grid3D, interp_trilinear, spectral_scalar_gradient

ArrayC = NDArray[np.complex128]
ArrayR = NDArray[np.float64]

__all__ = [
    "PotentialSpec",
    "LossYau",
    "Scaled",
    "Gauged",
    "AMN",
    "Sampled",
    "ScalarFieldHandle",
    "DecayClassReport",
    "ClassificationUndetermined",
    "UnsupportedVariant",
    "w0_of",
    "eval_potential",
    "classify_decay",
    "kernel_dim_bound",
    "register_amn_ansatz",
    "registered_amn_levels",
    "potential_to_json",
    "potential_from_json",
    "write_sampled_potential",
    "read_sampled_potential",
]


class ClassificationUndetermined(RuntimeError):
    """The sample set carries no usable signal (e.g. identically zero A)."""


class UnsupportedVariant(ValueError):
    """Requested a potential variant with no registered construction."""


def w0_of(phi0) -> ArrayR:
    """Unit Bloch vector w0 = (phi0, sigma_j phi0)_j of a unit 2-spinor."""
    phi0 = np.asarray(phi0, dtype=np.complex128).reshape(2)
    nrm = np.linalg.norm(phi0)
    if abs(nrm - 1.0) > 1e-12:
        raise ValueError(f"phi0 must be a unit spinor, |phi0| = {nrm}")
    a, b = phi0
    w = np.array(
        [
            2.0 * (np.conj(a) * b).real,
            2.0 * (np.conj(a) * b).imag,
            (abs(a) ** 2 - abs(b) ** 2),
        ]
    )
    return w


@dataclass(frozen=True)
class ScalarFieldHandle:
    """A real scalar field (gauge function chi) sampled on a grid.

    The spectral gradient is computed once on first use and interpolated
    trilinearly for off-node evaluation.
    """

    grid: Grid3D
    values: ArrayR

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != (self.grid.n,) * 3:
            raise ValueError(f"scalar field has shape {v.shape}, grid wants {(self.grid.n,)*3}")
        if not np.all(np.isfinite(v)):
            raise ValueError("non-finite gauge function sample")
        object.__setattr__(self, "values", v)

    def gradient_values(self) -> ArrayR:
        grad = getattr(self, "_grad", None)
        if grad is None:
            grad = spectral_scalar_gradient(self.grid, self.values)
            object.__setattr__(self, "_grad", grad)
        return grad

    def grad_at(self, points: ArrayR) -> ArrayR:
        return interp_trilinear(self.grid, self.gradient_values(), points)

    def chi_at(self, points: ArrayR) -> ArrayR:
        return interp_trilinear(self.grid, self.values, points)


class PotentialSpec:
    """Base class for declarative vector-potential descriptions.

    Subclasses implement eval(points) -> real values of shape (..., 3) and are
    immutable after construction.
    """

    def eval(self, points) -> ArrayR:
        raise NotImplementedError

    def norm_at(self, points) -> ArrayR:
        """|A(x)| pointwise; shape (...)."""
        return np.linalg.norm(self.eval(points), axis=-1)


def _loss_yau_values(w0: ArrayR, points: ArrayR) -> ArrayR:
    pts = np.asarray(points, dtype=np.float64)
    r2 = np.sum(pts**2, axis=-1)
    wdx = np.tensordot(pts, w0, axes=([-1], [0]))
    bracket = (
        (1.0 - r2)[..., None] * w0
        + 2.0 * wdx[..., None] * pts
        + 2.0 * np.cross(np.broadcast_to(w0, pts.shape), pts)
    )
    return 3.0 * (1.0 + r2)[..., None] ** -2 * bracket


@dataclass(frozen=True)
class LossYau(PotentialSpec):
    """The closed-form potential with zero mode <x>^-3 (I + i sigma.x) phi0."""

    phi0: tuple = ((1.0, 0.0), (0.0, 0.0))  # ((re, im), (re, im))

    def __post_init__(self) -> None:
        phi = self.phi0_spinor()
        if abs(np.linalg.norm(phi) - 1.0) > 1e-12:
            raise ValueError("phi0 must have unit norm")

    def phi0_spinor(self) -> ArrayC:
        (a_re, a_im), (b_re, b_im) = self.phi0
        return np.array([a_re + 1j * a_im, b_re + 1j * b_im])

    def w0(self) -> ArrayR:
        return w0_of(self.phi0_spinor())

    def eval(self, points) -> ArrayR:
        return _loss_yau_values(self.w0(), points)


@dataclass(frozen=True)
class Scaled(PotentialSpec):
    """Coupling-scaled potential t * A_inner."""

    t: float
    inner: PotentialSpec

    def __post_init__(self) -> None:
        if not np.isfinite(self.t):
            raise ValueError("scaling must be finite")

    def eval(self, points) -> ArrayR:
        return self.t * self.inner.eval(points)


@dataclass(frozen=True)
class Gauged(PotentialSpec):
    """A_inner + grad chi for a grid-sampled gauge function chi."""

    inner: PotentialSpec
    chi: ScalarFieldHandle

    def eval(self, points) -> ArrayR:
        return self.inner.eval(points) + self.chi.grad_at(points)


# Registered spinor ansatz evaluators for the c<x>^-2 family, keyed by level.
_AMN_REGISTRY: dict[int, Callable[[ArrayR], ArrayC]] = {}


def register_amn_ansatz(ell: int, evaluator: Callable[[ArrayR], ArrayC]) -> None:
    """Register a spinor ansatz psi for level ell >= 1.

    The evaluator maps points (..., 3) to spinor values (..., 2); the family
    member is then A(x) = c_ell <x>^-2 * (psi . sigma psi)(x) / |psi(x)|^2.
    """
    if ell < 1:
        raise ValueError("level 0 is built in; register levels >= 1 only")
    _AMN_REGISTRY[int(ell)] = evaluator


def registered_amn_levels() -> list[int]:
    return sorted(_AMN_REGISTRY)


def _bloch_field(psi: ArrayC) -> ArrayR:
    """Pointwise unit Bloch vector (psi . sigma psi) / |psi|^2."""
    a, b = psi[..., 0], psi[..., 1]
    n2 = (np.abs(a) ** 2 + np.abs(b) ** 2)
    cross = np.conj(a) * b
    w = np.stack([2.0 * cross.real, 2.0 * cross.imag, np.abs(a) ** 2 - np.abs(b) ** 2], axis=-1)
    return w / n2[..., None]


@dataclass(frozen=True)
class AMN(PotentialSpec):
    """Member of the family A = c_ell <x>^-2 w_psi(x).

    Level 0 is built in (its ansatz is the closed-form zero mode with
    phi0 = (1, 0), and c_0 = 3 reproduces LossYau exactly). Higher levels
    need a registered ansatz.
    """

    ell: int
    c_ell: float

    def __post_init__(self) -> None:
        if self.ell < 0:
            raise ValueError("level must be a non-negative integer")
        if self.ell >= 1 and self.ell not in _AMN_REGISTRY:
            raise UnsupportedVariant(
                f"no spinor ansatz registered for level {self.ell}; see register_amn_ansatz"
            )

    def _psi(self, points: ArrayR) -> ArrayC:
        if self.ell == 0:
            from diraclab.modes import LossYauMode

            return LossYauMode().eval(points)
        evaluator = _AMN_REGISTRY.get(self.ell)
        if evaluator is None:
            raise UnsupportedVariant(f"ansatz for level {self.ell} was unregistered")
        return np.asarray(evaluator(points), dtype=np.complex128)

    def eval(self, points) -> ArrayR:
        pts = np.asarray(points, dtype=np.float64)
        w = _bloch_field(self._psi(pts))
        jb2 = 1.0 + np.sum(pts**2, axis=-1)
        return self.c_ell / jb2[..., None] * w


@dataclass(frozen=True)
class Sampled(PotentialSpec):
    """Potential given by grid samples, trilinearly interpolated in the box."""

    grid: Grid3D
    values: ArrayR  # (n, n, n, 3) real

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != (self.grid.n,) * 3 + (3,):
            raise ValueError(f"sampled potential has shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("non-finite potential sample")
        object.__setattr__(self, "values", v)

    def eval(self, points) -> ArrayR:
        return interp_trilinear(self.grid, self.values, points)


def eval_potential(spec: PotentialSpec, x) -> ArrayR:
    """A(x) for a single point or a batch of points (..., 3)."""
    return spec.eval(x)


# ----------------------------------------------------------------------------
# Decay classification


@dataclass(frozen=True)
class DecayClassReport:
    """Sampled decay-class evidence for a potential.

    rho_fit is the least-squares exponent of log|A| vs log r; in_SU demands
    rho_fit >= 1.05 (margin against fit noise at the rho > 1 boundary), in_E
    demands rho_fit > 1 (continuity is assumed from the variant), and in_BE
    demands geometric decay of the radial-shell increments of the |A|^3
    integral (Richardson-style tail convergence). cubic_integral is the
    estimated integral of |A|^3 (head + Simpson + power-law tail).
    """

    rho_fit: float
    sup_weighted_norm: float
    in_SU: bool
    in_BE: bool
    cubic_integral: float
    in_E: bool
    sample_count: int
    tail_exponent: float
    cubic_tail_estimate: float

    def to_dict(self) -> dict:
        return {
            "rho_fit": self.rho_fit,
            "sup_weighted_norm": self.sup_weighted_norm,
            "in_SU": self.in_SU,
            "in_BE": self.in_BE,
            "cubic_integral": self.cubic_integral,
            "in_E": self.in_E,
            "sample_count": self.sample_count,
            "tail_exponent": self.tail_exponent,
            "cubic_tail_estimate": self.cubic_tail_estimate,
        }


def _fit_loglog(r: ArrayR, amp: ArrayR) -> tuple[float, float]:
    """Slope and stderr of log(amp) vs log(r); returns (-slope, stderr)."""
    lx, ly = np.log(r), np.log(amp)
    n = len(lx)
    vx = lx - lx.mean()
    slope = float(np.dot(vx, ly - ly.mean()) / np.dot(vx, vx))
    if n > 2:
        resid = ly - ly.mean() - slope * vx
        stderr = float(np.sqrt(np.dot(resid, resid) / ((n - 2) * np.dot(vx, vx))))
    else:
        stderr = 0.0
    return -slope, stderr


def classify_decay(spec: PotentialSpec, radii, directions) -> DecayClassReport:
    """Classify a potential's decay from samples |A(r * omega)|.

    radii must be strictly increasing with at least two entries; directions
    are unit vectors. The cubic integral uses Simpson over the given radii,
    a constant-|A| head below the smallest radius and a fitted power-law tail
    beyond the largest one.
    """
    radii = np.asarray(radii, dtype=np.float64)
    dirs = np.asarray(directions, dtype=np.float64)
    if radii.ndim != 1 or len(radii) < 2 or np.any(np.diff(radii) <= 0):
        raise ValueError("radii must be strictly increasing with >= 2 entries")
    if np.any(radii <= 0):
        raise ValueError("radii must be positive")
    if dirs.ndim != 2 or dirs.shape[1] != 3 or np.any(np.abs(np.linalg.norm(dirs, axis=1) - 1) > 1e-9):
        raise ValueError("directions must be unit 3-vectors")

    pts = radii[:, None, None] * dirs[None, :, :]  # (nr, nd, 3)
    amp = spec.norm_at(pts)  # (nr, nd)
    if np.max(amp) < 1e-300:
        raise ClassificationUndetermined("potential is numerically zero on all samples")

    mean_amp = amp.mean(axis=1)
    rho_fit, _ = _fit_loglog(radii, np.maximum(mean_amp, 1e-300))

    jb = np.sqrt(1.0 + radii**2)
    sup_weighted = float(np.max(jb[:, None] ** rho_fit * amp))

    # tail exponent from the last decade (or last half of the samples)
    tail_mask = radii >= max(radii[-1] / 10.0, radii[len(radii) // 2])
    if np.count_nonzero(tail_mask) >= 2:
        tail_exp, _ = _fit_loglog(radii[tail_mask], np.maximum(mean_amp[tail_mask], 1e-300))
    else:
        tail_exp = rho_fit

    # radial-shell integrand of |A|^3: 4 pi r^2 mean_omega |A|^3
    shell = 4.0 * np.pi * radii**2 * (amp**3).mean(axis=1)
    cubic_core = float(simpson(shell, x=radii)) if len(radii) >= 3 else float(np.trapezoid(shell, radii))
    # head: constant |A| extrapolation below the first radius
    cubic_head = float(4.0 * np.pi * (amp[0] ** 3).mean() * radii[0] ** 3 / 3.0)
    # tail: |A| ~ C r^-tail_exp beyond the last radius, integrable iff 3*tail_exp > 3
    if tail_exp > 1.0 + 1e-9:
        cubic_tail = float(shell[-1] * radii[-1] / (3.0 * tail_exp - 3.0))
    else:
        cubic_tail = np.inf

    # Richardson-style convergence: increments over a dyadic split of the
    # sampled tail must decay geometrically
    in_be = np.isfinite(cubic_tail)
    splits = np.geomspace(radii[-1] / 4.0, radii[-1], 5)
    if splits[0] > radii[0]:
        incs = []
        for a, b in zip(splits[:-1], splits[1:]):
            m = (radii >= a) & (radii <= b)
            if np.count_nonzero(m) >= 2:
                incs.append(np.trapezoid(shell[m], radii[m]) / max(b - a, 1e-300))
        if len(incs) >= 2 and not all(
            later < 0.9 * earlier + 1e-300 for earlier, later in zip(incs[:-1], incs[1:])
        ):
            in_be = False

    cubic_total = cubic_core + cubic_head + (cubic_tail if np.isfinite(cubic_tail) else 0.0)

    return DecayClassReport(
        rho_fit=float(rho_fit),
        sup_weighted_norm=sup_weighted,
        in_SU=bool(rho_fit >= 1.05),
        in_BE=bool(in_be),
        cubic_integral=float(cubic_total),
        in_E=bool(rho_fit > 1.0),
        sample_count=int(amp.size),
        tail_exponent=float(tail_exp),
        cubic_tail_estimate=float(cubic_tail if np.isfinite(cubic_tail) else np.inf),
    )


def default_classification(spec: PotentialSpec) -> DecayClassReport:
    """Classification with the library's default dense sample set."""
    from diraclab.quadrature import sphere_directions_26

    radii = np.geomspace(0.05, 2000.0, 240)
    return classify_decay(spec, radii, sphere_directions_26())


def kernel_dim_bound(spec: PotentialSpec, c: float) -> float:
    """Upper-bound estimate c * integral |A|^3 for the threshold kernel dimension.

    The proportionality constant is supplied by the caller (the sharp value is
    not fixed here). c = 0 short-circuits to 0 for any potential.
    """
    if c < 0 or not np.isfinite(c):
        raise ValueError("bound constant must be finite and >= 0")
    if c == 0.0:
        return 0.0
    report = default_classification(spec)
    if not report.in_BE:
        raise ValueError("kernel-dimension bound requires a cubically integrable potential")
    return c * report.cubic_integral


# ----------------------------------------------------------------------------
# Serialization


def potential_to_json(spec: PotentialSpec) -> dict:
    """JSON-ready dict for a PotentialSpec.

    Grid-backed payloads (Sampled values, gauge functions) are referenced by
    companion binary files and must be written separately; their entries hold
    the grid geometry and an optional file name filled in by the caller.
    """
    if isinstance(spec, LossYau):
        phi = spec.phi0_spinor()
        return {"variant": "loss_yau", "phi0": [[phi[0].real, phi[0].imag], [phi[1].real, phi[1].imag]]}
    if isinstance(spec, Scaled):
        return {"variant": "scaled", "t": spec.t, "inner": potential_to_json(spec.inner)}
    if isinstance(spec, Gauged):
        return {
            "variant": "gauged",
            "inner": potential_to_json(spec.inner),
            "chi": {"grid_n": spec.chi.grid.n, "box_l": spec.chi.grid.L, "file": None},
        }
    if isinstance(spec, AMN):
        return {"variant": "amn", "ell": spec.ell, "c_ell": spec.c_ell}
    if isinstance(spec, Sampled):
        return {"variant": "sampled", "grid_n": spec.grid.n, "box_l": spec.grid.L, "file": None}
    raise UnsupportedVariant(f"cannot serialize {type(spec).__name__}")


def potential_from_json(obj: dict, base_dir: Optional[Path] = None) -> PotentialSpec:
    """Rebuild a PotentialSpec from its JSON dict.

    File-backed variants resolve their companion binary relative to base_dir.
    """
    if isinstance(obj, str):
        obj = json.loads(obj)
    variant = obj.get("variant")
    if variant == "loss_yau":
        phi0 = obj.get("phi0", [[1.0, 0.0], [0.0, 0.0]])
        return LossYau(phi0=((phi0[0][0], phi0[0][1]), (phi0[1][0], phi0[1][1])))
    if variant == "scaled":
        return Scaled(t=float(obj["t"]), inner=potential_from_json(obj["inner"], base_dir))
    if variant == "amn":
        return AMN(ell=int(obj["ell"]), c_ell=float(obj["c_ell"]))
    if variant == "sampled":
        fname = obj.get("file")
        if not fname:
            raise ValueError("sampled potential needs a companion file")
        path = Path(fname)
        if base_dir is not None and not path.is_absolute():
            path = Path(base_dir) / path
        return read_sampled_potential(path)
    if variant == "gauged":
        chi_obj = obj.get("chi", {})
        fname = chi_obj.get("file")
        if not fname:
            raise ValueError("gauged potential needs a companion gauge-function file")
        path = Path(fname)
        if base_dir is not None and not path.is_absolute():
            path = Path(base_dir) / path
        grid, fields = _read_field_file(path, expected_fields=1)
        handle = ScalarFieldHandle(grid=grid, values=fields[0])
        return Gauged(inner=potential_from_json(obj["inner"], base_dir), chi=handle)
    raise UnsupportedVariant(f"unknown potential variant {variant!r}")


def write_sampled_potential(path, spec: Sampled) -> None:
    """Companion binary for sampled potentials: little-endian float64 header
    (three axis counts, box half-width) then the three component fields,
    x index fastest within each field."""
    _write_field_file(path, spec.grid, [spec.values[..., j] for j in range(3)])


def read_sampled_potential(path) -> Sampled:
    grid, fields = _read_field_file(path, expected_fields=3)
    return Sampled(grid=grid, values=np.stack(fields, axis=-1))


def write_gauge_function(path, handle: ScalarFieldHandle) -> None:
    """Companion binary for gauge functions: same layout, one field."""
    _write_field_file(path, handle.grid, [handle.values])


def _write_field_file(path, grid: Grid3D, fields: list[ArrayR]) -> None:
    with open(path, "wb") as fh:
        fh.write(struct.pack("<4d", float(grid.n), float(grid.n), float(grid.n), float(grid.L)))
        for f in fields:
            fh.write(np.ascontiguousarray(f.T).astype("<f8").tobytes())


def _read_field_file(path, expected_fields: int) -> tuple[Grid3D, list[ArrayR]]:
    with open(path, "rb") as fh:
        n1, n2, n3, L = struct.unpack("<4d", fh.read(32))
        if not (n1 == n2 == n3):
            raise ValueError(f"grid must be cubic, got axis counts {(n1, n2, n3)}")
        n = int(n1)
        grid = Grid3D(n=n, L=L)
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != expected_fields * n**3:
        raise ValueError(f"expected {expected_fields} fields of {n**3} values, found {data.size}")
    fields = []
    for j in range(expected_fields):
        block = data[j * n**3 : (j + 1) * n**3].reshape(n, n, n)  # (z, y, x), x fastest
        fields.append(np.ascontiguousarray(block.T).astype(np.float64))
    if any(not np.all(np.isfinite(f)) for f in fields):
        raise ValueError("non-finite value in field file")
    return grid, fields
