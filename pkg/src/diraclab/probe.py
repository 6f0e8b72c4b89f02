"""Iterative spectral probes for the discretized operators.

Eigenpairs near a target are found by block LOBPCG on the squared shifted
operator (Op - tau)^2, which is Hermitian positive semidefinite and turns
"nearest tau" into "smallest". The preconditioner inverts the exact free-field
Fourier symbol of the squared shift (plus a small regularizer), so the
plane-wave bulk collapses in a handful of iterations and only the
potential-induced states need work. Eigenvalues of the operator itself are
recovered by Rayleigh-Ritz on the converged block; every report carries the
per-pair residuals, the seed, and the kernel-counting threshold actually used.

The periodic box has one structural artifact worth naming: constant spinors
span the k = 0 fiber, so sigma.D has a 2-dim exact kernel (and the free 4x4
operator has exact eigenvalues +-m) that does not correspond to anything
normalizable on R^3. Kernel counts deflate eigenvectors that are mostly
constant whenever the potential is nonzero; every exclusion is logged in the
report's notes.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np
from numpy.typing import NDArray
from scipy.sparse.linalg import LinearOperator, lobpcg

from diraclab.grid import Field2, Field4, Grid3D, OperatorHandle, apply_values, residual_norm, sample_field
from diraclab.potentials import PotentialSpec, Scaled, _fit_loglog
from diraclab.quadrature import sphere_directions_26

ArrayC = NDArray[np.complex128]
ArrayR = NDArray[np.float64]

__all__ = [
    "EigsOptions",
    "EigenReport",
    "GapScanReport",
    "WeylQuasimode",
    "DecayFit",
    "CouplingScanReport",
    "SolverError",
    "eigs_near",
    "initial_block_from_fields",
    "kernel_threshold",
    "gap_scan",
    "build_weyl_quasimode",
    "decay_fit",
    "coupling_scan",
    "write_gap_csv",
    "write_coupling_csv",
    "write_decay_csv",
]

# Verdict half-width for decay-exponent bands: separates exponent 1 from 2
# with symmetric margins at desk-scale fit windows.
VERDICT_DELTA = 0.25


class SolverError(RuntimeError):
    """The iterative solver failed outright (not mere non-convergence)."""


def kernel_threshold(grid: Grid3D) -> float:
    """Near-zero cutoff for kernel counting.

    Budget = box-truncation term (the r^-2 mode tails see the boundary at
    distance L) plus the spectral-truncation term for analytic fields,
    exp(-k_max). At n=64, L=20 this evaluates to 5.7e-3.
    """
    k_max = np.pi * grid.n / (2.0 * grid.L)
    return 0.1 / grid.L + 0.1 * np.exp(-k_max)


@dataclass(frozen=True)
class EigsOptions:
    """Solver knobs; defaults tuned on the n=64, L=20 reference grid."""

    seed: int = 0
    tol: float = 1e-8  # LOBPCG tolerance on the squared-shift residual
    maxiter: int = 400
    extra: Optional[int] = None  # extra block vectors beyond count
    resid_tol: float = 1e-6  # per-pair residual defining "converged"
    delta: Optional[float] = None  # preconditioner regularizer; None = 3 mean|A|^2
    initial_block: Optional[np.ndarray] = None  # warm-start block (N, >=count)
    deflate_constants: bool = True

    def replaced(self, **kw) -> "EigsOptions":
        from dataclasses import replace

        return replace(self, **kw)


@dataclass(frozen=True)
class EigenReport:
    """Eigenpairs nearest a target, with enough context to reproduce them."""

    target: float
    eigenvalues: tuple
    residuals: tuple
    kernel_dim_estimate: int
    iterations: int
    converged: bool
    threshold: float
    seed: int
    kind: str
    grid_n: int
    box_l: float
    mass: Optional[float]
    notes: tuple
    vectors: Optional[np.ndarray] = None  # (N, count) ritz vectors, flattened

    def to_dict(self) -> dict:
        return {
            "target": self.target,
            "eigenvalues": list(self.eigenvalues),
            "residuals": list(self.residuals),
            "kernel_dim_estimate": self.kernel_dim_estimate,
            "iterations": self.iterations,
            "converged": self.converged,
            "threshold": self.threshold,
            "seed": self.seed,
            "kind": self.kind,
            "grid_n": self.grid_n,
            "box_l": self.box_l,
            "mass": self.mass,
            "notes": list(self.notes),
        }

    def vector_field(self, grid: Grid3D, index: int = 0):
        """Ritz vector as a Field2/Field4 on the solve's grid."""
        if self.vectors is None:
            raise ValueError("report was built without vectors")
        rank = 2 if self.kind in ("sigma_d", "t_a") else 4
        values = self.vectors[:, index].reshape((grid.n,) * 3 + (rank,))
        cls = Field2 if rank == 2 else Field4
        return cls(grid=grid, values=values.copy())


def _free_symbol_preconditioner(op: OperatorHandle, tau: float, delta: float):
    """Exact fiberwise inverse of (free symbol - tau)^2 + delta.

    The free squared shift S0(k) = (Sym(k) - tau)^2 is diagonalized by the
    symbol's own eigenprojections, so (S0 + delta)^{-1} has the closed forms

    sigma_d / t_a: ((|k|^2+tau^2+delta) I + 2 tau sigma.k)
                   / (((|k|-tau)^2+delta) ((|k|+tau)^2+delta))
    h_a:           ((rho^2+tau^2+delta) I + 2 tau H0(k))
                   / (((rho-tau)^2+delta) ((rho+tau)^2+delta)),  rho^2 = |k|^2+m^2
    h_squared:     I / ((|k|^2+m^2-tau)^2 + delta)

    SPD by construction (every fiber eigenvalue is 1/((s-tau)^2+delta) > 0),
    which LOBPCG requires, and large exactly on the near-singular fibers.
    """
    grid = op.grid
    kx, ky, kz = (k[..., None] for k in grid.k_mesh)  # pad one batch axis
    k2 = grid.k2_mesh[..., None]

    def sigma_k(v0, v1):
        return kz * v0 + (kx - 1j * ky) * v1, (kx + 1j * ky) * v0 - kz * v1

    if op.kind in ("sigma_d", "t_a"):
        kn = np.sqrt(k2)
        den = ((kn - tau) ** 2 + delta) * ((kn + tau) ** 2 + delta)
        c = k2 + tau**2 + delta

        def mul(vhat: ArrayC) -> ArrayC:
            s0, s1 = sigma_k(vhat[..., 0], vhat[..., 1])
            out = np.empty_like(vhat)
            out[..., 0] = (c * vhat[..., 0] + 2.0 * tau * s0) / den
            out[..., 1] = (c * vhat[..., 1] + 2.0 * tau * s1) / den
            return out

    elif op.kind == "h_a":
        m = op.mass
        rho = np.sqrt(k2 + m**2)
        den = ((rho - tau) ** 2 + delta) * ((rho + tau) ** 2 + delta)
        c = k2 + m**2 + tau**2 + delta

        def mul(vhat: ArrayC) -> ArrayC:
            u0, u1, l0, l1 = (vhat[..., j] for j in range(4))
            su0, su1 = sigma_k(u0, u1)
            sl0, sl1 = sigma_k(l0, l1)
            # H0(k) = [[m, sigma.k], [sigma.k, -m]]
            out = np.empty_like(vhat)
            out[..., 0] = (c * u0 + 2.0 * tau * (m * u0 + sl0)) / den
            out[..., 1] = (c * u1 + 2.0 * tau * (m * u1 + sl1)) / den
            out[..., 2] = (c * l0 + 2.0 * tau * (su0 - m * l0)) / den
            out[..., 3] = (c * l1 + 2.0 * tau * (su1 - m * l1)) / den
            return out

    else:  # h_squared: free symbol is the scalar |k|^2 + m^2
        den = ((k2 + op.mass**2 - tau) ** 2 + delta)[..., None]  # pad component axis

        def mul(vhat: ArrayC) -> ArrayC:
            return vhat / den

    import scipy.fft as sfft

    def prec(block: np.ndarray) -> np.ndarray:
        n, rank = grid.n, op.rank
        b = np.atleast_2d(block.T).T  # (N, nb)
        nb = b.shape[1]
        v = b.reshape((n, n, n, rank, nb)).transpose(0, 1, 2, 4, 3)
        vhat = sfft.fftn(v, axes=(0, 1, 2), workers=-1)
        what = mul(vhat)
        w = sfft.ifftn(what, axes=(0, 1, 2), workers=-1)
        out = w.transpose(0, 1, 2, 4, 3).reshape(n**3 * rank, nb)
        return out if block.ndim == 2 else out[:, 0]

    return prec


def _block_matvec(op: OperatorHandle, tau: float):
    """(Op - tau)^2 acting on flattened blocks (N, nb)."""
    n, rank = op.grid.n, op.rank

    def mv(block: np.ndarray) -> np.ndarray:
        b = np.atleast_2d(block.T).T
        nb = b.shape[1]
        v = b.reshape((n, n, n, rank, nb)).transpose(0, 1, 2, 4, 3)
        w = apply_values(op, v) - tau * v
        w = apply_values(op, w) - tau * w
        out = w.transpose(0, 1, 2, 4, 3).reshape(n**3 * rank, nb)
        return out if block.ndim == 2 else out[:, 0]

    return mv


def _constant_fraction(vec: ArrayC, n: int, rank: int) -> float:
    """Norm fraction of a flattened eigenvector lying in the constant subspace."""
    v = vec.reshape((n, n, n, rank))
    means = v.mean(axis=(0, 1, 2))
    return float(n**3 * np.sum(np.abs(means) ** 2) / np.sum(np.abs(v) ** 2))


def _kernel_scale(kind: str, mass: Optional[float], lam: float) -> float:
    """Map an eigenvalue to the supercharge scale used for kernel counting.

    For the 4x4 operators the exact discrete identity H^2 = T^2 + m^2 puts
    every eigenvalue at +-sqrt(t^2 + m^2); inverting that recovers |t|, so
    kernel counts agree across T_A, H_A, and H^2 views of the same potential.
    """
    if kind in ("sigma_d", "t_a"):
        return abs(lam)
    if kind == "h_a":
        return float(np.sqrt(max(lam**2 - mass**2, 0.0)))
    return float(np.sqrt(max(lam - mass**2, 0.0)))  # h_squared


def _potential_is_zero(op: OperatorHandle) -> bool:
    if op.kind == "sigma_d" or op.potential is None:
        return True
    return float(np.max(np.abs(op.sampled_potential()))) == 0.0


def _resolve_delta(op: OperatorHandle, delta: Optional[float]) -> float:
    """Default regularizer: three times the potential's mean square.

    That is the scale of the squared operator on the smooth states the free
    symbol cannot see, so the preconditioner neither drowns them (delta too
    large) nor blows them up into the band (delta too small). Measured on the
    reference potential, the iteration count is flat within a factor ~3 of
    this choice and degrades sharply an order of magnitude away from it.
    """
    if delta is not None:
        if not (delta > 0 and np.isfinite(delta)):
            raise ValueError("delta must be positive and finite")
        return delta
    if _potential_is_zero(op):
        return 1e-4
    A = op.sampled_potential()
    return max(1e-4, 3.0 * float(np.mean(np.sum(np.abs(A) ** 2, axis=-1))))


def _free_wavenumber(op: OperatorHandle, target: float) -> float:
    """Radius of the free-symbol shell resonant with the target."""
    if op.kind in ("sigma_d", "t_a"):
        return abs(target)
    if op.kind == "h_a":
        return float(np.sqrt(max(target**2 - op.mass**2, 0.0)))
    return float(np.sqrt(max(target - op.mass**2, 0.0)))


def _lowpass_columns(op: OperatorHandle, target: float, count: int, rng) -> np.ndarray:
    """Random fields band-limited to the target's resonant shell plus margin."""
    import scipy.fft as sfft

    grid = op.grid
    n, rank = grid.n, op.rank
    kcut = _free_wavenumber(op, target) + 6.0 * np.pi / grid.L
    mask = (grid.k2_mesh <= kcut**2)[..., None, None]
    co = (rng.normal(size=(n, n, n, count, rank))
          + 1j * rng.normal(size=(n, n, n, count, rank))) * mask
    v = sfft.ifftn(co, axes=(0, 1, 2), workers=-1)
    return v.transpose(0, 1, 2, 4, 3).reshape(n**3 * rank, count)


def _default_block(op: OperatorHandle, target: float, nb: int, rng) -> np.ndarray:
    """Initial block: exact constant spinors plus band-limited random fields.

    The states an eigensolve near a physical target can return are smooth
    (they live at wavenumbers around the resonant shell), so white noise
    mostly seeds components the iteration must then grind away. Restricting
    the random part below the resonant shell plus a few lattice steps, and
    including the k = 0 fiber exactly, cuts iteration counts several-fold.
    """
    grid = op.grid
    n, rank = grid.n, op.rank
    N = n**3 * rank
    cols = []
    for s in range(min(rank, nb - 1)):
        c = np.zeros((n, n, n, rank), dtype=np.complex128)
        c[..., s] = 1.0
        cols.append(c.reshape(N))
    rand = _lowpass_columns(op, target, nb - len(cols), rng)
    return np.hstack([np.stack(cols, axis=1), rand])


def initial_block_from_fields(op: OperatorHandle, fields, opts: Optional[EigsOptions] = None) -> np.ndarray:
    """Flatten known fields into a warm-start block for eigs_near.

    fields is a sequence of Field2/Field4 (or raw value arrays) on the
    operator's grid; a good guess for even one member of the target cluster
    cuts the iteration count severalfold. Constant spinors are appended
    automatically, eigs_near pads the rest.
    """
    grid, rank = op.grid, op.rank
    N = grid.n**3 * rank
    cols = []
    for f in fields:
        values = getattr(f, "values", f)
        values = np.asarray(values, dtype=np.complex128)
        if values.shape != (grid.n,) * 3 + (rank,):
            raise ValueError(f"field shape {values.shape} does not fit operator {op.kind}")
        cols.append(values.reshape(N))
    for s in range(rank):
        c = np.zeros((grid.n,) * 3 + (rank,), dtype=np.complex128)
        c[..., s] = 1.0
        cols.append(c.reshape(N))
    return np.stack(cols, axis=1)


def eigs_near(
    op: OperatorHandle,
    target: float,
    count: int,
    opts: Optional[EigsOptions] = None,
) -> EigenReport:
    """The `count` eigenvalues of the discretized operator nearest `target`.

    Deterministic under a fixed seed. Non-convergence is reported through
    converged=False with the partial results left in place, never raised.
    """
    opts = opts or EigsOptions()
    if count < 1:
        raise ValueError("count must be >= 1")
    grid = op.grid
    n, rank = grid.n, op.rank
    N = n**3 * rank
    extra = opts.extra if opts.extra is not None else max(2, count)
    nb = min(count + extra, N)

    mv = _block_matvec(op, target)
    delta = _resolve_delta(op, opts.delta)
    prec = _free_symbol_preconditioner(op, target, delta)
    A = LinearOperator((N, N), matvec=mv, matmat=mv, dtype=np.complex128)
    M = LinearOperator((N, N), matvec=prec, matmat=prec, dtype=np.complex128)

    rng = np.random.default_rng(opts.seed)
    if opts.initial_block is not None:
        X = np.array(opts.initial_block, dtype=np.complex128)
        if X.shape[0] != N:
            raise ValueError("warm-start block has the wrong dimension")
        if X.shape[1] < nb:  # top up with band-limited random columns
            pad = _lowpass_columns(op, target, nb - X.shape[1], rng)
            X = np.hstack([X, pad])
        else:
            X = X[:, :nb]
    else:
        X = _default_block(op, target, nb, rng)

    notes: list[str] = []
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")  # lobpcg warns instead of raising
            out = lobpcg(
                A, X, M=M, largest=False, tol=opts.tol, maxiter=opts.maxiter,
                retLambdaHistory=True,
            )
        vals, vecs = out[0], out[1]
        iterations = max(0, len(out[2]) - 1) if len(out) > 2 else opts.maxiter
    except Exception as exc:
        raise SolverError(f"lobpcg failed on {op.kind}: {exc}") from exc
    if not np.all(np.isfinite(vecs)):
        raise SolverError("lobpcg returned non-finite vectors")

    # Rayleigh-Ritz of Op itself on the converged subspace
    Q, _ = np.linalg.qr(vecs)
    AQ = np.empty_like(Q)
    AQ[:] = apply_values(op, Q.reshape((n, n, n, rank, nb)).transpose(0, 1, 2, 4, 3)) \
        .transpose(0, 1, 2, 4, 3).reshape(N, nb)
    small = Q.conj().T @ AQ
    small = (small + small.conj().T) / 2.0
    mu, W = np.linalg.eigh(small)
    V = Q @ W

    order = np.argsort(np.abs(mu - target), kind="stable")[:count]
    order = order[np.argsort(mu[order], kind="stable")]  # ascending output
    lam = mu[order]
    vectors = V[:, order]

    residuals = []
    Vg = vectors.reshape((n, n, n, rank, len(order))).transpose(0, 1, 2, 4, 3)
    R = apply_values(op, Vg) - lam[None, None, None, :, None] * Vg
    for i in range(len(order)):
        residuals.append(float(
            np.linalg.norm(R[..., i, :]) / np.linalg.norm(Vg[..., i, :])
        ))

    thr = kernel_threshold(grid)
    pot_zero = _potential_is_zero(op)
    kernel = 0
    for i, l in enumerate(lam):
        if _kernel_scale(op.kind, op.mass, float(l)) > thr:
            continue
        if opts.deflate_constants and not pot_zero:
            frac = _constant_fraction(vectors[:, i], n, rank)
            if frac > 0.5:
                notes.append(
                    f"excluded eigenvalue {l:.3e} from kernel count: "
                    f"constant-subspace overlap {frac:.2f} (torus artifact)"
                )
                continue
        kernel += 1

    converged = bool(np.all(np.array(residuals) <= opts.resid_tol))
    if not converged:
        notes.append(
            f"residuals above {opts.resid_tol:.1e} after {iterations} iterations"
        )
    return EigenReport(
        target=float(target),
        eigenvalues=tuple(float(l) for l in lam),
        residuals=tuple(residuals),
        kernel_dim_estimate=kernel,
        iterations=int(iterations),
        converged=converged,
        threshold=thr,
        seed=opts.seed,
        kind=op.kind,
        grid_n=n,
        box_l=grid.L,
        mass=op.mass,
        notes=tuple(notes),
        vectors=vectors,
    )


# ----------------------------------------------------------------------------
# Gap scan


@dataclass(frozen=True)
class GapScanReport:
    """Spectral-gap certification: (lambda, proxy) rows with proxy >= 1 - tol
    meaning the nearest eigenvalue keeps the full theoretical distance
    min(|lambda - m|, |lambda + m|)."""

    mass: float
    rows: tuple  # ((lambda, proxy), ...)
    nearest_eigenvalues: tuple
    seed: int

    def to_dict(self) -> dict:
        return {
            "mass": self.mass,
            "rows": [[l, p] for l, p in self.rows],
            "nearest_eigenvalues": list(self.nearest_eigenvalues),
            "seed": self.seed,
        }


def gap_scan(
    pot: PotentialSpec,
    mass: float,
    grid: Grid3D,
    resolution: Optional[int] = None,
    lambdas: Optional[Sequence[float]] = None,
    opts: Optional[EigsOptions] = None,
) -> GapScanReport:
    """Certify the absence of spectrum inside the gap (-m, m).

    Samples lambda over the middle half of the gap, [-m/2, m/2] (the proxy's
    normalization degenerates at the +-m endpoints, which the theory pins as
    spectrum anyway): `resolution` uniform points, or an explicit `lambdas`
    list staying at least m/20 away from +-m. For each lambda the proxy is
    dist(lambda, nearest eigenvalue) / min(|lambda-m|, |lambda+m|); values
    near 1 certify that no discrete eigenvalue intrudes into the gap.

    The nearest eigenvalues are enumerated through the supercharge: the block
    identity H^2 = T^2 + m^2 holds exactly on the grid, so the full-operator
    spectrum nearest the gap is +-sqrt(m^2 + eps^2) over the near-kernel
    eigenvalues eps of T. One supercharge solve covers every lambda; direct
    full-operator solves targeted inside the gap stagnate instead, since both
    +-m edge clusters are nearly degenerate at the squared level and any
    small block edge lands inside one of them.
    """
    if mass <= 0 or not np.isfinite(mass):
        raise ValueError("gap scan needs mass > 0")
    if (resolution is None) == (lambdas is None):
        raise ValueError("give exactly one of resolution or lambdas")
    if lambdas is None:
        if resolution < 3:
            raise ValueError("resolution must be >= 3")
        points = np.linspace(-mass / 2.0, mass / 2.0, resolution)
    else:
        points = np.asarray(lambdas, dtype=np.float64)
        if points.ndim != 1 or len(points) == 0:
            raise ValueError("lambdas must be a non-empty 1d list")
        if np.any(np.abs(points) > 0.95 * mass):
            raise ValueError("gap samples must stay away from the +-m endpoints")

    op = OperatorHandle(kind="t_a", grid=grid, potential=pot)
    opts = opts or EigsOptions()
    rep = eigs_near(op, 0.0, 1, opts.replaced(extra=2, deflate_constants=False))
    if not rep.converged:
        raise SolverError(
            f"supercharge edge solve did not converge (residuals {rep.residuals})"
        )
    edge = float(np.sqrt(mass**2 + min(abs(e) for e in rep.eigenvalues) ** 2))
    rows = []
    nearest = []
    for lam in points:
        mu = edge if abs(lam - edge) <= abs(lam + edge) else -edge
        bound = min(abs(lam - mass), abs(lam + mass))
        rows.append((float(lam), float(abs(mu - lam) / bound)))
        nearest.append(mu)
    return GapScanReport(mass=float(mass), rows=tuple(rows),
                         nearest_eigenvalues=tuple(nearest), seed=opts.seed)


# ----------------------------------------------------------------------------
# Weyl quasi-modes


@dataclass(frozen=True)
class WeylQuasimode:
    """Quasi-eigenfunction f = (a psi, b psi) at lambda0 with |lambda0| >= m.

    psi is the sigma.k eigenspinor of the dual-lattice wave vector nearest
    nu0 = sqrt(lambda0^2 - m^2), localized by a smooth periodic envelope whose
    width grows with n_index; (a, b) solves the 2x2 threshold relation.
    """

    lambda0: float
    nu0: float
    a: float
    b: float
    field: Field4
    residual: float
    k_vector: tuple
    envelope_width: Optional[float]
    notes: tuple

    def to_dict(self) -> dict:
        return {
            "lambda0": self.lambda0,
            "nu0": self.nu0,
            "a": self.a,
            "b": self.b,
            "residual": self.residual,
            "k_vector": list(self.k_vector),
            "envelope_width": self.envelope_width,
            "grid_n": self.field.grid.n,
            "box_l": self.field.grid.L,
            "notes": list(self.notes),
        }


def _nearest_lattice_k(grid: Grid3D, nu0: float) -> ArrayR:
    """Dual-lattice vector minimizing ||k| - nu0|, ties broken lexicographically.

    The Nyquist rows are excluded: the label -n/2 has no +n/2 partner, so a
    wave packet modulated onto it cannot be re-centered cleanly.
    """
    base = np.pi / grid.L
    zmax = min(grid.n // 2 - 1, int(np.ceil(nu0 / base)) + 2)
    axis = np.arange(-zmax, zmax + 1)
    z = np.stack(np.meshgrid(axis, axis, axis, indexing="ij"), axis=-1).reshape(-1, 3)
    norms = base * np.linalg.norm(z, axis=1)
    mism = np.abs(norms - nu0)
    best = np.lexsort((z[:, 2], z[:, 1], z[:, 0], mism))
    return base * z[best[0]].astype(np.float64)


def _plus_spinor(k: ArrayR) -> ArrayC:
    """Unit eigenspinor of sigma.k with eigenvalue +|k| (any spinor for k=0)."""
    nk = np.linalg.norm(k)
    if nk == 0.0:
        return np.array([1.0, 0.0], dtype=np.complex128)
    kh = k / nk
    col = np.array([1.0 + kh[2], kh[0] + 1j * kh[1]])  # (I + sigma.k_hat) e1
    if np.linalg.norm(col) < 1e-8:  # k_hat = -e3 degenerates the first column
        col = np.array([kh[0] - 1j * kh[1], 1.0 - kh[2]])
    return col / np.linalg.norm(col)


def _threshold_pair(lambda0: float, mass: float, nu0: float) -> tuple[float, float]:
    # [[m, nu0], [nu0, -m]] (a, b)^T = lambda0 (a, b)^T
    if lambda0 >= 0:
        a, b = lambda0 + mass, nu0
    else:
        a, b = nu0, lambda0 - mass
    norm = float(np.hypot(a, b))
    if norm == 0.0:  # lambda0 = mass = 0: any unit pair satisfies the relation
        return 1.0, 0.0
    return a / norm, b / norm


def build_weyl_quasimode(
    pot: PotentialSpec,
    mass: float,
    lambda0: float,
    n_index: int,
    grid: Grid3D,
) -> WeylQuasimode:
    """Quasi-mode at lambda0 demonstrating that all of |lambda| >= m is spectrum.

    For A = 0 and lambda0 on the exact lattice dispersion the construction is
    an exact eigenfunction (no envelope, residual at round-off). Otherwise the
    wave packet is centered on the corner of the box, far from the potential's
    bulk, and its residual decreases as n_index widens the envelope.
    """
    if not (np.isfinite(mass) and mass >= 0):
        raise ValueError("mass must be finite and >= 0")
    if abs(lambda0) < mass:
        raise ValueError(f"need |lambda0| >= mass, got {lambda0} with mass {mass}")
    if n_index < 1:
        raise ValueError("n_index must be >= 1")

    nu0 = float(np.sqrt(max(lambda0**2 - mass**2, 0.0)))
    k = _nearest_lattice_k(grid, nu0)
    chi = _plus_spinor(k)
    a, b = _threshold_pair(lambda0, mass, nu0)

    op = OperatorHandle(kind="h_a", grid=grid, potential=pot, mass=mass)
    pot_zero = float(np.max(np.abs(op.sampled_potential()))) == 0.0

    phase = np.exp(1j * (grid.nodes @ k))
    notes = []
    if pot_zero:
        envelope = 1.0
        width = None
        notes.append("zero potential: plane wave used without envelope")
    else:
        # smooth periodic bump centered on the corner (-L,-L,-L), the point
        # farthest from the potential's bulk at the origin
        width = 1.0 + 1.5 * n_index
        u = grid.axis + grid.L  # distance from corner along one axis, in [0, 2L)
        s = (2.0 * grid.L / np.pi) * np.sin(np.pi * u / (2.0 * grid.L))
        d2 = (s[:, None, None] ** 2 + s[None, :, None] ** 2 + s[None, None, :] ** 2)
        envelope = np.exp(-d2 / (2.0 * width**2))
    psi = (envelope * phase)[..., None] * chi

    values = np.zeros(grid.nodes.shape[:-1] + (4,), dtype=np.complex128)
    values[..., 0:2] = a * psi
    values[..., 2:4] = b * psi
    f = Field4(grid=grid, values=values)
    res = residual_norm(op, f, lambda0)
    return WeylQuasimode(
        lambda0=float(lambda0), nu0=nu0, a=a, b=b, field=f, residual=res,
        k_vector=tuple(float(c) for c in k), envelope_width=width, notes=tuple(notes),
    )


# ----------------------------------------------------------------------------
# Decay-exponent certification


@dataclass(frozen=True)
class DecayFit:
    """Least-squares decay exponent of log mean_omega |f(r omega)| vs log r.

    verdict: mode_tail for exponent within 0.25 of 2, resonance_tail within
    0.25 of 1, else undetermined. flagged marks a resonance_tail seen for a
    potential decaying faster than <x>^-3/2, where theory forbids it.
    """

    exponent: float
    exponent_stderr: float
    window: tuple
    verdict: str
    flagged: bool
    sample_count: int
    table: tuple  # ((r, amplitude), ...)

    def to_dict(self) -> dict:
        expo = None if not np.isfinite(self.exponent) else self.exponent
        return {
            "exponent": expo,
            "exponent_stderr": self.exponent_stderr,
            "window": list(self.window),
            "verdict": self.verdict,
            "flagged": self.flagged,
            "sample_count": self.sample_count,
            "table": [[r, a] for r, a in self.table],
        }


def decay_fit(
    mode,
    radii,
    directions=None,
    potential_rho: Optional[float] = None,
) -> DecayFit:
    """Fit the radial decay exponent of a mode over a window of radii.

    mode is a Field2/Field4 (interpolated trilinearly; window must stay inside
    the box) or a callable evaluator points (..., 3) -> spinor values. A field
    below the noise floor across the window yields verdict "undetermined"
    rather than an error.
    """
    radii = np.asarray(radii, dtype=np.float64)
    if directions is None:
        directions = sphere_directions_26()
    dirs = np.asarray(directions, dtype=np.float64)
    if radii.ndim != 1 or len(radii) < 6 or np.any(np.diff(radii) <= 0) or radii[0] <= 0:
        raise ValueError("need >= 6 strictly increasing positive radii")
    if dirs.ndim != 2 or dirs.shape[1] != 3 or len(dirs) < 6:
        raise ValueError("need >= 6 direction vectors")
    if np.any(np.abs(np.linalg.norm(dirs, axis=1) - 1.0) > 1e-9):
        raise ValueError("directions must be unit vectors")

    pts = radii[:, None, None] * dirs[None, :, :]
    if isinstance(mode, (Field2, Field4)):
        if radii[-1] >= mode.grid.L:
            raise ValueError(
                f"window reaches r={radii[-1]}, outside the box of half-width {mode.grid.L}"
            )
        from diraclab.grid import interp_trilinear

        vals = interp_trilinear(mode.grid, mode.values, pts)
    elif callable(mode):
        vals = np.asarray(mode(pts), dtype=np.complex128)
    else:
        raise TypeError("mode must be a Field2, Field4, or callable evaluator")

    amp = np.linalg.norm(vals, axis=-1).mean(axis=1)
    window = (float(radii[0]), float(radii[-1]))
    table = tuple((float(r), float(a)) for r, a in zip(radii, amp))
    if np.max(amp) < 1e-13 * max(1.0, float(np.max(np.abs(vals)))) or np.max(amp) == 0.0:
        return DecayFit(
            exponent=float("nan"), exponent_stderr=float("nan"), window=window,
            verdict="undetermined", flagged=False, sample_count=int(vals.size),
            table=table,
        )

    expo, stderr = _fit_loglog(radii, np.maximum(amp, 1e-300))
    if abs(expo - 2.0) <= VERDICT_DELTA:
        verdict = "mode_tail"
    elif abs(expo - 1.0) <= VERDICT_DELTA:
        verdict = "resonance_tail"
    else:
        verdict = "undetermined"
    flagged = bool(
        verdict == "resonance_tail"
        and potential_rho is not None
        and potential_rho > 1.5
    )
    return DecayFit(
        exponent=float(expo), exponent_stderr=float(stderr), window=window,
        verdict=verdict, flagged=flagged, sample_count=int(vals.size), table=table,
    )


# ----------------------------------------------------------------------------
# Coupling scan


@dataclass(frozen=True)
class CouplingScanReport:
    """|lambda_min(T_{tA})| over a list of couplings t.

    rows hold (t, lambda_min) with lambda_min the smallest |eigenvalue| after
    the torus constant branch is deflated (kept raw at t = 0, where constants
    are the honest answer and are reported as the documented artifact).
    """

    rows: tuple
    eigenvalues: tuple  # per-t tuple of the eigenvalues examined
    notes: tuple
    seed: int

    def to_dict(self) -> dict:
        return {
            "rows": [[t, l] for t, l in self.rows],
            "eigenvalues": [list(e) for e in self.eigenvalues],
            "notes": list(self.notes),
            "seed": self.seed,
        }


def coupling_scan(
    base: PotentialSpec,
    t_values: Sequence[float],
    grid: Grid3D,
    opts: Optional[EigsOptions] = None,
) -> CouplingScanReport:
    """Scan the coupling t, reporting |lambda_min| of T_{tA} at each value."""
    ts = np.asarray(t_values, dtype=np.float64)
    if ts.ndim != 1 or len(ts) < 3 or not np.all(np.isfinite(ts)):
        raise ValueError("need >= 3 finite coupling values")
    opts = opts or EigsOptions()
    rows = []
    all_eigs = []
    notes: list[str] = []
    block = None
    for t in ts:
        op = OperatorHandle(kind="t_a", grid=grid, potential=Scaled(t=float(t), inner=base))
        rep = eigs_near(op, 0.0, 3, opts.replaced(initial_block=block))
        block = rep.vectors
        lam = np.array(rep.eigenvalues)
        if t == 0.0:
            lam_min = float(np.min(np.abs(lam)))
            notes.append(
                "t=0: reported minimum is the torus constant-spinor kernel, "
                "a discretization artifact absent on R^3"
            )
        else:
            keep = [
                i for i in range(len(lam))
                if _constant_fraction(rep.vectors[:, i], grid.n, 2) <= 0.5
            ]
            if keep:
                lam_min = float(np.min(np.abs(lam[keep])))
                if len(keep) < len(lam):
                    notes.append(
                        f"t={t:g}: deflated {len(lam) - len(keep)} constant-branch "
                        "eigenpair(s) from the minimum"
                    )
            else:
                lam_min = float(np.min(np.abs(lam)))
                notes.append(f"t={t:g}: all candidates constant-dominated; raw minimum kept")
        rows.append((float(t), lam_min))
        all_eigs.append(tuple(float(l) for l in lam))
    return CouplingScanReport(rows=tuple(rows), eigenvalues=tuple(all_eigs),
                              notes=tuple(notes), seed=opts.seed)


# ----------------------------------------------------------------------------
# CSV writers


def write_gap_csv(report: GapScanReport, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["lambda", "proxy"])
        for lam, proxy in report.rows:
            w.writerow([f"{lam:.17g}", f"{proxy:.17g}"])


def write_coupling_csv(report: CouplingScanReport, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "lambda_min"])
        for t, lam in report.rows:
            w.writerow([f"{t:.17g}", f"{lam:.17g}"])


def write_decay_csv(fit: DecayFit, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["r", "amplitude"])
        for r, a in fit.table:
            w.writerow([f"{r:.17g}", f"{a:.17g}"])
