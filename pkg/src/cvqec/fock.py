"""Truncated multimode Fock-space containers and elementary operators.

Every mode carries its own cutoff. Multimode vectors are stored flat in
row-major order over ``mode_dims`` so that ``amps.reshape(mode_dims)`` gives
the number-basis amplitude tensor.

Beamsplitter convention: ``B(theta) = exp[theta (a^dag b - a b^dag)]`` with
``cos(theta) = sqrt(tau)``. With this choice ``B |1,0> = sqrt(tau)|1,0> -
sqrt(1-tau)|0,1>`` and the Hong-Ou-Mandel output of ``|1,1>`` at ``tau=1/2``
is ``(|2,0> - |0,2>)/sqrt(2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
from scipy.linalg import expm
from scipy.stats import poisson

from .errors import (
    InvalidDimensionError,
    InvalidParameterError,
    TruncationLeakageError,
    ValidationError,
)

HERMITIAN_TOL = 1e-10
POSITIVITY_TOL = 1e-9
TRACE_TOL = 1e-10
UNITARY_TOL = 1e-9
LEAKAGE_TOL = 1e-6


def _freeze(arr):
    arr = np.array(arr, dtype=complex)
    arr.setflags(write=False)
    return arr


def _check_dims(mode_dims):
    dims = tuple(int(d) for d in mode_dims)
    if not dims or any(d < 1 for d in dims):
        raise InvalidDimensionError(f"invalid mode dimensions {mode_dims!r}")
    return dims


@dataclass(frozen=True)
class FockKet:
    mode_dims: tuple
    amps: np.ndarray
    heralded: bool = False

    def __post_init__(self):
        dims = _check_dims(self.mode_dims)
        amps = _freeze(np.ravel(self.amps))
        if amps.size != math.prod(dims):
            raise InvalidDimensionError(
                f"{amps.size} amplitudes for mode_dims {dims}"
            )
        object.__setattr__(self, "mode_dims", dims)
        object.__setattr__(self, "amps", amps)

    @property
    def n_modes(self):
        return len(self.mode_dims)

    @property
    def norm(self):
        return float(np.linalg.norm(self.amps))

    def tensor(self):
        return self.amps.reshape(self.mode_dims)

    def normalize(self):
        nrm = self.norm
        if nrm == 0:
            raise ValidationError("cannot normalize a zero vector")
        return FockKet(self.mode_dims, self.amps / nrm)

    def dm(self):
        return DensityOperator(self.mode_dims, np.outer(self.amps, self.amps.conj()))


@dataclass(frozen=True)
class DensityOperator:
    mode_dims: tuple
    matrix: np.ndarray

    def __post_init__(self):
        dims = _check_dims(self.mode_dims)
        mat = _freeze(self.matrix)
        n = math.prod(dims)
        if mat.shape != (n, n):
            raise InvalidDimensionError(f"matrix shape {mat.shape} for mode_dims {dims}")
        object.__setattr__(self, "mode_dims", dims)
        object.__setattr__(self, "matrix", mat)

    @property
    def n_modes(self):
        return len(self.mode_dims)

    @property
    def trace(self):
        return float(np.real(np.trace(self.matrix)))

    def normalize(self):
        tr = self.trace
        if tr <= 0:
            raise ValidationError("cannot normalize an operator with non-positive trace")
        return DensityOperator(self.mode_dims, self.matrix / tr)

    def validate(self, subnormalized=True):
        """Raise ``ValidationError`` unless Hermitian, positive and trace-bounded."""
        m = self.matrix
        herm = np.max(np.abs(m - m.conj().T)) if m.size else 0.0
        if herm > HERMITIAN_TOL:
            raise ValidationError(f"not Hermitian (max deviation {herm:.3g})")
        evals = np.linalg.eigvalsh((m + m.conj().T) / 2)
        if evals[0] < -POSITIVITY_TOL:
            raise ValidationError(f"not positive (min eigenvalue {evals[0]:.3g})")
        tr = self.trace
        if tr <= 0 or (not subnormalized and abs(tr - 1) > TRACE_TOL) or tr > 1 + TRACE_TOL:
            raise ValidationError(f"invalid trace {tr!r}")
        return self

    def tensor(self):
        return self.matrix.reshape(self.mode_dims * 2)

    def expect(self, op):
        mat = op.matrix if isinstance(op, FockOperator) else np.asarray(op)
        return complex(np.trace(self.matrix @ mat))


@dataclass(frozen=True)
class FockOperator:
    mode_dims: tuple
    matrix: np.ndarray
    unitary: bool = False

    def __post_init__(self):
        dims = _check_dims(self.mode_dims)
        mat = _freeze(self.matrix)
        n = math.prod(dims)
        if mat.shape != (n, n):
            raise InvalidDimensionError(f"matrix shape {mat.shape} for mode_dims {dims}")
        object.__setattr__(self, "mode_dims", dims)
        object.__setattr__(self, "matrix", mat)
        if self.unitary:
            dev = unitarity_defect(mat)
            if dev > UNITARY_TOL:
                raise ValidationError(f"operator flagged unitary deviates by {dev:.3g}")

    @property
    def dag(self):
        return FockOperator(self.mode_dims, self.matrix.conj().T, self.unitary)

    def __matmul__(self, other):
        if isinstance(other, FockOperator):
            _same_dims(self, other)
            return FockOperator(
                self.mode_dims, self.matrix @ other.matrix, self.unitary and other.unitary
            )
        if isinstance(other, FockKet):
            _same_dims(self, other)
            return FockKet(self.mode_dims, self.matrix @ other.amps, other.heralded)
        if isinstance(other, DensityOperator):
            _same_dims(self, other)
            return DensityOperator(
                self.mode_dims, self.matrix @ other.matrix @ self.matrix.conj().T
            )
        return NotImplemented


State = Union[FockKet, DensityOperator]


def _same_dims(a, b):
    if tuple(a.mode_dims) != tuple(b.mode_dims):
        raise InvalidDimensionError(f"mode_dims mismatch: {a.mode_dims} vs {b.mode_dims}")


def unitarity_defect(matrix):
    m = np.asarray(matrix)
    return float(np.max(np.abs(m.conj().T @ m - np.eye(m.shape[0]))))


# -- single-mode operators ---------------------------------------------------


def annihilation_matrix(dim):
    if dim < 2:
        raise InvalidDimensionError(f"cutoff dimension must be >= 2, got {dim}")
    return np.diag(np.sqrt(np.arange(1, dim)), k=1).astype(complex)


def annihilation_op(dim: int) -> FockOperator:
    return FockOperator((dim,), annihilation_matrix(dim))


def number_op(dim: int) -> FockOperator:
    return FockOperator((dim,), np.diag(np.arange(dim)).astype(complex))


def coherent_leakage(alpha, dim):
    """Poisson weight of a coherent state beyond the cutoff."""
    return float(poisson.sf(dim - 1, abs(alpha) ** 2))


def displacement_op(alpha: complex, dim: int) -> FockOperator:
    """Displacement operator exp(alpha a^dag - alpha* a) on the truncated space.

    The truncated generator is exponentiated directly. Columns near the cutoff
    are not faithful, so the call is refused when the coherent-state leakage
    estimate or the ``|alpha|^2 <= dim/4`` guard is violated.
    """
    a = annihilation_matrix(dim)
    leak = coherent_leakage(alpha, dim)
    if abs(alpha) ** 2 > dim / 4 or leak > LEAKAGE_TOL:
        raise TruncationLeakageError(
            f"|alpha|^2={abs(alpha) ** 2:.3g} too large for cutoff {dim} "
            f"(leakage {leak:.3g})",
            leak,
        )
    gen = alpha * a.conj().T - np.conj(alpha) * a
    return FockOperator((dim,), expm(gen), unitary=True)


def displacement_elements(alpha, rows, cols=None):
    """Exact matrix elements <m|D(alpha)|n> for m < rows, n < cols.

    ``alpha`` may be an array; the result then has shape
    ``alpha.shape + (rows, cols)``. Unlike ``displacement_op`` this is the
    projection of the infinite-dimensional operator, so it has no
    truncation artefacts in the retained block.
    """
    cols = rows if cols is None else cols
    alpha = np.asarray(alpha, dtype=complex)
    out = np.zeros(alpha.shape + (rows, cols), dtype=complex)
    out[..., 0, 0] = np.exp(-np.abs(alpha) ** 2 / 2)
    ac = -np.conj(alpha)
    for m in range(1, rows):
        out[..., m, 0] = alpha * out[..., m - 1, 0] / math.sqrt(m)
    # D|n> = (a^dag - alpha*) D|n-1> / sqrt(n)
    sq = np.sqrt(np.arange(rows))
    for n in range(1, cols):
        col = ac[..., None] * out[..., :, n - 1]
        col[..., 1:] += sq[1:] * out[..., :-1, n - 1]
        out[..., :, n] = col / math.sqrt(n)
    return out


def phase_op(phi, dim):
    return FockOperator((dim,), np.diag(np.exp(1j * phi * np.arange(dim))), unitary=True)


# -- multimode linear optics -------------------------------------------------


def _mode_ladders(mode_dims):
    """Annihilation operators for each mode, embedded in the full space."""
    ops = []
    for k, d in enumerate(mode_dims):
        mats = [np.eye(dk) for dk in mode_dims]
        mats[k] = annihilation_matrix(d) if d >= 2 else np.zeros((1, 1))
        full = mats[0]
        for m in mats[1:]:
            full = np.kron(full, m)
        ops.append(full)
    return ops


def beamsplitter_op(transmissivity: float, dim_a: int, dim_b: int) -> FockOperator:
    """Two-mode beamsplitter exp[theta (a^dag b - a b^dag)], cos(theta) = sqrt(tau).

    Exact on every total-photon sector that fits inside both cutoffs; sectors
    clipped by the cutoff are still block diagonal but not unitary, so the
    returned operator is not flagged unitary unless it passes the check.
    """
    tau = float(transmissivity)
    if not 0.0 <= tau <= 1.0:
        raise InvalidParameterError(f"transmissivity must lie in [0, 1], got {tau}")
    theta = math.acos(math.sqrt(tau))
    a, b = _mode_ladders((dim_a, dim_b))
    gen = theta * (a.conj().T @ b - a @ b.conj().T)
    mat = expm(gen)
    return FockOperator((dim_a, dim_b), mat, unitary=unitarity_defect(mat) <= UNITARY_TOL)


def passive_op(u, mode_dims) -> FockOperator:
    """Fock representation of a passive linear-optics network.

    ``u`` is the N x N mode unitary acting as ``a_j^dag -> sum_k u[k, j] a_k^dag``.
    The result is exact on all sectors with total photon number below
    ``min(mode_dims)``.
    """
    u = np.asarray(u, dtype=complex)
    if u.shape != (len(mode_dims), len(mode_dims)):
        raise InvalidDimensionError("mode unitary does not match the number of modes")
    if unitarity_defect(u) > UNITARY_TOL:
        raise ValidationError("mode transformation is not unitary")
    # u = exp(i h); the Fock generator is sum_jk h[k, j] a_k^dag a_j.
    evals, evecs = np.linalg.eig(u)
    h = evecs @ np.diag(np.angle(evals)) @ np.linalg.inv(evecs)
    ladders = _mode_ladders(tuple(mode_dims))
    gen = np.zeros((math.prod(mode_dims),) * 2, dtype=complex)
    for k, ak in enumerate(ladders):
        for j, aj in enumerate(ladders):
            if abs(h[k, j]) > 0:
                gen += h[k, j] * (ak.conj().T @ aj)
    return FockOperator(tuple(mode_dims), expm(1j * gen))


def dft_unitary(n):
    """Balanced N-port: |u_jk|^2 = 1/N."""
    j, k = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    return np.exp(2j * np.pi * j * k / n) / math.sqrt(n)


# -- composition -------------------------------------------------------------


def tensor(*parts):
    """Tensor product of kets, density operators or operators of one kind."""
    if not parts:
        raise ValueError("tensor() needs at least one argument")
    kind = type(parts[0])
    if any(type(p) is not kind for p in parts):
        raise TypeError("tensor() arguments must all be the same kind")
    dims = tuple(d for p in parts for d in p.mode_dims)
    if kind is FockKet:
        amps = parts[0].amps
        for p in parts[1:]:
            amps = np.kron(amps, p.amps)
        return FockKet(dims, amps, any(p.heralded for p in parts))
    mats = [p.matrix for p in parts]
    full = mats[0]
    for m in mats[1:]:
        full = np.kron(full, m)
    if kind is DensityOperator:
        return DensityOperator(dims, full)
    return FockOperator(dims, full, all(p.unitary for p in parts))


def _check_modes(modes, n_modes):
    modes = [int(m) for m in modes]
    if any(m < 0 or m >= n_modes for m in modes):
        raise IndexError(f"mode index out of range in {modes} for {n_modes} modes")
    if len(set(modes)) != len(modes):
        raise IndexError(f"repeated mode index in {modes}")
    return modes


def partial_trace(rho: DensityOperator, keep: Sequence[int]) -> DensityOperator:
    keep = _check_modes(keep, rho.n_modes)
    n = rho.n_modes
    drop = [k for k in range(n) if k not in keep]
    t = rho.tensor()
    letters = "abcdefghijklmnopqrstuvwxyz"
    row = [letters[k] for k in range(n)]
    col = [letters[k].upper() for k in range(n)]
    for k in drop:
        col[k] = row[k]
    out = "".join(row[k] for k in keep) + "".join(col[k] for k in keep)
    t = np.einsum("".join(row) + "".join(col) + "->" + out, t)
    dims = tuple(rho.mode_dims[k] for k in keep)
    side = math.prod(dims)
    return DensityOperator(dims, t.reshape(side, side))


def apply_local(matrix, state, modes, out_dims=None):
    """Apply a (possibly rectangular) operator to a subset of modes.

    ``matrix`` maps the product space of ``modes`` (in the order given) to a
    space with per-mode dimensions ``out_dims`` (defaults to the input ones).
    Kets get ``M psi``; density operators get ``M rho M^dag``.
    """
    modes = _check_modes(modes, state.n_modes)
    in_dims = tuple(state.mode_dims[m] for m in modes)
    out_dims = in_dims if out_dims is None else tuple(out_dims)
    matrix = np.asarray(matrix, dtype=complex)
    if matrix.shape != (math.prod(out_dims), math.prod(in_dims)):
        raise InvalidDimensionError(
            f"operator shape {matrix.shape} incompatible with modes {modes}"
        )
    new_dims = list(state.mode_dims)
    for m, d in zip(modes, out_dims):
        new_dims[m] = d
    new_dims = tuple(new_dims)
    n = state.n_modes
    k = len(modes)

    def left(t, offset):
        # t has 'n' axes starting at offset which index one side of the state
        axes = [offset + m for m in modes]
        t = np.moveaxis(t, axes, list(range(offset, offset + k)))
        shp = t.shape
        lead = shp[:offset]
        t = t.reshape(lead + (math.prod(in_dims), -1))
        t = np.einsum("ij,...jk->...ik", matrix, t)
        t = t.reshape(lead + out_dims + tuple(shp[offset + k:]))
        return np.moveaxis(t, list(range(offset, offset + k)), axes)

    if isinstance(state, FockKet):
        t = left(state.tensor(), 0)
        return FockKet(new_dims, t.ravel(), state.heralded)
    t = state.matrix.reshape(state.mode_dims + state.mode_dims)
    t = left(t, 0)
    t = np.conj(left(np.conj(t), n))
    side = math.prod(new_dims)
    return DensityOperator(new_dims, t.reshape(side, side))


# -- metrics -----------------------------------------------------------------


def _psd_sqrt(m):
    evals, evecs = np.linalg.eigh((m + m.conj().T) / 2)
    evals = np.clip(evals, 0.0, None)
    return (evecs * np.sqrt(evals)) @ evecs.conj().T


def fidelity(rho: State, sigma: State) -> float:
    """Uhlmann fidelity (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2.

    Kets are handled without forming square roots, so the pure-pure case
    reduces to ``|<psi|phi>|^2``.
    """
    _same_dims(rho, sigma)
    if isinstance(rho, FockKet) and isinstance(sigma, FockKet):
        return float(min(1.0, abs(np.vdot(rho.amps, sigma.amps)) ** 2))
    if isinstance(rho, FockKet) or isinstance(sigma, FockKet):
        ket, dm = (rho, sigma) if isinstance(rho, FockKet) else (sigma, rho)
        dm.validate()
        return float(min(1.0, max(0.0, np.real(np.vdot(ket.amps, dm.matrix @ ket.amps)))))
    rho.validate()
    sigma.validate()
    s = _psd_sqrt(rho.matrix) @ _psd_sqrt(sigma.matrix)
    val = np.sum(np.linalg.svd(s, compute_uv=False)) ** 2
    return float(min(1.0, max(0.0, val)))


def recommend_cutoff(chi: float, tol: float = 1e-8) -> int:
    """Smallest per-mode cutoff with neglected EPR weight chi^(2 dim) < tol."""
    if not 0.0 <= chi < 1.0:
        raise InvalidParameterError(f"chi must lie in [0, 1), got {chi}")
    if chi == 0.0:
        return 2
    return max(2, math.floor(math.log(tol) / (2 * math.log(chi))) + 1)
