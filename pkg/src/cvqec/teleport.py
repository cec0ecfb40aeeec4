"""Gain-tuned continuous-variable teleportation.

Closed forms for the classical gain and the resulting loss-equivalent
transmission, plus a numerical teleporter that integrates the dual-homodyne
(Bell) measurement over a square grid of outcomes.

The Bell projector for outcome ``gamma`` is ``(D(gamma) x I) sum_n |n,n>`` with
POVM density ``d^2 gamma / pi``. Bob displaces his mode by ``amp_gain *
gamma``, where ``amp_gain = sqrt(lambda)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import GridTooCoarseError, InvalidParameterError, OutOfModelError
from .fock import DensityOperator, FockKet, displacement_elements
from .states import LossFit, fit_loss

COMPLETENESS_TOL = 1e-3
BATCH = 256
PROBE_LEVELS = 3


@dataclass(frozen=True)
class TeleportGain:
    lam: float
    amp_gain: float

    def __post_init__(self):
        if self.lam < 0:
            raise InvalidParameterError(f"gain must be non-negative, got {self.lam}")
        if abs(self.amp_gain**2 - self.lam) > 1e-12:
            raise InvalidParameterError("amp_gain**2 must equal lam")

    @classmethod
    def from_lambda(cls, lam):
        return cls(float(lam), math.sqrt(lam))


def classical_gain(chi: float) -> TeleportGain:
    """Intensity gain ((V-1)/(V+1))^2 with V = (1+chi)/(1-chi); equals chi^2."""
    if not 0.0 <= chi < 1.0:
        raise InvalidParameterError(f"chi must lie in [0, 1), got {chi}")
    V = (1 + chi) / (1 - chi)
    lam = ((V - 1) / (V + 1)) ** 2
    assert abs(lam - chi**2) <= 1e-12
    return TeleportGain.from_lambda(lam)


def lossy_gain(chi: float, eta: float) -> TeleportGain:
    """Gain eta * lambda(chi) for entanglement distributed through loss eta."""
    if not 0.0 <= eta <= 1.0:
        raise InvalidParameterError(f"eta must lie in [0, 1], got {eta}")
    return TeleportGain.from_lambda(eta * classical_gain(chi).lam)


def effective_teleport_channel(chi: float, eta: float, gain: TeleportGain | None = None) -> float:
    """Transmission of the loss channel the teleporter is equivalent to.

    Only the gain ``eta * lambda(chi)`` is loss-equivalent; any other gain
    raises ``OutOfModelError``.
    """
    expected = lossy_gain(chi, eta)
    if gain is None:
        gain = expected
    if abs(gain.lam - expected.lam) > 1e-12:
        raise OutOfModelError(
            f"gain {gain.lam:.6g} is not the loss-equivalent gain {expected.lam:.6g}"
        )
    return expected.lam


def auto_grid(chi: float, step: float = 0.25, tol: float = 1e-7) -> "BellGrid":
    """Grid whose extent leaves Bell-outcome weight below ``tol`` outside it.

    For vacuum input the outcome density is Gaussian with variance
    ``1/(1-chi^2)``, so its tail beyond radius R is ``exp(-(1-chi^2) R^2)``;
    one unit of margin covers low-photon inputs.
    """
    extent = math.sqrt(math.log(1 / tol) / (1 - chi**2)) + 1.0
    extent = step * math.ceil(extent / step)
    return BellGrid(extent, step)


@dataclass(frozen=True)
class BellGrid:
    """Midpoint grid on the square [-R, R]^2 of complex Bell outcomes."""

    extent: float = 6.0
    step: float = 0.25

    def __post_init__(self):
        if self.extent <= 0 or self.step <= 0:
            raise InvalidParameterError("grid extent and step must be positive")

    @property
    def n_side(self):
        return max(1, int(round(2 * self.extent / self.step)))

    @cached_property
    def points(self):
        x = -self.extent + self.step * (np.arange(self.n_side) + 0.5)
        re, im = np.meshgrid(x, x, indexing="ij")
        return (re + 1j * im).ravel()

    @property
    def weight(self):
        return self.step**2 / math.pi


def bell_projector(gamma: complex, dims) -> np.ndarray:
    """Unnormalized rank-1 projector onto (D(gamma) x I) sum_n |n,n>.

    ``dims = (dim_in, dim_a)``; the ket is truncated to those cutoffs. The
    POVM element is this matrix times ``d^2 gamma / pi``.
    """
    d_in, d_a = dims
    ket = displacement_elements(gamma, d_in, d_a)  # ket[i, a] = <i|D|a>
    v = ket.reshape(-1)
    return np.outer(v, v.conj())


def completeness_defect(grid: BellGrid, dim: int) -> float:
    """max |w sum_grid Pi_gamma - I| on the subspace with both modes below ``dim``."""
    acc = np.zeros((dim * dim, dim * dim), dtype=complex)
    for start in range(0, grid.points.size, BATCH):
        d = displacement_elements(grid.points[start:start + BATCH], dim, dim)
        v = d.reshape(d.shape[0], -1)
        acc += v.T @ v.conj()
    return float(np.max(np.abs(grid.weight * acc - np.eye(dim * dim))))


def resource_components(resource):
    """Pure components of a two-mode resource, stacked as (k, d_a, d_b).

    ``resource`` is a ``DensityOperator`` (decomposed by eigenvalues) or a
    sequence of amplitude matrices ``psi_k[a, b]`` with ``sum ||psi_k||^2 = 1``.
    """
    if isinstance(resource, DensityOperator):
        d_a, d_b = resource.mode_dims
        m = resource.matrix
        evals, evecs = np.linalg.eigh((m + m.conj().T) / 2)
        keep = evals > 1e-13 * max(evals[-1], 0.0)
        comps = (evecs[:, keep] * np.sqrt(evals[keep])).T
        return comps.reshape(-1, d_a, d_b)
    return np.stack([np.asarray(c, dtype=complex) for c in resource])


def _pure_components(rho: DensityOperator, rel_tol=1e-13):
    evals, evecs = np.linalg.eigh((rho.matrix + rho.matrix.conj().T) / 2)
    keep = evals > rel_tol * max(evals[-1], 0.0)
    return evecs[:, keep] * np.sqrt(evals[keep])


def _teleport_core(inputs, resource, gain: TeleportGain, grid: BellGrid, d_out):
    """Teleport a batch of input kets carrying an untouched reference index.

    ``inputs`` has shape (n_ref, d_in). Returns the output operator on
    (out, ref) and the pre-displacement trace, which measures how well the
    grid resolves the identity on the occupied subspace.
    """
    psi = resource_components(resource)
    _, d_a, d_b = psi.shape
    d_in = inputs.shape[1]
    n_ref = inputs.shape[0]
    acc = np.zeros((d_out * n_ref, d_out * n_ref), dtype=complex)
    bob_trace = 0.0
    for start in range(0, grid.points.size, BATCH):
        g = grid.points[start:start + BATCH]
        d_bell = displacement_elements(g, d_in, d_a)
        d_bob = displacement_elements(gain.amp_gain * g, d_out, d_b)
        # Bob's conditional ket: sum_{i,a} phi[r,i] conj(D[i,a]) psi[a,b]
        t = np.einsum("ri,gia->gra", inputs, d_bell.conj(), optimize=True)
        bob = np.einsum("gra,kab->gkrb", t, psi, optimize=True)
        bob_trace += float(np.sum(np.abs(bob) ** 2))
        out = np.einsum("gmb,gkrb->gkmr", d_bob, bob, optimize=True)
        x = out.reshape(-1, d_out * n_ref)
        acc += x.T @ x.conj()
    return grid.weight * acc, grid.weight * bob_trace


def _check_grid(grid, weighted_trace, probe_dim, tol):
    # weighted_trace covers the occupied subspace; the explicit identity check
    # is limited to the few lowest levels
    defect = max(abs(1.0 - weighted_trace), completeness_defect(grid, min(probe_dim, PROBE_LEVELS)))
    if defect > tol:
        raise GridTooCoarseError(
            f"Bell grid (R={grid.extent}, step={grid.step}) leaves completeness "
            f"defect {defect:.3g} > {tol:g}",
            defect,
        )
    return defect


def teleport_oracle(
    rho_in,
    resource,
    gain: TeleportGain,
    grid: BellGrid = BellGrid(),
    *,
    out_dim: int | None = None,
    tol: float = COMPLETENESS_TOL,
) -> DensityOperator:
    """Teleport ``rho_in`` with the two-mode ``resource`` (mode 0 is Alice's arm).

    ``resource`` is a ``DensityOperator`` or a list of pure components, see
    ``resource_components``.

    The returned operator is not renormalized; ``1 - trace`` is the combined
    grid and cutoff defect.
    """
    rho = rho_in.dm() if isinstance(rho_in, FockKet) else rho_in
    d_in = rho.mode_dims[0]
    out_dim = d_in if out_dim is None else out_dim
    comps = _pure_components(rho).T  # (n_components, d_in)
    acc, bob_trace = _teleport_core(comps, resource, gain, grid, out_dim)
    _check_grid(grid, bob_trace / rho.trace, d_in, tol)
    return DensityOperator((out_dim,), acc)


@dataclass(frozen=True)
class TeleportChannel:
    """Choi state of the teleporter restricted to inputs below ``in_dim``."""

    choi: DensityOperator
    trace_defect: float
    completeness_defect: float

    def fit(self) -> LossFit:
        return fit_loss(self.choi, trace_tol=max(1e-3, 2 * abs(self.trace_defect)))


def teleport_channel(
    resource,
    gain: TeleportGain,
    grid: BellGrid = BellGrid(),
    *,
    in_dim: int = 4,
    tol: float = COMPLETENESS_TOL,
) -> TeleportChannel:
    """Choi state of the teleporter acting on the lowest ``in_dim`` Fock levels.

    The resource cutoff should exceed ``in_dim`` comfortably: high input
    levels couple to resource levels far above the input cutoff.
    """
    refs = np.eye(in_dim, dtype=complex) / math.sqrt(in_dim)  # phi[r, i]
    acc, bob_trace = _teleport_core(refs, resource, gain, grid, in_dim)
    defect = _check_grid(grid, bob_trace, in_dim, tol)
    choi = DensityOperator((in_dim, in_dim), acc)
    return TeleportChannel(choi, 1.0 - choi.trace, defect)
