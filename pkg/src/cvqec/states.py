"""State factories, the pure-loss channel, Choi states and loss fitting."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import gammaln

from .errors import InvalidParameterError, TruncationLeakageError, ValidationError
from .fock import (
    LEAKAGE_TOL,
    DensityOperator,
    FockKet,
    annihilation_matrix,
    apply_local,
    coherent_leakage,
    fidelity,
)

KRAUS_TOL = 1e-9


@dataclass(frozen=True)
class EprParams:
    chi: float
    V: float

    def __post_init__(self):
        if not 0.0 <= self.chi < 1.0:
            raise InvalidParameterError(f"chi must lie in [0, 1), got {self.chi}")
        if abs(self.V - (1 + self.chi) / (1 - self.chi)) > 1e-12 * max(1.0, self.V):
            raise InvalidParameterError("V and chi are inconsistent")

    @classmethod
    def from_chi(cls, chi):
        if not 0.0 <= chi < 1.0:
            raise InvalidParameterError(f"chi must lie in [0, 1), got {chi}")
        return cls(chi, (1 + chi) / (1 - chi))

    @classmethod
    def from_V(cls, V):
        if V < 1:
            raise InvalidParameterError(f"V must be >= 1, got {V}")
        return cls((V - 1) / (V + 1), V)


# -- kets --------------------------------------------------------------------


def vacuum_ket(dim: int) -> FockKet:
    amps = np.zeros(dim, dtype=complex)
    amps[0] = 1
    return FockKet((dim,), amps)


def fock_ket(n: int, dim: int) -> FockKet:
    if not 0 <= n < dim:
        raise InvalidParameterError(f"|{n}> does not fit in cutoff {dim}")
    amps = np.zeros(dim, dtype=complex)
    amps[n] = 1
    return FockKet((dim,), amps)


def single_photon_ket(dim: int) -> FockKet:
    return fock_ket(1, dim)


def coherent_amplitudes(alpha, dim):
    n = np.arange(dim)
    if alpha == 0:
        return (n == 0).astype(complex)
    logmag = -abs(alpha) ** 2 / 2 + n * math.log(abs(alpha)) - 0.5 * gammaln(n + 1)
    return np.exp(logmag) * np.exp(1j * n * np.angle(alpha))


def coherent_ket(alpha: complex, dim: int) -> FockKet:
    """Normalized coherent state; refused when the cutoff clips more than 1e-6."""
    leak = coherent_leakage(alpha, dim)
    if leak > LEAKAGE_TOL:
        raise TruncationLeakageError(
            f"coherent({alpha}) leaks {leak:.3g} beyond cutoff {dim}", leak
        )
    return FockKet((dim,), coherent_amplitudes(alpha, dim)).normalize()


def epr_ket(chi: float, dim_a: int, dim_b: int | None = None) -> FockKet:
    """Two-mode squeezed vacuum sqrt(1-chi^2) sum chi^n |n,n>, renormalized.

    The weight removed by the cutoff is ``chi**(2*min(dims))``; callers who
    need it can read it from ``epr_tail``.
    """
    dim_b = dim_a if dim_b is None else dim_b
    if not 0.0 <= chi < 1.0:
        raise InvalidParameterError(f"chi must lie in [0, 1), got {chi}")
    m = min(dim_a, dim_b)
    amps = np.zeros((dim_a, dim_b), dtype=complex)
    amps[np.arange(m), np.arange(m)] = math.sqrt(1 - chi**2) * chi ** np.arange(m)
    return FockKet((dim_a, dim_b), amps).normalize()


def epr_tail(chi, dim_a, dim_b=None):
    dim_b = dim_a if dim_b is None else dim_b
    return chi ** (2 * min(dim_a, dim_b))


def thermal_dm(nbar, dim):
    n = np.arange(dim)
    p = nbar**n / (1 + nbar) ** (n + 1)
    return DensityOperator((dim,), np.diag(p / p.sum()))


# -- channels ----------------------------------------------------------------


@dataclass(frozen=True)
class QuantumChannel:
    """Completely positive map on one set of modes, stored as Kraus operators.

    A heralded channel is trace decreasing; its success probability for an
    input is the output trace.
    """

    mode_dims: tuple
    kraus: tuple
    trace_preserving: bool = True
    heralded: bool = False

    def __post_init__(self):
        dims = tuple(int(d) for d in self.mode_dims)
        n = math.prod(dims)
        ks = []
        for k in self.kraus:
            k = np.array(k, dtype=complex)
            if k.shape != (n, n):
                raise ValidationError(f"Kraus operator of shape {k.shape}, expected {(n, n)}")
            k.setflags(write=False)
            ks.append(k)
        if not ks:
            raise ValidationError("channel needs at least one Kraus operator")
        object.__setattr__(self, "mode_dims", dims)
        object.__setattr__(self, "kraus", tuple(ks))
        gram = self.kraus_sum()
        dev = np.linalg.eigvalsh(gram - np.eye(n))
        if self.trace_preserving and np.max(np.abs(dev)) > KRAUS_TOL:
            raise ValidationError(f"Kraus sum deviates from identity by {np.max(np.abs(dev)):.3g}")
        if dev[-1] > KRAUS_TOL:
            raise ValidationError(f"Kraus sum exceeds identity by {dev[-1]:.3g}")

    @property
    def dim(self):
        return math.prod(self.mode_dims)

    def kraus_sum(self):
        return sum(k.conj().T @ k for k in self.kraus)

    def apply(self, state, modes: Sequence[int] | None = None) -> DensityOperator:
        """Apply the channel, optionally to a subset of modes of a larger state."""
        rho = state.dm() if isinstance(state, FockKet) else state
        if modes is None:
            modes = list(range(len(self.mode_dims)))
        out = None
        for k in self.kraus:
            term = apply_local(k, rho, modes).matrix
            out = term if out is None else out + term
        return DensityOperator(rho.mode_dims, out)

    def then(self, other: "QuantumChannel") -> "QuantumChannel":
        """Sequential composition: ``self`` first, then ``other``."""
        if other.mode_dims != self.mode_dims:
            raise ValidationError("cannot compose channels on different spaces")
        ks = [b @ a for a in self.kraus for b in other.kraus]
        ks = [k for k in ks if np.any(np.abs(k) > 0)] or ks[:1]
        return QuantumChannel(
            self.mode_dims,
            tuple(ks),
            self.trace_preserving and other.trace_preserving,
            self.heralded or other.heralded,
        )

    @classmethod
    def from_choi(cls, choi: DensityOperator, *, heralded=False, tol=1e-14):
        """Rebuild a channel from a normalized Choi state of ``choi_state`` form."""
        d = choi.mode_dims[0]
        m = choi.matrix * d
        evals, evecs = np.linalg.eigh((m + m.conj().T) / 2)
        ks = []
        for lam, v in zip(evals, evecs.T):
            if lam > tol * max(1.0, evals[-1]):
                # Choi ordering is (output, reference): K[i, j] = sqrt(lam) v[i, j]
                ks.append(math.sqrt(lam) * v.reshape(d, d))
        return cls((d,), tuple(ks), trace_preserving=not heralded, heralded=heralded)


def identity_channel(dim: int) -> QuantumChannel:
    return QuantumChannel((dim,), (np.eye(dim),))


def loss_kraus(eta, dim):
    n = np.arange(dim)
    a = annihilation_matrix(dim) if dim >= 2 else np.zeros((1, 1))
    eta_n = np.diag(np.sqrt(float(eta)) ** n)
    ks = []
    ak = np.eye(dim, dtype=complex)
    for k in range(dim):
        ks.append(math.sqrt((1 - eta) ** k / math.factorial(k)) * eta_n @ ak)
        ak = ak @ a
    return ks


def loss_channel(eta: float, dim: int) -> QuantumChannel:
    """Pure-loss channel of transmission ``eta``.

    Kraus operators ``K_k = sqrt((1-eta)^k / k!) eta^(n/2) a^k``; they never
    raise photon number, so the truncated set is exactly trace preserving.
    """
    if not 0.0 <= eta <= 1.0:
        raise InvalidParameterError(f"eta must lie in [0, 1], got {eta}")
    ks = loss_kraus(eta, dim)
    if eta == 1.0:
        ks = ks[:1]
    return QuantumChannel((dim,), tuple(ks))


def choi_state(channel: QuantumChannel) -> DensityOperator:
    """(channel x id) applied to sum_n |n,n>/sqrt(d); mode 0 is the channel output."""
    d = channel.dim
    out = np.zeros((d * d, d * d), dtype=complex)
    for k in channel.kraus:
        # vec of K with (output, reference) ordering
        v = k.reshape(-1)
        out += np.outer(v, v.conj())
    return DensityOperator((d, d), out / d)


@dataclass(frozen=True)
class LossFit:
    eta_est: float
    residual: float
    trace_defect: float = 0.0


def _golden_max(f, lo, hi, tol):
    invphi = (math.sqrt(5) - 1) / 2
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    x = (a + b) / 2
    return x, f(x)


def fit_loss(channel, *, tol: float = 1e-6, trace_tol: float = 1e-3) -> LossFit:
    """Transmission of the pure-loss channel closest to ``channel`` in Choi fidelity.

    ``channel`` is a single-mode ``QuantumChannel`` or its Choi state. A Choi
    state whose trace falls short of one by more than ``trace_tol`` is
    rejected unless the channel is flagged heralded; otherwise it is
    renormalized before comparison and the shortfall is reported.
    """
    if isinstance(channel, QuantumChannel):
        if len(channel.mode_dims) != 1:
            raise ValidationError("fit_loss needs a single-mode channel")
        heralded = channel.heralded
        choi = choi_state(channel)
    else:
        heralded = False
        choi = channel
    d = choi.mode_dims[0]
    defect = 1.0 - choi.trace
    if abs(defect) > trace_tol and not heralded:
        raise ValidationError(
            f"channel is not trace preserving (trace defect {defect:.3g}); "
            "flag it heralded to fit its normalized form"
        )
    target = choi.normalize()

    def score(eta):
        return fidelity(target, choi_state(loss_channel(eta, d)))

    eta, best = _golden_max(score, 0.0, 1.0, tol)
    for edge in (0.0, 1.0):
        f_edge = score(edge)
        if f_edge > best:
            eta, best = edge, f_edge
    return LossFit(float(eta), float(max(0.0, 1.0 - best)), float(defect))


def mean_field_transmission(channel: QuantumChannel, alpha: complex = 0.1) -> float:
    """|<a>_out / alpha|^2 for a coherent probe; a cheap gain diagnostic."""
    d = channel.dim
    rho = channel.apply(coherent_ket(alpha, d))
    mean = np.trace(rho.matrix @ annihilation_matrix(d)) / rho.trace
    return float(abs(mean / alpha) ** 2)
