"""Heralded noiseless linear amplification.

Two device models are provided: the ideal amplifier ``|n> -> G^(n/2) |n>``
(normalized by its largest eigenvalue at the cutoff) and the linear-optics
construction that fans the input over N quantum-scissors units.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import gammaln

from .errors import (
    DegenerateHeraldError,
    InvalidParameterError,
    ResourceError,
    UnphysicalOutputError,
)
from .fock import (
    DensityOperator,
    FockKet,
    apply_local,
    beamsplitter_op,
    dft_unitary,
    fidelity,
    passive_op,
)
from .states import QuantumChannel, epr_ket, loss_kraus

MEMORY_BUDGET = 512 * 2**20


@dataclass(frozen=True)
class NlaConfig:
    gain: float
    paths: int = 1
    detectors: str = "either"

    def __post_init__(self):
        if self.gain < 1:
            raise InvalidParameterError(f"NLA gain must be >= 1, got {self.gain}")
        if int(self.paths) != self.paths or self.paths < 1:
            raise InvalidParameterError(f"paths must be a positive integer, got {self.paths}")
        if self.detectors not in ("either", "designated"):
            raise InvalidParameterError(f"unknown detector mode {self.detectors!r}")


@dataclass(frozen=True)
class HeraldedOutcome:
    state: object
    p_success: float

    def __post_init__(self):
        if not -1e-12 <= self.p_success <= 1 + 1e-12:
            raise InvalidParameterError(f"success probability {self.p_success} outside [0, 1]")
        object.__setattr__(self, "p_success", float(min(1.0, max(0.0, self.p_success))))


@dataclass(frozen=True)
class EnsembleSpec:
    V_t: float
    V_t_prime: float

    def __post_init__(self):
        if not 1.0 <= self.V_t <= self.V_t_prime:
            raise InvalidParameterError("need 1 <= V_t <= V_t_prime")


def _herald(matrix, state, mode):
    """Apply a single Kraus operator to ``mode`` and split off its probability."""
    out = apply_local(matrix, state, [mode])
    if isinstance(out, FockKet):
        p = out.norm**2
        if p <= 0:
            raise DegenerateHeraldError("herald has zero probability for this input")
        return HeraldedOutcome(out.normalize(), p)
    p = out.trace
    if p <= 0:
        raise DegenerateHeraldError("herald has zero probability for this input")
    return HeraldedOutcome(out.normalize(), p)


# -- ideal amplifier ---------------------------------------------------------


def ideal_nla_matrix(gain, dim):
    n = np.arange(dim)
    return np.diag(float(gain) ** ((n - (dim - 1)) / 2)).astype(complex)


def ideal_nla(config: NlaConfig, state, mode: int = 0) -> HeraldedOutcome:
    """Heralded ``G^(n/2)`` on one mode, scaled by ``G^(-n_max/2)``.

    That scaling is the most probable physical device at the cutoff, so
    ``p_success`` is the maximum allowed by the truncated model rather than
    a statement about any particular implementation.
    """
    dim = state.mode_dims[mode]
    return _herald(ideal_nla_matrix(config.gain, dim), state, mode)


def gaussian_ensemble_bound(spec: EnsembleSpec) -> float:
    """Success bound (V_t - 1)/(V_t' - 1) for amplifying a coherent-state ensemble.

    Clamped to 1. A degenerate ensemble (V_t = V_t' = 1) is unconstrained and
    returns 1; V_t = 1 < V_t' returns 0.
    """
    if spec.V_t_prime == 1.0:
        return 1.0
    return min(1.0, (spec.V_t - 1) / (spec.V_t_prime - 1))


def effective_epr_params(chi: float, eta: float, gain: float):
    """(chi_eff, eta_eff) of lossy EPR after ideal amplification of the lossy arm."""
    if not 0.0 <= chi < 1.0:
        raise InvalidParameterError(f"chi must lie in [0, 1), got {chi}")
    if not 0.0 <= eta <= 1.0:
        raise InvalidParameterError(f"eta must lie in [0, 1], got {eta}")
    if gain < 1:
        raise InvalidParameterError(f"NLA gain must be >= 1, got {gain}")
    scale = 1 + (gain - 1) * eta
    chi_eff = chi * math.sqrt(scale)
    if chi_eff >= 1:
        raise UnphysicalOutputError(
            f"chi_eff = {chi_eff:.6g} >= 1: gain {gain} is beyond the physical limit"
        )
    return chi_eff, gain * eta / scale


def success_bound(chi: float, eta: float, gain: float) -> float:
    """Upper bound on heralding probability when amplifying lossy EPR; clamped to [0, 1]."""
    scale = 1 + (gain - 1) * eta
    if chi**2 * scale >= 1:
        return 0.0
    raw = (1 - chi**2 * scale) / (scale * (1 - chi**2))
    return float(min(1.0, max(0.0, raw)))


def lossy_epr_components(chi, eta, dim_a, dim_b=None, prune=1e-18):
    """Pure components ``psi_k[a, b]`` of EPR(chi) with Bob's arm through loss.

    One component per loss Kraus operator. The EPR state is built with
    ``dim_a`` levels on both arms and Bob's arm is cropped to ``dim_b`` only
    after the loss, so a small ``dim_b`` does not clip the entanglement.
    Components are renormalized jointly.
    """
    dim_b = dim_a if dim_b is None else dim_b
    psi = epr_ket(chi, dim_a).tensor()
    comps = [psi @ k.T[:, :dim_b] for k in loss_kraus(eta, dim_a)]
    weights = [np.sum(np.abs(c) ** 2) for c in comps]
    total = sum(weights)
    return [c / math.sqrt(total) for c, w in zip(comps, weights) if w > prune * total]


def components_dm(comps) -> DensityOperator:
    d_a, d_b = comps[0].shape
    vecs = np.stack([c.reshape(-1) for c in comps], axis=1)
    return DensityOperator((d_a, d_b), vecs @ vecs.conj().T)


def lossy_epr(chi, eta, dim_a, dim_b=None) -> DensityOperator:
    """EPR(chi) with Bob's arm (mode 1) sent through loss ``eta``."""
    return components_dm(lossy_epr_components(chi, eta, dim_a, dim_b))


def herald_components(comps, kraus):
    """Apply a heralded Kraus operator to Bob's arm of every component.

    Returns the renormalized components and the success probability.
    """
    out = [c @ np.asarray(kraus).T for c in comps]
    p = float(sum(np.sum(np.abs(c) ** 2) for c in out))
    if p <= 0:
        raise DegenerateHeraldError("herald has zero probability for this resource")
    return [c / math.sqrt(p) for c in out], p


@dataclass(frozen=True)
class EprIdentityReport:
    fidelity: float
    p_success: float
    p_bound: float
    chi_eff: float
    eta_eff: float
    tail: float


def verify_epr_identity(chi, eta, gain, dim) -> EprIdentityReport:
    """Compare amplified lossy EPR against lossy EPR at the effective parameters.

    ``p_success`` is the simulated ideal-device probability; ``p_bound`` the
    analytic upper bound. ``tail`` is the EPR weight the cutoff drops at the
    effective squeezing.
    """
    chi_eff, eta_eff = effective_epr_params(chi, eta, gain)
    out = ideal_nla(NlaConfig(gain), lossy_epr(chi, eta, dim), mode=1)
    ref = lossy_epr(chi_eff, eta_eff, dim)
    return EprIdentityReport(
        fidelity=fidelity(out.state, ref),
        p_success=out.p_success,
        p_bound=success_bound(chi, eta, gain),
        chi_eff=chi_eff,
        eta_eff=eta_eff,
        tail=chi_eff ** (2 * dim),
    )


# -- linear optics -----------------------------------------------------------


def scissors_kraus(unit_gain: float, dim: int, pattern=(1, 0)) -> np.ndarray:
    """Heralded Kraus operator of one scissors unit, by direct circuit simulation.

    Modes: signal s, ancilla output o, ancilla mixing arm m. The ancilla
    photon enters o and is split by a beamsplitter of transmissivity
    G/(1+G) between o and m; s and m are then mixed on a 50:50 beamsplitter
    and both are counted. ``pattern`` is the photon count on (s, m).
    Returns ``K[out, in]`` with in < dim and out in {0, 1} embedded in ``dim``.
    """
    if unit_gain < 1:
        raise InvalidParameterError(f"unit gain must be >= 1, got {unit_gain}")
    tau = unit_gain / (1 + unit_gain)
    ds, do, dm = dim + 1, 2, dim + 1
    # ancilla split on (o, m); both cutoffs hold the one-photon sector
    split = beamsplitter_op(tau, do, dm).matrix
    mix = beamsplitter_op(0.5, ds, dm).matrix
    split_full = np.kron(np.eye(ds), split)  # order (s, o, m)
    mix_full = np.einsum(
        "SMsm,Oo->SOMsom",
        mix.reshape(ds, dm, ds, dm),
        np.eye(do),
    ).reshape(ds * do * dm, ds * do * dm)
    circuit = mix_full @ split_full
    k = np.zeros((dim, dim), dtype=complex)
    ps, pm = pattern
    for n in range(dim):
        inp = np.zeros((ds, do, dm), dtype=complex)
        inp[n, 1, 0] = 1
        out = (circuit @ inp.ravel()).reshape(ds, do, dm)
        k[:do, n] = out[ps, :, pm]
    if not np.any(np.abs(k) > 1e-15):
        raise DegenerateHeraldError(f"herald pattern {pattern} never fires")
    return k


def scissors_unit(unit_gain: float, dim: int, detectors: str = "either") -> QuantumChannel:
    """Heralded one-mode map of a scissors unit.

    ``detectors="designated"`` accepts only one click on the signal-side
    detector. ``"either"`` also accepts the mirrored pattern, whose output
    differs by a pi phase on |1> that is undone by feed-forward, so both
    branches share one Kraus operator up to a global phase. The designated
    branch's sign is fixed so that |1> is amplified with a positive amplitude.
    """
    k = scissors_kraus(unit_gain, dim, (1, 0))
    if k[1, 1] != 0 and np.real(k[1, 1] / k[0, 0]) < 0:
        k = k @ np.diag((-1.0) ** np.arange(dim))
    k = k * np.exp(-1j * np.angle(k[0, 0]))
    if detectors == "either":
        k = math.sqrt(2) * k
    elif detectors != "designated":
        raise InvalidParameterError(f"unknown detector mode {detectors!r}")
    return QuantumChannel((dim,), (k,), trace_preserving=False, heralded=True)


@dataclass(frozen=True)
class FailureBranch:
    state: DensityOperator
    p_failure: float
    vacuum_fraction: float


def scissors_failure_branch(unit_gain: float, state, detectors: str = "either") -> FailureBranch:
    """Output of one scissors unit averaged over every non-heralding click pattern.

    The ensemble bound assumes a failed amplifier leaves vacuum; this measures
    how far the real circuit's failure output is from that.
    """
    rho = state.dm() if isinstance(state, FockKet) else state
    dim = rho.mode_dims[0]
    accepted = {(1, 0), (0, 1)} if detectors == "either" else {(1, 0)}
    out = np.zeros((dim, dim), dtype=complex)
    for pattern in itertools.product(range(dim + 1), repeat=2):
        if pattern in accepted or sum(pattern) > dim:
            continue
        try:
            k = scissors_kraus(unit_gain, dim, pattern)
        except DegenerateHeraldError:
            continue
        out += k @ rho.matrix @ k.conj().T
    p = float(np.real(np.trace(out)))
    if p <= 0:
        raise DegenerateHeraldError("failure branch has zero probability")
    return FailureBranch(DensityOperator((dim,), out / p), p, float(np.real(out[0, 0])) / p)


def scissors_device_kraus(config: NlaConfig, dim: int, budget: int = MEMORY_BUDGET) -> np.ndarray:
    """Kraus operator of the N-path scissors amplifier on a ``dim``-level input.

    The input is spread over N paths by a balanced DFT multiport with vacuum
    on the other ports, each path passes a scissors unit of gain G, the
    inverse multiport recombines them and the N-1 spare outputs must be
    empty. Simulated in the full N-mode Fock space.
    """
    n = config.paths
    d = max(dim, n + 1)
    side = d**n
    if side * side * 16 * 4 > budget:
        raise ResourceError(
            f"{n}-path simulation at cutoff {d} needs ~{side * side * 64 / 2**20:.0f} MiB; "
            f"reduce the cutoff or the number of paths"
        )
    unit = scissors_unit(config.gain, d, config.detectors).kraus[0]
    if n == 1:
        return unit[:dim, :dim]
    fan = passive_op(dft_unitary(n), (d,) * n).matrix
    local = unit
    for _ in range(n - 1):
        local = np.kron(local, unit)
    device = fan.conj().T @ local @ fan
    # input on port 0 with vacuum elsewhere; output on port 0 with vacuum elsewhere
    idx = np.arange(dim) * d ** (n - 1)
    return device[np.ix_(idx, idx)]


def scissors_nla(config: NlaConfig, state, mode: int = 0) -> HeraldedOutcome:
    dim = state.mode_dims[mode]
    return _herald(scissors_device_kraus(config, dim), state, mode)


def scissors_closed_form(config: NlaConfig, dim: int) -> np.ndarray:
    """Diagonal of the N-path device derived by counting photon paths.

    A photon pattern survives only when no path carries two photons, which
    gives ``s0^N (s1/s0)^n N! / ((N-n)! N^n)`` for ``n <= N``.
    """
    n_paths = config.paths
    unit = scissors_unit(config.gain, max(dim, 2), config.detectors).kraus[0]
    s0, s1 = unit[0, 0], unit[1, 1]
    out = np.zeros(dim, dtype=complex)
    for n in range(min(dim, n_paths + 1)):
        out[n] = (
            s0**n_paths
            * (s1 / s0) ** n
            * math.exp(gammaln(n_paths + 1) - gammaln(n_paths - n + 1))
            / n_paths**n
        )
    return out


@dataclass(frozen=True)
class ScalingReport:
    gains: tuple
    p_success: tuple
    xi: tuple
    spread: float = field(default=0.0)

    @property
    def xi_mean(self):
        return float(np.mean(self.xi))


def lo_success_scaling(gains: Sequence[float], paths: int, state, mode: int = 0,
                       detectors: str = "either") -> ScalingReport:
    """Fit the normalization ``xi = p (1+G)^N`` of the linear-optics amplifier."""
    ps, xis = [], []
    for g in gains:
        p = scissors_nla(NlaConfig(g, paths, detectors), state, mode).p_success
        ps.append(p)
        xis.append(p * (1 + g) ** paths)
    spread = max(xis) / min(xis) - 1 if min(xis) > 0 else math.inf
    return ScalingReport(tuple(gains), tuple(ps), tuple(xis), float(spread))


@dataclass(frozen=True)
class EnsembleCheck:
    V_t: float
    V_t_prime: float
    mean_p: float
    stderr: float
    bound: float

    @property
    def passed(self):
        return self.mean_p <= self.bound + 3 * self.stderr


def ensemble_success(V_t: float, gain: float, dim: int = 20, n_samples: int = 10_000,
                     seed: int = 0) -> EnsembleCheck:
    """Average ideal-NLA success over a Gaussian ensemble of coherent states.

    Amplitudes are drawn with quadrature variance ``V_t`` in shot-noise units,
    i.e. ``E|alpha|^2 = (V_t - 1)/2``. Probabilities use the raw heralded
    norm with no renormalization; the amplified ensemble has
    ``V_t' = 1 + G (V_t - 1)``.
    """
    rng = np.random.default_rng(seed)
    sigma = math.sqrt((V_t - 1) / 4)
    alpha = rng.normal(0, sigma, n_samples) + 1j * rng.normal(0, sigma, n_samples)
    x = np.abs(alpha) ** 2
    n = np.arange(dim)
    with np.errstate(divide="ignore"):
        logx = np.log(x)[:, None]
    # |<n|alpha>|^2 G^(n - n_max), summed over the retained levels
    logs = -x[:, None] + n * logx - gammaln(n + 1) + (n - (dim - 1)) * math.log(gain)
    logs = np.where(np.isfinite(logs), logs, -np.inf)
    logs[x == 0, 0] = -(dim - 1) * math.log(gain)
    p = np.exp(logs).sum(axis=1)
    spec = EnsembleSpec(V_t, 1 + gain * (V_t - 1))
    return EnsembleCheck(
        V_t, spec.V_t_prime, float(p.mean()), float(p.std(ddof=1) / math.sqrt(n_samples)),
        gaussian_ensemble_bound(spec),
    )
