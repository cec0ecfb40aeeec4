"""End-to-end loss correction: distill lossy EPR with an NLA, then teleport.

Closed forms give the corrected transmission ``G eta chi^2``, the largest
usable gain and the best reachable transmission. The simulated pipeline
builds the distilled resource in Fock space, teleports the lowest Fock
levels through it and fits the resulting channel to pure loss.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .errors import DomainError, InvalidParameterError
from .fock import fidelity, recommend_cutoff
from .nla import (
    NlaConfig,
    effective_epr_params,
    herald_components,
    ideal_nla_matrix,
    lossy_epr_components,
    scissors_device_kraus,
    success_bound,
)
from .teleport import BellGrid, TeleportGain, auto_grid, teleport_channel

WINDOW_TOL = 1e-12


class CorrectedTransmission(NamedTuple):
    value: float
    raw: float
    clamped: bool


def corrected_transmission(gain: float, eta: float, chi: float) -> CorrectedTransmission:
    """``G eta chi^2``; values above 1 are clamped and flagged."""
    raw = gain * eta * chi**2
    return CorrectedTransmission(min(raw, 1.0), raw, raw > 1.0)


def max_gain(eta: float, chi: float) -> float:
    """Gain at which the success bound reaches zero; ``inf`` for chi = 0."""
    if not 0.0 < eta <= 1.0:
        raise InvalidParameterError(f"eta must lie in (0, 1], got {eta}")
    if not 0.0 <= chi < 1.0:
        raise InvalidParameterError(f"chi must lie in [0, 1), got {chi}")
    if chi == 0.0:
        return math.inf
    return (1 - (1 - eta) * chi**2) / (eta * chi**2)


def best_transmission(eta: float, chi: float) -> float:
    max_gain(eta, chi)  # argument checks
    return 1 - (1 - eta) * chi**2


def gain_window(eta: float, chi: float):
    """Gains from break-even ``1/chi^2`` up to ``max_gain``."""
    if not 0.0 < chi < 1.0:
        raise InvalidParameterError(f"chi must lie in (0, 1), got {chi}")
    return 1 / chi**2, max_gain(eta, chi)


def log_sweep(lo: float, hi: float, count: int) -> np.ndarray:
    """Geometric sweep with both endpoints exact."""
    if count < 1:
        raise InvalidParameterError("sweep count must be >= 1")
    if count == 1:
        return np.array([lo])
    g = np.geomspace(lo, hi, count)
    g[0], g[-1] = lo, hi
    return g


@dataclass(frozen=True)
class ProtocolPoint:
    G: float
    eta_ec: float
    p_success: float
    fidelity: float = 1.0
    clamped: bool = False
    residual: float = 0.0


def fig2_curve(eta: float, chi: float, gains: Sequence[float] | None = None,
               points: int = 50) -> list[ProtocolPoint]:
    """Success bound versus corrected transmission across the useful gain window.

    Without ``gains`` the window is swept geometrically, endpoints included.
    """
    lo, hi = gain_window(eta, chi)
    if gains is None:
        gains = log_sweep(lo, hi, points)
    gains = sorted(float(g) for g in gains)
    bad = [g for g in gains if g < lo * (1 - WINDOW_TOL) or g > hi * (1 + WINDOW_TOL)]
    if bad:
        raise DomainError(
            f"{len(bad)} gain(s) between {min(bad):.6g} and {max(bad):.6g} fall outside "
            f"the valid window",
            (lo, hi),
        )
    out = []
    for g in gains:
        t = corrected_transmission(g, eta, chi)
        p = 0.0 if g >= hi else success_bound(chi, eta, g)
        out.append(ProtocolPoint(g, t.value, p, 1.0, t.clamped))
    return out


# -- simulated pipeline ------------------------------------------------------


@dataclass(frozen=True)
class ProtocolConfig:
    eta: float
    chi: float
    gain: float
    nla_model: str = "ideal"
    paths: int = 2
    dims: tuple | None = None
    grid: BellGrid | None = None
    in_dim: int = 4
    cutoff_tol: float = 1e-8

    def __post_init__(self):
        if not 0.0 < self.eta <= 1.0:
            raise InvalidParameterError(f"eta must lie in (0, 1], got {self.eta}")
        if not 0.0 <= self.chi < 1.0:
            raise InvalidParameterError(f"chi must lie in [0, 1), got {self.chi}")
        if self.nla_model not in ("ideal", "scissors"):
            raise InvalidParameterError(f"unknown NLA model {self.nla_model!r}")
        NlaConfig(self.gain, self.paths)

    @property
    def effective(self):
        return effective_epr_params(self.chi, self.eta, self.gain)

    def resolved_dims(self):
        """Cutoffs for (Alice, Bob) so the dropped tails stay below ``cutoff_tol``."""
        if self.dims is not None:
            return tuple(self.dims)
        chi_eff, eta_eff = self.effective
        dim_a = recommend_cutoff(chi_eff, self.cutoff_tol)
        nbar = eta_eff * chi_eff**2 / (1 - chi_eff**2)
        ratio = nbar / (1 + nbar)
        dim_b = 3 if ratio == 0 else math.ceil(math.log(self.cutoff_tol) / math.log(ratio)) + 1
        dim_b = max(dim_b, self.paths + 1, 3)
        return dim_a, min(dim_a, dim_b)

    def resolved_grid(self):
        return self.grid if self.grid is not None else auto_grid(self.effective[0])

    def teleport_gain(self):
        chi_eff, eta_eff = self.effective
        return TeleportGain.from_lambda(eta_eff * chi_eff**2)


@dataclass(frozen=True)
class DistilledResource:
    components: list = field(repr=False)
    p_success: float
    model: str


def distill(config: ProtocolConfig, model: str | None = None) -> DistilledResource:
    """Lossy EPR with Bob's arm amplified; ``p_success`` is simulated for scissors
    and the analytic bound for the ideal device."""
    model = config.nla_model if model is None else model
    dim_a, dim_b = config.resolved_dims()
    comps = lossy_epr_components(config.chi, config.eta, dim_a, dim_b)
    if model == "ideal":
        comps, _ = herald_components(comps, ideal_nla_matrix(config.gain, dim_b))
        p = success_bound(config.chi, config.eta, config.gain)
    else:
        kraus = scissors_device_kraus(NlaConfig(config.gain, config.paths), dim_b)
        comps, p = herald_components(comps, kraus)
    return DistilledResource(comps, p, model)


@dataclass(frozen=True)
class EndToEndReport:
    eta_est: float
    eta_expected: float
    rel_error: float
    residual: float
    trace_defect: float
    completeness_defect: float
    truncation_tail: float
    residual_tol: float
    rel_tol: float

    @property
    def passed(self):
        return self.rel_error <= self.rel_tol and self.residual <= self.residual_tol


def end_to_end_verify(config: ProtocolConfig, rel_tol: float = 0.02) -> EndToEndReport:
    """Run distillation with the ideal NLA and teleportation, then fit to loss.

    The residual tolerance is ten times the combined grid and truncation
    defects, with a floor of 1e-6.
    """
    res = distill(config, "ideal")
    tc = teleport_channel(res.components, config.teleport_gain(), config.resolved_grid(),
                          in_dim=config.in_dim)
    fit = tc.fit()
    expected = corrected_transmission(config.gain, config.eta, config.chi).value
    chi_eff = config.effective[0]
    tail = chi_eff ** (2 * config.resolved_dims()[0])
    tol = max(1e-6, 10 * (abs(tc.trace_defect) + tc.completeness_defect + tail))
    return EndToEndReport(
        eta_est=fit.eta_est,
        eta_expected=expected,
        rel_error=abs(fit.eta_est - expected) / expected,
        residual=fit.residual,
        trace_defect=tc.trace_defect,
        completeness_defect=tc.completeness_defect,
        truncation_tail=tail,
        residual_tol=tol,
        rel_tol=rel_tol,
    )


def fig3_point(eta: float, chi: float, gain: float, paths: int = 2, *,
               in_dim: int = 4, dims=None, grid=None) -> ProtocolPoint:
    """One linear-optics operating point.

    ``eta_ec`` is fitted from the teleporter built on the scissors-distilled
    resource; ``fidelity`` compares that channel's Choi state with the one
    obtained from the ideal amplifier at the same gain.
    """
    cfg = ProtocolConfig(eta, chi, gain, "scissors", paths, dims, grid, in_dim)
    grid = cfg.resolved_grid()
    gain_t = cfg.teleport_gain()
    lo = distill(cfg, "scissors")
    ideal = distill(cfg, "ideal")
    ch_lo = teleport_channel(lo.components, gain_t, grid, in_dim=in_dim)
    ch_id = teleport_channel(ideal.components, gain_t, grid, in_dim=in_dim)
    fit = ch_lo.fit()
    f = fidelity(ch_lo.choi.normalize(), ch_id.choi.normalize())
    return ProtocolPoint(float(gain), fit.eta_est, lo.p_success, f, False, fit.residual)


def default_fig3_gains(count: int = 12, top: float = 16.0) -> np.ndarray:
    return log_sweep(1.0, top, count)


def tractable_gain(eta: float, chi: float, chi_eff_sq: float = 0.5) -> float:
    """Gain at which the distilled squeezing reaches ``chi_eff^2 = chi_eff_sq``.

    Above this the Fock cutoffs needed for the resource grow quickly. When
    ``chi^2`` already exceeds the target, the midpoint between ``chi^2`` and 1
    is used instead.
    """
    target = max(chi_eff_sq, (1 + chi**2) / 2)
    return min(max_gain(eta, chi), 1 + (target / chi**2 - 1) / eta)


def fig3_window(eta: float, chi: float, paths: int = 2, f_min: float = 0.995, *,
                in_dim: int = 4, iterations: int = 10, **kw) -> float:
    """Largest gain (within the tractable range) whose linear-optics channel
    keeps fidelity >= ``f_min`` with the ideal-amplifier channel.

    Fidelity falls monotonically with gain, so a bisection in log-gain suffices.
    """
    lo, hi = 1.0, tractable_gain(eta, chi)
    if fig3_point(eta, chi, hi, paths, in_dim=in_dim, **kw).fidelity >= f_min:
        return hi
    if fig3_point(eta, chi, lo, paths, in_dim=in_dim, **kw).fidelity < f_min:
        return lo
    for _ in range(iterations):
        mid = math.sqrt(lo * hi)
        if fig3_point(eta, chi, mid, paths, in_dim=in_dim, **kw).fidelity >= f_min:
            lo = mid
        else:
            hi = mid
    return lo


def fig3_curve(eta: float, chi: float, paths: int = 2, gains: Sequence[float] | None = None,
               *, in_dim: int = 4, workers: int = 1, **kw) -> list[ProtocolPoint]:
    """Simulated linear-optics trade-off curve, one point per gain, sorted by gain."""
    gains = default_fig3_gains() if gains is None else gains
    gains = sorted(float(g) for g in gains)

    def run(g):
        return fig3_point(eta, chi, g, paths, in_dim=in_dim, **kw)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(run, gains))
    return [run(g) for g in gains]


def fixed_budget_gain(eta: float, chi: float, p_budget: float) -> float:
    """Gain at which the success bound equals ``p_budget``."""
    if not 0.0 < p_budget <= 1.0:
        raise InvalidParameterError("probability budget must lie in (0, 1]")
    scale = 1 / (chi**2 + p_budget * (1 - chi**2))
    return 1 + (scale - 1) / eta


def fixed_budget_ladder(eta: float, chis: Sequence[float], p_budget: float):
    """(chi, G, eta_ec) at a fixed success-probability budget for each chi."""
    rows = []
    for chi in chis:
        g = fixed_budget_gain(eta, chi, p_budget)
        rows.append((chi, g, corrected_transmission(g, eta, chi).value))
    return rows
