"""Two-sided estimate shapes with regime classification.

Every envelope is a *shape*: the t- and Omega-dependent factor of a two-sided
estimate ``c * shape <= G <= C * shape``.  Prefactors and the exponential rate
constant are never assumed; they live in :class:`EnvelopeConstants` and are
fitted by the harness.  The similarity variable is

    Omega = r**2 * t**(-beta)        (diffusion families)
    Omega = r**alpha * t**(-beta)    (stable families)

and the branch tables split at Omega = 1, with extra thresholds for the
small-time derivative bounds.  All shapes are returned with a log value so
that exponential branches survive Omega of order 1e4.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

from .errors import DomainError, RegimeError, SpecError

__all__ = [
    "RegimePoint",
    "EnvelopeConstants",
    "EnvelopeValue",
    "compute_omega",
    "derivative_regime",
    "envelope_diffusion",
    "envelope_stable",
    "envelope_diffusion_deriv",
    "envelope_stable_deriv",
    "globalize_local",
]

ON_DIAG = "on_diagonal"
OFF_DIAG = "off_diagonal"
INTERMEDIATE = "intermediate"
FAR_TAIL = "far_tail"


@dataclass(frozen=True)
class RegimePoint:
    """A (t, r) point with its similarity variable and coarse regime tag."""

    t: float
    r: float
    omega: float
    regime: str
    family: str  # "diffusion" | "stable"
    alpha: float | None = None


@dataclass(frozen=True)
class EnvelopeConstants:
    """Constants bundle attached to every envelope evaluation.

    ``c_beta_exponent`` is the rate constant inside exp{-C Omega^{1/(2-beta)}}
    (default 1, always fitted rather than trusted); prefactors bound the
    two-sided constants; ``horizon_T`` is required by the local theorems;
    ``globalization_rate`` is the c of the e^{+-c tau} local-to-global trick.
    """

    c_beta_exponent: float = 1.0
    prefactor_low: float = 1.0
    prefactor_high: float = 1.0
    horizon_T: float | None = None
    globalization_rate: float | None = None

    def __post_init__(self):
        if self.c_beta_exponent <= 0:
            raise DomainError("exponential constant must be positive")
        if self.prefactor_low <= 0 or self.prefactor_low > self.prefactor_high:
            raise DomainError("need 0 < prefactor_low <= prefactor_high")
        if self.horizon_T is not None and self.horizon_T <= 0:
            raise DomainError("horizon must be positive")
        if self.globalization_rate is not None and self.globalization_rate < 0:
            raise DomainError("globalization rate must be nonnegative")

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "EnvelopeConstants":
        return cls(**json.loads(text))


@dataclass(frozen=True)
class EnvelopeValue:
    """Shape value in both linear and log form, with its constants bundle."""

    value: float
    log_value: float
    regime: str
    constants: EnvelopeConstants = field(default_factory=EnvelopeConstants)

    def __float__(self):
        return self.value


def _make_value(log_value: float, regime: str, consts: EnvelopeConstants) -> EnvelopeValue:
    if log_value == math.inf:
        value = math.inf
    else:
        value = math.exp(log_value) if log_value > -745.0 else 0.0
    return EnvelopeValue(value=value, log_value=log_value, regime=regime, constants=consts)


def compute_omega(family, t, r, beta, alpha=None) -> RegimePoint:
    """Similarity variable and coarse on/off-diagonal regime for a point."""
    t, r = float(t), float(r)
    if t <= 0:
        raise DomainError("compute_omega requires t > 0")
    if r < 0:
        raise DomainError("compute_omega requires r >= 0")
    beta = float(beta if not hasattr(beta, "beta") else beta.beta)
    if family == "diffusion":
        omega = r ** 2 * t ** (-beta)
        a = None
    elif family == "stable":
        if alpha is None:
            raise SpecError("stable family requires alpha")
        a = float(alpha)
        omega = r ** a * t ** (-beta)
    else:
        raise SpecError(f"unknown family {family!r}")
    regime = ON_DIAG if omega <= 1.0 else OFF_DIAG
    return RegimePoint(t=t, r=r, omega=omega, regime=regime, family=family, alpha=a)


def derivative_regime(point: RegimePoint, beta, kind: str) -> str:
    """Fine regime for the small-time derivative bounds.

    ``kind`` is "diffusion" (threshold t^{-beta (2-beta)/(1-beta)}) or
    "stable" (threshold t^{-beta}).  The two exponential/power branches agree
    at the threshold, so a tie is value-neutral; it is resolved to the outer
    branch.
    """
    beta = float(beta if not hasattr(beta, "beta") else beta.beta)
    if _on_branch(point):
        return ON_DIAG
    if kind == "diffusion":
        thr = point.t ** (-beta * (2.0 - beta) / (1.0 - beta))
    elif kind == "stable":
        thr = point.t ** (-beta)
    else:
        raise SpecError(f"unknown derivative regime kind {kind!r}")
    return INTERMEDIATE if point.omega < thr else FAR_TAIL


def _check_point(point: RegimePoint, family: str):
    if point.family != family:
        raise SpecError(f"point family {point.family!r} does not match {family!r}")
    # at omega == 1 both tags are legitimate (the branches overlap there)
    if point.regime == ON_DIAG and point.omega > 1.0:
        raise RegimeError(f"regime tag 'on_diagonal' inconsistent with omega={point.omega:g}")
    if point.regime == OFF_DIAG and point.omega < 1.0:
        raise RegimeError(f"regime tag 'off_diagonal' inconsistent with omega={point.omega:g}")


def _on_branch(point: RegimePoint) -> bool:
    # tag picks the branch at the omega == 1 overlap
    if point.omega == 1.0:
        return point.regime != OFF_DIAG
    return point.omega < 1.0


def _log_omega_factor(omega: float) -> float:
    # |log Omega| + 1, in log form; diverges as Omega -> 0
    if omega == 0.0:
        return math.inf
    return math.log(abs(math.log(omega)) + 1.0)


def envelope_diffusion(d, beta, point: RegimePoint, consts: EnvelopeConstants | None = None) -> EnvelopeValue:
    """Two-sided shape for the time-fractional diffusion Green's function."""
    consts = consts or EnvelopeConstants()
    _check_point(point, "diffusion")
    beta = float(beta if not hasattr(beta, "beta") else beta.beta)
    d = int(d)
    if d < 1:
        raise DomainError("dimension must be >= 1")
    t, om = point.t, point.omega
    lt = math.log(t)
    if _on_branch(point):
        if d == 1:
            logv = -beta / 2.0 * lt
        elif d == 2:
            logv = -beta * lt + _log_omega_factor(om)
        else:
            if om == 0.0:
                logv = math.inf
            else:
                logv = -d * beta / 2.0 * lt + (1.0 - d / 2.0) * math.log(om)
        return _make_value(logv, ON_DIAG, consts)
    rho = (1.0 - beta) / (2.0 - beta)
    logv = (
        -d * beta / 2.0 * lt
        - (d / 2.0) * rho * math.log(om)
        - consts.c_beta_exponent * om ** (1.0 / (2.0 - beta))
    )
    return _make_value(logv, OFF_DIAG, consts)


def envelope_stable(d, alpha, beta, point: RegimePoint, consts: EnvelopeConstants | None = None) -> EnvelopeValue:
    """Two-sided shape for the time-fractional stable Green's function."""
    consts = consts or EnvelopeConstants()
    _check_point(point, "stable")
    beta = float(beta if not hasattr(beta, "beta") else beta.beta)
    alpha = float(alpha)
    if not (0.0 < alpha < 2.0):
        raise DomainError("stable envelopes require alpha in (0, 2)")
    d = int(d)
    t, om = point.t, point.omega
    lt = math.log(t)
    if _on_branch(point):
        if d < alpha:
            logv = -d * beta / alpha * lt
        elif d == alpha:
            logv = -beta * lt + _log_omega_factor(om)
        else:
            if om == 0.0:
                logv = math.inf
            else:
                logv = -d * beta / alpha * lt + (1.0 - d / alpha) * math.log(om)
        return _make_value(logv, ON_DIAG, consts)
    logv = -d * beta / alpha * lt + (-1.0 - d / alpha) * math.log(om)
    return _make_value(logv, OFF_DIAG, consts)


def envelope_diffusion_deriv(
    d, beta, point: RegimePoint, consts: EnvelopeConstants | None = None, case: str = "global"
) -> EnvelopeValue:
    """Upper-bound shape for |d/dx G| in the diffusion families.

    ``case``: "global" (divergence-form coefficients), "local_small_time"
    (t < 1, three regimes) or "local_large_time" (1 < t < T, bounds in
    |x - y| form).
    """
    consts = consts or EnvelopeConstants()
    _check_point(point, "diffusion")
    beta = float(beta if not hasattr(beta, "beta") else beta.beta)
    d = int(d)
    t, r, om = point.t, point.r, point.omega
    lt = math.log(t)
    rho = (1.0 - beta) / (2.0 - beta)
    C = consts.c_beta_exponent

    if case == "global":
        if _on_branch(point):
            if d == 1:
                logv = -beta * lt + _log_omega_factor(om)
            else:
                logv = (
                    math.inf
                    if om == 0.0
                    else -(d + 1) * beta / 2.0 * lt + (1.0 - (d + 1) / 2.0) * math.log(om)
                )
            return _make_value(logv, ON_DIAG, consts)
        logv = (
            -(d + 1) * beta / 2.0 * lt
            - ((d + 1) / 2.0) * rho * math.log(om)
            - C * om ** (1.0 / (2.0 - beta))
        )
        return _make_value(logv, OFF_DIAG, consts)

    if case == "local_small_time":
        if t >= 1.0:
            raise RegimeError("local_small_time shapes hold for t < 1")
        fine = derivative_regime(point, beta, "diffusion")
        if fine == ON_DIAG:
            if d == 1:
                logv = -beta * lt + _log_omega_factor(om)
            else:
                logv = (
                    math.inf
                    if om == 0.0
                    else -(d + 1) * beta / 2.0 * lt + (1.0 - (d + 1) / 2.0) * math.log(om)
                )
            return _make_value(logv, ON_DIAG, consts)
        if fine == INTERMEDIATE:
            logv = (
                -(d + 1) * beta / 2.0 * lt
                - ((d + 1) / 2.0) * rho * math.log(om)
                - C * om ** (1.0 / (2.0 - beta))
            )
            return _make_value(logv, INTERMEDIATE, consts)
        logv = (
            -d * beta / 2.0 * lt
            - (d / 2.0) * rho * math.log(om)
            - C * om ** (1.0 / (2.0 - beta))
        )
        return _make_value(logv, FAR_TAIL, consts)

    if case == "local_large_time":
        if t <= 1.0:
            raise RegimeError("local_large_time shapes hold for t > 1")
        if _on_branch(point):
            if d == 1:
                logv = -beta * lt + _log_omega_factor(om)
            else:
                logv = math.inf if r == 0.0 else (1.0 - d) * math.log(r)
            return _make_value(logv, ON_DIAG, consts)
        logv = -d * rho * math.log(r) - C * r ** (2.0 / (2.0 - beta))
        return _make_value(logv, OFF_DIAG, consts)

    raise SpecError(f"unknown case {case!r}")


def envelope_stable_deriv(
    d, k, alpha, beta, point: RegimePoint, consts: EnvelopeConstants | None = None, case: str = "global"
) -> EnvelopeValue:
    """Upper-bound shape for order-k spatial derivatives, stable families."""
    consts = consts or EnvelopeConstants()
    _check_point(point, "stable")
    beta = float(beta if not hasattr(beta, "beta") else beta.beta)
    alpha = float(alpha)
    if not (0.0 < alpha < 2.0):
        raise DomainError("stable envelopes require alpha in (0, 2)")
    d, k = int(d), int(k)
    if k < 1:
        raise DomainError("derivative order k must be >= 1")
    t, r, om = point.t, point.r, point.omega
    lt = math.log(t)
    dk = d + k

    def on_diag_shape(dim_eff):
        if dim_eff < alpha:
            return -dim_eff * beta / alpha * lt
        if dim_eff == alpha:
            return -beta * lt + _log_omega_factor(om)
        return (
            math.inf
            if om == 0.0
            else -dim_eff * beta / alpha * lt + (1.0 - dim_eff / alpha) * math.log(om)
        )

    if case == "global":
        if _on_branch(point):
            return _make_value(on_diag_shape(dk), ON_DIAG, consts)
        logv = -dk * beta / alpha * lt + (-1.0 - dk / alpha) * math.log(om)
        return _make_value(logv, OFF_DIAG, consts)

    if case == "local_small_time":
        if t >= 1.0:
            raise RegimeError("local_small_time shapes hold for t < 1")
        fine = derivative_regime(point, beta, "stable")
        if fine == ON_DIAG:
            return _make_value(on_diag_shape(dk), ON_DIAG, consts)
        if fine == INTERMEDIATE:
            logv = -dk * beta / alpha * lt + (-1.0 - dk / alpha) * math.log(om)
            return _make_value(logv, INTERMEDIATE, consts)
        logv = -d * beta / alpha * lt + (-1.0 - d / alpha) * math.log(om)
        return _make_value(logv, FAR_TAIL, consts)

    if case == "local_large_time":
        if t <= 1.0:
            raise RegimeError("local_large_time shapes hold for t > 1")
        if _on_branch(point):
            if dk < alpha:
                logv = 0.0
            elif dk == alpha:
                logv = -beta * lt + _log_omega_factor(om)
            else:
                logv = math.inf if r == 0.0 else (alpha - dk) * math.log(r)
            return _make_value(logv, ON_DIAG, consts)
        logv = (-alpha - d) * math.log(r)
        return _make_value(logv, OFF_DIAG, consts)

    raise SpecError(f"unknown case {case!r}")


def globalize_local(shape_value, rate_c, tau):
    """Local-to-global correction: (e^{-c tau} shape, e^{+c tau} shape)."""
    rate_c, tau = float(rate_c), float(tau)
    if rate_c < 0:
        raise DomainError("globalization rate must be nonnegative")
    if tau <= 0:
        raise DomainError("tau must be positive")
    v = float(shape_value)
    return v * math.exp(-rate_c * tau), v * math.exp(rate_c * tau)
