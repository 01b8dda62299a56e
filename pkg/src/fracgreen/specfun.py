"""One-sided stable densities, subordinator kernels and Mittag-Leffler functions.

The central objects are the totally positively skewed normalised stable
density ``w_beta`` (Laplace transform ``exp(-s**beta)``), the transition
density ``G_beta(r, s) = r**(-1/beta) * w_beta(s * r**(-1/beta))`` of the
beta-stable subordinator, and the Mittag-Leffler function ``E_beta``.

``w_beta`` is evaluated by two methods that are cross-checked in the tests:

* a convergent alternating series in inverse powers of ``x`` (used for
  ``x >= switch_point``), and
* a non-oscillatory single integral over ``(0, pi)`` built from the
  monotone angular function ``A(phi)`` with ``A(0+) = c_beta`` (used for
  ``x < switch_point``); in the deep left tail the integral concentrates at
  ``phi = 0`` and is evaluated in log form.

``E_beta`` on the negative axis is a completely monotone function whose
alternating power series suffers cancellation of order ``exp(|z|**(1/beta))``.
``ml_series`` therefore escalates: compensated float summation while rounding
stays below tolerance, exact summation in adaptive-precision arithmetic up to
a precision cap, and past the cap the equivalent completely-monotone integral
representation.  ``ml_pz`` is the independent route through the subordinator
density and is kept free of any series machinery.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import mpmath
import numpy as np
from scipy.integrate import quad
from scipy.special import gammaln

from .errors import DomainError, RangeGuardError

__all__ = [
    "FracOrder",
    "StableDensityEval",
    "StableEnvelopeConstants",
    "stable_density",
    "stable_density_eval",
    "stable_density_log",
    "stable_density_envelope",
    "subordinator_density",
    "ml_series",
    "ml_series_deriv",
    "ml_pz",
    "potential_density",
]

_EPS = np.finfo(float).eps

# Default evaluation-strategy knobs (see module docstring).
SWITCH_POINT = 1.0          # series for x >= switch, integral below
ML_SERIES_GUARD = 50.0      # hard |z| guard for ml_series
_ML_FLOAT_MAXLOG = 7.0      # float summation safe while max term < e^7
_ML_DPS_LEVELS = (30, 60, 100, 160, 240, 320)
_ML_DPS_CAP = 320


@dataclass(frozen=True)
class FracOrder:
    """Validated fractional time order beta in (0, 1)."""

    beta: float

    def __post_init__(self):
        b = float(self.beta)
        if not (0.0 < b < 1.0) or not math.isfinite(b):
            raise DomainError(f"fractional order must lie in (0, 1), got {self.beta}")
        object.__setattr__(self, "beta", b)


def _beta_value(beta) -> float:
    if isinstance(beta, FracOrder):
        return beta.beta
    return FracOrder(float(beta)).beta


@dataclass(frozen=True)
class StableDensityEval:
    """Density value together with the evaluation method that produced it."""

    x: float
    value: float
    method_used: str  # "series" | "integral_rep" | "asymptotic"


@dataclass(frozen=True)
class StableEnvelopeConstants:
    """Constants for the two-sided stable-density envelope.

    ``c_beta = (1 - beta) * beta**(beta / (1 - beta))`` is the exponent
    constant of the left-tail shape ``f_beta``; ``c_tilde`` is a prefactor
    left free for fitting (default 1).
    """

    c_beta: float
    c_tilde: float = 1.0

    def __post_init__(self):
        if self.c_beta <= 0 or self.c_tilde <= 0:
            raise DomainError("envelope constants must be positive")

    @classmethod
    def from_order(cls, beta) -> "StableEnvelopeConstants":
        b = _beta_value(beta)
        return cls(c_beta=stable_exponent_constant(b))


def stable_exponent_constant(beta) -> float:
    """The left-tail exponent constant (1 - beta) * beta**(beta/(1-beta))."""
    b = _beta_value(beta)
    return (1.0 - b) * b ** (b / (1.0 - b))


# ---------------------------------------------------------------------------
# angular function A(phi) and its quadrature nodes
# ---------------------------------------------------------------------------

def _zolo_log_A(phi, b):
    """log A(phi) for the monotone angular function on (0, pi).

    A(phi) = sin(b phi)^(b/(1-b)) sin((1-b) phi) / sin(phi)^(1/(1-b)),
    increasing from A(0+) = c_beta to +inf at pi.
    """
    phi = np.asarray(phi, dtype=float)
    return (
        (b / (1.0 - b)) * np.log(np.sin(b * phi))
        + np.log(np.sin((1.0 - b) * phi))
        - (1.0 / (1.0 - b)) * np.log(np.sin(phi))
    )


@lru_cache(maxsize=64)
def _zolo_nodes(b: float):
    """Gauss-Legendre nodes/weights on (0, pi), geometrically refined at both
    endpoints, with cached A values for the integral representation."""
    xg, wg = np.polynomial.legendre.leggauss(14)
    edges = [0.0]
    # cluster toward 0 (the deep-tail peak) and toward pi (the A blow-up)
    left = np.pi / 2 * 0.62 ** np.arange(64, -1, -1)
    right = np.pi - np.pi / 2 * 0.62 ** np.arange(1, 30)
    edges = np.concatenate((left, right))
    nodes, weights = [], []
    lo = edges[0]
    # first sliver [0, lo] contributes < 1e-13 of the peak panel; skip it
    for hi in edges[1:]:
        mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
        nodes.append(mid + half * xg)
        weights.append(half * wg)
        lo = hi
    nodes = np.concatenate(nodes)
    weights = np.concatenate(weights)
    logA = _zolo_log_A(nodes, b)
    c_beta = stable_exponent_constant(b)
    return nodes, weights, logA, np.exp(logA), c_beta


# ---------------------------------------------------------------------------
# series machinery
# ---------------------------------------------------------------------------

@lru_cache(maxsize=64)
def _w_series_coeffs(b: float, K: int = 220):
    """log|coeff| and sign for the inverse-power series of w_beta."""
    k = np.arange(1, K + 1, dtype=float)
    logc = gammaln(k * b + 1.0) - gammaln(k + 1.0) + np.log(np.abs(np.sin(np.pi * k * b)))
    sign = np.where(np.sin(np.pi * k * b) >= 0, 1.0, -1.0) * np.where(k % 2 == 1, 1.0, -1.0)
    return k, logc, sign


def _w_series_vec(x, b):
    """Series evaluation of w_beta, valid (and accurate) for x >= ~0.7."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    k, logc, sign = _w_series_coeffs(b)
    # terms[i, j] = sign_j * exp(logc_j - (k_j b + 1) ln x_i) / pi
    logterms = logc[None, :] - (k[None, :] * b + 1.0) * np.log(x)[:, None]
    terms = sign[None, :] * np.exp(logterms)
    return terms.sum(axis=1) / np.pi


def _w_integral_vec(x, b):
    """Integral-representation evaluation of w_beta (any x > 0), log-safe."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    nodes, weights, logA, A, c_beta = _zolo_nodes(b)
    M = x ** (-b / (1.0 - b))
    # w = b/((1-b) pi) x^{-1/(1-b)} e^{-c_beta M} Int A e^{-(A - c_beta) M}
    expo = -np.outer(M, A - c_beta)
    np.clip(expo, -745.0, 0.0, out=expo)
    core = np.exp(expo + logA[None, :]) @ weights
    logw = (
        math.log(b / ((1.0 - b) * np.pi))
        - np.log(x) / (1.0 - b)
        - c_beta * M
        + np.log(core)
    )
    return logw


def _w_asymptotic_log(x, b):
    """Leading small-x asymptotic in log form (used below x ~ 1e-12)."""
    x = np.asarray(x, dtype=float)
    c_beta = stable_exponent_constant(b)
    pref = math.log(b ** (1.0 / (2.0 * (1.0 - b)))) - 0.5 * math.log(2.0 * np.pi * (1.0 - b))
    return pref - (2.0 - b) / (2.0 * (1.0 - b)) * np.log(x) - c_beta * x ** (-b / (1.0 - b))


_TINY_X = 1e-12


def stable_density_vec(beta, x, switch=None):
    """Vectorised w_beta for positive array arguments."""
    b = _beta_value(beta)
    sw = SWITCH_POINT if switch is None else float(switch)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(~(x > 0.0)):
        raise DomainError("stable density requires x > 0")
    out = np.empty_like(x)
    hi = x >= sw
    tiny = (~hi) & (x < _TINY_X)
    mid = (~hi) & (~tiny)
    if hi.any():
        out[hi] = _w_series_vec(x[hi], b)
    if mid.any():
        out[mid] = np.exp(_w_integral_vec(x[mid], b))
    if tiny.any():
        out[tiny] = np.exp(_w_asymptotic_log(x[tiny], b))
    return out


def stable_density_log_vec(beta, x, switch=None):
    """Vectorised log w_beta, safe far into the left tail."""
    b = _beta_value(beta)
    sw = SWITCH_POINT if switch is None else float(switch)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(~(x > 0.0)):
        raise DomainError("stable density requires x > 0")
    out = np.empty_like(x)
    hi = x >= sw
    tiny = (~hi) & (x < _TINY_X)
    mid = (~hi) & (~tiny)
    if hi.any():
        out[hi] = np.log(_w_series_vec(x[hi], b))
    if mid.any():
        out[mid] = _w_integral_vec(x[mid], b)
    if tiny.any():
        out[tiny] = _w_asymptotic_log(x[tiny], b)
    return out


def stable_density(beta, x, switch=None) -> float:
    """w_beta(x): the one-sided stable density with Laplace transform e^{-s^beta}."""
    return float(stable_density_vec(beta, float(x), switch=switch)[0])


def stable_density_log(beta, x, switch=None) -> float:
    """log w_beta(x), usable where the density itself underflows."""
    return float(stable_density_log_vec(beta, float(x), switch=switch)[0])


def stable_density_eval(beta, x, switch=None) -> StableDensityEval:
    """Like :func:`stable_density` but reporting which method was used."""
    b = _beta_value(beta)
    xf = float(x)
    if not xf > 0.0:
        raise DomainError("stable density requires x > 0")
    sw = SWITCH_POINT if switch is None else float(switch)
    if xf >= sw:
        method = "series"
    elif xf >= _TINY_X:
        method = "integral_rep"
    else:
        method = "asymptotic"
    return StableDensityEval(x=xf, value=stable_density(b, xf, switch=switch), method_used=method)


def stable_density_envelope(beta, x, consts: StableEnvelopeConstants | None = None):
    """Two-sided envelope shape for w_beta.

    Returns ``(lower_shape, upper_shape)``; both sides share the same shape
    (constants are the caller's business), i.e. lower = c_tilde * shape and
    upper = c_tilde * shape with the same c_tilde unless fitted otherwise.
    For beta < 1/2 the shape is min(x^{-1-beta}, f_beta(x)); for beta >= 1/2
    it is the piecewise form: power branch on (1, inf), f_beta on (0, 1].
    """
    b = _beta_value(beta)
    xf = float(x)
    if not xf > 0.0:
        raise DomainError("envelope requires x > 0")
    if consts is None:
        consts = StableEnvelopeConstants.from_order(b)
    power = xf ** (-1.0 - b)
    f_val = xf ** (-(2.0 - b) / (2.0 * (1.0 - b))) * math.exp(
        -consts.c_beta * xf ** (-b / (1.0 - b))
    )
    if b < 0.5:
        shape = min(power, f_val)
    else:
        shape = power if xf > 1.0 else f_val
    return consts.c_tilde * shape, consts.c_tilde * shape


def stable_density_envelope_log(beta, x, consts: StableEnvelopeConstants | None = None) -> float:
    """log of the envelope shape; survives where f_beta underflows."""
    b = _beta_value(beta)
    xf = float(x)
    if not xf > 0.0:
        raise DomainError("envelope requires x > 0")
    if consts is None:
        consts = StableEnvelopeConstants.from_order(b)
    log_power = (-1.0 - b) * math.log(xf)
    log_f = (
        -(2.0 - b) / (2.0 * (1.0 - b)) * math.log(xf)
        - consts.c_beta * xf ** (-b / (1.0 - b))
    )
    if b < 0.5:
        log_shape = min(log_power, log_f)
    else:
        log_shape = log_power if xf > 1.0 else log_f
    return math.log(consts.c_tilde) + log_shape


def subordinator_density(beta, r, s) -> float:
    """Transition density G_beta(r, s) = r^{-1/beta} w_beta(s r^{-1/beta})."""
    b = _beta_value(beta)
    rf, sf = float(r), float(s)
    if rf <= 0 or sf <= 0:
        raise DomainError("subordinator density requires r > 0 and s > 0")
    scale = rf ** (-1.0 / b)
    return scale * stable_density(b, sf * scale)


# ---------------------------------------------------------------------------
# Mittag-Leffler ladder
# ---------------------------------------------------------------------------

def _ml_maxlog(z, b):
    """ln of the largest series term; ~ |z|^(1/beta) for |z| >= 1."""
    az = abs(z)
    if az <= 1e-300:
        return 0.0
    # max_k [k ln|z| - lgamma(k b + 1)]; the stationary point is at
    # m = b k ~ |z|^(1/b); evaluate exactly around it
    m_star = az ** (1.0 / b)
    k_star = max(1, int(m_star / b))
    ks = np.unique(np.clip([1, k_star // 2, k_star, 2 * k_star], 1, 10 ** 9)).astype(float)
    vals = ks * math.log(az) - gammaln(b * ks + 1.0)
    return float(max(vals.max(), 0.0))


def _neumaier_sum(terms):
    s = 0.0
    comp = 0.0
    for t in terms:
        tmp = s + t
        if abs(s) >= abs(t):
            comp += (s - tmp) + t
        else:
            comp += (t - tmp) + s
        s = tmp
    return s + comp


def _ml_series_float(z, b, tol, deriv=False):
    terms = []
    k = 1 if deriv else 0
    biggest = 0.0
    while True:
        lg = gammaln(b * k + 1.0)
        if deriv:
            logt = math.log(k) + (k - 1) * math.log(abs(z)) if z != 0 else (0.0 if k == 1 else -math.inf)
            signpow = k - 1
        else:
            logt = k * math.log(abs(z)) if z != 0 else (0.0 if k == 0 else -math.inf)
            signpow = k
        if z == 0:
            terms.append(1.0 if not deriv and k == 0 else (1.0 / math.exp(lg) if deriv and k == 1 else 0.0))
            break
        t = math.exp(logt - lg)
        if z < 0 and signpow % 2 == 1:
            t = -t
        terms.append(t)
        biggest = max(biggest, abs(t))
        if k > 3 and abs(t) < 0.01 * tol and abs(t) < 1e-6 * max(biggest, 1.0):
            break
        k += 1
        if k > 100000:
            break
    return _neumaier_sum(terms)


_MP_GAMMA_CACHE: dict = {}


def _mp_gamma(b, k, dps):
    key = (b, k, dps)
    g = _MP_GAMMA_CACHE.get(key)
    if g is None:
        g = mpmath.gamma(mpmath.mpf(b) * k + 1)
        _MP_GAMMA_CACHE[key] = g
    return g


def _ml_series_mp(z, b, maxlog, deriv=False):
    need = int(maxlog / math.log(10.0)) + 25
    dps = next(d for d in _ML_DPS_LEVELS if d >= need)
    old = mpmath.mp.dps
    mpmath.mp.dps = dps
    try:
        zz = mpmath.mpf(z)
        s = mpmath.mpf(0)
        k = 1 if deriv else 0
        floor = mpmath.mpf(10) ** (-dps + 12)
        while True:
            if deriv:
                term = k * zz ** (k - 1) / _mp_gamma(b, k, dps)
            else:
                term = zz ** k / _mp_gamma(b, k, dps)
            s += term
            if k > 3 and abs(term) < floor:
                break
            k += 1
            if k > 500000:
                break
        return float(s)
    finally:
        mpmath.mp.dps = old


def _ml_spectral(z, b, deriv=False):
    """Completely monotone integral for E_beta(z) (or E'_beta) on z < 0.

    E_beta(z) = sin(b pi)/(b pi) Int_0^inf exp(-((-z) v)^{1/b})
                / (v^2 + 2 v cos(b pi) + 1) dv.
    """
    t = -z
    cb = math.cos(b * math.pi)
    inv_b = 1.0 / b
    if deriv:
        def f(v):
            return (v ** inv_b) * math.exp(-((t * v) ** inv_b)) / (v * v + 2.0 * v * cb + 1.0)
    else:
        def f(v):
            return math.exp(-((t * v) ** inv_b)) / (v * v + 2.0 * v * cb + 1.0)
    v1, _ = quad(f, 0.0, 1.0, epsabs=1e-14, epsrel=1e-13, limit=300)
    v2, _ = quad(f, 1.0, np.inf, epsabs=1e-14, epsrel=1e-13, limit=300)
    out = math.sin(b * math.pi) / (b * math.pi) * (v1 + v2)
    if deriv:
        out *= inv_b * t ** (inv_b - 1.0)
    return out


def _ml_ladder(z, b, tol, deriv):
    if z == 0.0:
        return 1.0 / math.gamma(1.0 + b) if deriv else 1.0
    if z > 0.0:
        return _ml_series_float(z, b, tol, deriv=deriv)
    maxlog = _ml_maxlog(z, b)
    if maxlog <= _ML_FLOAT_MAXLOG:
        return _ml_series_float(z, b, tol, deriv=deriv)
    if maxlog / math.log(10.0) + 25 <= _ML_DPS_CAP:
        return _ml_series_mp(z, b, maxlog, deriv=deriv)
    return _ml_spectral(z, b, deriv=deriv)


def ml_series(beta, z, tol=1e-12) -> float:
    """Mittag-Leffler function E_beta(z) = sum_k z^k / Gamma(k beta + 1).

    Guarded at |z| <= ML_SERIES_GUARD; beyond the guard use :func:`ml_pz`.
    """
    b = _beta_value(beta)
    zf = float(z)
    if abs(zf) > ML_SERIES_GUARD:
        raise RangeGuardError(
            f"|z| = {abs(zf):g} beyond the series guard {ML_SERIES_GUARD:g}; use ml_pz"
        )
    return _ml_ladder(zf, b, tol, deriv=False)


def ml_series_deriv(beta, z, tol=1e-12) -> float:
    """Term-wise differentiated series E'_beta(z), same guard as ml_series."""
    b = _beta_value(beta)
    zf = float(z)
    if abs(zf) > ML_SERIES_GUARD:
        raise RangeGuardError(
            f"|z| = {abs(zf):g} beyond the series guard {ML_SERIES_GUARD:g}; use ml_pz"
        )
    return _ml_ladder(zf, b, tol, deriv=True)


def ml_pz(beta, s) -> float:
    """E_beta(s) for s <= 0 through the subordinator-density integral.

    Evaluates (1/beta) Int_0^inf e^{s x} x^{-1-1/beta} w_beta(x^{-1/beta}) dx;
    the integrand extends continuously to x = 0 with value beta / Gamma(1-beta).
    """
    b = _beta_value(beta)
    sf = float(s)
    if sf > 0.0:
        raise DomainError("ml_pz is defined for s <= 0 (integral diverges otherwise)")

    c_beta = stable_exponent_constant(b)
    lead = b / math.gamma(1.0 - b)  # integrand value at x = 0+

    def f(x):
        if x < 1e-280:
            return lead
        u = x ** (-1.0 / b)
        logf = sf * x - (1.0 + 1.0 / b) * math.log(x) + stable_density_log(b, u)
        return math.exp(logf) if logf > -700.0 else 0.0

    # w_beta(x^{-1/beta}) is negligible once c_beta x^{... } > ~60
    x_cut = (60.0 / c_beta) ** (1.0 - b)
    if sf < 0:
        x_cut = min(x_cut, 60.0 / (-sf) + 1.0)
    v1, e1 = quad(f, 0.0, min(1.0, x_cut), epsabs=1e-12, epsrel=1e-11, limit=300)
    v2, e2 = 0.0, 0.0
    if x_cut > 1.0:
        v2, e2 = quad(f, 1.0, x_cut, epsabs=1e-12, epsrel=1e-11, limit=300)
    return (v1 + v2) / b


def potential_density(beta, lam, t) -> float:
    """Resolvent density beta t^{beta-1} E'_beta(-lam t^beta).

    Equals Int_0^inf e^{-lam r} G_beta(r, t) dr, the lambda-potential density
    of the beta-stable subordinator.
    """
    b = _beta_value(beta)
    lamf, tf = float(lam), float(t)
    if tf <= 0.0:
        raise DomainError("potential density requires t > 0")
    if lamf < 0.0:
        raise DomainError("potential density requires lam >= 0")
    z = -lamf * tf ** b
    if abs(z) > ML_SERIES_GUARD:
        # past the guard the differentiated series is replaced by its
        # completely monotone integral, which has no argument restriction
        deriv = _ml_spectral(z, b, deriv=True)
    else:
        deriv = ml_series_deriv(b, z)
    return b * tf ** (b - 1.0) * deriv
