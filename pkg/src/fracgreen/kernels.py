"""Base spatial Green's functions for the supported operator families.

Families:

* ``ConstantDiffusion(d, A)`` - heat kernel of ``du/dt = div(A grad u)`` with a
  constant SPD matrix ``A``: ``(4 pi t)^{-d/2} det(A)^{-1/2}
  exp{-(x-y)' A^{-1} (x-y) / (4t)}``, with closed-form spatial derivatives.
* ``IsotropicStable(d, alpha)`` - Fourier inversion of ``exp(-t |xi|^alpha)``.
  Self-similarity reduces everything to the unit-time radial profile
  ``P(rho)``; the profile is evaluated by closed forms (alpha = 1, 2), a
  rotated-contour non-oscillatory integral, or oscillatory-weight quadrature,
  and cached on splines for the subordination sweeps.
* ``AnisotropicStable2D(alpha, mu)`` - symbol ``-|xi|^alpha w_mu(xi/|xi|)``
  with ``w_mu`` computed from a spectral density on the unit circle; the 2-D
  inversion is an angular average of a 1-D radial transform.
* ``VariableDiffusion1D(a, b, c, horizon)`` - Crank-Nicolson fundamental
  solution of ``du/dt = a u'' + b u' + c u`` on a truncated line, with
  Rannacher start-up for the point-mass initial condition and a cached time
  history for subordination quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import CubicSpline
from scipy.linalg import solve_banded
from scipy.special import dawsn, gammaln, j0

from .errors import CapabilityError, DomainError, HorizonError

__all__ = [
    "ConstantDiffusion",
    "IsotropicStable",
    "AnisotropicStable2D",
    "VariableDiffusion1D",
    "SpectralMeasure",
    "StableOrder",
    "gaussian_kernel",
    "stable_kernel_isotropic",
    "stable_kernel_anisotropic",
    "fd1d_kernel",
    "coefficient_from_csv",
    "spectral_density_from_csv",
    "COEFFICIENT_BUILTINS",
    "SPECTRAL_BUILTINS",
]


@dataclass(frozen=True)
class StableOrder:
    """Validated spatial stability order alpha in (0, 2]; alpha = 2 is the
    Gaussian sanity limit and is excluded from envelope verification."""

    alpha: float

    def __post_init__(self):
        a = float(self.alpha)
        if not (0.0 < a <= 2.0) or not math.isfinite(a):
            raise DomainError(f"stable order must lie in (0, 2], got {self.alpha}")
        object.__setattr__(self, "alpha", a)


def _alpha_value(alpha) -> float:
    if isinstance(alpha, StableOrder):
        return alpha.alpha
    return StableOrder(float(alpha)).alpha


# ---------------------------------------------------------------------------
# constant-coefficient diffusion
# ---------------------------------------------------------------------------

class ConstantDiffusion:
    """Divergence-form generator with constant SPD diffusion matrix."""

    family = "constant_diffusion"

    def __init__(self, d, matrix=None):
        self.d = int(d)
        if self.d < 1:
            raise DomainError("dimension must be >= 1")
        A = np.eye(self.d) if matrix is None else np.atleast_2d(np.asarray(matrix, dtype=float))
        if A.shape != (self.d, self.d):
            raise DomainError(f"diffusion matrix must be {self.d}x{self.d}")
        if not np.allclose(A, A.T, atol=1e-12):
            raise DomainError("diffusion matrix must be symmetric")
        evals = np.linalg.eigvalsh(A)
        if evals.min() <= 0:
            raise DomainError("diffusion matrix must be positive definite")
        self.matrix = A
        self.ellipticity = float(max(evals.max(), 1.0 / evals.min()))
        self._inv = np.linalg.inv(A)
        self._logdet = float(np.linalg.slogdet(A)[1])
        self.horizon = None

    def _quad_form(self, x, y):
        dx = np.atleast_1d(np.asarray(x, dtype=float)) - np.atleast_1d(np.asarray(y, dtype=float))
        if dx.shape != (self.d,):
            raise DomainError(f"points must have dimension {self.d}")
        return dx, float(dx @ self._inv @ dx)

    def log_value(self, t, x, y) -> float:
        if t <= 0:
            raise DomainError("kernel requires t > 0")
        _, q = self._quad_form(x, y)
        return -0.5 * self.d * math.log(4.0 * math.pi * t) - 0.5 * self._logdet - q / (4.0 * t)

    def value(self, t, x, y) -> float:
        lv = self.log_value(t, x, y)
        return math.exp(lv) if lv > -745.0 else 0.0

    def max_derivative_order(self) -> int:
        return 2

    def derivative(self, t, x, y, k=1, coord=0):
        """k-th derivative in x_coord of the kernel, closed form, k <= 2."""
        if k == 0:
            return self.value(t, x, y)
        if k > 2:
            raise CapabilityError("constant-diffusion derivatives supported up to order 2")
        dx, q = self._quad_form(x, y)
        g = self.value(t, x, y)
        w = self._inv @ dx
        if k == 1:
            return -w[coord] / (2.0 * t) * g
        return ((w[coord] / (2.0 * t)) ** 2 - self._inv[coord, coord] / (2.0 * t)) * g


def gaussian_kernel(spec: ConstantDiffusion, t, x, y) -> float:
    """Heat-kernel value for a constant-diffusion spec."""
    return spec.value(float(t), x, y)


# ---------------------------------------------------------------------------
# isotropic stable radial profiles
# ---------------------------------------------------------------------------

def _profile_exact_d1(alpha, rho):
    """Unit-time symmetric stable density in d=1 at radius rho (exact quad)."""
    if alpha == 2.0:
        return math.exp(-rho * rho / 4.0) / math.sqrt(4.0 * math.pi)
    if alpha == 1.0:
        return 1.0 / (math.pi * (1.0 + rho * rho))
    if rho == 0.0:
        return math.gamma(1.0 + 1.0 / alpha) / math.pi
    if alpha < 1.0:
        c, s = math.cos(math.pi * alpha / 2.0), math.sin(math.pi * alpha / 2.0)
        if rho <= 1.0:
            f = lambda v: math.exp(-rho * v - c * v ** alpha) * math.sin(s * v ** alpha)
            val, _ = quad(f, 0.0, np.inf, epsabs=1e-13, epsrel=1e-11, limit=400)
        else:
            # u = rho v keeps the decay scale O(1)
            f = lambda u: math.exp(-u - c * (u / rho) ** alpha) * math.sin(s * (u / rho) ** alpha)
            val, _ = quad(f, 0.0, np.inf, epsabs=1e-14, epsrel=1e-11, limit=400)
            val /= rho
        return val / math.pi
    # alpha in (1, 2): rotated ray for the far field, cosine weight near field
    if rho <= 4.0:
        xi_max = 40.0 ** (1.0 / alpha)
        f = lambda xi: math.exp(-xi ** alpha)
        val, _ = quad(f, 0.0, xi_max, weight="cos", wvar=rho, epsabs=1e-13, limit=400)
        return val / math.pi
    theta = math.pi / (2.0 * alpha)
    st, ct = math.sin(theta), math.cos(theta)
    f = lambda v: math.exp(-rho * v * st) * math.cos(theta + rho * v * ct - v ** alpha)
    val, _ = quad(f, 0.0, np.inf, epsabs=1e-14, epsrel=1e-11, limit=400)
    return val / math.pi


def _profile_deriv_exact_d1(alpha, rho):
    """d/drho of the d=1 unit-time profile (exact quad)."""
    if alpha == 2.0:
        return -(rho / 2.0) * math.exp(-rho * rho / 4.0) / math.sqrt(4.0 * math.pi)
    if alpha == 1.0:
        return -2.0 * rho / (math.pi * (1.0 + rho * rho) ** 2)
    if rho == 0.0:
        return 0.0
    if alpha < 1.0:
        c, s = math.cos(math.pi * alpha / 2.0), math.sin(math.pi * alpha / 2.0)
        f = lambda v: v * math.exp(-rho * v - c * v ** alpha) * math.sin(s * v ** alpha)
        val, _ = quad(f, 0.0, np.inf, epsabs=1e-13, epsrel=1e-11, limit=400)
        return -val / math.pi
    if rho <= 4.0:
        xi_max = 42.0 ** (1.0 / alpha)
        f = lambda xi: xi * math.exp(-xi ** alpha)
        val, _ = quad(f, 0.0, xi_max, weight="sin", wvar=rho, epsabs=1e-13, limit=400)
        return -val / math.pi
    theta = math.pi / (2.0 * alpha)
    st, ct = math.sin(theta), math.cos(theta)
    f = lambda v: v * math.exp(-rho * v * st) * math.sin(2.0 * theta + rho * v * ct - v ** alpha)
    val, _ = quad(f, 0.0, np.inf, epsabs=1e-14, epsrel=1e-11, limit=400)
    return -val / math.pi


def _tail_series_d1(alpha, rho, deriv=False):
    """Inverse-power tail of the d=1 profile (convergent for alpha < 1,
    truncation-optimal asymptotic for alpha > 1)."""
    total = 0.0
    prev = math.inf
    for k in range(1, 200):
        sk = math.sin(math.pi * k * alpha / 2.0)
        if abs(sk) < 1e-12:
            continue  # vanishing coefficient (integer k*alpha/2), not convergence
        lg = gammaln(k * alpha + 1.0) - gammaln(k + 1.0)
        term = math.exp(lg - (k * alpha + 1.0) * math.log(rho)) * sk * (-1.0) ** (k + 1)
        if deriv:
            term *= -(k * alpha + 1.0) / rho
        if abs(term) > prev:
            break  # asymptotic regime: stop at the smallest term
        total += term
        if abs(term) < 1e-17 * max(abs(total), 1e-300):
            break
        prev = abs(term)
    return total / math.pi


_TAIL_RHO = 60.0


class _StableProfile1D:
    """Spline-cached unit-time profile P(rho) and P'(rho) for d=1."""

    def __init__(self, alpha):
        self.alpha = float(alpha)
        rho_near = np.linspace(0.0, 2.0, 241)
        self._near = CubicSpline(rho_near, [_profile_exact_d1(self.alpha, r) for r in rho_near])
        self._near_d = CubicSpline(rho_near, [_profile_deriv_exact_d1(self.alpha, r) for r in rho_near])
        lr = np.linspace(math.log(2.0), math.log(_TAIL_RHO), 220)
        self._far = CubicSpline(lr, [math.log(_profile_exact_d1(self.alpha, math.exp(s))) for s in lr])
        self._far_d = CubicSpline(
            lr, [math.log(-_profile_deriv_exact_d1(self.alpha, math.exp(s))) for s in lr]
        )

    def value(self, rho):
        rho = abs(float(rho))
        if rho <= 2.0:
            return float(self._near(rho))
        if rho <= _TAIL_RHO:
            return math.exp(float(self._far(math.log(rho))))
        return _tail_series_d1(self.alpha, rho)

    def log_value(self, rho):
        rho = abs(float(rho))
        if rho <= 2.0:
            return math.log(float(self._near(rho)))
        if rho <= _TAIL_RHO:
            return float(self._far(math.log(rho)))
        return math.log(_tail_series_d1(self.alpha, rho))

    def deriv(self, rho):
        rho = abs(float(rho))
        if rho <= 2.0:
            return float(self._near_d(rho))
        if rho <= _TAIL_RHO:
            return -math.exp(float(self._far_d(math.log(rho))))
        return _tail_series_d1(self.alpha, rho, deriv=True)


@lru_cache(maxsize=32)
def _profile_1d(alpha: float) -> _StableProfile1D:
    return _StableProfile1D(alpha)


def _tail_series_radial(alpha, d, rho):
    """Inverse-power tail of the d-dimensional radial profile.

    Termwise Hankel transform of the symbol expansion gives

        sum_{k>=1} (-1)^{k+1} 2^{k alpha} Gamma((d + k alpha)/2)
        Gamma(1 + k alpha/2) sin(pi k alpha/2) / (pi^{d/2+1} k!)
        * rho^{-d - k alpha},

    convergent for alpha < 1 and truncation-optimal asymptotic for alpha > 1.
    """
    total = 0.0
    prev = math.inf
    for k in range(1, 200):
        sk = math.sin(math.pi * k * alpha / 2.0)
        if abs(sk) < 1e-12:
            continue
        lg = (
            k * alpha * math.log(2.0)
            + gammaln((d + k * alpha) / 2.0)
            + gammaln(1.0 + k * alpha / 2.0)
            - gammaln(k + 1.0)
            - (d + k * alpha) * math.log(rho)
        )
        term = math.exp(lg) * sk * (-1.0) ** (k + 1)
        if abs(term) > prev:
            break
        total += term
        if abs(term) < 1e-17 * max(abs(total), 1e-300):
            break
        prev = abs(term)
    return total / math.pi ** (d / 2.0 + 1.0)


def _profile_exact_radial(alpha, d, rho):
    """Unit-time radial profile for d in {2, 3}."""
    if alpha == 2.0:
        return math.exp(-rho * rho / 4.0) / (4.0 * math.pi) ** (d / 2.0)
    if alpha == 1.0:
        cd = math.gamma((d + 1.0) / 2.0) / math.pi ** ((d + 1.0) / 2.0)
        return cd / (1.0 + rho * rho) ** ((d + 1.0) / 2.0)
    if rho > 20.0:
        return _tail_series_radial(alpha, d, rho)
    xi_max = 40.0 ** (1.0 / alpha)
    if d == 2:
        f = lambda xi: math.exp(-xi ** alpha) * j0(xi * rho) * xi
        pieces = np.unique(np.concatenate([[0.0, xi_max],
            [(k - 0.25) * math.pi / rho for k in range(1, 60) if rho > 0 and (k - 0.25) * math.pi / rho < xi_max]]))
        val = 0.0
        for lo, hi in zip(pieces[:-1], pieces[1:]):
            v, _ = quad(f, lo, hi, epsabs=1e-13, epsrel=1e-11, limit=200)
            val += v
        return val / (2.0 * math.pi)
    if d == 3:
        if rho == 0.0:
            f0 = lambda xi: math.exp(-xi ** alpha) * xi * xi
            val, _ = quad(f0, 0.0, xi_max, epsabs=1e-13, limit=300)
            return val / (2.0 * math.pi ** 2)
        f = lambda xi: math.exp(-xi ** alpha) * xi
        val, _ = quad(f, 0.0, xi_max, weight="sin", wvar=rho, epsabs=1e-13, limit=400)
        return val / (2.0 * math.pi ** 2 * rho)
    raise CapabilityError("isotropic stable kernels implemented for d in {1, 2, 3}")


class IsotropicStable:
    """Rotationally invariant stable generator with symbol -|xi|^alpha."""

    family = "isotropic_stable"

    def __init__(self, d, alpha):
        self.d = int(d)
        if self.d < 1:
            raise DomainError("dimension must be >= 1")
        self.alpha = _alpha_value(alpha)
        self.horizon = None
        # alpha = 2 short-circuits to the Gaussian closed form everywhere
        self._profile = _profile_1d(self.alpha) if (self.d == 1 and self.alpha < 2.0) else None

    def profile(self, rho) -> float:
        """Unit-time kernel at scaled radius rho."""
        if self.alpha == 2.0:
            rho = abs(float(rho))
            lv = -rho * rho / 4.0 - 0.5 * self.d * math.log(4.0 * math.pi)
            return math.exp(lv) if lv > -745.0 else 0.0
        if self.d == 1:
            return self._profile.value(rho)
        return _profile_exact_radial(self.alpha, self.d, abs(float(rho)))

    def log_profile(self, rho) -> float:
        if self.alpha == 2.0:
            rho = abs(float(rho))
            return -rho * rho / 4.0 - 0.5 * self.d * math.log(4.0 * math.pi)
        if self.d == 1:
            return self._profile.log_value(rho)
        v = self.profile(rho)
        if v <= 0:
            raise CapabilityError("radial quadrature lost positivity; out of validated range")
        return math.log(v)

    def value(self, t, r) -> float:
        if t <= 0:
            raise DomainError("kernel requires t > 0")
        r = abs(float(r))
        s = t ** (-1.0 / self.alpha)
        return t ** (-self.d / self.alpha) * self.profile(r * s)

    def log_value(self, t, r) -> float:
        if t <= 0:
            raise DomainError("kernel requires t > 0")
        r = abs(float(r))
        return -self.d / self.alpha * math.log(t) + self.log_profile(r * t ** (-1.0 / self.alpha))

    def max_derivative_order(self) -> int:
        return 1 if self.d == 1 else 0

    def derivative(self, t, x, y, k=1, coord=0):
        """Signed spatial derivative d/dx of G(t, x - y); d = 1 only."""
        if k == 0:
            return self.value(t, abs(float(x) - float(y)))
        if self.d != 1 or k > 1:
            raise CapabilityError("stable-kernel derivatives implemented for d = 1, k = 1")
        rr = float(x) - float(y)
        s = t ** (-1.0 / self.alpha)
        if self.alpha == 2.0:
            rho = abs(rr) * s
            dmag = -(rho / 2.0) * math.exp(-rho * rho / 4.0) / math.sqrt(4.0 * math.pi)
        else:
            dmag = self._profile.deriv(abs(rr) * s)
        mag = t ** (-2.0 / self.alpha) * dmag
        return math.copysign(mag, -rr) if rr != 0.0 else 0.0


def stable_kernel_isotropic(spec: IsotropicStable, t, r) -> float:
    """Radial kernel value for an isotropic stable spec."""
    return spec.value(float(t), float(r))


# ---------------------------------------------------------------------------
# anisotropic 2-D stable
# ---------------------------------------------------------------------------

def _radial_cos_transform(alpha, sigma):
    """C_alpha(sigma) = Int_0^inf rho e^{-rho^alpha} cos(sigma rho) drho."""
    sigma = abs(float(sigma))
    if alpha == 1.0:
        return (1.0 - sigma * sigma) / (1.0 + sigma * sigma) ** 2
    if alpha == 2.0:
        # integration by parts against the Dawson integral
        return 0.5 - 0.5 * sigma * dawsn(0.5 * sigma)
    if alpha < 1.0:
        c, s = math.cos(math.pi * alpha / 2.0), math.sin(math.pi * alpha / 2.0)
        f = lambda v: v * math.exp(-sigma * v - c * v ** alpha) * math.cos(s * v ** alpha)
        val, _ = quad(f, 0.0, np.inf, epsabs=1e-13, epsrel=1e-11, limit=400)
        return -val
    if sigma <= 4.0:
        xi_max = 42.0 ** (1.0 / alpha)
        f = lambda xi: xi * math.exp(-xi ** alpha)
        val, _ = quad(f, 0.0, xi_max, weight="cos", wvar=sigma, epsabs=1e-13, limit=400)
        return val
    theta = math.pi / (2.0 * alpha)
    st, ct = math.sin(theta), math.cos(theta)
    f = lambda v: v * math.exp(-sigma * v * st) * math.cos(2.0 * theta + sigma * v * ct - v ** alpha)
    val, _ = quad(f, 0.0, np.inf, epsabs=1e-14, epsrel=1e-11, limit=400)
    return val


def _radial_cos_tail(alpha, sigma):
    """Large-sigma expansion of C_alpha: -sigma^{-2} plus the symbol-series
    correction terms (boundary term of double integration by parts)."""
    sigma = np.asarray(sigma, dtype=float)
    out = -(sigma ** -2.0)
    for k in range(1, 40):
        ck = math.cos(math.pi * k * alpha / 2.0)
        if abs(ck) < 1e-12:
            continue
        coeff = (-1.0) ** (k + 1) * math.exp(gammaln(k * alpha + 2.0) - gammaln(k + 1.0)) * ck
        term = coeff * sigma ** (-k * alpha - 2.0)
        out = out + term
        if np.max(np.abs(term)) < 1e-18 * np.max(np.abs(out)):
            break
    return out


_COS_SPLINE_CAP = 400.0


@lru_cache(maxsize=32)
class _RadialCosSpline:
    def __init__(self, alpha):
        self.alpha = float(alpha)
        grid = np.concatenate([np.linspace(0.0, 8.0, 481), np.geomspace(8.1, _COS_SPLINE_CAP, 320)])
        self._spline = CubicSpline(grid, [_radial_cos_transform(self.alpha, s) for s in grid])

    def __call__(self, sigma):
        sigma = np.abs(np.asarray(sigma, dtype=float))
        inside = sigma <= _COS_SPLINE_CAP
        out = np.empty_like(sigma)
        out[inside] = self._spline(sigma[inside])
        if np.any(~inside):
            out[~inside] = _radial_cos_tail(self.alpha, sigma[~inside])
        return out


class SpectralMeasure:
    """Spectral density on the unit circle sampled on a uniform angular grid."""

    def __init__(self, density_values, *, angles=None):
        vals = np.asarray(density_values, dtype=float)
        if vals.ndim != 1 or vals.size < 8:
            raise DomainError("need at least 8 angular density samples")
        if np.any(vals <= 0.0):
            raise DomainError("spectral density must be strictly positive")
        self.values = vals
        self.angles = (
            np.linspace(0.0, 2.0 * math.pi, vals.size, endpoint=False)
            if angles is None
            else np.asarray(angles, dtype=float)
        )
        self.weights = np.full(vals.size, 2.0 * math.pi / vals.size)

    @classmethod
    def from_callable(cls, fn, n=256):
        ang = np.linspace(0.0, 2.0 * math.pi, n, endpoint=False)
        return cls(np.array([fn(a) for a in ang]), angles=ang)

    @classmethod
    def uniform(cls, alpha, n=256):
        """Uniform measure normalised so that w_mu is identically 1."""
        alpha = _alpha_value(alpha)
        mean_abs_cos = (
            math.gamma((alpha + 1.0) / 2.0) / (math.sqrt(math.pi) * math.gamma(alpha / 2.0 + 1.0))
        )
        const = 1.0 / (2.0 * math.pi * mean_abs_cos)
        return cls(np.full(n, const))

    def _density_spline(self):
        # periodic cubic interpolant of the sampled density
        ext_x = np.concatenate([self.angles, [self.angles[0] + 2.0 * math.pi]])
        ext_v = np.concatenate([self.values, [self.values[0]]])
        return CubicSpline(ext_x, ext_v, bc_type="periodic")

    def w_values(self, alpha):
        """w_mu on the angular grid: w(theta) = Int |cos(theta - s)|^alpha mu(ds).

        |cos|^alpha has derivative cusps at +-pi/2; the quadrature grades
        geometrically into the cusps so the cusp error stays below the
        density-interpolation error.
        """
        alpha = _alpha_value(alpha)
        dens = self._density_spline()
        xg, wg = np.polynomial.legendre.leggauss(12)
        nodes, weights = [], []
        # panels on [0, pi/2] clustered at pi/2, mirrored to the other arcs
        edges = math.pi / 2.0 - math.pi / 2.0 * 0.55 ** np.arange(0, 40)
        edges = np.concatenate([edges, [math.pi / 2.0]])
        for lo, hi in zip(edges[:-1], edges[1:]):
            mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
            nodes.append(mid + half * xg)
            weights.append(half * wg)
        base = np.concatenate(nodes)
        wq = np.concatenate(weights)
        # reflect: delta in [-pi/2, pi/2] and [pi/2, 3 pi/2]
        deltas = np.concatenate([base, -base, math.pi - base, math.pi + base])
        wq4 = np.concatenate([wq, wq, wq, wq])
        kern = np.abs(np.cos(deltas)) ** alpha
        two_pi = 2.0 * math.pi
        args = (self.angles[:, None] - deltas[None, :]) % two_pi
        return (kern[None, :] * dens(args)) @ wq4


class AnisotropicStable2D:
    """2-D stable generator with symbol -|xi|^alpha w_mu(xi/|xi|)."""

    family = "anisotropic_stable_2d"

    def __init__(self, alpha, spectral_measure: SpectralMeasure):
        self.alpha = _alpha_value(alpha)
        if self.alpha >= 2.0:
            raise DomainError("anisotropic family requires alpha in (0, 2)")
        self.d = 2
        self.measure = spectral_measure
        self.w = spectral_measure.w_values(self.alpha)
        if np.any(self.w <= 0.0):
            raise DomainError("w_mu must be strictly positive")
        self.horizon = None
        self._cos = _RadialCosSpline(self.alpha)

    def _w_spline(self):
        if getattr(self, "_w_interp", None) is None:
            ang = np.concatenate([self.measure.angles, [self.measure.angles[0] + 2.0 * math.pi]])
            vals = np.concatenate([self.w, [self.w[0]]])
            self._w_interp = CubicSpline(ang, vals, bc_type="periodic")
        return self._w_interp

    def value(self, t, x) -> float:
        """Kernel at offset x (2-vector) via angular average of the radial transform."""
        if t <= 0:
            raise DomainError("kernel requires t > 0")
        x = np.asarray(x, dtype=float).reshape(2)
        rho = float(np.hypot(x[0], x[1]))
        phase = math.atan2(x[1], x[0])
        sigma_max = rho * (t * float(np.min(self.w))) ** (-1.0 / self.alpha)
        two_pi = 2.0 * math.pi
        if sigma_max <= 420.0:
            # uniform trapezoid on a smooth periodic integrand is spectrally
            # accurate once the radial transform's angular feature (~1/sigma
            # wide) is resolved; densify with sigma_max
            n = max(self.measure.values.size, min(int(32.0 * sigma_max), 16384))
            if n == self.measure.values.size:
                ang, wv = self.measure.angles, self.w
            else:
                ang = np.linspace(0.0, two_pi, n, endpoint=False)
                wv = self._w_spline()(ang)
            tw = t * wv
            scale = tw ** (-2.0 / self.alpha)
            sigma = rho * np.cos(ang - phase) * tw ** (-1.0 / self.alpha)
            integrand = scale * self._cos(sigma)
            return float(integrand.mean()) / (2.0 * math.pi)
        # very large scaled radius: integrate adaptively with break points at
        # the crossing angles where the radial transform varies fastest
        wsp = self._w_spline()

        def integrand(theta):
            wv = float(wsp(theta % two_pi))
            tw = t * wv
            sig = rho * math.cos(theta - phase) * tw ** (-1.0 / self.alpha)
            return tw ** (-2.0 / self.alpha) * float(self._cos(sig))

        breaks = sorted(((phase + 0.5 * math.pi) % two_pi, (phase + 1.5 * math.pi) % two_pi))
        pieces = [0.0] + [b for b in breaks if 0.0 < b < two_pi] + [two_pi]
        total = 0.0
        for lo, hi in zip(pieces[:-1], pieces[1:]):
            v, _ = quad(integrand, lo, hi, epsabs=1e-12, epsrel=3e-8, limit=200)
            total += v
        return total / (2.0 * math.pi) ** 2

    def log_value(self, t, x) -> float:
        v = self.value(t, x)
        if v <= 0.0:
            raise CapabilityError("anisotropic evaluation lost positivity; out of validated range")
        return math.log(v)

    def max_derivative_order(self) -> int:
        return 0

    def mass(self, t, half_width=None, n=401) -> float:
        """Numerical mass over a truncated square (tensor trapezoid)."""
        if half_width is None:
            half_width = 60.0 * t ** (1.0 / self.alpha)
        xs = np.linspace(-half_width, half_width, n)
        vals = np.empty((n, n))
        for i, xi in enumerate(xs):
            for jj, xj in enumerate(xs):
                vals[i, jj] = self.value(t, (xi, xj))
        return float(np.trapezoid(np.trapezoid(vals, xs, axis=1), xs))


def stable_kernel_anisotropic(spec: AnisotropicStable2D, t, x) -> float:
    return spec.value(float(t), x)


# ---------------------------------------------------------------------------
# 1-D variable-coefficient diffusion (Crank-Nicolson)
# ---------------------------------------------------------------------------

COEFFICIENT_BUILTINS = {
    "one": lambda x: np.ones_like(np.asarray(x, dtype=float)),
    "zero": lambda x: np.zeros_like(np.asarray(x, dtype=float)),
    "sin_bump": lambda x: 1.0 + 0.5 * np.sin(np.asarray(x, dtype=float)),
}

SPECTRAL_BUILTINS = {
    "uniform": lambda theta: np.ones_like(np.asarray(theta, dtype=float)),
    "two_bump": lambda theta: 1.0 + 0.5 * np.cos(2.0 * np.asarray(theta, dtype=float)),
}


def coefficient_from_csv(path):
    """Callable coefficient from a two-column (x, value) CSV file."""
    data = np.loadtxt(path, delimiter=",")
    xs, vals = data[:, 0], data[:, 1]
    return lambda x: np.interp(np.asarray(x, dtype=float), xs, vals)


def spectral_density_from_csv(path, alpha=None):
    """SpectralMeasure from a two-column (angle, value) CSV file."""
    data = np.loadtxt(path, delimiter=",")
    return SpectralMeasure(data[:, 1], angles=data[:, 0])


class _History:
    """Stored Crank-Nicolson evolution from a point source."""

    def __init__(self, xs, times, profiles, t_splice, a_mid, c_mid, y):
        self.xs = xs
        self.times = times
        self.profiles = profiles  # (len(times), len(xs))
        self.t_splice = t_splice
        self.a_mid = a_mid
        self.c_mid = c_mid
        self.y = y
        self.t_max = float(times[-1])

    def eval(self, t, x) -> float:
        if t <= self.t_splice:
            # frozen-coefficient Gaussian; exact for constant coefficients
            a = self.a_mid(0.5 * (x + self.y))
            g = math.exp(-((x - self.y) ** 2) / (4.0 * a * t)) / math.sqrt(4.0 * math.pi * a * t)
            return g * math.exp(self.c_mid(0.5 * (x + self.y)) * t)
        if t > self.t_max * (1.0 + 1e-12):
            raise HorizonError(f"history stored up to t = {self.t_max:g}, asked for {t:g}")
        it = np.searchsorted(self.times, t)
        it = min(max(it, 1), len(self.times) - 1)
        t0, t1 = self.times[it - 1], self.times[it]
        v0 = float(np.interp(x, self.xs, self.profiles[it - 1]))
        v1 = float(np.interp(x, self.xs, self.profiles[it]))
        if v0 > 0.0 and v1 > 0.0:
            # log-linear in 1/t is exact for frozen-coefficient Gaussians,
            # so the stored-step interpolation error does not blow up in
            # the tails the way linear-in-t interpolation would
            w = (1.0 / t - 1.0 / t0) / (1.0 / t1 - 1.0 / t0)
            return math.exp((1.0 - w) * math.log(v0) + w * math.log(v1))
        w = (t - t0) / (t1 - t0)
        return (1.0 - w) * v0 + w * v1


class VariableDiffusion1D:
    """Fundamental solution of du/dt = a(x) u'' + b(x) u' + c(x) u, 0 < t <= horizon."""

    family = "variable_diffusion_1d"
    d = 1

    def __init__(self, a, b=None, c=None, horizon=1.0, *, half_width=None, dx=0.01, dt=0.01):
        self.a = a if callable(a) else COEFFICIENT_BUILTINS[a]
        self.b = (b if callable(b) else COEFFICIENT_BUILTINS[b]) if b is not None else COEFFICIENT_BUILTINS["zero"]
        self.c = (c if callable(c) else COEFFICIENT_BUILTINS[c]) if c is not None else COEFFICIENT_BUILTINS["zero"]
        self.horizon = float(horizon)
        if self.horizon <= 0:
            raise DomainError("horizon must be positive")
        self.dx = float(dx)
        self.dt = float(dt)
        self._half_width = half_width
        self._histories: dict = {}

        probe = np.linspace(-20.0, 20.0, 401)
        av = np.asarray(self.a(probe), dtype=float)
        if av.min() <= 0.0:
            raise DomainError("a(x) must be bounded away from zero")
        da = np.diff(av) / np.diff(probe)
        for name, arr in (("b", np.asarray(self.b(probe), dtype=float)),
                          ("c", np.asarray(self.c(probe), dtype=float))):
            if not np.all(np.isfinite(arr)):
                raise DomainError(f"{name}(x) must be bounded")
        if not np.all(np.isfinite(da)):
            raise DomainError("a(x) must be C^1 on the working domain")
        self.a_max = float(av.max())
        self.a_min = float(av.min())
        self.t_splice = max(25.0 * self.dx ** 2 / self.a_min, 1e-4)

    def _domain(self, y, t_max):
        if self._half_width is not None:
            L = self._half_width
        else:
            # Gaussian tail below 1e-12 at the boundary for the whole run
            L = math.sqrt(4.0 * self.a_max * t_max * math.log(1e14)) + 3.0
        # keep the source exactly on a node: a half-cell offset would shift
        # the whole fundamental solution by dx/2
        m = int(math.ceil(L / self.dx))
        return y + self.dx * np.arange(-m, m + 1, dtype=float)

    def _step_matrices(self, xs, dt):
        h = xs[1] - xs[0]
        av = np.asarray(self.a(xs), dtype=float)
        bv = np.asarray(self.b(xs), dtype=float)
        cv = np.asarray(self.c(xs), dtype=float)
        lower = av / h ** 2 - bv / (2.0 * h)
        diag = -2.0 * av / h ** 2 + cv
        upper = av / h ** 2 + bv / (2.0 * h)
        return lower, diag, upper

    def _run(self, y, t_max):
        xs = self._domain(y, t_max)
        n = xs.size
        lower, diag, upper = self._step_matrices(xs, self.dt)

        h = xs[1] - xs[0]
        u = np.zeros(n)
        iy = int(np.argmin(np.abs(xs - y)))
        u[iy] = 1.0 / h

        def implicit_step(u, dtv, theta):
            # (I - theta dt A) u_new = (I + (1-theta) dt A) u
            rhs = u.copy()
            if theta < 1.0:
                w = (1.0 - theta) * dtv
                rhs[1:-1] = u[1:-1] + w * (
                    lower[1:-1] * u[:-2] + diag[1:-1] * u[1:-1] + upper[1:-1] * u[2:]
                )
            ab = np.zeros((3, n))
            ab[0, 1:] = -theta * dtv * upper[:-1]
            ab[1, :] = 1.0 - theta * dtv * diag
            ab[2, :-1] = -theta * dtv * lower[1:]
            ab[1, 0] = ab[1, -1] = 1.0
            ab[0, 1] = ab[2, -2] = 0.0
            rhs[0] = rhs[-1] = 0.0
            return solve_banded((1, 1), ab, rhs)

        # Rannacher start-up: damped implicit-Euler half steps kill the
        # point-mass ringing that plain Crank-Nicolson would carry
        t = 0.0
        dt0 = min(self.dt / 8.0, self.t_splice / 8.0)
        for _ in range(4):
            u = implicit_step(u, dt0 / 2.0, 1.0)
            t += dt0 / 2.0
        # geometric ramp up to the working step; dt is kept a small
        # fraction of elapsed time so the Crank-Nicolson truncation error
        # (dt/t)^2 stays uniformly small through the transient
        dtv = dt0
        times = [t]
        profiles = [u.copy()]
        while dtv < self.dt * 0.999:
            dtv = min(dtv * 1.05, 0.05 * t, self.dt)
            dtv = max(dtv, dt0)
            u = implicit_step(u, dtv, 0.5)
            t += dtv
            times.append(t)
            profiles.append(u.copy())
        while t < t_max:
            u = implicit_step(u, self.dt, 0.5)
            t += self.dt
            times.append(t)
            profiles.append(u.copy())
        return _History(
            xs, np.array(times), np.array(profiles), self.t_splice,
            self.a, self.c, y,
        )

    def history(self, y, t_max=None) -> _History:
        """Cached evolution from a point source at y, stored to t_max."""
        t_max = self.horizon if t_max is None else float(t_max)
        key = (float(y), round(t_max, 12))
        got = self._histories.get(key)
        if got is None:
            got = self._run(float(y), t_max)
            self._histories[key] = got
        return got

    def value(self, t, x, y, *, allow_beyond_horizon=False) -> float:
        t = float(t)
        if t <= 0:
            raise DomainError("kernel requires t > 0")
        if t > self.horizon and not allow_beyond_horizon:
            raise HorizonError(f"t = {t:g} beyond horizon T = {self.horizon:g}")
        hist = self.history(y, t_max=max(self.horizon, t))
        return hist.eval(t, float(x))

    def log_value(self, t, x, y) -> float:
        v = self.value(t, x, y)
        return math.log(v) if v > 0 else -math.inf

    def max_derivative_order(self) -> int:
        return 0

    def grid_mass(self, t, y=0.0) -> float:
        hist = self.history(y, t_max=max(self.horizon, t))
        it = int(np.searchsorted(hist.times, t))
        it = min(max(it, 1), len(hist.times) - 1)
        t0, t1 = hist.times[it - 1], hist.times[it]
        w = (t - t0) / (t1 - t0)
        row = (1.0 - w) * hist.profiles[it - 1] + w * hist.profiles[it]
        return float(np.trapezoid(row, hist.xs))


def fd1d_kernel(spec: VariableDiffusion1D, t, x, y) -> float:
    """Fundamental-solution value for the 1-D variable-coefficient family."""
    return spec.value(float(t), float(x), float(y))
