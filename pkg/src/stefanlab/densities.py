"""Initial-condition density families.

Four families share one interface (pdf, cdf, sample, first moment, windowed sup):

* ``PiecewiseGeometricDensity`` -- two levels alternating on geometrically
  shrinking bands accumulating at 0; the CDF oscillates between two straight
  lines through the origin. Exact rational arithmetic when parameters are.
* ``PeriodicOscillatoryDensity`` -- (1 + profile(1/x^alpha)) / 2 on (0, a], with
  the support endpoint a fixed by normalization.
* ``GaussianPathDensity`` -- a clipped Gaussian sample path minus an
  iterated-logarithm envelope on [0, 1], plus an exponential tail.
* ``TabulatedDensity`` -- grid + values with linear interpolation.

Densities are immutable after construction and safe to share across threads.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np
from scipy.linalg import cholesky as _cholesky, LinAlgError as _LinAlgError

from . import rng
from .numerics import adaptive_simpson, bisect_nondecreasing

__all__ = [
    "DensityError",
    "Density",
    "PiecewiseGeometricDensity",
    "PeriodicOscillatoryDensity",
    "GaussianPathDensity",
    "TabulatedDensity",
    "SinusoidProfile",
    "TabulatedProfile",
    "make_piecewise",
    "normalize_periodic",
    "build_gaussian_path",
    "uniform_density",
    "make_density",
    "density_from_json",
    "tabulated_from_csv",
    "pdf",
    "cdf",
    "sample",
]


class DensityError(ValueError):
    pass


def _as_fraction(v):
    """Exact value for int/Fraction/str inputs, None for anything else."""
    if isinstance(v, Fraction):
        return v
    if isinstance(v, int):
        return Fraction(v)
    if isinstance(v, str):
        return Fraction(v)
    return None


# ---------------------------------------------------------------------------
# periodic profiles
# ---------------------------------------------------------------------------


class SinusoidProfile:
    """a*sin(u) + b*cos(u) + c, period 2*pi.

    Closed under the antiderivative-of-the-zero-mean-part operation used by the
    oscillatory tail expansion, so the built-in sine family needs no tabulation.
    """

    def __init__(self, a=1.0, b=0.0, c=0.0):
        self.a = float(a)
        self.b = float(b)
        self.c = float(c)
        self.period = 2.0 * math.pi
        self.mean = self.c
        self.sup_abs = math.hypot(self.a, self.b) + abs(self.c)

    def eval(self, u):
        u = np.asarray(u, dtype=float)
        return self.a * np.sin(u) + self.b * np.cos(u) + self.c

    def antiderivative_stage(self):
        # integral from 0 of (a sin + b cos): -a cos(u) + b sin(u) + a
        return SinusoidProfile(self.b, -self.a, self.a)

    def affine(self, scale, shift):
        return SinusoidProfile(self.a * scale, self.b * scale, self.c * scale + shift)

    def sup_on(self, ulo, uhi):
        """(sup, argmax) of the profile on [ulo, uhi] (uhi may be inf)."""
        amp = math.hypot(self.a, self.b)
        if amp == 0.0:
            return self.c, ulo
        # a sin u + b cos u = amp * sin(u + phi), phi = atan2(b, a)
        phi = math.atan2(self.b, self.a)
        if not math.isfinite(uhi) or uhi - ulo >= self.period:
            u_star = (math.pi / 2.0 - phi) % self.period
            k = math.ceil((ulo - u_star) / self.period)
            return self.c + amp, u_star + k * self.period
        # first peak at or after ulo
        u_star = math.pi / 2.0 - phi
        k = math.ceil((ulo - u_star) / self.period)
        u_star += k * self.period
        if u_star <= uhi:
            return self.c + amp, u_star
        lo_v = float(self.eval(ulo))
        hi_v = float(self.eval(uhi))
        return (lo_v, ulo) if lo_v >= hi_v else (hi_v, uhi)


class TabulatedProfile:
    """Periodic profile given by uniform samples over one period, linear in between.

    Antiderivative stages are exact piecewise polynomials (degree grows by one
    per stage); suprema are bounded by dense sampling with a small safety factor.
    """

    def __init__(self, period, values, _pieces=None):
        self.period = float(period)
        values = np.asarray(values, dtype=float)
        if self.period <= 0.0:
            raise DensityError("profile period must be positive")
        if _pieces is None:
            m = len(values)
            if m < 2:
                raise DensityError("tabulated profile needs at least 2 samples")
            h = self.period / m
            breaks = np.arange(m + 1) * h
            nxt = np.concatenate([values[1:], values[:1]])
            # per piece: v_j + (v_{j+1} - v_j) * xi / h, xi local
            coeffs = np.zeros((m, 2))
            coeffs[:, 0] = values
            coeffs[:, 1] = (nxt - values) / h
            self._breaks = breaks
            self._coeffs = coeffs
            # piecewise-linear extremes sit at the nodes, so this sup is exact
            self.sup_abs = float(np.max(np.abs(values)))
        else:
            self._breaks, self._coeffs = _pieces
            self.sup_abs = self._estimate_sup_abs()
        self.values = values
        self.mean = self._piece_integral_total() / self.period

    def _piece_integral_total(self):
        widths = np.diff(self._breaks)
        total = 0.0
        for j in range(len(widths)):
            total += _poly_integral(self._coeffs[j], widths[j])
        return total

    def _estimate_sup_abs(self):
        us = np.linspace(0.0, self.period, 64 * len(self._coeffs) + 1)
        return float(np.max(np.abs(self.eval(us)))) * 1.02

    def eval(self, u):
        u = np.asarray(u, dtype=float)
        um = np.mod(u, self.period)
        idx = np.clip(np.searchsorted(self._breaks, um, side="right") - 1, 0, len(self._coeffs) - 1)
        xi = um - self._breaks[idx]
        out = np.zeros_like(um)
        deg = self._coeffs.shape[1]
        for k in range(deg - 1, -1, -1):
            out = out * xi + self._coeffs[idx, k]
        return out if out.shape else float(out)

    def antiderivative_stage(self):
        m, deg = self._coeffs.shape
        widths = np.diff(self._breaks)
        new = np.zeros((m, deg + 1))
        # antiderivative of each piece, then continuity constants, then -mean*u
        for k in range(deg):
            new[:, k + 1] = self._coeffs[:, k] / (k + 1)
        cum = 0.0
        for j in range(m):
            new[j, 0] = cum
            cum = _poly_eval(new[j], widths[j])
        # subtract mean * u = mean * (break_j + xi)
        new[:, 0] -= self.mean * self._breaks[:-1]
        new[:, 1] -= self.mean
        prof = TabulatedProfile(self.period, self.values, _pieces=(self._breaks, new))
        return prof

    def affine(self, scale, shift):
        coeffs = self._coeffs * scale
        coeffs = coeffs.copy()
        coeffs[:, 0] += shift
        return TabulatedProfile(self.period, self.values * scale + shift,
                                _pieces=(self._breaks, coeffs))

    def sup_on(self, ulo, uhi):
        if not math.isfinite(uhi) or uhi - ulo >= self.period:
            us = np.linspace(0.0, self.period, 32 * len(self._coeffs) + 1)
            vals = self.eval(us)
            i = int(np.argmax(vals))
            u_star = us[i]
            k = math.ceil((ulo - u_star) / self.period)
            return float(vals[i]), u_star + k * self.period
        us = np.linspace(ulo, uhi, max(17, int(32 * (uhi - ulo) / self.period) + 2))
        vals = self.eval(us)
        i = int(np.argmax(vals))
        return float(vals[i]), float(us[i])


def _poly_eval(coeffs, x):
    out = 0.0
    for c in coeffs[::-1]:
        out = out * x + c
    return out


def _poly_integral(coeffs, width):
    out = 0.0
    for k, c in enumerate(coeffs):
        out += c * width ** (k + 1) / (k + 1)
    return out


def make_profile(spec):
    """Profile from a JSON-style spec: "sin", a number (constant), or
    {"period": P, "values": [...]} sampled uniformly over one period."""
    if isinstance(spec, SinusoidProfile) or isinstance(spec, TabulatedProfile):
        return spec
    if spec == "sin":
        return SinusoidProfile(1.0, 0.0, 0.0)
    if isinstance(spec, (int, float)):
        return SinusoidProfile(0.0, 0.0, float(spec))
    if isinstance(spec, dict):
        return TabulatedProfile(spec["period"], spec["values"])
    raise DensityError(f"unrecognized profile spec: {spec!r}")


# ---------------------------------------------------------------------------
# base class
# ---------------------------------------------------------------------------


class Density:
    """Common interface; subclasses fill in the family-specific pieces."""

    family = "abstract"

    def pdf(self, x):
        raise NotImplementedError

    def cdf(self, x):
        raise NotImplementedError

    def cdf_fast(self, x):
        """Vectorized, monotone CDF for Monte Carlo inner loops.

        Defaults to cdf(); families with an expensive exact CDF override this
        with a cached interpolation table.
        """
        return self.cdf(x)

    def sample(self, u):
        raise NotImplementedError

    def first_moment(self):
        raise NotImplementedError

    def sup_pdf(self, lo, hi):
        """(sup of pdf on (lo, hi], argmax). Exact where the family allows."""
        raise NotImplementedError

    @property
    def support_upper(self):
        raise NotImplementedError

    def spec_dict(self):
        raise NotImplementedError


# ---------------------------------------------------------------------------
# piecewise geometric family
# ---------------------------------------------------------------------------


class PiecewiseGeometricDensity(Density):
    """Two-level density on bands [a_{2n}, a_{2n-1}) (level alpha1) and
    [a_{2n+1}, a_{2n}) (level alpha2) with a_{2n-1} = r^{n-1} a1,
    a_{2n} = p r^{n-1} a1, r = p q, accumulating at 0.

    The outer endpoint is fixed to a1 = 1/beta1 so the total mass is exactly 1.
    With rational parameters all band arithmetic is exact. The float path uses
    a band table truncated where a_{2n+1} < 1e-14 * a1, with the residual mass
    carried by a uniform sliver at level beta1 (whose mass beta1 * a_{2N+1}
    equals the exact CDF there, so normalization is preserved).
    """

    family = "piecewise"

    def __init__(self, alpha1, alpha2, p, q):
        fr = [_as_fraction(v) for v in (alpha1, alpha2, p, q)]
        self.exact = all(v is not None for v in fr)
        if self.exact:
            alpha1, alpha2, p, q = fr
        else:
            alpha1, alpha2, p, q = (float(alpha1), float(alpha2), float(p), float(q))
        one = Fraction(1) if self.exact else 1.0
        if not (0 < alpha1 < one):
            raise DensityError(f"alpha1 must lie in (0, 1), got {alpha1}")
        if not (alpha2 > one):
            raise DensityError(f"alpha2 must exceed 1, got {alpha2}")
        if not (0 < p < one and 0 < q < one):
            raise DensityError(f"p, q must lie in (0, 1), got p={p}, q={q}")
        self.alpha1, self.alpha2, self.p, self.q = alpha1, alpha2, p, q
        self.r = p * q
        self.beta1 = (alpha2 * p * (one - q) + alpha1 * (one - p)) / (one - p * q)
        self.beta2 = (alpha2 * (one - q) + alpha1 * q * (one - p)) / (one - p * q)
        self.a1 = one / self.beta1
        self.admissible = self.beta2 < one
        self._build_float_tables()

    # -- band bookkeeping ---------------------------------------------------

    def odd_endpoint(self, n):
        """a_{2n-1} = r^(n-1) a1 for n >= 1."""
        return self.r ** (n - 1) * self.a1

    def even_endpoint(self, n):
        """a_{2n} = p r^(n-1) a1 for n >= 1."""
        return self.p * self.r ** (n - 1) * self.a1

    def _band_of(self, x):
        """(level, lower, upper, n) of the band containing x in (0, a1]."""
        n = 1
        t = self.r * self.a1  # a3
        while x < t:
            t = t * self.r
            n += 1
        a_odd_hi = self.odd_endpoint(n)      # a_{2n-1}
        a_even = self.even_endpoint(n)       # a_{2n}
        a_odd_lo = self.odd_endpoint(n + 1)  # a_{2n+1}
        if x >= a_even:
            return self.alpha1, a_even, a_odd_hi, n
        return self.alpha2, a_odd_lo, a_even, n

    def _build_float_tables(self):
        a1 = float(self.a1)
        r = float(self.r)
        p = float(self.p)
        n_bands = max(2, int(math.ceil(math.log(1e-14) / math.log(r))) + 1)
        # edges ascending: 0, a_{2N+1}, a_{2N}, a_{2N-1}, ..., a_2, a_1
        edges = [0.0]
        levels = [float(self.beta1)]  # sliver below a_{2N+1}
        for n in range(n_bands, 0, -1):
            a_odd_lo = r ** n * a1
            a_even = p * r ** (n - 1) * a1
            a_odd_hi = r ** (n - 1) * a1
            edges.append(a_odd_lo)
            levels.append(float(self.alpha2))
            edges.append(a_even)
            levels.append(float(self.alpha1))
            if n == 1:
                edges.append(a_odd_hi)
        self._edges = np.asarray(edges)
        self._levels = np.asarray(levels)
        b1, b2 = float(self.beta1), float(self.beta2)
        F = [0.0]
        for e in edges[1:]:
            F.append(self._cdf_scalar_float(e, b1, b2))
        self._F_edges = np.asarray(F)
        if not np.all(np.diff(self._edges) > 0) or not np.all(np.diff(self._F_edges) > 0):
            raise DensityError("degenerate band table; parameters too extreme for float64")

    def _cdf_scalar_float(self, x, b1, b2):
        a1 = float(self.a1)
        if x >= a1:
            return 1.0
        if x <= 0.0:
            return 0.0
        level, lo, hi, n = self._band_of_float(x)
        if level == float(self.alpha1):
            return b2 * lo + level * (x - lo)
        return b1 * lo + level * (x - lo)

    def _band_of_float(self, x):
        a1, r, p = float(self.a1), float(self.r), float(self.p)
        n = 1
        t = r * a1
        while x < t:
            t *= r
            n += 1
        a_odd_hi = r ** (n - 1) * a1
        a_even = p * r ** (n - 1) * a1
        a_odd_lo = r ** n * a1
        if x >= a_even:
            return float(self.alpha1), a_even, a_odd_hi, n
        return float(self.alpha2), a_odd_lo, a_even, n

    # -- interface ----------------------------------------------------------

    @property
    def support_upper(self):
        return float(self.a1)

    def pdf(self, x):
        if self.exact and isinstance(x, (Fraction, int)):
            x = Fraction(x)
            if x <= 0 or x >= self.a1:
                return Fraction(0)
            return self._band_of(x)[0]
        x = np.asarray(x, dtype=float)
        idx = np.searchsorted(self._edges, x, side="right") - 1
        inside = (x > 0.0) & (x < float(self.a1)) & (idx >= 0) & (idx < len(self._levels))
        out = np.zeros_like(x)
        out[inside] = self._levels[np.clip(idx[inside], 0, len(self._levels) - 1)]
        return out if out.shape else float(out)

    def cdf(self, x):
        if self.exact and isinstance(x, (Fraction, int)):
            x = Fraction(x)
            if x <= 0:
                return Fraction(0)
            if x >= self.a1:
                return Fraction(1)
            level, lo, hi, n = self._band_of(x)
            if level == self.alpha1:
                return self.beta2 * lo + level * (x - lo)
            return self.beta1 * lo + level * (x - lo)
        x = np.asarray(x, dtype=float)
        out = np.interp(x, self._edges, self._F_edges)
        return out if out.shape else float(out)

    def sample(self, u):
        if self.exact and isinstance(u, (Fraction, int)):
            u = Fraction(u)
            if not (0 <= u <= 1):
                raise DensityError(f"u must lie in [0, 1], got {u}")
            if u == 0:
                return Fraction(0)
            if u == 1:
                return self.a1
            n = 1
            while u < self.r ** n:
                n += 1
            # now F(a_{2n+1}) = r^n <= u < r^(n-1) = F(a_{2n-1})
            F_even = self.beta2 * self.even_endpoint(n)
            if u >= F_even:
                return self.even_endpoint(n) + (u - F_even) / self.alpha1
            return self.odd_endpoint(n + 1) + (u - self.r ** n) / self.alpha2
        u = np.asarray(u, dtype=float)
        out = np.interp(u, self._F_edges, self._edges)
        return out if out.shape else float(out)

    def first_moment(self):
        one = Fraction(1) if self.exact else 1.0
        num = self.alpha2 * self.p ** 2 * (one - self.q ** 2) + self.alpha1 * (one - self.p ** 2)
        return self.a1 ** 2 * num / (2 * (one - self.r ** 2))

    def sup_pdf(self, lo, hi):
        a1 = float(self.a1)
        lo = max(float(lo), 0.0)
        hi = min(float(hi), a1)
        if hi <= lo:
            return 0.0, None
        # walk the ideal (untruncated) band structure downward from hi
        best, arg = 0.0, None
        x = hi
        while x > lo:
            level, blo, bhi, _ = self._band_of_float(x * (1.0 - 1e-15))
            if level > best:
                best = level
                arg = 0.5 * (max(blo, lo) + min(bhi, hi))
            if best == float(self.alpha2) or blo <= 0.0:
                break
            x = blo
        return best, arg

    def hard_window_probes(self, n_max=12):
        """(lambda, mu) pairs whose window exactly covers an alpha2 band.

        With lambda = a_{2n+1} (1-q)/q and mu = q/(1-q) the window average of f
        equals alpha2 > 1, so these defeat any positive averaging envelope.
        Only valid while mu <= 1, i.e. q <= 1/2.
        """
        q = float(self.q)
        mu = q / (1.0 - q)
        if mu > 1.0:
            return []
        out = []
        for n in range(1, n_max + 1):
            lam = (1.0 - q) / q * float(self.odd_endpoint(n + 1))
            out.append((lam, mu))
        return out

    def good_set_bands(self, rho, n_max=30):
        """Intervals [a_{2n+2}, rho * a_{2n+1}] for n = 1..n_max plus [a_2, inf)."""
        rho = float(rho)
        bands = [(float(self.even_endpoint(n + 1)), rho * float(self.odd_endpoint(n + 1)))
                 for n in range(1, n_max + 1)]
        return bands, (float(self.even_endpoint(1)), math.inf)

    def spec_dict(self):
        def enc(v):
            return str(v) if isinstance(v, Fraction) else float(v)
        return {"family": "piecewise", "alpha1": enc(self.alpha1), "alpha2": enc(self.alpha2),
                "p": enc(self.p), "q": enc(self.q)}


def make_piecewise(alpha1, alpha2, p, q):
    """Construct the band density; int/Fraction/"num/den"-string parameters give
    exact rational arithmetic. The admissibility flag (beta2 < 1) is set either
    way: the simulator accepts inadmissible parameters, the bound machinery
    does not."""
    return PiecewiseGeometricDensity(alpha1, alpha2, p, q)


# ---------------------------------------------------------------------------
# periodic oscillatory family
# ---------------------------------------------------------------------------


def _tail_stage_chain(g_profile, n_stages):
    """Antiderivative stages A_1, A_2, ... of the zero-mean parts of g_profile."""
    stages = []
    G = g_profile
    for _ in range(n_stages):
        A = G.antiderivative_stage()
        stages.append(A)
        G = A
    return stages


class _TailExpansion:
    """Evaluates I(x) = integral of y^m * g(y^-alpha-composed) near 0.

    Concretely, for G periodic and v = x^(-alpha),

        integral_0^x y^m G(y^(-alpha)) dy = (1/alpha) * W(v),
        W(v) = integral_v^inf G(u) u^(-1-beta0) du,   beta0 = (m+1)/alpha,

    computed by repeated integration by parts: each stage swaps G for the
    periodic antiderivative of its zero-mean part and gains a factor 1/v.
    The truncation bound is tracked explicitly.
    """

    def __init__(self, g_profile, alpha, m, v0, tol=1e-13, max_stages=40):
        self.alpha = float(alpha)
        self.beta0 = (m + 1.0) / self.alpha
        self.v0 = float(v0)
        self.g = g_profile
        stages = []
        coeff = 1.0
        E = 1.0 + self.beta0
        G = g_profile
        best_k, best_bound = 0, math.inf
        means, coeffs, exps = [], [], []
        for k in range(max_stages):
            A = G.antiderivative_stage()
            stages.append((G.mean, A, coeff, E))
            bound = coeff * A.sup_abs * self.v0 ** (-E)
            if bound < best_bound:
                best_k, best_bound = k + 1, bound
            if bound <= tol or bound > 4.0 * best_bound:
                break
            G = A
            coeff *= E
            E += 1.0
        self.stages = stages[:best_k]
        self.bound_at_v0 = best_bound

    def eval(self, v):
        """W(v) for v >= v0 (scalar or array)."""
        v = np.asarray(v, dtype=float)
        total = np.zeros_like(v)
        for mean, A, coeff, E in self.stages:
            total += coeff * mean * v ** (1.0 - E) / (E - 1.0)
            total -= coeff * A.eval(v) * v ** (-E)
        return total


class PeriodicOscillatoryDensity(Density):
    """f(x) = (1 + psi(1/x^alpha)) / 2 on (0, a], zero elsewhere.

    Near the oscillation accumulation point the CDF is evaluated through the
    tail expansion (exact up to a tracked bound); elsewhere by adaptive Simpson
    anchored at period-aligned table nodes. The support endpoint a solves
    integral_0^a f = 1 (smallest root).
    """

    family = "periodic"

    _V0_CANDIDATES = (60.0, 100.0, 160.0, 260.0, 420.0, 700.0)

    def __init__(self, alpha, psi="sin", tol=1e-10):
        self.alpha = float(alpha)
        if self.alpha <= 0.0:
            raise DensityError(f"alpha must be positive, got {alpha}")
        self.psi = make_profile(psi)
        if self.psi.sup_abs > 1.0 + 1e-9:
            raise DensityError("profile must map into [-1, 1]")
        self.tol = float(tol)
        self._g = self.psi.affine(0.5, 0.5)  # (1 + psi)/2, in [0, 1]
        if self._g.mean <= 1e-12:
            raise DensityError("profile mean is -1; the density has no mass")
        self._exp0 = None
        for v0 in self._V0_CANDIDATES:
            exp0 = _TailExpansion(self._g, self.alpha, 0, v0, tol=1e-13)
            if exp0.bound_at_v0 <= 1e-12:
                self._exp0 = exp0
                break
        if self._exp0 is None:
            self._exp0 = exp0  # best effort; bound recorded
        self.v0 = self._exp0.v0
        self.x0 = self.v0 ** (-1.0 / self.alpha)
        self.a = self._normalize()
        self._build_cdf_table()

    # -- mass ---------------------------------------------------------------

    def _mass_upto(self, x, tol=None):
        """integral_0^x f, combining the expansion head with Simpson."""
        tol = self.tol if tol is None else tol
        if x <= 0.0:
            return 0.0
        if x <= self.x0:
            return self._exp0.eval(x ** (-self.alpha)) / self.alpha
        head = self._exp0.eval(self.v0) / self.alpha
        body = adaptive_simpson(self._pdf_scalar, self.x0, x, tol=min(tol, 1e-12))
        return head + body

    def _pdf_scalar(self, x):
        return 0.5 + 0.5 * float(self.psi.eval(x ** (-self.alpha)))

    def _normalize(self):
        hi = max(2.0 * self.x0, 1.0)
        cap = 0
        while self._mass_upto(hi) < 1.0:
            hi *= 2.0
            cap += 1
            if cap > 60:
                raise DensityError("normalization bracket search failed; profile mass too small")
        a = bisect_nondecreasing(self._mass_upto, 0.0, hi, 1.0, xtol=1e-13)
        return a

    def _build_cdf_table(self):
        # nodes: log grid below x0 (expansion is cheap and precise there),
        # sixteenth-period-aligned u nodes in the oscillatory zone, and a
        # uniform grid to cap the spacing where oscillation is slow
        step = self._g.period / 16.0
        u_a = self.a ** (-self.alpha)
        ks = np.arange(math.floor(u_a / step), math.ceil(self.v0 / step) + 1)
        u_nodes = ks * step
        u_nodes = u_nodes[(u_nodes > u_a) & (u_nodes < self.v0)]
        x_osc = u_nodes ** (-1.0 / self.alpha)
        x_unif = np.linspace(self.x0, self.a, 2049)
        # log spacing delta keeps the interpolation error near delta^2/16 at
        # alpha = 1 uniformly in depth, so 4096 nodes put it around 1e-6
        x_low = np.geomspace(max(self.a * 1e-9, 1e-300), self.x0, 4096)
        xs = np.unique(np.concatenate([[0.0], x_low, x_osc, x_unif, [self.a]]))
        xs = xs[(xs >= 0.0) & (xs <= self.a)]
        Fs = np.empty_like(xs)
        Fs[0] = 0.0
        low = (xs > 0.0) & (xs <= self.x0)
        if np.any(low):
            Fs[low] = self._exp0.eval(xs[low] ** (-self.alpha)) / self.alpha
        acc = self._exp0.eval(self.v0) / self.alpha
        prev = self.x0
        for i in np.nonzero(xs > self.x0)[0]:
            acc += adaptive_simpson(self._pdf_scalar, prev, xs[i], tol=3e-14)
            prev = xs[i]
            Fs[i] = acc
        self._xs = xs
        self._Fs = np.maximum.accumulate(np.clip(Fs, 0.0, 1.0))
        self.total_mass = float(Fs[-1])

    # -- interface ----------------------------------------------------------

    @property
    def support_upper(self):
        return self.a

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        inside = (x > 0.0) & (x <= self.a)
        if np.any(inside):
            with np.errstate(divide="ignore", over="ignore"):
                u = x[inside] ** (-self.alpha)
            vals = 0.5 + 0.5 * np.asarray(self.psi.eval(np.where(np.isfinite(u), u, 0.0)))
            # where 1/x^alpha overflows the density has no pointwise limit;
            # report the profile mean level there (any bounded choice works a.e.)
            out[inside] = np.where(np.isfinite(u), vals, 0.5 + 0.5 * self.psi.mean)
        return out if out.shape else float(out)

    def cdf(self, x):
        """Precise CDF: expansion below x0, anchored Simpson above."""
        scalar = np.ndim(x) == 0
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.empty_like(x)
        out[x <= 0.0] = 0.0
        out[x >= self.a] = 1.0
        mid = (x > 0.0) & (x < self.a)
        lowm = mid & (x <= self.x0)
        if np.any(lowm):
            out[lowm] = self._exp0.eval(x[lowm] ** (-self.alpha)) / self.alpha
        him = mid & (x > self.x0)
        if np.any(him):
            idx = np.searchsorted(self._xs, x[him], side="right") - 1
            vals = np.empty(int(him.sum()))
            for j, (i, xx) in enumerate(zip(idx, x[him])):
                vals[j] = self._Fs[i] + adaptive_simpson(self._pdf_scalar, self._xs[i], xx, tol=3e-14)
            out[him] = vals
        out = np.clip(out, 0.0, 1.0)
        return float(out[0]) if scalar else out

    def cdf_fast(self, x):
        x = np.asarray(x, dtype=float)
        out = np.interp(x, self._xs, self._Fs)
        return out if out.shape else float(out)

    def sample(self, u):
        scalar = np.ndim(u) == 0
        u = np.atleast_1d(np.asarray(u, dtype=float))
        x = np.interp(u * self.total_mass, self._Fs, self._xs)
        # Newton polish against the precise CDF where f is not tiny; elsewhere
        # the table inversion already sits inside a near-flat stretch
        for _ in range(2):
            f = np.asarray(self.pdf(x))
            good = f > 0.05
            if not np.any(good):
                break
            resid = np.asarray(self.cdf(x[good])) - u[good] * self.total_mass
            x[good] = np.clip(x[good] - resid / f[good], 0.0, self.a)
        return float(x[0]) if scalar else x

    def first_moment(self):
        exp1 = _TailExpansion(self._g, self.alpha, 1, self.v0, tol=1e-14)
        head = exp1.eval(self.v0) / self.alpha
        body = adaptive_simpson(lambda y: y * self._pdf_scalar(y), self.x0, self.a, tol=1e-12)
        return head + body

    def sup_pdf(self, lo, hi):
        lo = max(float(lo), 0.0)
        hi = min(float(hi), self.a)
        if hi <= lo:
            return 0.0, None
        u_lo = hi ** (-self.alpha)
        u_hi = math.inf if lo == 0.0 else lo ** (-self.alpha)
        s, u_star = self.psi.sup_on(u_lo, u_hi)
        x_star = u_star ** (-1.0 / self.alpha) if u_star and u_star > 0 else hi
        return 0.5 * (1.0 + s), x_star

    def spec_dict(self):
        if isinstance(self.psi, SinusoidProfile) and (self.psi.a, self.psi.b) == (1.0, 0.0) \
                and self.psi.c == 0.0:
            psi_spec = "sin"
        elif isinstance(self.psi, SinusoidProfile) and self.psi.a == self.psi.b == 0.0:
            psi_spec = self.psi.c
        else:
            psi_spec = {"period": self.psi.period, "values": list(map(float, self.psi.values))}
        return {"family": "periodic", "alpha": self.alpha, "psi": psi_spec}


def normalize_periodic(alpha, psi):
    """Support endpoint a with integral_0^a (1 + psi(1/x^alpha))/2 dx = 1.

    Returns the smallest root; construction fails (DensityError) if the bracket
    search exceeds its cap, which requires the profile mean to be -1.
    """
    return PeriodicOscillatoryDensity(alpha, psi).a


# ---------------------------------------------------------------------------
# Gaussian path family
# ---------------------------------------------------------------------------


def _lil_envelope(x, hurst, beta):
    """beta * sqrt(x^(2H) |log|log x||), with the 0 and 1 endpoints by limit."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        inner = np.abs(np.log(np.abs(np.log(x))))
        kappa = beta * np.sqrt(x ** (2.0 * hurst) * inner)
    kappa = np.where(x == 0.0, 0.0, kappa)
    kappa = np.where(x == 1.0, np.inf, kappa)
    return kappa


@dataclass(frozen=True, eq=False)
class GaussianPathDensity(Density):
    """Clipped path density (1 + S_x - kappa_x)_+ ^ 1 on [0, 1] plus an
    exponential tail m * exp(-(x-1)) carrying the remaining mass."""

    grid: np.ndarray
    path: np.ndarray
    hurst: float
    beta_lil: float
    seed: int
    f_grid: np.ndarray = field(repr=False)
    F_grid: np.ndarray = field(repr=False)
    mass01: float
    tail_mass: float
    rescaled: bool

    family = "gaussian_path"

    @property
    def support_upper(self):
        return math.inf if self.tail_mass > 0.0 else 1.0

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        inside = (x >= 0.0) & (x <= 1.0)
        out[inside] = np.interp(x[inside], self.grid, self.f_grid)
        tail = x > 1.0
        if self.tail_mass > 0.0:
            out[tail] = self.tail_mass * np.exp(-(x[tail] - 1.0))
        return out if out.shape else float(out)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        out = _pwl_cdf(x, self.grid, self.f_grid, self.F_grid)
        tail = x > 1.0
        if np.any(tail):
            out[tail] = self.mass01 + self.tail_mass * (1.0 - np.exp(-(x[tail] - 1.0)))
        return out if out.shape else float(out)

    def sample(self, u):
        scalar = np.ndim(u) == 0
        u = np.atleast_1d(np.asarray(u, dtype=float))
        out = np.empty_like(u)
        body = u <= self.mass01
        out[body] = _pwl_cdf_invert(u[body], self.grid, self.f_grid, self.F_grid)
        if np.any(~body):
            if self.tail_mass > 0.0:
                frac = (u[~body] - self.mass01) / self.tail_mass
                out[~body] = 1.0 - np.log1p(-np.minimum(frac, 1.0))
            else:
                out[~body] = 1.0
        return float(out[0]) if scalar else out

    def first_moment(self):
        xg, fg = self.grid, self.f_grid
        h = np.diff(xg)
        c = np.diff(fg) / h
        # integral of x*(f_i + c (x - x_i)) over each cell, exactly
        xi, fi = xg[:-1], fg[:-1]
        body = float(np.sum(fi * (h * xi + h ** 2 / 2.0) + c * (h ** 2 * xi / 2.0 + h ** 3 / 3.0)))
        return body + 2.0 * self.tail_mass

    def sup_pdf(self, lo, hi):
        lo, hi = float(lo), float(hi)
        best, arg = 0.0, None
        inside = (self.grid > lo) & (self.grid <= hi)
        cands_x = list(self.grid[inside])
        for b in (lo, hi):
            if 0.0 <= b <= 1.0:
                cands_x.append(b)
        for x in cands_x:
            v = float(np.interp(x, self.grid, self.f_grid))
            if v > best:
                best, arg = v, x
        if self.tail_mass > 0.0 and hi > 1.0:
            xt = max(lo, 1.0)
            v = self.tail_mass * math.exp(-(xt - 1.0))
            if v > best:
                best, arg = v, xt
        return best, arg

    def spec_dict(self):
        return {"family": "gaussian_path", "hurst": self.hurst, "beta_lil": self.beta_lil,
                "grid_size": len(self.grid), "seed": self.seed}


def build_gaussian_path(hurst, beta_lil, grid_size=513, seed=0, grid=None):
    """Exact Gaussian sample of the path on the grid via covariance factorization.

    The covariance is Gamma(x, y) = (x^(2H) + y^(2H) - |x-y|^(2H)) / 2. For
    H = 1/2 the Cholesky factor is bidiagonal in increments and is applied in
    closed form; otherwise scipy's dense factorization is used and a failure is
    reported with the offending grid spacing.
    """
    hurst = float(hurst)
    if not (0.0 < hurst < 1.0):
        raise DensityError(f"hurst must lie in (0, 1), got {hurst}")
    if grid is None:
        if grid_size < 2:
            raise DensityError("grid_size must be at least 2")
        grid = np.linspace(0.0, 1.0, int(grid_size))
    grid = np.asarray(grid, dtype=float)
    if grid[0] != 0.0:
        grid = np.concatenate([[0.0], grid])
    if np.any(np.diff(grid) <= 0.0) or grid[-1] > 1.0 or grid[0] < 0.0:
        raise DensityError("grid must be strictly increasing within [0, 1]")
    pos = grid[1:]
    z = rng.normal_block(seed, rng.GAUSS_PATH, 0, len(pos))
    if hurst == 0.5:
        path = np.cumsum(np.sqrt(np.diff(grid)) * z)
    else:
        xx, yy = np.meshgrid(pos, pos, indexing="ij")
        cov = 0.5 * (xx ** (2 * hurst) + yy ** (2 * hurst) - np.abs(xx - yy) ** (2 * hurst))
        try:
            L = _cholesky(cov, lower=True)
        except _LinAlgError as exc:
            raise DensityError(
                f"covariance factorization failed; minimal grid spacing {np.min(np.diff(grid)):.3e}"
            ) from exc
        path = L @ z
    S = np.concatenate([[0.0], path])
    kappa = _lil_envelope(grid, hurst, float(beta_lil))
    with np.errstate(invalid="ignore"):
        f_grid = np.clip(1.0 + S - kappa, 0.0, 1.0)
    f_grid = np.where(np.isnan(f_grid), 0.0, f_grid)
    mass01 = float(np.trapezoid(f_grid, grid))
    rescaled = False
    if mass01 > 1.0:
        f_grid = f_grid / mass01
        mass01, tail_mass = 1.0, 0.0
        rescaled = True
    else:
        tail_mass = 1.0 - mass01
    F_grid = np.concatenate([[0.0], np.cumsum(0.5 * (f_grid[1:] + f_grid[:-1]) * np.diff(grid))])
    return GaussianPathDensity(grid=grid, path=S, hurst=hurst, beta_lil=float(beta_lil),
                               seed=int(seed), f_grid=f_grid, F_grid=F_grid,
                               mass01=mass01, tail_mass=tail_mass, rescaled=rescaled)


# ---------------------------------------------------------------------------
# tabulated family
# ---------------------------------------------------------------------------


def _pwl_cdf(x, xg, fg, Fg):
    """CDF of a piecewise-linear pdf: exact piecewise-quadratic evaluation."""
    x = np.asarray(x, dtype=float)
    xc = np.clip(x, xg[0], xg[-1])
    idx = np.clip(np.searchsorted(xg, xc, side="right") - 1, 0, len(xg) - 2)
    h = xg[idx + 1] - xg[idx]
    s = xc - xg[idx]
    c = (fg[idx + 1] - fg[idx]) / h
    out = Fg[idx] + fg[idx] * s + 0.5 * c * s * s
    out = np.where(x <= xg[0], 0.0, out)
    out = np.where(x >= xg[-1], Fg[-1], out)
    return out


def _pwl_cdf_invert(u, xg, fg, Fg):
    """Inverse of _pwl_cdf via stable per-cell quadratic solve."""
    u = np.asarray(u, dtype=float)
    uc = np.clip(u, 0.0, Fg[-1])
    idx = np.clip(np.searchsorted(Fg, uc, side="right") - 1, 0, len(xg) - 2)
    # zero-density cells repeat F values; 'right' skips past them so the
    # returned quantile is the upper edge of any flat stretch
    h = xg[idx + 1] - xg[idx]
    c = (fg[idx + 1] - fg[idx]) / h
    d = uc - Fg[idx]
    disc = np.maximum(fg[idx] ** 2 + 2.0 * c * d, 0.0)
    denom = fg[idx] + np.sqrt(disc)
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(denom > 0.0, 2.0 * d / denom, 0.0)
    return xg[idx] + np.minimum(s, h)


@dataclass(frozen=True, eq=False)
class TabulatedDensity(Density):
    """Grid + values, linear interpolation; zero outside the grid range."""

    grid: np.ndarray
    values: np.ndarray
    F_grid: np.ndarray = field(repr=False)
    normalized: bool

    family = "tabulated"

    @property
    def support_upper(self):
        return float(self.grid[-1])

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        inside = (x >= self.grid[0]) & (x <= self.grid[-1])
        out[inside] = np.interp(x[inside], self.grid, self.values)
        return out if out.shape else float(out)

    def cdf(self, x):
        out = _pwl_cdf(np.asarray(x, dtype=float), self.grid, self.values, self.F_grid)
        return out if out.shape else float(out)

    def sample(self, u):
        scalar = np.ndim(u) == 0
        u = np.atleast_1d(np.asarray(u, dtype=float))
        out = _pwl_cdf_invert(u, self.grid, self.values, self.F_grid)
        return float(out[0]) if scalar else out

    def first_moment(self):
        xg, fg = self.grid, self.values
        h = np.diff(xg)
        c = np.diff(fg) / h
        xi, fi = xg[:-1], fg[:-1]
        return float(np.sum(fi * (h * xi + h ** 2 / 2.0) + c * (h ** 2 * xi / 2.0 + h ** 3 / 3.0)))

    def sup_pdf(self, lo, hi):
        lo, hi = float(lo), float(hi)
        best, arg = 0.0, None
        inside = (self.grid > lo) & (self.grid <= hi)
        cands = list(self.grid[inside]) + [b for b in (lo, hi)
                                           if self.grid[0] <= b <= self.grid[-1]]
        for x in cands:
            v = float(np.interp(x, self.grid, self.values))
            if v > best:
                best, arg = v, x
        return best, arg

    def spec_dict(self):
        return {"family": "tabulated", "grid": [float(v) for v in self.grid],
                "values": [float(v) for v in self.values]}


def _make_tabulated(grid, values):
    grid = np.asarray(grid, dtype=float)
    values = np.asarray(values, dtype=float)
    if grid.ndim != 1 or grid.shape != values.shape or len(grid) < 2:
        raise DensityError("tabulated density needs matching 1-d grid and values, length >= 2")
    if np.any(np.diff(grid) <= 0.0):
        raise DensityError("tabulated grid must be strictly increasing")
    if np.any(values < 0.0):
        raise DensityError("tabulated values must be nonnegative")
    if grid[0] < 0.0:
        raise DensityError("tabulated grid must be nonnegative")
    mass = float(np.trapezoid(values, grid))
    if mass <= 0.0:
        raise DensityError("tabulated density has zero mass")
    normalized = abs(mass - 1.0) > 1e-12
    if normalized:
        values = values / mass
    F = np.concatenate([[0.0], np.cumsum(0.5 * (values[1:] + values[:-1]) * np.diff(grid))])
    F[-1] = min(F[-1], 1.0)
    return TabulatedDensity(grid=grid, values=values, F_grid=F, normalized=normalized)


def uniform_density(lo, hi):
    """Uniform density on [lo, hi] as a two-node tabulated density."""
    if not (0.0 <= lo < hi):
        raise DensityError(f"need 0 <= lo < hi, got [{lo}, {hi}]")
    level = 1.0 / (hi - lo)
    return _make_tabulated([lo, hi], [level, level])


def tabulated_from_csv(path):
    """Two-column CSV (x, f); a non-numeric first row is treated as a header."""
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            parts = [p.strip() for p in line.replace(";", ",").split(",") if p.strip()]
            if len(parts) < 2:
                continue
            try:
                rows.append((float(parts[0]), float(parts[1])))
            except ValueError:
                continue
    if len(rows) < 2:
        raise DensityError(f"no tabulated data found in {path}")
    arr = np.asarray(rows)
    return _make_tabulated(arr[:, 0], arr[:, 1])


# ---------------------------------------------------------------------------
# construction from JSON specs
# ---------------------------------------------------------------------------


def make_density(spec):
    """Density from a JSON-style dict with a "family" tag.

    piecewise: alpha1, alpha2, p, q (numbers or "num/den" strings for exact mode)
    periodic: alpha, psi ("sin", a constant, or {"period":..., "values":[...]})
    gaussian_path: hurst, beta_lil, grid_size, seed
    tabulated: {"grid": [...], "values": [...]} or {"csv": "path"}
    """
    if not isinstance(spec, dict) or "family" not in spec:
        raise DensityError('density spec must be an object with a "family" field')
    fam = spec["family"]
    try:
        if fam == "piecewise":
            return make_piecewise(spec["alpha1"], spec["alpha2"], spec["p"], spec["q"])
        if fam == "periodic":
            return PeriodicOscillatoryDensity(spec["alpha"], spec.get("psi", "sin"))
        if fam == "gaussian_path":
            return build_gaussian_path(spec["hurst"], spec["beta_lil"],
                                       grid_size=spec.get("grid_size", 513),
                                       seed=spec.get("seed", 0))
        if fam == "tabulated":
            if "csv" in spec:
                return tabulated_from_csv(spec["csv"])
            return _make_tabulated(spec["grid"], spec["values"])
    except KeyError as exc:
        raise DensityError(f"density spec for family {fam!r} is missing field {exc.args[0]!r}")
    raise DensityError(f"unknown density family {fam!r}")


def density_from_json(source):
    """Density from a JSON string or a path to a JSON file."""
    if isinstance(source, (str, Path)) and Path(str(source)).exists():
        text = Path(source).read_text(encoding="utf-8")
    else:
        text = str(source)
    return make_density(json.loads(text))


# module-level operation aliases


def pdf(d, x):
    return d.pdf(x)


def cdf(d, x):
    return d.cdf(x)


def sample(d, u):
    return d.sample(u)
