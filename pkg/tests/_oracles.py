"""Independent cross-check oracles for the tests.

These deliberately avoid the production code paths: the oscillatory window
averages are summed by plain composite Simpson in the substituted variable
(per-period panels plus an analytically bounded tail), and the band-density
averages by a midpoint Riemann sum of the closed-form pdf. Nothing here calls
the package's expansion or anchored-quadrature machinery.
"""
import math

import numpy as np


def sine_osc_integral(alpha, u_lo, u_hi, n_panels=10**6, pts_per_period=64):
    """integral of sin(u) * u^(-1-1/alpha) over [u_lo, u_hi] (u_hi may be inf).

    Composite Simpson with pts_per_period panels per 2*pi; when u_hi is beyond
    the panel budget the remainder is dropped and its proven bound returned.
    Returns (value, tail_bound).
    """
    if u_lo <= 0.0:
        raise ValueError("u_lo must be positive")
    expo = 1.0 + 1.0 / alpha
    period = 2.0 * math.pi
    budget_periods = max(1, n_panels // pts_per_period)
    u_cut = min(u_hi, u_lo + period * budget_periods)
    span = u_cut - u_lo
    if span <= 0.0:
        return 0.0, 0.0
    panels = int(math.ceil(span / period * pts_per_period))
    panels += panels % 2  # Simpson needs an even count
    panels = max(panels, 16)
    us = np.linspace(u_lo, u_cut, panels + 1)
    vals = np.sin(us) * us ** (-expo)
    h = span / panels
    simpson = h / 3.0 * (vals[0] + vals[-1] + 4.0 * vals[1:-1:2].sum() + 2.0 * vals[2:-2:2].sum())
    if u_cut < u_hi:
        # two integrations by parts: |remainder| <= u_cut^(-expo) (1 + 2 expo / u_cut)
        tail_bound = u_cut ** (-expo) * (1.0 + 2.0 * expo / u_cut)
    else:
        tail_bound = 0.0
    return float(simpson), float(tail_bound)


def _simpson_vec(f, a, b, panels):
    panels += panels % 2
    xs = np.linspace(a, b, panels + 1)
    vals = f(xs)
    h = (b - a) / panels
    return float(h / 3.0 * (vals[0] + vals[-1] + 4.0 * vals[1:-1:2].sum()
                            + 2.0 * vals[2:-2:2].sum()))


def sine_window_mass(alpha, y_lo, y_hi, n_panels=10**6):
    """integral of (1 + sin(y^-alpha))/2 over [y_lo, y_hi], y_lo >= 0.

    The constant half integrates exactly. The oscillating half is summed in
    x-space away from 0 (the integrand is tame there) and by the per-period
    u-space rule below a fixed cut, where the substitution weight is smooth.
    Returns (value, error_bound)."""
    if y_hi <= y_lo:
        return 0.0, 0.0
    x_cut = (20.0) ** (-1.0 / alpha)  # u >= 20 below the cut
    osc = 0.0
    tail = 0.0
    hi_leg_lo = max(y_lo, min(x_cut, y_hi))
    if y_hi > hi_leg_lo:
        osc += _simpson_vec(lambda x: np.sin(x ** (-alpha)), hi_leg_lo, y_hi,
                            max(1 << 15, n_panels // 4))
    if y_lo < hi_leg_lo:
        u_hi = math.inf if y_lo == 0.0 else y_lo ** (-alpha)
        u_lo = hi_leg_lo ** (-alpha)
        val, bound = sine_osc_integral(alpha, u_lo, u_hi, n_panels=n_panels)
        osc += val / alpha
        tail = bound / alpha
    return 0.5 * (y_hi - y_lo) + 0.5 * osc, 0.5 * tail


def riemann_psi_sine(alpha, a, lam, mu, n_panels=10**6):
    """Window average of the sine-profile density by the composite-rule oracle.

    Returns (psi, error_bound)."""
    y_lo = lam * mu
    y_hi = lam * (mu + 1.0)
    y_hi_eff = min(y_hi, a)
    if y_hi_eff <= y_lo:
        return 0.0, 0.0
    mass, err = sine_window_mass(alpha, y_lo, y_hi_eff, n_panels=n_panels)
    return mass / lam, err / lam


def riemann_psi_piecewise(density, lam, mu, n_panels=10**6):
    """Midpoint Riemann sum of the band density over [mu, mu+1].

    Error is bounded by (#band crossings) * (alpha2 - alpha1) / (2 n_panels)."""
    mids = mu + (np.arange(n_panels) + 0.5) / n_panels
    return float(np.mean(density.pdf(lam * mids)))


def simpson_scalar(f, a, b, n_panels=4096):
    """Plain non-adaptive composite Simpson, for low-drama integrands."""
    n_panels += n_panels % 2
    xs = np.linspace(a, b, n_panels + 1)
    vals = np.asarray([f(x) for x in xs], dtype=float)
    h = (b - a) / n_panels
    return float(h / 3.0 * (vals[0] + vals[-1] + 4.0 * vals[1:-1:2].sum()
                            + 2.0 * vals[2:-2:2].sum()))
