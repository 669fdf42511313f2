"""Symbol of the time-averaged M multiplier and its symbol-level checks.

The multiplier acts in Fourier variables (eta, xi) dual to (x, v).  With
s = T - t its phase integral is

    Phi(t, T, xi, eta) = int_t^T <xi + (t - tau) eta>^2 dtau
                       = s (1 + |xi|^2) - s^2 (xi . eta) + s^3 |eta|^2 / 3

and M = (1 + delta Phi)^(-p).  The Fourier pair used throughout the package
is f_hat(eta, xi) = int f(x, v) exp(-i (eta.x + xi.v)), under which the free
streaming operator d/dt + v.grad_x becomes d/dt - eta.grad_xi.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy import integrate

__all__ = [
    "SymbolParams",
    "WeightedSymbolParams",
    "PhasePoint",
    "ExponentMismatch",
    "BoundCheck",
    "DerivativeBoundReport",
    "phase_integral",
    "phase_integral_quad",
    "eval_m",
    "eval_m_weighted",
    "transport_commutator_symbol",
    "commutator_fd_residual",
    "commutator_fd_slope",
    "check_time_integral_bound",
    "time_integral",
    "check_derivative_bounds",
]


class ExponentMismatch(ValueError):
    """Raised when a check needs exponent_p == 1/2 + epsilon."""


@dataclass(frozen=True)
class SymbolParams:
    delta: float
    epsilon: float
    exponent_p: float | None = None

    def __post_init__(self) -> None:
        if not (self.delta > 0 and math.isfinite(self.delta)):
            raise ValueError(f"delta must be positive, got {self.delta}")
        if not (self.epsilon > 0 and math.isfinite(self.epsilon)):
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if self.exponent_p is None:
            object.__setattr__(self, "exponent_p", 0.5 + self.epsilon)
        if not self.exponent_p > 0:
            raise ValueError(f"exponent_p must be positive, got {self.exponent_p}")

    @property
    def p(self) -> float:
        return float(self.exponent_p)

    @property
    def strength(self) -> float:
        return float(self.delta)

    @property
    def canonical(self) -> bool:
        """True when the exponent is the 1/2 + epsilon used by the time-integral bound."""
        return abs(self.p - (0.5 + self.epsilon)) <= 1e-12 * max(1.0, self.p)

    def dissipation_bound(self) -> float:
        return 2.0 / (self.epsilon * self.delta)


@dataclass(frozen=True)
class WeightedSymbolParams:
    """Ring-weighted symbol M_n = (1 + delta 2^(beta n) Phi)^(-p)."""

    delta: float
    beta: float
    ring_index: int
    exponent_p: float = 1.0

    def __post_init__(self) -> None:
        if not self.delta > 0:
            raise ValueError(f"delta must be positive, got {self.delta}")
        if self.beta > 2:
            raise ValueError(f"beta must be <= 2, got {self.beta}")
        if int(self.ring_index) != self.ring_index or self.ring_index < 0:
            raise ValueError(f"ring_index must be a nonnegative integer, got {self.ring_index}")
        if not self.exponent_p > 0:
            raise ValueError(f"exponent_p must be positive, got {self.exponent_p}")

    @property
    def p(self) -> float:
        return float(self.exponent_p)

    @property
    def strength(self) -> float:
        return float(self.delta * 2.0 ** (self.beta * self.ring_index))

    def as_plain(self) -> SymbolParams:
        """Equivalent unweighted parameters, with epsilon = p - 1/2 when positive."""
        eps = self.p - 0.5 if self.p > 0.5 else 0.5
        return SymbolParams(self.strength, eps, self.p)


class PhasePoint(NamedTuple):
    t: float
    T: float
    xi: np.ndarray
    eta: np.ndarray


@dataclass
class BoundCheck:
    lhs: float
    rhs: float
    passed: bool


@dataclass
class DerivativeBoundReport:
    n_samples: int
    xi_order1: float
    xi_order2: float
    eta_order1: float
    eta_order2: float
    eta_order1_raw: float
    eta_order2_raw: float
    per_sample: dict = field(default_factory=dict, repr=False)

    def as_dict(self) -> dict:
        return {
            "n_samples": self.n_samples,
            "xi_order1": self.xi_order1,
            "xi_order2": self.xi_order2,
            "eta_order1": self.eta_order1,
            "eta_order2": self.eta_order2,
            "eta_order1_raw": self.eta_order1_raw,
            "eta_order2_raw": self.eta_order2_raw,
        }


def _prep(t, T, xi, eta):
    t = np.asarray(t, dtype=float)
    T = np.asarray(T, dtype=float)
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    if xi.shape[-1:] != (3,) or eta.shape[-1:] != (3,):
        raise ValueError("xi and eta must have a trailing axis of length 3")
    if np.any(t > T):
        raise ValueError("phase point requires t <= T")
    return t, T, xi, eta


def phase_integral(t, T, xi, eta) -> np.ndarray:
    """Closed form of int_t^T <xi + (t - tau) eta>^2 dtau; broadcasts over leading axes."""
    t, T, xi, eta = _prep(t, T, xi, eta)
    s = T - t
    xx = np.einsum("...i,...i->...", xi, xi)
    xe = np.einsum("...i,...i->...", xi, eta)
    ee = np.einsum("...i,...i->...", eta, eta)
    return s * (1.0 + xx) - s * s * xe + s**3 * ee / 3.0


def phase_integral_quad(t: float, T: float, xi, eta) -> float:
    """Adaptive quadrature of the same integral, used as an independent check."""
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    if t > T:
        raise ValueError("phase point requires t <= T")

    def integrand(tau):
        z = xi + (t - tau) * eta
        return 1.0 + z @ z

    val, _ = integrate.quad(integrand, t, T, epsabs=0.0, epsrel=1e-13, limit=200)
    return val


def _m_from_phi(phi, strength: float, p: float):
    return (1.0 + strength * phi) ** (-p)


def eval_m(sym: SymbolParams, t, T, xi, eta) -> np.ndarray:
    return _m_from_phi(phase_integral(t, T, xi, eta), sym.delta, sym.p)


def eval_m_weighted(wsym: WeightedSymbolParams, t, T, xi, eta) -> np.ndarray:
    return _m_from_phi(phase_integral(t, T, xi, eta), wsym.strength, wsym.p)


def transport_commutator_symbol(sym: SymbolParams | WeightedSymbolParams, t, T, xi, eta) -> np.ndarray:
    """Symbol of [M, d/dt + v.grad_x].

    Equals -(d/dt - eta.grad_xi) M = -delta p <xi>^2 / (1 + delta Phi) * M.  The
    negative sign is the backward-diffusion defect that the collision term has
    to absorb.
    """
    t, T, xi, eta = _prep(t, T, xi, eta)
    phi = phase_integral(t, T, xi, eta)
    d = sym.strength
    m = _m_from_phi(phi, d, sym.p)
    jxi = 1.0 + np.einsum("...i,...i->...", xi, xi)
    return -d * sym.p * jxi / (1.0 + d * phi) * m


def _line_derivative(sym, t, T, xi, eta, h):
    # d/ds M(t + s, T, xi - s eta, eta) at s = 0, central difference
    t = np.asarray(t, float)
    xi = np.asarray(xi, float)
    eta = np.asarray(eta, float)
    h = np.asarray(h, float)
    hh = h[..., None]
    mp = _m_from_phi(phase_integral(t + h, T, xi - hh * eta, eta), sym.strength, sym.p)
    mm = _m_from_phi(phase_integral(t - h, T, xi + hh * eta, eta), sym.strength, sym.p)
    return (mp - mm) / (2.0 * h)


def commutator_fd_residual(sym, t, T, xi, eta, h) -> np.ndarray:
    """|(d/dt - eta.grad_xi) M + commutator symbol| using a central step h."""
    exact = -transport_commutator_symbol(sym, t, T, xi, eta)
    return np.abs(_line_derivative(sym, t, T, xi, eta, h) - exact)


def commutator_fd_slope(sym, t, T, xi, eta, steps=None) -> tuple[float, np.ndarray, np.ndarray]:
    """Log-log slope of the summed FD residual against the step size.

    Steps are scaled per point by the local time scale so every point sits in
    the asymptotic regime; the returned slope is the least-squares fit.
    """
    t = np.asarray(t, float)
    T = np.asarray(T, float)
    xi = np.asarray(xi, float)
    eta = np.asarray(eta, float)
    if steps is None:
        steps = np.geomspace(4e-2, 2.5e-3, 5)
    steps = np.asarray(steps, float)
    phi_rate = 1.0 + np.einsum("...i,...i->...", xi, xi) + np.linalg.norm(eta, axis=-1) ** 2
    scale = np.minimum(T - t, 1.0) / np.sqrt(phi_rate * sym.strength + 1.0)
    scale = np.minimum(scale, t)  # keep t - h >= 0
    scale = np.maximum(scale, 1e-6)
    res = np.array([np.sum(commutator_fd_residual(sym, t, T, xi, eta, h * scale)) for h in steps])
    slope = np.polyfit(np.log(steps), np.log(res), 1)[0]
    return float(slope), steps, res


def time_integral(sym: SymbolParams, xi, eta, t: float, T0: float) -> float:
    """int_t^T0 <xi>^2 M(t, T, xi, eta)^2 dT by adaptive quadrature in T."""
    xi = np.asarray(xi, float)
    eta = np.asarray(eta, float)
    jxi = 1.0 + xi @ xi
    xx = xi @ xi
    xe = xi @ eta
    ee = eta @ eta

    def integrand(T):
        s = T - t
        phi = s * (1.0 + xx) - s * s * xe + s**3 * ee / 3.0
        return jxi * (1.0 + sym.delta * phi) ** (-2.0 * sym.p)

    # the integrand decays on the scale 1/(delta <xi>^2); give quad that breakpoint
    knee = t + min(T0 - t, 1.0 / (sym.delta * jxi))
    pts = [knee] if t < knee < T0 else None
    val, _ = integrate.quad(integrand, t, T0, points=pts, epsabs=1e-13, epsrel=1e-11, limit=400)
    return float(val)


def check_time_integral_bound(sym: SymbolParams, xi, eta, t: float, T0: float) -> BoundCheck:
    if not sym.canonical:
        raise ExponentMismatch(
            f"time-integral bound needs exponent_p = 1/2 + epsilon = {0.5 + sym.epsilon}, got {sym.p}"
        )
    if not t < T0:
        raise ValueError("need t < T0")
    lhs = time_integral(sym, xi, eta, t, T0)
    rhs = sym.dissipation_bound()
    return BoundCheck(lhs, rhs, bool(lhs <= rhs))


def _richardson_gradient(fun, x: np.ndarray, rel: float) -> np.ndarray:
    """Central-difference gradient of fun along the last axis of x, Richardson-refined."""
    scale = np.maximum(1.0, np.linalg.norm(x, axis=-1, keepdims=True))
    out = np.empty_like(x)
    for i in range(x.shape[-1]):
        e = np.zeros(x.shape[-1])
        e[i] = 1.0

        def d(h):
            return (fun(x + h * e) - fun(x - h * e)) / (2.0 * h[..., 0])

        h = rel * scale
        out[..., i] = (4.0 * d(h / 2) - d(h)) / 3.0
    return out


def _richardson_hessian(fun, x: np.ndarray, rel: float) -> np.ndarray:
    scale = np.maximum(1.0, np.linalg.norm(x, axis=-1, keepdims=True))
    n = x.shape[-1]
    out = np.empty(x.shape + (n,))
    f0 = fun(x)
    eye = np.eye(n)
    for i in range(n):
        for j in range(i, n):
            ei, ej = eye[i], eye[j]

            def d2(h):
                hs = h[..., 0]
                if i == j:
                    return (fun(x + h * ei) - 2.0 * f0 + fun(x - h * ei)) / hs**2
                return (
                    fun(x + h * ei + h * ej)
                    - fun(x + h * ei - h * ej)
                    - fun(x - h * ei + h * ej)
                    + fun(x - h * ei - h * ej)
                ) / (4.0 * hs**2)

            h = rel * scale
            val = (4.0 * d2(h / 2) - d2(h)) / 3.0
            out[..., i, j] = val
            out[..., j, i] = val
    return out


def check_derivative_bounds(sym: SymbolParams, samples: PhasePoint, fd_step: float = 1e-4) -> DerivativeBoundReport:
    """Empirical constants of the xi- and eta-derivative bounds of M.

    For each sample the constant is |d^a M / M| * W^min(|a|, 2) with
    W = <xi> + (T - t)|eta|; eta-derivatives are additionally divided by T.
    Second derivatives use a step of sqrt(fd_step) relative, which keeps
    the roundoff of the second difference below the truncation error.
    """
    t, T, xi, eta = _prep(*samples)
    t = np.broadcast_to(t, xi.shape[:-1])
    T = np.broadcast_to(T, xi.shape[:-1])
    if np.any(T <= 0):
        raise ValueError("derivative bounds need T > 0")
    m0 = eval_m(sym, t, T, xi, eta)
    w = np.sqrt(1.0 + np.einsum("...i,...i->...", xi, xi)) + (T - t) * np.linalg.norm(eta, axis=-1)
    h2 = math.sqrt(fd_step) * 0.1

    g_xi = _richardson_gradient(lambda z: eval_m(sym, t, T, z, eta), xi, fd_step)
    g_eta = _richardson_gradient(lambda z: eval_m(sym, t, T, xi, z), eta, fd_step)
    h_xi = _richardson_hessian(lambda z: eval_m(sym, t, T, z, eta), xi, h2)
    h_eta = _richardson_hessian(lambda z: eval_m(sym, t, T, xi, z), eta, h2)

    c_xi1 = np.max(np.abs(g_xi), axis=-1) / m0 * w
    c_xi2 = np.max(np.abs(h_xi), axis=(-2, -1)) / m0 * w**2
    raw_eta1 = np.max(np.abs(g_eta), axis=-1) / m0 * w
    raw_eta2 = np.max(np.abs(h_eta), axis=(-2, -1)) / m0 * w**2
    per = {
        "xi_order1": c_xi1,
        "xi_order2": c_xi2,
        "eta_order1": raw_eta1 / T,
        "eta_order2": raw_eta2 / T,
        "eta_order1_raw": raw_eta1,
        "eta_order2_raw": raw_eta2,
    }
    return DerivativeBoundReport(
        n_samples=int(np.size(m0)),
        xi_order1=float(np.max(c_xi1)),
        xi_order2=float(np.max(c_xi2)),
        eta_order1=float(np.max(per["eta_order1"])),
        eta_order2=float(np.max(per["eta_order2"])),
        eta_order1_raw=float(np.max(raw_eta1)),
        eta_order2_raw=float(np.max(raw_eta2)),
        per_sample=per,
    )
