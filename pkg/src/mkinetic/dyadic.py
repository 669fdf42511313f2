"""Smooth dyadic partition of unity in velocity.

Rings are V_0 = B(0, 4) and V_k = {2^k < |v| < 2^(k+2)} for k >= 1.  The
profiles are built from the smooth step

    s(x) = sigma(x) / (sigma(x) + sigma(1 - x)),   sigma(x) = exp(-1/x) (x > 0)

with phi_1(r) = s(r - 2) s(8 - r), phi_k(r) = phi_1(2^(1-k) r) and
phi_0(r) = s(8 - 2r).  The last choice makes phi_0 agree with phi_1(2r) on
the overlap with phi_1, so theta_k(r) = h(2^(1-k) r) for every k >= 1 with a
single profile h; derivative bounds then scale by exactly one half per ring.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "smooth_step",
    "DyadicPartition",
    "PartitionReport",
    "DecayReport",
    "default_n_max",
    "verify_partition",
    "verify_derivative_decay",
]


def smooth_step(x):
    """C-infinity step: 0 for x <= 0, 1 for x >= 1."""
    x = np.asarray(x, dtype=float)
    inside = (x > 0) & (x < 1)
    xs = np.where(inside, x, 0.5)
    a = np.exp(-1.0 / xs)
    b = np.exp(-1.0 / (1.0 - xs))
    return np.where(x >= 1, 1.0, np.where(inside, a / (a + b), 0.0))


def _phi0(r):
    return smooth_step(8.0 - 2.0 * r)


def _phi1(r):
    return smooth_step(r - 2.0) * smooth_step(8.0 - r)


def default_n_max(l_v: float) -> int:
    return int(math.ceil(math.log2(l_v))) + 1


@dataclass(frozen=True)
class DyadicPartition:
    n_max: int

    def __post_init__(self) -> None:
        if self.n_max < 0 or int(self.n_max) != self.n_max:
            raise ValueError(f"n_max must be a nonnegative integer, got {self.n_max}")

    @classmethod
    def for_box(cls, l_v: float) -> "DyadicPartition":
        """Partition whose range covers the corners of [-l_v, l_v)^3."""
        n = default_n_max(l_v)
        while 2.0 ** (n + 1) < math.sqrt(3.0) * l_v:
            n += 1
        return cls(n)

    @property
    def r_max(self) -> float:
        return 2.0 ** (self.n_max + 1)

    @staticmethod
    def bump0(r):
        return _phi0(r)

    @staticmethod
    def bump1(r):
        return _phi1(r)

    def bump(self, k: int, r):
        if k == 0:
            return _phi0(r)
        return _phi1(np.asarray(r, float) * 2.0 ** (1 - k))

    def ring_bounds(self, k: int) -> tuple[float, float]:
        """Open radial interval of V_k."""
        if k == 0:
            return 0.0, 4.0
        return 2.0**k, 2.0 ** (k + 2)

    def _check_radius(self, r: np.ndarray) -> None:
        if np.any(r > self.r_max * (1 + 1e-14)):
            raise ValueError(f"|v| beyond materialized range {self.r_max}")

    def radial(self, r) -> np.ndarray:
        """All theta_k(r), stacked on a new leading axis of length n_max + 1."""
        r = np.asarray(r, dtype=float)
        self._check_radius(r)
        phis = np.stack([self.bump(k, r) for k in range(self.n_max + 1)])
        return phis / phis.sum(axis=0)

    def theta_radial(self, k: int, r) -> np.ndarray:
        if not 0 <= k <= self.n_max:
            raise ValueError(f"ring index {k} outside 0..{self.n_max}")
        r = np.asarray(r, dtype=float)
        self._check_radius(r)
        # only rings k-1, k, k+1 can overlap ring k
        lo, hi = max(k - 1, 0), min(k + 1, self.n_max)
        num = self.bump(k, r)
        den = sum(self.bump(j, r) for j in range(lo, hi + 1))
        return np.divide(num, den, out=np.zeros_like(num), where=num > 0)

    def eval_theta(self, k: int, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        return self.theta_radial(k, np.linalg.norm(v, axis=-1))


@dataclass
class PartitionReport:
    n_samples: int
    max_sum_error: float
    min_sum_squares: float
    support_violations: int
    max_active: int

    @property
    def passed(self) -> bool:
        return (
            self.max_sum_error < 1e-12
            and self.min_sum_squares >= 1.0 / 3.0 - 1e-12
            and self.support_violations == 0
        )


def verify_partition(part: DyadicPartition, samples) -> PartitionReport:
    """samples: radii (1-D) or velocity vectors (trailing axis 3)."""
    s = np.asarray(samples, dtype=float)
    r = np.linalg.norm(s, axis=-1) if s.ndim >= 2 and s.shape[-1] == 3 else s
    r = r.ravel()
    th = part.radial(r)
    viol = 0
    for k in range(part.n_max + 1):
        lo, hi = part.ring_bounds(k)
        outside = (r >= hi) if k == 0 else ((r <= lo) | (r >= hi))
        viol += int(np.count_nonzero(th[k][outside] != 0.0))
    return PartitionReport(
        n_samples=r.size,
        max_sum_error=float(np.max(np.abs(th.sum(axis=0) - 1.0))),
        min_sum_squares=float(np.min((th**2).sum(axis=0))),
        support_violations=viol,
        max_active=int(np.max(np.count_nonzero(th > 0, axis=0))),
    )


@dataclass
class DecayReport:
    k: np.ndarray
    sup_grad: np.ndarray
    sup_hess: np.ndarray
    scaled_grad: np.ndarray  # sup|grad theta_k| * 2^k
    scaled_hess: np.ndarray  # sup|hess theta_k| * 4^k
    weighted_sum_sup: float  # sup_v sum_k <v>|grad theta_k|

    def halving_ratios(self) -> np.ndarray:
        return self.sup_grad[1:] / self.sup_grad[:-1]


def _radial_derivs(part: DyadicPartition, k: int, r: np.ndarray, h: np.ndarray):
    f = lambda x: part.theta_radial(k, x)
    f0 = f(r)
    fp, fm = f(r + h), f(np.maximum(r - h, 0.0))
    fp2, fm2 = f(r + 2 * h), f(np.maximum(r - 2 * h, 0.0))
    d1 = (8 * (fp - fm) - (fp2 - fm2)) / (12 * h)
    d2 = (16 * (fp + fm) - (fp2 + fm2) - 30 * f0) / (12 * h * h)
    return d1, d2


def verify_derivative_decay(part: DyadicPartition, k_list, fd_step: float = 1e-4, n_r: int = 4001) -> DecayReport:
    """Sup norms of the radial gradient and Hessian of theta_k over each ring.

    For a radial function the gradient norm is |theta'(r)| and the Hessian
    spectral norm is max(|theta''(r)|, |theta'(r)| / r).  Derivatives are
    fourth-order central differences with step fd_step * 2^k.
    """
    ks = np.asarray(list(k_list), dtype=int)
    g_sup, h_sup = [], []
    for k in ks:
        lo, hi = part.ring_bounds(int(k))
        h = fd_step * 2.0 ** k
        top = min(hi, part.r_max) - 2 * h
        r = np.linspace(max(lo, 2 * h), top, n_r)
        d1, d2 = _radial_derivs(part, int(k), r, np.full_like(r, h))
        g_sup.append(np.max(np.abs(d1)))
        h_sup.append(np.max(np.maximum(np.abs(d2), np.abs(d1) / r)))
    g_sup = np.array(g_sup)
    h_sup = np.array(h_sup)

    r = np.linspace(1e-3, part.r_max * (1 - 3 * fd_step), 20001)
    h = fd_step * np.maximum(r, 1.0)
    total = np.zeros_like(r)
    for k in range(part.n_max + 1):
        d1, _ = _radial_derivs(part, k, np.maximum(r, 2 * h), h)
        total += np.abs(d1)
    weighted = float(np.max(np.sqrt(1 + r**2) * total))
    return DecayReport(
        k=ks,
        sup_grad=g_sup,
        sup_hess=h_sup,
        scaled_grad=g_sup * 2.0**ks,
        scaled_hess=h_sup * 4.0**ks,
        weighted_sum_sup=weighted,
    )
