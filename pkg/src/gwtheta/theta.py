"""Lattice theta functions with pluggable kernels, and numerical checks of
their modular, elliptic and lowering transformation behavior.

The evaluator sums

    Theta_mu(z; tau) = v^{-lam/2} sum_{n in mu+Z^N} p(sqrt(v)(n + y/v))
                       q^{n^T A n / 2} e^{2 pi i B(z, n)}

with the term magnitude factored as |q^Q e^{2 pi i B}| =
e^{-2 pi Q(x)} e^{2 pi Q(y)/v} at x = sqrt(v)(n + y/v).  For indefinite A
the weight e^{-2 pi Q(x)} explodes along growth directions while the
kernel collapses below float resolution, so kernels participate in the
masking: each kernel exposes an exact piecewise-constant part (summed with
full weights, it carries no roundoff) and a smooth completion part that is
only evaluated where it is resolvable.  Truncation is controlled
empirically by radius stabilization, as the underlying convergence theory
is existence-grade only.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional

import numpy as np
from scipy.special import erfcx

from .quadspace import QuadSpace

TWO_PI = 2.0 * math.pi
# largest -2 pi Q(x) exponent at which a cancellation-built smooth part is
# still trusted in float64; beyond it the true completion difference is far
# below the roundoff of its O(1) constituents (see the stability notes).
WSAFE_DEFAULT = 14.0
EXP_CLIP = 690.0


class NonConvergenceError(RuntimeError):
    """Radius stabilization failed; kernel/parameter mismatch likely."""


class LatticeKernel:
    """Kernel interface for theta sums.

    `exact_values` is the integer/sign-valued component (no roundoff, summed
    at any weight); `smooth_values` is the completion remainder, evaluated
    only where `active` says it is float-resolvable.  Plain bounded kernels
    override `values` and leave the split trivial.
    """

    label = "kernel"

    def values(self, X: np.ndarray) -> np.ndarray:
        ex = self.exact_values(X)
        sm = self.smooth_values(X)
        return ex + sm

    def exact_values(self, X: np.ndarray) -> np.ndarray:
        return np.zeros(len(X))

    def smooth_values(self, X: np.ndarray) -> np.ndarray:
        return self.values(X) - self.exact_values(X)

    def active(self, X: np.ndarray) -> np.ndarray:
        return np.ones(len(X), bool)

    def weighted_smooth(self, X: np.ndarray, wlog: np.ndarray) -> np.ndarray:
        """smooth_values(X) * exp(wlog), stably when possible."""
        return self.smooth_values(X) * np.exp(np.minimum(wlog, EXP_CLIP))

    def gradient_dot_x(self, X: np.ndarray, h: float = 1e-4) -> np.ndarray:
        """sum_j x_j d p / d x_j by central differences (lowering-operator kernel)."""
        X = np.atleast_2d(X)
        out = np.zeros(len(X))
        for j in range(X.shape[1]):
            Xp = X.copy()
            Xm = X.copy()
            Xp[:, j] += h
            Xm[:, j] -= h
            out += X[:, j] * (self.values(Xp) - self.values(Xm)) / (2 * h)
        return out


class ConstantKernel(LatticeKernel):
    label = "one"

    def values(self, X):
        return np.ones(len(np.atleast_2d(X)))

    def exact_values(self, X):
        return np.ones(len(np.atleast_2d(X)))

    def smooth_values(self, X):
        return np.zeros(len(np.atleast_2d(X)))

    def gradient_dot_x(self, X, h=1e-4):
        return np.zeros(len(np.atleast_2d(X)))


class FunctionKernel(LatticeKernel):
    """Wrap an arbitrary bounded callable (positive-definite instances)."""

    def __init__(self, fn: Callable, label: str = "fn", grad_dot_x: Optional[Callable] = None):
        self._fn = fn
        self.label = label
        self._gdx = grad_dot_x

    def values(self, X):
        return np.asarray(self._fn(np.atleast_2d(X)), float)

    def exact_values(self, X):
        return np.zeros(len(np.atleast_2d(X)))

    def smooth_values(self, X):
        return self.values(X)

    def gradient_dot_x(self, X, h=1e-4):
        if self._gdx is not None:
            return np.asarray(self._gdx(np.atleast_2d(X)), float)
        return super().gradient_dot_x(X, h)


class ComponentError(ValueError):
    pass


class ZwegersKernel(LatticeKernel):
    """rho^{c1} - rho^{c2} for a signature (n,1) form.

    Interior c:  E(B(c, x) / sqrt(-Q(c))); cuspidal (primitive null) c:
    sgn(B(c, x)).  The kernel argument is the already sqrt(v)-scaled lattice
    point, consistent with the theta evaluator.  The sign part is exact;
    the E-minus-sgn remainders go through erfcx so the weighted term is
    computed in log space without cancellation.
    """

    def __init__(self, c1, c2, space: QuadSpace):
        self.space = space
        self.c1 = np.asarray(c1, float)
        self.c2 = np.asarray(c2, float)
        self.q1 = 0.5 * self.space.bilinear(self.c1, self.c1)
        self.q2 = 0.5 * self.space.bilinear(self.c2, self.c2)
        for q, c in ((self.q1, self.c1), (self.q2, self.c2)):
            if q > 1e-12:
                raise ComponentError(f"{c} has positive norm")
        b12 = self.space.bilinear(self.c1, self.c2)
        if self.q1 < 0 and self.q2 < 0 and b12 >= 0:
            raise ComponentError("c1, c2 lie in opposite cone components")
        self.label = "zwegers"

    def _u(self, X, which):
        c, q = (self.c1, self.q1) if which == 1 else (self.c2, self.q2)
        B = np.atleast_2d(X) @ (self.space.A @ c)
        if q < -1e-12:
            return B / math.sqrt(-q), True
        return B, False

    def values(self, X):
        out = np.zeros(len(np.atleast_2d(X)))
        for which, s in ((1, 1.0), (2, -1.0)):
            u, interior = self._u(X, which)
            from scipy.special import erf
            out += s * (erf(math.sqrt(math.pi) * u) if interior else np.sign(u))
        return out

    def exact_values(self, X):
        u1, _ = self._u(X, 1)
        u2, _ = self._u(X, 2)
        return np.sign(u1) - np.sign(u2)

    def smooth_values(self, X):
        out = np.zeros(len(np.atleast_2d(X)))
        from scipy.special import erf
        for which, s in ((1, 1.0), (2, -1.0)):
            u, interior = self._u(X, which)
            if interior:
                out += s * (erf(math.sqrt(math.pi) * u) - np.sign(u))
        return out

    def weighted_smooth(self, X, wlog):
        out = np.zeros(len(np.atleast_2d(X)))
        for which, s in ((1, 1.0), (2, -1.0)):
            u, interior = self._u(X, which)
            if not interior:
                continue
            # E(u) - sgn(u) = -sgn(u) erfc(sqrt(pi)|u|); log-combined with wlog
            au = np.abs(u) * math.sqrt(math.pi)
            lg = np.log(np.maximum(erfcx(au), 1e-300)) - au * au + wlog
            out += s * (-np.sign(u)) * np.exp(np.minimum(lg, EXP_CLIP))
        return out


@dataclass
class ThetaInstance:
    space: QuadSpace
    mu: np.ndarray
    lambda_weight: int
    kernel: LatticeKernel
    label: str = ""

    def __post_init__(self):
        self.mu = np.asarray(self.mu, float)


@dataclass(frozen=True)
class TransformReport:
    transform: str
    lhs: complex
    rhs: complex
    residual: float
    radius: int

    def as_dict(self):
        return {
            "transform": self.transform,
            "lhs": [self.lhs.real, self.lhs.imag],
            "rhs": [self.rhs.real, self.rhs.imag],
            "residual": self.residual,
            "radius": self.radius,
        }


def _box(N: int, R: int, center: np.ndarray) -> np.ndarray:
    axes = [np.arange(math.floor(center[j] - R), math.ceil(center[j] + R) + 1)
            for j in range(N)]
    G = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in G], axis=1).astype(float)


def theta_terms(inst: ThetaInstance, z, tau, R: int, wsafe: float = WSAFE_DEFAULT,
                chunk: int = 400_000, R_inner: int = -1) -> complex:
    """Truncated term sum over the ring R_inner < ||k - k0||_inf <= R.

    With the default R_inner = -1 this is the full box of radius R.  The
    prefactors v^{-lam/2} e^{2 pi Q(y)/v} are included.
    """
    A = inst.space.A
    z = np.asarray(z, complex)
    y = z.imag
    x = z.real
    v = float(np.imag(tau))
    u = float(np.real(tau))
    if v <= 0:
        raise ValueError("tau must lie in the upper half plane")
    N = inst.space.dim
    center = -y / v - inst.mu
    k = _box(N, R, center)
    shell = np.max(np.abs(k - np.round(center)), axis=1)
    k = k[(shell > R_inner) & (shell <= R)]
    total = 0j
    for i0 in range(0, len(k), chunk):
        n = k[i0:i0 + chunk] + inst.mu
        xt = math.sqrt(v) * (n + y / v)
        wlog = -math.pi * np.einsum("ij,jk,ik->i", xt, A, xt)
        Qn = 0.5 * np.einsum("ij,jk,ik->i", n, A, n)
        phase = np.exp(2j * math.pi * (u * Qn + (x @ A) @ n.T))
        ex = inst.kernel.exact_values(xt)
        m = ex != 0
        if m.any():
            if np.any(wlog[m] > EXP_CLIP):
                raise NonConvergenceError("exact part grows beyond float range")
            total += (ex[m] * np.exp(wlog[m]) * phase[m]).sum()
        act = inst.kernel.active(xt) & (wlog <= wsafe)
        if act.any():
            sm = inst.kernel.weighted_smooth(xt[act], wlog[act])
            total += (sm * phase[act]).sum()
    const = math.exp(math.pi * float(y @ A @ y) / v)
    return v ** (-inst.lambda_weight / 2.0) * const * total


def theta_eval(inst: ThetaInstance, z, tau, tol: float = 1e-9, R0: int = 6,
               Rmax: int = 40, Rstep: int = 4, wsafe: float = WSAFE_DEFAULT):
    """Stabilized evaluation: radius grows until two consecutive enlargements
    change the value by less than tol/2 each.

    Rings are accumulated incrementally, so the total cost is a single pass
    over the final box.  Returns (value, radius_used); raises
    NonConvergenceError at Rmax.
    """
    val = theta_terms(inst, z, tau, R0, wsafe=wsafe)
    R = R0
    good = 0
    while R < Rmax:
        R_next = min(R + Rstep, Rmax)
        ring = theta_terms(inst, z, tau, R_next, wsafe=wsafe, R_inner=R)
        val += ring
        R = R_next
        if abs(ring) < tol / 2:
            good += 1
            if good >= 2:
                return val, R
        else:
            good = 0
    raise NonConvergenceError(
        f"theta sum not stable at R={Rmax} (last ring {abs(ring):.2e})")


# ---------------------------------------------------------------------------
# transformation checks
# ---------------------------------------------------------------------------

def dual_coset_reps(space: QuadSpace) -> list[np.ndarray]:
    """Representatives of A^{-1} Z^N / Z^N (|det A| of them)."""
    n = space.dim
    d = abs(int(round(space.det)))
    reps = {}
    Ainv = space.A_inv
    for k in itertools.product(range(2 * d), repeat=n):
        w = Ainv @ np.array(k, float)
        key = tuple(Fraction(x).limit_denominator(10**6) % 1 for x in w)
        if key not in reps:
            reps[key] = np.array([float(f) for f in key])
        if len(reps) == d:
            break
    return list(reps.values())


def quad_z(space: QuadSpace, z) -> complex:
    z = np.asarray(z, complex)
    return 0.5 * complex(z @ space.A @ z)


def check_T_transform(inst: ThetaInstance, z, tau, tol: float = 1e-9,
                      **kw) -> TransformReport:
    """Residual of Theta_mu(z; tau+1) = phase * Theta_mu(z + mu + A^{-1}A*/2; tau).

    The shift form holds for arbitrary kernels and characteristics; for
    mu = 0 it is the classical statement.  phase = e^{2 pi i (Q(mu) - B(s, mu))}
    with s = mu + A^{-1}A*/2.
    """
    space = inst.space
    astar = np.diag(space.A).astype(float)
    s = inst.mu + 0.5 * space.A_inv @ astar
    phase = np.exp(2j * math.pi * (float(inst.mu @ space.A @ inst.mu) / 2.0
                                   - float(s @ space.A @ inst.mu)))
    lhs, R = theta_eval(inst, z, tau + 1.0, tol=tol, **kw)
    rhs_val, _ = theta_eval(inst, np.asarray(z, complex) + s, tau, tol=tol, **kw)
    rhs = phase * rhs_val
    return TransformReport("T", lhs, rhs, abs(lhs - rhs) / max(1.0, abs(rhs)), R)


def check_S_transform(inst: ThetaInstance, z, tau, tol: float = 1e-9,
                      mode: str = "vigneras", **kw) -> TransformReport:
    """Residual of the inversion law.

    mode="vigneras":
        Theta_mu(z/tau; -1/tau) = (-i tau)^{lam + N/2} / sqrt(|L'/L|)
            * i^{n_minus} * e^{2 pi i Q(z)/tau}
            * sum_nu e^{-2 pi i B(mu, nu)} Theta_nu(z; tau).
    The i^{n_minus} eighth-root replaces the source's constant phase, which
    fails already for positive definite forms; n_minus = 0 reproduces the
    classical inversion and n_minus = 1 the signature (n,1) factor.

    mode="zwegers" (signature (n,1), mu = 0):
        theta(z/tau; -1/tau) = i (-i tau)^{N/2} / sqrt(-det A)
            * sum_{n in A^{-1}Z^N/Z^N} e(Q(z + n tau)/tau) theta(z + n tau; tau).
    """
    space = inst.space
    z = np.asarray(z, complex)
    N = space.dim
    lhs, R = theta_eval(inst, z / tau, -1.0 / tau, tol=tol, **kw)
    if mode == "zwegers":
        fac = 1j * (-1j * tau) ** (N / 2.0) / math.sqrt(-space.det)
        acc = 0j
        for rep in dual_coset_reps(space):
            zz = z + rep * tau
            val, _ = theta_eval(inst, zz, tau, tol=tol, **kw)
            acc += np.exp(2j * math.pi * quad_z(space, zz) / tau) * val
        rhs = fac * acc
    else:
        n_minus = space.signature[1]
        dets = abs(space.det)
        fac = ((-1j * tau) ** (inst.lambda_weight + N / 2.0) / math.sqrt(dets)
               * 1j ** n_minus * np.exp(2j * math.pi * quad_z(space, z) / tau))
        acc = 0j
        for rep in dual_coset_reps(space):
            inst_nu = ThetaInstance(space, rep, inst.lambda_weight, inst.kernel)
            val, _ = theta_eval(inst_nu, z, tau, tol=tol, **kw)
            acc += np.exp(-2j * math.pi * float(inst.mu @ space.A @ rep)) * val
        rhs = fac * acc
    return TransformReport(f"S[{mode}]", lhs, rhs, abs(lhs - rhs) / max(1.0, abs(rhs)), R)


def check_elliptic(inst: ThetaInstance, z, tau, lam_shift, mu_shift,
                   tol: float = 1e-9, **kw) -> TransformReport:
    """Residual of theta(z + lam tau + mu~) = q^{-Q(lam)} e(-B(z, lam)) theta(z)."""
    space = inst.space
    z = np.asarray(z, complex)
    lam = np.asarray(lam_shift, float)
    mus = np.asarray(mu_shift, float)
    lhs, R = theta_eval(inst, z + lam * tau + mus, tau, tol=tol, **kw)
    Qlam = 0.5 * float(lam @ space.A @ lam)
    Bzl = complex(z @ space.A @ lam)
    rhs_val, _ = theta_eval(inst, z, tau, tol=tol, **kw)
    rhs = np.exp(2j * math.pi * (-tau * Qlam - Bzl)) * rhs_val
    return TransformReport("elliptic", lhs, rhs, abs(lhs - rhs) / max(1.0, abs(rhs)), R)


def printed_t_phase(space: QuadSpace, mu) -> complex:
    """The constant T-phase as printed in the source theorem (documented erratum).

    e^{pi i B(mu + A^{-1}A*/2, mu + A^{-1}A*/2)}; disagrees with the true
    ratio already for A = (2), where the ratio is 1 but this gives i.
    """
    astar = np.diag(space.A).astype(float)
    s = np.asarray(mu, float) + 0.5 * space.A_inv @ astar
    return np.exp(1j * math.pi * float(s @ space.A @ s))


# ---------------------------------------------------------------------------
# lowering operator
# ---------------------------------------------------------------------------

def theta_on_points(inst: ThetaInstance, z, tau, n_points: np.ndarray,
                    kernel: Optional[LatticeKernel] = None,
                    lambda_weight: Optional[int] = None) -> complex:
    """Plain term sum over an explicit set of lattice points (no masking).

    Used by checks that rely on termwise identities: both sides of such an
    identity must run over the very same finite point set.
    """
    A = inst.space.A
    kern = kernel if kernel is not None else inst.kernel
    lam = inst.lambda_weight if lambda_weight is None else lambda_weight
    z = np.asarray(z, complex)
    y = z.imag
    x = z.real
    v = float(np.imag(tau))
    u = float(np.real(tau))
    n = np.atleast_2d(np.asarray(n_points, float))
    xt = math.sqrt(v) * (n + y / v)
    wlog = -math.pi * np.einsum("ij,jk,ik->i", xt, A, xt)
    Qn = 0.5 * np.einsum("ij,jk,ik->i", n, A, n)
    phase = np.exp(2j * math.pi * (u * Qn + (x @ A) @ n.T))
    vals = kern.values(xt)
    const = math.exp(math.pi * float(y @ A @ y) / v)
    return v ** (-lam / 2.0) * const * (vals * np.exp(wlog) * phase).sum()


def select_lowering_points(inst: ThetaInstance, z, tau, R: int,
                           wbound: float = 6.0) -> np.ndarray:
    """Lattice points with moderate weight at the base (z, tau).

    The lowering identity is termwise, so it can be checked on any fixed
    finite point set; excluding huge-weight terms keeps the finite
    difference truncation error controlled.
    """
    z = np.asarray(z, complex)
    y = z.imag
    v = float(np.imag(tau))
    n = _box(inst.space.dim, R, -y / v - inst.mu) + inst.mu
    xt = math.sqrt(v) * (n + y / v)
    wlog = -math.pi * np.einsum("ij,jk,ik->i", xt, inst.space.A, xt)
    return n[wlog <= wbound]


def lowering_check(inst: ThetaInstance, z, tau, h: float = 1e-3, R: int = 8,
                   wbound: float = 6.0) -> float:
    """Check the lowering identity on a fixed moderate-weight point set.

    X_- = -2 i v^2 d/dtaubar - 2 i v sum_j y_j d/dzbar_j applied to
    Theta_{p, lam} equals (1/2)[Theta_{p_X, lam-2} - lam Theta_{p, lam-2}]
    with p_X(x) = sum_j x_j dp/dx_j.  The weight shift and the -lam p term
    are forced by direct differentiation (the identity without them already
    fails for p(x) = x on A = (1)).  Finite differences are Richardson
    refined; returns |lhs - rhs| at the sampled point.
    """
    z = np.asarray(z, complex)
    pts = select_lowering_points(inst, z, tau, R, wbound)
    f = lambda zz, tt: theta_on_points(inst, zz, tt, pts)

    def x_minus(step):
        u, v = float(np.real(tau)), float(np.imag(tau))
        d_u = (f(z, (u + step) + 1j * v) - f(z, (u - step) + 1j * v)) / (2 * step)
        d_v = (f(z, u + 1j * (v + step)) - f(z, u + 1j * (v - step))) / (2 * step)
        d_taubar = 0.5 * (d_u + 1j * d_v)
        xbar_term = 0j
        for j in range(inst.space.dim):
            ej = np.zeros(inst.space.dim)
            ej[j] = 1.0
            d_x = (f(z + step * ej, tau) - f(z - step * ej, tau)) / (2 * step)
            d_y = (f(z + 1j * step * ej, tau) - f(z - 1j * step * ej, tau)) / (2 * step)
            xbar_term += z.imag[j] * 0.5 * (d_x + 1j * d_y)
        return -2j * v * v * d_taubar - 2j * v * xbar_term

    l1 = x_minus(h)
    l2 = x_minus(h / 2)
    lhs = (4.0 * l2 - l1) / 3.0

    px = FunctionKernel(lambda X: inst.kernel.gradient_dot_x(X), label="p_X")
    rhs = 0.5 * (theta_on_points(inst, z, tau, pts, kernel=px,
                                 lambda_weight=inst.lambda_weight - 2)
                 - inst.lambda_weight * theta_on_points(
                     inst, z, tau, pts, lambda_weight=inst.lambda_weight - 2))
    return abs(lhs - rhs)
