"""Quadratic-space linear algebra over an integral symmetric matrix.

Signature counts and the congruence splitting A = P^{-T} D P^{-1}
(equivalently A^{-1} = P D P^T with D = diag(+1..,-1..)) are computed by
exact rational congruence diagonalization, so signature decisions never
depend on floating point.  On top of that sits the completion-vector
solver: given a negative triple (a, b, c) it produces orthogonal vectors
d, e, f and scalars turning a triple sign product into an E3 (or cusp-E3)
kernel with the right asymptotics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .generr import DomainError, erf_e3, erf_e3_cusp

F = Fraction


class DegenerateMatrixError(ValueError):
    pass


class SignatureError(ValueError):
    pass


def _to_fraction_matrix(A) -> list[list[Fraction]]:
    A = np.asarray(A)
    n, m = A.shape
    if n != m:
        raise ValueError("matrix must be square")
    M = [[F(A[i, j]).limit_denominator(10**12) if not float(A[i, j]).is_integer()
          else F(int(round(float(A[i, j])))) for j in range(n)] for i in range(n)]
    for i in range(n):
        for j in range(i):
            if M[i][j] != M[j][i]:
                raise ValueError("matrix must be symmetric")
    return M


def _congruence_diagonalize(M: list[list[Fraction]]):
    """Exact symmetric congruence: returns (basis, diag) with basis[i]^T M basis[j] = diag[i] delta_ij.

    Gram-Schmidt on the standard basis with a deterministic fix-up: when a
    reduced vector is null, the next later basis vector is added to it.
    """
    n = len(M)

    def form(u, v):
        return sum(u[i] * M[i][j] * v[j] for i in range(n) for j in range(n))

    basis: list[list[Fraction]] = []
    diag: list[Fraction] = []
    for k in range(n):
        v = [F(int(i == k)) for i in range(n)]
        for u, d in zip(basis, diag):
            c = form(u, v) / d
            v = [vi - c * ui for vi, ui in zip(v, u)]
        if form(v, v) == 0:
            # deterministic repair: mix in later standard vectors until non-null
            fixed = False
            for m in range(k + 1, n):
                w = list(v)
                w[m] += 1
                for u, d in zip(basis, diag):
                    c = form(u, w) / d
                    w = [wi - c * ui for wi, ui in zip(w, u)]
                if form(w, w) != 0:
                    v = w
                    fixed = True
                    break
            if not fixed:
                raise DegenerateMatrixError("degenerate quadratic form")
        basis.append(v)
        diag.append(form(v, v))
    return basis, diag


def _det_fraction(M: list[list[Fraction]]) -> Fraction:
    n = len(M)
    M = [row[:] for row in M]
    det = F(1)
    for col in range(n):
        piv = next((r for r in range(col, n) if M[r][col] != 0), None)
        if piv is None:
            return F(0)
        if piv != col:
            M[col], M[piv] = M[piv], M[col]
            det = -det
        det *= M[col][col]
        inv = 1 / M[col][col]
        for r in range(col + 1, n):
            f = M[r][col] * inv
            if f:
                M[r] = [x - f * y for x, y in zip(M[r], M[col])]
    return det


@dataclass(frozen=True)
class QuadSpace:
    """Integral symmetric A with signature, splitting P, and the A^{-1} pairing."""

    A: np.ndarray
    A_inv: np.ndarray
    P: np.ndarray          # columns: A^{-1} = P diag(I, -I) P^T
    signature: tuple[int, int]
    det: int

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    def pair(self, u, v) -> float:
        """<u, v> = u^T A^{-1} v."""
        return float(np.asarray(u, float) @ self.A_inv @ np.asarray(v, float))

    def pair_exact(self, u, v) -> Fraction:
        Ainv = self._ainv_exact
        u = [F(int(x)) if float(x).is_integer() else F(x).limit_denominator(10**12)
             for x in np.asarray(u).tolist()]
        v = [F(int(x)) if float(x).is_integer() else F(x).limit_denominator(10**12)
             for x in np.asarray(v).tolist()]
        n = len(u)
        return sum(u[i] * Ainv[i][j] * v[j] for i in range(n) for j in range(n))

    @property
    def _ainv_exact(self):
        return self.__dict__.setdefault(
            "_ainv_cache",
            _invert_fraction(_to_fraction_matrix(self.A)),
        )

    def bilinear(self, u, v) -> float:
        """B(u, v) = u^T A v."""
        return float(np.asarray(u, float) @ self.A @ np.asarray(v, float))


def _invert_fraction(M: list[list[Fraction]]):
    n = len(M)
    aug = [row[:] + [F(int(i == j)) for j in range(n)] for i, row in enumerate(M)]
    for col in range(n):
        piv = next((r for r in range(col, n) if aug[r][col] != 0), None)
        if piv is None:
            raise DegenerateMatrixError("singular matrix")
        aug[col], aug[piv] = aug[piv], aug[col]
        inv = 1 / aug[col][col]
        aug[col] = [x * inv for x in aug[col]]
        for r in range(n):
            if r != col and aug[r][col]:
                f = aug[r][col]
                aug[r] = [x - f * y for x, y in zip(aug[r], aug[col])]
    return [row[n:] for row in aug]


def make_quadspace(A) -> QuadSpace:
    """Build a QuadSpace from a symmetric nondegenerate integer matrix.

    The splitting is obtained by exact Gram-Schmidt on the A^{-1} form over
    the standard basis (positive-norm directions ordered first, ties broken
    by index), then scaled to unit +-1 norms in floating point.
    """
    M = _to_fraction_matrix(A)
    det = _det_fraction(M)
    if det == 0:
        raise DegenerateMatrixError("det A = 0")
    Minv = _invert_fraction(M)
    # diagonalize the A-form: u_i^T A u_j = d_i delta_ij; then the columns
    # P_i = u_i / sqrt(|d_i|) (positive-norm first) satisfy P D P^T = A^{-1}
    basis, diag = _congruence_diagonalize(M)
    order = sorted(range(len(diag)), key=lambda i: (diag[i] < 0, i))
    n_plus = sum(1 for d in diag if d > 0)
    n_minus = len(diag) - n_plus
    cols = []
    for i in order:
        scale = 1.0 / math.sqrt(abs(float(diag[i])))
        cols.append([float(x) * scale for x in basis[i]])
    P = np.array(cols, float).T
    An = np.asarray(A, float)
    return QuadSpace(
        A=An,
        A_inv=np.array([[float(x) for x in row] for row in Minv]),
        P=P,
        signature=(n_plus, n_minus),
        det=int(det) if det.denominator == 1 else float(det),
    )


# ---------------------------------------------------------------------------
# completion vectors
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CompletionData:
    d: np.ndarray
    e: np.ndarray
    f: np.ndarray
    lam: float
    mu: float
    nu: float
    rho: float
    alpha: tuple[float, float, float]
    degenerate: bool          # rho == 0, i.e. span{a,b,c} has signature (0,2)
    permutation: tuple[int, int, int]

    def as_dict(self) -> dict:
        return {
            "d": self.d.tolist(),
            "e": self.e.tolist(),
            "f": self.f.tolist(),
            "lambda": self.lam,
            "mu": self.mu,
            "nu": self.nu,
            "rho": self.rho,
            "alpha": list(self.alpha),
            "degenerate": self.degenerate,
            "permutation": list(self.permutation),
        }


def _gram_signature_03_or_02(space: QuadSpace, vecs, tol=1e-10):
    """Classify span{a,b,c}: 'neg3' (0,3), 'neg2' ((0,2) with a null direction), or raise."""
    G = np.array([[space.pair(u, v) for v in vecs] for u in vecs])
    ev = np.linalg.eigvalsh(G)
    scale = max(1.0, np.abs(ev).max())
    if (ev < -tol * scale).sum() == 3:
        return "neg3"
    if (ev < -tol * scale).sum() == 2 and (np.abs(ev) < tol * scale).sum() == 1:
        return "neg2"
    raise SignatureError(f"span has inadmissible Gram eigenvalues {ev}")


_PERMS = [(0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0)]


def completion_vectors(a, b, c, space: QuadSpace, zero_tol: float = 1e-10) -> CompletionData:
    """Orthogonal vectors d, e, f and scalars for the sign-product completion.

    The inputs are permuted to the lexicographically first arrangement in
    which span{a, b} is negative definite; then

        d = lam a,  e + alpha1 d = mu b,  f + alpha2 d + alpha3 e = nu c

    with |d|^2 = |e|^2 = -2 and |f|^2 = -2 (rho > 0) or 0 (rho = 0).
    """
    vecs = [np.asarray(a, float), np.asarray(b, float), np.asarray(c, float)]
    if np.linalg.matrix_rank(np.stack(vecs)) != 3:
        raise SignatureError("a, b, c must span a 3-dimensional space")
    kind = _gram_signature_03_or_02(space, vecs)

    chosen = None
    for perm in _PERMS:
        aa, bb = vecs[perm[0]], vecs[perm[1]]
        naa = space.pair(aa, aa)
        nbb = space.pair(bb, bb)
        gab = space.pair(aa, bb)
        if naa < -zero_tol and naa * nbb - gab * gab > zero_tol:
            chosen = perm
            break
    if chosen is None:
        raise SignatureError("no permutation makes span{a,b} negative definite")
    av, bv, cv = (vecs[i] for i in chosen)

    naa = space.pair(av, av)
    nbb = space.pair(bv, bv)
    ncc = space.pair(cv, cv)
    gab = space.pair(av, bv)
    gac = space.pair(av, cv)
    gbc = space.pair(bv, cv)

    lam = math.sqrt(-2.0 / naa)
    mu = math.sqrt(-2.0 * naa / (naa * nbb - gab * gab))
    rho = (-ncc / 2.0 + gac * gac / (2.0 * naa)
           - 0.25 * mu * mu * (gbc - gab * gac / naa) ** 2)
    degenerate = kind == "neg2"
    if degenerate and abs(rho) > 1e-6:
        raise SignatureError(f"rho = {rho} inconsistent with (0,2) span")
    if degenerate:
        rho = 0.0
    nu = 1.0 if rho == 0.0 else 1.0 / math.sqrt(abs(rho))
    alpha1 = -gab * lam * mu / 2.0
    alpha2 = -gac * lam * nu / 2.0
    alpha3 = -0.5 * mu * nu * (gbc + gab * gac * lam * lam / 2.0)

    d = lam * av
    e = mu * bv - alpha1 * d
    f = nu * cv - alpha2 * d - alpha3 * e
    return CompletionData(
        d=d, e=e, f=f, lam=lam, mu=mu, nu=nu, rho=rho,
        alpha=(alpha1, alpha2, alpha3), degenerate=degenerate,
        permutation=chosen,
    )


@dataclass(frozen=True)
class KernelTriple:
    """Callable completion kernel for a triple sign product."""

    data: CompletionData
    space: QuadSpace
    targets: tuple[np.ndarray, np.ndarray, np.ndarray]   # a, b, c as given

    def __call__(self, X):
        X = np.asarray(X, float)
        d, e, f = self.data.d, self.data.e, self.data.f
        if X.ndim == 1:
            w = (float(d @ X), float(e @ X), float(f @ X))
            if self.data.degenerate:
                return erf_e3_cusp(self.data.alpha, w)
            return erf_e3(self.data.alpha, w)
        W = np.stack([X @ d, X @ e, X @ f], axis=1)
        if self.data.degenerate:
            return np.array([erf_e3_cusp(self.data.alpha, w) for w in W])
        from .generr import erf_e3_batch
        return erf_e3_batch(self.data.alpha, W)

    def sign_target(self, n) -> float:
        """sgn(a^T n) sgn(b^T n) sgn(c^T n), the large-argument limit."""
        n = np.asarray(n, float)
        out = 1.0
        for t in self.targets:
            out *= np.sign(t @ n)
        return out

    def composed_with_split(self) -> Callable:
        """X -> kernel(P X), the function tested against the diagonal operator."""
        P = self.space.P
        return lambda x: self(P @ np.asarray(x, float))


def build_kernel_triple(a, b, c, space: QuadSpace) -> KernelTriple:
    data = completion_vectors(a, b, c, space)
    return KernelTriple(
        data=data,
        space=space,
        targets=(np.asarray(a, float), np.asarray(b, float), np.asarray(c, float)),
    )
