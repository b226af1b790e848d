"""Spectral quantities of infinite lifts.

The resolvent of a linear polynomial on the color-regular tree satisfies
a closed system in the r x r blocks G_oo and gamma_i.  Its fixed point,
conjugated into the hat bouquet, decides spectrum membership through the
nonbacktracking spectral radius.  Nonlinear polynomials go through large
random signed lifts instead.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg

from .algebra import IndexSet, MatrixBouquet, MatrixPolynomial
from .errors import NumericRegimeError, SingularityError, ValidationError
from .lifting import Signing, random_lift
from .spectra import SpectrumSet, adjacency_matrix

SQRT_FLOOR = 1e-12


def _l_matrix(index_set: IndexSet, coeffs: Sequence[np.ndarray]) -> np.ndarray:
    """(i, j) block 1[j != i*] a_i (x) conj(a_i); ``coeffs[i-1]`` is a_i."""
    D = index_set.size
    r = coeffs[0].shape[0]
    b = r * r
    L = np.zeros((D * b, D * b), dtype=complex)
    for i in index_set.colors:
        blk = np.kron(coeffs[i - 1], coeffs[i - 1].conj())
        for j in index_set.colors:
            if j != index_set.star(i):
                L[(i - 1) * b : i * b, (j - 1) * b : j * b] = blk
    return L


def rho_from_coefficients(index_set: IndexSet, coeffs: Sequence[np.ndarray]) -> float:
    if index_set.size == 0:
        return 0.0
    L = _l_matrix(index_set, coeffs)
    return float(np.sqrt(np.max(np.abs(scipy.linalg.eigvals(L)))))


def rho_B_infinity(K: MatrixBouquet) -> float:
    """Spectral radius of the nonbacktracking operator on the infinite tree."""
    return rho_from_coefficients(K.index_set, [K.a(i) for i in K.index_set.colors])


@dataclass(frozen=True)
class GeneralizedBouquet:
    """Linear coefficients without the adjoint symmetry constraint."""

    index_set: IndexSet
    a0: np.ndarray
    coeffs: tuple

    @property
    def r(self) -> int:
        return self.a0.shape[0]

    def to_polynomial(self) -> MatrixPolynomial:
        terms = {(): self.a0}
        for i in self.index_set.colors:
            terms[(i,)] = self.coeffs[i - 1]
        return MatrixPolynomial(self.index_set, self.r, terms)


def transform_K_lambda(K: MatrixBouquet, lam: complex, margin: float = 1e-9) -> GeneralizedBouquet:
    """The bouquet K_lambda whose lifted adjacency is singular iff lambda is a B-eigenvalue."""
    iset, r = K.index_set, K.r
    eye = np.eye(r)
    a0 = -eye.astype(complex)
    out = []
    for i in iset.colors:
        a_i, a_s = K.a(i), K.a(iset.star(i))
        M = lam * lam * eye - a_s @ a_i
        sv = np.linalg.svd(M, compute_uv=False)
        if sv[-1] <= margin * max(1.0, sv[0]):
            raise SingularityError(f"lambda^2 = {lam * lam} is an eigenvalue of a_(i*) a_i for i={i}")
        Minv = np.linalg.inv(M)
        a0 = a0 - a_i @ Minv @ a_s
        out.append(lam * a_i @ Minv)
    return GeneralizedBouquet(iset, a0, tuple(out))


def singular_lambdas(K: MatrixBouquet) -> np.ndarray:
    """Values lambda with lambda^2 in the spectrum of some a_{i*} a_i."""
    iset = K.index_set
    vals = []
    for i in iset.colors:
        ev = np.linalg.eigvals(K.a(iset.star(i)) @ K.a(i))
        root = np.sqrt(ev.astype(complex))
        vals.extend(root)
        vals.extend(-root)
    return np.array(vals)


@dataclass
class ResolventState:
    mu: float
    G_oo: np.ndarray
    gammas: np.ndarray
    converged: bool
    iterations: int
    residual: float
    g2_residual: float = float("nan")
    damping: float = 1.0


def _stack(K: MatrixBouquet) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    iset = K.index_set
    A = np.array([K.a(i) for i in iset.colors], dtype=complex)
    star_idx = np.array([iset.star(i) - 1 for i in iset.colors])
    a0 = K.a(0).astype(complex)
    return A, A[star_idx], star_idx, a0


def resolvent_fixed_point(
    K: MatrixBouquet,
    mu: float,
    tol: float = 1e-11,
    max_iter: int = 5000,
    plateau: int = 200,
) -> ResolventState:
    """Iterate the tree resolvent recursion at real spectral parameter mu.

    gamma_i <- (mu - a_0 - sum_{j != i*} a_{j*} gamma_j a_j)^{-1}; the
    iteration starts from sign(mu) / (|mu| + d + 2e + 1) and switches to
    half-step damping once the residual grows.  Non-convergence is
    reported, not raised.
    """
    if mu == 0:
        raise ValidationError("mu must be nonzero")
    iset, r = K.index_set, K.r
    D = iset.size
    A, Astar, star_idx, a0 = _stack(K)
    base = mu * np.eye(r) - a0
    gam = np.broadcast_to(np.sign(mu) / (abs(mu) + D + 1) * np.eye(r), (D, r, r)).astype(complex)
    damping = 1.0
    prev_res = np.inf
    best, best_it = np.inf, 0
    converged = False
    res = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        terms = Astar @ gam @ A
        total = terms.sum(axis=0)
        try:
            new = np.linalg.inv(base[None] - total[None] + terms[star_idx])
        except np.linalg.LinAlgError:
            break
        if not np.all(np.isfinite(new)):
            break
        res = float(np.max(np.linalg.norm(new - gam, axis=(1, 2))))
        if res > prev_res and damping == 1.0:
            damping = 0.5
        prev_res = res
        gam = damping * new + (1 - damping) * gam
        if res < tol:
            converged = True
            break
        if res < best * (1 - 1e-9):
            best, best_it = res, it
        elif it - best_it > plateau:
            break
    terms = Astar @ gam @ A
    resolvent_inv = base - terms.sum(axis=0)
    try:
        G = np.linalg.inv(resolvent_inv)
        g2 = float(np.linalg.norm(G @ resolvent_inv - np.eye(r)))
    except np.linalg.LinAlgError:
        G = np.full((r, r), np.nan, dtype=complex)
        g2 = float("inf")
        converged = False
    return ResolventState(float(mu), G, gam, converged, it, res, g2, damping)


def _sqrt_pair(G: np.ndarray, allow_indefinite: bool) -> tuple[np.ndarray, np.ndarray]:
    H = (G + G.conj().T) / 2
    w, V = np.linalg.eigh(H)
    if not (np.all(w > 0) or np.all(w < 0)) and not allow_indefinite:
        raise NumericRegimeError("G_oo is not definite; hat bouquet is out of regime")
    mag = np.maximum(np.abs(w), SQRT_FLOOR)
    root = (V * np.sqrt(mag)) @ V.conj().T
    inv_root = (V / np.sqrt(mag)) @ V.conj().T
    return root, inv_root


def hat_coefficients(K: MatrixBouquet, state: ResolventState) -> list[np.ndarray]:
    """G_oo^{-1} G_{o g_i} = a_{i*} gamma_i, similar to the hat coefficients."""
    iset = K.index_set
    return [K.a(iset.star(i)) @ state.gammas[i - 1] for i in iset.colors]


def hat_bouquet(K: MatrixBouquet, mu: float, tol: float = 1e-11, allow_indefinite: bool = False) -> MatrixBouquet:
    """Hat bouquet a_i(mu) = |G_oo|^{-1/2} G_{o g_i} |G_oo|^{-1/2}, G_{o g_i} = G_oo a_{i*} gamma_i."""
    state = resolvent_fixed_point(K, mu, tol=tol)
    if not state.converged:
        raise NumericRegimeError(f"resolvent recursion did not converge at mu={mu}")
    _, inv_root = _sqrt_pair(state.G_oo, allow_indefinite)
    G = state.G_oo
    iset = K.index_set
    coeffs = [inv_root @ G @ K.a(iset.star(i)) @ state.gammas[i - 1] @ inv_root for i in iset.colors]
    return MatrixBouquet(iset, coeffs, check=False)


def _normalized(K: MatrixBouquet) -> tuple[MatrixBouquet, float]:
    top = max(K.max_norm(), np.linalg.norm(K.a(0), 2))
    if top <= 0.99:
        return K, 1.0
    c = 0.99 / top
    return K.scaled(c), c


def in_infinite_spectrum(K: MatrixBouquet, mu: float, tol: float = 1e-6) -> bool:
    """False iff the recursion converges at mu and rho(B_hat) < 1 - tol."""
    if not K.is_symmetric():
        raise ValidationError("membership test needs a self-adjoint bouquet")
    Ks, c = _normalized(K)
    m = mu * c
    if m == 0:
        m = 1e-9
    state = resolvent_fixed_point(Ks, m)
    if not state.converged:
        return True
    rho_hat = rho_from_coefficients(Ks.index_set, hat_coefficients(Ks, state))
    return not rho_hat < 1 - tol


def default_range(K: MatrixBouquet) -> tuple[float, float]:
    bound = np.linalg.norm(K.a(0), 2) + sum(np.linalg.norm(K.a(i), 2) for i in K.index_set.colors)
    bound = 1.05 * bound + 0.1
    return -bound, bound


def _refine(K: MatrixBouquet, out_pt: float, in_pt: float, tol: float, verdict_tol: float) -> float:
    while abs(in_pt - out_pt) > tol:
        mid = (out_pt + in_pt) / 2
        if in_infinite_spectrum(K, mid, verdict_tol):
            in_pt = mid
        else:
            out_pt = mid
    return (out_pt + in_pt) / 2


def infinite_spectrum_scan(
    K: MatrixBouquet,
    lo: float | None = None,
    hi: float | None = None,
    step: float = 0.05,
    refine_tol: float = 1e-4,
    verdict_tol: float = 1e-6,
) -> SpectrumSet:
    """Grid scan of the membership test with bisection-refined boundaries."""
    if lo is None or hi is None:
        dlo, dhi = default_range(K)
        lo = dlo if lo is None else lo
        hi = dhi if hi is None else hi
    if not lo < hi or step <= 0:
        raise ValidationError("need lo < hi and step > 0")
    grid = np.arange(lo, hi + step / 2, step)
    grid = np.where(np.abs(grid) < 1e-12, step * 1e-3, grid)
    inside = [in_infinite_spectrum(K, float(m), verdict_tol) for m in grid]
    intervals, points = [], []
    k = 0
    while k < len(grid):
        if not inside[k]:
            k += 1
            continue
        j = k
        while j + 1 < len(grid) and inside[j + 1]:
            j += 1
        left = grid[k] if k == 0 else _refine(K, grid[k - 1], grid[k], refine_tol, verdict_tol)
        right = grid[j] if j == len(grid) - 1 else _refine(K, grid[j + 1], grid[j], refine_tol, verdict_tol)
        if right - left <= 2 * refine_tol:
            points.append((left + right) / 2)
        else:
            intervals.append((left, right))
        k = j + 1
    return SpectrumSet.union(
        intervals, points, method="resolvent", grid_step=step, tol=refine_tol, lo=float(lo), hi=float(hi)
    )


def cluster_spectrum(values: np.ndarray, gap: float, point_tol: float = 1e-6) -> tuple[list, list]:
    v = np.sort(np.asarray(values, dtype=float))
    if len(v) == 0:
        return [], []
    cuts = np.nonzero(np.diff(v) > gap)[0]
    starts = np.r_[0, cuts + 1]
    ends = np.r_[cuts, len(v) - 1]
    intervals, points = [], []
    for s, e in zip(starts, ends):
        a, b = v[s], v[e]
        if b - a <= point_tol * max(1.0, abs(a)):
            points.append(float((a + b) / 2))
        else:
            intervals.append((float(a), float(b)))
    return intervals, points


def signed_lift_eigenvalues(p: MatrixPolynomial, N: int, seed: int) -> np.ndarray:
    lift = random_lift(p.index_set, N, [seed, 0])
    chi = Signing.random(lift, [seed, 1])
    A = adjacency_matrix(lift, p, chi)
    return scipy.linalg.eigvalsh(A, overwrite_a=True, check_finite=False)


def estimate_spectrum_general(p: MatrixPolynomial, N: int, seeds: Iterable[int] = (0,), gap: float | None = None) -> SpectrumSet:
    """Support estimate from random signed N-lifts, merged over seeds.

    Eigenvalues are clustered at gaps wider than 3/sqrt(N); clusters of
    numerically equal values become isolated points.
    """
    if not p.is_self_adjoint():
        raise ValidationError("spectrum estimation needs a self-adjoint polynomial")
    seeds = list(seeds)
    vals = np.concatenate([signed_lift_eigenvalues(p, N, s) for s in seeds])
    g = 3 / np.sqrt(N) if gap is None else gap
    intervals, points = cluster_spectrum(vals, g)
    return SpectrumSet.union(intervals, points, method="lift", N=N, seeds=seeds, gap=g)


def nb_sequence_mass(K: MatrixBouquet, t: int) -> float:
    """Sum over nonbacktracking color sequences of length t of ||a(gamma)||_F^2."""
    iset = K.index_set
    T = {i: K.a(i) @ K.a(i).conj().T for i in iset.colors}
    for _ in range(t - 1):
        T = {
            j: sum((K.a(j) @ T[i] @ K.a(j).conj().T for i in iset.colors if j != iset.star(i)), np.zeros((K.r, K.r)))
            for j in iset.colors
        }
    return float(np.real(sum(np.trace(m) for m in T.values())))
