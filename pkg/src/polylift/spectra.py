"""Finite lifted operators, their spectra, norms and Hausdorff distances."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse

from .algebra import MatrixBouquet, MatrixPolynomial
from .errors import DimensionError, ValidationError
from .lifting import Lift, Signing

HERMITIAN_TOL = 1e-10
DENSE_EIG_LIMIT = 2000


def _realify(m: np.ndarray) -> np.ndarray:
    if np.iscomplexobj(m) and not np.any(m.imag):
        return np.ascontiguousarray(m.real)
    return m


def _same_colors(a, b) -> bool:
    return (a.d, a.e) == (b.d, b.e)


def lift_operator(lift: Lift, p: MatrixPolynomial, signing: Signing | None = None) -> np.ndarray:
    """Sum_w P_{(chi) sigma^w} (x) a_w without any symmetry requirement."""
    if not _same_colors(p.index_set, lift.index_set):
        raise DimensionError("polynomial and lift use different index sets")
    n, r = lift.n, p.r
    out = np.zeros((n * r, n * r), dtype=complex)
    u = np.arange(n)
    k, l = np.meshgrid(np.arange(r), np.arange(r), indexing="ij")
    for w, a in p.terms.items():
        if signing is None:
            pos, sgn = lift.word_perm(w), np.ones(n)
        else:
            pos, sgn = signing.word_action(lift, w)
        rows = (pos[:, None, None] * r + k[None]).ravel()
        cols = (u[:, None, None] * r + l[None]).ravel()
        vals = (sgn[:, None, None] * a[None]).ravel()
        np.add.at(out, (rows, cols), vals)
    return _realify(out)


def adjacency_matrix(lift: Lift, p: MatrixPolynomial, signing: Signing | None = None) -> np.ndarray:
    if not p.is_self_adjoint():
        raise ValidationError("adjacency operators need a self-adjoint polynomial")
    return lift_operator(lift, p, signing)


def nonbacktracking_matrix(lift: Lift, K: MatrixBouquet, signing: Signing | None = None) -> np.ndarray:
    """Sum_{i,j, j != i*} P_{(chi_i) sigma_i} (x) |j><i| (x) a_j.

    State (u, i, k) has index (u*D + i-1)*r + k with D = d + 2e.
    """
    iset = K.index_set
    if not _same_colors(iset, lift.index_set):
        raise DimensionError("bouquet and lift use different index sets")
    n, r, D = lift.n, K.r, iset.size
    dim = n * D * r
    out = np.zeros((dim, dim), dtype=complex)
    u = np.arange(n)
    k, l = np.meshgrid(np.arange(r), np.arange(r), indexing="ij")
    for i in iset.colors:
        v = lift.sigmas[i]
        s = np.ones(n) if signing is None else signing.arc_signs(lift, i)
        for j in iset.colors:
            if j == iset.star(i):
                continue
            a = K.a(j)
            rows = ((v * D + j - 1)[:, None, None] * r + k[None]).ravel()
            cols = ((u * D + i - 1)[:, None, None] * r + l[None]).ravel()
            vals = (s[:, None, None] * a[None]).ravel()
            np.add.at(out, (rows, cols), vals)
    return _realify(out)


def nontrivial_basis(n: int) -> np.ndarray:
    """Orthonormal n x (n-1) basis of the complement of the all-ones vector."""
    if n == 1:
        return np.zeros((1, 0))
    return scipy.linalg.helmert(n).T


def restrict_nontrivial(M: np.ndarray, n: int, block_dim: int, check_tol: float = 1e-8) -> np.ndarray:
    """Compress M to |+>_n^perp (x) C^block_dim after checking invariance."""
    M = np.asarray(M)
    if M.shape != (n * block_dim, n * block_dim):
        raise DimensionError(f"matrix shape {M.shape} does not match n={n}, block={block_dim}")
    plus = np.full((n, 1), 1 / np.sqrt(n))
    T = np.kron(plus, np.eye(block_dim))
    proj_M = T @ (T.T @ M)
    M_proj = (M @ T) @ T.T
    scale = max(1.0, float(np.max(np.abs(M)))) if M.size else 1.0
    if M.size and np.max(np.abs(proj_M - M_proj)) > check_tol * scale:
        raise ValidationError("matrix does not commute with the trivial projector")
    V = np.kron(nontrivial_basis(n), np.eye(block_dim))
    return V.conj().T @ M @ V


def trivial_block(M: np.ndarray, n: int, block_dim: int) -> np.ndarray:
    T = np.kron(np.full((n, 1), 1 / np.sqrt(n)), np.eye(block_dim))
    return T.T @ M @ T


@dataclass(frozen=True)
class SpectrumSet:
    """Finite sorted multiset (``values``) or a union of intervals and points."""

    values: np.ndarray | None = None
    intervals: tuple = ()
    points: tuple = ()
    meta: dict = field(default_factory=dict, compare=False)

    @classmethod
    def finite(cls, values: Iterable[float], **meta) -> "SpectrumSet":
        v = np.sort(np.asarray(list(values) if not isinstance(values, np.ndarray) else values, dtype=float))
        v.setflags(write=False)
        return cls(values=v, meta=meta)

    @classmethod
    def union(cls, intervals: Iterable[Sequence[float]] = (), points: Iterable[float] = (), **meta) -> "SpectrumSet":
        ivs = sorted((float(lo), float(hi)) for lo, hi in intervals)
        for lo, hi in ivs:
            if hi < lo:
                raise ValidationError(f"interval [{lo}, {hi}] is reversed")
        merged: list[list[float]] = []
        for lo, hi in ivs:
            if merged and lo <= merged[-1][1]:
                merged[-1][1] = max(merged[-1][1], hi)
            else:
                merged.append([lo, hi])
        pts = sorted({float(p) for p in points if not any(lo <= p <= hi for lo, hi in merged)})
        return cls(intervals=tuple(tuple(m) for m in merged), points=tuple(pts), meta=meta)

    @property
    def is_finite(self) -> bool:
        return self.values is not None

    def components(self) -> np.ndarray:
        """Sorted (k, 2) array of closed components; points are degenerate."""
        if self.values is not None:
            u = np.unique(self.values)
            return np.column_stack([u, u])
        comps = [list(iv) for iv in self.intervals] + [[p, p] for p in self.points]
        comps.sort()
        return np.array(comps, dtype=float).reshape(-1, 2)

    def is_empty(self) -> bool:
        return len(self.components()) == 0

    def min(self) -> float:
        return float(self.components()[0, 0])

    def max(self) -> float:
        return float(self.components()[-1, 1])

    def to_json(self) -> dict:
        if self.values is not None:
            out = {"kind": "finite", "values": self.values.tolist()}
        else:
            out = {"kind": "union", "intervals": [list(iv) for iv in self.intervals], "points": list(self.points)}
        out.update({k: v for k, v in self.meta.items()})
        return out

    @classmethod
    def from_json(cls, data) -> "SpectrumSet":
        if isinstance(data, list):
            return cls.finite(data)
        kind = data.get("kind", "finite" if "values" in data else "union")
        if kind == "finite":
            return cls.finite(data["values"])
        return cls.union(data.get("intervals", []), data.get("points", []))


def spectrum(M: np.ndarray) -> SpectrumSet:
    M = np.asarray(M)
    if M.shape[0] != M.shape[1]:
        raise DimensionError("spectrum needs a square matrix")
    scale = max(1.0, float(np.max(np.abs(M)))) if M.size else 1.0
    if M.size and np.max(np.abs(M - M.conj().T)) > HERMITIAN_TOL * scale:
        raise ValidationError("spectrum() needs a Hermitian matrix; use spectral_radius instead")
    return SpectrumSet.finite(scipy.linalg.eigvalsh(M) if M.size else np.zeros(0))


def spectral_radius(M, tol: float = 1e-3, max_power: int = 4096, seed: int = 0) -> float:
    """max |eigenvalue|; dense eigensolver up to 2000 dims, else power growth."""
    if scipy.sparse.issparse(M):
        dim = M.shape[0]
    else:
        M = np.asarray(M)
        dim = M.shape[0]
    if dim == 0:
        return 0.0
    if dim <= DENSE_EIG_LIMIT:
        dense = M.toarray() if scipy.sparse.issparse(M) else M
        return float(np.max(np.abs(scipy.linalg.eigvals(dense))))
    S = scipy.sparse.csr_matrix(M)
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    x /= np.linalg.norm(x)
    log_growth, done, prev = 0.0, 0, None
    k = 8
    while k <= max_power:
        while done < k:
            x = S @ x
            nrm = np.linalg.norm(x)
            if nrm == 0:
                return 0.0
            log_growth += np.log(nrm)
            x /= nrm
            done += 1
        est = float(np.exp(log_growth / k))
        if prev is not None and abs(est - prev) <= tol * max(1.0, est):
            return est
        prev = est
        k *= 2
    return float(prev)


def operator_norm(M: np.ndarray) -> float:
    M = np.asarray(M)
    if M.size == 0:
        return 0.0
    return float(np.linalg.norm(M, 2))


@dataclass(frozen=True)
class NormCertificate:
    passed: bool
    power: int
    beta: float
    log_scale: float
    min_pivot: float
    renormalizations: int
    norm_root: float = float("nan")

    def __bool__(self) -> bool:
        return self.passed


def scaled_power(M: np.ndarray, k: int) -> tuple[np.ndarray, float, int]:
    """M^k = exp(log_scale) * X with max|X| = 1, by binary powering with renormalization."""
    M = np.asarray(M)
    X = np.eye(M.shape[0], dtype=M.dtype)
    log_scale, renorm = 0.0, 0
    base, base_log = M.copy(), 0.0
    e = k
    while e:
        if e & 1:
            X = X @ base
            log_scale += base_log
            s = np.max(np.abs(X))
            if s == 0:
                return X, -np.inf, renorm
            X = X / s
            log_scale += np.log(s)
            renorm += 1
        e >>= 1
        if e:
            base = base @ base
            base_log *= 2
            s = np.max(np.abs(base))
            if s == 0:
                return np.zeros_like(X), -np.inf, renorm
            base = base / s
            base_log += np.log(s)
            renorm += 1
    return X, log_scale, renorm


def pivoted_cholesky_min_pivot(S: np.ndarray, tol: float = 1e-9) -> float:
    """Smallest diagonal pivot met by a diagonally pivoted Cholesky sweep.

    Returns a value < -tol iff the Hermitian matrix is not PSD within tol.
    """
    A = np.array(S, dtype=complex if np.iscomplexobj(S) else float)
    m = A.shape[0]
    worst = np.inf
    for k in range(m):
        diag = np.real(np.diag(A)[k:])
        j = k + int(np.argmax(diag))
        piv = diag[j - k]
        if piv <= tol:
            rest = A[k:, k:]
            low = float(np.real(np.diag(rest)).min())
            off = rest - np.diag(np.diag(rest))
            spread = float(np.max(np.abs(off))) if off.size else 0.0
            if spread > 2 * tol:
                low = min(low, -spread)
            return float(min(worst, low))
        worst = min(worst, piv)
        if j != k:
            A[[k, j], :] = A[[j, k], :]
            A[:, [k, j]] = A[:, [j, k]]
        col = A[k + 1 :, k] / np.sqrt(piv)
        A[k + 1 :, k + 1 :] -= np.outer(col, col.conj())
    return float(worst) if m else 0.0


def norm_power_certificate(M: np.ndarray, power: int, beta: float, tol: float = 1e-9) -> NormCertificate:
    """Decide ||M^power|| <= beta by a PSD test of beta^2 I - (M^p)^dagger M^p."""
    if power < 1:
        raise ValidationError("power must be at least 1")
    M = np.asarray(M)
    if M.size == 0:
        return NormCertificate(True, power, beta, 0.0, 0.0, 0)
    X, log_scale, renorm = scaled_power(M, power)
    if not np.isfinite(log_scale):
        return NormCertificate(beta >= 0, power, beta, log_scale, 1.0, renorm, 0.0)
    root = float(np.exp((log_scale + np.log(np.linalg.norm(X, 2))) / power))
    if beta <= 0:
        return NormCertificate(False, power, beta, log_scale, -1.0, renorm, root)
    # max|X| = 1 forces ||X|| >= 1, so a huge exponent is a certain failure
    expo = 2 * (log_scale - np.log(beta))
    if expo > 700:
        return NormCertificate(False, power, beta, log_scale, -np.inf, renorm, root)
    G = X.conj().T @ X
    S = np.eye(G.shape[0]) - G * np.exp(expo)
    piv = pivoted_cholesky_min_pivot(S, tol)
    return NormCertificate(bool(piv >= -tol), power, beta, log_scale, piv, renorm, root)


def power_norm(M: np.ndarray, power: int) -> float:
    """||M^power||_op computed through the scaled power."""
    M = np.asarray(M)
    if M.size == 0:
        return 0.0
    X, log_scale, _ = scaled_power(M, power)
    if not np.isfinite(log_scale):
        return 0.0
    return float(np.exp(log_scale + np.log(np.linalg.norm(X, 2))))


def power_norm_root(M: np.ndarray, power: int) -> float:
    """||M^power||^(1/power), safe against overflow of the power itself."""
    M = np.asarray(M)
    if M.size == 0:
        return 0.0
    X, log_scale, _ = scaled_power(M, power)
    if not np.isfinite(log_scale):
        return 0.0
    return float(np.exp((log_scale + np.log(np.linalg.norm(X, 2))) / power))


def _merge_components(S: SpectrumSet) -> np.ndarray:
    comps = S.components()
    if len(comps) == 0:
        raise ValidationError("Hausdorff distance needs nonempty sets")
    merged = [list(comps[0])]
    for lo, hi in comps[1:]:
        if lo <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], hi)
        else:
            merged.append([lo, hi])
    return np.array(merged)


def _dist_to(x: np.ndarray, comps: np.ndarray) -> np.ndarray:
    lo, hi = comps[:, 0], comps[:, 1]
    idx = np.searchsorted(lo, x, side="right") - 1
    d = np.full(x.shape, np.inf)
    has_left = idx >= 0
    li = np.clip(idx, 0, len(lo) - 1)
    inside = has_left & (x <= hi[li])
    d = np.where(inside, 0.0, d)
    left_gap = np.where(has_left, x - hi[li], np.inf)
    ri = np.clip(idx + 1, 0, len(lo) - 1)
    right_gap = np.where(idx + 1 < len(lo), lo[ri] - x, np.inf)
    return np.where(inside, 0.0, np.minimum(left_gap, right_gap))


def _directed(A: np.ndarray, B: np.ndarray) -> float:
    cand = [A[:, 0], A[:, 1]]
    if len(B) > 1:
        mids = (B[:-1, 1] + B[1:, 0]) / 2
        lo_idx = np.searchsorted(A[:, 0], mids, side="right") - 1
        ok = lo_idx >= 0
        li = np.clip(lo_idx, 0, len(A) - 1)
        ok &= mids <= A[li, 1]
        cand.append(mids[ok])
    x = np.concatenate(cand)
    return float(np.max(_dist_to(x, B)))


def hausdorff_distance(S: SpectrumSet, T: SpectrumSet) -> float:
    """Exact Hausdorff distance between finite unions of closed intervals."""
    A, B = _merge_components(S), _merge_components(T)
    return max(_directed(A, B), _directed(B, A))


def merge_multisets(*spectra: Sequence[float]) -> np.ndarray:
    return np.sort(np.concatenate([np.asarray(s, dtype=float) for s in spectra]))
