"""Independent numerical oracles shared by the module and acceptance tests."""

import itertools

import numpy as np
import scipy.sparse
import scipy.sparse.linalg

from conftest import random_bouquet
from polylift.algebra import IndexSet, MatrixPolynomial, reduce_word
from polylift.graphview import bfs_connected, connected_in_infinite_lift, folding_automaton, infinite_ball
from polylift.lifting import Signing, random_lift
from polylift.limitspec import singular_lambdas, transform_K_lambda
from polylift.spectra import lift_operator, nonbacktracking_matrix

SINGULAR_MARGIN = 1e-3


def ihara_bass_instance(seed: int):
    """Seeded (lift, K, signing) with n <= 8, r <= 2."""
    rng = np.random.default_rng(seed)
    d = int(rng.integers(0, 3))
    e = int(rng.integers(0 if d > 1 else 1, 2))
    iset = IndexSet(d, e)
    r = int(rng.integers(1, 3))
    n = 2 * int(rng.integers(1, 5))
    K = random_bouquet(iset, r, rng)
    L = random_lift(iset, n, [seed, 0])
    chi = Signing.random(L, [seed, 1]) if seed % 2 else None
    return L, K, chi, rng


def a_of_lambda(L, K, chi, lam):
    return lift_operator(L, transform_K_lambda(K, lam).to_polynomial(), chi)


def min_abs_eig(M) -> float:
    return float(np.min(np.abs(np.linalg.eigvals(M))))


def forward_residuals(L, K, chi) -> list[float]:
    """min|sigma(A_n(K_lam))| for every B-eigenvalue lam off the singular set."""
    ev = np.linalg.eigvals(nonbacktracking_matrix(L, K, chi))
    sing = singular_lambdas(K)
    out = []
    for lam in ev:
        if abs(lam) < SINGULAR_MARGIN or np.min(np.abs(sing - lam)) < SINGULAR_MARGIN:
            continue
        out.append(min_abs_eig(a_of_lambda(L, K, chi, lam)))
    return out


def converse_distances(L, K, chi, rng, starts: int = 10) -> list[float]:
    """Zeros of det A_n(K_lam) found by Newton-trace iteration, measured against sigma(B_n)."""
    ev = np.linalg.eigvals(nonbacktracking_matrix(L, K, chi))
    out = []
    for _ in range(starts):
        lam = complex(2 * rng.normal(), 2 * rng.normal())
        ok = False
        for _ in range(100):
            try:
                M = a_of_lambda(L, K, chi, lam)
                h = 1e-7
                dM = (a_of_lambda(L, K, chi, lam + h) - a_of_lambda(L, K, chi, lam - h)) / (2 * h)
                with np.errstate(all="raise"):
                    step = 1 / np.trace(np.linalg.solve(M, dM))
            except (ArithmeticError, np.linalg.LinAlgError, FloatingPointError):
                break
            lam -= step
            if abs(step) < 1e-13:
                ok = True
                break
        if not ok:
            continue
        try:
            m = min_abs_eig(a_of_lambda(L, K, chi, lam))
        except ArithmeticError:
            continue
        if m < 1e-8:
            out.append(float(np.min(np.abs(ev - lam))))
    return out


def tree_ball_resolvent(d: int, mu: float, depth: int) -> float:
    """(mu - A)^{-1} at the root of the depth-truncated d-regular tree."""
    parents = [-1]
    frontier = [0]
    for level in range(depth):
        nxt = []
        for v in frontier:
            for _ in range(d if level == 0 else d - 1):
                parents.append(v)
                nxt.append(len(parents) - 1)
        frontier = nxt
    m = len(parents)
    rows = np.arange(1, m)
    cols = np.array(parents[1:])
    A = scipy.sparse.coo_matrix((np.ones(m - 1), (rows, cols)), shape=(m, m))
    A = (A + A.T).tocsc()
    rhs = np.zeros(m)
    rhs[0] = 1
    x = scipy.sparse.linalg.spsolve(mu * scipy.sparse.identity(m, format="csc") - A, rhs)
    return float(x[0])


def sparse_polynomial(seed: int) -> MatrixPolynomial:
    """Seeded self-adjoint polynomial with 0-1 coefficients, degree <= 2, r <= 3."""
    rng = np.random.default_rng(seed)
    d = int(rng.integers(0, 3))
    e = int(rng.integers(0 if d else 1, 2))
    iset = IndexSet(d, e)
    r = int(rng.integers(1, 4))
    terms = []
    for _ in range(int(rng.integers(1, 4))):
        k = int(rng.integers(1, 3))
        w = tuple(int(g) for g in rng.integers(1, iset.size + 1, size=k))
        a = np.zeros((r, r))
        a[rng.integers(r), rng.integers(r)] = 1
        terms.append((w, a))
    p = MatrixPolynomial.from_terms(iset, r, terms)
    return p + p.star()


def folding_agreement(seed: int) -> tuple[int, int, int]:
    """(agreeing, total, connected) counts of folding verdicts against BFS on the radius-6 ball."""
    p = sparse_polynomial(seed)
    fa = folding_automaton(p)
    iset = p.index_set
    words = {()} | {reduce_word(w, iset) for k in (1, 2) for w in itertools.product(iset.colors, repeat=k)}
    agree = total = positive = 0
    for k in range(p.r):
        root = ((), k)
        verts, edges = infinite_ball(p, 6, root)
        for w in sorted(words):
            for j in range(p.r):
                a = connected_in_infinite_lift(p, root, (w, j), fa)
                b = bfs_connected(verts, edges, root, (w, j))
                total += 1
                agree += a == b
                positive += b
    return agree, total, positive


def _edge_keys(lift):
    """Undirected edge key for every arc (color, u), built from the permutations alone."""
    iset = lift.index_set
    keys = {}
    for c in iset.undirected_colors():
        s = lift.sigmas[c]
        for u in range(lift.n):
            if iset.is_matching(c):
                keys[c, u] = (c, min(u, int(s[u])))
            else:
                keys[c, u] = (c, u)
                keys[iset.star(c), int(s[u])] = (c, u)
    return keys


def trace_oracle(lift, K, ell):
    """Average of ||B^ell||_F^2 over all signings, B assembled entry by entry."""
    iset, n, r = lift.index_set, lift.n, K.r
    colors = list(iset.colors)
    keys = _edge_keys(lift)
    edges = sorted(set(keys.values()))
    states = [(u, i) for u in range(n) for i in colors]
    pos = {s: k for k, s in enumerate(states)}
    acc = 0.0
    for signs in itertools.product((1, -1), repeat=len(edges)):
        chi = dict(zip(edges, signs))
        B = np.zeros((len(states) * r, len(states) * r), dtype=complex)
        for u, i in states:
            v = int(lift.sigmas[i][u])
            for j in colors:
                if j == iset.star(i):
                    continue
                a, b = pos[v, j], pos[u, i]
                B[a * r : (a + 1) * r, b * r : (b + 1) * r] += chi[keys[i, u]] * K.a(j)
        P = np.linalg.matrix_power(B, ell)
        acc += float(np.sum(np.abs(P) ** 2))
    return acc / 2 ** len(edges)
