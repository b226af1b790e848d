"""Degree-2 valued CSPs, their instance graphs and the eigenvalue bound."""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np
import scipy.linalg

from .algebra import IndexSet, MatrixPolynomial, ket_bra
from .errors import InvalidIndexError, SizeGuardError, ValidationError
from .lifting import Lift, Signing, make_rng, random_lift

BRUTE_FORCE_LIMIT = 20


@dataclass(frozen=True)
class ConstraintType:
    """psi(x) = constant + sum_{i<j} w[i, j] x_i x_j on {+-1}^arity."""

    name: str
    w: np.ndarray
    constant: float = 0.0

    def __post_init__(self):
        w = np.array(self.w, dtype=float)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise ValidationError("weight table must be square")
        w = np.triu(w, 1) + np.triu(w, 1).T if not np.allclose(w, w.T) else w
        if np.any(np.diag(w) != 0):
            raise ValidationError("weight table must have a zero diagonal")
        w.setflags(write=False)
        object.__setattr__(self, "w", w)

    @property
    def arity(self) -> int:
        return self.w.shape[0]

    def value(self, x: np.ndarray) -> np.ndarray:
        """Homogeneous part on rows of x."""
        x = np.atleast_2d(x)
        return 0.5 * np.einsum("bi,ij,bj->b", x, self.w, x)

    @classmethod
    def from_predicate(cls, name: str, arity: int, pred: Callable[[tuple], float], tol: float = 1e-12) -> "ConstraintType":
        """Fourier expansion of a predicate; it must have degree <= 2 with no linear part."""
        pts = np.array(list(itertools.product((1, -1), repeat=arity)), dtype=float)
        vals = np.array([float(pred(tuple(p))) for p in pts])
        w = np.zeros((arity, arity))
        for i, j in itertools.combinations(range(arity), 2):
            w[i, j] = w[j, i] = np.mean(vals * pts[:, i] * pts[:, j])
        const = float(np.mean(vals))
        rebuilt = const + 0.5 * np.einsum("bi,ij,bj->b", pts, w, pts)
        if np.max(np.abs(rebuilt - vals)) > tol:
            raise ValidationError(f"predicate {name} is not a homogeneous degree-2 polynomial plus a constant")
        return cls(name, w, const)


MAX_CUT = ConstraintType.from_predicate("maxcut", 2, lambda x: float(x[0] != x[1]))
NAE3 = ConstraintType.from_predicate("nae3", 3, lambda x: float(len(set(x)) > 1))
SORT4 = ConstraintType("sort4", 0.25 * np.array([[0, 1, 0, -1], [1, 0, 1, 0], [0, 1, 0, 1], [-1, 0, 1, 0]]), 0.5)

ATOMS: dict[str, ConstraintType] = {t.name: t for t in (MAX_CUT, NAE3, SORT4)}


@dataclass(frozen=True)
class Constraint:
    ctype: ConstraintType
    scope: tuple
    signs: tuple


@dataclass(frozen=True)
class CSPInstance:
    n: int
    constraints: tuple

    def __post_init__(self):
        if self.n < 0:
            raise ValidationError("variable count must be non-negative")
        for c in self.constraints:
            if len(c.scope) != c.ctype.arity or len(c.signs) != c.ctype.arity:
                raise ValidationError("scope and signs must match the constraint arity")
            if len(set(c.scope)) != len(c.scope):
                raise ValidationError("scope variables must be distinct")
            if any(not 0 <= v < self.n for v in c.scope):
                raise InvalidIndexError(f"scope {c.scope} outside 0..{self.n - 1}")
            if any(s not in (1, -1) for s in c.signs):
                raise ValidationError("literal signs must be +1 or -1")

    @property
    def constant_offset(self) -> float:
        """Sum of the stripped additive constants."""
        return float(sum(c.ctype.constant for c in self.constraints))

    def objective(self, x: np.ndarray) -> np.ndarray:
        """Homogeneous objective, one value per row of x."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        total = np.zeros(x.shape[0])
        for c in self.constraints:
            total += c.ctype.value(x[:, list(c.scope)] * np.array(c.signs))
        return total

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "constraints": [
                {"atom": c.ctype.name, "scope": list(map(int, c.scope)), "signs": list(map(int, c.signs))}
                for c in self.constraints
            ],
        }

    @classmethod
    def from_json(cls, data: Mapping, atoms: Mapping[str, ConstraintType] = ATOMS) -> "CSPInstance":
        try:
            cons = tuple(
                Constraint(atoms[c["atom"]], tuple(int(v) for v in c["scope"]), tuple(int(s) for s in c["signs"]))
                for c in data["constraints"]
            )
            return cls(int(data["n"]), cons)
        except KeyError as exc:
            raise ValidationError(f"malformed CSP instance: missing {exc}") from exc

    def dumps(self) -> str:
        return json.dumps(self.to_json())


def instance_graph(inst: CSPInstance) -> np.ndarray:
    """A with weight w_ij/2 * l_i l_j on each scope pair, so obj(x) = x^T A x."""
    A = np.zeros((inst.n, inst.n))
    for c in inst.constraints:
        w = c.ctype.w
        for i, j in itertools.combinations(range(c.ctype.arity), 2):
            if w[i, j] == 0:
                continue
            a, b = c.scope[i], c.scope[j]
            val = 0.5 * w[i, j] * c.signs[i] * c.signs[j]
            A[a, b] += val
            A[b, a] += val
    return A


def eig_bound(inst: CSPInstance) -> float:
    """n * lambda_max(A), an upper bound on the homogeneous optimum."""
    if inst.n == 0:
        return 0.0
    return float(inst.n * scipy.linalg.eigvalsh(instance_graph(inst))[-1])


def brute_force_opt(inst: CSPInstance, chunk: int = 1 << 16) -> float:
    """Exact homogeneous optimum by enumerating all assignments."""
    n = inst.n
    if n > BRUTE_FORCE_LIMIT:
        raise SizeGuardError(f"brute force limited to {BRUTE_FORCE_LIMIT} variables")
    if n == 0:
        return 0.0
    A = instance_graph(inst)
    best = -np.inf
    bits = 1 << np.arange(n)
    for start in range(0, 1 << n, chunk):
        idx = np.arange(start, min(start + chunk, 1 << n))
        X = np.where(idx[:, None] & bits, -1.0, 1.0)
        best = max(best, float(np.max(np.einsum("bi,ij,bj->b", X, A, X))))
    return best


def random_instance(atom: ConstraintType, n: int, m: int, seed) -> CSPInstance:
    rng = make_rng(seed)
    if atom.arity > n:
        raise ValidationError("not enough variables for the atom")
    cons = tuple(
        Constraint(atom, tuple(int(v) for v in rng.choice(n, atom.arity, replace=False)), tuple(int(s) for s in rng.choice([-1, 1], atom.arity)))
        for _ in range(m)
    )
    return CSPInstance(n, cons)


@dataclass(frozen=True)
class Layout:
    """Constraints phi_1..phi_c on the base variable set 0..r-1."""

    r: int
    atoms: tuple

    def __post_init__(self):
        for t, scope in self.atoms:
            if len(scope) != t.arity or len(set(scope)) != len(scope) or any(not 0 <= v < self.r for v in scope):
                raise ValidationError(f"bad scope {scope} for atom {t.name}")

    @property
    def c(self) -> int:
        return len(self.atoms)

    def color(self, v: int, j: int) -> int:
        """Index of X_{v,j}."""
        return 1 + j * self.r + v

    @property
    def index_set(self) -> IndexSet:
        return IndexSet(0, self.r * self.c)

    def base_instance(self) -> CSPInstance:
        return CSPInstance(self.r, tuple(Constraint(t, tuple(s), (1,) * t.arity) for t, s in self.atoms))


def nae3_layout(c: int = 4) -> Layout:
    return Layout(3, tuple((NAE3, (0, 1, 2)) for _ in range(c)))


def maxcut_layout(c: int = 1) -> Layout:
    return Layout(2, tuple((MAX_CUT, (0, 1)) for _ in range(c)))


def csp_polynomial(layout: Layout) -> MatrixPolynomial:
    """Sum of w_ij/2 |v><u| X_{v,j} X_{u,j}^* plus adjoints over atom pairs."""
    iset = layout.index_set
    r = layout.r
    terms = []
    for j, (t, scope) in enumerate(layout.atoms):
        for a, b in itertools.combinations(range(t.arity), 2):
            if t.w[a, b] == 0:
                continue
            u, v = scope[a], scope[b]
            wt = 0.5 * t.w[a, b]
            cu, cv = layout.color(u, j), layout.color(v, j)
            terms.append(((cv, iset.star(cu)), wt * ket_bra(v, u, r)))
            terms.append(((cu, iset.star(cv)), wt * ket_bra(u, v, r)))
    return MatrixPolynomial.from_terms(iset, r, terms)


def instance_from_lift(layout: Layout, lift: Lift, signing: Signing | None = None) -> CSPInstance:
    """Constraint (j, y) acts on variables sigma_{v,j}(y)*r + v with literal chi_{v,j}(y)."""
    r, n = layout.r, lift.n
    cons = []
    for j, (t, scope) in enumerate(layout.atoms):
        for y in range(n):
            vars_, signs = [], []
            for v in scope:
                col = layout.color(v, j)
                vars_.append(int(lift.sigmas[col][y]) * r + v)
                signs.append(1 if signing is None else int(signing.chi[col - 1][y]))
            cons.append(Constraint(t, tuple(vars_), tuple(signs)))
    return CSPInstance(n * r, tuple(cons))


def random_regular_instance(layout: Layout, n: int, seed, signed: bool = True) -> tuple[CSPInstance, Lift, Signing]:
    if n < 1:
        raise ValidationError("n must be positive")
    lift = random_lift(layout.index_set, n, [int(seed), 0] if isinstance(seed, int) else seed)
    chi = Signing.random(lift, [int(seed), 1]) if signed else Signing.ones(lift)
    return instance_from_lift(layout, lift, chi), lift, chi


def to_dimacs_2xor(inst: CSPInstance) -> str:
    """One line per Max-Cut constraint: signed 1-based literals whose product should be -1."""
    lines = [f"p xor2 {inst.n} {len(inst.constraints)}"]
    for c in inst.constraints:
        if c.ctype.arity != 2:
            raise ValidationError("2XOR export needs arity-2 constraints")
        lits = [s * (v + 1) for v, s in zip(c.scope, c.signs)]
        lines.append(f"{lits[0]} {lits[1]} 0")
    return "\n".join(lines) + "\n"
