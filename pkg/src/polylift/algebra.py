"""Free-product words, matrix polynomials and matrix bouquets.

Generators are numbered 1..d+2e.  Indices 1..d are self-inverse (matching
colors); d+1..d+e are permutation colors whose inverses are d+e+1..d+2e.
Index 0 is the identity color and never appears inside a word.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DimensionError, InvalidIndexError, UnsupportedInputError, ValidationError

Word = tuple[int, ...]

PRUNE_TOL = 1e-12


@dataclass(frozen=True)
class IndexSet:
    d: int
    e: int
    has_identity: bool = True

    def __post_init__(self):
        if self.d < 0 or self.e < 0:
            raise ValidationError("d and e must be non-negative")

    @property
    def size(self) -> int:
        """Number of non-identity colors, d + 2e."""
        return self.d + 2 * self.e

    @property
    def colors(self) -> range:
        return range(1, self.size + 1)

    def star(self, i: int) -> int:
        if i == 0:
            return 0
        if 1 <= i <= self.d:
            return i
        if self.d < i <= self.d + self.e:
            return i + self.e
        if self.d + self.e < i <= self.size:
            return i - self.e
        raise InvalidIndexError(f"index {i} outside 0..{self.size}")

    def is_matching(self, i: int) -> bool:
        return 1 <= i <= self.d

    def undirected_colors(self) -> range:
        """One representative per undirected color class: 1..d+e."""
        return range(1, self.d + self.e + 1)

    def check(self, i: int) -> None:
        if not 1 <= i <= self.size:
            raise InvalidIndexError(f"generator {i} outside 1..{self.size}")


def reduce_word(letters: Iterable[int], index_set: IndexSet) -> Word:
    """Free reduction with X_j X_j = 1 for matchings and X_j X_j* = 1 otherwise."""
    out: list[int] = []
    for g in letters:
        g = int(g)
        index_set.check(g)
        if out and out[-1] == index_set.star(g):
            out.pop()
        else:
            out.append(g)
    return tuple(out)


def is_reduced(word: Sequence[int], index_set: IndexSet) -> bool:
    for a, b in zip(word, word[1:]):
        if b == index_set.star(a):
            return False
    return all(1 <= g <= index_set.size for g in word)


def star_word(word: Sequence[int], index_set: IndexSet) -> Word:
    return tuple(index_set.star(g) for g in reversed(word))


def _as_coeff(a, r: int | None = None) -> np.ndarray:
    arr = np.array(a, dtype=complex)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise DimensionError(f"coefficient must be square, got shape {arr.shape}")
    if r is not None and arr.shape[0] != r:
        raise DimensionError(f"coefficient has dimension {arr.shape[0]}, expected {r}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError("coefficient entries must be finite")
    arr.setflags(write=False)
    return arr


def ket_bra(i: int, j: int, r: int) -> np.ndarray:
    """The r x r matrix unit |i><j| (0-based)."""
    m = np.zeros((r, r), dtype=complex)
    m[i, j] = 1.0
    return m


class MatrixPolynomial:
    """Finite sum of a_w X^w over reduced words w, with r x r coefficients.

    Instances are immutable; arithmetic returns new objects with words
    reduced, colliding terms summed and near-zero coefficients pruned.
    """

    __slots__ = ("index_set", "r", "_terms")

    def __init__(self, index_set: IndexSet, r: int, terms: Mapping[Sequence[int], object] | None = None):
        if r < 1:
            raise DimensionError("r must be positive")
        self.index_set = index_set
        self.r = int(r)
        acc: dict[Word, np.ndarray] = {}
        for w, a in (terms or {}).items():
            key = reduce_word(w, index_set)
            c = _as_coeff(a, self.r)
            acc[key] = acc[key] + c if key in acc else c.copy()
        self._terms = {}
        for w, c in acc.items():
            if np.max(np.abs(c)) > PRUNE_TOL:
                c = np.array(c)
                c.setflags(write=False)
                self._terms[w] = c

    @classmethod
    def from_terms(cls, index_set: IndexSet, r: int, items: Iterable[tuple[Sequence[int], object]]):
        acc: dict[Word, np.ndarray] = {}
        for w, a in items:
            key = reduce_word(w, index_set)
            c = np.array(_as_coeff(a, r))
            acc[key] = acc[key] + c if key in acc else c
        return cls(index_set, r, acc)

    @classmethod
    def constant(cls, index_set: IndexSet, a) -> "MatrixPolynomial":
        c = _as_coeff(a)
        return cls(index_set, c.shape[0], {(): c})

    @property
    def terms(self) -> dict[Word, np.ndarray]:
        return dict(self._terms)

    def __iter__(self):
        return iter(sorted(self._terms.items(), key=lambda kv: (len(kv[0]), kv[0])))

    def __len__(self) -> int:
        return len(self._terms)

    def coefficient(self, word: Sequence[int]) -> np.ndarray:
        key = reduce_word(word, self.index_set)
        return self._terms.get(key, np.zeros((self.r, self.r), dtype=complex))

    @property
    def degree(self) -> int:
        return max((len(w) for w in self._terms), default=0)

    def is_linear(self) -> bool:
        return self.degree <= 1

    def total_degree(self) -> int:
        """Sum of the degrees of all terms."""
        return sum(len(w) for w in self._terms)

    def _check_compatible(self, other: "MatrixPolynomial") -> None:
        if self.index_set != other.index_set:
            raise DimensionError("index sets differ")
        if self.r != other.r:
            raise DimensionError(f"coefficient dimensions differ: {self.r} vs {other.r}")

    def __add__(self, other: "MatrixPolynomial") -> "MatrixPolynomial":
        self._check_compatible(other)
        items = list(self._terms.items()) + list(other._terms.items())
        return MatrixPolynomial.from_terms(self.index_set, self.r, items)

    def __neg__(self) -> "MatrixPolynomial":
        return self.scale(-1.0)

    def __sub__(self, other: "MatrixPolynomial") -> "MatrixPolynomial":
        return self + (-other)

    def scale(self, c: complex) -> "MatrixPolynomial":
        return MatrixPolynomial(self.index_set, self.r, {w: c * a for w, a in self._terms.items()})

    def __mul__(self, other):
        if isinstance(other, MatrixPolynomial):
            return poly_multiply(self, other)
        return self.scale(other)

    def __rmul__(self, c):
        return self.scale(c)

    def star(self) -> "MatrixPolynomial":
        return poly_star(self)

    def is_self_adjoint(self, tol: float = 1e-12) -> bool:
        return self.equals(poly_star(self), tol)

    def equals(self, other: "MatrixPolynomial", tol: float = 1e-12) -> bool:
        if self.index_set != other.index_set or self.r != other.r:
            return False
        if set(self._terms) != set(other._terms):
            return False
        return all(np.allclose(self._terms[w], other._terms[w], rtol=0, atol=tol) for w in self._terms)

    def __eq__(self, other) -> bool:
        return isinstance(other, MatrixPolynomial) and self.equals(other)

    __hash__ = None

    def evaluate_at_ones(self) -> np.ndarray:
        """p(1,...,1), the adjacency matrix of the 1-lift."""
        out = np.zeros((self.r, self.r), dtype=complex)
        for a in self._terms.values():
            out += a
        return out

    def to_json(self) -> dict:
        out = {
            "d": self.index_set.d,
            "e": self.index_set.e,
            "r": self.r,
            "terms": [
                {"word": list(w), "re": a.real.tolist(), "im": a.imag.tolist()}
                for w, a in self
            ],
        }
        if not self.index_set.has_identity:
            out["has_identity"] = False
        return out

    @classmethod
    def from_json(cls, data: Mapping) -> "MatrixPolynomial":
        try:
            iset = IndexSet(int(data["d"]), int(data["e"]), bool(data.get("has_identity", True)))
            r = int(data["r"])
            items = []
            for t in data["terms"]:
                re = np.array(t["re"], dtype=float)
                im = np.array(t.get("im", np.zeros_like(re)), dtype=float)
                items.append((tuple(int(g) for g in t["word"]), re + 1j * im))
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed polynomial JSON: {exc}") from exc
        return cls.from_terms(iset, r, items)

    def dumps(self) -> str:
        return json.dumps(self.to_json())

    def __repr__(self) -> str:
        return f"MatrixPolynomial(d={self.index_set.d}, e={self.index_set.e}, r={self.r}, terms={len(self)})"


def poly_star(p: MatrixPolynomial) -> MatrixPolynomial:
    iset = p.index_set
    return MatrixPolynomial(iset, p.r, {star_word(w, iset): a.conj().T for w, a in p.terms.items()})


def poly_multiply(p: MatrixPolynomial, q: MatrixPolynomial) -> MatrixPolynomial:
    p._check_compatible(q)
    items = []
    for w1, a1 in p.terms.items():
        for w2, a2 in q.terms.items():
            items.append((w1 + w2, a1 @ a2))
    return MatrixPolynomial.from_terms(p.index_set, p.r, items)


class MatrixBouquet:
    """A one-vertex color-regular graph given by coefficients a_0..a_{d+2e}.

    ``coeffs[0]`` is the identity-color weight and may be ``None``.
    """

    __slots__ = ("index_set", "r", "coeffs")

    def __init__(self, index_set: IndexSet, coeffs: Sequence, a0=None, check: bool = True):
        if len(coeffs) != index_set.size:
            raise DimensionError(f"expected {index_set.size} coefficients, got {len(coeffs)}")
        mats = [_as_coeff(a) for a in coeffs]
        if not mats and a0 is None:
            raise DimensionError("bouquet needs at least one coefficient")
        r = mats[0].shape[0] if mats else _as_coeff(a0).shape[0]
        for a in mats:
            if a.shape[0] != r:
                raise DimensionError("all coefficients must share one dimension")
        self.index_set = index_set
        self.r = r
        self.coeffs = (None if a0 is None else _as_coeff(a0, r),) + tuple(mats)
        if check and not self.is_symmetric():
            raise ValidationError("bouquet violates a_{i*} = a_i^dagger")

    @property
    def a0(self):
        return self.coeffs[0]

    def a(self, i: int) -> np.ndarray:
        if i == 0:
            return self.coeffs[0] if self.coeffs[0] is not None else np.zeros((self.r, self.r), dtype=complex)
        return self.coeffs[i]

    def is_symmetric(self, tol: float = 1e-12) -> bool:
        iset = self.index_set
        for i in iset.colors:
            if not np.allclose(self.coeffs[iset.star(i)], self.coeffs[i].conj().T, rtol=0, atol=tol):
                return False
        if self.a0 is not None and not np.allclose(self.a0, self.a0.conj().T, rtol=0, atol=tol):
            return False
        return True

    def is_R_bounded(self, R: float) -> bool:
        for a in self.coeffs[1:]:
            if np.linalg.norm(a) > R:
                return False
            try:
                inv = np.linalg.inv(a)
            except np.linalg.LinAlgError:
                return False
            if np.linalg.norm(inv) > R:
                return False
        return True

    def max_norm(self) -> float:
        return max((np.linalg.norm(a, 2) for a in self.coeffs[1:]), default=0.0)

    def to_polynomial(self) -> MatrixPolynomial:
        terms = {(i,): self.coeffs[i] for i in self.index_set.colors}
        if self.a0 is not None:
            terms[()] = self.a0
        return MatrixPolynomial(self.index_set, self.r, terms)

    @classmethod
    def from_polynomial(cls, p: MatrixPolynomial) -> "MatrixBouquet":
        if not p.is_linear():
            raise UnsupportedInputError("only linear polynomials are bouquets")
        coeffs = [p.coefficient((i,)) for i in p.index_set.colors]
        a0 = p.terms.get(())
        return cls(p.index_set, coeffs, a0=a0)

    def scaled(self, c: float) -> "MatrixBouquet":
        a0 = None if self.a0 is None else c * self.a0
        return MatrixBouquet(self.index_set, [c * a for a in self.coeffs[1:]], a0=a0, check=False)

    def __repr__(self) -> str:
        return f"MatrixBouquet(d={self.index_set.d}, e={self.index_set.e}, r={self.r})"


def bouquet_of_graph(graph, r: int | None = None) -> MatrixBouquet:
    """Bouquet whose extension is ``graph``.

    ``graph`` is a networkx graph on vertices 0..r-1, or an iterable of
    edges.  Edge i = {u, v} (in the given order) becomes the pair
    a_i = |v><u|, a_{i+e} = |u><v|.
    """
    if hasattr(graph, "edges"):
        nodes = sorted(graph.nodes())
        if r is None:
            r = len(nodes)
        edges = list(graph.edges())
    else:
        edges = [tuple(e) for e in graph]
        if r is None:
            r = 1 + max(max(e) for e in edges)
    for u, v in edges:
        if u == v:
            raise UnsupportedInputError("half-loops are not supported")
        if not (0 <= u < r and 0 <= v < r):
            raise InvalidIndexError(f"edge {(u, v)} outside vertex range 0..{r - 1}")
    e = len(edges)
    iset = IndexSet(0, e, has_identity=False)
    fwd = [ket_bra(v, u, r) for u, v in edges]
    bwd = [ket_bra(u, v, r) for u, v in edges]
    return MatrixBouquet(iset, fwd + bwd)
