"""Finite n-lifts, edge signings, product lifts and seeded pseudorandom sources.

Permutations act on {0..n-1}; P_sigma has P[sigma(u), u] = 1.  A word
X_{i1} ... X_{ik} is realized as sigma_{i1} o ... o sigma_{ik}, so the
rightmost letter acts first.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .algebra import IndexSet
from .errors import DimensionError, ParityError, ValidationError


def make_rng(seed) -> np.random.Generator:
    """Replayable generator: PCG64 keyed through a SeedSequence."""
    if isinstance(seed, (bytes, bytearray)):
        seed = int.from_bytes(hashlib.blake2b(bytes(seed), digest_size=16).digest(), "big")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def _check_size(index_set: IndexSet, n: int) -> None:
    if n < 1:
        raise ValidationError("n must be at least 1")
    if index_set.d > 0 and n % 2 == 1 and n > 1:
        raise ParityError(f"odd n={n} is not allowed when d={index_set.d} > 0")
    if index_set.d > 0 and n == 1:
        raise ParityError("a matching on one point does not exist")


def inverse_perm(sigma: np.ndarray) -> np.ndarray:
    inv = np.empty_like(sigma)
    inv[sigma] = np.arange(len(sigma))
    return inv


def associated_matching(pi: np.ndarray) -> np.ndarray:
    """Matching j -> pi(pi^{-1}(j) xor 1); pairs pi(2k) with pi(2k+1)."""
    pinv = inverse_perm(pi)
    return pi[pinv ^ 1]


@dataclass(frozen=True)
class Lift:
    index_set: IndexSet
    n: int
    sigmas: np.ndarray = field(repr=False)

    def __post_init__(self):
        s = np.asarray(self.sigmas, dtype=np.int64)
        if s.shape != (self.index_set.size + 1, self.n):
            raise DimensionError(f"sigmas must have shape {(self.index_set.size + 1, self.n)}, got {s.shape}")
        s = s.copy()
        s.setflags(write=False)
        object.__setattr__(self, "sigmas", s)
        self.validate()

    def validate(self) -> None:
        iset, n = self.index_set, self.n
        ident = np.arange(n)
        if not np.array_equal(self.sigmas[0], ident):
            raise ValidationError("sigma_0 must be the identity")
        for i in iset.colors:
            s = self.sigmas[i]
            if not np.array_equal(np.sort(s), ident):
                raise ValidationError(f"sigma_{i} is not a permutation")
            if not np.array_equal(self.sigmas[iset.star(i)][s], ident):
                raise ValidationError(f"sigma_{iset.star(i)} is not the inverse of sigma_{i}")
            if iset.is_matching(i) and np.any(s == ident):
                raise ValidationError(f"matching sigma_{i} has a fixed point")

    def sigma(self, i: int) -> np.ndarray:
        return self.sigmas[i]

    def word_perm(self, word: Sequence[int]) -> np.ndarray:
        out = np.arange(self.n)
        for g in reversed(word):
            out = self.sigmas[g][out]
        return out

    def perm_matrix(self, i: int) -> np.ndarray:
        return perm_matrix(self.sigmas[i])

    def matching_edges(self, i: int) -> np.ndarray:
        """Edges {u, sigma_i(u)} with u < sigma_i(u), ordered by u."""
        s = self.sigmas[i]
        u = np.nonzero(np.arange(self.n) < s)[0]
        return u

    def edge_count(self, i: int) -> int:
        return self.n // 2 if self.index_set.is_matching(i) else self.n

    def total_edges(self) -> int:
        return sum(self.edge_count(i) for i in self.index_set.undirected_colors())

    def to_json(self) -> dict:
        return {"n": self.n, "d": self.index_set.d, "e": self.index_set.e, "perms": self.sigmas.tolist()}

    @classmethod
    def from_json(cls, data) -> "Lift":
        try:
            iset = IndexSet(int(data["d"]), int(data["e"]))
            return cls(iset, int(data["n"]), np.array(data["perms"], dtype=np.int64))
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed lift JSON: {exc}") from exc

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Lift)
            and self.index_set == other.index_set
            and self.n == other.n
            and np.array_equal(self.sigmas, other.sigmas)
        )

    __hash__ = None


def perm_matrix(sigma: np.ndarray, signs: np.ndarray | None = None) -> np.ndarray:
    n = len(sigma)
    m = np.zeros((n, n))
    m[sigma, np.arange(n)] = 1.0 if signs is None else signs
    return m


def lift_from_perms(index_set: IndexSet, perms: Sequence[np.ndarray]) -> Lift:
    """Build a lift from sigma_1..sigma_{d+e}; inverses are filled in."""
    if len(perms) != index_set.d + index_set.e:
        raise DimensionError(f"expected {index_set.d + index_set.e} permutations")
    n = len(perms[0]) if perms else 1
    sig = np.zeros((index_set.size + 1, n), dtype=np.int64)
    sig[0] = np.arange(n)
    for k, p in enumerate(perms, start=1):
        p = np.asarray(p, dtype=np.int64)
        sig[k] = p
        if k > index_set.d:
            sig[index_set.star(k)] = inverse_perm(p)
    return Lift(index_set, n, sig)


def trivial_lift(index_set: IndexSet) -> Lift:
    if index_set.d > 0:
        raise ParityError("the 1-lift needs d = 0; use the polynomial's 1-lift evaluation instead")
    return Lift(index_set, 1, np.zeros((index_set.size + 1, 1), dtype=np.int64))


def random_lift(index_set: IndexSet, n: int, seed) -> Lift:
    """Uniform permutations; matchings are associated matchings of uniform permutations."""
    if n == 1 and index_set.d == 0:
        return trivial_lift(index_set)
    _check_size(index_set, n)
    rng = make_rng(seed)
    perms = []
    for i in index_set.undirected_colors():
        pi = rng.permutation(n)
        perms.append(associated_matching(pi) if index_set.is_matching(i) else pi)
    return lift_from_perms(index_set, perms)


@dataclass(frozen=True)
class Signing:
    """Edge signs per undirected color 1..d+e.

    For a matching color the vector has one entry per edge, edges ordered by
    their smaller endpoint.  For a permutation color the entry at u is the
    sign of the arc u -> sigma_i(u).
    """

    index_set: IndexSet
    n: int
    chi: tuple

    def __post_init__(self):
        iset = self.index_set
        if len(self.chi) != iset.d + iset.e:
            raise DimensionError(f"signing needs {iset.d + iset.e} color vectors")
        vecs = []
        for k, c in enumerate(self.chi, start=1):
            c = np.asarray(c, dtype=np.int64).copy()
            expected = self.n // 2 if iset.is_matching(k) else self.n
            if c.shape != (expected,):
                raise DimensionError(f"color {k} signing has length {c.shape}, expected {expected}")
            if not np.all(np.abs(c) == 1):
                raise ValidationError("signs must be +1 or -1")
            c.setflags(write=False)
            vecs.append(c)
        object.__setattr__(self, "chi", tuple(vecs))

    @classmethod
    def ones(cls, lift: Lift) -> "Signing":
        iset = lift.index_set
        return cls(iset, lift.n, tuple(np.ones(lift.edge_count(i), dtype=np.int64) for i in iset.undirected_colors()))

    @classmethod
    def from_bits(cls, lift: Lift, bits: np.ndarray) -> "Signing":
        bits = np.asarray(bits, dtype=np.int64)
        if len(bits) != lift.total_edges():
            raise DimensionError(f"need {lift.total_edges()} signs, got {len(bits)}")
        out, pos = [], 0
        for i in lift.index_set.undirected_colors():
            m = lift.edge_count(i)
            out.append(bits[pos : pos + m])
            pos += m
        return cls(lift.index_set, lift.n, tuple(out))

    @classmethod
    def random(cls, lift: Lift, seed) -> "Signing":
        rng = make_rng(seed)
        return cls.from_bits(lift, rng.choice(np.array([-1, 1]), size=lift.total_edges()))

    def flat(self) -> np.ndarray:
        return np.concatenate(self.chi) if self.chi else np.zeros(0, dtype=np.int64)

    def arc_signs(self, lift: Lift, i: int) -> np.ndarray:
        """Sign on the arc u -> sigma_i(u), for every u and every color 0..d+2e."""
        iset = self.index_set
        if lift.n != self.n or lift.index_set != iset:
            raise DimensionError("signing does not match the lift")
        if i == 0:
            return np.ones(self.n, dtype=np.int64)
        if iset.is_matching(i):
            s = lift.sigmas[i]
            low = np.minimum(np.arange(self.n), s)
            edge_pos = np.full(self.n, -1)
            edge_pos[lift.matching_edges(i)] = np.arange(self.n // 2)
            return self.chi[i - 1][edge_pos[low]]
        if i <= iset.d + iset.e:
            return self.chi[i - 1].copy()
        j = iset.star(i)
        return self.chi[j - 1][lift.sigmas[i]]

    def word_action(self, lift: Lift, word: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
        """Permutation and sign vector of the signed word; rightmost letter first."""
        pos = np.arange(self.n)
        sgn = np.ones(self.n, dtype=np.int64)
        for g in reversed(word):
            sgn = sgn * self.arc_signs(lift, g)[pos]
            pos = lift.sigmas[g][pos]
        return pos, sgn

    def signed_matrix(self, lift: Lift, i: int) -> np.ndarray:
        return perm_matrix(lift.sigmas[i], self.arc_signs(lift, i))

    def to_json(self) -> list:
        return [c.tolist() for c in self.chi]

    @classmethod
    def from_json(cls, lift: Lift, data) -> "Signing":
        return cls(lift.index_set, lift.n, tuple(np.array(c) for c in data))


def product_lift(factors: Sequence[np.ndarray], base: Lift) -> Lift:
    """The mn-lift rho_i(b*n + u) = tau_{i,u}(b)*n + sigma_i(u).

    ``factors[k]`` has shape (n, m) and holds tau_{i,u} for color i = k+1 in
    1..d+e.  A matching color needs tau_{i,sigma_i(u)} = tau_{i,u}^{-1};
    permutation inverses are derived.
    """
    iset, n = base.index_set, base.n
    if len(factors) != iset.d + iset.e:
        raise DimensionError(f"need factors for {iset.d + iset.e} colors")
    taus = [np.asarray(f, dtype=np.int64) for f in factors]
    m = taus[0].shape[1] if taus else 1
    rho = np.zeros((iset.size + 1, m * n), dtype=np.int64)
    rho[0] = np.arange(m * n)
    b = np.repeat(np.arange(m), n)
    u = np.tile(np.arange(n), m)
    for i in iset.undirected_colors():
        tau = taus[i - 1]
        if tau.shape != (n, m):
            raise DimensionError(f"factor for color {i} must have shape {(n, m)}")
        for row in tau:
            if not np.array_equal(np.sort(row), np.arange(m)):
                raise ValidationError(f"factor for color {i} is not a permutation")
        sig = base.sigmas[i]
        if iset.is_matching(i):
            for x in range(n):
                if not np.array_equal(tau[sig[x]][tau[x]], np.arange(m)):
                    raise ValidationError(f"matching factors for color {i} are not mutually inverse")
        rho[i] = tau[u, b] * n + sig[u]
        if not iset.is_matching(i):
            rho[iset.star(i)] = inverse_perm(rho[i])
    return Lift(iset, m * n, rho)


def signing_to_2lift(base: Lift, chi: Signing) -> Lift:
    """Realize a signed lift as a 2-lift: a negative arc swaps the two sheets."""
    iset, n = base.index_set, base.n
    if chi.n != n or chi.index_set != iset:
        raise DimensionError("signing does not match the base lift")
    factors = []
    for i in iset.undirected_colors():
        s = chi.arc_signs(base, i)
        tau = np.where(s[:, None] > 0, np.array([[0, 1]]), np.array([[1, 0]]))
        factors.append(tau)
    return product_lift(factors, base)


@dataclass(frozen=True)
class SeedConfig:
    seed: int | bytes
    t: int = 2
    delta: float = 0.5

    def __post_init__(self):
        if not 0 < self.delta <= 1:
            raise ValidationError("delta must lie in (0, 1]")
        if self.t < 1:
            raise ValidationError("t must be at least 1")

    def seed_int(self) -> int:
        if isinstance(self.seed, (bytes, bytearray)):
            return int.from_bytes(bytes(self.seed), "big")
        return int(self.seed)


def _gf2_mulmod(a: int, b: int, poly: int, m: int) -> int:
    out = 0
    while b:
        if b & 1:
            out ^= a
        b >>= 1
        a <<= 1
        if a >> m & 1:
            a ^= poly
    return out


def _gf2_polymod(a: int, b: int) -> int:
    db = b.bit_length()
    while a.bit_length() >= db:
        a ^= b << (a.bit_length() - db)
    return a


def _gf2_gcd(a: int, b: int) -> int:
    while b:
        a, b = b, _gf2_polymod(a, b)
    return a


def _gf2_powmod_x(k: int, poly: int, m: int) -> int:
    """x^(2^k) mod poly."""
    x = 2
    for _ in range(k):
        x = _gf2_mulmod(x, x, poly, m)
    return x


def _is_irreducible(poly: int, m: int) -> bool:
    # Rabin's test over GF(2).
    if _gf2_powmod_x(m, poly, m) != 2:
        return False
    primes = [p for p in range(2, m + 1) if m % p == 0 and all(p % q for q in range(2, p))]
    for p in primes:
        h = _gf2_powmod_x(m // p, poly, m) ^ 2
        if _gf2_gcd(poly, h) != 1:
            return False
    return True


_IRRED_CACHE: dict[int, int] = {}


def irreducible_poly(m: int) -> int:
    """Smallest irreducible polynomial of degree m over GF(2), bit-encoded."""
    if m not in _IRRED_CACHE:
        if m == 1:
            _IRRED_CACHE[m] = 0b10
        else:
            cand = (1 << m) | 1
            while not _is_irreducible(cand, m):
                cand += 2
            _IRRED_CACHE[m] = cand
    return _IRRED_CACHE[m]


def small_bias_field_degree(count: int, delta: float) -> int:
    return max(1, math.ceil(math.log2(count / delta)))


def small_bias_seed_space(count: int, delta: float) -> int:
    return 4 ** small_bias_field_degree(count, delta)


def small_bias_bits(count: int, config: SeedConfig) -> np.ndarray:
    """Powering construction: x_i = (-1)^<alpha^i, beta> over GF(2^m).

    Over all 4^m seeds, every nonempty parity of the output has bias at most
    count / 2^m <= delta; the bound holds for every subset size, so t only
    documents the caller's intent.
    """
    if count < 1:
        raise ValidationError("count must be at least 1")
    m = small_bias_field_degree(count, config.delta)
    poly = irreducible_poly(m)
    s = config.seed_int() % (4**m)
    alpha, beta = s >> m, s & ((1 << m) - 1)
    out = np.empty(count, dtype=np.int64)
    power = alpha
    for i in range(count):
        out[i] = -1 if bin(power & beta).count("1") & 1 else 1
        power = _gf2_mulmod(power, alpha, poly, m)
    return out


class SeededPermutation:
    """Keyed Feistel permutation of {0..n-1} with cycle walking.

    Both directions are computed pointwise, so single images are available
    without materializing the permutation.
    """

    ROUNDS = 4

    def __init__(self, n: int, key: bytes):
        self.n = n
        bits = max(2, (max(n - 1, 1)).bit_length())
        bits += bits % 2
        self.half = bits // 2
        self.mask = (1 << self.half) - 1
        self.key = key

    def _round(self, k: int, x: int) -> int:
        h = hashlib.blake2b(x.to_bytes(8, "big") + bytes([k]), key=self.key, digest_size=8)
        return int.from_bytes(h.digest(), "big") & self.mask

    def _enc(self, x: int) -> int:
        left, right = x >> self.half, x & self.mask
        for k in range(self.ROUNDS):
            left, right = right, left ^ self._round(k, right)
        return (left << self.half) | right

    def _dec(self, y: int) -> int:
        left, right = y >> self.half, y & self.mask
        for k in reversed(range(self.ROUNDS)):
            left, right = right ^ self._round(k, left), left
        return (left << self.half) | right

    def forward(self, j: int) -> int:
        x = self._enc(j)
        while x >= self.n:
            x = self._enc(x)
        return x

    def inverse(self, j: int) -> int:
        x = self._dec(j)
        while x >= self.n:
            x = self._dec(x)
        return x

    def array(self) -> np.ndarray:
        return np.array([self.forward(j) for j in range(self.n)], dtype=np.int64)


def seed_space_size(n: int, t: int) -> int:
    return 2 ** (math.ceil(t * math.log2(max(n, 2))) + 8)


class SeededLiftFamily:
    """Strongly explicit access to the seeded lift with a given seed."""

    def __init__(self, index_set: IndexSet, n: int, t: int, seed: int):
        _check_size(index_set, n)
        self.index_set = index_set
        self.n = n
        self.t = t
        self.seed = int(seed) % seed_space_size(n, t)
        base = self.seed.to_bytes(16, "big") + n.to_bytes(8, "big") + t.to_bytes(4, "big")
        self._perms = {
            i: SeededPermutation(n, hashlib.blake2b(base + i.to_bytes(4, "big"), digest_size=32).digest())
            for i in index_set.undirected_colors()
        }

    def apply(self, i: int, j: int) -> int:
        """sigma_i(j) for any color 0..d+2e."""
        iset = self.index_set
        if i == 0:
            return j
        if iset.is_matching(i):
            pi = self._perms[i]
            return pi.forward(pi.inverse(j) ^ 1)
        if i <= iset.d + iset.e:
            return self._perms[i].forward(j)
        return self._perms[iset.star(i)].inverse(j)

    def lift(self) -> Lift:
        perms = []
        for i in self.index_set.undirected_colors():
            pi = self._perms[i].array()
            perms.append(associated_matching(pi) if self.index_set.is_matching(i) else pi)
        return lift_from_perms(self.index_set, perms)


def seeded_lift_family(index_set: IndexSet, n: int, t: int, seed: int) -> Lift:
    return SeededLiftFamily(index_set, n, t, seed).lift()
