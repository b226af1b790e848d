"""Certified explicit lifts.

A finite net of bouquets stands in for every R-bounded bouquet.  A base
lift is accepted once every net bouquet passes a power-norm certificate
on its nontrivial nonbacktracking operator; each doubling step signs the
current lift with small-bias bits and certifies the signed operator,
which is exactly the new nontrivial part of the resulting 2-lift.
"""

from __future__ import annotations

import hashlib
import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace
from fractions import Fraction
from typing import Callable, Iterable, Sequence

import numpy as np

from .algebra import IndexSet, MatrixBouquet, MatrixPolynomial
from .errors import ConstructionFailed, SizeGuardError, ValidationError
from .graphview import acyclic_ball_vertex, bicycle_free_radius, lift_graph
from .lifting import Lift, SeedConfig, Signing, seeded_lift_family, signing_to_2lift, small_bias_bits, small_bias_seed_space
from .limitspec import estimate_spectrum_general, infinite_spectrum_scan, rho_B_infinity
from .spectra import (
    SpectrumSet,
    adjacency_matrix,
    hausdorff_distance,
    nonbacktracking_matrix,
    norm_power_certificate,
    restrict_nontrivial,
    spectrum,
)

TRACE_GUARD = 10**7
BRUTE_FORCE_EDGES = 20


@dataclass(frozen=True)
class NetParams:
    R: float = 1.0
    eps: float = 0.3
    lambda_power: int = 1
    grid_delta: float = 0.25
    max_size: int = 200_000

    def __post_init__(self):
        if self.R <= 0:
            raise ValidationError("R must be positive")
        if self.eps <= 0:
            raise ValidationError("eps must be positive")
        if self.lambda_power < 1:
            raise ValidationError("lambda_power must be at least 1")
        if self.grid_delta <= 0:
            raise ValidationError("grid_delta must be positive")
        frac = Fraction(self.grid_delta).limit_denominator(10**6)
        if abs(float(frac) - self.grid_delta) > 1e-12:
            raise ValidationError("grid_delta must be a simple rational")

    @property
    def fine(self) -> bool:
        """Whether delta < 1/(2R), the regime in which the covering argument keeps inverses bounded."""
        return self.grid_delta < 1 / (2 * self.R)


def _params_per_coefficient(index_set: IndexSet, color: int, r: int) -> int:
    return r * r if index_set.is_matching(color) else 2 * r * r


def _grid_step(index_set: IndexSet, color: int, r: int, delta: float) -> float:
    # Hermitian off-diagonal parameters appear twice in the Frobenius norm
    weight = 2 * r * r - r if index_set.is_matching(color) else 2 * r * r
    return delta / math.sqrt(weight)


def _assemble(values: np.ndarray, hermitian: bool, r: int) -> np.ndarray:
    """Coefficient matrix from its real parameter vector."""
    if not hermitian:
        return (values[: r * r] + 1j * values[r * r :]).reshape(r, r)
    g = np.zeros((r, r), dtype=complex)
    pos = 0
    for k in range(r):
        g[k, k] = values[pos]
        pos += 1
    for k in range(r):
        for l in range(k + 1, r):
            g[k, l] = values[pos] + 1j * values[pos + 1]
            g[l, k] = np.conj(g[k, l])
            pos += 2
    return g


def _color_grid(index_set: IndexSet, color: int, r: int, params: NetParams) -> list[np.ndarray]:
    m = _params_per_coefficient(index_set, color, r)
    kappa = _grid_step(index_set, color, r, params.grid_delta)
    steps = int(math.floor(params.R / kappa + 1e-9))
    axis = np.arange(-steps, steps + 1) * kappa
    if len(axis) ** m > params.max_size * 50:
        raise SizeGuardError(f"coefficient grid has {len(axis)}^{m} points; use a coarser grid_delta")
    out = []
    hermitian = index_set.is_matching(color)
    for vals in itertools.product(axis, repeat=m):
        g = _assemble(np.array(vals), hermitian, r)
        if np.linalg.norm(g) > params.R + 1e-12:
            continue
        sv = np.linalg.svd(g, compute_uv=False)
        if sv[-1] > 1e-12 and np.sqrt(np.sum(sv**-2.0)) > 2 * params.R + 1e-12:
            continue
        out.append(g)
    return out


def net_size(index_set: IndexSet, r: int, params: NetParams) -> int:
    return math.prod(len(_color_grid(index_set, c, r, params)) for c in index_set.undirected_colors())


def _bouquet_from_free(index_set: IndexSet, free: Sequence[np.ndarray]) -> MatrixBouquet:
    coeffs = [None] * index_set.size
    for c, g in zip(index_set.undirected_colors(), free):
        coeffs[c - 1] = g
        if not index_set.is_matching(c):
            coeffs[index_set.star(c) - 1] = g.conj().T
    return MatrixBouquet(index_set, coeffs, check=False)


def epsilon_net(index_set: IndexSet, r: int, params: NetParams) -> list[MatrixBouquet]:
    """Grid bouquets with entries in kappa*Z (real and imaginary parts), kappa = delta/sqrt(2r^2), or delta/sqrt(2r^2 - r) on Hermitian colors.

    Kept: ||g||_F <= R, and ||g^{-1}||_F <= 2R whenever g is invertible.
    Matching colors take Hermitian coefficients; a permutation color fixes
    its starred partner as the adjoint.
    """
    if index_set.size == 0:
        raise ValidationError("the net needs at least one color")
    grids = [_color_grid(index_set, c, r, params) for c in index_set.undirected_colors()]
    size = math.prod(len(g) for g in grids)
    if size > params.max_size:
        raise SizeGuardError(f"net would hold {size} bouquets (cap {params.max_size}); use a coarser grid_delta")
    return [_bouquet_from_free(index_set, combo) for combo in itertools.product(*grids)]


def epsilon_net_all_dims(index_set: IndexSet, r: int, params: NetParams) -> list[MatrixBouquet]:
    """Union of the nets in every dimension 1..r."""
    out = []
    for rr in range(1, r + 1):
        out.extend(epsilon_net(index_set, rr, params))
    return out


def nearest_net_point(K: MatrixBouquet, params: NetParams) -> MatrixBouquet:
    """Truncate every real parameter toward zero onto the grid of its coefficient."""
    iset, r = K.index_set, K.r
    free = []
    for c in iset.undirected_colors():
        kappa = _grid_step(iset, c, r, params.grid_delta)
        a = K.a(c)

        def trunc(x):
            return np.trunc(x / kappa + np.sign(x) * 1e-9) * kappa

        g = trunc(a.real) + 1j * trunc(a.imag)
        if iset.is_matching(c):
            g = np.triu(g) + np.triu(g, 1).conj().T
            g[np.diag_indices(r)] = g.diagonal().real
        free.append(g)
    return _bouquet_from_free(iset, free)


@dataclass(frozen=True)
class BouquetCheck:
    bouquet_id: int
    rho_inf: float
    bound: float
    norm_root: float
    passed: bool


@dataclass(frozen=True)
class LiftCertificate:
    """Checked bounds for one lift; ``passed`` is the conjunction of every part."""

    stage: str
    n: int
    seed: int | None
    power: int
    eps: float
    lambda_target: int
    bicycle_free_radius: int
    acyclic_ball_vertex: int | None
    structure_checked: bool
    checks: tuple
    stages: tuple = ()

    @property
    def structure_passed(self) -> bool:
        if not self.structure_checked:
            return True
        return self.acyclic_ball_vertex is not None and self.bicycle_free_radius >= self.lambda_target

    @property
    def passed(self) -> bool:
        return self.structure_passed and all(c.passed for c in self.checks) and all(s.passed for s in self.stages)

    def __bool__(self) -> bool:
        return self.passed

    def failing(self) -> list[int]:
        return [c.bouquet_id for c in self.checks if not c.passed]

    def to_json(self) -> dict:
        return {
            "stage": self.stage,
            "n": self.n,
            "seed": self.seed,
            "power": self.power,
            "eps": self.eps,
            "lambda_target": self.lambda_target,
            "bicycle_free_radius": self.bicycle_free_radius,
            "acyclic_ball": None
            if self.acyclic_ball_vertex is None
            else {"vertex": self.acyclic_ball_vertex, "radius": self.lambda_target},
            "structure_checked": self.structure_checked,
            "passed": self.passed,
            "checks": [asdict(c) for c in self.checks],
            "stages": [s.to_json() for s in self.stages],
        }


@dataclass(frozen=True)
class PipelineConfig:
    N: int = 64
    d: int = 3
    e: int = 0
    r: int = 1
    R: float = 1.0
    eps: float = 0.3
    grid_delta: float = 0.25
    n0: int | None = None
    power: int | None = None
    lam: int | None = None
    ell: int | None = None
    t: int = 2
    bias_delta: float = 0.5
    stage0_budget: int = 256
    stage_budget: int = 256
    seed_offset: int = 0
    check_structure: bool = True
    max_net: int = 200_000
    jobs: int = 1

    def __post_init__(self):
        if self.N < 2:
            raise ValidationError("N must be at least 2")
        if not 0 < self.eps:
            raise ValidationError("eps must be positive; eps = 0 is not achievable")
        if self.d < 0 or self.e < 0 or self.d + self.e == 0:
            raise ValidationError("need at least one color")
        if self.r < 1 or self.R <= 0:
            raise ValidationError("r and R must be positive")
        if self.lam is not None and self.lam < 1:
            raise ValidationError("lambda must be at least 1")
        if self.ell is not None and self.ell < self.lambda_target:
            raise ValidationError("ell must be at least lambda")
        if self.n0 is not None and (self.n0 < 2 or (self.d and self.n0 % 2)):
            raise ValidationError("n0 must be at least 2 and even when d > 0")

    @property
    def index_set(self) -> IndexSet:
        return IndexSet(self.d, self.e)

    @property
    def base_size(self) -> int:
        if self.n0 is not None:
            return self.n0
        n0 = 2 ** math.ceil(2 * math.sqrt(math.log2(self.N)))
        n0 = min(n0, self.N)
        if self.d and n0 % 2:
            n0 += 1
        return max(n0, 2)

    @property
    def doublings(self) -> int:
        return max(0, math.ceil(math.log2(self.N / self.base_size)))

    @property
    def output_size(self) -> int:
        return self.base_size * 2**self.doublings

    @property
    def certificate_power(self) -> int:
        if self.power is not None:
            return self.power
        return max(1, math.ceil(32 * math.log(self.output_size)))

    @property
    def lambda_target(self) -> int:
        if self.lam is not None:
            return self.lam
        return max(1, math.floor(math.log2(self.base_size) / 2))

    @property
    def trace_length(self) -> int:
        if self.ell is not None:
            return self.ell
        return max(self.lambda_target, math.ceil(2 * math.log(self.output_size)))

    @property
    def net_params(self) -> NetParams:
        return NetParams(self.R, self.eps, self.certificate_power, self.grid_delta, self.max_net)

    def to_json(self) -> dict:
        out = asdict(self)
        out.update(
            n0_effective=self.base_size,
            doublings=self.doublings,
            output_size=self.output_size,
            power_effective=self.certificate_power,
            lambda_effective=self.lambda_target,
            ell_effective=self.trace_length,
        )
        return out


def _bouquet_checks(
    lift: Lift,
    net: Sequence[MatrixBouquet],
    power: int,
    eps: float,
    signing: Signing | None,
    perp: bool,
    stop_on_fail: bool = False,
) -> tuple:
    out = []
    for idx, K in enumerate(net):
        B = nonbacktracking_matrix(lift, K, signing)
        if perp:
            B = restrict_nontrivial(B, lift.n, K.index_set.size * K.r)
        rho = rho_B_infinity(K)
        bound = rho + eps / 3
        cert = norm_power_certificate(B, power, bound**power)
        out.append(BouquetCheck(idx, float(rho), float(bound), float(cert.norm_root), bool(cert.passed)))
        if stop_on_fail and not cert.passed:
            break
    return tuple(out)


def _structure(lift: Lift, lam: int, check: bool) -> tuple[int, int | None]:
    if not check:
        return -1, None
    G = lift_graph(lift)
    return bicycle_free_radius(G, lam), acyclic_ball_vertex(G, lam)


def certify_base_lift(
    lift: Lift, net: Sequence[MatrixBouquet], config: PipelineConfig, seed: int | None = None, stop_early: bool = False
) -> LiftCertificate:
    """Structural checks plus ||B_{n,perp}(K)^P|| <= (rho(B_inf(K)) + eps/3)^P for every net bouquet.

    Failures are recorded in the certificate, never raised.  With
    ``stop_early`` the norm checks are skipped once the structure fails.
    """
    if not net:
        raise ValidationError("net must be nonempty")
    lam = config.lambda_target
    radius, vertex = _structure(lift, lam, config.check_structure)
    checks: tuple = ()
    structure_ok = not config.check_structure or (vertex is not None and radius >= lam)
    if structure_ok or not stop_early:
        checks = _bouquet_checks(lift, net, config.certificate_power, config.eps, None, True, stop_early)
    return LiftCertificate(
        "base", lift.n, seed, config.certificate_power, config.eps, lam, radius, vertex, config.check_structure, checks
    )


def signing_certificate(
    lift: Lift,
    chi: Signing,
    net: Sequence[MatrixBouquet],
    config: PipelineConfig,
    seed: int | None = None,
    stop_early: bool = False,
) -> LiftCertificate:
    checks = _bouquet_checks(lift, net, config.certificate_power, config.eps, chi, False, stop_early)
    return LiftCertificate(
        "signing", lift.n, seed, config.certificate_power, config.eps, config.lambda_target, -1, None, False, checks
    )


def certify_signing(lift: Lift, chi: Signing, net: Sequence[MatrixBouquet], config: PipelineConfig | None = None) -> bool:
    """True iff ||B_n(chi L, K)^P|| <= (rho(B_inf(K)) + eps/3)^P for every K in the net."""
    config = config or PipelineConfig(N=lift.n, d=lift.index_set.d, e=lift.index_set.e)
    return signing_certificate(lift, chi, net, config).passed


def signing_seed(stage: int, k: int, space: int, offset: int = 0) -> int:
    h = hashlib.blake2b(f"sign:{offset}:{stage}:{k}".encode(), digest_size=16).digest()
    return int.from_bytes(h, "big") % space


def _try_base(args):
    iset, n0, t, seed, net, config = args
    lift = seeded_lift_family(iset, n0, t, seed)
    return lift, certify_base_lift(lift, net, config, seed=seed, stop_early=True)


def _try_signing(args):
    lift, seed, net, config = args
    bits = small_bias_bits(lift.total_edges(), SeedConfig(seed, config.t, config.bias_delta))
    chi = Signing.from_bits(lift, bits)
    return chi, signing_certificate(lift, chi, net, config, seed=seed, stop_early=True)


def _first_passing(fn: Callable, tasks: Iterable, jobs: int):
    """First passing result in task order; parallel batches keep the choice deterministic."""
    tried = 0
    if jobs <= 1:
        for task in tasks:
            tried += 1
            res = fn(task)
            if res[1].passed:
                return res, tried
        return None, tried
    tasks = list(tasks)
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        for start in range(0, len(tasks), jobs):
            batch = tasks[start : start + jobs]
            for res in pool.map(fn, batch):
                tried += 1
                if res[1].passed:
                    return res, tried
    return None, tried


def combine_certificates(stages: Sequence[LiftCertificate], final_n: int) -> LiftCertificate:
    """B_{2n,perp} of a signed 2-lift splits as B_{n,perp} plus B_n(chi), so norms chain by max."""
    base = stages[0]
    checks = []
    for k, c in enumerate(base.checks):
        root = max(s.checks[k].norm_root for s in stages)
        checks.append(BouquetCheck(c.bouquet_id, c.rho_inf, c.bound, root, all(s.checks[k].passed for s in stages)))
    return LiftCertificate(
        "final",
        final_n,
        base.seed,
        base.power,
        base.eps,
        base.lambda_target,
        base.bicycle_free_radius,
        base.acyclic_ball_vertex,
        base.structure_checked,
        tuple(checks),
        tuple(stages),
    )


def explicit_good_lift(
    index_set: IndexSet | None, config: PipelineConfig, net: Sequence[MatrixBouquet] | None = None
) -> tuple[Lift, LiftCertificate]:
    """Certify-and-double construction of an n0 * 2^t lift with n0 * 2^t >= N.

    Deterministic in ``config``; raises ConstructionFailed with per-stage
    diagnostics when a seed budget runs out.
    """
    iset = index_set or config.index_set
    if iset != config.index_set:
        raise ValidationError("index set disagrees with the config")
    if net is None:
        net = epsilon_net_all_dims(iset, config.r, config.net_params)
    net = list(net)
    n0 = config.base_size
    diagnostics: dict = {"config": config.to_json(), "stages": []}

    tasks = ((iset, n0, config.t, config.seed_offset + k, net, config) for k in range(config.stage0_budget))
    found, tried = _first_passing(_try_base, tasks, config.jobs)
    diagnostics["stages"].append({"stage": 0, "n": n0, "tried": tried, "passed": found is not None})
    if found is None:
        raise ConstructionFailed(f"no certified base lift of size {n0} in {tried} seeds", diagnostics)
    lift, cert = found
    stages = [cert]
    for s in range(1, config.doublings + 1):
        space = small_bias_seed_space(lift.total_edges(), config.bias_delta)
        tasks = ((lift, signing_seed(s, k, space, config.seed_offset), net, config) for k in range(config.stage_budget))
        found, tried = _first_passing(_try_signing, tasks, config.jobs)
        diagnostics["stages"].append({"stage": s, "n": lift.n, "tried": tried, "passed": found is not None})
        if found is None:
            raise ConstructionFailed(f"no certified signing at stage {s} (n={lift.n}) in {tried} seeds", diagnostics)
        chi, scert = found
        stages.append(scert)
        lift = signing_to_2lift(lift, chi)
    return lift, combine_certificates(stages, lift.n)


def hat_bound(eps: float, mu_max: float, index_set: IndexSet) -> float:
    """Upper bound eps^{-3/2}(|mu| + d + 2e + 1) on hat coefficients of unit-norm bouquets."""
    return eps ** -1.5 * (mu_max + index_set.size + 1)


def nontrivial_adjacency_spectrum(lift: Lift, p: MatrixPolynomial, signing: Signing | None = None) -> np.ndarray:
    """Eigenvalues of A_{n,perp}: the spectrum with one copy of spec(p(1,...,1)) removed."""
    A = adjacency_matrix(lift, p, signing)
    return spectrum(restrict_nontrivial(A, lift.n, p.r)).values


def limit_set(p: MatrixPolynomial, N_est: int = 600, seeds: Sequence[int] = (0,), step: float = 0.05) -> SpectrumSet:
    """Limit spectrum: resolvent scan for bouquets, joined with isolated points from a lift estimate."""
    est = estimate_spectrum_general(p, N_est, seeds)
    if not p.is_linear() or () in p.terms:
        return est
    K = MatrixBouquet.from_polynomial(p)
    scan = infinite_spectrum_scan(K, step=step)
    return SpectrumSet.union(scan.intervals, list(scan.points) + list(est.points), method="resolvent+lift")


def explicit_polynomial_lift(
    p_bounds: tuple[int, int, float],
    eps: float,
    N: int,
    config: PipelineConfig | None = None,
    test_polynomials: Sequence[MatrixPolynomial] = (),
    reference: Sequence[SpectrumSet | None] | None = None,
    net: Sequence[MatrixBouquet] | None = None,
) -> tuple[Lift, dict]:
    """Run the certified pipeline and report Hausdorff distances for test polynomials.

    ``p_bounds`` is (r, k, R): coefficient dimension, degree and norm
    bound of the polynomials to be served.  The hat-bouquet norm bound is
    reported; the net actually certified uses the config's R.
    """
    r, k, R = p_bounds
    if r < 1 or k < 0 or R <= 0:
        raise ValidationError("p_bounds must be positive")
    config = replace(config or PipelineConfig(), N=N, eps=eps)
    lift, cert = explicit_good_lift(config.index_set, config, net)
    entries = []
    refs = list(reference) if reference is not None else [None] * len(test_polynomials)
    for p, ref in zip(test_polynomials, refs):
        vals = nontrivial_adjacency_spectrum(lift, p)
        target = ref if ref is not None else limit_set(p)
        dist = hausdorff_distance(SpectrumSet.finite(vals), target)
        entries.append({"polynomial": p.to_json(), "hausdorff": dist, "limit": target.to_json(), "within_eps": dist <= eps})
    report = {
        "n": lift.n,
        "certificate": cert.to_json(),
        "bounds": {"r": r, "k": k, "R": R, "hat_R": hat_bound(eps, k * R * (config.index_set.size + 1), config.index_set)},
        "tests": entries,
    }
    return lift, report


def _arc_edge_ids(lift: Lift) -> np.ndarray:
    """Undirected edge id of the arc u -> sigma_i(u), shape (D+1, n)."""
    iset, n = lift.index_set, lift.n
    ids = np.full((iset.size + 1, n), -1, dtype=np.int64)
    offset = 0
    for c in iset.undirected_colors():
        if iset.is_matching(c):
            edge_pos = np.full(n, -1)
            edge_pos[lift.matching_edges(c)] = np.arange(n // 2)
            low = np.minimum(np.arange(n), lift.sigmas[c])
            ids[c] = offset + edge_pos[low]
            offset += n // 2
        else:
            ids[c] = offset + np.arange(n)
            ids[iset.star(c)] = offset + lift.sigmas[iset.star(c)]
            offset += n
    return ids


def expected_signed_trace(lift: Lift, K: MatrixBouquet, ell: int) -> float:
    """E_chi tr(B^ell (B^ell)^dagger) over uniform signings, by walk enumeration.

    Walks from a fixed start arc to a fixed end arc contribute with sign
    prod chi_e over edges used an odd number of times; only walks with the
    same odd-edge set correlate, so each group contributes ||sum W||_F^2.
    """
    iset, n, r = lift.index_set, lift.n, K.r
    D = iset.size
    if ell < 0:
        raise ValidationError("ell must be non-negative")
    if n * D ** (2 * ell) > TRACE_GUARD:
        raise SizeGuardError("walk enumeration exceeds the size guard")
    if ell == 0:
        return float(n * D * r)
    ids = _arc_edge_ids(lift)
    A = [None] + [K.a(i) for i in iset.colors]
    total = 0.0
    for u in range(n):
        for i0 in iset.colors:
            groups: dict = {}
            stack = [(i0, int(lift.sigmas[i0][u]), 1 << int(ids[i0][u]), np.eye(r, dtype=complex), 0)]
            while stack:
                i, v, mask, W, depth = stack.pop()
                for j in iset.colors:
                    if j == iset.star(i):
                        continue
                    W2 = A[j] @ W
                    if depth + 1 == ell:
                        key = (v, j, mask)
                        groups[key] = groups.get(key, 0) + W2
                    else:
                        nxt = int(lift.sigmas[j][v])
                        stack.append((j, nxt, mask ^ (1 << int(ids[j][v])), W2, depth + 1))
            total += sum(float(np.sum(np.abs(M) ** 2)) for M in groups.values())
    return total


def signed_trace_bruteforce(lift: Lift, K: MatrixBouquet, ell: int) -> float:
    """Average of tr(B^ell (B^ell)^dagger) over all 2^m signings."""
    m = lift.total_edges()
    if m > BRUTE_FORCE_EDGES:
        raise SizeGuardError(f"{m} edges is too many for exhaustive signing")
    acc = 0.0
    for bits in itertools.product((1, -1), repeat=m):
        chi = Signing.from_bits(lift, np.array(bits))
        B = nonbacktracking_matrix(lift, K, chi)
        P = np.linalg.matrix_power(B, ell)
        acc += float(np.real(np.sum(np.abs(P) ** 2)))
    return acc / 2**m
