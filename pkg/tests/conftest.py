import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from polylift.algebra import IndexSet, MatrixPolynomial

settings.register_profile("polylift", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("polylift")


def random_self_adjoint(iset: IndexSet, r: int, max_deg: int, rng: np.random.Generator, n_terms: int = 3) -> MatrixPolynomial:
    """Random p + p* with words of length <= max_deg."""
    terms = []
    for _ in range(n_terms):
        k = int(rng.integers(0, max_deg + 1))
        word = tuple(int(g) for g in rng.integers(1, iset.size + 1, size=k)) if iset.size else ()
        a = rng.normal(size=(r, r)) + 1j * rng.normal(size=(r, r))
        terms.append((word, a))
    p = MatrixPolynomial.from_terms(iset, r, terms)
    return p + p.star()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_bouquet(iset: IndexSet, r: int, rng: np.random.Generator, complex_: bool = True):
    """Random self-adjoint bouquet: Hermitian matching coefficients, adjoint pairs otherwise."""
    from polylift.algebra import MatrixBouquet

    coeffs = [None] * (iset.size + 1)
    for i in iset.undirected_colors():
        a = rng.normal(size=(r, r)) + (1j * rng.normal(size=(r, r)) if complex_ else 0)
        if iset.is_matching(i):
            a = (a + a.conj().T) / 2
        coeffs[i], coeffs[iset.star(i)] = a, a.conj().T
    return MatrixBouquet(iset, coeffs[1:])


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for k in sorted(results):
            terminalreporter.write_line(results[k])
