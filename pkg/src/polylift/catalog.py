"""Generating polynomials for classical infinite graphs.

Each builder returns a self-adjoint MatrixPolynomial whose infinite lift
contains copies of the target graph.  Spanning trees come from BFS at
vertex 0 with neighbors visited in sorted order, and tree edges are
oriented parent -> child.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import networkx as nx
import numpy as np

from .algebra import IndexSet, MatrixPolynomial, bouquet_of_graph, ket_bra
from .errors import DimensionError, UnsupportedInputError, ValidationError
from .lifting import Lift
from .spectra import SpectrumSet


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    polynomial: MatrixPolynomial
    known_spectrum: SpectrumSet | None = None
    note: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.polynomial.is_self_adjoint():
            raise ValidationError(f"catalog entry {self.name} is not self-adjoint")

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "note": self.note,
            "polynomial": self.polynomial.to_json(),
            "known_spectrum": None if self.known_spectrum is None else self.known_spectrum.to_json(),
            "meta": self.meta,
        }


def _as_graph(graph) -> nx.Graph:
    if isinstance(graph, nx.Graph):
        G = nx.Graph(graph)
    else:
        G = nx.Graph()
        G.add_edges_from(graph)
    if any(u == v for u, v in G.edges()):
        raise UnsupportedInputError("self-loops are not supported")
    mapping = {v: k for k, v in enumerate(sorted(G.nodes()))}
    return nx.relabel_nodes(G, mapping)


def bfs_tree(G: nx.Graph, root: int = 0) -> list[tuple[int, int]]:
    """Tree edges (parent, child) in discovery order."""
    seen, order, queue = {root}, [], [root]
    while queue:
        u = queue.pop(0)
        for v in sorted(G.neighbors(u)):
            if v not in seen:
                seen.add(v)
                order.append((u, v))
                queue.append(v)
    return order


def _tree_path_word(parent_edge: dict, depth: dict, u: int, v: int, color_of: dict, iset: IndexSet) -> tuple:
    """Word carrying u to v along the tree, rightmost letter applied first."""
    up, down = [], []
    a, b = u, v
    while depth[a] > depth[b]:
        up.append(iset.star(color_of[parent_edge[a]]))
        a = parent_edge[a][0]
    while depth[b] > depth[a]:
        down.append(color_of[parent_edge[b]])
        b = parent_edge[b][0]
    while a != b:
        up.append(iset.star(color_of[parent_edge[a]]))
        a = parent_edge[a][0]
        down.append(color_of[parent_edge[b]])
        b = parent_edge[b][0]
    steps = up + list(reversed(down))
    return tuple(reversed(steps))


def _add_pair(terms: list, r: int, u: int, v: int, word: tuple, iset: IndexSet, weight: complex = 1.0) -> None:
    """|v><u| X^word plus its adjoint."""
    terms.append((word, weight * ket_bra(v, u, r)))
    terms.append((tuple(iset.star(g) for g in reversed(word)), np.conj(weight) * ket_bra(u, v, r)))


def cycle_closure_polynomial(graph) -> MatrixPolynomial:
    """Spanning-tree bouquet plus one closing term per non-tree edge.

    The infinite lift is a disjoint union of copies of ``graph``.
    """
    G = _as_graph(graph)
    if G.number_of_nodes() == 0 or not nx.is_connected(G):
        raise ValidationError("graph must be connected and nonempty")
    r = G.number_of_nodes()
    tree = bfs_tree(G)
    if not tree:
        raise UnsupportedInputError("a single vertex has no edges to lift")
    iset = IndexSet(0, len(tree))
    color_of = {edge: k + 1 for k, edge in enumerate(tree)}
    parent_edge = {child: (par, child) for par, child in tree}
    depth = {0: 0}
    for par, child in tree:
        depth[child] = depth[par] + 1
    terms: list = []
    for (par, child), c in color_of.items():
        _add_pair(terms, r, par, child, (c,), iset)
    tree_set = {frozenset(e) for e in tree}
    for u, v in sorted(tuple(sorted(e)) for e in G.edges()):
        if frozenset((u, v)) in tree_set:
            continue
        _add_pair(terms, r, u, v, _tree_path_word(parent_edge, depth, u, v, color_of, iset), iset)
    return MatrixPolynomial.from_terms(iset, r, terms)


def is_vertex_transitive(G: nx.Graph) -> bool:
    nodes = sorted(G.nodes())
    if not nodes:
        return True
    base = nx.Graph(G)
    nx.set_node_attributes(base, {v: v == nodes[0] for v in nodes}, "root")
    for v in nodes[1:]:
        other = nx.Graph(G)
        nx.set_node_attributes(other, {w: w == v for w in nodes}, "root")
        if not nx.is_isomorphic(base, other, node_match=lambda a, b: a["root"] == b["root"]):
            return False
    return True


def free_product_polynomial(graphs: Sequence, trusted: bool = False) -> MatrixPolynomial:
    """Free product of finite vertex-transitive graphs.

    Vertices are tuples over the factors, flattened in mixed radix with the
    first factor most significant.  Every factor-f tree edge, copied across
    all other coordinates, gets its own generator; every non-tree edge of
    factor f is closed inside its fiber along the factor-f tree path.
    """
    Gs = [_as_graph(g) for g in graphs]
    if len(Gs) < 2:
        raise ValidationError("need at least two factors")
    for G in Gs:
        if G.number_of_nodes() < 2 or not nx.is_connected(G):
            raise ValidationError("factors must be connected with at least one edge")
        if not trusted and not is_vertex_transitive(G):
            raise UnsupportedInputError("free products need vertex-transitive factors")
    sizes = [G.number_of_nodes() for G in Gs]
    r = math.prod(sizes)
    strides = [math.prod(sizes[f + 1 :]) for f in range(len(sizes))]
    coords = list(np.ndindex(*sizes))

    def flat(c) -> int:
        return int(sum(x * s for x, s in zip(c, strides)))

    trees = [bfs_tree(G) for G in Gs]
    gen = {}
    for f, tree in enumerate(trees):
        for c in coords:
            if c[f] != 0:
                continue
            for par, child in tree:
                gen[(f, c, par, child)] = len(gen) + 1
    iset = IndexSet(0, len(gen))
    terms: list = []
    for f, (G, tree) in enumerate(zip(Gs, trees)):
        parent_edge = {child: (par, child) for par, child in tree}
        depth = {0: 0}
        for par, child in tree:
            depth[child] = depth[par] + 1
        tree_set = {frozenset(e) for e in tree}
        for c in coords:
            if c[f] != 0:
                continue
            color_of = {(par, child): gen[(f, c, par, child)] for par, child in tree}

            def at(x, c=c, f=f):
                return flat(c[:f] + (x,) + c[f + 1 :])

            for (par, child), g in color_of.items():
                _add_pair(terms, r, at(par), at(child), (g,), iset)
            for u, v in sorted(tuple(sorted(e)) for e in G.edges()):
                if frozenset((u, v)) in tree_set:
                    continue
                word = _tree_path_word(parent_edge, depth, u, v, color_of, iset)
                _add_pair(terms, r, at(u), at(v), word, iset)
    return MatrixPolynomial.from_terms(iset, r, terms)


def c4_star_c4() -> MatrixPolynomial:
    """Scalar polynomial Y + Z + Z^{-1} + Z^{-1} Y Z."""
    iset = IndexSet(1, 1)
    one = np.eye(1)
    return MatrixPolynomial.from_terms(iset, 1, [((1,), one), ((2,), one), ((3,), one), ((3, 1, 2), one)])


def additive_product_polynomial(atoms: Sequence, r: int | None = None) -> MatrixPolynomial:
    """Additive product of atoms on a common vertex set 0..r-1.

    Each atom A and each non-isolated vertex v of A get an indeterminate
    Z_{A,v}; an atom edge {u, v} contributes |v><u| Z_{A,v} Z_{A,u}^* plus
    its adjoint.
    """
    edge_lists = [[tuple(e) for e in (a.edges() if isinstance(a, nx.Graph) else a)] for a in atoms]
    if not edge_lists:
        raise ValidationError("need at least one atom")
    if r is None:
        r = 1 + max(max(max(e) for e in el) for el in edge_lists if el)
    total = nx.MultiGraph()
    total.add_nodes_from(range(r))
    gens: dict = {}
    for k, el in enumerate(edge_lists):
        A = nx.Graph()
        A.add_edges_from(el)
        if A.number_of_edges() == 0 or not nx.is_connected(A):
            raise ValidationError(f"atom {k} must be nonempty and connected once isolated vertices are dropped")
        for u, v in el:
            if u == v or not (0 <= u < r and 0 <= v < r):
                raise ValidationError(f"atom {k} has an invalid edge {(u, v)}")
        for v in sorted(A.nodes()):
            gens[(k, v)] = len(gens) + 1
        total.add_edges_from(el)
    if not nx.is_connected(total):
        raise ValidationError("the sum graph of the atoms must be connected")
    e = len(gens)
    iset = IndexSet(0, e)
    terms: list = []
    for k, el in enumerate(edge_lists):
        for u, v in el:
            word = (gens[(k, v)], iset.star(gens[(k, u)]))
            _add_pair(terms, r, u, v, word, iset)
    return MatrixPolynomial.from_terms(iset, r, terms)


def amalgamated_product_polynomial(graphs: Sequence, relator: tuple[int, Sequence]) -> MatrixPolynomial:
    """Free product with amalgamation over a colored relator graph.

    ``graphs`` holds (edges, root) with edges given as (u, v, color);
    ``relator`` is (k, [(k0, k1, color), ...]) on vertices 0..k-1, loops
    allowed.  Every non-root vertex v of graph i gets a self-adjoint Y_{i,v}.
    A root edge {o, v} adds M Y_v and an edge {u, v} off the root adds
    M Y_u Y_v together with its adjoint M Y_v Y_u, where M is the symmetric
    indicator of the relator edges of the same color.
    """
    k, rel_edges = relator
    colors_seen: set = set()
    Ys: dict = {}
    parsed = []
    for gi, (edges, root) in enumerate(graphs):
        cols = {c for _, _, c in edges}
        if cols & colors_seen:
            raise ValidationError("color sets of the factors must be disjoint")
        colors_seen |= cols
        verts = sorted({x for u, v, _ in edges for x in (u, v)} - {root})
        for v in verts:
            Ys[(gi, v)] = len(Ys) + 1
        parsed.append((edges, root))
    for k0, k1, c in rel_edges:
        if c not in colors_seen:
            raise ValidationError(f"relator color {c!r} does not occur in any factor")
        if not (0 <= k0 < k and 0 <= k1 < k):
            raise ValidationError("relator edge outside 0..k-1")
    iset = IndexSet(len(Ys), 0)

    def coupling(color) -> np.ndarray:
        M = np.zeros((k, k), dtype=complex)
        for k0, k1, c in rel_edges:
            if c == color:
                M[k1, k0] = 1
                M[k0, k1] = 1
        return M

    terms: list = []
    for gi, (edges, root) in enumerate(parsed):
        for u, v, c in edges:
            M = coupling(c)
            if not M.any():
                continue
            if u == root or v == root:
                w = v if u == root else u
                terms.append(((Ys[(gi, w)],), M))
            else:
                terms.append(((Ys[(gi, u)], Ys[(gi, v)]), M))
                terms.append(((Ys[(gi, v)], Ys[(gi, u)]), M.conj().T))
    return MatrixPolynomial.from_terms(iset, k, terms)


def sl2z_inputs() -> tuple[list, tuple]:
    """Factors and relator whose amalgamated product is the SL(2,Z) example."""
    g1 = ([("o", "v", "c1")], "o")
    g2 = ([("o", "w1", "c2"), ("o", "w2", "c3"), ("w1", "w2", "c2")], "o")
    relator = (2, [(0, 0, "c1"), (1, 1, "c1"), (0, 1, "c1"), (0, 0, "c2"), (1, 1, "c2"), (0, 1, "c3")])
    return [g1, g2], relator


def sl2z_polynomial() -> MatrixPolynomial:
    graphs, relator = sl2z_inputs()
    return amalgamated_product_polynomial(graphs, relator)


def modular_group_polynomial() -> MatrixPolynomial:
    """Triangles joined by a perfect matching: A_{K3} + sum_k |k><k| Y_k."""
    iset = IndexSet(3, 0)
    terms = [((), np.ones((3, 3)) - np.eye(3))]
    terms += [((k + 1,), ket_bra(k, k, 3)) for k in range(3)]
    return MatrixPolynomial.from_terms(iset, 3, terms)


def modular_group_spectrum() -> SpectrumSet:
    s = math.sqrt(2)
    lo_outer, lo_inner = (1 - math.sqrt(13 + 8 * s)) / 2, (1 - math.sqrt(13 - 8 * s)) / 2
    hi_inner, hi_outer = (1 + math.sqrt(13 - 8 * s)) / 2, (1 + math.sqrt(13 + 8 * s)) / 2
    return SpectrumSet.union([(lo_outer, lo_inner), (hi_inner, hi_outer)], [-2.0, 0.0])


def ladder_polynomial() -> MatrixPolynomial:
    iset = IndexSet(0, 1)
    X = np.array([[0, 1], [1, 0]])
    return MatrixPolynomial.from_terms(iset, 2, [((), X), ((1,), np.eye(2)), ((2,), np.eye(2))])


def hexagon_ladder_polynomial() -> MatrixPolynomial:
    """Ladder alternating hexagons and squares, vertices 1..6 mapped to 0..5."""
    iset = IndexSet(0, 6)
    a, b, c, d, e, f = range(1, 7)
    raw = [
        ((0, 4), (a,)),
        ((1, 0), (b,)),
        ((2, 1), (c,)),
        ((3, 2), (d,)),
        ((4, 3), (e,)),
        ((1, 5), (f,)),
        ((2, 4), (c, b, a)),
        ((5, 0), (a, e, d, c, f)),
    ]
    terms: list = []
    for (row, col), word in raw:
        _add_pair(terms, 6, col, row, word, iset)
    return MatrixPolynomial.from_terms(iset, 6, terms)


def tree_polynomial(d: int = 3, e: int = 0, weights: Sequence[float] | None = None) -> MatrixPolynomial:
    iset = IndexSet(d, e)
    if weights is None:
        weights = [1.0] * (d + e)
    if len(weights) != d + e:
        raise DimensionError("one weight per undirected color")
    terms: list = []
    for c, w in zip(iset.undirected_colors(), weights):
        terms.append(((c,), np.array([[w]])))
        if not iset.is_matching(c):
            terms.append(((iset.star(c),), np.array([[np.conj(w)]])))
    return MatrixPolynomial.from_terms(iset, 1, terms)


def biregular_spectrum(c: int, d: int) -> SpectrumSet:
    """Spectrum of the bouquet of K_{c,d}: the (c,d)-biregular tree bands, plus 0 when c != d."""
    lo, hi = abs(math.sqrt(d - 1) - math.sqrt(c - 1)), math.sqrt(d - 1) + math.sqrt(c - 1)
    points = [0.0] if c != d else []
    if lo == 0:
        return SpectrumSet.union([(-hi, hi)], points)
    return SpectrumSet.union([(-hi, -lo), (lo, hi)], points)


def replacement_product(base_lift: Lift, H) -> tuple[Lift, MatrixPolynomial]:
    """Clouds carry H; vertex (u, i) is joined to (sigma_i(u), i*)."""
    iset = base_lift.index_set
    D = iset.size
    AH = _graph_matrix(H, D)
    terms = [((), AH)]
    for i in iset.colors:
        terms.append(((i,), ket_bra(iset.star(i) - 1, i - 1, D)))
    return base_lift, MatrixPolynomial.from_terms(iset, D, terms)


def zigzag_product(base_lift: Lift, H) -> tuple[Lift, MatrixPolynomial]:
    """Step in H, cross color i to the i* slot, step in H again."""
    iset = base_lift.index_set
    D = iset.size
    AH = _graph_matrix(H, D)
    terms = [((i,), AH @ ket_bra(iset.star(i) - 1, i - 1, D) @ AH) for i in iset.colors]
    return base_lift, MatrixPolynomial.from_terms(iset, D, terms)


def _graph_matrix(H, D: int) -> np.ndarray:
    G = H if isinstance(H, nx.Graph) else nx.Graph(list(H))
    if G.number_of_nodes() != D:
        raise DimensionError(f"H must have {D} vertices, one per color")
    return nx.to_numpy_array(G, nodelist=sorted(G.nodes())).astype(complex)


def _k23_entry() -> CatalogEntry:
    p = bouquet_of_graph(nx.complete_bipartite_graph(2, 3)).to_polynomial()
    return CatalogEntry("k23", p, biregular_spectrum(2, 3), "bouquet of K_{2,3}: two copies of the (2,3)-biregular tree plus three")


def _tree3_entry() -> CatalogEntry:
    s = 2 * math.sqrt(2)
    return CatalogEntry("tree3", tree_polynomial(3), SpectrumSet.union([(-s, s)]), "3-regular tree")


def _signed4_entry() -> CatalogEntry:
    s = 2 * math.sqrt(3)
    p = tree_polynomial(4, 0, [1, 1, -1, -1])
    return CatalogEntry("signed_tree4", p, SpectrumSet.union([(-s, s)]), "4-regular tree with signed weights")


def _c3_star4_entry() -> CatalogEntry:
    tri = [(0, 1), (1, 2), (0, 2)]
    p = additive_product_polynomial([tri] * 4, 3)
    s = 2 * math.sqrt(6)
    return CatalogEntry("c3_star4", p, SpectrumSet.union([(1 - s, 1 + s)]), "free product of four triangles, additive form")


def _modular_entry() -> CatalogEntry:
    return CatalogEntry("modular", modular_group_polynomial(), modular_group_spectrum(), "Cayley graph of the modular group")


def _sl2z_entry() -> CatalogEntry:
    return CatalogEntry("sl2z", sl2z_polynomial(), None, "amalgamated product for SL(2,Z), adjoint completed")


def _c4c4_entry() -> CatalogEntry:
    return CatalogEntry("c4_star_c4", c4_star_c4(), None, "free product of two 4-cycles")


def _k2cube_entry() -> CatalogEntry:
    K2 = nx.path_graph(2)
    s = 2 * math.sqrt(2)
    p = free_product_polynomial([K2, K2, K2])
    return CatalogEntry("k2_star3", p, SpectrumSet.union([(-s, s)]), "free product of three edges, the 3-regular tree")


def _c4_chord_entry() -> CatalogEntry:
    G = nx.Graph([(0, 1), (0, 3), (0, 2), (1, 3), (2, 3)])
    vals = np.linalg.eigvalsh(nx.to_numpy_array(G, nodelist=range(4)))
    return CatalogEntry("c4_chord", cycle_closure_polynomial(G), SpectrumSet.union([], vals), "copies of a 4-cycle with a chord")


def _ladder_entry() -> CatalogEntry:
    return CatalogEntry("ladder", ladder_polynomial(), SpectrumSet.union([(-3.0, 3.0)]), "infinite ladder")


def _hex_ladder_entry() -> CatalogEntry:
    return CatalogEntry("hexagon_ladder", hexagon_ladder_polynomial(), None, "ladder of alternating hexagons and squares")


def _c3_star_c4_entry() -> CatalogEntry:
    p = free_product_polynomial([nx.cycle_graph(3), nx.cycle_graph(4)])
    return CatalogEntry("c3_star_c4", p, None, "free product of a triangle and a 4-cycle")


REGISTRY: dict[str, Callable[[], CatalogEntry]] = {
    "tree3": _tree3_entry,
    "signed_tree4": _signed4_entry,
    "k23": _k23_entry,
    "c3_star4": _c3_star4_entry,
    "modular": _modular_entry,
    "sl2z": _sl2z_entry,
    "c4_star_c4": _c4c4_entry,
    "c3_star_c4": _c3_star_c4_entry,
    "k2_star3": _k2cube_entry,
    "c4_chord": _c4_chord_entry,
    "ladder": _ladder_entry,
    "hexagon_ladder": _hex_ladder_entry,
}


def list_entries() -> list[str]:
    return sorted(REGISTRY)


def get_entry(name: str) -> CatalogEntry:
    try:
        return REGISTRY[name]()
    except KeyError:
        raise ValidationError(f"unknown catalog entry {name!r}; choose from {', '.join(list_entries())}") from None


def entries(names: Iterable[str] | None = None) -> list[CatalogEntry]:
    return [get_entry(n) for n in (names or list_entries())]
