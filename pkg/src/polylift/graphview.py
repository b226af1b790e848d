"""Extension graphs, local structure of lifts, folding automata and tree decompositions."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import networkx as nx
import numpy as np

from .algebra import IndexSet, MatrixPolynomial, Word, reduce_word, star_word
from .errors import ValidationError
from .lifting import Lift, Signing

Vertex = tuple[Word, int]


@dataclass
class ExtensionGraph:
    """Scalar-weighted graph on V_n x [r]; vertex (u, k) has index u*r + k."""

    n: int
    r: int
    edges: list = field(default_factory=list)

    @property
    def num_vertices(self) -> int:
        return self.n * self.r

    def adjacency(self) -> np.ndarray:
        A = np.zeros((self.num_vertices, self.num_vertices), dtype=complex)
        for src, dst, w, _ in self.edges:
            A[dst, src] += w
        return A

    def to_networkx(self) -> nx.MultiGraph:
        """Undirected multigraph with one edge per (src <= dst) weighted pair."""
        G = nx.MultiGraph()
        G.add_nodes_from(range(self.num_vertices))
        for src, dst, w, tag in self.edges:
            if src < dst or (src == dst):
                G.add_edge(src, dst, weight=w, word=tag)
        return G

    def to_tsv(self) -> str:
        lines = ["u\tv\tre\tim\tword"]
        for src, dst, w, tag in self.edges:
            lines.append(f"{src}\t{dst}\t{w.real!r}\t{w.imag!r}\t{','.join(map(str, tag))}")
        return "\n".join(lines) + "\n"

    def to_dot(self) -> str:
        out = ["digraph extension {"]
        for v in range(self.num_vertices):
            out.append(f'  {v} [label="{v // self.r}:{v % self.r}"];')
        for src, dst, w, tag in self.edges:
            label = f"{w.real:g}" if w.imag == 0 else f"{w.real:g}{w.imag:+g}i"
            out.append(f'  {src} -> {dst} [label="{label}"];')
        out.append("}")
        return "\n".join(out) + "\n"


def extend(lift: Lift, p: MatrixPolynomial, signing: Signing | None = None) -> ExtensionGraph:
    """Expand each matrix weight of the lifted polynomial into scalar edges."""
    if not p.is_self_adjoint():
        raise ValidationError("extension needs a self-adjoint polynomial")
    r = p.r
    G = ExtensionGraph(lift.n, r)
    for w, a in p:
        if signing is None:
            pos, sgn = lift.word_perm(w), np.ones(lift.n)
        else:
            pos, sgn = signing.word_action(lift, w)
        ks, ls = np.nonzero(a)
        for u in range(lift.n):
            for k, l in zip(ks, ls):
                G.edges.append((u * r + int(l), int(pos[u]) * r + int(k), complex(sgn[u] * a[k, l]), w))
    return G


def lift_graph(lift: Lift) -> nx.MultiGraph:
    """Structural graph G_L: one edge per matching pair or permutation arc.

    The identity color is left out; fixed points of permutation colors
    become self-loops.
    """
    iset = lift.index_set
    G = nx.MultiGraph()
    G.add_nodes_from(range(lift.n))
    for i in iset.undirected_colors():
        s = lift.sigmas[i]
        if iset.is_matching(i):
            for u in lift.matching_edges(i):
                G.add_edge(int(u), int(s[u]), color=i)
        else:
            for u in range(lift.n):
                G.add_edge(u, int(s[u]), color=i)
    return G


def _ball_excess(G: nx.MultiGraph, center, radius: int, dist: dict | None = None) -> int:
    if dist is None:
        dist = nx.single_source_shortest_path_length(G, center, cutoff=radius)
    nodes = [v for v, dv in dist.items() if dv <= radius]
    H = G.subgraph(nodes)
    return H.number_of_edges() - H.number_of_nodes()


def bicycle_free_radius(G: nx.Graph, cap: int) -> int:
    """Largest radius <= cap at which every induced ball has at most one cycle.

    Balls are connected, so "at most one cycle" means |E| <= |V|; parallel
    edges and self-loops count.  Returns -1 when even radius 0 fails.
    """
    if not isinstance(G, nx.MultiGraph):
        G = nx.MultiGraph(G)
    best = cap
    for v in G.nodes():
        dist = nx.single_source_shortest_path_length(G, v, cutoff=best)
        for rad in range(0, best + 1):
            if _ball_excess(G, v, rad, dist) > 0:
                best = rad - 1
                break
        if best < 0:
            return -1
    return best


def acyclic_ball_vertex(G: nx.Graph, h: int):
    """Some vertex whose radius-h induced ball is a tree, or None."""
    if not isinstance(G, nx.MultiGraph):
        G = nx.MultiGraph(G)
    for v in sorted(G.nodes()):
        if _ball_excess(G, v, h) == -1:
            return v
    return None


class FoldedAutomaton:
    """Deterministic folded graph over a free-product alphabet.

    Letters 1..D are the polynomial's generators; D+1..D+r are the cloud
    generators h_0..h_{r-1} and D+r+1..D+2r their inverses.  Every edge is
    stored in both directions, the reverse one labeled by the inverse letter.
    """

    def __init__(self, index_set: IndexSet, r: int):
        self.index_set = index_set
        self.r = r
        self.D = index_set.size
        self.start = 0
        self._edges: set[tuple[int, int, int]] = set()
        self._num = 1
        self.trans: dict[int, dict[int, int]] = {0: {}}

    def h(self, k: int) -> int:
        return self.D + 1 + k

    def h_inv(self, k: int) -> int:
        return self.D + 1 + self.r + k

    def inv(self, letter: int) -> int:
        if letter <= self.D:
            return self.index_set.star(letter)
        if letter <= self.D + self.r:
            return letter + self.r
        return letter - self.r

    def reduce(self, letters: Iterable[int]) -> Word:
        out: list[int] = []
        for g in letters:
            if out and out[-1] == self.inv(g):
                out.pop()
            else:
                out.append(g)
        return tuple(out)

    def add_loop(self, word: Sequence[int], fold: bool = True) -> None:
        """Attach a closed path at the start state spelling ``word``."""
        word = self.reduce(word)
        if not word:
            return
        cur = self.start
        for k, g in enumerate(word):
            if k == len(word) - 1:
                nxt = self.start
            else:
                nxt = self._num
                self._num += 1
            self._edges.add((cur, g, nxt))
            self._edges.add((nxt, self.inv(g), cur))
            cur = nxt
        if fold:
            self.fold()

    def fold(self) -> None:
        """Merge states until each (state, letter) has at most one target."""
        parent = list(range(self._num))

        def find(x: int) -> int:
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        def union(a: int, b: int) -> None:
            a, b = find(a), find(b)
            if a != b:
                if b == self.start or (a != self.start and b < a):
                    a, b = b, a
                parent[b] = a

        changed = True
        while changed:
            changed = False
            seen: dict[tuple[int, int], int] = {}
            for s, g, t in self._edges:
                key = (find(s), g)
                t = find(t)
                other = seen.get(key)
                if other is None:
                    seen[key] = t
                elif find(other) != t:
                    union(other, t)
                    changed = True
        self._edges = {(find(s), g, find(t)) for s, g, t in self._edges}
        self.trans = {find(self.start): {}}
        for s, g, t in self._edges:
            self.trans.setdefault(s, {})[g] = t
            self.trans.setdefault(t, {})

    @property
    def num_states(self) -> int:
        return len(self.trans)

    def is_deterministic(self) -> bool:
        counts: dict = {}
        for s, g, _ in self._edges:
            counts[(s, g)] = counts.get((s, g), 0) + 1
        return all(c == 1 for c in counts.values())

    def accepts(self, letters: Sequence[int]) -> bool:
        state = self.start
        for g in self.reduce(letters):
            state = self.trans.get(state, {}).get(g)
            if state is None:
                return False
        return state == self.start


def term_loops(p: MatrixPolynomial) -> list[tuple[int, Word, int]]:
    """(k, w, l) for every nonzero entry of every coefficient: |k><l| X^w."""
    out = []
    for w, a in p:
        for k, l in zip(*np.nonzero(np.abs(a) > 0)):
            out.append((int(k), w, int(l)))
    return out


def folding_automaton(p: MatrixPolynomial) -> FoldedAutomaton:
    """Folded automaton of the loops h_k g^w h_l^{-1}, one per entry |k><l| X^w."""
    if not p.is_self_adjoint():
        raise ValidationError("folding needs a self-adjoint polynomial")
    fa = FoldedAutomaton(p.index_set, p.r)
    for k, w, l in term_loops(p):
        fa.add_loop((fa.h(k),) + tuple(w) + (fa.h_inv(l),), fold=False)
    fa.fold()
    return fa


def _check_vertex(p: MatrixPolynomial, v) -> tuple[Word, int]:
    try:
        word, k = v
        word = tuple(int(g) for g in word)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"malformed vertex {v!r}") from exc
    if not 0 <= k < p.r:
        raise ValidationError(f"cloud index {k} outside 0..{p.r - 1}")
    reduced = reduce_word(word, p.index_set)
    if reduced != word:
        raise ValidationError(f"vertex word {word} is not reduced")
    return word, int(k)


def connected_in_infinite_lift(p: MatrixPolynomial, u, v, automaton: FoldedAutomaton | None = None) -> bool:
    """Whether (u, i) and (v, j) lie in one component of the infinite extension."""
    (uw, i), (vw, j) = _check_vertex(p, u), _check_vertex(p, v)
    fa = automaton or folding_automaton(p)
    query = (fa.h(j),) + vw + star_word(uw, p.index_set) + (fa.h_inv(i),)
    return fa.accepts(query)


def infinite_ball(p: MatrixPolynomial, depth: int, root: Vertex = ((), 0)) -> tuple[set, list]:
    """BFS truncation of the infinite extension around ``root``.

    Returns the vertices at graph distance <= depth and all extension
    edges among them.
    """
    iset = p.index_set
    loops = term_loops(p)
    by_src: dict[int, list] = {}
    for k, w, l in loops:
        by_src.setdefault(l, []).append((k, w))
    dist = {root: 0}
    queue = deque([root])
    while queue:
        x = queue.popleft()
        if dist[x] == depth:
            continue
        word, l = x
        for k, w in by_src.get(l, []):
            y = (reduce_word(tuple(w) + word, iset), k)
            if y not in dist:
                dist[y] = dist[x] + 1
                queue.append(y)
    verts = set(dist)
    edges = []
    for x in verts:
        word, l = x
        for k, w in by_src.get(l, []):
            y = (reduce_word(tuple(w) + word, iset), k)
            if y in verts:
                edges.append((x, y))
    return verts, edges


def bfs_connected(verts: set, edges: list, a, b) -> bool:
    G = nx.Graph()
    G.add_nodes_from(verts)
    G.add_edges_from(edges)
    return a in G and b in G and nx.has_path(G, a, b)


@dataclass
class TreeDecomposition:
    bags: dict
    tree_edges: list
    vertices: set
    edges: list

    @property
    def width(self) -> int:
        return max((len(b) for b in self.bags.values()), default=0) - 1


def _walk(word: Word, start: Word, iset: IndexSet) -> list[Word]:
    """Nodes visited by letting the letters of ``word`` act on ``start`` right to left."""
    out = [start]
    cur = start
    for g in reversed(word):
        cur = reduce_word((g,) + cur, iset)
        out.append(cur)
    return out


def tree_decomposition_ball(p: MatrixPolynomial, depth: int) -> TreeDecomposition:
    """Tree decomposition of the depth-ball of the infinite extension.

    The decomposition tree is the Cayley tree of the free product (x joined
    to g x).  The bag at node x holds the cloud of x and the cloud of every
    v for which x lies on the walk from v to g^w v for some term w with
    g^w v inside the ball.  Each
    bag therefore has at most (m + 1) r vertices, m the total term degree.
    """
    iset, r = p.index_set, p.r
    roots = [((), k) for k in range(r)]
    verts: set = set()
    edges: list = []
    for root in roots:
        vs, es = infinite_ball(p, depth, root)
        verts |= vs
        edges += es
    edges = list({(a, b) for a, b in edges})
    group_nodes = {w for w, _ in verts}
    words = [w for w in p.terms]
    bags: dict[Word, set] = {}
    for v in group_nodes:
        cloud = {(v, k) for k in range(r)} & verts
        bags.setdefault(v, set()).update(cloud)
        for w in words:
            if reduce_word(tuple(w) + v, iset) not in group_nodes:
                continue
            for x in _walk(w, v, iset):
                bags.setdefault(x, set()).update(cloud)
    nodes = set(bags)
    tree_edges = []
    for x in nodes:
        if x and x[1:] in nodes:
            tree_edges.append((x[1:], x))
    return TreeDecomposition({x: frozenset(b) for x, b in bags.items()}, tree_edges, verts, edges)


def check_tree_decomposition(td: TreeDecomposition) -> list[str]:
    """Independent axiom check; returns a list of violations (empty if valid)."""
    problems = []
    T = nx.Graph()
    T.add_nodes_from(td.bags)
    T.add_edges_from(td.tree_edges)
    if len(td.bags) and not nx.is_tree(T):
        problems.append("bag graph is not a tree")
    covered = set().union(*td.bags.values()) if td.bags else set()
    missing = td.vertices - covered
    if missing:
        problems.append(f"{len(missing)} vertices not covered")
    for a, b in td.edges:
        if not any(a in bag and b in bag for bag in td.bags.values()):
            problems.append(f"edge {a}-{b} not in any bag")
            break
    occ: dict = {}
    for x, bag in td.bags.items():
        for v in bag:
            occ.setdefault(v, []).append(x)
    for v, xs in occ.items():
        if len(xs) > 1 and not nx.is_connected(T.subgraph(xs)):
            problems.append(f"occurrences of {v} are disconnected")
            break
    return problems


def random_walk_connectivity(G) -> tuple[bool, float]:
    """Connectivity and spectral gap of D^{-1/2} |A| D^{-1/2}."""
    A = np.abs(G.adjacency() if isinstance(G, ExtensionGraph) else np.asarray(G))
    A = (A + A.T) / 2
    m = A.shape[0]
    deg = A.sum(axis=1)
    if m == 1:
        return True, 0.0
    if np.any(deg == 0):
        return False, 0.0
    dinv = 1 / np.sqrt(deg)
    S = dinv[:, None] * A * dinv[None, :]
    ev = np.linalg.eigvalsh(S)
    top = int(np.sum(np.abs(ev - 1) < 1e-9))
    return top == 1, float(1 - ev[-2])


def local_cover_check(lift: Lift, p: MatrixPolynomial, radius: int) -> bool:
    """Check that the colored ball of the infinite lift maps onto each finite ball.

    phi(x) = sigma^x(u) must commute with every generator and every term,
    and carry the weighted out-edges of x bijectively onto those of phi(x).
    """
    iset = lift.index_set
    words = [w for w, _ in p]
    ball = [()]
    frontier = [()]
    for _ in range(radius):
        nxt = []
        for x in frontier:
            for g in iset.colors:
                y = reduce_word((g,) + x, iset)
                if len(y) > len(x):
                    nxt.append(y)
        ball += nxt
        frontier = nxt
    phis = {x: lift.word_perm(x) for x in ball}
    for x in ball:
        for g in iset.colors:
            y = reduce_word((g,) + x, iset)
            if y in phis and not np.array_equal(phis[y], lift.sigmas[g][phis[x]]):
                return False
        out_inf = sorted((reduce_word(tuple(w) + x, iset), w) for w in words)
        for u in range(lift.n):
            img = sorted((int(lift.word_perm(w)[phis[x][u]]), w) for w in words)
            mapped = sorted((int(lift.word_perm(y)[u]), w) for y, w in out_inf)
            if img != mapped:
                return False
    return True
