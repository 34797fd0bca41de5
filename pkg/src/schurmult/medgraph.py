"""Finite graphs for multiplier experiments.

Tree balls, graph products, the ball of the six-generator free-product group
with its coset tree, and median graphs with their cube combinatorics: cube and
hyperplane enumeration, base-ray sets, polytope slices, and the signed
indicator vectors built from them.

Everything is finite and immutable after build.  Infinite rays from the
underlying constructions become finite base rays; any quantity that depends on
"far enough along the ray" demands stabilization over the deepest samples and
raises RayTooShortError instead of guessing.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Optional, Sequence, Tuple

import numpy as np

from .errors import (
    NotBipartiteError,
    NotMedianError,
    RadiusMismatchError,
    RayTooShortError,
    SizeLimitError,
    StructureViolationError,
)
from .symbols import binomial

__all__ = [
    "FiniteGraph",
    "TreeBall",
    "MedianComplex",
    "Polytope",
    "PolytopeReport",
    "MizutaVectors",
    "MeetData",
    "SerreEmbedding",
    "SerreShift",
    "graph_from_edges",
    "tree_ball",
    "product_graph",
    "attach_ray",
    "parity_witness",
    "base_geodesic",
    "meet_data",
    "cayley_ball",
    "word_distance",
    "coset_tree",
    "serre_embedding",
    "serre_shift",
    "median_complex",
    "median",
    "hyperplanes",
    "stable_median",
    "stable_median_table",
    "ray_set",
    "polytopes",
    "polytope_budget",
    "mizuta_vectors",
    "pairing",
]


# ---------------------------------------------------------------------------
# plain graphs


@dataclass(frozen=True, eq=False)
class FiniteGraph:
    """An undirected connected graph with cached all-pairs hop distances."""

    labels: Tuple[str, ...]
    neighbors: Tuple[Tuple[int, ...], ...]
    distances: np.ndarray = field(repr=False)
    _index: Dict[str, int] = field(default=None, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "_index", {s: i for i, s in enumerate(self.labels)})

    @property
    def size(self) -> int:
        return len(self.labels)

    @property
    def edge_count(self) -> int:
        return sum(len(ns) for ns in self.neighbors) // 2

    def index(self, label: str) -> int:
        try:
            return self._index[label]
        except KeyError:
            raise ValueError(f"no vertex labelled {label!r}") from None

    def distance(self, x: int, y: int) -> int:
        return int(self.distances[x, y])

    def edges(self) -> Tuple[Tuple[int, int], ...]:
        out = []
        for u, ns in enumerate(self.neighbors):
            out.extend((u, v) for v in ns if u < v)
        return tuple(out)


def _bfs_row(neighbors: Sequence[Sequence[int]], source: int) -> np.ndarray:
    dist = np.full(len(neighbors), -1, dtype=np.int32)
    dist[source] = 0
    queue = deque([source])
    while queue:
        u = queue.popleft()
        du = dist[u] + 1
        for v in neighbors[u]:
            if dist[v] < 0:
                dist[v] = du
                queue.append(v)
    return dist


def graph_from_edges(labels, edges, distances=None) -> FiniteGraph:
    """Build a FiniteGraph from an edge list.

    Distances come from breadth-first search unless a precomputed matrix is
    supplied (products know theirs in closed form); supplied matrices are
    spot-verified against BFS from a spread of sources.
    """
    labels = tuple(str(s) for s in labels)
    n = len(labels)
    if len(set(labels)) != n:
        raise ValueError("vertex labels must be distinct")
    nbr = [set() for _ in range(n)]
    for u, v in edges:
        if u == v:
            raise ValueError(f"self-loop at vertex {u}")
        nbr[u].add(v)
        nbr[v].add(u)
    neighbors = tuple(tuple(sorted(s)) for s in nbr)

    if distances is None:
        dist = np.vstack([_bfs_row(neighbors, s) for s in range(n)])
    else:
        dist = np.asarray(distances, dtype=np.int32)
        if dist.shape != (n, n):
            raise ValueError("distance matrix shape mismatch")
        step = max(1, n // 8)
        for s in range(0, n, step):
            if not np.array_equal(_bfs_row(neighbors, s), dist[s]):
                raise StructureViolationError(
                    f"supplied distances disagree with BFS from vertex {s}"
                )
    if (dist < 0).any():
        raise ValueError("graph is not connected")
    if not np.array_equal(dist, dist.T):
        raise StructureViolationError("distance matrix is not symmetric")
    # sampled min-plus triangle check; BFS rows satisfy it by construction
    for k in range(0, n, max(1, n // 4)):
        if (dist[:, [k]] + dist[[k], :] < dist).any():
            raise StructureViolationError(f"triangle inequality fails through {k}")
    return FiniteGraph(labels, neighbors, dist)


# ---------------------------------------------------------------------------
# tree balls and products


@dataclass(frozen=True, eq=False)
class TreeBall:
    """Radius-R ball of the homogeneous tree with branching q (degree q+1).

    `base_ray` is the designated root-to-boundary geodesic standing in for the
    infinite ray of the ambient tree.
    """

    graph: FiniteGraph
    branching: int
    radius: int
    root: int
    base_ray: Tuple[int, ...]


def tree_ball(branching: int, radius: int, max_vertices: int = 200_000) -> TreeBall:
    """Ball of the (branching+1)-homogeneous tree, deterministic labels."""
    q, R = branching, radius
    if q < 2:
        raise ValueError(f"branching must be >= 2, got {q}")
    if R < 1:
        raise ValueError(f"radius must be >= 1, got {R}")
    count = 1 + (q + 1) * (q**R - 1) // (q - 1)
    if count > max_vertices:
        raise SizeLimitError(f"tree ball would have {count} > {max_vertices} vertices")

    labels = ["o"]
    parents = [-1]
    frontier = [0]
    for depth in range(R):
        nxt = []
        for u in frontier:
            width = q + 1 if depth == 0 else q
            for c in range(width):
                labels.append(f"{labels[u]}.{c}" if depth else str(c))
                parents.append(u)
                nxt.append(len(labels) - 1)
        frontier = nxt
    edges = [(parents[v], v) for v in range(1, len(labels))]
    graph = graph_from_edges(labels, edges)

    if graph.size != count or graph.edge_count != count - 1:
        raise StructureViolationError("tree ball size/acyclicity check failed")
    depth_row = graph.distances[0]
    for v in range(graph.size):
        deg = len(graph.neighbors[v])
        if depth_row[v] < R and deg != q + 1:
            raise StructureViolationError(f"interior vertex {v} has degree {deg}")
    ray = [graph.index("o")] + [graph.index("0" + ".0" * (t - 1)) for t in range(1, R + 1)]
    for i, j in itertools.combinations(range(R + 1), 2):
        if graph.distance(ray[i], ray[j]) != j - i:
            raise StructureViolationError("base ray is not a geodesic")
    return TreeBall(graph, q, R, 0, tuple(ray))


def product_graph(factors: Sequence[FiniteGraph], max_vertices: int = 200_000) -> FiniteGraph:
    """Direct product with one-coordinate adjacency; distances are additive."""
    if not factors:
        raise ValueError("product needs at least one factor")
    sizes = [g.size for g in factors]
    total = 1
    for s in sizes:
        total *= s
        if total > max_vertices:
            raise SizeLimitError(f"product exceeds {max_vertices} vertices")

    tuples = list(itertools.product(*[range(s) for s in sizes]))
    flat = {t: i for i, t in enumerate(tuples)}
    labels = ["|".join(g.labels[c] for g, c in zip(factors, t)) for t in tuples]
    edges = []
    for t, i in flat.items():
        for axis, g in enumerate(factors):
            for v in g.neighbors[t[axis]]:
                if v > t[axis]:
                    edges.append((i, flat[t[:axis] + (v,) + t[axis + 1 :]]))

    dist = factors[0].distances
    for g in factors[1:]:
        m = g.size
        k = dist.shape[0]
        dist = (dist[:, None, :, None] + g.distances[None, :, None, :]).reshape(k * m, k * m)
    return graph_from_edges(labels, edges, distances=dist)


def attach_ray(graph: FiniteGraph, at: int, length: int, prefix: str = "r"):
    """Glue a fresh path of `length` vertices at a vertex.

    Returns the extended graph and the ray (at, new_1, ..., new_length) as
    vertex indices.  Gluing a ray preserves the median property and the
    dimension, so this is the standard way to give a complex a long base ray.
    """
    if length < 1:
        raise ValueError("ray length must be >= 1")
    n = graph.size
    new_labels = [f"{prefix}{t}" for t in range(1, length + 1)]
    if set(new_labels) & set(graph.labels):
        raise ValueError(f"ray labels {prefix}* collide with existing vertices")
    labels = graph.labels + tuple(new_labels)
    edges = list(graph.edges())
    edges.append((at, n))
    edges.extend((n + t - 1, n + t) for t in range(1, length))

    dist = np.full((n + length, n + length), -1, dtype=np.int32)
    dist[:n, :n] = graph.distances
    for t in range(1, length + 1):
        dist[n + t - 1, :n] = graph.distances[at] + t
        dist[:n, n + t - 1] = dist[n + t - 1, :n]
        for s in range(1, length + 1):
            dist[n + t - 1, n + s - 1] = abs(t - s)
    out = graph_from_edges(labels, edges, distances=dist)
    return out, (at,) + tuple(range(n, n + length))


def parity_witness(graph: FiniteGraph, x0: int = 0) -> Tuple[int, ...]:
    """Signs (-1)^d(x, x0), checked to split every edge and every pair."""
    row = graph.distances[x0]
    signs = np.where(row % 2 == 0, 1, -1)
    for u, ns in enumerate(graph.neighbors):
        for v in ns:
            if signs[u] == signs[v]:
                raise NotBipartiteError(
                    f"edge ({u},{v}) joins vertices of equal parity; odd cycle present"
                )
    if not np.array_equal(np.outer(signs, signs), np.where(graph.distances % 2 == 0, 1, -1)):
        raise NotBipartiteError("parity product identity fails on some pair")
    return tuple(int(s) for s in signs)


# ---------------------------------------------------------------------------
# base geodesics on tree balls


@dataclass(frozen=True)
class MeetData:
    """First indices at which two base geodesics meet; their sum is d(x,y)."""

    k0: int
    m0: int


def base_geodesic(ball: TreeBall, x: int) -> Tuple[int, ...]:
    """The geodesic from x that merges into the base ray, up to the boundary.

    Runs from x to the meeting point with the base ray, then outward along the
    ray; in the ambient tree it would continue forever.
    """
    graph = ball.graph
    target = ball.base_ray[-1]
    path = [x]
    cur = x
    while cur != target:
        down = [v for v in graph.neighbors[cur] if graph.distances[v, target] == graph.distances[cur, target] - 1]
        if len(down) != 1:
            raise StructureViolationError(f"non-unique descent at vertex {cur}")
        cur = down[0]
        path.append(cur)
    return tuple(path)


def meet_data(ball: TreeBall, x: int, y: int) -> MeetData:
    """Where the base geodesics of x and y first meet each other."""
    px = base_geodesic(ball, x)
    py = base_geodesic(ball, y)
    in_py = set(py)
    k0 = next(k for k, v in enumerate(px) if v in in_py)
    in_px = set(px)
    m0 = next(m for m, v in enumerate(py) if v in in_px)
    if k0 + m0 != ball.graph.distance(x, y):
        raise StructureViolationError("meet indices do not sum to the distance")
    # beyond the meet the two geodesics coincide
    for j in range(len(px) - k0):
        if px[k0 + j] != py[m0 + j]:
            raise StructureViolationError("geodesics diverge after meeting")
    return MeetData(k0, m0)


# ---------------------------------------------------------------------------
# the free-product ball and its coset tree

_LETTERS = "abc"


def _word_label(word) -> str:
    if not word:
        return "e"
    return "".join(_LETTERS[f] + ("2" if e == 2 else "") for f, e in word)


def _parse_word(label: str):
    if label == "e":
        return ()
    word = []
    i = 0
    while i < len(label):
        f = _LETTERS.index(label[i])
        e = 1
        if i + 1 < len(label) and label[i + 1] == "2":
            e = 2
            i += 1
        word.append((f, e))
        i += 1
    return tuple(word)


def _word_mul(word, f: int, e: int):
    """Right-multiply a reduced word by one generator and re-reduce."""
    if word and word[-1][0] == f:
        ne = (word[-1][1] + e) % 3
        if ne == 0:
            return word[:-1]
        return word[:-1] + ((f, ne),)
    return word + ((f, e),)


def _word_inverse(word):
    return tuple((f, 3 - e) for f, e in reversed(word))


def word_distance(x_label: str, y_label: str) -> int:
    """Syllable length of x^{-1} y: the group-word oracle for ball distances."""
    word = _word_inverse(_parse_word(x_label))
    for f, e in _parse_word(y_label):
        word = _word_mul(word, f, e)
    return len(word)


def cayley_ball(radius: int, max_vertices: int = 200_000) -> FiniteGraph:
    """Radius-R ball of the rank-three free product of order-3 cyclic groups.

    Vertices are reduced alternating words over the six generators; edges join
    words differing by one generator after reduction, so two nontrivial powers
    of the same factor are adjacent.
    """
    if radius < 1:
        raise ValueError(f"radius must be >= 1, got {radius}")
    count = 1 + 2 * (4**radius - 1)
    if count > max_vertices:
        raise SizeLimitError(f"ball would have {count} > {max_vertices} vertices")

    words = [()]
    seen = {(): 0}
    frontier = [()]
    for _ in range(radius):
        nxt = []
        for w in frontier:
            for f in range(3):
                for e in (1, 2):
                    u = _word_mul(w, f, e)
                    if u not in seen and len(u) > len(w):
                        seen[u] = len(words)
                        words.append(u)
                        nxt.append(u)
        frontier = nxt
    if len(words) != count:
        raise StructureViolationError("word enumeration missed the closed-form count")

    edges = set()
    for w, i in seen.items():
        for f in range(3):
            for e in (1, 2):
                u = _word_mul(w, f, e)
                j = seen.get(u)
                if j is not None and j != i:
                    edges.add((min(i, j), max(i, j)))
    return graph_from_edges([_word_label(w) for w in words], sorted(edges))


def coset_tree(radius: int, max_vertices: int = 500_000) -> FiniteGraph:
    """The coset tree over the radius-R ball: group words plus proper cosets.

    Words of length <= R sit at even depth 2*len; a coset vertex g*<factor i>
    (label like "aG2") hangs between g and its two extensions by factor i.
    The result is the full radius-2R ball of the 3-homogeneous tree.
    """
    if radius < 1:
        raise ValueError(f"radius must be >= 1, got {radius}")
    count = 1 + 3 * (2 ** (2 * radius) - 1)
    if count > max_vertices:
        raise SizeLimitError(f"coset tree would have {count} > {max_vertices} vertices")

    words = [()]
    frontier = [()]
    for _ in range(radius):
        nxt = []
        for w in frontier:
            for f in range(3):
                for e in (1, 2):
                    u = _word_mul(w, f, e)
                    if len(u) > len(w) and u not in nxt:
                        nxt.append(u)
        seenset = set()
        nxt = [u for u in nxt if not (u in seenset or seenset.add(u))]
        words.extend(nxt)
        frontier = nxt

    labels = [_word_label(w) for w in words]
    index = {w: i for i, w in enumerate(words)}
    edges = []
    for w in words:
        if len(w) > radius - 1:
            continue
        for f in range(3):
            if w and w[-1][0] == f:
                continue  # not a canonical coset representative
            rep = _word_label(w)
            labels.append(("" if rep == "e" else rep) + f"G{f + 1}")
            coset = len(labels) - 1
            for member in (w, _word_mul(w, f, 1), _word_mul(w, f, 2)):
                edges.append((index[member], coset))
    graph = graph_from_edges(labels, edges)
    if graph.size != count or graph.edge_count != count - 1:
        raise StructureViolationError("coset tree is not the expected tree ball")
    return graph


@dataclass(frozen=True, eq=False)
class SerreEmbedding:
    """Word vertices of the ball inside the coset tree, with distance doubling."""

    tree: FiniteGraph
    psi: Tuple[int, ...]
    check: bool


def serre_embedding(cayley: FiniteGraph, tree: Optional[FiniteGraph] = None) -> SerreEmbedding:
    """Embed the group ball into the coset tree and verify both claims:
    distances double exactly, and interior tree vertices have degree 3."""
    root = cayley.index("e")
    radius = int(cayley.distances[root].max())
    if tree is None:
        tree = coset_tree(radius)
    troot = tree.index("e")
    if int(tree.distances[troot].max()) < 2 * radius:
        raise RadiusMismatchError("coset tree too shallow for this ball")
    try:
        psi = tuple(tree.index(s) for s in cayley.labels)
    except ValueError as exc:
        raise RadiusMismatchError(str(exc)) from exc

    sub = tree.distances[np.ix_(psi, psi)]
    doubled = bool(np.array_equal(sub, 2 * cayley.distances))
    depth = tree.distances[troot]
    interior = all(
        len(tree.neighbors[v]) == 3 for v in range(tree.size) if depth[v] < 2 * radius
    )
    return SerreEmbedding(tree, psi, doubled and interior)


def _token_weight(word) -> int:
    return sum(abs(t[1]) if t[0] == "s" else 1 for t in word)


def _token_right(word, gen):
    """Right-multiply a reduced token word by s, s^{-1} or t."""
    if gen == "t":
        if word and word[-1][0] == "t":
            return word[:-1]
        return word + (("t",),)
    step = 1 if gen == "s" else -1
    if word and word[-1][0] == "s":
        k = word[-1][1] + step
        if k == 0:
            return word[:-1]
        return word[:-1] + (("s", k),)
    return word + (("s", step),)


def _token_left_s(word):
    """Left-multiply by s: the shift automorphism in the rank-one model."""
    if word and word[0][0] == "s":
        k = word[0][1] + 1
        if k == 0:
            return word[1:]
        return (("s", k),) + word[1:]
    return (("s", 1),) + word


@dataclass(frozen=True, eq=False)
class SerreShift:
    """Partial automorphism of the coset tree swapping words and cosets.

    `image[v]` is the shifted vertex, or None where the shift leaves the ball.
    Every defined image changes its distance to the root by exactly one, and
    the coset vertices are exactly the images of word vertices.
    """

    tree: FiniteGraph
    image: Tuple[Optional[int], ...]

    def image_label(self, label: str) -> Optional[str]:
        j = self.image[self.tree.index(label)]
        return None if j is None else self.tree.labels[j]


def serre_shift(tree: FiniteGraph) -> SerreShift:
    root = tree.index("e")
    depth = tree.distances[root]
    max_depth = int(depth.max())
    if max_depth % 2 != 0:
        raise RadiusMismatchError("coset tree ball has odd radius")

    # rigid rooted isomorphism onto the ball of the rank-one model Z * Z/2,
    # chosen so that the shift sends the root to the first coset vertex
    iso: Dict[int, tuple] = {root: ()}
    inv: Dict[tuple, int] = {(): root}
    first = sorted(tree.neighbors[root], key=lambda v: tree.labels[v])
    model_first = [(("s", 1),), (("s", -1),), (("t",),)]
    stack = list(zip(first, model_first, [root] * 3))
    for v, w, _ in stack:
        iso[v] = w
        inv[w] = v
    idx = 0
    while idx < len(stack):
        v, w, parent = stack[idx]
        idx += 1
        kids = sorted((u for u in tree.neighbors[v] if u != parent), key=lambda u: tree.labels[u])
        if _token_weight(w) >= max_depth:
            grown = []
        else:
            grown = sorted(
                u
                for g in ("s", "s-", "t")
                for u in [_token_right(w, g)]
                if _token_weight(u) > _token_weight(w)
            )
        if len(kids) != len(grown):
            raise StructureViolationError(f"vertex {tree.labels[v]} has {len(kids)} children, model has {len(grown)}")
        for u, wu in zip(kids, grown):
            iso[u] = wu
            inv[wu] = u
            stack.append((u, wu, v))

    image: list = [None] * tree.size
    for v, w in iso.items():
        shifted = _token_left_s(w)
        image[v] = inv.get(shifted)

    is_word = [("G" not in s) for s in tree.labels]
    coset_set = {v for v in range(tree.size) if not is_word[v]}
    shifted_words = set()
    for v in range(tree.size):
        j = image[v]
        if j is None:
            continue
        if abs(int(depth[j]) - int(depth[v])) != 1:
            raise StructureViolationError(f"shift moves {tree.labels[v]} by more than one level")
        if is_word[v] == is_word[j]:
            raise StructureViolationError("shift fails to swap words and cosets")
        if is_word[v]:
            shifted_words.add(j)
    if shifted_words != coset_set:
        raise StructureViolationError("cosets are not exactly the shifted words")
    return SerreShift(tree, tuple(image))


# ---------------------------------------------------------------------------
# median complexes


@dataclass(frozen=True, eq=False)
class MedianComplex:
    """A verified median graph with its cube skeleton and a base ray.

    `hyperplane_ids[k]` is the hyperplane class of `edge_list[k]`; `cubes`
    holds the vertex sets of all cubes of dimension >= 2.
    """

    graph: FiniteGraph
    base_ray: Tuple[int, ...]
    dimension: int
    edge_list: Tuple[Tuple[int, int], ...]
    hyperplane_ids: Tuple[int, ...]
    cubes: Tuple[FrozenSet[int], ...]
    _cache: dict = field(default=None, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "_cache", {})

    @property
    def usable_radius(self) -> int:
        # base rays must be twice as long as the range they serve
        return (len(self.base_ray) - 1) // 2


def _interval_mask(dist: np.ndarray, x: int, y: int) -> np.ndarray:
    return dist[x] + dist[y] == dist[x, y]


def _median_of(dist: np.ndarray, x: int, y: int, z: int) -> int:
    mask = _interval_mask(dist, x, y) & _interval_mask(dist, y, z) & _interval_mask(dist, z, x)
    hits = np.flatnonzero(mask)
    if hits.size != 1:
        raise NotMedianError(
            f"triple ({x},{y},{z}) has {hits.size} median candidates"
        )
    return int(hits[0])


def _verify_median(dist: np.ndarray, exhaustive_limit: int, samples: int, seed: int):
    n = dist.shape[0]
    if n**3 <= exhaustive_limit:
        im = dist[:, None, :] + dist[None, :, :] == dist[:, :, None]
        for z in range(n):
            counts = (im & im[:, z, :][None, :, :] & im[z, :, :][:, None, :]).sum(axis=2)
            if not (counts == 1).all():
                bad = np.argwhere(counts != 1)[0]
                raise NotMedianError(
                    f"triple ({bad[0]},{bad[1]},{z}) has {counts[bad[0], bad[1]]} median candidates"
                )
        return
    rng = np.random.default_rng(seed)
    triples = rng.integers(0, n, size=(samples, 3))
    for x, y, z in triples:
        _median_of(dist, int(x), int(y), int(z))


def _bipartition_or_raise(graph: FiniteGraph):
    row = graph.distances[0]
    for u, ns in enumerate(graph.neighbors):
        for v in ns:
            if (row[u] + row[v]) % 2 == 0:
                raise NotMedianError("graph has an odd cycle, so it cannot be median")


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, a: int) -> int:
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a: int, b: int):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[rb] = ra


def _edge_partition(graph: FiniteGraph):
    """Hyperplanes: close the opposite-sides-of-a-square relation."""
    edge_list = graph.edges()
    eidx = {e: k for k, e in enumerate(edge_list)}

    def eid(u, v):
        return eidx[(u, v) if u < v else (v, u)]

    uf = _UnionFind(len(edge_list))
    nbr_sets = [set(ns) for ns in graph.neighbors]
    dist = graph.distances
    for a in range(graph.size):
        for u, v in itertools.combinations(graph.neighbors[a], 2):
            for z in nbr_sets[u] & nbr_sets[v]:
                if z != a and dist[a, z] == 2:
                    uf.union(eid(a, u), eid(v, z))
                    uf.union(eid(a, v), eid(u, z))
    order: Dict[int, int] = {}
    ids = []
    for k in range(len(edge_list)):
        r = uf.find(k)
        if r not in order:
            order[r] = len(order)
        ids.append(order[r])
    return edge_list, tuple(ids)


def _geodesic_ids(graph, eidx, hyp_ids, x, y, pick):
    """Hyperplane ids crossed by the greedy geodesic chosen by `pick`."""
    dist = graph.distances
    crossed = []
    cur = x
    while cur != y:
        down = [v for v in graph.neighbors[cur] if dist[v, y] == dist[cur, y] - 1]
        nxt = pick(down)
        e = (cur, nxt) if cur < nxt else (nxt, cur)
        crossed.append(hyp_ids[eidx[e]])
        cur = nxt
    return crossed


def _check_crossings(graph, edge_list, hyp_ids, pairs):
    eidx = {e: k for k, e in enumerate(edge_list)}
    for x, y in pairs:
        a = _geodesic_ids(graph, eidx, hyp_ids, x, y, min)
        b = _geodesic_ids(graph, eidx, hyp_ids, x, y, max)
        if len(set(a)) != len(a) or set(a) != set(b):
            raise NotMedianError(
                f"geodesics {x}->{y} disagree on crossed hyperplanes"
            )


def _complete_square(nbr_sets, p, q, r):
    """The fourth corner over p,q opposite r; None if absent."""
    cands = [z for z in nbr_sets[p] & nbr_sets[q] if z != r]
    if len(cands) > 1:
        raise NotMedianError(f"vertices {p},{q} have three common neighbors")
    return cands[0] if cands else None


def _cube_from_corner(w, dirs, nbr_sets, dist):
    """Grow the cube spanned at w by the pairwise-compatible directions.

    Returns all 2^k vertices, or None when some completion is missing or the
    candidate is not isometric to a cube.
    """
    k = len(dirs)
    verts = {frozenset(): w}
    for i, u in enumerate(dirs):
        verts[frozenset([i])] = u
    for size in range(2, k + 1):
        for combo in itertools.combinations(range(k), size):
            fa = frozenset(combo)
            a, b = combo[0], combo[1]
            p = verts[fa - {a}]
            q = verts[fa - {b}]
            r = verts[fa - {a, b}]
            z = _complete_square(nbr_sets, p, q, r)
            if z is None or dist[w, z] != size:
                return None
            if any(z not in nbr_sets[verts[fa - {c}]] for c in combo):
                return None
            verts[fa] = z
    out = frozenset(verts.values())
    return out if len(out) == 2**k else None


def _all_cliques(compat, cap):
    """Every nonempty clique (as sorted index tuples), smallest labels first."""
    n = len(compat)
    out = []

    def extend(base, cands):
        for c in cands:
            cur = base + (c,)
            out.append(cur)
            if len(cur) < cap:
                extend(cur, [d for d in cands if d > c and compat[c][d]])

    extend((), list(range(n)))
    return out


def _enumerate_cubes(graph: FiniteGraph, cap: int = 6):
    nbr_sets = [set(ns) for ns in graph.neighbors]
    dist = graph.distances
    cubes: Dict[FrozenSet[int], Tuple[int, Tuple[int, ...]]] = {}
    for w in range(graph.size):
        nbrs = list(graph.neighbors[w])
        m = len(nbrs)
        compat = [[False] * m for _ in range(m)]
        for i, j in itertools.combinations(range(m), 2):
            z = _complete_square(nbr_sets, nbrs[i], nbrs[j], w)
            compat[i][j] = compat[j][i] = z is not None and dist[w, z] == 2
        for clique in _all_cliques(compat, cap):
            if len(clique) < 2:
                continue
            dirs = tuple(nbrs[i] for i in clique)
            verts = _cube_from_corner(w, dirs, nbr_sets, dist)
            if verts is not None:
                cubes.setdefault(verts, (w, dirs))
    ordered = sorted(cubes, key=lambda fs: tuple(sorted(fs)))
    return tuple(ordered)


def median_complex(
    graph: FiniteGraph,
    base_ray: Sequence[int],
    exhaustive_limit: int = 2_000_000,
    samples: int = 100_000,
    seed: int = 7,
) -> MedianComplex:
    """Verify a graph is median and package its cube combinatorics.

    Median uniqueness is checked on every triple when n^3 stays below
    `exhaustive_limit`, and on `samples` seeded random triples otherwise.
    """
    ray = tuple(int(v) for v in base_ray)
    if len(ray) < 2:
        raise ValueError("base ray needs at least two vertices")
    dist = graph.distances
    for i, j in itertools.combinations(range(len(ray)), 2):
        if dist[ray[i], ray[j]] != j - i:
            raise ValueError("base ray is not a geodesic")

    _bipartition_or_raise(graph)
    _verify_median(dist, exhaustive_limit, samples, seed)
    edge_list, hyp_ids = _edge_partition(graph)

    n = graph.size
    if n <= 60:
        pairs = list(itertools.combinations(range(n), 2))
    else:
        rng = np.random.default_rng(seed)
        pairs = [tuple(p) for p in rng.integers(0, n, size=(400, 2)) if p[0] != p[1]]
    _check_crossings(graph, edge_list, hyp_ids, pairs)

    cubes = _enumerate_cubes(graph)
    if cubes:
        dimension = max(len(fs).bit_length() - 1 for fs in cubes)
    else:
        dimension = 1 if edge_list else 0
    return MedianComplex(graph, ray, dimension, edge_list, hyp_ids, cubes)


def median(cx: MedianComplex, x: int, y: int, z: int) -> int:
    """The unique vertex in all three pairwise intervals."""
    key = ("mu",) + tuple(sorted((x, y, z)))
    cached = cx._cache.get(key)
    if cached is None:
        cached = _median_of(cx.graph.distances, x, y, z)
        cx._cache[key] = cached
    return cached


def hyperplanes(cx: MedianComplex) -> Tuple[Tuple[Tuple[int, int], ...], ...]:
    """The edge partition, one tuple of edges per hyperplane."""
    m = max(cx.hyperplane_ids) + 1 if cx.hyperplane_ids else 0
    groups = [[] for _ in range(m)]
    for e, h in zip(cx.edge_list, cx.hyperplane_ids):
        groups[h].append(e)
    return tuple(tuple(g) for g in groups)


def stable_median(cx: MedianComplex, x1: int, x2: int) -> int:
    """Median against the far end of the base ray, demanded stable there."""
    if len(cx.base_ray) < 3:
        raise RayTooShortError("base ray too short to witness stabilization")
    deep = median(cx, x1, x2, cx.base_ray[-1])
    prev = median(cx, x1, x2, cx.base_ray[-2])
    if deep != prev:
        raise RayTooShortError(
            f"median of ({x1},{x2}) still moving at the end of the base ray"
        )
    d = cx.graph.distances
    if d[x1, deep] + d[deep, x2] != d[x1, x2]:
        raise StructureViolationError("stable median left the interval")
    return deep


def _median_table_against(dist: np.ndarray, sub: np.ndarray, z: int) -> np.ndarray:
    """m[i,j] = median of (sub[i], sub[j], z), chunked over rows."""
    n = dist.shape[0]
    m = len(sub)
    izt = (dist + dist[:, [z]] == dist[z]).T[sub]  # izt[i, u] : u in I(sub[i], z)
    dsub = dist[sub]
    dpair = dsub[:, sub]
    table = np.empty((m, m), dtype=np.int32)
    chunk = max(1, min(128, (1 << 22) // max(1, m * n)))
    for lo in range(0, m, chunk):
        hi = min(m, lo + chunk)
        im = dsub[lo:hi, None, :] + dsub[None, :, :] == dpair[lo:hi, :, None]
        cand = im & izt[None, :, :] & izt[lo:hi, None, :]
        counts = cand.sum(axis=2)
        if not (counts == 1).all():
            bad = np.argwhere(counts != 1)[0]
            raise NotMedianError(
                f"triple ({sub[lo + bad[0]]},{sub[bad[1]]},{z}) has "
                f"{counts[bad[0], bad[1]]} median candidates"
            )
        table[lo:hi] = cand.argmax(axis=2)
    return table


def stable_median_table(cx: MedianComplex, vertices: Optional[Sequence[int]] = None) -> np.ndarray:
    """Stable medians for all pairs from `vertices` (default: everything).

    Demanded identical at the last two ray samples; pairs touching the far end
    of the base ray cannot stabilize, so restrict the domain when the ray is
    glued on.  Entries are global vertex indices.
    """
    if vertices is None:
        vertices = range(cx.graph.size)
    sub = np.asarray(tuple(vertices), dtype=np.intp)
    key = ("mtable", sub.tobytes())
    cached = cx._cache.get(key)
    if cached is not None:
        return cached
    if len(cx.base_ray) < 3:
        raise RayTooShortError("base ray too short to witness stabilization")
    dist = cx.graph.distances
    deep = _median_table_against(dist, sub, cx.base_ray[-1])
    prev = _median_table_against(dist, sub, cx.base_ray[-2])
    if not np.array_equal(deep, prev):
        bad = np.argwhere(deep != prev)[0]
        raise RayTooShortError(
            f"median of ({sub[bad[0]]},{sub[bad[1]]}) still moving at the end of the base ray"
        )
    cx._cache[key] = deep
    return deep


def ray_set(cx: MedianComplex, x: int, k: int) -> FrozenSet[int]:
    """Vertices at distance k from x on geodesics that merge into the base ray."""
    if k < 0:
        raise ValueError("k must be >= 0")
    if k > cx.usable_radius:
        raise RayTooShortError(f"k={k} exceeds usable radius {cx.usable_radius}")
    key = ("ray", x, k)
    cached = cx._cache.get(key)
    if cached is not None:
        return cached
    dist = cx.graph.distances
    z1, z2 = cx.base_ray[-1], cx.base_ray[-2]
    if dist[x, z1] != dist[x, z2] + 1:
        raise RayTooShortError(f"base ray has not escaped vertex {x}")
    at_k = dist[x] == k
    s1 = frozenset(np.flatnonzero(at_k & _interval_mask(dist, x, z1)).tolist())
    s2 = frozenset(np.flatnonzero(at_k & _interval_mask(dist, x, z2)).tolist())
    if s1 != s2:
        raise RayTooShortError(f"ray set ({x},{k}) not stabilized at the ray end")
    cap = binomial(cx.dimension - 1 + k, cx.dimension - 1)
    if len(s1) > cap:
        raise StructureViolationError(
            f"|ray set({x},{k})| = {len(s1)} exceeds the simplex count {cap}"
        )
    cx._cache[key] = s1
    return s1


# -- polytope universe ------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Polytope:
    """A distance slice of a cube: level, vertex set, and one witness corner."""

    level: int
    vertices: FrozenSet[int]
    cube: Optional[FrozenSet[int]]
    corner: int
    offset: int


def _poly_universe(cx: MedianComplex):
    """All slices of all cubes, deduplicated by (level, vertex set)."""
    cached = cx._cache.get("universe")
    if cached is not None:
        return cached
    dist = cx.graph.distances
    sets = []
    meta = []
    index: Dict[Tuple[int, FrozenSet[int]], int] = {}
    touch: Dict[int, list] = {}
    for fs in cx.cubes:
        level = len(fs).bit_length() - 2  # slice of an (l+1)-cube has level l
        members = sorted(fs)
        for w in members:
            for j in range(1, level + 1):
                pset = frozenset(v for v in members if dist[w, v] == j)
                key = (level, pset)
                if key in index:
                    continue
                index[key] = len(sets)
                sets.append(pset)
                meta.append((level, fs, w, j))
                for v in pset:
                    touch.setdefault(v, []).append(index[key])
    cached = (sets, meta, touch)
    cx._cache["universe"] = cached
    return cached


def _polytopes_within(cx: MedianComplex, members: FrozenSet[int]):
    """Global ids of every polytope contained in a vertex set.

    Vertices double as their own level-0 polytopes with ids below n; higher
    levels are offset by n.
    """
    n = cx.graph.size
    ids = [(v, 0) for v in sorted(members)]
    sets, meta, touch = _poly_universe(cx)
    cand = set()
    for v in members:
        cand.update(touch.get(v, ()))
    for p in sorted(cand):
        if sets[p] <= members:
            ids.append((n + p, meta[p][0]))
    return ids


@dataclass(frozen=True, eq=False)
class PolytopeReport:
    """Polytopes inside one ray set, plus the backward chain sets.

    `predecessors[(y, i)]` collects the vertices w of ray_set(x, k-i) whose
    own ray set at i contains y.
    """

    x: int
    k: int
    polys: Tuple[Polytope, ...]
    predecessors: Dict[Tuple[int, int], FrozenSet[int]]


def polytope_budget(dimension: int) -> int:
    """Multiplicative cap on polytope counts per ray set, dimension only."""
    total = sum(dimension**i * binomial(dimension - 1 + i, dimension - 1) for i in range(dimension))
    return 2**total


def polytopes(cx: MedianComplex, x: int, k: int) -> PolytopeReport:
    members = ray_set(cx, x, k)
    n = cx.graph.size
    sets, meta, _ = _poly_universe(cx)
    polys = []
    for gid, level in _polytopes_within(cx, members):
        if gid < n:
            polys.append(Polytope(0, frozenset([gid]), None, gid, 0))
        else:
            lvl, fs, w, j = meta[gid - n]
            polys.append(Polytope(lvl, sets[gid - n], fs, w, j))

    cap = polytope_budget(cx.dimension) * binomial(cx.dimension - 1 + k, cx.dimension - 1)
    if len(polys) > cap:
        raise StructureViolationError(f"polytope count {len(polys)} exceeds bound {cap}")

    predecessors: Dict[Tuple[int, int], FrozenSet[int]] = {}
    for i in range(min(cx.dimension - 1, k) + 1):
        sources = ray_set(cx, x, k - i)
        for y in members:
            back = frozenset(w for w in sources if y in ray_set(cx, w, i))
            if len(back) > cx.dimension**i:
                raise StructureViolationError(
                    f"chain set ({y},{i}) has {len(back)} > {cx.dimension ** i} members"
                )
            predecessors[(y, i)] = back
    return PolytopeReport(x, k, tuple(polys), predecessors)


@dataclass(frozen=True, eq=False)
class MizutaVectors:
    """Indicator vectors over the polytope universe for one (x, k).

    `unsigned` sums plain indicators over every polytope in the ray set;
    `alternating` signs each by (-1)^level.  Keys are global polytope ids.
    """

    x: int
    k: int
    unsigned: Dict[int, int]
    alternating: Dict[int, int]

    @property
    def norm_sq(self) -> int:
        return len(self.unsigned)


def mizuta_vectors(cx: MedianComplex, x: int, k: int) -> MizutaVectors:
    key = ("mz", x, k)
    cached = cx._cache.get(key)
    if cached is not None:
        return cached
    members = ray_set(cx, x, k)
    ids = _polytopes_within(cx, members)
    cap = polytope_budget(cx.dimension) * binomial(cx.dimension - 1 + k, cx.dimension - 1)
    if len(ids) > cap:
        raise StructureViolationError(f"vector weight {len(ids)} exceeds bound {cap}")
    unsigned = {gid: 1 for gid, _ in ids}
    alternating = {gid: (-1) ** level for gid, level in ids}
    out = MizutaVectors(x, k, unsigned, alternating)
    cx._cache[key] = out
    return out


def pairing(a: Dict[int, int], b: Dict[int, int]) -> int:
    """Inner product of two sparse integer vectors."""
    if len(b) < len(a):
        a, b = b, a
    return sum(c * b[gid] for gid, c in a.items() if gid in b)
