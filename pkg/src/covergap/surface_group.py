"""Genus-g surface groups, symbolically and as Fuchsian groups.

Words over the standard generators a1, b1, ..., a_g, b_g (letters +-1..+-2g),
Dehn's algorithm for the word problem, the explicit genus-2 realization from
the regular hyperbolic octagon (the Bolza surface), and geometric enumeration
of lattice points and operator support sets.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .hyperbolic import (
    IDENTITY,
    HPoint,
    Isometry,
    distance,
    geodesic_point,
)

Word = tuple  # of signed ints


# ---------------------------------------------------------------------------
# free-group word arithmetic

def free_reduce(letters) -> Word:
    """Cancel adjacent x x^-1 pairs."""
    out = []
    for l in letters:
        if out and out[-1] == -l:
            out.pop()
        else:
            out.append(l)
    return tuple(out)


def inverse_word(w: Word) -> Word:
    return tuple(-l for l in reversed(w))


def concat(*ws) -> Word:
    total = []
    for w in ws:
        total.extend(w)
    return free_reduce(total)


@dataclass(frozen=True)
class SurfacePresentation:
    """<a1, b1, ..., a_g, b_g | prod [a_i, b_i]> for genus g >= 2."""

    genus: int

    def __post_init__(self):
        if self.genus < 2:
            raise ValueError("surface presentations need genus >= 2")

    @property
    def relator(self) -> Word:
        r = []
        for i in range(self.genus):
            a, b = 2 * i + 1, 2 * i + 2
            r += [a, b, -a, -b]
        return tuple(r)

    @property
    def n_generators(self) -> int:
        return 2 * self.genus


@lru_cache(maxsize=None)
def _rotation_table(genus):
    """All cyclic rotations of the relator and its inverse, bucketed by
    first letter. Used by the Dehn scan."""
    rel = SurfacePresentation(genus).relator
    rots = set()
    for w in (rel, inverse_word(rel)):
        for i in range(len(w)):
            rots.add(w[i:] + w[:i])
    table = {}
    for r in rots:
        table.setdefault(r[0], []).append(r)
    return table


def dehn_reduce(w, p: SurfacePresentation) -> Word:
    """Dehn's algorithm: freely reduce, then greedily replace any subword
    that matches more than half of a cyclic rotation of the relator (or its
    inverse) by the shorter complement. For surface groups this terminates
    with the empty word exactly on representatives of the identity.
    """
    table = _rotation_table(p.genus)
    L = 4 * p.genus
    half = 2 * p.genus
    w = free_reduce(w)
    changed = True
    while changed:
        changed = False
        n = len(w)
        for i in range(n):
            for rot in table.get(w[i], ()):
                # longest common prefix of w[i:] and rot
                m = 1
                while m < L and i + m < n and w[i + m] == rot[m]:
                    m += 1
                if m > half:
                    # rot = matched * rest  =>  matched == inverse(rest)
                    replacement = inverse_word(rot[m:])
                    w = free_reduce(w[:i] + replacement + w[i + m:])
                    changed = True
                    break
            if changed:
                break
    return w


# ---------------------------------------------------------------------------
# Fuchsian realization

@dataclass
class FuchsianRealization:
    """A surface group acting on the half-plane with a fundamental polygon.

    generator_matrices realize a1, b1, ..., a_g, b_g; side_pairings are the
    face-pairing isometries of the polygon together with their expressions
    as words in the standard generators.
    """

    presentation: SurfacePresentation
    generator_matrices: list
    base_point: HPoint
    domain_vertices: list
    domain_diameter: float
    side_pairings: list = field(default_factory=list)
    side_pairing_words: list = field(default_factory=list)
    circumradius: float = 0.0
    apothem: float = 0.0

    def __post_init__(self):
        self._gen_inv = [m.inverse() for m in self.generator_matrices]

    def letter_matrix(self, letter: int) -> Isometry:
        if letter > 0:
            return self.generator_matrices[letter - 1]
        return self._gen_inv[-letter - 1]


def evaluate(w, real: FuchsianRealization) -> Isometry:
    """Product of generator matrices along the word."""
    M = IDENTITY
    for letter in w:
        M = M @ real.letter_matrix(letter)
    return M


def _rot_about_i(theta: float) -> np.ndarray:
    c, s = math.cos(theta / 2.0), math.sin(theta / 2.0)
    return np.array([[c, s], [-s, c]])


def _translate_along_real(length: float) -> np.ndarray:
    # hyperbolic translation along the unit half-circle geodesic through i
    c, s = math.cosh(length / 2.0), math.sinh(length / 2.0)
    return np.array([[c, s], [s, c]])


def _disk_to_halfplane(wx: float, wy: float) -> HPoint:
    # inverse Cayley transform, disk center -> i
    den = (1.0 - wx) ** 2 + wy ** 2
    return HPoint(-2.0 * wy / den, (1.0 - wx * wx - wy * wy) / den)


# words expressing the octagon side pairings g0..g3 in the standard letters
_PAIRING_WORDS = [(-2, 3, 4), (-1, -2, 3, 4), (3,), (-4,)]


def build_bolza_realization() -> FuchsianRealization:
    """The genus-2 surface of the regular hyperbolic octagon with pi/4 corners.

    Opposite sides are identified by the four hyperbolic translations
    g_k = rot(k pi/4) trans(2 rho) rot(-k pi/4), rho the apothem with
    cosh rho = 1 + sqrt(2). Standard generators are the basis
    a1 = g0 g1^-1, b1 = g2 g3^-1 g0^-1, a2 = g2, b2 = g3^-1, under which
    [a1,b1][a2,b2] freely equals the octagon relation, so the relator holds
    to machine precision. All four generators are conjugates of systolic
    translations: |trace| = 2(1 + sqrt 2), translation length
    2 arccosh(1 + sqrt 2).
    """
    rho = math.acosh(1.0 + math.sqrt(2.0))          # apothem
    circum = math.acosh(3.0 + 2.0 * math.sqrt(2.0))  # circumradius

    g = [
        Isometry(_rot_about_i(k * math.pi / 4.0)
                 @ _translate_along_real(2.0 * rho)
                 @ _rot_about_i(-k * math.pi / 4.0))
        for k in range(4)
    ]
    gi = [m.inverse() for m in g]

    a1 = g[0] @ gi[1]
    b1 = g[2] @ gi[3] @ gi[0]
    a2 = g[2]
    b2 = gi[3]
    gens = [a1, b1, a2, b2]

    pres = SurfacePresentation(2)
    rel = IDENTITY
    for letter in pres.relator:
        rel = rel @ (gens[letter - 1] if letter > 0 else gens[-letter - 1].inverse())
    if not rel.is_identity(1e-8):
        raise RuntimeError("octagon side pairings do not satisfy the surface relation")

    # vertices: disk radius tanh(circum/2), angles between side-pairing axes
    rv = math.tanh(circum / 2.0)
    vertices = []
    for k in range(8):
        ang = -math.pi / 2.0 + math.pi / 8.0 + k * math.pi / 4.0
        vertices.append(_disk_to_halfplane(rv * math.cos(ang), rv * math.sin(ang)))

    diam = max(distance(v, w) for v in vertices for w in vertices)

    pairings = list(g) + gi
    pairing_words = list(_PAIRING_WORDS) + [inverse_word(w) for w in _PAIRING_WORDS]

    return FuchsianRealization(
        presentation=pres,
        generator_matrices=gens,
        base_point=HPoint(0.0, 1.0),
        domain_vertices=vertices,
        domain_diameter=diam,
        side_pairings=pairings,
        side_pairing_words=pairing_words,
        circumradius=circum,
        apothem=rho,
    )


def in_fundamental_domain(real: FuchsianRealization, z: HPoint, slack: float = 0.0) -> bool:
    """Dirichlet-domain membership: z is no farther from the base point than
    from any of its side-pairing translates. slack > 0 admits a margin,
    slack < 0 demands strict interiority."""
    base = real.base_point
    d0 = distance(z, base)
    for P in real.side_pairings:
        if d0 > distance(z, P.apply(base)) + slack:
            return False
    return True


# ---------------------------------------------------------------------------
# lattice enumeration

@dataclass
class SupportSet:
    """Group elements paired with their standard-letter words."""

    elements: list          # of (Word, Isometry)
    radius_used: float
    displacements: list = field(default_factory=list)

    def __len__(self):
        return len(self.elements)

    def words(self):
        return [w for w, _ in self.elements]

    def isometries(self):
        return [M for _, M in self.elements]

    def to_json(self) -> str:
        recs = []
        for (w, M), d in zip(self.elements, self.displacements):
            recs.append({"word": list(w), "matrix": M.m.ravel().tolist(), "displacement": d})
        return json.dumps({"radius_used": self.radius_used, "elements": recs}, indent=1)


_QUANT = 1e-6


def _sign_normalized_flat(m: np.ndarray) -> np.ndarray:
    flat = m.ravel()
    for e in flat:
        if abs(e) > 1e-9:
            return flat if e > 0 else -flat
    return flat


def _keys(flat: np.ndarray):
    k1 = tuple(int(math.floor(e / _QUANT)) for e in flat)
    k2 = tuple(int(math.floor(e / _QUANT + 0.5)) for e in flat)
    return k1, k2


class _Dedup:
    """Projective matrix dedup: two offset quantization grids plus a distance
    check, with an exact word-identity fallback for near-collisions."""

    def __init__(self, presentation):
        self.pres = presentation
        self.flats = []
        self.words = []
        self.grid1 = {}
        self.grid2 = {}

    def find(self, flat, word):
        k1, k2 = _keys(flat)
        candidates = list(self.grid1.get(k1, ())) + list(self.grid2.get(k2, ()))
        for idx in candidates:
            if np.abs(self.flats[idx] - flat).max() < 1e-7:
                return idx
        # a near-miss in the distance test does not prove distinctness;
        # settle borderline cases with the exact word criterion
        for idx in candidates:
            if not dehn_reduce(concat(inverse_word(self.words[idx]), word), self.pres):
                return idx
        return None

    def insert(self, flat, word) -> int:
        idx = len(self.flats)
        self.flats.append(flat)
        self.words.append(word)
        k1, k2 = _keys(flat)
        self.grid1.setdefault(k1, []).append(idx)
        self.grid2.setdefault(k2, []).append(idx)
        return idx


def _displacement_cosh(mats: np.ndarray) -> np.ndarray:
    """cosh d(i, M i) for a stacked (n, 2, 2) array of matrices."""
    a, b = mats[:, 0, 0], mats[:, 0, 1]
    c, d = mats[:, 1, 0], mats[:, 1, 1]
    den = c * c + d * d
    x = (b * d + a * c) / den
    y = 1.0 / den
    return 1.0 + (x * x + (y - 1.0) ** 2) / (2.0 * y)


def lattice_points(real: FuchsianRealization, R: float, max_R: float = 12.0) -> SupportSet:
    """All gamma with d(base, gamma base) <= R, by breadth-first search over
    the side-pairing moves.

    The search keeps every element whose displacement is at most
    R + circumradius + 0.1: if d(i, gamma i) <= R, the tiles meeting the
    geodesic from i to gamma i form a side/vertex-adjacent chain whose
    centers all lie within circumradius of the geodesic, so gamma is reached
    without ever leaving that padded ball. Pruning beyond it is safe.
    """
    if R < 0:
        raise ValueError("R must be nonnegative")
    if R > max_R:
        raise ValueError(f"R={R} exceeds the enumeration cap {max_R}")

    pres = real.presentation
    moves = np.stack([P.m for P in real.side_pairings])
    move_words = real.side_pairing_words
    prune_cosh = math.cosh(R + real.circumradius + 0.1)
    keep_cosh = math.cosh(R) * (1.0 + 1e-12) + 1e-12

    dedup = _Dedup(pres)
    mats = [np.eye(2)]
    words = [()]
    disps = [1.0]  # cosh displacement
    dedup.insert(_sign_normalized_flat(np.eye(2)), ())

    level = [0]
    while level:
        stack = np.stack([mats[i] for i in level])
        prods = np.einsum("nij,gjk->ngik", stack, moves)
        coshd = _displacement_cosh(prods.reshape(-1, 2, 2)).reshape(len(level), -1)
        next_level = []
        for li, src in enumerate(level):
            for gidx in range(len(moves)):
                if coshd[li, gidx] > prune_cosh:
                    continue
                m = prods[li, gidx]
                # renormalize drift before it accumulates
                det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
                if abs(det - 1.0) > 1e-12:
                    m = m / math.sqrt(det)
                word = free_reduce(words[src] + move_words[gidx])
                flat = _sign_normalized_flat(m)
                if dedup.find(flat, word) is not None:
                    continue
                dedup.insert(flat, word)
                idx = len(mats)
                mats.append(m)
                words.append(word)
                disps.append(float(coshd[li, gidx]))
                next_level.append(idx)
        level = next_level

    order = [i for i in range(len(mats)) if disps[i] <= keep_cosh]
    order.sort(key=lambda i: (disps[i], len(words[i]), words[i]))
    elements = [(dehn_reduce(words[i], pres), Isometry(mats[i])) for i in order]
    displacements = [math.acosh(min(max(disps[i], 1.0), 1e300)) for i in order]
    return SupportSet(elements=elements, radius_used=R, displacements=displacements)


def _boundary_samples(real: FuchsianRealization, per_side: int = 64):
    """Uniform sample of the polygon boundary (vertices included) plus the
    maximum arclength gap between consecutive samples.

    The distance between two disjoint convex sets is attained on their
    boundaries, so boundary samples bound min-distance queries two-sidedly:
    sample minimum <= true minimum + gap.
    """
    verts = real.domain_vertices
    k = len(verts)
    pts = []
    gap = 0.0
    for j in range(k):
        v, w = verts[j], verts[(j + 1) % k]
        side = distance(v, w)
        gap = max(gap, side / per_side)
        for i in range(per_side):
            pts.append(geodesic_point(v, w, i / per_side))
    return np.array([[p.x, p.y] for p in pts]), gap


def support_set(real: FuchsianRealization, t: float, max_R: float = 12.0) -> SupportSet:
    """Elements whose translated domain comes within distance t of the domain,
    i.e. exactly those that can contribute a nonzero kernel block.

    Candidates are enumerated out to 2*circumradius + t (triangle inequality:
    the polygon sits inside the circumball), then filtered by the minimum
    sample-pair distance over a dense boundary sample of the polygon. The
    threshold is widened by one sample gap so no qualifying element can be
    missed; a borderline extra element only contributes a near-empty block.
    The result is inverse-closed and contains the identity.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    radius = 2.0 * real.circumradius + t + 1e-6
    cand = lattice_points(real, radius, max_R=max_R)

    S, gap = _boundary_samples(real)
    X0 = S[:, 0]
    Y0 = S[:, 1]
    cosh_t = math.cosh(t + gap) * (1.0 + 1e-12)

    accept = []
    for w, M in cand.elements:
        a, b, c, d = M.m.ravel()
        den = (c * X0 + d) ** 2 + (c * Y0) ** 2
        gx = ((a * X0 + b) * (c * X0 + d) + a * c * Y0 * Y0) / den
        gy = Y0 / den
        dx = X0[:, None] - gx[None, :]
        dy = Y0[:, None] - gy[None, :]
        cmin = (1.0 + (dx * dx + dy * dy) / (2.0 * Y0[:, None] * gy[None, :])).min()
        accept.append((not w) or cmin <= cosh_t)

    # symmetrize: gamma in S(t) iff gamma^-1 in S(t); the sample-pair
    # predicate is symmetric in exact arithmetic, make it so in floats too
    index_of = {}
    for i, (w, M) in enumerate(cand.elements):
        index_of[tuple(_keys(_sign_normalized_flat(M.m))[0])] = i
    for i, (w, M) in enumerate(cand.elements):
        if not accept[i]:
            continue
        inv_key = tuple(_keys(_sign_normalized_flat(M.inverse().m))[0])
        j = index_of.get(inv_key)
        if j is not None:
            accept[j] = True

    elements = [e for e, a in zip(cand.elements, accept) if a]
    displacements = [d for d, a in zip(cand.displacements, accept) if a]
    return SupportSet(elements=elements, radius_used=radius, displacements=displacements)
