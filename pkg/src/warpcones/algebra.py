"""Exact arithmetic over Z[1/5], generator sets, and word-metric balls.

Group elements are square matrices with entries in Z[1/5], stored as an
integer matrix over a common denominator 5**exponent.  This makes equality
decidable and cheap, so ball enumeration deduplicates exactly: relations
between generators are discovered, never assumed.  Numerators are arbitrary
precision; the exponent grows linearly with word length, which keeps
enumeration practical up to radius ~12 for free generator pairs.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import BallSizeExceeded, InputError

DEFAULT_BALL_CAP = 2_000_000

_POW5_RE = re.compile(r"^\s*([+-]?\d+)\s*(?:/\s*(?:5\^(\d+)|(\d+)))?\s*$")


def _strip_pow5(n: int, limit: int) -> tuple[int, int]:
    """Divide factors of 5 out of n, at most `limit` times."""
    k = 0
    while k < limit and n % 5 == 0:
        n //= 5
        k += 1
    return n, k


@dataclass(frozen=True)
class Rational5:
    """Element of Z[1/5]: numerator / 5**exponent in lowest terms."""

    numerator: int
    exponent: int = 0

    def __post_init__(self):
        num = int(self.numerator)
        exp = int(self.exponent)
        if exp < 0:
            raise InputError("exponent must be non-negative")
        if num == 0:
            exp = 0
        elif exp > 0:
            num, stripped = _strip_pow5(num, exp)
            exp -= stripped
        object.__setattr__(self, "numerator", num)
        object.__setattr__(self, "exponent", exp)

    @classmethod
    def parse(cls, text):
        """Parse "n", "n/5^k", or "n/<power of 5>"."""
        if isinstance(text, Rational5):
            return text
        if isinstance(text, int):
            return cls(text)
        if isinstance(text, Fraction):
            return cls.from_fraction(text)
        m = _POW5_RE.match(str(text))
        if not m:
            raise InputError(f"cannot parse {text!r} as an element of Z[1/5]")
        num = int(m.group(1))
        if m.group(2) is not None:
            return cls(num, int(m.group(2)))
        if m.group(3) is not None:
            den = int(m.group(3))
            exp = 0
            while den % 5 == 0:
                den //= 5
                exp += 1
            if den != 1:
                raise InputError(f"denominator of {text!r} is not a power of 5")
            return cls(num, exp)
        return cls(num)

    @classmethod
    def from_fraction(cls, frac: Fraction):
        den = frac.denominator
        exp = 0
        while den % 5 == 0:
            den //= 5
            exp += 1
        if den != 1:
            raise InputError(f"{frac} is not in Z[1/5]")
        return cls(frac.numerator, exp)

    def as_fraction(self) -> Fraction:
        return Fraction(self.numerator, 5**self.exponent)

    def __add__(self, other):
        other = Rational5.parse(other)
        e = max(self.exponent, other.exponent)
        num = self.numerator * 5 ** (e - self.exponent) + other.numerator * 5 ** (
            e - other.exponent
        )
        return Rational5(num, e)

    __radd__ = __add__

    def __neg__(self):
        return Rational5(-self.numerator, self.exponent)

    def __sub__(self, other):
        return self + (-Rational5.parse(other))

    def __mul__(self, other):
        other = Rational5.parse(other)
        return Rational5(self.numerator * other.numerator, self.exponent + other.exponent)

    __rmul__ = __mul__

    def __float__(self):
        return self.numerator / 5**self.exponent

    def __str__(self):
        if self.exponent == 0:
            return str(self.numerator)
        return f"{self.numerator}/5^{self.exponent}"


def _mul_scaled(a: tuple, b: tuple, d: int) -> tuple:
    """Integer matrix product of row-major d x d tuples."""
    if d == 3:
        a0, a1, a2, a3, a4, a5, a6, a7, a8 = a
        b0, b1, b2, b3, b4, b5, b6, b7, b8 = b
        return (
            a0 * b0 + a1 * b3 + a2 * b6,
            a0 * b1 + a1 * b4 + a2 * b7,
            a0 * b2 + a1 * b5 + a2 * b8,
            a3 * b0 + a4 * b3 + a5 * b6,
            a3 * b1 + a4 * b4 + a5 * b7,
            a3 * b2 + a4 * b5 + a5 * b8,
            a6 * b0 + a7 * b3 + a8 * b6,
            a6 * b1 + a7 * b4 + a8 * b7,
            a6 * b2 + a7 * b5 + a8 * b8,
        )
    out = []
    for i in range(d):
        ai = a[i * d : (i + 1) * d]
        for j in range(d):
            out.append(sum(ai[k] * b[k * d + j] for k in range(d)))
    return tuple(out)


def _normalize_scaled(scaled: tuple, exp: int) -> tuple[tuple, int]:
    while exp > 0:
        for v in scaled:
            if v % 5:
                return scaled, exp
        scaled = tuple(v // 5 for v in scaled)
        exp -= 1
    return scaled, exp


def _int_det(rows: list[list[int]]) -> int:
    n = len(rows)
    if n == 1:
        return rows[0][0]
    if n == 2:
        return rows[0][0] * rows[1][1] - rows[0][1] * rows[1][0]
    det = 0
    rest = rows[1:]
    for j, pivot in enumerate(rows[0]):
        if pivot == 0:
            continue
        minor = [r[:j] + r[j + 1 :] for r in rest]
        term = pivot * _int_det(minor)
        det += term if j % 2 == 0 else -term
    return det


@dataclass(frozen=True)
class RationalMatrix:
    """Square matrix over Z[1/5], held as integers over a shared 5**exponent.

    The stored form is canonical (exponent zero, or some entry not divisible
    by five), so dataclass equality and hashing are exact group-element
    identity.
    """

    dim: int
    scaled: tuple
    exponent: int = 0

    def __post_init__(self):
        if self.dim < 1:
            raise InputError("dim must be positive")
        if len(self.scaled) != self.dim * self.dim:
            raise InputError("entry count does not match dim")
        if self.exponent < 0:
            raise InputError("exponent must be non-negative")
        scaled = tuple(int(v) for v in self.scaled)
        scaled, exp = _normalize_scaled(scaled, int(self.exponent))
        object.__setattr__(self, "scaled", scaled)
        object.__setattr__(self, "exponent", exp)

    @classmethod
    def identity(cls, dim: int):
        return cls(dim, tuple(1 if i == j else 0 for i in range(dim) for j in range(dim)))

    @classmethod
    def from_rows(cls, rows):
        entries = [[Rational5.parse(v) for v in row] for row in rows]
        dim = len(entries)
        if any(len(row) != dim for row in entries):
            raise InputError("matrix must be square")
        exp = max((e.exponent for row in entries for e in row), default=0)
        scaled = tuple(
            e.numerator * 5 ** (exp - e.exponent) for row in entries for e in row
        )
        return cls(dim, scaled, exp)

    def entry(self, i: int, j: int) -> Rational5:
        return Rational5(self.scaled[i * self.dim + j], self.exponent)

    @property
    def entries(self):
        d = self.dim
        return tuple(tuple(self.entry(i, j) for j in range(d)) for i in range(d))

    def transpose(self):
        d = self.dim
        scaled = tuple(self.scaled[j * d + i] for i in range(d) for j in range(d))
        return RationalMatrix(d, scaled, self.exponent)

    def __matmul__(self, other):
        if not isinstance(other, RationalMatrix):
            return NotImplemented
        if other.dim != self.dim:
            raise InputError("dimension mismatch")
        scaled = _mul_scaled(self.scaled, other.scaled, self.dim)
        return RationalMatrix(self.dim, scaled, self.exponent + other.exponent)

    def determinant(self) -> Rational5:
        d = self.dim
        rows = [list(self.scaled[i * d : (i + 1) * d]) for i in range(d)]
        return Rational5(_int_det(rows), d * self.exponent)

    def is_identity(self) -> bool:
        return self == RationalMatrix.identity(self.dim)

    def to_float(self) -> np.ndarray:
        arr = np.array(self.scaled, dtype=float).reshape(self.dim, self.dim)
        return arr / 5.0**self.exponent

    def __str__(self):
        rows = [" ".join(str(self.entry(i, j)) for j in range(self.dim)) for i in range(self.dim)]
        return "[" + "; ".join(rows) + "]"


def verify_special_orthogonal(m: RationalMatrix) -> bool:
    """Exact check that m^T m = I and det(m) = 1."""
    if m.transpose() @ m != RationalMatrix.identity(m.dim):
        return False
    return m.determinant() == Rational5(1)


@dataclass
class GeneratorSet:
    """Finite symmetric generating set: labelled matrices plus an involution.

    The involution pairs each label with the label of its inverse matrix
    (a label may be self-paired when the generator is an involution).
    Validated on construction: closed under inverse, no duplicate matrices,
    identity excluded.
    """

    generators: tuple
    involution: dict

    def __post_init__(self):
        self.generators = tuple((str(lab), mat) for lab, mat in self.generators)
        labels = [lab for lab, _ in self.generators]
        if len(set(labels)) != len(labels):
            raise InputError("duplicate generator labels")
        if not labels:
            self.involution = {}
            return
        dims = {mat.dim for _, mat in self.generators}
        if len(dims) != 1:
            raise InputError("generators have mixed dimensions")
        by_label = dict(self.generators)
        ident = RationalMatrix.identity(self.dim)
        for lab, mat in self.generators:
            if mat == ident:
                raise InputError(f"generator {lab!r} is the identity")
        mats = [mat for _, mat in self.generators]
        if len(set(mats)) != len(mats):
            raise InputError("duplicate generator matrices")
        for lab in labels:
            inv = self.involution.get(lab)
            if inv is None or inv not in by_label:
                raise InputError(f"generator set not closed under inverse: {lab!r} has no paired inverse")
            if self.involution.get(inv) != lab:
                raise InputError(f"involution is not involutive at {lab!r}")
            if by_label[inv] @ by_label[lab] != ident:
                raise InputError(f"generator set not closed under inverse: {inv!r} is not the inverse of {lab!r}")

    @property
    def dim(self) -> int:
        if not self.generators:
            raise InputError("empty generator set has no dimension")
        return self.generators[0][1].dim

    @property
    def labels(self):
        return tuple(lab for lab, _ in self.generators)

    def matrix(self, label: str) -> RationalMatrix:
        for lab, mat in self.generators:
            if lab == label:
                return mat
        raise InputError(f"unknown generator label {label!r}")

    def inverse_label(self, label: str) -> str:
        if label not in self.involution:
            raise InputError(f"unknown generator label {label!r}")
        return self.involution[label]

    def inverse_word(self, word) -> tuple:
        return tuple(self.involution[lab] for lab in reversed(word))

    def cache_key(self):
        return (
            self.labels,
            tuple(mat for _, mat in self.generators),
            tuple(sorted(self.involution.items())),
        )


def word_eval(word, gens: GeneratorSet) -> RationalMatrix:
    """Exact left-to-right product of the generators named by `word`."""
    if gens.generators:
        dim = gens.dim
    elif word:
        raise InputError("cannot evaluate a word over an empty generator set")
    else:
        raise InputError("empty generator set: dimension unknown for the empty word")
    out = RationalMatrix.identity(dim)
    for lab in word:
        out = out @ gens.matrix(lab)
    return out


# ---------------------------------------------------------------------------
# ball enumeration


class BallEnumerator:
    """Incremental breadth-first enumeration of word-metric balls.

    Elements are deduplicated exactly, so `length[i]` is the minimal word
    length of element i and witness words are reconstructed from BFS parent
    pointers.  Frontier order (insertion order x generator order) is
    deterministic and is part of the witness contract.

    The first non-backtracking collision bounds the girth of the Cayley
    graph of the *image* matrix group; the corresponding relator word is
    recorded.  For a free generator pair no relation is ever found.
    """

    def __init__(self, gens: GeneratorSet, cap: int = DEFAULT_BALL_CAP):
        self.gens = gens
        self.cap = cap
        self._labels = list(gens.labels)
        self._gen_packed = [(m.scaled, m.exponent) for _, m in gens.generators]
        self._inv_index = [
            self._labels.index(gens.involution[lab]) for lab in self._labels
        ]
        dim = gens.dim if gens.generators else 1
        self._dim = dim
        ident = RationalMatrix.identity(dim)
        key0 = (ident.exponent, ident.scaled)
        self._index = {key0: 0}
        self.keys = [key0]
        self.length = [0]
        self._parent = [-1]
        self._via = [-1]
        self.level_ids = [[0]]
        self.radius_done = 0
        self.exhausted = not gens.generators
        self.relation_girth = None
        self.relation_word = None
        self._float_cache = {}
        self._aux_cache = {}

    def __len__(self):
        return len(self.keys)

    def ensure_radius(self, radius: int):
        radius = int(radius)
        while self.radius_done < radius:
            if self.exhausted:
                self.level_ids.append([])
                self.radius_done += 1
                continue
            self._advance()

    def _advance(self):
        k = self.radius_done + 1
        d = self._dim
        index = self._index
        keys = self.keys
        length = self.length
        parent = self._parent
        via = self._via
        new_ids = []
        for uid in self.level_ids[k - 1]:
            u_exp, u_scaled = keys[uid]
            u_via = via[uid]
            for gi, (g_scaled, g_exp) in enumerate(self._gen_packed):
                prod = _mul_scaled(u_scaled, g_scaled, d)
                n_scaled, n_exp = _normalize_scaled(prod, u_exp + g_exp)
                key = (n_exp, n_scaled)
                existing = index.get(key)
                if existing is not None:
                    backtrack = u_via >= 0 and gi == self._inv_index[u_via]
                    if not backtrack:
                        girth = k + length[existing]
                        if self.relation_girth is None or girth < self.relation_girth:
                            self.relation_girth = girth
                            word = self.word_for(uid) + (self._labels[gi],)
                            self.relation_word = word + self.gens.inverse_word(
                                self.word_for(existing)
                            )
                    continue
                if len(keys) >= self.cap:
                    raise BallSizeExceeded(
                        f"ball enumeration cap {self.cap} reached at radius {k}",
                        partial_count=len(keys),
                        radius=k,
                    )
                new_id = len(keys)
                index[key] = new_id
                keys.append(key)
                length.append(k)
                parent.append(uid)
                via.append(gi)
                new_ids.append(new_id)
        self.level_ids.append(new_ids)
        self.radius_done = k
        if not new_ids:
            self.exhausted = True

    def ball_size(self, radius: int) -> int:
        self.ensure_radius(radius)
        return sum(len(self.level_ids[k]) for k in range(radius + 1))

    def sphere_sizes(self, radius: int):
        self.ensure_radius(radius)
        return [len(self.level_ids[k]) for k in range(radius + 1)]

    def word_for(self, element_id: int) -> tuple:
        word = []
        while element_id > 0:
            word.append(self._labels[self._via[element_id]])
            element_id = self._parent[element_id]
        return tuple(reversed(word))

    def matrix_for(self, element_id: int) -> RationalMatrix:
        exp, scaled = self.keys[element_id]
        return RationalMatrix(self._dim, scaled, exp)

    def lookup(self, matrix: RationalMatrix):
        """Element id of an exact matrix within the enumerated ball, or None."""
        return self._index.get((matrix.exponent, matrix.scaled))

    def level_matrix_array(self, k: int) -> np.ndarray:
        """Float (n_k, dim, dim) stack of the length-k elements."""
        arr = self._float_cache.get(k)
        if arr is None:
            self.ensure_radius(k)
            ids = self.level_ids[k]
            d = self._dim
            flat = np.array([self.keys[i][1] for i in ids], dtype=float)
            exps = np.array([self.keys[i][0] for i in ids], dtype=float)
            if len(ids) == 0:
                arr = np.zeros((0, d, d))
            else:
                arr = flat.reshape(len(ids), d, d) / (5.0**exps)[:, None, None]
            self._float_cache[k] = arr
        return arr


_ENUMERATORS = {}


def get_enumerator(gens: GeneratorSet, cap: int | None = None) -> BallEnumerator:
    """Shared per-generator-set enumerator; balls are reused across calls."""
    key = gens.cache_key()
    enum = _ENUMERATORS.get(key)
    if enum is None:
        enum = BallEnumerator(gens, cap or DEFAULT_BALL_CAP)
        _ENUMERATORS[key] = enum
    elif cap is not None and cap > enum.cap:
        enum.cap = cap
    return enum


@dataclass(frozen=True)
class GroupElement:
    matrix: RationalMatrix
    word_length: int
    witness_word: tuple


@dataclass
class GroupBall:
    """All distinct group elements of word length <= radius, in BFS order."""

    radius: int
    elements: list
    sphere_sizes: list
    relation_girth: int | None
    relation_word: tuple | None
    saturated: bool

    def __len__(self):
        return len(self.elements)

    @property
    def matrices(self):
        return [e.matrix for e in self.elements]


def group_ball(gens: GeneratorSet, radius: int, cap: int | None = None) -> GroupBall:
    """Enumerate B(radius) by breadth-first search with exact deduplication."""
    if radius < 0:
        raise InputError("radius must be non-negative")
    if not gens.generators:
        ident = GroupElement(RationalMatrix.identity(1), 0, ())
        return GroupBall(radius, [ident], [1] + [0] * radius, None, None, True)
    enum = get_enumerator(gens, cap)
    enum.ensure_radius(radius)
    elements = []
    for k in range(radius + 1):
        for eid in enum.level_ids[k]:
            elements.append(GroupElement(enum.matrix_for(eid), k, enum.word_for(eid)))
    saturated = enum.exhausted and any(
        not enum.level_ids[k] for k in range(1, radius + 1)
    )
    return GroupBall(
        radius,
        elements,
        enum.sphere_sizes(radius),
        enum.relation_girth,
        enum.relation_word,
        saturated,
    )


# ---------------------------------------------------------------------------
# generator library


def lps_sphere_generators() -> GeneratorSet:
    """Rotations by arccos(3/5) about the x- and z-axes of S^2.

    These lie in SO(3, Z[1/5]) and generate a free group of rank two; the
    induced action on the sphere has a spectral gap, which makes this the
    standard expanding instance at desk scale.
    """
    az = RationalMatrix.from_rows(
        [["3/5", "-4/5", "0"], ["4/5", "3/5", "0"], ["0", "0", "1"]]
    )
    ax = RationalMatrix.from_rows(
        [["1", "0", "0"], ["0", "3/5", "-4/5"], ["0", "4/5", "3/5"]]
    )
    return GeneratorSet(
        generators=(
            ("ax", ax),
            ("ax_inv", ax.transpose()),
            ("az", az),
            ("az_inv", az.transpose()),
        ),
        involution={"ax": "ax_inv", "ax_inv": "ax", "az": "az_inv", "az_inv": "az"},
    )


def circle_rotation_generators() -> GeneratorSet:
    """Single rational rotation of the circle by arccos(3/5).

    The angle is an irrational multiple of pi, so the group is infinite
    cyclic: an amenable negative control with no spectral gap.
    """
    rot = RationalMatrix.from_rows([["3/5", "-4/5"], ["4/5", "3/5"]])
    return GeneratorSet(
        generators=(("r", rot), ("r_inv", rot.transpose())),
        involution={"r": "r_inv", "r_inv": "r"},
    )


def finite_rotation_generators() -> GeneratorSet:
    """Quarter-turn of the circle: the order-4 degenerate control.

    Orders 3, 5, and 6 do not exist over Z[1/5] in dimension two (their
    cosines have denominators divisible by 2), so 4 is the canonical exact
    finite-order rotation of S^1.
    """
    rot = RationalMatrix.from_rows([["0", "-1"], ["1", "0"]])
    return GeneratorSet(
        generators=(("q", rot), ("q_inv", rot.transpose())),
        involution={"q": "q_inv", "q_inv": "q"},
    )


def cyclic_shift_generators(n: int = 5) -> GeneratorSet:
    """Coordinate n-cycle on S^(n-1); n must be odd so the determinant is 1."""
    if n % 2 == 0 or n < 3:
        raise InputError("cyclic shift needs odd n >= 3 to land in SO(n)")
    rows = [["1" if j == (i - 1) % n else "0" for j in range(n)] for i in range(n)]
    shift = RationalMatrix.from_rows(rows)
    return GeneratorSet(
        generators=(("c", shift), ("c_inv", shift.transpose())),
        involution={"c": "c_inv", "c_inv": "c"},
    )


BUILTIN_GENERATORS = {
    "lps_s2": lps_sphere_generators,
    "rot_s1": circle_rotation_generators,
    "rot4_s1": finite_rotation_generators,
    "cyclic5": cyclic_shift_generators,
}
