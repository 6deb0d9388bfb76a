"""Isometries of the Euclidean plane.

An isometry is stored as an orthogonal linear part plus a translation.
Candidates for matching two finite point sets are synthesised from ordered
point pairs with equal distances: every such correspondence pins down
exactly two isometries, one orientation-preserving and one reflected.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .model import Location

__all__ = [
    "IDENTITY",
    "Isometry",
    "candidate_isometries",
    "compose",
    "invert",
    "map_location",
    "map_locations",
    "reflection_y_axis",
    "rotation",
    "translation",
]

Point = tuple[float, float]
Matrix = tuple[tuple[float, float], tuple[float, float]]

GEOMETRIC_TOL = 1e-6
ALGEBRAIC_TOL = 1e-9


@dataclass(frozen=True)
class Isometry:
    linear: Matrix
    offset: Point

    def apply(self, point: Point) -> Point:
        (a, b), (c, d) = self.linear
        x, y = point
        return (a * x + b * y + self.offset[0], c * x + d * y + self.offset[1])

    @property
    def determinant(self) -> float:
        (a, b), (c, d) = self.linear
        return a * d - b * c

    def is_orthogonal(self, tol: float = ALGEBRAIC_TOL) -> bool:
        (a, b), (c, d) = self.linear
        return (abs(a * a + c * c - 1.0) <= tol
                and abs(b * b + d * d - 1.0) <= tol
                and abs(a * b + c * d) <= tol)

    def is_identity(self, tol: float = ALGEBRAIC_TOL) -> bool:
        (a, b), (c, d) = self.linear
        tx, ty = self.offset
        return (abs(a - 1.0) <= tol and abs(d - 1.0) <= tol
                and abs(b) <= tol and abs(c) <= tol
                and abs(tx) <= tol and abs(ty) <= tol)

    @property
    def kind(self) -> str:
        """One of identity, translation, rotation, reflection or
        glide-reflection."""
        if self.is_identity():
            return "identity"
        if self.determinant > 0.0:
            (a, b), (c, d) = self.linear
            if abs(a - 1.0) <= ALGEBRAIC_TOL and abs(b) <= ALGEBRAIC_TOL:
                return "translation"
            return "rotation"
        # orientation-reversing: an involution is a pure reflection
        twice = compose(self, self)
        return "reflection" if twice.is_identity(1e-7) else "glide-reflection"

    def describe(self) -> str:
        (a, b), (c, d) = self.linear
        tx, ty = self.offset
        return (f"{self.kind}: linear [[{a:.9g}, {b:.9g}], [{c:.9g}, {d:.9g}]], "
                f"offset ({tx:.9g}, {ty:.9g})")


IDENTITY = Isometry(((1.0, 0.0), (0.0, 1.0)), (0.0, 0.0))


def translation(dx: float, dy: float) -> Isometry:
    return Isometry(((1.0, 0.0), (0.0, 1.0)), (dx, dy))


def rotation(angle: float) -> Isometry:
    c, s = math.cos(angle), math.sin(angle)
    return Isometry(((c, -s), (s, c)), (0.0, 0.0))


def reflection_y_axis() -> Isometry:
    return Isometry(((-1.0, 0.0), (0.0, 1.0)), (0.0, 0.0))


def compose(first: Isometry, second: Isometry) -> Isometry:
    """The isometry applying ``second`` and then ``first``."""
    (a1, b1), (c1, d1) = first.linear
    (a2, b2), (c2, d2) = second.linear
    linear = ((a1 * a2 + b1 * c2, a1 * b2 + b1 * d2),
              (c1 * a2 + d1 * c2, c1 * b2 + d1 * d2))
    moved = first.apply(second.offset)
    return Isometry(linear, moved)


def invert(iso: Isometry) -> Isometry:
    # the inverse of an orthogonal matrix is its transpose
    (a, b), (c, d) = iso.linear
    transpose = ((a, c), (b, d))
    tx, ty = iso.offset
    return Isometry(transpose, (-(a * tx + c * ty), -(b * tx + d * ty)))


def map_location(iso: Isometry, location: Location,
                 declared: dict[str, Location],
                 tol: float = GEOMETRIC_TOL) -> Location | None:
    """Apply to a location's point and match the image back to a declared
    location, or ``None`` when it lands on undeclared ground."""
    image = iso.apply(location.point)
    for candidate in declared.values():
        if math.dist(image, candidate.point) <= tol:
            return candidate
    return None


def map_locations(iso: Isometry, locations, declared: dict[str, Location],
                  tol: float = GEOMETRIC_TOL) -> list[Location | Point]:
    """Elementwise image of a location set; undeclared images stay raw points."""
    out: list[Location | Point] = []
    for location in sorted(locations, key=lambda l: l.name):
        matched = map_location(iso, location, declared, tol)
        out.append(matched if matched is not None else iso.apply(location.point))
    return out


def _from_complex(u: complex, t: complex, reflected: bool) -> Isometry:
    # z -> u*z + t (direct) or z -> u*conj(z) + t (reflected), |u| = 1
    a, b = u.real, u.imag
    if reflected:
        linear = ((a, b), (b, -a))
    else:
        linear = ((a, -b), (b, a))
    return Isometry(linear, (t.real, t.imag))


def _pair_isometries(a1: Point, a2: Point, b1: Point, b2: Point) -> list[Isometry]:
    za1, za2 = complex(*a1), complex(*a2)
    zb1, zb2 = complex(*b1), complex(*b2)
    direct_u = (zb2 - zb1) / (za2 - za1)
    reflected_u = (zb2 - zb1) / (za2 - za1).conjugate()
    return [
        _from_complex(direct_u, zb1 - direct_u * za1, reflected=False),
        _from_complex(reflected_u, zb1 - reflected_u * za1.conjugate(), reflected=True),
    ]


def _round_key(iso: Isometry) -> tuple:
    (a, b), (c, d) = iso.linear
    tx, ty = iso.offset
    return tuple(round(v, 9) + 0.0 for v in (a, b, c, d, tx, ty))


def candidate_isometries(points_a: list[Point], points_b: list[Point],
                         tol: float = GEOMETRIC_TOL) -> tuple[list[Isometry], str | None]:
    """Every isometry that could map one occupied point set onto another.

    Uses distance-matched ordered pairs; a single occupied point on each
    side yields the plain translation between them. Mismatched set sizes
    admit no bijective matching, reported through the note. Candidates are
    deduplicated and ordered deterministically: identity first, then
    orientation-reversing before orientation-preserving, then by rounded
    parameters.
    """
    set_a = sorted(set(points_a))
    set_b = sorted(set(points_b))
    if len(set_a) != len(set_b):
        return [], (f"no candidates: {len(set_a)} occupied locations cannot map "
                    f"onto {len(set_b)}")
    if not set_a:
        return [IDENTITY], None
    candidates: list[Isometry] = []
    if len(set_a) == 1:
        (ax, ay), (bx, by) = set_a[0], set_b[0]
        candidates.append(translation(bx - ax, by - ay))
    else:
        for a1 in set_a:
            for a2 in set_a:
                if a1 == a2:
                    continue
                for b1 in set_b:
                    for b2 in set_b:
                        if b1 == b2:
                            continue
                        if abs(math.dist(a1, a2) - math.dist(b1, b2)) > tol:
                            continue
                        candidates.extend(_pair_isometries(a1, a2, b1, b2))
    if _maps_onto(IDENTITY, set_a, set_b, tol):
        candidates.insert(0, IDENTITY)
    unique: dict[tuple, Isometry] = {}
    for iso in candidates:
        unique.setdefault(_round_key(iso), iso)
    ordered = sorted(unique.values(),
                     key=lambda iso: (not iso.is_identity(),
                                      round(iso.determinant, 9),
                                      _round_key(iso)))
    return ordered, None


def _maps_onto(iso: Isometry, set_a: list[Point], set_b: list[Point],
               tol: float) -> bool:
    for point in set_a:
        image = iso.apply(point)
        if not any(math.dist(image, target) <= tol for target in set_b):
            return False
    return True
