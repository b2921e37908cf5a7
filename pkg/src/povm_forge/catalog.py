"""Explicit minimal optimal POVMs for N = 2..7.

Every weight and angle is evaluated from its closed form at import time;
nothing is stored as a rounded decimal. Outcome order follows the table
index r = 1..n (stored 0-based).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .povm import Povm

PI = math.pi
SQRT5 = math.sqrt(5.0)
SQRT30 = math.sqrt(30.0)
SQRT105 = math.sqrt(105.0)


@dataclass(frozen=True)
class CatalogEntry:
    copies: int
    povm: Povm
    label: str
    provenance: str


def _poles():
    # r = 1, 2: north and south pole, psi = 0
    return [0.0, PI], [0.0, 0.0]


def _n2():
    w = [3.0 / 4.0] * 4
    t = [0.0] + [math.acos(-1.0 / 3.0)] * 3
    p = [0.0] + [(r - 2) * 2.0 * PI / 3.0 for r in range(2, 5)]
    return w, t, p


def _n3():
    w = [2.0 / 3.0] * 6
    t, p = _poles()
    t += [PI / 2.0] * 4
    p += [(r - 3) * PI / 2.0 for r in range(3, 7)]
    return w, t, p


def _n4():
    w = [5.0 / 12.0] * 2 + [25.0 / 48.0] * 8
    th3 = math.acos(1.0 / SQRT5)
    t, p = _poles()
    t += [th3] * 4 + [PI - th3] * 4
    p += [(r - 3) * PI / 2.0 for r in range(3, 7)]
    p += [(r - 6.5) * PI / 2.0 for r in range(7, 11)]
    return w, t, p


def _n5():
    w = [0.5] * 12
    th3 = math.acos(1.0 / SQRT5)
    t, p = _poles()
    t += [th3] * 5 + [PI - th3] * 5
    p += [(r - 3) * 2.0 * PI / 5.0 for r in range(3, 8)]
    p += [(r - 7.5) * 2.0 * PI / 5.0 for r in range(8, 13)]
    return w, t, p


def _n6():
    w_pole = 14.0 / 45.0
    w_plus = 7.0 * (410.0 + SQRT30) / 7200.0
    w_minus = 7.0 * (410.0 - SQRT30) / 7200.0
    w = [w_pole] * 2 + [w_plus] * 8 + [w_minus] * 8
    th3 = math.acos(math.sqrt(13.0 + 2.0 * SQRT30) / 7.0)
    th11 = math.acos(-math.sqrt(13.0 - 2.0 * SQRT30) / 7.0)
    t, p = _poles()
    t += [th3] * 4 + [PI - th3] * 4 + [th11] * 4 + [PI - th11] * 4
    p += [(r - 3) * PI / 2.0 for r in range(3, 7)]
    p += [(r - 6.5) * PI / 2.0 for r in range(7, 11)]
    # psi_r = psi_{r-8} for r = 11..18
    p += p[2:10]
    return w, t, p


def _n7():
    w_pole = 10.0 / 27.0
    w_plus = (147.0 + SQRT105) / 405.0
    w_minus = (147.0 - SQRT105) / 405.0
    w = [w_pole] * 2 + [w_plus] * 10 + [w_minus] * 10
    s = 3.0 * math.sqrt(3.0 / 35.0)
    th3 = math.acos(0.5 * math.sqrt(1.0 + s))
    th13 = math.acos(-0.5 * math.sqrt(1.0 - s))
    t, p = _poles()
    t += [th3] * 5 + [PI - th3] * 5 + [th13] * 5 + [PI - th13] * 5
    p += [(r - 3) * 2.0 * PI / 5.0 for r in range(3, 8)]
    p += [(r - 7.5) * 2.0 * PI / 5.0 for r in range(8, 13)]
    # psi_r = psi_{r-10} for r = 13..22
    p += p[2:12]
    return w, t, p


_BUILDERS = {
    2: (_n2, "tetrahedron"),
    3: (_n3, "octahedron"),
    4: (_n4, "twisted square prism with polar caps"),
    5: (_n5, "icosahedron"),
    6: (_n6, "poles plus four staggered square rings"),
    7: (_n7, "poles plus four staggered pentagonal rings"),
}

SUPPORTED_COPIES = tuple(sorted(_BUILDERS))


def catalog_get(copies: int) -> CatalogEntry:
    """Minimal optimal POVM for ``copies`` in 2..7.

    Raises
    ------
    ValueError
        For any other value of ``copies``.
    """
    try:
        build, label = _BUILDERS[int(copies)]
    except (KeyError, TypeError, ValueError):
        raise ValueError(f"no catalog entry for copies={copies!r}; "
                         f"supported: {', '.join(map(str, SUPPORTED_COPIES))}") from None
    w, t, p = build()
    povm = Povm.from_angles(copies, w, t, p)
    return CatalogEntry(int(copies), povm, label, f"minimal solution table, N={copies}, n={len(w)}")


def catalog_all() -> list[CatalogEntry]:
    return [catalog_get(n) for n in SUPPORTED_COPIES]
