"""Reference quadrature rules for triangles and edges."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# 6-point symmetric rule, exact for degree 4 (Dunavant). Barycentric points.
_A1, _W1 = 0.445948490915964886318329253883, 0.223381589678011465944967948497
_A2, _W2 = 0.091576213509770743459571463403, 0.109951743655321867638365384836


def _dunavant4():
    b1 = 1.0 - 2.0 * _A1
    b2 = 1.0 - 2.0 * _A2
    bary = np.array(
        [
            [_A1, _A1, b1],
            [_A1, b1, _A1],
            [b1, _A1, _A1],
            [_A2, _A2, b2],
            [_A2, b2, _A2],
            [b2, _A2, _A2],
        ]
    )
    weights = 0.5 * np.array([_W1] * 3 + [_W2] * 3)
    return bary, weights


@dataclass(frozen=True)
class QuadratureRules:
    """Triangle rule on the reference triangle (area 1/2) plus an edge rule on [0, 1].

    ``tri_bary`` holds barycentric coordinates (one row per point) and
    ``tri_weights`` sums to 1/2. ``edge_points`` are parameters in [0, 1] and
    ``edge_weights`` sums to 1; scale by the edge length when mapping.
    """

    tri_bary: np.ndarray
    tri_weights: np.ndarray
    edge_points: np.ndarray
    edge_weights: np.ndarray


def gauss_legendre_01(npts: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(npts)
    return 0.5 * (x + 1.0), 0.5 * w


def default_rules() -> QuadratureRules:
    bary, weights = _dunavant4()
    t, w = gauss_legendre_01(3)
    return QuadratureRules(tri_bary=bary, tri_weights=weights, edge_points=t, edge_weights=w)


DEFAULT_RULES = default_rules()
