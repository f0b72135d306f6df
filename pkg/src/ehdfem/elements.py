"""Reference-triangle ingredients: Lagrange bases and Gauss quadrature.

Everything lives on the unit reference triangle with vertices (0,0), (1,0),
(0,1).  Barycentric coordinates are ``l0 = 1-x-y``, ``l1 = x``, ``l2 = y``.

Local node ordering
-------------------
* P1: the three vertices.
* P2: the three vertices followed by the edge midpoints, midpoint ``3+k``
  sitting on the edge opposite vertex ``k`` (so node 3 joins vertices 1-2,
  node 4 joins 2-0, node 5 joins 0-1).  This matches the edge numbering of
  :mod:`ehdfem.mesh`.

Quadrature rules are symmetric with strictly positive weights; the stored
weights sum to the reference area 1/2.  Orbit constants were refined with a
multiprecision Newton iteration on the exact moment equations, so monomials
integrate exactly to float64 roundoff.
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class QuadratureRule:
    """Point set on the reference triangle with positive weights."""

    points: np.ndarray  # (nq, 2)
    weights: np.ndarray  # (nq,), sums to 1/2
    degree: int  # highest total degree integrated exactly


def _orbit_s3():
    return [(1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0)]


def _orbit_s21(a):
    b = 1.0 - 2.0 * a
    return [(a, a, b), (a, b, a), (b, a, a)]


def _orbit_s111(a, b):
    c = 1.0 - a - b
    return [(a, b, c), (a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)]


def _rule(degree, orbits):
    pts, wts = [], []
    for rep, w in orbits:
        for lam in rep:
            pts.append((lam[1], lam[2]))  # (x, y) = (l1, l2)
            wts.append(0.5 * w)
    return QuadratureRule(
        points=np.array(pts, dtype=np.float64),
        weights=np.array(wts, dtype=np.float64),
        degree=degree,
    )


_SQRT15 = np.sqrt(15.0)

# Normalized orbit weights (sum over all points = 1).  The degree-4/6/8
# constants are correctly rounded doubles; degree 5 is in closed form.
_RULES = {
    1: _rule(1, [(_orbit_s3(), 1.0)]),
    2: _rule(2, [(_orbit_s21(1.0 / 6.0), 1.0 / 3.0)]),
    4: _rule(
        4,
        [
            (_orbit_s21(0.4459484909159648863183), 0.223381589678011465695),
            (_orbit_s21(0.09157621350977074345957), 0.1099517436553218676383),
        ],
    ),
    5: _rule(
        5,
        [
            (_orbit_s3(), 9.0 / 40.0),
            (_orbit_s21((6.0 + _SQRT15) / 21.0), (155.0 + _SQRT15) / 1200.0),
            (_orbit_s21((6.0 - _SQRT15) / 21.0), (155.0 - _SQRT15) / 1200.0),
        ],
    ),
    6: _rule(
        6,
        [
            (_orbit_s21(0.2492867451709104212916), 0.1167862757263793660253),
            (_orbit_s21(0.06308901449150222834033), 0.05084490637020681692094),
            (
                _orbit_s111(0.3103524510337844054166, 0.6365024991213986472301),
                0.08285107561837357519355,
            ),
        ],
    ),
    8: _rule(
        8,
        [
            (_orbit_s3(), 0.1443156076777871682511),
            (_orbit_s21(0.4592925882927231560288), 0.0950916342672846247939),
            (_orbit_s21(0.1705693077517602066223), 0.1032173705347182502818),
            (_orbit_s21(0.05054722831703097545842), 0.03245849762319808031093),
            (
                _orbit_s111(0.2631128296346381134218, 0.728492392955404281241),
                0.02723031417443499426484,
            ),
        ],
    ),
}

MAX_QUADRATURE_DEGREE = 8


def quadrature(min_degree):
    """Smallest stocked symmetric rule exact for ``min_degree``.

    Parameters
    ----------
    min_degree : int
        Requested total polynomial degree, between 1 and 8.

    Returns
    -------
    QuadratureRule
    """
    if not isinstance(min_degree, (int, np.integer)):
        raise ValueError(f"quadrature degree must be an integer, got {min_degree!r}")
    if min_degree < 1 or min_degree > MAX_QUADRATURE_DEGREE:
        raise ValueError(
            f"quadrature degree must be in [1, {MAX_QUADRATURE_DEGREE}], got {min_degree}"
        )
    for degree in sorted(_RULES):
        if degree >= min_degree:
            return _RULES[degree]
    raise AssertionError("unreachable")


def eval_basis(degree, points):
    """Evaluate Lagrange basis functions on the reference triangle.

    Parameters
    ----------
    degree : int
        1 or 2.
    points : array_like, shape (nq, 2)
        Reference coordinates.

    Returns
    -------
    values : ndarray, shape (nq, nb)
    grads : ndarray, shape (nq, nb, 2)
        Reference-coordinate gradients.
    """
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    x = points[:, 0]
    y = points[:, 1]
    l0 = 1.0 - x - y
    l1 = x
    l2 = y
    nq = points.shape[0]
    zeros = np.zeros(nq)
    ones = np.ones(nq)

    if degree == 1:
        values = np.stack([l0, l1, l2], axis=1)
        grads = np.empty((nq, 3, 2))
        grads[:, 0] = (-1.0, -1.0)
        grads[:, 1] = (1.0, 0.0)
        grads[:, 2] = (0.0, 1.0)
        return values, grads

    if degree == 2:
        values = np.stack(
            [
                l0 * (2.0 * l0 - 1.0),
                l1 * (2.0 * l1 - 1.0),
                l2 * (2.0 * l2 - 1.0),
                4.0 * l1 * l2,
                4.0 * l2 * l0,
                4.0 * l0 * l1,
            ],
            axis=1,
        )
        # d/dx, d/dy of the above via dl0 = (-1,-1), dl1 = (1,0), dl2 = (0,1)
        gx = np.stack(
            [
                1.0 - 4.0 * l0,
                4.0 * l1 - 1.0,
                zeros,
                4.0 * l2,
                -4.0 * l2,
                4.0 * (l0 - l1),
            ],
            axis=1,
        )
        gy = np.stack(
            [
                1.0 - 4.0 * l0,
                zeros,
                4.0 * l2 - 1.0,
                4.0 * l1,
                4.0 * (l0 - l2),
                -4.0 * l1,
            ],
            axis=1,
        )
        return values, np.stack([gx, gy], axis=2)

    raise ValueError(f"unsupported polynomial degree {degree} (expected 1 or 2)")


def reference_nodes(degree):
    """Node coordinates matching the local ordering of :func:`eval_basis`."""
    if degree == 1:
        return np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    if degree == 2:
        return np.array(
            [
                [0.0, 0.0],
                [1.0, 0.0],
                [0.0, 1.0],
                [0.5, 0.5],
                [0.0, 0.5],
                [0.5, 0.0],
            ]
        )
    raise ValueError(f"unsupported polynomial degree {degree} (expected 1 or 2)")
