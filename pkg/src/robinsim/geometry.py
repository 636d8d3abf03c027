"""Domain geometry: membership, boundary distance, projection, surface area.

Six bounded domain families share one small protocol so the block
decomposition, the series criteria and the reflected-walk engine never
branch on family internals:

* ``Cusp``              power-law horn  {0 < x1 < 1, |x_perp| < x1**alpha}
  capped by the plane x1 = 1.
* ``UnitBox``           open unit cube (0,1)**d.
* ``Disk``              open ball of radius R centered at the origin.
* ``FractalChannels2D`` unit square with a binary tree of ever thinner
  rectangular side channels attached to the right edge.
* ``FractalChannelsD``  same tree in d >= 3 built from circular tubes.
* ``SnowflakeCubes``    cube of edge 1 with shrinking face-centered cubes
  attached recursively, joined through small spherical passages.

Distances come in two flavors.  ``distance_to_boundary`` is exact (up to
root finding) and is what the tests pin down.  ``clearance_many`` is a
cheap certified lower bound used to size simulation steps; it may be
loose but must never exceed the true distance.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Union

import numpy as np

__all__ = [
    "GeometryError",
    "InvalidSpecError",
    "BStar",
    "Cusp",
    "UnitBox",
    "Disk",
    "FractalChannels2D",
    "FractalChannelsD",
    "SnowflakeCubes",
    "DomainSpec",
    "ball_volume",
    "sphere_area",
    "contains",
    "contains_many",
    "distance_to_boundary",
    "clearance_many",
    "project_to_closure",
    "project_many",
    "boundary_area_total",
    "anchor_point",
    "spec_to_json",
    "spec_from_json",
]


class GeometryError(ValueError):
    """Base class for invalid geometric input."""


class InvalidSpecError(GeometryError):
    """Domain parameters violate a documented invariant."""


def ball_volume(m: int, r: float = 1.0) -> float:
    """Volume of the m-dimensional ball of radius r."""
    return math.pi ** (m / 2.0) / math.gamma(m / 2.0 + 1.0) * r**m


def sphere_area(m: int, r: float = 1.0) -> float:
    """Surface measure of the m-sphere {|x| = r} in R^(m+1)."""
    return 2.0 * math.pi ** ((m + 1) / 2.0) / math.gamma((m + 1) / 2.0) * r**m


def _as_vec(p: Any, d: int) -> np.ndarray:
    q = np.asarray(p, dtype=np.float64)
    if q.shape != (d,):
        raise GeometryError(f"expected a point of dimension {d}, got shape {q.shape}")
    return q


def _as_batch(P: Any, d: int) -> np.ndarray:
    Q = np.asarray(P, dtype=np.float64)
    if Q.ndim == 1:
        Q = Q[None, :]
    if Q.ndim != 2 or Q.shape[1] != d:
        raise GeometryError(f"expected points of dimension {d}, got shape {Q.shape}")
    return Q


# --------------------------------------------------------------------------
# absorbing ball
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class BStar:
    """Closed absorbing ball kept strictly inside the domain."""

    center: tuple[float, ...]
    radius: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.radius) or self.radius <= 0.0:
            raise InvalidSpecError("absorbing ball needs a positive finite radius")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    @property
    def center_array(self) -> np.ndarray:
        return np.asarray(self.center, dtype=np.float64)


def _check_bstar(spec: "DomainSpec", bstar: BStar) -> None:
    c = np.asarray(bstar.center, dtype=np.float64)
    if c.shape != (spec.d,):
        raise InvalidSpecError("absorbing ball center dimension mismatch")
    gap = distance_to_boundary(spec, c)
    if not contains(spec, c) or gap <= bstar.radius:
        raise InvalidSpecError(
            "absorbing ball must sit strictly inside the domain "
            f"(boundary gap {gap:.6g} vs radius {bstar.radius:.6g})"
        )


# --------------------------------------------------------------------------
# cusp
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Cusp:
    """Axis-aligned power-law horn with a flat cap at x1 = 1."""

    d: int
    alpha: float
    bstar: BStar | None = None
    family = "cusp"

    def __post_init__(self) -> None:
        if int(self.d) != self.d or self.d < 2:
            raise InvalidSpecError("cusp needs integer dimension d >= 2")
        object.__setattr__(self, "d", int(self.d))
        if not (self.alpha > 1.0) or not math.isfinite(self.alpha):
            raise InvalidSpecError("cusp exponent must satisfy alpha > 1")
        if self.bstar is None:
            center = np.zeros(self.d)
            center[0] = 0.85
            gap = float(self.clearance_many(center[None, :])[0])
            object.__setattr__(self, "bstar", BStar(tuple(center), min(0.1, 0.5 * gap)))
        _check_bstar(self, self.bstar)

    # -- reduced coordinates: x along the axis, rho = |x_perp| --

    def _reduce(self, P: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        x = P[:, 0]
        rho = np.sqrt(np.sum(P[:, 1:] ** 2, axis=1))
        return x, rho

    def _profile(self, x: np.ndarray) -> np.ndarray:
        with np.errstate(invalid="ignore"):
            return np.where(x > 0.0, np.maximum(x, 0.0) ** self.alpha, 0.0)

    def contains_many(self, P: np.ndarray) -> np.ndarray:
        x, rho = self._reduce(P)
        return (x > 0.0) & (x < 1.0) & (rho < self._profile(x))

    def clearance_many(self, P: np.ndarray) -> np.ndarray:
        # certified: a curve point (t, t^alpha) with |t - x| = h differs
        # vertically by at most s*h on the window [0, x+g], so the squared
        # distance is at least h^2 + max(g - s*h, 0)^2 >= g^2 / (1 + s^2)
        x, rho = self._reduce(P)
        g = np.maximum(self._profile(x) - rho, 0.0)
        s = self.alpha * np.minimum(x + g, 1.0) ** (self.alpha - 1.0)
        side = g / np.sqrt(1.0 + s * s)
        return np.maximum(np.minimum(1.0 - x, side), 0.0)

    def _curve_distance(self, x: float, rho: float) -> tuple[float, float]:
        """Exact distance from the reduced point to the profile curve.

        Returns (distance, argmin parameter t).  Grid scan plus golden
        section refinement; the grid keeps multi-modal cases honest.
        """
        a = self.alpha

        def d2(t: np.ndarray) -> np.ndarray:
            return (t - x) ** 2 + (t**a - rho) ** 2

        grid = np.linspace(0.0, 1.0, 257)
        i = int(np.argmin(d2(grid)))
        lo = grid[max(i - 1, 0)]
        hi = grid[min(i + 1, len(grid) - 1)]
        phi = (math.sqrt(5.0) - 1.0) / 2.0
        t1 = hi - phi * (hi - lo)
        t2 = lo + phi * (hi - lo)
        f1 = float(d2(np.asarray(t1)))
        f2 = float(d2(np.asarray(t2)))
        for _ in range(90):
            if f1 <= f2:
                hi, t2, f2 = t2, t1, f1
                t1 = hi - phi * (hi - lo)
                f1 = float(d2(np.asarray(t1)))
            else:
                lo, t1, f1 = t1, t2, f2
                t2 = lo + phi * (hi - lo)
                f2 = float(d2(np.asarray(t2)))
        t = 0.5 * (lo + hi)
        return math.sqrt(float(d2(np.asarray(t)))), float(t)

    def distance_exact(self, p: np.ndarray) -> float:
        x = float(p[0])
        rho = float(np.sqrt(np.sum(p[1:] ** 2)))
        curve, _ = self._curve_distance(x, rho)
        if 0.0 < x < 1.0 and rho < x**self.alpha:
            return min(curve, 1.0 - x)
        cap = math.hypot(x - 1.0, max(rho - 1.0, 0.0))
        return min(curve, cap)

    def project_many(self, P: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        x, rho = self._reduce(P)
        a = self.alpha
        # unit direction in the perpendicular hyperplane; default axis for
        # points exactly on the x1 axis
        perp = P[:, 1:]
        safe = np.where(rho > 0.0, rho, 1.0)[:, None]
        u = np.where(rho[:, None] > 0.0, perp / safe, _axis_perp(self.d))

        t = _cusp_curve_root(a, x, rho)
        qc = np.zeros_like(P)
        qc[:, 0] = t
        qc[:, 1:] = (t**a)[:, None] * u
        dc = np.sqrt(np.sum((P - qc) ** 2, axis=1))

        qcap = np.zeros_like(P)
        qcap[:, 0] = 1.0
        qcap[:, 1:] = np.minimum(rho, 1.0)[:, None] * u
        dcap = np.sqrt(np.sum((P - qcap) ** 2, axis=1))

        use_cap = dcap < dc
        q = np.where(use_cap[:, None], qcap, qc)
        corr = np.where(use_cap, dcap, dc)
        n = _normal_from_projection(P, q, corr)
        return q, corr, n

    def boundary_normal(self, q: np.ndarray) -> np.ndarray:
        x = float(q[0])
        perp = q[1:]
        rho = float(np.sqrt(np.sum(perp**2)))
        u = perp / rho if rho > 0.0 else _axis_perp(self.d)[0]
        if abs(x - 1.0) < 1e-12 and rho < 1.0 - 1e-12:
            n = np.zeros(self.d)
            n[0] = -1.0
            return n
        g = self.alpha * x ** (self.alpha - 1.0) if x > 0.0 else 0.0
        n = np.zeros(self.d)
        n[0] = g
        n[1:] = -u
        if x <= 0.0:
            n[:] = 0.0
            n[0] = 1.0
            return n
        n /= math.sqrt(g * g + 1.0)
        if abs(x - 1.0) < 1e-12:
            # cap rim: average the two face normals
            m = np.zeros(self.d)
            m[0] = -1.0
            n = n + m
            n /= math.sqrt(float(np.sum(n**2)))
        return n

    def boundary_area_total(self) -> float:
        from scipy.integrate import quad

        a = self.alpha
        m = self.d - 2

        def integrand(t: float) -> float:
            return t ** (a * m) * math.sqrt(1.0 + a * a * t ** (2.0 * a - 2.0))

        lateral, _ = quad(integrand, 0.0, 1.0, epsabs=1e-13, epsrel=1e-12, limit=200)
        return sphere_area(m) * lateral + ball_volume(self.d - 1)

    def anchor(self) -> np.ndarray:
        return np.zeros(self.d)

    def json_payload(self) -> dict[str, Any]:
        return {"family": "cusp", "d": self.d, "alpha": self.alpha}


def _axis_perp(d: int) -> np.ndarray:
    u = np.zeros((1, d - 1))
    u[0, 0] = 1.0
    return u


def _normal_from_projection(P: np.ndarray, q: np.ndarray, corr: np.ndarray) -> np.ndarray:
    safe = np.where(corr > 0.0, corr, 1.0)[:, None]
    return np.where(corr[:, None] > 0.0, (q - P) / safe, 0.0)


def _cusp_curve_root(a: float, x: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """Closest-parameter equation solved by safeguarded Newton on [0, 1].

    Stationarity of (t-x)^2 + (t^a - rho)^2 reads
    f(t) = (t - x) + a t^(2a-1) - a rho t^(a-1) with f(0) <= 0 <= f(1)
    whenever a minimizer is interior; the bracket absorbs tip and cap.
    """
    lo = np.zeros_like(x)
    hi = np.ones_like(x)
    t = np.clip(x, 1e-9, 1.0 - 1e-9)

    def f(t: np.ndarray) -> np.ndarray:
        return (t - x) + a * t ** (2.0 * a - 1.0) - a * rho * t ** (a - 1.0)

    def fp(t: np.ndarray) -> np.ndarray:
        return 1.0 + a * (2.0 * a - 1.0) * t ** (2.0 * a - 2.0) - a * (a - 1.0) * rho * t ** (a - 2.0)

    for _ in range(60):
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            ft = f(t)
            hi = np.where(ft > 0.0, t, hi)
            lo = np.where(ft <= 0.0, t, lo)
            step = t - ft / fp(t)
            bad = ~np.isfinite(step) | (step <= lo) | (step >= hi)
            t = np.where(bad, 0.5 * (lo + hi), step)
    return t


# --------------------------------------------------------------------------
# unit box
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class UnitBox:
    """Open unit cube (0,1)^d."""

    d: int
    bstar: BStar | None = None
    family = "box"

    def __post_init__(self) -> None:
        if int(self.d) != self.d or self.d < 2:
            raise InvalidSpecError("box needs integer dimension d >= 2")
        object.__setattr__(self, "d", int(self.d))
        if self.bstar is None:
            object.__setattr__(self, "bstar", BStar((0.5,) * self.d, 0.25))
        _check_bstar(self, self.bstar)

    def contains_many(self, P: np.ndarray) -> np.ndarray:
        return np.all((P > 0.0) & (P < 1.0), axis=1)

    def clearance_many(self, P: np.ndarray) -> np.ndarray:
        m = np.minimum(P, 1.0 - P).min(axis=1)
        return np.maximum(m, 0.0)

    def distance_exact(self, p: np.ndarray) -> float:
        if bool(self.contains_many(p[None, :])[0]):
            return float(np.minimum(p, 1.0 - p).min())
        q = np.clip(p, 0.0, 1.0)
        out = math.sqrt(float(np.sum((p - q) ** 2)))
        if out == 0.0:
            return 0.0
        return out

    def project_many(self, P: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        q = np.clip(P, 0.0, 1.0)
        corr = np.sqrt(np.sum((P - q) ** 2, axis=1))
        return q, corr, _normal_from_projection(P, q, corr)

    def boundary_normal(self, q: np.ndarray) -> np.ndarray:
        n = np.zeros(self.d)
        lo = q <= 1e-12
        hi = q >= 1.0 - 1e-12
        n[lo] = 1.0
        n[hi] = -1.0
        s = math.sqrt(float(np.sum(n**2)))
        return n / s if s > 0.0 else n

    def boundary_area_total(self) -> float:
        return 2.0 * self.d

    def anchor(self) -> np.ndarray | None:
        return None

    def json_payload(self) -> dict[str, Any]:
        return {"family": "box", "d": self.d}


# --------------------------------------------------------------------------
# disk / ball
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Disk:
    """Open ball of radius R centered at the origin."""

    d: int
    R: float = 1.0
    bstar: BStar | None = None
    family = "disk"

    def __post_init__(self) -> None:
        if int(self.d) != self.d or self.d < 2:
            raise InvalidSpecError("disk needs integer dimension d >= 2")
        object.__setattr__(self, "d", int(self.d))
        if not (self.R > 0.0) or not math.isfinite(self.R):
            raise InvalidSpecError("disk radius must be positive and finite")
        if self.bstar is None:
            object.__setattr__(self, "bstar", BStar((0.0,) * self.d, 0.25 * self.R))
        _check_bstar(self, self.bstar)

    def contains_many(self, P: np.ndarray) -> np.ndarray:
        return np.sum(P**2, axis=1) < self.R * self.R

    def clearance_many(self, P: np.ndarray) -> np.ndarray:
        return np.maximum(self.R - np.sqrt(np.sum(P**2, axis=1)), 0.0)

    def distance_exact(self, p: np.ndarray) -> float:
        return abs(self.R - math.sqrt(float(np.sum(p**2))))

    def project_many(self, P: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        r = np.sqrt(np.sum(P**2, axis=1))
        safe = np.where(r > 0.0, r, 1.0)
        u = np.where(r[:, None] > 0.0, P / safe[:, None], np.eye(self.d)[:1])
        q = self.R * u
        corr = np.abs(r - self.R)
        return q, corr, _normal_from_projection(P, q, corr)

    def boundary_normal(self, q: np.ndarray) -> np.ndarray:
        r = math.sqrt(float(np.sum(q**2)))
        return -q / r if r > 0.0 else q

    def boundary_area_total(self) -> float:
        return sphere_area(self.d - 1, self.R)

    def anchor(self) -> np.ndarray | None:
        return None

    def json_payload(self) -> dict[str, Any]:
        return {"family": "disk", "d": self.d, "R": self.R}


# --------------------------------------------------------------------------
# channel tree shared construction
# --------------------------------------------------------------------------

_MAX_TREE_NODES = 1_000_000


@dataclass(frozen=True)
class _ChannelGen:
    """One generation of the channel tree, sorted by lateral offset."""

    k: int
    b: np.ndarray          # lateral offsets of channel floors / axes
    parent: np.ndarray     # index into generation k-1 (-1 for the root)


def _channel_gens(depth: int, branch_ok) -> list[_ChannelGen]:
    """Build kept channels per generation.

    branch_ok(k) says whether the offset child spawned at generation k+1
    still touches its parent; the straight child always does.
    """
    gens: list[_ChannelGen] = []
    b = np.array([0.0, 0.5])
    parent = np.array([-1, -1], dtype=np.int64)
    gens.append(_ChannelGen(1, b, parent))
    total = 2
    for k in range(1, depth):
        prev = gens[-1]
        if branch_ok(k):
            nb = np.concatenate([prev.b, prev.b + 2.0 ** -(k + 1)])
            npar = np.concatenate(
                [np.arange(len(prev.b)), np.arange(len(prev.b))]
            ).astype(np.int64)
        else:
            nb = prev.b.copy()
            npar = np.arange(len(prev.b), dtype=np.int64)
        order = np.argsort(nb, kind="stable")
        gens.append(_ChannelGen(k + 1, nb[order], npar[order]))
        total += len(nb)
        if total > _MAX_TREE_NODES:
            raise InvalidSpecError("channel tree too large; reduce depth or raise beta")
    return gens


def _a_cuts(alpha: float, depth: int) -> np.ndarray:
    """Generation break points a_1..a_(depth+1) along the channel axis."""
    a = np.zeros(depth + 2)
    a[1] = 1.0
    for k in range(1, depth + 1):
        a[k + 1] = a[k] + 2.0 ** (-k * alpha)
    return a


# --------------------------------------------------------------------------
# planar fractal channels
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class FractalChannels2D:
    """Unit square with a depth-truncated binary tree of side channels.

    Generation k channels occupy a_k <= x <= a_(k+1) with height 2^(-k*beta);
    a child is kept only when its entry face overlaps the parent channel.
    """

    alpha: float
    beta: float
    depth: int
    bstar: BStar | None = None
    family = "channels2d"
    d = 2

    def __post_init__(self) -> None:
        if not (self.alpha > 0.0 and math.isfinite(self.alpha)):
            raise InvalidSpecError("channels need alpha > 0")
        if not (self.beta > 1.0 and math.isfinite(self.beta)):
            raise InvalidSpecError("channels need beta > 1")
        if not self.beta > self.alpha:
            raise InvalidSpecError("channels need beta > alpha")
        if int(self.depth) != self.depth or self.depth < 1:
            raise InvalidSpecError("channels need integer depth >= 1")
        object.__setattr__(self, "depth", int(self.depth))
        gens = _channel_gens(self.depth, lambda k: 2.0 ** -(k + 1) < 2.0 ** (-k * self.beta))
        object.__setattr__(self, "_gens", gens)
        object.__setattr__(self, "_a", _a_cuts(self.alpha, self.depth))
        if self.bstar is None:
            object.__setattr__(self, "bstar", BStar((0.5, 0.5), 0.2))
        _check_bstar(self, self.bstar)

    def _h(self, k: int) -> float:
        return 2.0 ** (-k * self.beta)

    def _locate_gen(self, x: np.ndarray) -> np.ndarray:
        # gen 0 means the root square; depth+1 means beyond the tree
        a = self._a
        g = np.searchsorted(a[1:], x, side="left")
        g = np.where(x <= 0.0, self.depth + 1, g)
        g = np.where(x >= a[self.depth + 1], self.depth + 1, g)
        return g

    def contains_many(self, P: np.ndarray) -> np.ndarray:
        x, y = P[:, 0], P[:, 1]
        g = self._locate_gen(x)
        out = np.zeros(len(x), dtype=bool)
        root = g == 0
        out[root] = (x[root] > 0.0) & (x[root] < 1.0) & (y[root] > 0.0) & (y[root] < 1.0)
        for gen in self._gens:
            m = g == gen.k
            if not np.any(m):
                continue
            h = self._h(gen.k)
            i = np.searchsorted(gen.b, y[m], side="right") - 1
            i = np.clip(i, 0, len(gen.b) - 1)
            lo = gen.b[i]
            inside = (y[m] > lo) & (y[m] < lo + h)
            inside &= (x[m] > self._a[gen.k]) & (x[m] < self._a[gen.k + 1])
            out[m] = inside
        return out

    def _locate_box(self, x: float, y: float) -> tuple[int, int]:
        """(generation, index) of the channel containing the point; root is (0, 0)."""
        g = int(self._locate_gen(np.asarray([x]))[0])
        if g == 0:
            return 0, 0
        if g > self.depth:
            return -1, -1
        gen = self._gens[g - 1]
        i = int(np.clip(np.searchsorted(gen.b, y, side="right") - 1, 0, len(gen.b) - 1))
        if gen.b[i] < y < gen.b[i] + self._h(g):
            return g, i
        return -1, -1

    def clearance_many(self, P: np.ndarray) -> np.ndarray:
        # wall margin of the containing rectangle; passage seams count as
        # walls, which keeps the bound on the safe side
        x, y = P[:, 0], P[:, 1]
        g = self._locate_gen(x)
        out = np.zeros(len(x))
        root = g == 0
        out[root] = np.minimum.reduce(
            [x[root], 1.0 - x[root], y[root], 1.0 - y[root]]
        )
        for gen in self._gens:
            m = g == gen.k
            if not np.any(m):
                continue
            h = self._h(gen.k)
            i = np.clip(np.searchsorted(gen.b, y[m], side="right") - 1, 0, len(gen.b) - 1)
            lo = gen.b[i]
            d = np.minimum.reduce(
                [x[m] - self._a[gen.k], self._a[gen.k + 1] - x[m], y[m] - lo, lo + h - y[m]]
            )
            out[m] = d
        return np.maximum(out, 0.0)

    # -- exact wall segments ------------------------------------------------

    def _box_rect(self, g: int, i: int) -> tuple[float, float, float, float]:
        if g == 0:
            return 0.0, 1.0, 0.0, 1.0
        gen = self._gens[g - 1]
        return self._a[g], self._a[g + 1], float(gen.b[i]), float(gen.b[i]) + self._h(g)

    def _children(self, g: int, i: int) -> list[tuple[int, int]]:
        if g >= self.depth:
            return []
        if g == 0:
            return [(1, 0), (1, 1)]
        out = []
        for j, pj in enumerate(self._gens[g].parent):
            if pj == i:
                out.append((g + 1, j))
        return out

    def _parent(self, g: int, i: int) -> tuple[int, int] | None:
        if g <= 0:
            return None
        if g == 1:
            return (0, 0)
        return (g - 1, int(self._gens[g - 1].parent[i]))

    def _wall_segments(self, g: int, i: int) -> list[tuple[str, float, float, float]]:
        """Boundary segments of one channel: ('h'|'v', coord, lo, hi)."""
        x0, x1, y0, y1 = self._box_rect(g, i)
        segs: list[tuple[str, float, float, float]] = [
            ("h", y0, x0, x1),
            ("h", y1, x0, x1),
        ]
        if g == 0:
            segs.append(("v", 0.0, 0.0, 1.0))
            openings = [(self._box_rect(1, j)[2], self._box_rect(1, j)[3]) for j in (0, 1)] if self.depth >= 1 else []
            segs.extend(_face_minus(1.0, 0.0, 1.0, openings))
            return segs
        # entry face: open toward the parent over the overlap interval
        pg, pi = self._parent(g, i)
        _, _, py0, py1 = self._box_rect(pg, pi)
        ov_hi = min(py1, y1)
        segs.extend(_face_minus(x0, y0, y1, [(y0, ov_hi)] if ov_hi > y0 else []))
        # exit face: open toward kept children
        openings = []
        for cg, cj in self._children(g, i):
            _, _, cy0, cy1 = self._box_rect(cg, cj)
            lo, hi = max(y0, cy0), min(y1, cy1)
            if hi > lo:
                openings.append((lo, hi))
        segs.extend(_face_minus(x1, y0, y1, openings))
        return segs

    def _candidate_boxes(self, g: int, i: int) -> list[tuple[int, int]]:
        cands = [(g, i)]
        par = self._parent(g, i)
        if par:
            cands.append(par)
        cands.extend(self._children(g, i))
        return cands

    def distance_exact(self, p: np.ndarray) -> float:
        x, y = float(p[0]), float(p[1])
        g, i = self._locate_box(x, y)
        if g < 0:
            _, corr, _ = self._project_scalar(x, y)
            return corr
        best = math.inf
        for bg, bi in self._candidate_boxes(g, i):
            for seg in self._wall_segments(bg, bi):
                best = min(best, _seg_dist(seg, x, y))
        return best

    def _project_scalar(self, x: float, y: float) -> tuple[np.ndarray, float, np.ndarray]:
        best = math.inf
        q = np.array([x, y])
        rects = [self._box_rect(0, 0)]
        for gen in self._gens:
            for i in range(len(gen.b)):
                rects.append(self._box_rect(gen.k, i))
        for x0, x1, y0, y1 in rects:
            cx = min(max(x, x0), x1)
            cy = min(max(y, y0), y1)
            d = math.hypot(x - cx, y - cy)
            if d < best:
                best = d
                q = np.array([cx, cy])
        p = np.array([x, y])
        corr = best
        if corr > 0.0:
            n = (q - p) / corr
        else:
            n = np.zeros(2)
        return q, corr, n

    def project_many(self, P: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        q = np.empty_like(P)
        corr = np.empty(len(P))
        n = np.empty_like(P)
        for j in range(len(P)):
            q[j], corr[j], n[j] = self._project_scalar(float(P[j, 0]), float(P[j, 1]))
        return q, corr, n

    def boundary_normal(self, q: np.ndarray) -> np.ndarray:
        g, i = self._locate_box(float(q[0]), float(q[1]))
        if g < 0:
            return np.zeros(2)
        x0, x1, y0, y1 = self._box_rect(g, i)
        margins = np.array([q[0] - x0, x1 - q[0], q[1] - y0, y1 - q[1]])
        n = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])[int(np.argmin(margins))]
        return n

    def boundary_area_total(self) -> float:
        if self.alpha <= 1.0:
            return math.inf
        # idealized full binary tree: wall perimeters minus twice each
        # passage overlap, all sums geometric except finitely many branches
        qa = 2.0 ** (1.0 - self.alpha)
        qb = 2.0 ** (1.0 - self.beta)
        total = 4.0 + 2.0 * qa / (1.0 - qa) + 2.0 * qb / (1.0 - qb)
        h1 = 2.0 ** (-self.beta)
        openings = 2.0 * h1
        openings += 2.0 ** (-self.beta) * qb / (1.0 - qb)  # straight children
        k = 1
        while 2.0 ** -(k + 1) < 2.0 ** (-k * self.beta):
            ov = max(
                0.0,
                min(2.0 ** (-k * self.beta) - 2.0 ** -(k + 1), 2.0 ** (-(k + 1) * self.beta)),
            )
            openings += 2.0**k * ov
            k += 1
        return total - 2.0 * openings

    def anchor(self) -> np.ndarray:
        return np.array([1.0 / (1.0 - 2.0**-self.alpha), 0.0])

    def json_payload(self) -> dict[str, Any]:
        return {
            "family": "channels2d",
            "d": 2,
            "alpha": self.alpha,
            "beta": self.beta,
            "depth": self.depth,
        }


def _face_minus(
    x: float, lo: float, hi: float, openings: list[tuple[float, float]]
) -> list[tuple[str, float, float, float]]:
    """Vertical face at coordinate x minus open passage intervals."""
    segs = []
    cur = lo
    for a, b in sorted(openings):
        if a > cur:
            segs.append(("v", x, cur, a))
        cur = max(cur, b)
    if hi > cur:
        segs.append(("v", x, cur, hi))
    return segs


def _seg_dist(seg: tuple[str, float, float, float], x: float, y: float) -> float:
    kind, c, lo, hi = seg
    if kind == "v":
        along, across = y, x - c
    else:
        along, across = x, y - c
    over = max(lo - along, 0.0, along - hi)
    return math.hypot(across, over)


# --------------------------------------------------------------------------
# tube fractal channels, d >= 3
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class FractalChannelsD:
    """Unit cube with a binary tree of circular tubes on the face x1 = 1.

    Tube axes run along x1 at lateral offset (b, 0, ..., 0); generation k
    tubes have radius 2^(-k*beta).  A child is kept when its entry disk
    overlaps the parent's end disk.
    """

    d: int
    alpha: float
    beta: float
    depth: int
    bstar: BStar | None = None
    family = "channelsNd"

    def __post_init__(self) -> None:
        if int(self.d) != self.d or self.d < 3:
            raise InvalidSpecError("tube channels need integer dimension d >= 3")
        object.__setattr__(self, "d", int(self.d))
        if not (self.alpha > 0.0 and math.isfinite(self.alpha)):
            raise InvalidSpecError("channels need alpha > 0")
        if not (self.beta > 1.0 and math.isfinite(self.beta)):
            raise InvalidSpecError("channels need beta > 1")
        if not self.beta > self.alpha:
            raise InvalidSpecError("channels need beta > alpha")
        if int(self.depth) != self.depth or self.depth < 1:
            raise InvalidSpecError("channels need integer depth >= 1")
        object.__setattr__(self, "depth", int(self.depth))

        def branch_ok(k: int) -> bool:
            return 2.0 ** -(k + 1) < 2.0 ** (-k * self.beta) + 2.0 ** (-(k + 1) * self.beta)

        object.__setattr__(self, "_gens", _channel_gens(self.depth, branch_ok))
        object.__setattr__(self, "_a", _a_cuts(self.alpha, self.depth))
        if self.bstar is None:
            object.__setattr__(self, "bstar", BStar((0.5,) * self.d, 0.2))
        _check_bstar(self, self.bstar)

    def _R(self, k: int) -> float:
        return 2.0 ** (-k * self.beta)

    def _radial2(self, P: np.ndarray, b: np.ndarray) -> np.ndarray:
        r2 = (P[:, 1] - b) ** 2
        for j in range(2, self.d):
            r2 = r2 + P[:, j] ** 2
        return r2

    def contains_many(self, P: np.ndarray) -> np.ndarray:
        inside = np.all((P > 0.0) & (P < 1.0), axis=1)
        x = P[:, 0]
        a = self._a
        for gen in self._gens:
            R = self._R(gen.k)
            m = (x > a[gen.k]) & (x < a[gen.k + 1])
            if not np.any(m):
                continue
            i = np.clip(np.searchsorted(gen.b, P[m, 1]) , 0, len(gen.b) - 1)
            # nearest axis among the sorted offsets; tubes are far apart
            left = np.clip(i - 1, 0, len(gen.b) - 1)
            b_near = np.where(
                np.abs(P[m, 1] - gen.b[left]) < np.abs(P[m, 1] - gen.b[i]),
                gen.b[left],
                gen.b[i],
            )
            r2 = self._radial2(P[m], b_near)
            inside[m] |= r2 < R * R
        return inside

    def clearance_many(self, P: np.ndarray) -> np.ndarray:
        x = P[:, 0]
        a = self._a
        box = np.minimum(P, 1.0 - P).min(axis=1)
        out = np.maximum(box, 0.0)
        for gen in self._gens:
            R = self._R(gen.k)
            m = (x > a[gen.k]) & (x < a[gen.k + 1])
            if not np.any(m):
                continue
            i = np.clip(np.searchsorted(gen.b, P[m, 1]), 0, len(gen.b) - 1)
            left = np.clip(i - 1, 0, len(gen.b) - 1)
            b_near = np.where(
                np.abs(P[m, 1] - gen.b[left]) < np.abs(P[m, 1] - gen.b[i]),
                gen.b[left],
                gen.b[i],
            )
            r = np.sqrt(self._radial2(P[m], b_near))
            tube = np.minimum.reduce([R - r, P[m, 0] - a[gen.k], a[gen.k + 1] - P[m, 0]])
            out[m] = np.maximum(out[m], np.maximum(tube, 0.0))
        return out

    def _tube_cells(self) -> list[tuple[float, float, float, float]]:
        cells = []
        for gen in self._gens:
            for b in gen.b:
                cells.append((self._a[gen.k], self._a[gen.k + 1], float(b), self._R(gen.k)))
        return cells

    def _project_scalar(self, p: np.ndarray) -> tuple[np.ndarray, float, np.ndarray]:
        # nearest point on the closure of (box union tubes)
        q_box = np.clip(p, 0.0, 1.0)
        best = math.sqrt(float(np.sum((p - q_box) ** 2)))
        q = q_box
        for x0, x1, b, R in self._tube_cells():
            ax = min(max(float(p[0]), x0), x1)
            u = p[1:].copy()
            u[0] -= b
            r = math.sqrt(float(np.sum(u**2)))
            ur = u * (min(r, R) / r) if r > 0.0 else u * 0.0
            qt = np.empty_like(p)
            qt[0] = ax
            qt[1:] = ur
            qt[1] += b
            d = math.sqrt(float(np.sum((p - qt) ** 2)))
            if d < best:
                best = d
                q = qt
        corr = best
        n = (q - p) / corr if corr > 0.0 else np.zeros(self.d)
        return q, corr, n

    def project_many(self, P: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        q = np.empty_like(P)
        corr = np.empty(len(P))
        n = np.empty_like(P)
        for j in range(len(P)):
            q[j], corr[j], n[j] = self._project_scalar(P[j])
        return q, corr, n

    def _gen_children(self, k: int, b: float) -> list[float]:
        """Lateral offsets of kept children of the tube (k, b)."""
        if k >= self.depth:
            return []
        nxt = self._gens[k]
        cur = self._gens[k - 1]
        i = int(np.argmin(np.abs(cur.b - b)))
        return [float(nxt.b[j]) for j in range(len(nxt.b)) if nxt.parent[j] == i]

    def _seam_pieces(self) -> list[tuple[float, float, float, list[tuple[float, float]]]]:
        """Flat wall pieces at seam planes: (x, own_b, own_R, openings).

        own_R < 0 encodes the square root face; openings are in-plane
        disks (center offset along the x2 axis, radius).
        """
        pieces: list[tuple[float, float, float, list[tuple[float, float]]]] = []
        g1 = self._gens[0]
        pieces.append((1.0, 0.0, -1.0, [(float(b), self._R(1)) for b in g1.b]))
        for gen in self._gens:
            xf = self._a[gen.k + 1]
            for b in gen.b:
                opens = [(c, self._R(gen.k + 1)) for c in self._gen_children(gen.k, float(b))]
                pieces.append((xf, float(b), self._R(gen.k), opens))
        return pieces

    def distance_exact(self, p: np.ndarray) -> float:
        """Exact distance to the truncated boundary.

        The boundary decomposes into full flat root faces, tube laterals,
        and seam-plane pieces (disks or the root face minus passage
        openings).  The nearest boundary point is either interior to one
        of those pieces or on a passage rim circle, so the minimum over
        piece projections and rim projections is exact.
        """
        u = p[1:]
        best = math.inf
        # full root faces (every face except x1 = 1)
        for axis in range(self.d):
            for coord in (0.0, 1.0):
                if axis == 0 and coord == 1.0:
                    continue
                q = np.clip(p, 0.0, 1.0)
                q[axis] = coord
                best = min(best, math.sqrt(float(np.sum((p - q) ** 2))))
        # tube laterals
        for x0, x1, b, R in self._tube_cells():
            ax = max(x0 - p[0], 0.0, p[0] - x1)
            r = math.sqrt(float((p[1] - b) ** 2 + np.sum(p[2:] ** 2)))
            best = min(best, math.hypot(ax, r - R))
        # seam pieces and passage rims
        for xf, b0, R0, opens in self._seam_pieces():
            dx = abs(float(p[0]) - xf)
            in_open = any(_inplane_dist2(u, c) < r * r for c, r in opens)
            if R0 < 0.0:
                uc = np.clip(u, 0.0, 1.0)
                gap = math.sqrt(float(np.sum((u - uc) ** 2)))
                if not any(_inplane_dist2(uc, c) < r * r for c, r in opens):
                    best = min(best, math.hypot(dx, gap))
                on_face = bool(np.all((u > 0.0) & (u < 1.0)))
                for c, r in opens:
                    if not on_face and _inplane_dist2(u, c) < r * r:
                        best = min(best, dx)  # tube end pokes past the face
            else:
                du = math.sqrt(_inplane_dist2(u, b0))
                if du <= R0 and not in_open:
                    best = min(best, dx)
                for c, r in opens:
                    if _inplane_dist2(u, c) <= r * r and du > R0:
                        best = min(best, dx)  # child disk pokes past parent
            for c, r in opens:
                best = min(best, math.hypot(dx, _rim_gap(u, c, r)))
        return best

    def _inplane(self, p: np.ndarray) -> np.ndarray:
        return p[1:]

    def boundary_normal(self, q: np.ndarray) -> np.ndarray:
        if np.all((q > -1e-12) & (q < 1.0 + 1e-12)):
            n = np.zeros(self.d)
            lo = q <= 1e-12
            hi = q >= 1.0 - 1e-12
            n[lo] = 1.0
            n[hi] = -1.0
            s = math.sqrt(float(np.sum(n**2)))
            if s > 0.0:
                return n / s
        for x0, x1, b, R in self._tube_cells():
            u = q[1:].copy()
            u[0] -= b
            r = math.sqrt(float(np.sum(u**2)))
            if abs(r - R) < 1e-10 and x0 - 1e-10 <= q[0] <= x1 + 1e-10:
                n = np.zeros(self.d)
                n[1:] = -u / r
                return n
        return np.zeros(self.d)

    def boundary_area_total(self) -> float:
        # truncated trees in d >= 3 always have finite area; report the
        if self.alpha <= 1.0:
            return math.inf
        # idealized full-tree value with passage lenses removed
        d = self.d
        total = 2.0 * d
        lens_pairs = 0.0
        k = 1
        lateral = 0.0
        ends = 0.0
        while True:
            w = 2.0**k
            R = self._R(k)
            term_lat = w * sphere_area(d - 2, R) * 2.0 ** (-k * self.alpha)
            term_end = w * 2.0 * ball_volume(d - 1, R)
            lateral += term_lat
            ends += term_end
            if term_lat + term_end < 1e-18 * (total + lateral + ends) and k > 8:
                break
            if k > 20000:
                break
            k += 1
        openings = 0.0
        frac1 = 2.0 ** -(d - 2) + 2.0 ** -(d - 1)  # the two root entries
        openings += ball_volume(d - 1, self._R(1)) * frac1
        k = 1
        while True:
            w = 2.0**k
            straight = ball_volume(d - 1, self._R(k + 1))
            offset = _ball_lens_volume(d - 1, self._R(k), self._R(k + 1), 2.0 ** -(k + 1))
            term = w * (straight + offset)
            openings += term
            if term < 1e-18 * openings and k > 8:
                break
            if k > 20000:
                break
            k += 1
        return total + lateral + ends - 2.0 * openings

    def anchor(self) -> np.ndarray:
        z = np.zeros(self.d)
        z[0] = 1.0 / (1.0 - 2.0**-self.alpha)
        return z

    def json_payload(self) -> dict[str, Any]:
        return {
            "family": "channelsNd",
            "d": self.d,
            "alpha": self.alpha,
            "beta": self.beta,
            "depth": self.depth,
        }


def _inplane_dist2(u: np.ndarray, c: float) -> float:
    """Squared distance from an in-plane point to (c, 0, ..., 0)."""
    return float((u[0] - c) ** 2 + np.sum(u[1:] ** 2))


def _rim_gap(u: np.ndarray, c: float, r: float) -> float:
    """In-plane distance to the rim sphere of a disk centered on the axis."""
    return abs(math.sqrt(_inplane_dist2(u, c)) - r)


def _cap_volume(m: int, R: float, h: float) -> float:
    """Volume of an m-ball cap of height h (0 <= h <= 2R)."""
    from scipy.special import betainc

    if h <= 0.0:
        return 0.0
    if h >= 2.0 * R:
        return ball_volume(m, R)
    t = (2.0 * R * h - h * h) / (R * R)
    half = 0.5 * ball_volume(m, R) * float(betainc((m + 1) / 2.0, 0.5, t))
    return half if h <= R else ball_volume(m, R) - _cap_volume(m, R, 2.0 * R - h)


def _ball_lens_volume(m: int, R1: float, R2: float, dist: float) -> float:
    """Volume of the intersection of two m-balls with centers dist apart."""
    if dist >= R1 + R2:
        return 0.0
    if dist + min(R1, R2) <= max(R1, R2):
        return ball_volume(m, min(R1, R2))
    x = (dist * dist + R1 * R1 - R2 * R2) / (2.0 * dist)
    return _cap_volume(m, R1, R1 - x) + _cap_volume(m, R2, R2 - (dist - x))


# --------------------------------------------------------------------------
# snowflake cubes
# --------------------------------------------------------------------------

_MAX_CUBES = 40_000


@dataclass(frozen=True)
class SnowflakeCubes:
    """Recursive face-centered cube clusters joined by spherical passages.

    Generation k cubes have edge rho^k and sit centered on free faces of
    generation k-1 cubes; the open cubes stay pairwise disjoint and every
    parent/child face pair gains an open passage ball of radius
    2 * rho^((k-1) * beta) around the shared face center.
    """

    d: int
    rho: float
    beta: float
    depth: int
    bstar: BStar | None = None
    family = "snowflake"

    def __post_init__(self) -> None:
        if int(self.d) != self.d or self.d < 3:
            raise InvalidSpecError("snowflake needs integer dimension d >= 3")
        object.__setattr__(self, "d", int(self.d))
        if not (0.0 < self.rho < 0.5):
            raise InvalidSpecError("snowflake needs rho in (0, 1/2)")
        if not (self.beta > 1.0 and math.isfinite(self.beta)):
            raise InvalidSpecError("snowflake needs beta > 1")
        if int(self.depth) != self.depth or self.depth < 1:
            raise InvalidSpecError("snowflake needs integer depth >= 1")
        object.__setattr__(self, "depth", int(self.depth))
        object.__setattr__(self, "_tree_ready", False)
        if self.bstar is None:
            object.__setattr__(self, "bstar", BStar((0.0,) * self.d, 0.25))
        # containment of B_* inside the root cube is certified without the
        # tree; only an off-center ball forces materialization
        margin = 0.5 - float(np.max(np.abs(self.bstar.center_array))) - self.bstar.radius
        if margin <= 0.0:
            self._ensure_tree()
            _check_bstar(self, self.bstar)

    def _ensure_tree(self) -> None:
        """Materialize the cube family for point queries.

        The tree is cut off once the cube budget is reached; past that the
        missing cubes have edge below rho^materialized_depth, far under any
        probe scale the point operations are used at.
        """
        if self._tree_ready:
            return
        d = self.d
        cap = _MAX_CUBES
        C = np.zeros((cap, d))
        E = np.zeros(cap)
        G = np.zeros(cap, dtype=np.int64)
        face = np.zeros(cap, dtype=np.int64)
        n = 1
        E[0] = 1.0
        frontier = [0]
        materialized = 0
        for k in range(1, self.depth + 1):
            if n + len(frontier) * (2 * d - 1) > cap:
                break
            new_frontier = []
            e = self.rho**k
            for idx in frontier:
                c = C[idx]
                ep = E[idx]
                for axis in range(d):
                    for sign in (-1, 1):
                        code = sign * (axis + 1)
                        # face[idx] is the signed axis pointing back at the
                        # parent; that side is taken
                        if face[idx] != 0 and code == face[idx]:
                            continue
                        nc = c.copy()
                        nc[axis] += sign * (ep + e) / 2.0
                        if _cube_clashes(nc, e, C[:n], E[:n]):
                            continue
                        C[n] = nc
                        E[n] = e
                        G[n] = k
                        face[n] = -code
                        new_frontier.append(n)
                        n += 1
            frontier = new_frontier
            materialized = k
        object.__setattr__(self, "materialized_depth", materialized)
        object.__setattr__(self, "_centers", C[:n].copy())
        object.__setattr__(self, "_edges", E[:n].copy())
        object.__setattr__(self, "_gens", G[:n].copy())
        # passage balls: one per non-root cube, on the shared face center;
        # the nominal radius outgrows shallow cubes, so clamp it to stay
        # inside the pair it joins (the clamp is inert at every junction
        # narrow enough for the cross-cut criteria to use)
        balls_c = np.empty((n - 1, d))
        balls_r = np.empty(n - 1)
        for i in range(1, n):
            axis = abs(face[i]) - 1
            sign = -1 if face[i] < 0 else 1
            z = C[i].copy()
            z[axis] += sign * E[i] / 2.0
            balls_c[i - 1] = z
            nominal = 2.0 * self.rho ** ((G[i] - 1) * self.beta)
            balls_r[i - 1] = min(nominal, E[i] / 4.0)
        object.__setattr__(self, "_balls_c", balls_c)
        object.__setattr__(self, "_balls_r", balls_r)
        object.__setattr__(self, "_tree_ready", True)

    def contains_many(self, P: np.ndarray) -> np.ndarray:
        self._ensure_tree()
        out = np.zeros(len(P), dtype=bool)
        C, E = self._centers, self._edges
        for i in range(len(C)):
            m = ~out
            if not np.any(m):
                break
            half = E[i] / 2.0
            out[m] |= np.all(np.abs(P[m] - C[i]) < half, axis=1)
        if len(self._balls_r):
            for i in range(len(self._balls_r)):
                m = ~out
                if not np.any(m):
                    break
                r = self._balls_r[i]
                out[m] |= np.sum((P[m] - self._balls_c[i]) ** 2, axis=1) < r * r
        return out

    def clearance_many(self, P: np.ndarray) -> np.ndarray:
        # max over containing pieces of the piece's own inner margin: a
        # certified lower bound since the domain contains every piece
        self._ensure_tree()
        out = np.zeros(len(P))
        C, E = self._centers, self._edges
        for i in range(len(C)):
            half = E[i] / 2.0
            margin = half - np.abs(P - C[i]).max(axis=1)
            out = np.maximum(out, margin)
        for i in range(len(self._balls_r)):
            r = self._balls_r[i]
            margin = r - np.sqrt(np.sum((P - self._balls_c[i]) ** 2, axis=1))
            out = np.maximum(out, margin)
        return np.maximum(out, 0.0)

    def distance_exact(self, p: np.ndarray) -> float:
        """Certified lower bound; exact only from outside the closure."""
        inside = bool(self.contains_many(p[None, :])[0])
        if inside:
            return float(self.clearance_many(p[None, :])[0])
        _, corr, _ = self._project_scalar(p)
        return corr

    def _project_scalar(self, p: np.ndarray) -> tuple[np.ndarray, float, np.ndarray]:
        self._ensure_tree()
        best = math.inf
        q = p.copy()
        C, E = self._centers, self._edges
        for i in range(len(C)):
            half = E[i] / 2.0
            cand = np.clip(p, C[i] - half, C[i] + half)
            dd = math.sqrt(float(np.sum((p - cand) ** 2)))
            if dd < best:
                best, q = dd, cand
        for i in range(len(self._balls_r)):
            u = p - self._balls_c[i]
            r = math.sqrt(float(np.sum(u**2)))
            if r > self._balls_r[i]:
                cand = self._balls_c[i] + u * (self._balls_r[i] / r)
                dd = r - self._balls_r[i]
                if dd < best:
                    best, q = dd, cand
        n = (q - p) / best if best > 0.0 else np.zeros(self.d)
        return q, best, n

    def project_many(self, P: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        q = np.empty_like(P)
        corr = np.empty(len(P))
        n = np.empty_like(P)
        for j in range(len(P)):
            q[j], corr[j], n[j] = self._project_scalar(P[j])
        return q, corr, n

    def boundary_normal(self, q: np.ndarray) -> np.ndarray:
        self._ensure_tree()
        C, E = self._centers, self._edges
        for i in range(len(C)):
            half = E[i] / 2.0
            rel = q - C[i]
            if np.all(np.abs(rel) <= half + 1e-12):
                n = np.zeros(self.d)
                j = int(np.argmax(np.abs(rel)))
                n[j] = -math.copysign(1.0, rel[j])
                return n
        return np.zeros(self.d)

    def boundary_area_total(self) -> float:
        # idealized full tree: 2d(2d-1)^(k-1) cubes of edge rho^k per
        # generation, surface 2d e^(d-1) each; passage disks are ignored
        d = self.d
        r = (2.0 * d - 1.0) * self.rho ** (d - 1.0)
        if r >= 1.0:
            return math.inf
        per_gen = 2.0 * d * self.rho ** (d - 1.0) / (1.0 - r)
        return 2.0 * d * (1.0 + 2.0 * d * per_gen / (2.0 * d))  # root + descendants

    def anchor(self) -> np.ndarray:
        z = np.zeros(self.d)
        z[0] = 0.5 + self.rho / (1.0 - self.rho)
        return z

    def chain_junctions(self) -> tuple[np.ndarray, np.ndarray]:
        """Face centers z_k along the +x chain and their cube edges rho^k."""
        xs = np.zeros(self.depth + 1)
        x = 0.5
        xs[1] = x
        for k in range(2, self.depth + 1):
            x += self.rho ** (k - 1)
            xs[k] = x
        edges = self.rho ** np.arange(self.depth + 1)
        return xs[1:], edges[1:]

    def json_payload(self) -> dict[str, Any]:
        return {
            "family": "snowflake",
            "d": self.d,
            "rho": self.rho,
            "beta": self.beta,
            "depth": self.depth,
        }


def _cube_clashes(c: np.ndarray, e: float, centers: np.ndarray, edges: np.ndarray) -> bool:
    hit = np.abs(centers - c) < ((edges + e) / 2.0 - 1e-15)[:, None]
    return bool(np.any(np.all(hit, axis=1)))


# --------------------------------------------------------------------------
# dispatch API
# --------------------------------------------------------------------------

DomainSpec = Union[Cusp, UnitBox, Disk, FractalChannels2D, FractalChannelsD, SnowflakeCubes]

_FAMILIES: dict[str, type] = {
    "cusp": Cusp,
    "box": UnitBox,
    "disk": Disk,
    "channels2d": FractalChannels2D,
    "channelsNd": FractalChannelsD,
    "snowflake": SnowflakeCubes,
}


def contains(spec: DomainSpec, p: Any) -> bool:
    """Open-set membership; the absorbing ball is not carved out."""
    return bool(spec.contains_many(_as_batch(p, spec.d))[0])


def contains_many(spec: DomainSpec, P: Any) -> np.ndarray:
    return spec.contains_many(_as_batch(P, spec.d))


def distance_to_boundary(spec: DomainSpec, p: Any) -> float:
    return float(spec.distance_exact(_as_vec(p, spec.d)))


def clearance_many(spec: DomainSpec, P: Any) -> np.ndarray:
    """Certified lower bound on the distance to the domain boundary."""
    return spec.clearance_many(_as_batch(P, spec.d))


def project_to_closure(spec: DomainSpec, p: Any) -> tuple[np.ndarray, float, np.ndarray]:
    """(nearest closure point, correction distance, unit inward normal).

    Interior points return themselves with zero correction; boundary
    points report the inward normal of the supporting face.
    """
    v = _as_vec(p, spec.d)
    if contains(spec, v):
        return v.copy(), 0.0, np.zeros(spec.d)
    q, corr, n = spec.project_many(v[None, :])
    q, corr, n = q[0], float(corr[0]), n[0]
    if corr <= 1e-14:
        return v.copy(), 0.0, spec.boundary_normal(v)
    return q, corr, n


def project_many(spec: DomainSpec, P: Any) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Batch project_to_closure; interior rows pass through untouched."""
    P = _as_batch(P, spec.d)
    inside = spec.contains_many(P)
    q = P.astype(np.float64, copy=True)
    corr = np.zeros(len(P))
    n = np.zeros_like(q)
    out = ~inside
    if np.any(out):
        q[out], corr[out], n[out] = spec.project_many(P[out])
    return q, corr, n


def boundary_area_total(spec: DomainSpec) -> float:
    """Total surface measure; math.inf marks the non-rectifiable regimes."""
    return float(spec.boundary_area_total())


def anchor_point(spec: DomainSpec) -> np.ndarray | None:
    """Designated deepest boundary point of the fractal families."""
    return spec.anchor()


def spec_to_json(spec: DomainSpec) -> str:
    payload = spec.json_payload()
    payload["bstar"] = {"center": list(spec.bstar.center), "radius": spec.bstar.radius}
    return json.dumps(payload, sort_keys=True)


def spec_from_json(text: str | dict[str, Any]) -> DomainSpec:
    data = json.loads(text) if isinstance(text, str) else dict(text)
    fam = data.pop("family", None)
    if fam not in _FAMILIES:
        raise InvalidSpecError(f"unknown family {fam!r}")
    bs = data.pop("bstar", None)
    bstar = BStar(tuple(bs["center"]), float(bs["radius"])) if bs else None
    cls = _FAMILIES[fam]
    allowed = {
        "cusp": {"d", "alpha"},
        "box": {"d"},
        "disk": {"d", "R"},
        "channels2d": {"alpha", "beta", "depth", "d"},
        "channelsNd": {"d", "alpha", "beta", "depth"},
        "snowflake": {"d", "rho", "beta", "depth"},
    }[fam]
    extra = set(data) - allowed
    if extra:
        raise InvalidSpecError(f"unknown keys for {fam}: {sorted(extra)}")
    if fam == "channels2d":
        data.pop("d", None)
    kwargs = dict(data)
    if bstar is not None:
        kwargs["bstar"] = bstar
    return cls(**kwargs)
