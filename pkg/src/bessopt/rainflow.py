"""
Rainflow cycle counting for state-of-charge profiles.

A profile is the sequence of SoC points ``x_0, x_1, ..., x_T``; control step
``t`` (1-based) is the move from ``x_{t-1}`` to ``x_t``.  Cycles are extracted
with the four-point rule (``ds2 <= ds1 and ds2 <= ds3``) and whatever is left
over (the residue) is read as consecutive half cycles.

Two entry points are provided.  :func:`rainflow_cycles` returns a full
:class:`CycleDecomposition` including the timestep-to-cycle maps, and
:func:`cycle_endpoints` is the lean variant used inside the solvers, which
only reports which profile points bound each cycle.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

ATOL = 1e-12


@dataclass(frozen=True)
class CycleDecomposition:
    """Cycles of one SoC profile.

    Attributes
    ----------
    u, v, w : ndarray
        Depths of full cycles, residue charging half cycles and residue
        discharging half cycles.
    charge_index_map, discharge_index_map : dict
        ``{t: [(kind, index, amount), ...]}`` listing which cycle each step's
        SoC change belongs to.  ``kind`` is ``"u"`` (the charging or
        discharging half of full cycle ``index``), ``"v"`` or ``"w"``;
        ``amount`` is the SoC change attributed to that cycle.
    junctions : frozenset
        Steps whose SoC change is split between two or more cycles.
    """

    u: np.ndarray
    v: np.ndarray
    w: np.ndarray
    charge_index_map: dict = field(default_factory=dict)
    discharge_index_map: dict = field(default_factory=dict)
    junctions: frozenset = frozenset()

    def half_cycles(self):
        """Return the ``(v, w)`` view where each full cycle counts once in each."""
        return (np.concatenate([self.u, self.v]), np.concatenate([self.u, self.w]))

    def max_depth(self):
        depths = np.concatenate([self.u, self.v, self.w])
        return float(depths.max()) if depths.size else 0.0

    def __len__(self):
        return len(self.u) + len(self.v) + len(self.w)


def _as_points(x):
    # SoCProfile carries x0 separately; plain arrays are taken as-is
    if hasattr(x, "points"):
        return np.asarray(x.points(), dtype=float)
    return np.atleast_1d(np.asarray(x, dtype=float))


def extract_extrema(x, atol=ATOL):
    """Turning points of a profile, with its first and last points.

    Plateaus collapse onto their first index, so the returned values strictly
    alternate between local maxima and minima.

    Returns
    -------
    list of (int, float)
        ``(index, value)`` pairs.
    """
    idx = _extrema_indices(_as_points(x), atol)
    pts = _as_points(x)
    return [(int(i), float(pts[i])) for i in idx]


@njit(cache=True)
def _extrema_kernel(p, atol):
    n = len(p)
    keep = np.empty(max(n, 1), dtype=np.int64)
    if n == 0:
        return keep[:0]
    keep[0] = 0
    m = 1
    direction = 0
    for i in range(1, n):
        diff = p[i] - p[keep[m - 1]]
        if abs(diff) <= atol:
            continue
        step = 1 if diff > 0 else -1
        if direction != 0 and step == direction:
            keep[m - 1] = i
        else:
            keep[m] = i
            m += 1
        direction = step
    return keep[:m]


def _extrema_indices(p, atol=ATOL):
    return _extrema_kernel(np.ascontiguousarray(p, dtype=np.float64), atol)


def _four_point(stack):
    s1, s2, s3, s4 = stack[-4], stack[-3], stack[-2], stack[-1]
    d2 = abs(s2 - s3)
    return d2 <= abs(s1 - s2) + ATOL and d2 <= abs(s3 - s4) + ATOL


@njit(cache=True)
def _endpoints_kernel(p, atol):
    ext = _extrema_kernel(p, atol)
    n = len(ext)
    stack = np.empty(n, dtype=np.int64)
    full = np.empty((n, 2), dtype=np.int64)
    top = 0
    nfull = 0
    for k in range(n):
        stack[top] = ext[k]
        top += 1
        while top >= 4:
            s1 = p[stack[top - 4]]
            s2 = p[stack[top - 3]]
            s3 = p[stack[top - 2]]
            s4 = p[stack[top - 1]]
            d2 = abs(s2 - s3)
            if d2 <= abs(s1 - s2) + atol and d2 <= abs(s3 - s4) + atol:
                full[nfull, 0] = stack[top - 3]
                full[nfull, 1] = stack[top - 2]
                nfull += 1
                stack[top - 3] = stack[top - 1]
                top -= 2
            else:
                break
    return full[:nfull], stack[:top]


def cycle_endpoints(x):
    """Profile indices bounding every cycle.

    Returns
    -------
    full : ndarray of int, shape (n, 2)
        ``(i, j)`` with ``i < j`` for each full cycle; depth ``|x[j] - x[i]|``.
    residue : ndarray of int
        Indices of the residue points; consecutive pairs are half cycles.
    """
    p = np.ascontiguousarray(_as_points(x), dtype=np.float64)
    return _endpoints_kernel(p, ATOL)


def rainflow_half_cycles(x):
    """Charging and discharging half-cycle depths ``(v, w)``.

    Every full cycle contributes one charging and one discharging half of
    equal depth; residue pairs contribute a single half each.
    """
    dec = rainflow_cycles(x)
    return dec.half_cycles()


def rainflow_cycles(x):
    """Decompose a SoC profile into full and residue half cycles.

    Parameters
    ----------
    x : SoCProfile or array_like
        Profile points ``x_0 .. x_T``.

    Returns
    -------
    CycleDecomposition
    """
    p = _as_points(x)
    ext = _extrema_indices(p)

    # each stack range carries its (step, amount) pieces in time order;
    # amounts are signed SoC changes, all with the direction of the range
    ranges = []
    for a, b in zip(ext[:-1], ext[1:]):
        pieces = []
        for t in range(a + 1, b + 1):
            delta = p[t] - p[t - 1]
            if delta != 0.0:
                pieces.append([t, delta])
        ranges.append(pieces)

    u, full_pieces = [], []
    vals = [p[ext[0]]]
    rstack = []
    for k in range(1, len(ext)):
        vals.append(p[ext[k]])
        rstack.append(ranges[k - 1])
        while len(vals) >= 4 and _four_point(vals):
            s2, s3 = vals[-3], vals[-2]
            depth = abs(s2 - s3)
            r1, r2, r3 = rstack[-3], rstack[-2], rstack[-1]
            closing, rest = _split_pieces(r3, depth)
            u.append(depth)
            full_pieces.append((r2, closing))
            del vals[-3:-1]
            rstack[-3:] = [r1 + rest]

    v, w = [], []
    charge_map, discharge_map = {}, {}
    for i, (first, second) in enumerate(full_pieces):
        for pieces in (first, second):
            _attribute(pieces, "u", i, charge_map, discharge_map)
    for a, b, pieces in zip(vals[:-1], vals[1:], rstack):
        depth = abs(b - a)
        if depth <= ATOL:
            continue
        if b > a:
            _attribute(pieces, "v", len(v), charge_map, discharge_map)
            v.append(depth)
        else:
            _attribute(pieces, "w", len(w), charge_map, discharge_map)
            w.append(depth)

    junctions = frozenset(t for m in (charge_map, discharge_map)
                          for t, entries in m.items() if len(entries) > 1)
    return CycleDecomposition(
        u=np.asarray(u, dtype=float),
        v=np.asarray(v, dtype=float),
        w=np.asarray(w, dtype=float),
        charge_index_map=charge_map,
        discharge_index_map=discharge_map,
        junctions=junctions,
    )


def _split_pieces(pieces, depth):
    """Split a monotone piece list after its first ``depth`` of SoC travel."""
    head, tail = [], []
    remaining = depth
    for t, amount in pieces:
        size = abs(amount)
        if remaining <= 0.0:
            tail.append([t, amount])
        elif size <= remaining:
            head.append([t, amount])
            remaining -= size
        else:
            sign = 1.0 if amount > 0 else -1.0
            head.append([t, sign * remaining])
            tail.append([t, amount - sign * remaining])
            remaining = 0.0
    return head, tail


def _attribute(pieces, kind, index, charge_map, discharge_map):
    for t, amount in pieces:
        if abs(amount) <= ATOL:
            continue
        target = charge_map if amount > 0 else discharge_map
        target.setdefault(t, []).append((kind, index, abs(amount)))


def rainflow_from_dispatch(battery, tau, sched):
    """Cycles of the SoC path a schedule induces, started from zero.

    Cycle depths only depend on SoC differences, so the starting level does
    not matter.
    """
    c = np.asarray(sched.c, dtype=float)
    d = np.asarray(sched.d, dtype=float)
    delta = tau * battery.eta_c / battery.capacity * c - tau / (battery.eta_d * battery.capacity) * d
    return rainflow_cycles(np.concatenate([[0.0], np.cumsum(delta)]))
