"""Flattened inter-arrival model description shared by the two kernel backends.

A model is a finite mixture of shifted primitive components.  The descriptor
stores one row per component plus shared arrays for tabulated densities, so a
kernel can sample and evaluate the density without touching Python objects.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

KIND_EXPONENTIAL = 0
KIND_UNIFORM = 1
KIND_FOLDED_GAUSSIAN = 2
KIND_TABLE = 3


@dataclass(frozen=True, eq=False)
class ModelDesc:
    """Mixture of shifted components, flattened for the kernels.

    kinds[j]        component kind code
    shifts[j]       additive shift of component j (>= 0)
    p0[j], p1[j]    kind parameters: rate / (a, b) / unused / unused
    weights[j]      mixture weights, sum to 1
    wcum[j]         inclusive cumulative weights, wcum[-1] == 1
    tab_off[j]      first knot index of a TABLE component (0 otherwise)
    tab_len[j]      knot count of a TABLE component (0 otherwise)
    tab_t, tab_f    shared knot abscissae and normalized density values
    tab_c           normalized cumulative mass at the knots (tab_c[last] == 1)
    """

    kinds: np.ndarray
    shifts: np.ndarray
    p0: np.ndarray
    p1: np.ndarray
    weights: np.ndarray
    wcum: np.ndarray
    tab_off: np.ndarray
    tab_len: np.ndarray
    tab_t: np.ndarray
    tab_f: np.ndarray
    tab_c: np.ndarray

    @property
    def ncomp(self) -> int:
        return len(self.kinds)


def _as_f8(x) -> np.ndarray:
    return np.ascontiguousarray(x, dtype=np.float64)


def _as_i4(x) -> np.ndarray:
    return np.ascontiguousarray(x, dtype=np.int32)


def make_desc(components: list[dict]) -> ModelDesc:
    """Build a descriptor from per-component dicts.

    Each dict has "kind", "shift", "weight" and kind parameters ("rate",
    "a"/"b", or "t"/"f" arrays for tables).  Table densities are normalized
    here; the trapezoid masses define the cumulative array used for inversion
    sampling.
    """
    n = len(components)
    if n == 0:
        raise ValueError("model needs at least one component")
    kinds = np.zeros(n, dtype=np.int32)
    shifts = np.zeros(n)
    p0 = np.zeros(n)
    p1 = np.zeros(n)
    weights = np.zeros(n)
    tab_off = np.zeros(n, dtype=np.int32)
    tab_len = np.zeros(n, dtype=np.int32)
    tab_t: list[float] = []
    tab_f: list[float] = []
    tab_c: list[float] = []

    for j, comp in enumerate(components):
        kinds[j] = comp["kind"]
        shifts[j] = comp.get("shift", 0.0)
        weights[j] = comp.get("weight", 1.0)
        if shifts[j] < 0:
            raise ValueError("component shift must be nonnegative")
        if weights[j] <= 0:
            raise ValueError("component weight must be positive")
        kind = comp["kind"]
        if kind == KIND_EXPONENTIAL:
            rate = float(comp["rate"])
            if rate <= 0:
                raise ValueError("exponential rate must be positive")
            p0[j] = rate
        elif kind == KIND_UNIFORM:
            a, b = float(comp["a"]), float(comp["b"])
            if not 0 <= a < b:
                raise ValueError("uniform support needs 0 <= a < b")
            p0[j], p1[j] = a, b
        elif kind == KIND_FOLDED_GAUSSIAN:
            pass
        elif kind == KIND_TABLE:
            t = _as_f8(comp["t"])
            f = _as_f8(comp["f"])
            if len(t) < 2 or len(t) != len(f):
                raise ValueError("table needs matching t/f arrays, length >= 2")
            if np.any(np.diff(t) <= 0):
                raise ValueError("table knots must be strictly increasing")
            if t[0] < 0:
                raise ValueError("table support must lie in [0, inf)")
            if np.any(f < 0):
                raise ValueError("table density values must be nonnegative")
            seg = 0.5 * (f[1:] + f[:-1]) * np.diff(t)
            total = float(seg.sum())
            if total <= 0:
                raise ValueError("table density has zero mass")
            fn = f / total
            c = np.concatenate([[0.0], np.cumsum(seg / total)])
            c[-1] = 1.0
            tab_off[j] = len(tab_t)
            tab_len[j] = len(t)
            tab_t.extend(t.tolist())
            tab_f.extend(fn.tolist())
            tab_c.extend(np.minimum(c, 1.0).tolist())
        else:
            raise ValueError(f"unknown component kind {kind}")

    weights = weights / weights.sum()
    wcum = np.cumsum(weights)
    wcum[-1] = 1.0
    return ModelDesc(
        kinds=kinds,
        shifts=_as_f8(shifts),
        p0=_as_f8(p0),
        p1=_as_f8(p1),
        weights=_as_f8(weights),
        wcum=_as_f8(wcum),
        tab_off=_as_i4(tab_off),
        tab_len=_as_i4(tab_len),
        tab_t=_as_f8(tab_t),
        tab_f=_as_f8(tab_f),
        tab_c=_as_f8(tab_c),
    )


def shift_desc(desc: ModelDesc, s: float) -> ModelDesc:
    """Descriptor of the law shifted right by s >= 0."""
    if s < 0:
        raise ValueError("shift must be nonnegative")
    return ModelDesc(
        kinds=desc.kinds.copy(),
        shifts=desc.shifts + s,
        p0=desc.p0.copy(),
        p1=desc.p1.copy(),
        weights=desc.weights.copy(),
        wcum=desc.wcum.copy(),
        tab_off=desc.tab_off.copy(),
        tab_len=desc.tab_len.copy(),
        tab_t=desc.tab_t.copy(),
        tab_f=desc.tab_f.copy(),
        tab_c=desc.tab_c.copy(),
    )


def mixture_desc(pairs: list[tuple[float, ModelDesc]]) -> ModelDesc:
    """Descriptor of a finite mixture; weights are renormalized."""
    if not pairs:
        raise ValueError("mixture needs at least one component")
    total = sum(w for w, _ in pairs)
    if total <= 0:
        raise ValueError("mixture weights must be positive")
    kinds, shifts, p0, p1, weights = [], [], [], [], []
    tab_off, tab_len, tab_t, tab_f, tab_c = [], [], [], [], []
    for w, d in pairs:
        if w <= 0:
            raise ValueError("mixture weights must be positive")
        rebase = len(tab_t)
        tab_t.extend(d.tab_t.tolist())
        tab_f.extend(d.tab_f.tolist())
        tab_c.extend(d.tab_c.tolist())
        for j in range(d.ncomp):
            kinds.append(int(d.kinds[j]))
            shifts.append(float(d.shifts[j]))
            p0.append(float(d.p0[j]))
            p1.append(float(d.p1[j]))
            weights.append(w / total * float(d.weights[j]))
            if int(d.kinds[j]) == KIND_TABLE:
                tab_off.append(rebase + int(d.tab_off[j]))
            else:
                tab_off.append(0)
            tab_len.append(int(d.tab_len[j]))
    wcum = np.cumsum(weights)
    wcum[-1] = 1.0
    return ModelDesc(
        kinds=_as_i4(kinds),
        shifts=_as_f8(shifts),
        p0=_as_f8(p0),
        p1=_as_f8(p1),
        weights=_as_f8(weights),
        wcum=_as_f8(wcum),
        tab_off=_as_i4(tab_off),
        tab_len=_as_i4(tab_len),
        tab_t=_as_f8(tab_t),
        tab_f=_as_f8(tab_f),
        tab_c=_as_f8(tab_c),
    )
