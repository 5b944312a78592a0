"""Exact Dobrushin interdependence matrices for small finite discrete models.

A DiscreteModel is an n-site model with per-site finite alphabets and a
strictly positive joint weight, normalized internally to a pmf.  Everything
here is exact enumeration: conditionals, total-variation sensitivities, the
entrywise-tight interdependence matrix, and the contraction matrix
B = (1 - 1/n) I + (1/n) D used by the coupling analysis.  Models too large to
enumerate raise EnumerationCapError rather than silently degrading to
sampling.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from math import prod

import numpy as np

DEFAULT_ENUM_CAP = 1_000_000


class EnumerationCapError(RuntimeError):
    """Raised when an exact enumeration would exceed the configured cap."""


class DiscreteModel:
    """n-site finite-alphabet model with exact conditional distributions.

    Two backends: a dense weight table over the product space (for generic or
    Ising-style weights) and a factorized product form that never materializes
    the table (so product models with large n still support sampling and
    conditionals).  The product-space size is always checked against
    ``enum_cap``.
    """

    def __init__(self, alphabets, *, table=None, site_pmfs=None,
                 enum_cap: int = DEFAULT_ENUM_CAP):
        self.alphabets = tuple(tuple(a) for a in alphabets)
        if not self.alphabets or any(len(a) < 1 for a in self.alphabets):
            raise ValueError("each site needs a nonempty alphabet")
        self.n = len(self.alphabets)
        self.sizes = tuple(len(a) for a in self.alphabets)
        self.enum_cap = int(enum_cap)
        self.size = prod(self.sizes)
        if self.size > self.enum_cap:
            raise EnumerationCapError(
                f"product space has {self.size} states, above cap {self.enum_cap}"
            )
        if (table is None) == (site_pmfs is None):
            raise ValueError("provide exactly one of table / site_pmfs")
        if table is not None:
            tab = np.asarray(table, dtype=float)
            if tab.shape != self.sizes:
                raise ValueError(f"table shape {tab.shape} != sizes {self.sizes}")
            if not (tab > 0).all():
                raise ValueError("weights must be strictly positive")
            tab = tab / tab.sum()
            tab.setflags(write=False)
            self._table = tab
            self._site_pmfs = None
        else:
            pmfs = []
            for i, p in enumerate(site_pmfs):
                arr = np.asarray(p, dtype=float)
                if arr.shape != (self.sizes[i],):
                    raise ValueError(f"site {i} pmf has wrong length")
                if not (arr > 0).all():
                    raise ValueError("site pmfs must be strictly positive")
                arr = arr / arr.sum()
                arr.setflags(write=False)
                pmfs.append(arr)
            self._table = None
            self._site_pmfs = tuple(pmfs)

    # -- constructors ------------------------------------------------------

    @classmethod
    def from_table(cls, alphabets, weights, enum_cap: int = DEFAULT_ENUM_CAP):
        return cls(alphabets, table=weights, enum_cap=enum_cap)

    @classmethod
    def from_product(cls, alphabets, site_pmfs, enum_cap: int = DEFAULT_ENUM_CAP):
        return cls(alphabets, site_pmfs=site_pmfs, enum_cap=enum_cap)

    @classmethod
    def from_ising(cls, coupling, field=None, values=(-1.0, 1.0),
                   enum_cap: int = DEFAULT_ENUM_CAP):
        """Pairwise model with weight exp(sum_{i<j} J_ij v_i v_j + sum_i h_i v_i)."""
        J = np.asarray(coupling, dtype=float)
        if J.ndim != 2 or J.shape[0] != J.shape[1]:
            raise ValueError("coupling must be a square matrix")
        n = J.shape[0]
        h = np.zeros(n) if field is None else np.asarray(field, dtype=float)
        if h.shape != (n,):
            raise ValueError("field has wrong length")
        alphabets = [tuple(values)] * n
        grids = np.meshgrid(*[np.asarray(values, dtype=float)] * n, indexing="ij")
        energy = np.zeros(tuple(len(values) for _ in range(n)))
        for i in range(n):
            energy += h[i] * grids[i]
            for j in range(i + 1, n):
                energy += J[i, j] * grids[i] * grids[j]
        energy -= energy.max()
        return cls(alphabets, table=np.exp(energy), enum_cap=enum_cap)

    # -- basic access ------------------------------------------------------

    @property
    def table(self) -> np.ndarray:
        """Dense joint pmf; materialized on demand for product models."""
        if self._table is not None:
            return self._table
        tab = self._site_pmfs[0]
        for p in self._site_pmfs[1:]:
            tab = np.multiply.outer(tab, p)
        tab.setflags(write=False)
        return tab

    def is_product(self, tol: float = 1e-12) -> bool:
        if self._site_pmfs is not None:
            return True
        marg = self.site_marginals()
        outer = marg[0]
        for p in marg[1:]:
            outer = np.multiply.outer(outer, p)
        return bool(np.abs(self.table - outer).max() <= tol)

    def site_marginals(self) -> list[np.ndarray]:
        if self._site_pmfs is not None:
            return [p.copy() for p in self._site_pmfs]
        out = []
        for i in range(self.n):
            axes = tuple(j for j in range(self.n) if j != i)
            out.append(self.table.sum(axis=axes))
        return out

    def values(self, config) -> tuple:
        """Map an index configuration to the site values it encodes."""
        return tuple(self.alphabets[i][int(c)] for i, c in enumerate(config))

    def config_from_flat(self, flat: int) -> tuple:
        return tuple(int(v) for v in np.unravel_index(int(flat), self.sizes))

    def flat_from_config(self, config) -> int:
        return int(np.ravel_multi_index(tuple(int(c) for c in config), self.sizes))

    def flat_pmf(self) -> np.ndarray:
        return self.table.reshape(-1)

    def conditional(self, i: int, config) -> np.ndarray:
        """Conditional pmf of site i given the other coordinates of ``config``."""
        if self._site_pmfs is not None:
            return self._site_pmfs[i].copy()
        slicer = tuple(slice(None) if j == i else int(config[j]) for j in range(self.n))
        vec = self._table[slicer]
        return vec / vec.sum()

    def sample(self, rng, size: int) -> np.ndarray:
        """Draw ``size`` index configurations, shape (size, n)."""
        rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
        if self._site_pmfs is not None:
            cols = [rng.choice(self.sizes[i], size=size, p=self._site_pmfs[i])
                    for i in range(self.n)]
            return np.stack(cols, axis=1)
        flat = rng.choice(self.size, size=size, p=self.flat_pmf())
        return np.stack(np.unravel_index(flat, self.sizes), axis=1)


# ---------------------------------------------------------------------------
# Conditional tables (shared with the coupling machinery)

def other_axes_strides(sizes, i: int) -> np.ndarray:
    """Row strides encoding a configuration of all sites except i (C order)."""
    other = [s for j, s in enumerate(sizes) if j != i]
    strides = np.ones(len(other), dtype=np.int64)
    for j in range(len(other) - 2, -1, -1):
        strides[j] = strides[j + 1] * other[j + 1]
    return strides


def conditional_table(model: DiscreteModel, i: int) -> np.ndarray:
    """All conditionals of site i at once, shape (prod(other sizes), m_i).

    Row r corresponds to the C-order flattening of the other coordinates,
    matching :func:`other_axes_strides`.
    """
    m = model.sizes[i]
    K = model.size // m
    if model._site_pmfs is not None:
        return np.broadcast_to(model._site_pmfs[i], (K, m))
    rows = np.moveaxis(model.table, i, -1).reshape(K, m)
    return rows / rows.sum(axis=1, keepdims=True)


# ---------------------------------------------------------------------------
# Total variation and the interdependence matrix

def tv_distance(p, q) -> float:
    """Half the l1 distance between two pmfs on the same support."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError("support mismatch")
    return 0.5 * float(np.abs(p - q).sum())


@dataclass(frozen=True)
class InterdependenceMatrix:
    """Nonnegative n x n sensitivity matrix with zero diagonal, entries in [0,1]."""

    entries: np.ndarray

    def __post_init__(self):
        D = np.asarray(self.entries, dtype=float)
        if D.ndim != 2 or D.shape[0] != D.shape[1]:
            raise ValueError("entries must be square")
        if np.abs(np.diagonal(D)).max(initial=0.0) != 0.0:
            raise ValueError("diagonal must be zero")
        if (D < 0).any() or (D > 1 + 1e-12).any():
            raise ValueError("entries must lie in [0, 1]")
        D = D.copy()
        D.setflags(write=False)
        object.__setattr__(self, "entries", D)

    @property
    def n(self) -> int:
        return self.entries.shape[0]


def _tv_pair_matrix(rows: np.ndarray) -> np.ndarray:
    # rows: (K, m) conditionals; output (K, K) of pairwise TV distances
    return 0.5 * np.abs(rows[:, None, :] - rows[None, :, :]).sum(axis=-1)


def dobrushin_matrix(model: DiscreteModel, tol: float = 1e-12) -> InterdependenceMatrix:
    """Entrywise-tight interdependence matrix from single-site variations.

    d_ij is the max total-variation change of the conditional at site i over
    configuration pairs differing only at site j.  Before returning, the
    defining multi-site inequality is re-verified exhaustively over all
    configuration pairs; a failure would indicate a numerical bug, so it
    raises ArithmeticError.
    """
    n = model.n
    D = np.zeros((n, n))
    for i in range(n):
        m = model.sizes[i]
        K = model.size // m
        if K * K > model.enum_cap:
            raise EnumerationCapError(
                f"pairwise check needs {K * K} pairs for site {i}, above cap"
            )
        rows = conditional_table(model, i)
        tv = _tv_pair_matrix(rows)
        other_sites = [j for j in range(n) if j != i]
        other_sizes = [model.sizes[j] for j in other_sites]
        digits = np.stack(np.unravel_index(np.arange(K), tuple(other_sizes)), axis=1)
        disagree = {}
        for pos, j in enumerate(other_sites):
            disagree[j] = digits[:, pos][:, None] != digits[:, pos][None, :]
        hamming = np.zeros((K, K), dtype=int)
        for j in other_sites:
            hamming += disagree[j]
        for j in other_sites:
            only_j = disagree[j] & (hamming == 1)
            D[i, j] = float(tv[only_j].max()) if only_j.any() else 0.0
        # exhaustive certification of the summed bound
        bound = np.zeros((K, K))
        for j in other_sites:
            bound += D[i, j] * disagree[j]
        worst = float((tv - bound).max())
        if worst > tol:
            raise ArithmeticError(
                f"defining inequality violated at site {i} by {worst:.3e}"
            )
    return InterdependenceMatrix(np.clip(D, 0.0, 1.0))


def matrix_norms(D) -> tuple[float, float]:
    """(max column absolute sum, max row absolute sum)."""
    arr = D.entries if isinstance(D, InterdependenceMatrix) else np.asarray(D, dtype=float)
    norm1 = float(np.abs(arr).sum(axis=0).max())
    norm_inf = float(np.abs(arr).sum(axis=1).max())
    return norm1, norm_inf


@dataclass(frozen=True)
class BMatrix:
    """Contraction matrix B = (1 - 1/n) I + (1/n) D."""

    entries: np.ndarray
    n: int

    def __post_init__(self):
        E = np.asarray(self.entries, dtype=float)
        if (E < 0).any():
            raise ValueError("entries must be nonnegative")
        E = E.copy()
        E.setflags(write=False)
        object.__setattr__(self, "entries", E)


def b_matrix(D, n: int) -> BMatrix:
    arr = D.entries if isinstance(D, InterdependenceMatrix) else np.asarray(D, dtype=float)
    if arr.shape != (n, n):
        raise ValueError(f"D must be {n} x {n}")
    return BMatrix((1.0 - 1.0 / n) * np.eye(n) + arr / n, n)


@dataclass(frozen=True)
class BPowerColumn:
    """B^k e(j) with its l1 norm and the geometric bound (|B|_1)^k."""

    vector: np.ndarray
    norm1: float
    norm1_bound: float


def b_power_column(B, k: int, j: int) -> BPowerColumn:
    """Column vector B^k e(j) by repeated multiplication; k >= 0."""
    if k < 0:
        raise ValueError("k must be >= 0")
    arr = B.entries if isinstance(B, BMatrix) else np.asarray(B, dtype=float)
    n = arr.shape[0]
    if not 0 <= j < n:
        raise ValueError("column index out of range")
    v = np.zeros(n)
    v[j] = 1.0
    for _ in range(k):
        v = arr @ v
    bnorm1 = matrix_norms(arr)[0]
    return BPowerColumn(v, float(np.abs(v).sum()), bnorm1 ** k)


@dataclass(frozen=True)
class NormRecursionReport:
    """Partial geometric sums of |B| norms against the closed-form limit."""

    b_norm1: float
    b_norm_inf: float
    partial_sum: float
    limit: float
    tail_bound_1: float
    tail_bound_inf: float
    kmax: int


def norm_recursion_check(D, n: int, kmax: int) -> NormRecursionReport:
    """Check sum_k (|B|_1^k + |B|_inf^k) against n(1/(1-|D|_1) + 1/(1-|D|_inf)).

    Requires both interdependence norms < 1.  The report carries geometric
    tail bounds |B|^(kmax+1) / (1 - |B|) for each norm.
    """
    if kmax < 0:
        raise ValueError("kmax must be >= 0")
    d1, dinf = matrix_norms(D)
    if max(d1, dinf) >= 1.0:
        raise ValueError("norm recursion requires max interdependence norm < 1")
    B = b_matrix(D, n)
    b1, binf = matrix_norms(B.entries)
    ks = np.arange(kmax + 1)
    partial = float((b1 ** ks).sum() + (binf ** ks).sum())
    limit = n * (1.0 / (1.0 - d1) + 1.0 / (1.0 - dinf))
    tail1 = b1 ** (kmax + 1) / (1.0 - b1)
    tail_inf = binf ** (kmax + 1) / (1.0 - binf)
    return NormRecursionReport(b1, binf, partial, limit, float(tail1), float(tail_inf), kmax)


# ---------------------------------------------------------------------------
# Model file format

def model_to_obj(model: DiscreteModel) -> dict:
    obj = {"n": model.n, "alphabets": [list(a) for a in model.alphabets]}
    if model._site_pmfs is not None:
        obj["weight"] = {"kind": "product",
                         "pmfs": [[float(x) for x in p] for p in model._site_pmfs]}
    else:
        obj["weight"] = {"kind": "table",
                         "values": [float(x) for x in model.table.reshape(-1)]}
    return obj


def model_from_obj(obj: dict, enum_cap: int = DEFAULT_ENUM_CAP) -> DiscreteModel:
    alphabets = [tuple(a) for a in obj["alphabets"]]
    weight = obj["weight"]
    kind = weight["kind"]
    if kind == "table":
        sizes = tuple(len(a) for a in alphabets)
        table = np.asarray(weight["values"], dtype=float).reshape(sizes)
        return DiscreteModel.from_table(alphabets, table, enum_cap=enum_cap)
    if kind == "product":
        return DiscreteModel.from_product(alphabets, weight["pmfs"], enum_cap=enum_cap)
    if kind == "ising":
        values = alphabets[0] if alphabets else (-1.0, 1.0)
        return DiscreteModel.from_ising(weight["coupling"], weight.get("field"),
                                        values=values, enum_cap=enum_cap)
    raise ValueError(f"unknown weight kind {kind!r}")


def save_model(path, model: DiscreteModel) -> None:
    with open(path, "w") as fh:
        json.dump(model_to_obj(model), fh, sort_keys=True)
        fh.write("\n")


def load_model(path, enum_cap: int = DEFAULT_ENUM_CAP) -> DiscreteModel:
    with open(path) as fh:
        return model_from_obj(json.load(fh), enum_cap=enum_cap)
