"""Microstate spaces: the normalized l2 pseudometric rho2, topological and
measure-theoretic membership tests, enumeration, and randomized search.

A microstate candidate is an array of d model points: shape (d,) of point
indices for finite models, (d, sites) of residues for torus-grid models.
Batches stack candidates along a leading axis.

Thresholds are exact: built-in metrics carry squared distances as integers
over a common denominator, and every comparison against delta^2 is done by
integer cross-multiplication.  The membership rule is strict inequality with
the zero-distance case admitted (so exactly equivariant candidates pass at
every delta, including 0).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Sequence

import numpy as np

from .actions import (
    AlgebraicActionModel,
    AutomorphismAction,
    CompactGroupModel,
    FiniteGroupModel,
    TorusGridModel,
    product_model,
)
from .errors import BudgetExceededError, UnsupportedElementError, ValidationError
from .groups import GroupElement, SoficApproximation
from .measures import SiteMeasure, _point_indices, _points_from_indices


# ---------------------------------------------------------------------------
# pseudometrics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Pseudometric:
    """A pseudometric on model points via squared distances.

    Exact metrics store per-pair squared distances as ``num/den`` (finite
    models tabulate; torus metrics compute from residues).  ``exact=False``
    metrics store float squared distances.  ``generating_witness`` is the
    finite set of group elements certifying dynamical generation (the
    built-in metrics are genuine metrics, so the identity suffices).
    """

    name: str
    model: CompactGroupModel
    bi_invariant: bool
    exact: bool
    diam_sq: Fraction
    min_positive_sq: Fraction | None
    generating_witness: tuple = ()
    kind: str = "table"  # "table" | "torus" | "float-table"
    table_num: np.ndarray | None = field(default=None, repr=False)
    den: int = 1
    table_float: np.ndarray | None = field(default=None, repr=False)

    def sq(self, x, y) -> Fraction | float:
        """Squared distance between two points."""
        if self.kind == "torus":
            q = self.model.q
            dx = np.abs(np.asarray(x, dtype=np.int64) - np.asarray(y, dtype=np.int64))
            m = np.minimum(dx, q - dx)
            return Fraction(int((m * m).sum()), self.den)
        i = self._index(np.atleast_1d(np.asarray(x)))
        j = self._index(np.atleast_1d(np.asarray(y)))
        if self.kind == "table":
            return Fraction(int(self.table_num[int(i[0]), int(j[0])]), self.den)
        return float(self.table_float[int(i[0]), int(j[0])])

    def _index(self, pts: np.ndarray) -> np.ndarray:
        if isinstance(self.model, FiniteGroupModel):
            return np.atleast_1d(np.asarray(pts, dtype=np.int64))
        arr = np.asarray(pts, dtype=np.int64)
        if arr.ndim == 1:
            arr = arr[None, :]
        return _point_indices(self.model, arr)

    def distance(self, x, y) -> float:
        return math.sqrt(float(self.sq(x, y)))


def discrete_metric(model: FiniteGroupModel) -> Pseudometric:
    """0/1 metric on a finite model; bi-invariant, diameter 1."""
    n = model.n_points
    table = np.ones((n, n), dtype=np.int64) - np.eye(n, dtype=np.int64)
    table.setflags(write=False)
    return Pseudometric(
        name="discrete",
        model=model,
        bi_invariant=True,
        exact=True,
        diam_sq=Fraction(1),
        min_positive_sq=Fraction(1),
        kind="table",
        table_num=table,
        den=1,
    )


def torus_metric(model: TorusGridModel) -> Pseudometric:
    """Flat quotient metric, squared and averaged over sites:
    sq(x, y) = (1/sites) * sum_s (circle distance of (x_s - y_s)/q)^2."""
    q, s = model.q, model.sites
    half = q // 2
    return Pseudometric(
        name="torus-l2",
        model=model,
        bi_invariant=True,
        exact=True,
        diam_sq=Fraction(s * half * half, s * q * q),
        min_positive_sq=Fraction(1, s * q * q),
        kind="torus",
        den=s * q * q,
    )


def default_metric(model: CompactGroupModel) -> Pseudometric:
    if isinstance(model, FiniteGroupModel):
        return discrete_metric(model)
    return torus_metric(model)


def doubled_metric(metric: Pseudometric) -> Pseudometric:
    """The metric on X x X averaging the squared per-factor distances."""
    model2 = product_model(metric.model)
    if metric.kind == "torus":
        return torus_metric(model2)
    n = metric.model.n_points
    if metric.kind == "table":
        t = metric.table_num
        big = (
            t[:, None, :, None].repeat(n, 1).repeat(n, 3)
            + t[None, :, None, :].repeat(n, 0).repeat(n, 2)
        ).reshape(n * n, n * n)
        return Pseudometric(
            name=f"{metric.name}^2",
            model=model2,
            bi_invariant=metric.bi_invariant,
            exact=True,
            diam_sq=metric.diam_sq,
            min_positive_sq=(
                metric.min_positive_sq / 2 if metric.min_positive_sq is not None else None
            ),
            kind="table",
            table_num=big,
            den=2 * metric.den,
        )
    t = metric.table_float
    big = (t[:, None, :, None] + t[None, :, None, :]).reshape(n * n, n * n) / 2.0
    return Pseudometric(
        name=f"{metric.name}^2",
        model=model2,
        bi_invariant=metric.bi_invariant,
        exact=False,
        diam_sq=metric.diam_sq,
        min_positive_sq=None,
        kind="float-table",
        table_float=big,
    )


# -- rho2 ---------------------------------------------------------------------


def _pair_sq_num(metric: Pseudometric, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Per-candidate summed squared distances (numerators over metric.den).

    x, y are candidate arrays of matching shape (..., d[, sites]); the result
    sums over the final candidate axes and keeps the leading batch shape.
    """
    if metric.kind == "torus":
        q = metric.model.q
        dx = np.abs(x - y)
        m = np.minimum(dx, q - dx)
        # candidates carry a trailing sites axis: sum it together with d
        return (m * m).sum(axis=(-1, -2))
    if metric.kind == "table":
        return metric.table_num[x, y].sum(axis=-1)
    return metric.table_float[x, y].sum(axis=-1)


def rho2_sq(metric: Pseudometric, x: np.ndarray, y: np.ndarray) -> Fraction | float:
    """Exact squared rho2: the mean of squared point distances."""
    x = np.asarray(x, dtype=np.int64)
    y = np.asarray(y, dtype=np.int64)
    if x.shape != y.shape:
        raise ValidationError("rho2 needs equal-length candidates")
    d = x.shape[0]
    if metric.kind == "torus":
        q = metric.model.q
        dx = np.abs(x - y)
        m = np.minimum(dx, q - dx)
        return Fraction(int((m * m).sum()), d * metric.den)
    if metric.kind == "table":
        return Fraction(int(metric.table_num[x, y].sum()), d * metric.den)
    return float(metric.table_float[x, y].sum()) / d


def rho2(metric: Pseudometric, x: np.ndarray, y: np.ndarray) -> float:
    """The normalized l2 average of point distances, as a float."""
    return math.sqrt(float(rho2_sq(metric, x, y)))


def _lt_threshold(nums, count: int, metric: Pseudometric, delta: Fraction):
    """Vectorized test: (num / (count*den)) < delta^2, or num == 0."""
    if metric.kind == "float-table":
        vals = nums / count
        return (vals < float(delta) ** 2) | (nums == 0)
    dsq = delta * delta
    lhs = np.asarray(nums, dtype=object) * dsq.denominator
    rhs = dsq.numerator * count * metric.den
    return (lhs < rhs) | (np.asarray(nums) == 0)


# ---------------------------------------------------------------------------
# test functions and map windows
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TestFunction:
    """A bounded test function given by its values on model points.

    Exact functions carry integer values over a denominator; float functions
    carry a float table.  Values are indexed by point index.
    """

    name: str
    sup_norm: float
    values_num: np.ndarray | None = field(default=None, repr=False)
    values_den: int = 1
    values_float: np.ndarray | None = field(default=None, repr=False)

    @property
    def exact(self) -> bool:
        return self.values_num is not None

    def means(self, model: CompactGroupModel, xs: np.ndarray):
        """Empirical mean over coordinates for a batch of candidates.

        Returns (nums, den) with mean = num/den for exact functions, or a
        float array otherwise.  ``xs`` has shape (N, d[, sites]).
        """
        idx = _point_indices(model, xs) if not isinstance(model, FiniteGroupModel) else xs
        d = idx.shape[-1]
        if self.exact:
            return self.values_num[idx].sum(axis=-1), d * self.values_den
        return self.values_float[idx].mean(axis=-1)

    def integral(self, mu: SiteMeasure):
        """Exact (Fraction) or float integral against a site measure."""
        if self.exact:
            return mu.integral(self.values_num, self.values_den)
        return mu.integral_float(self.values_float)


def indicator_panel(model: CompactGroupModel, scale: Fraction = Fraction(1)) -> tuple[TestFunction, ...]:
    """Scaled indicator of every model point (finite and small-torus models)."""
    n = model.n_points
    out = []
    for i in range(n):
        num = np.zeros(n, dtype=np.int64)
        num[i] = scale.numerator
        out.append(
            TestFunction(
                name=f"ind[{i}]",
                sup_norm=float(scale),
                values_num=num,
                values_den=scale.denominator,
            )
        )
    return tuple(out)


def character_panel(model: CompactGroupModel, freqs: Sequence[int] = (1,), scale: Fraction = Fraction(1)) -> tuple[TestFunction, ...]:
    """Real/imaginary parts of low-frequency characters (float-valued).

    Finite models with integer labels use exp(2 pi i k x / n); dual models
    with rational-tuple labels and torus grids use the first coordinate.
    """
    out = []
    n = model.n_points
    if isinstance(model, FiniteGroupModel):
        labels = model.labels
        if labels and isinstance(labels[0], tuple):
            phases = np.array([float(l[0]) for l in labels])
        else:
            phases = np.array([float(int(l)) / n for l in labels])
    else:
        pts = _points_from_indices(model, np.arange(n))
        phases = pts[:, 0] / model.q
    for k in freqs:
        for part, fn in (("re", np.cos), ("im", np.sin)):
            out.append(
                TestFunction(
                    name=f"chi{k}.{part}",
                    sup_norm=float(scale),
                    values_float=float(scale) * fn(2 * np.pi * k * phases),
                )
            )
    return tuple(out)


def default_panel(model: CompactGroupModel, scale: Fraction = Fraction(1)) -> tuple[TestFunction, ...]:
    """Indicators plus a low-frequency character pair; the documented default."""
    fns = []
    if model.n_points <= 16:
        fns.extend(indicator_panel(model, scale))
    fns.extend(character_panel(model, freqs=(1,), scale=scale))
    return tuple(fns)


@dataclass(frozen=True)
class MapWindow:
    """The (F, delta, L, mu) data cutting out Map_mu inside X^d."""

    F: tuple[GroupElement, ...]
    delta: Fraction
    L: tuple[TestFunction, ...]
    target: SiteMeasure

    def __post_init__(self):
        if self.delta < 0:
            raise ValidationError("delta must be >= 0")
        object.__setattr__(self, "delta", Fraction(self.delta))


# ---------------------------------------------------------------------------
# membership
# ---------------------------------------------------------------------------


def _check_window_support(sigma: SoficApproximation, F: Iterable[GroupElement]):
    for g in F:
        if g not in sigma.table:
            raise UnsupportedElementError(g, "window F must lie in sigma support")


def top_microstate_mask(
    xs: np.ndarray,
    sigma: SoficApproximation,
    F: Sequence[GroupElement],
    delta: Fraction,
    metric: Pseudometric,
    action: AutomorphismAction,
) -> np.ndarray:
    """Vectorized Map membership for a candidate batch of shape (N, d[, sites])."""
    _check_window_support(sigma, F)
    delta = Fraction(delta)
    N, d = xs.shape[0], xs.shape[1]
    ok = np.ones(N, dtype=bool)
    for g in F:
        moved = action.act_candidates(g, xs)
        permuted = xs[:, sigma.perm(g)]
        nums = _pair_sq_num(metric, moved, permuted)
        ok &= np.asarray(_lt_threshold(nums, d, metric, delta), dtype=bool)
    return ok


def is_top_microstate(
    x: np.ndarray,
    sigma: SoficApproximation,
    F: Sequence[GroupElement],
    delta,
    metric: Pseudometric,
    action: AutomorphismAction,
) -> bool:
    """rho2(g.x, x o sigma(g)) < delta for every g in F (zero admitted)."""
    return bool(
        top_microstate_mask(np.asarray(x)[None, ...], sigma, F, Fraction(delta), metric, action)[0]
    )


def meas_microstate_mask(
    xs: np.ndarray,
    sigma: SoficApproximation,
    window: MapWindow,
    metric: Pseudometric,
    action: AutomorphismAction,
) -> np.ndarray:
    """Map_mu membership: topological membership plus the L-panel conditions."""
    ok = top_microstate_mask(xs, sigma, window.F, window.delta, metric, action)
    model = metric.model
    delta = window.delta
    for f in window.L:
        target = f.integral(window.target)
        res = f.means(model, xs)
        if f.exact:
            nums, den = res
            # |num/den - target| < delta, via integers
            t = Fraction(target)
            lhs = np.abs(np.asarray(nums, dtype=object) * t.denominator - t.numerator * den)
            bound = delta.numerator * den * t.denominator
            ok &= (lhs * delta.denominator < bound) | (lhs == 0)
        else:
            gap = np.abs(res - float(target))
            ok &= (gap < float(delta)) | (gap == 0)
    return ok


def is_meas_microstate(
    x: np.ndarray,
    sigma: SoficApproximation,
    window: MapWindow,
    metric: Pseudometric,
    action: AutomorphismAction,
) -> bool:
    return bool(
        meas_microstate_mask(np.asarray(x)[None, ...], sigma, window, metric, action)[0]
    )


# ---------------------------------------------------------------------------
# enumeration
# ---------------------------------------------------------------------------


def _all_candidates(model: CompactGroupModel, d: int, budget: int) -> np.ndarray:
    n = model.n_points
    total = n**d
    if total > budget:
        raise BudgetExceededError(total, budget, "candidate enumeration")
    flat = np.arange(total, dtype=np.int64)
    digits = np.empty((total, d), dtype=np.int64)
    rem = flat
    for k in range(d - 1, -1, -1):
        digits[:, k] = rem % n
        rem = rem // n
    if isinstance(model, FiniteGroupModel):
        return digits
    return _points_from_indices(model, digits)


def _sorted_candidates(model: CompactGroupModel, xs: np.ndarray) -> np.ndarray:
    if xs.shape[0] <= 1:
        return xs
    flat = xs.reshape(xs.shape[0], -1)
    order = np.lexsort(flat.T[::-1])
    return xs[order]


def forces_exact_equivariance(metric: Pseudometric, delta: Fraction, d: int) -> bool:
    """Whether a single violated coordinate already exceeds delta.

    True when delta^2 <= min_positive_sq / d, so Map(delta) is exactly the
    solution set of the equivariance equations.
    """
    if metric.min_positive_sq is None:
        return False
    return Fraction(delta) ** 2 <= metric.min_positive_sq / d


def enumerate_top_microstates(
    model: CompactGroupModel | AlgebraicActionModel,
    sigma: SoficApproximation | None,
    F: Sequence[GroupElement],
    delta,
    metric: Pseudometric | None,
    action: AutomorphismAction | None,
    budget: int = 10**6,
) -> np.ndarray:
    """The full Map(rho, F, delta, sigma) in deterministic lexicographic order.

    Dispatch: algebraic-action kernel models enumerate their tolerance kernel;
    finite models with a threshold forcing exact equivariance solve the
    constraint system orbit by orbit; otherwise brute force within budget.
    """
    if isinstance(model, AlgebraicActionModel):
        return model.enumerate_kernel(budget)
    delta = Fraction(delta)
    if (
        isinstance(model, FiniteGroupModel)
        and forces_exact_equivariance(metric, delta, sigma.d)
    ):
        out = _enumerate_equivariant(model, sigma, F, action, budget)
        return _sorted_candidates(model, out)
    xs = _all_candidates(model, sigma.d, budget)
    mask = top_microstate_mask(xs, sigma, F, delta, metric, action)
    return xs[mask]


def _enumerate_equivariant(
    model: FiniteGroupModel,
    sigma: SoficApproximation,
    F: Sequence[GroupElement],
    action: AutomorphismAction,
    budget: int,
) -> np.ndarray:
    """Solutions of x(sigma(g) j) = g. x(j) for all g in F, by propagating
    transfer maps over the orbit graph and intersecting cycle constraints."""
    _check_window_support(sigma, F)
    d = sigma.d
    n = model.n_points
    ident = np.arange(n, dtype=np.int64)
    edges = []
    for g in F:
        m = action.point_map(g)
        p = sigma.perm(g)
        edges.append((p, m, np.argsort(p), np.argsort(m)))
    transfer = [None] * d  # x(j) = transfer[j][root value]
    comp_root = [-1] * d
    roots: list[int] = []
    valid: list[np.ndarray] = []
    for start in range(d):
        if comp_root[start] >= 0:
            continue
        root = start
        roots.append(root)
        transfer[root] = ident
        comp_root[root] = root
        ok = np.ones(n, dtype=bool)
        stack = [root]
        while stack:
            j = stack.pop()
            tj = transfer[j]
            for p, m, p_inv, m_inv in edges:
                jf = int(p[j])  # x(jf) = m[x(j)]
                tf = m[tj]
                if comp_root[jf] < 0:
                    comp_root[jf] = root
                    transfer[jf] = tf
                    stack.append(jf)
                else:
                    ok &= transfer[jf] == tf
                jb = int(p_inv[j])  # x(j) = m[x(jb)]  =>  x(jb) = m_inv[x(j)]
                tb = m_inv[tj]
                if comp_root[jb] < 0:
                    comp_root[jb] = root
                    transfer[jb] = tb
                    stack.append(jb)
                else:
                    ok &= transfer[jb] == tb
        valid.append(np.nonzero(ok)[0])
    total = 1
    for v in valid:
        total *= len(v)
        if total > budget:
            raise BudgetExceededError(total, budget, "equivariant enumeration")
    if total == 0:
        return np.empty((0, d), dtype=np.int64)
    out = np.empty((total, d), dtype=np.int64)
    # mixed-radix assignment of root values, lexicographic over root order
    widths = [len(v) for v in valid]
    flat = np.arange(total, dtype=np.int64)
    digit = np.empty((total, len(roots)), dtype=np.int64)
    rem = flat
    for k in range(len(roots) - 1, -1, -1):
        digit[:, k] = rem % widths[k]
        rem = rem // widths[k]
    for k, (root, vals) in enumerate(zip(roots, valid)):
        root_vals = vals[digit[:, k]]
        members = [j for j in range(d) if comp_root[j] == root]
        for j in members:
            out[:, j] = transfer[j][root_vals]
    return out


# ---------------------------------------------------------------------------
# randomized search
# ---------------------------------------------------------------------------


def sample_microstates(
    model: CompactGroupModel,
    sigma: SoficApproximation,
    window: MapWindow,
    metric: Pseudometric,
    action: AutomorphismAction,
    n_samples: int,
    seed: int,
    max_attempts_per_sample: int = 40,
) -> np.ndarray:
    """Randomized search for measure microstates: seed uniform candidates and
    greedily repair the worst coordinate until membership holds.

    Returns up to n_samples verified candidates (possibly fewer); the result
    is a pure function of the arguments.  Finite models only.
    """
    if not isinstance(model, FiniteGroupModel):
        raise ValidationError("randomized repair search needs a finite model")
    if n_samples < 1:
        raise ValidationError("n_samples must be >= 1")
    _check_window_support(sigma, window.F)
    d = sigma.d
    n = model.n_points
    found = []
    maps = [(sigma.perm(g), action.point_map(g)) for g in window.F]
    for slot in range(n_samples):
        rng = np.random.default_rng([seed, 0x5A3C, slot])
        for _ in range(max_attempts_per_sample):
            x = rng.integers(0, n, size=d).astype(np.int64)
            x = _repair(x, maps, rng, rounds=4 * d)
            if is_meas_microstate(x, sigma, window, metric, action):
                found.append(x)
                break
    if not found:
        return np.empty((0, d), dtype=np.int64)
    return np.stack(found)


def _violations(x: np.ndarray, maps) -> np.ndarray:
    """Per-coordinate count of broken equivariance equations."""
    d = x.shape[0]
    out = np.zeros(d, dtype=np.int64)
    for p, m in maps:
        bad = m[x] != x[p]
        out += bad  # source side
        np.add.at(out, p[bad], 1)  # target side
    return out


def _repair(x: np.ndarray, maps, rng: np.random.Generator, rounds: int) -> np.ndarray:
    x = x.copy()
    n_points = max(int(m.shape[0]) for _, m in maps) if maps else 0
    for _ in range(rounds):
        viol = _violations(x, maps)
        total = int(viol.sum())
        if total == 0:
            return x
        j = int(np.argmax(viol))
        best_val, best_score = int(x[j]), total
        for v in range(n_points):
            if v == x[j]:
                continue
            x[j] = v
            score = int(_violations(x, maps).sum())
            if score < best_score:
                best_val, best_score = v, score
        x[j] = best_val
        if best_score == total:
            # stuck: random restart of one coordinate
            x[int(rng.integers(0, x.shape[0]))] = int(rng.integers(0, n_points))
    return x


# ---------------------------------------------------------------------------
# empirical distributions, shift lifts, and orbit windows
# ---------------------------------------------------------------------------


def empirical_pushforward(x: np.ndarray, model: CompactGroupModel) -> SiteMeasure:
    """The empirical distribution of the coordinates of x (total mass 1)."""
    idx = _point_indices(model, np.asarray(x, dtype=np.int64))
    counts = np.bincount(idx, minlength=model.n_points)
    return SiteMeasure(model, counts, int(counts.sum()))


def shift_lift(
    x: np.ndarray, sigma: SoficApproximation, W: Sequence[GroupElement]
) -> np.ndarray:
    """The finite-window lift: entry [j, w] = x(sigma(g_w)^{-1}(j)).

    Output shape (d, |W|) for finite models, (d, |W|, sites) for torus models.
    """
    cols = []
    for g in W:
        inv = np.argsort(sigma.perm(g))
        cols.append(x[inv])
    return np.stack(cols, axis=1)


def psi_window(p, W: Sequence[GroupElement], action: AutomorphismAction) -> tuple:
    """The orbit window of one point: (act(g^{-1}, p)) for g in W."""
    out = []
    for g in W:
        out.append(action.act_point(action.group.inverse(g), p))
    return tuple(out)


# ---------------------------------------------------------------------------
# import/export
# ---------------------------------------------------------------------------


def save_microstates(path, xs: np.ndarray, manifest: dict) -> None:
    """Persist a microstate set as arrays plus a JSON manifest."""
    np.savez_compressed(path, points=xs, manifest=json.dumps(manifest, sort_keys=True))


def load_microstates(path) -> tuple[np.ndarray, dict]:
    data = np.load(path, allow_pickle=False)
    return data["points"], json.loads(str(data["manifest"]))
