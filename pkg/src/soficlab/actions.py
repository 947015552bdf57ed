"""Finite-scale models of compact groups with G-actions by automorphisms,
and the algebraic actions presented by integer group matrices.

Two model classes stand in for the compact group X:

* ``FiniteGroupModel``: an explicit finite group (element list, multiplication
  and inverse tables).  Points are integer indices into ``labels``.
* ``TorusGridModel``: the grid ((1/q)Z/Z)^sites inside the torus power.
  Points are length-``sites`` tuples of residues mod q; candidate arrays carry
  them as int64 rows.  All torus arithmetic is exact (residues, never floats).

An algebraic action X_f given by f in M_{m,n}(Z(G)) is modeled two ways:

* for finite G, ``dual_model`` realizes X_f exactly as the finite subgroup of
  (Q/Z)^{n|G|} annihilated by the transpose of the r(f) matrix, carrying the
  coordinate-permutation G-action (the dual of left multiplication);
* for any sofic approximation sigma, ``instantiate_Xf`` builds the
  approximate-kernel model: the set of x in (T_q^n)^d with every coordinate of
  f^(sigma) x within ``tol`` of 0 in R/Z, where f^(sigma) substitutes the
  permutation matrix of sigma(g) for each group element g.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import intlin
from .errors import (
    BudgetExceededError,
    SingularMatrixError,
    UnsupportedElementError,
    ValidationError,
)
from .groups import GroupElement, GroupSpec, SoficApproximation, _sort_key


# ---------------------------------------------------------------------------
# compact group models
# ---------------------------------------------------------------------------


class FiniteGroupModel:
    """Explicit finite group; model points are indices 0..n-1."""

    def __init__(self, labels: Sequence, mul: np.ndarray, identity: int, name: str = ""):
        self.labels = tuple(labels)
        self.mul = np.asarray(mul, dtype=np.int64)
        self.identity = int(identity)
        self.name = name or f"finite({len(self.labels)})"
        n = len(self.labels)
        if self.mul.shape != (n, n):
            raise ValidationError("multiplication table shape mismatch")
        if not ((self.mul[self.identity, :] == np.arange(n)).all()
                and (self.mul[:, self.identity] == np.arange(n)).all()):
            raise ValidationError("identity axiom fails")
        inv = np.full(n, -1, dtype=np.int64)
        rows, cols = np.nonzero(self.mul == self.identity)
        inv[rows] = cols
        if (inv < 0).any():
            raise ValidationError("some element has no inverse")
        self.inv = inv
        if n <= 64 and not (self.mul[self.mul, :] == self.mul[:, self.mul]).all():
            raise ValidationError("multiplication table is not associative")
        self.mul.setflags(write=False)
        self.inv.setflags(write=False)

    @property
    def n_points(self) -> int:
        return len(self.labels)

    def iter_points(self) -> Iterable[int]:
        return range(self.n_points)

    def op(self, a: int, b: int) -> int:
        return int(self.mul[a, b])

    def inverse(self, a: int) -> int:
        return int(self.inv[a])

    # candidate arrays are int64 index vectors of shape (d,) or (N, d)
    def candidate_mul(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        return self.mul[a, b]

    def candidate_inv(self, a: np.ndarray) -> np.ndarray:
        return self.inv[a]

    def identity_candidate(self, d: int) -> np.ndarray:
        return np.full(d, self.identity, dtype=np.int64)

    def candidate_key(self, x: np.ndarray) -> bytes:
        return np.ascontiguousarray(x, dtype=np.int64).tobytes()

    def manifest(self) -> dict:
        return {"kind": "finite-group", "order": self.n_points, "name": self.name}

    def __repr__(self):
        return f"FiniteGroupModel({self.name})"


class TorusGridModel:
    """The grid ((1/q)Z/Z)^sites; points are residue tuples, exact arithmetic."""

    def __init__(self, q: int, sites: int, name: str = ""):
        if q < 2:
            raise ValidationError("grid resolution q must be >= 2")
        if sites < 1:
            raise ValidationError("need at least one site")
        self.q = int(q)
        self.sites = int(sites)
        self.name = name or f"torus(q={q})^{sites}"

    @property
    def n_points(self) -> int:
        return self.q**self.sites

    def iter_points(self) -> Iterable[tuple[int, ...]]:
        return itertools.product(range(self.q), repeat=self.sites)

    @property
    def identity(self) -> tuple[int, ...]:
        return (0,) * self.sites

    def op(self, a, b):
        return tuple((x + y) % self.q for x, y in zip(a, b))

    def inverse(self, a):
        return tuple((-x) % self.q for x in a)

    # candidate arrays are int64 of shape (d, sites) or (N, d, sites)
    def candidate_mul(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        return (a + b) % self.q

    def candidate_inv(self, a: np.ndarray) -> np.ndarray:
        return (-a) % self.q

    def identity_candidate(self, d: int) -> np.ndarray:
        return np.zeros((d, self.sites), dtype=np.int64)

    def candidate_key(self, x: np.ndarray) -> bytes:
        return np.ascontiguousarray(x, dtype=np.int64).tobytes()

    def point_index(self, p: tuple[int, ...]) -> int:
        idx = 0
        for v in p:
            idx = idx * self.q + int(v)
        return idx

    def point_from_index(self, idx: int) -> tuple[int, ...]:
        out = []
        for _ in range(self.sites):
            out.append(idx % self.q)
            idx //= self.q
        return tuple(reversed(out))

    def manifest(self) -> dict:
        return {"kind": "torus-grid", "q": self.q, "sites": self.sites}

    def __repr__(self):
        return f"TorusGridModel(q={self.q}, sites={self.sites})"


CompactGroupModel = FiniteGroupModel | TorusGridModel


def product_model(model):
    """The doubled model X x X with componentwise operations."""
    if isinstance(model, FiniteGroupModel):
        n = model.n_points
        labels = tuple((model.labels[i], model.labels[j]) for i in range(n) for j in range(n))
        left, right = np.divmod(np.arange(n * n), n)
        mul = model.mul[left[:, None], left[None, :]] * n + model.mul[right[:, None], right[None, :]]
        return FiniteGroupModel(labels, mul, model.identity * n + model.identity,
                                name=f"{model.name}^2")
    return TorusGridModel(model.q, 2 * model.sites, name=f"{model.name}^2")


def pair_candidates(model, x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
    """Combine candidates over X into candidates over the doubled model."""
    if isinstance(model, FiniteGroupModel):
        return x1 * model.n_points + x2
    return np.concatenate([x1, x2], axis=-1)


# ---------------------------------------------------------------------------
# automorphism actions
# ---------------------------------------------------------------------------


class AutomorphismAction:
    """A G-action on a model by group automorphisms.

    Generator maps are permutation arrays (finite models) or integer matrices
    acting by x -> M x mod q (torus models).  Maps for arbitrary elements are
    composed along the canonical word; table groups may instead supply a full
    ``element_maps`` dictionary.  Construction verifies that each map is an
    automorphism and that the defining relations act as the identity
    (tolerance zero).
    """

    def __init__(
        self,
        group: GroupSpec,
        model: CompactGroupModel,
        generator_maps: Mapping[str, np.ndarray] | None = None,
        element_maps: Mapping[GroupElement, np.ndarray] | None = None,
    ):
        self.group = group
        self.model = model
        self._cache: dict[GroupElement, np.ndarray] = {}
        self.generator_maps = None
        self.element_maps = None
        if element_maps is not None:
            frozen = {}
            for g, m in element_maps.items():
                frozen[g] = self._check_automorphism(np.asarray(m, dtype=np.int64))
            self.element_maps = MappingProxyType(frozen)
            self._check_homomorphism_table()
        elif generator_maps is not None:
            frozen = {}
            for name in group.generators:
                if name not in generator_maps:
                    raise ValidationError(f"missing generator map for {name!r}")
                frozen[name] = self._check_automorphism(
                    np.asarray(generator_maps[name], dtype=np.int64)
                )
            self.generator_maps = MappingProxyType(frozen)
            self._check_relations()
        else:
            raise ValidationError("need generator_maps or element_maps")

    # -- validation ----------------------------------------------------------

    def _check_automorphism(self, m: np.ndarray) -> np.ndarray:
        if isinstance(self.model, FiniteGroupModel):
            n = self.model.n_points
            if m.shape != (n,) or np.bincount(m, minlength=n).max() > 1:
                raise ValidationError("map is not a bijection of the model")
            if m[self.model.identity] != self.model.identity:
                raise ValidationError("map does not fix the identity")
            if not (m[self.model.mul] == self.model.mul[m[:, None], m[None, :]]).all():
                raise ValidationError("map is not multiplicative")
        else:
            s = self.model.sites
            if m.shape != (s, s):
                raise ValidationError("torus map must be a sites x sites integer matrix")
            det = intlin.det_bareiss(m.tolist())
            if math.gcd(det % self.model.q, self.model.q) != 1:
                raise ValidationError("torus matrix is not invertible mod q")
        m = m.copy()
        m.setflags(write=False)
        return m

    def _compose(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Function composition a o b."""
        if isinstance(self.model, FiniteGroupModel):
            return a[b]
        return (a @ b) % self.model.q

    def _identity_map(self) -> np.ndarray:
        if isinstance(self.model, FiniteGroupModel):
            return np.arange(self.model.n_points, dtype=np.int64)
        return np.eye(self.model.sites, dtype=np.int64)

    def _invert_map(self, m: np.ndarray) -> np.ndarray:
        if isinstance(self.model, FiniteGroupModel):
            return np.argsort(m).astype(np.int64)
        # adjugate / det mod q
        q = self.model.q
        det = intlin.det_bareiss(m.tolist()) % q
        det_inv = pow(det, -1, q)
        s = self.model.sites
        adj = np.zeros((s, s), dtype=np.int64)
        for i in range(s):
            for j in range(s):
                minor = [
                    [int(m[r, c]) for c in range(s) if c != j]
                    for r in range(s)
                    if r != i
                ]
                adj[j, i] = ((-1) ** (i + j)) * intlin.det_bareiss(minor)
        return (det_inv * adj) % q

    def _check_relations(self):
        if self.group.kind == "free":
            return
        if self.group.kind == "abelian":
            names = self.group.generators
            maps = [self.generator_maps[n] for n in names]
            ident = self._identity_map()
            for i in range(len(names)):
                for j in range(i + 1, len(names)):
                    if not np.array_equal(
                        self._compose(maps[i], maps[j]), self._compose(maps[j], maps[i])
                    ):
                        raise ValidationError("generator maps do not commute")
                m = self.group.moduli[i]
                if m:
                    acc = ident
                    for _ in range(m):
                        acc = self._compose(maps[i], acc)
                    if not np.array_equal(acc, ident):
                        raise ValidationError(f"relation g^{m} does not act as identity")
            return
        raise ValidationError("table groups need explicit element_maps")

    def _check_homomorphism_table(self):
        els = list(self.element_maps.keys())
        missing = [g for g in self.group.elements() if g not in self.element_maps]
        if missing:
            raise ValidationError(f"element_maps missing {missing[0]}")
        for g in els:
            for h in els:
                gh = self.group.multiply(g, h)
                if not np.array_equal(
                    self._compose(self.element_maps[g], self.element_maps[h]),
                    self.element_maps[gh],
                ):
                    raise ValidationError("element maps are not a homomorphism")

    # -- application -----------------------------------------------------------

    def point_map(self, g: GroupElement) -> np.ndarray:
        """The automorphism of the model implementing g (cached)."""
        if g in self._cache:
            return self._cache[g]
        if self.element_maps is not None:
            if g not in self.element_maps:
                raise UnsupportedElementError(g, "action element maps")
            out = self.element_maps[g]
        else:
            out = self._identity_map()
            name_of = self.group.generators
            if g.key[0][0] == "a":
                for i, e in enumerate(g.key[1]):
                    base = self.generator_maps[name_of[i]]
                    step = base if e >= 0 else self._invert_map(base)
                    for _ in range(abs(e)):
                        out = self._compose(out, step)
            elif g.key[0][0] == "f":
                for gen, e in g.key[1]:
                    base = self.generator_maps[name_of[gen]]
                    step = base if e >= 0 else self._invert_map(base)
                    for _ in range(abs(e)):
                        out = self._compose(out, step)
            else:
                raise UnsupportedElementError(g, "cannot express in generators")
        self._cache[g] = out
        return out

    def act_point(self, g: GroupElement, x):
        m = self.point_map(g)
        if isinstance(self.model, FiniteGroupModel):
            return int(m[x])
        return tuple(int(v) for v in (m @ np.asarray(x, dtype=np.int64)) % self.model.q)

    def act_candidates(self, g: GroupElement, x: np.ndarray) -> np.ndarray:
        """Apply g pointwise to a candidate array (vectorized)."""
        m = self.point_map(g)
        if isinstance(self.model, FiniteGroupModel):
            return m[x]
        return np.einsum("st,...t->...s", m, x) % self.model.q


def act(action: AutomorphismAction, g: GroupElement, x):
    """The automorphism action, one point at a time: act(e, x) = x."""
    return action.act_point(g, x)


def trivial_action(group: GroupSpec, model: CompactGroupModel) -> AutomorphismAction:
    if isinstance(model, FiniteGroupModel):
        ident = np.arange(model.n_points, dtype=np.int64)
    else:
        ident = np.eye(model.sites, dtype=np.int64)
    if group.kind == "table":
        return AutomorphismAction(
            group, model, element_maps={g: ident for g in group.elements()}
        )
    return AutomorphismAction(
        group, model, generator_maps={n: ident for n in group.generators}
    )


def diagonal_action(action: AutomorphismAction) -> AutomorphismAction:
    """The action g.(x, y) = (g.x, g.y) on the doubled model."""
    model2 = product_model(action.model)
    if isinstance(action.model, FiniteGroupModel):
        n = action.model.n_points

        def lift(m: np.ndarray) -> np.ndarray:
            left, right = np.divmod(np.arange(n * n), n)
            return m[left] * n + m[right]

    else:
        s = action.model.sites

        def lift(m: np.ndarray) -> np.ndarray:
            out = np.zeros((2 * s, 2 * s), dtype=np.int64)
            out[:s, :s] = m
            out[s:, s:] = m
            return out

    if action.element_maps is not None:
        return AutomorphismAction(
            action.group, model2,
            element_maps={g: lift(m) for g, m in action.element_maps.items()},
        )
    return AutomorphismAction(
        action.group, model2,
        generator_maps={k: lift(m) for k, m in action.generator_maps.items()},
    )


def cyclic_model(order: int) -> FiniteGroupModel:
    """Z/order as a finite model with labels 0..order-1."""
    n = order
    mul = (np.arange(n)[:, None] + np.arange(n)[None, :]) % n
    return FiniteGroupModel(tuple(range(n)), mul, 0, name=f"Z/{n}")


def unit_automorphism(model: FiniteGroupModel, k: int) -> np.ndarray:
    """x -> k*x on a cyclic model (gcd(k, n) = 1)."""
    n = model.n_points
    if math.gcd(k % n, n) != 1:
        raise ValidationError("unit must be coprime to the order")
    return (k * np.arange(n)) % n


# ---------------------------------------------------------------------------
# integer group matrices and algebraic action models
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IntegerGroupMatrix:
    """An m x n matrix over the integral group ring Z(G).

    ``entries[l][j]`` maps group elements to integer coefficients (finite
    support).  Row index l ranges over the domain copies, column index j over
    the codomain copies, matching (r(f) xi)(j) = sum_l xi(l) f_{lj}.
    """

    group: GroupSpec
    m: int
    n: int
    entries: tuple[tuple[Mapping[GroupElement, int], ...], ...]

    def __post_init__(self):
        if len(self.entries) != self.m or any(len(r) != self.n for r in self.entries):
            raise ValidationError("entry grid must be m x n")
        frozen = tuple(
            tuple(
                MappingProxyType({g: int(c) for g, c in cell.items() if int(c) != 0})
                for cell in row
            )
            for row in self.entries
        )
        object.__setattr__(self, "entries", frozen)

    @classmethod
    def from_pairs(
        cls, group: GroupSpec, entries: Sequence[Sequence[Sequence]], m: int | None = None,
        n: int | None = None,
    ) -> "IntegerGroupMatrix":
        """Entries as [[ [(coeff, word), ...] , ...], ...]; words parsed by the group."""
        m = m if m is not None else len(entries)
        n = n if n is not None else (len(entries[0]) if entries else 0)
        grid = []
        for row in entries:
            cells = []
            for cell in row:
                acc: dict[GroupElement, int] = {}
                for coeff, word in cell:
                    g = group.parse(word) if isinstance(word, str) else word
                    acc[g] = acc.get(g, 0) + int(coeff)
                cells.append(acc)
            grid.append(tuple(cells))
        return cls(group=group, m=m, n=n, entries=tuple(grid))

    @classmethod
    def single(cls, group: GroupSpec, pairs: Sequence) -> "IntegerGroupMatrix":
        """The 1x1 (principal) case."""
        return cls.from_pairs(group, [[pairs]], m=1, n=1)

    def support(self) -> tuple[GroupElement, ...]:
        seen: dict[GroupElement, None] = {}
        for row in self.entries:
            for cell in row:
                for g in cell:
                    seen[g] = None
        return tuple(sorted(seen, key=_sort_key))

    def to_json(self) -> list:
        return [
            [
                [[c, self.group.element_to_json(g)] for g, c in sorted(cell.items(), key=lambda kv: _sort_key(kv[0]))]
                for cell in row
            ]
            for row in self.entries
        ]

    @classmethod
    def from_json(cls, group: GroupSpec, data, m: int | None = None, n: int | None = None):
        grid = [
            [[(c, group.element_from_json(g)) for c, g in cell] for cell in row]
            for row in data
        ]
        return cls.from_pairs(group, grid, m=m, n=n)


def sigma_matrix(f: IntegerGroupMatrix, sigma: SoficApproximation) -> np.ndarray:
    """The integer matrix f^(sigma) of shape (m*d, n*d).

    Block (l, j) is sum_g f_{lj}(g) P_g with P_g the permutation matrix of
    sigma(g) acting by (P_g x)_a = x_{sigma(g)^{-1}(a)}.  Row index a*m + l,
    column index b*n + j, matching candidates flattened C-order from (d, n).
    """
    d = sigma.d
    rows, cols = f.m * d, f.n * d
    out = np.zeros((rows, cols), dtype=np.int64)
    b_idx = np.arange(d)
    for l in range(f.m):
        for j in range(f.n):
            for g, c in f.entries[l][j].items():
                p = sigma.perm(g)
                out[p * f.m + l, b_idx * f.n + j] += c
    return out


@dataclass(frozen=True)
class AlgebraicActionModel:
    """Approximate-kernel model of X_f at one sofic level.

    The point set is {x in (T_q^n)^d : circle distance of every coordinate of
    f^(sigma) x to 0 is at most tol}; candidates are (d, n) residue arrays.
    tol = 0 gives the exact grid kernel, a subgroup.
    """

    source: IntegerGroupMatrix
    sigma: SoficApproximation
    q: int
    tol: Fraction
    matrix: np.ndarray = field(repr=False)

    @property
    def d(self) -> int:
        return self.sigma.d

    @property
    def site_model(self) -> TorusGridModel:
        return TorusGridModel(self.q, self.source.n)

    def residue_bound(self) -> int:
        """Largest residue c with c/q within tol of 0 on the circle."""
        t = self.tol
        bound = (t.numerator * self.q) // t.denominator
        return min(int(bound), self.q // 2)

    def is_kernel_point(self, x: np.ndarray) -> bool:
        """Exact membership test for a (d, n) candidate."""
        flat = np.asarray(x, dtype=np.int64).reshape(-1)
        res = (self.matrix @ flat) % self.q
        dist = np.minimum(res, self.q - res)
        return bool((dist <= self.residue_bound()).all())

    def kernel_mask(self, xs: np.ndarray) -> np.ndarray:
        """Vectorized membership for an (N, d, n) candidate batch."""
        flat = xs.reshape(xs.shape[0], -1)
        res = (flat @ self.matrix.T) % self.q
        dist = np.minimum(res, self.q - res)
        return (dist <= self.residue_bound()).all(axis=1)

    def enumerate_kernel(self, budget: int = 10**6) -> np.ndarray:
        """All tolerance-kernel grid points, deterministic order, shape (N, d, n)."""
        pts = list(_solve_residue_box(self.matrix, self.q, self.residue_bound(), budget))
        pts.sort()
        arr = np.array(pts, dtype=np.int64).reshape(len(pts), self.d, self.source.n)
        return arr

    def continuous_kernel_points(self) -> list[tuple[Fraction, ...]]:
        """The exact torus kernel (full-rank square case), as Fraction tuples."""
        return continuous_kernel(self.matrix)

    def manifest(self) -> dict:
        return {
            "kind": "algebraic-action",
            "q": self.q,
            "tol": str(self.tol),
            "d": self.d,
            "m": self.source.m,
            "n": self.source.n,
            "sigma": self.sigma.cache_key(),
        }


def instantiate_Xf(
    f: IntegerGroupMatrix, sigma: SoficApproximation, q: int, tol
) -> AlgebraicActionModel:
    """Build the approximate-kernel model of X_f over sigma on the q-grid."""
    if q < 2:
        raise ValidationError("grid resolution q must be >= 2")
    tol = Fraction(tol)
    if tol < 0:
        raise ValidationError("tolerance must be >= 0")
    for g in f.support():
        if g not in sigma.table:
            raise UnsupportedElementError(g, "sigma support must cover f")
    mat = sigma_matrix(f, sigma)
    mat.setflags(write=False)
    return AlgebraicActionModel(source=f, sigma=sigma, q=q, tol=tol, matrix=mat)


def _solve_residue_box(mat: np.ndarray, q: int, bound: int, budget: int):
    """Iterate x in (Z/q)^cols with every residue of (mat x) mod q in
    [-bound, bound] around 0.  Single Smith decomposition, one solve per
    admissible target."""
    rows, cols = mat.shape
    allowed = sorted({r % q for r in range(-bound, bound + 1)})
    n_targets = len(allowed) ** rows
    s, u, v = intlin.smith_normal_form(mat.tolist())
    r = min(rows, cols)
    diag = [s[i][i] for i in range(r)]
    per_sol = 1
    for i in range(cols):
        si = diag[i] if i < r else 0
        per_sol *= math.gcd(si, q)
    if n_targets * per_sol > budget * 4 and n_targets > budget:
        raise BudgetExceededError(n_targets, budget, "residue box enumeration")
    count_emitted = 0
    for target in itertools.product(allowed, repeat=rows):
        ut = [sum(u[i][k] * target[k] for k in range(rows)) % q for i in range(rows)]
        per_coord: list[list[int]] = []
        ok = True
        for i in range(cols):
            si = diag[i] if i < r else 0
            rhs = ut[i] if i < rows else 0
            g = math.gcd(si, q)
            if i < rows and rhs % g != 0:
                ok = False
                break
            if si % q == 0:
                per_coord.append(list(range(q)))
            else:
                step = q // g
                base = (rhs // g) * pow(si // g, -1, step) % step
                per_coord.append([(base + k * step) % q for k in range(g)])
        if not ok:
            continue
        for i in range(cols, rows):
            if ut[i] % q != 0:
                ok = False
                break
        if not ok:
            continue
        for y in itertools.product(*per_coord):
            x = tuple(
                sum(v[i][j] * y[j] for j in range(cols)) % q for i in range(cols)
            )
            count_emitted += 1
            if count_emitted > budget:
                raise BudgetExceededError(count_emitted, budget, "residue box enumeration")
            yield x


def count_kernel_points(model: AlgebraicActionModel, mode: str, budget: int = 10**6) -> int:
    """Kernel size under one of three counting modes.

    continuous-exact: |det f^(sigma)| (square, nonsingular).
    grid-exact: exact solutions on the q-grid, prod gcd(s_i, q) over the
    Smith diagonal (zero divisors contribute q).
    grid-tolerance: tolerance-kernel grid points, lattice-enumerated.
    """
    mat = model.matrix
    if mode == "continuous-exact":
        if model.source.m != model.source.n:
            raise ValidationError("continuous-exact needs a square matrix")
        return intlin.abs_det(mat.tolist())
    if mode == "grid-exact":
        return intlin.kernel_count_mod(mat.tolist(), model.q)
    if mode == "grid-tolerance":
        return sum(1 for _ in _solve_residue_box(mat, model.q, model.residue_bound(), budget))
    raise ValidationError(f"unknown counting mode {mode!r}")


def continuous_kernel(mat: np.ndarray) -> list[tuple[Fraction, ...]]:
    """All x in (R/Z)^cols with mat x = 0 mod 1, for full-column-rank mat.

    Solved through the Smith form: y ranges over prod (1/s_i)Z/Z and x = V y.
    """
    rows, cols = mat.shape
    s, u, v = intlin.smith_normal_form(mat.tolist())
    diag = [s[i][i] for i in range(min(rows, cols))]
    if len(diag) < cols or any(x == 0 for x in diag):
        raise SingularMatrixError("kernel is not finite (rank deficient)")
    points = []
    for combo in itertools.product(*[range(si) for si in diag]):
        y = [Fraction(k, si) for k, si in zip(combo, diag)]
        x = tuple(
            sum(Fraction(v[i][j]) * y[j] for j in range(cols)) % 1 for i in range(cols)
        )
        points.append(x)
    return sorted(set(points))


# ---------------------------------------------------------------------------
# exact dual model for finite groups
# ---------------------------------------------------------------------------


def regular_matrix(f: IntegerGroupMatrix) -> np.ndarray:
    """The left-regular matrix of lambda(f): rows (g, l), columns (g', j),
    entry f_{lj}(g g'^-1).  Finite groups only."""
    spec = f.group
    els = list(spec.elements())
    pos = {g: i for i, g in enumerate(els)}
    N = len(els)
    out = np.zeros((f.m * N, f.n * N), dtype=np.int64)
    for l in range(f.m):
        for j in range(f.n):
            for h, c in f.entries[l][j].items():
                # g g'^-1 = h  <=>  g = h g'
                for gp in els:
                    g = spec.multiply(h, gp)
                    out[pos[g] * f.m + l, pos[gp] * f.n + j] += c
    return out


def dual_model(f: IntegerGroupMatrix) -> tuple[FiniteGroupModel, AutomorphismAction]:
    """Exact model of X_f for finite G: the subgroup of (Q/Z)^{n|G|} annihilated
    by the transpose of the r(f) matrix, with the coordinate-permutation dual
    action (g.x)[(h, j)] = x[(g^-1 h, j)].

    Requires the kernel to be finite (r(f) of full column rank over Q).
    """
    spec = f.group
    if spec.order() is None:
        raise ValidationError("dual_model needs a finite group")
    els = list(spec.elements())
    pos = {g: i for i, g in enumerate(els)}
    N = len(els)
    # r(f) matrix: R[(h,j),(g,l)] = f_{lj}(g^-1 h); kernel condition uses R^T
    rt = np.zeros((N * f.m, N * f.n), dtype=np.int64)
    for l in range(f.m):
        for j in range(f.n):
            for w, c in f.entries[l][j].items():
                # g^-1 h = w  <=>  h = g w
                for g in els:
                    h = spec.multiply(g, w)
                    rt[pos[g] * f.m + l, pos[h] * f.n + j] += c
    points = continuous_kernel(rt)
    if len(points) > 4096:
        raise BudgetExceededError(len(points), 4096, "dual model size")
    index = {p: i for i, p in enumerate(points)}
    K = len(points)
    mul = np.zeros((K, K), dtype=np.int64)
    for a in range(K):
        for b in range(K):
            summed = tuple((x + y) % 1 for x, y in zip(points[a], points[b]))
            mul[a, b] = index[summed]
    ident = index[tuple(Fraction(0) for _ in range(N * f.n))]
    model = FiniteGroupModel(points, mul, ident, name=f"dual(|G|={N}, n={f.n})")
    maps: dict[GroupElement, np.ndarray] = {}
    for g in els:
        ginv = spec.inverse(g)
        coord_perm = [pos[spec.multiply(ginv, h)] for h in els]  # source coord per target h
        perm = np.zeros(K, dtype=np.int64)
        for a, p in enumerate(points):
            moved = tuple(
                p[coord_perm[hi] * f.n + j] for hi in range(N) for j in range(f.n)
            )
            perm[a] = index[moved]
        maps[g] = perm
    action = AutomorphismAction(spec, model, element_maps=maps)
    return model, action


# ---------------------------------------------------------------------------
# hypothesis checks
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Verdict:
    value: bool | None
    method: str

    def __bool__(self) -> bool:
        return bool(self.value)


@dataclass(frozen=True)
class HypothesisReport:
    """Finite-scale verdicts on the operator hypotheses behind X_f."""

    lambda_injective: Verdict
    lambda_dense_image: Verdict
    homoclinic_dense_surrogate: Verdict


def _symbol_det_poly(f: IntegerGroupMatrix) -> dict[int, int]:
    """Determinant of the Fourier-symbol matrix for G = Z, as a Laurent
    polynomial (exponent -> coefficient).  Cofactor expansion; n is small."""

    def poly_mul(a: dict[int, int], b: dict[int, int]) -> dict[int, int]:
        out: dict[int, int] = {}
        for ea, ca in a.items():
            for eb, cb in b.items():
                out[ea + eb] = out.get(ea + eb, 0) + ca * cb
        return {e: c for e, c in out.items() if c}

    def poly_add(a: dict[int, int], b: dict[int, int], sign: int) -> dict[int, int]:
        out = dict(a)
        for e, c in b.items():
            out[e] = out.get(e, 0) + sign * c
        return {e: c for e, c in out.items() if c}

    def cell_poly(l: int, j: int) -> dict[int, int]:
        return {g.key[1][0]: c for g, c in f.entries[l][j].items()}

    def det(rows: list[int], cols: list[int]) -> dict[int, int]:
        if len(rows) == 1:
            return cell_poly(rows[0], cols[0])
        total: dict[int, int] = {}
        for k, col in enumerate(cols):
            sub = det(rows[1:], cols[:k] + cols[k + 1 :])
            term = poly_mul(cell_poly(rows[0], col), sub)
            total = poly_add(total, term, 1 if k % 2 == 0 else -1)
        return total

    n = f.n
    return det(list(range(n)), list(range(n)))


def verify_hypotheses(f: IntegerGroupMatrix, spec: GroupSpec | None = None) -> HypothesisReport:
    """Decide injectivity / dense image of lambda(f) where a finite-scale
    criterion exists; return explicit unknowns elsewhere.

    Finite G: rank of the left-regular integer matrix (determinant in the
    square case).  G = Z with square f: the Fourier-symbol determinant is the
    zero polynomial iff lambda(f) fails injectivity; injective and dense image
    coincide there by rank-nullity.
    """
    spec = spec if spec is not None else f.group
    order = spec.order()
    if order is not None:
        mat = regular_matrix(f)
        rank = intlin.integer_rank(mat.tolist())
        inj = rank == f.n * order
        dense = rank == f.m * order
        method = "left-regular-rank"
        if f.m == f.n:
            method = "left-regular-determinant"
        return HypothesisReport(
            lambda_injective=Verdict(inj, method),
            lambda_dense_image=Verdict(dense, method),
            homoclinic_dense_surrogate=Verdict(True, "finite-group-vacuous"),
        )
    if spec.kind == "abelian" and spec.moduli == (0,) and f.m == f.n:
        det = _symbol_det_poly(f)
        inj = bool(det)
        return HypothesisReport(
            lambda_injective=Verdict(inj, "fourier-symbol-determinant"),
            lambda_dense_image=Verdict(inj, "fourier-symbol-determinant+rank-nullity"),
            homoclinic_dense_surrogate=Verdict(None, "not-computed"),
        )
    return HypothesisReport(
        lambda_injective=Verdict(None, "unknown-group-class"),
        lambda_dense_image=Verdict(None, "unknown-group-class"),
        homoclinic_dense_surrogate=Verdict(None, "unknown-group-class"),
    )
