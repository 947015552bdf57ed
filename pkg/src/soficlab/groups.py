"""Countable discrete groups with designated finite quotients, and sofic
approximations sigma: G -> S_d built from them.

Supported group families (the quotient families the rest of the package can
instantiate):

* finitely generated abelian groups given by generator names and moduli
  (0 = infinite order): Z, Z^2, Z/N, products of cyclics.  Canonical element
  form is the reduced exponent vector.
* free groups F_r: canonical form is the reduced word; sofic models send each
  generator to an independent seeded uniform permutation and extend
  multiplicatively (an evaluation homomorphism, so pair defects vanish and
  only freeness is approximate).
* finite groups by explicit multiplication table: canonical form is the
  element index; quotient model is the left regular representation, with
  optional k-fold block copies.

Permutations are stored 0-based as full one-line int64 arrays of length d.
All objects are immutable after construction; operations are pure.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from types import MappingProxyType
from typing import Mapping, Sequence

import numpy as np

from .errors import UnsupportedElementError, ValidationError


@dataclass(frozen=True)
class GroupElement:
    """A group element in canonical form.

    ``key`` is (tag, body): the tag identifies the group family and its
    defining data (so elements of different groups never compare equal), the
    body is the canonical content: an exponent tuple for abelian groups, a
    reduced ((gen_index, exponent), ...) word for free groups, an integer
    index for table groups.  Identity has the empty word (all-zero exponents
    / index of the table identity).
    """

    key: tuple

    def __str__(self) -> str:
        return _display(self)

    def __repr__(self) -> str:
        return f"GroupElement({_display(self)})"


def _display(el: GroupElement) -> str:
    tag = el.key[0][0]
    if tag == "a":
        exps = el.key[1]
        if not any(exps):
            return "e"
        return "*".join(
            f"g{i}^{e}" if abs(e) != 1 else (f"g{i}" if e == 1 else f"g{i}^-1")
            for i, e in enumerate(exps)
            if e
        )
    if tag == "f":
        letters = el.key[1]
        if not letters:
            return "e"
        return "*".join(f"g{i}^{e}" if e != 1 else f"g{i}" for i, e in letters)
    return f"x{el.key[1]}"


class GroupSpec:
    """A group presentation plus its family of finite quotients.

    Construct through the factory classmethods (``integers``, ``abelian``,
    ``free``, ``from_table`` / ``cyclic_table``); the constructor is internal.
    """

    def __init__(self, kind: str, generators: tuple[str, ...], **params):
        self.kind = kind
        self.generators = generators
        if kind == "abelian":
            self.moduli: tuple[int, ...] = params["moduli"]
            if len(self.moduli) != len(generators):
                raise ValidationError("one modulus per generator")
            self._tag = ("a", self.moduli)
        elif kind == "free":
            self.rank = len(generators)
            self._tag = ("f", self.rank)
        elif kind == "table":
            self.mul_table: np.ndarray = params["mul_table"]
            self.labels: tuple[str, ...] = params["labels"]
            n = len(self.labels)
            if self.mul_table.shape != (n, n):
                raise ValidationError("multiplication table shape mismatch")
            self.identity_index: int = params["identity_index"]
            self.inv_table = _invert_table(self.mul_table, self.identity_index)
            self.generator_indices: tuple[int, ...] = params["generator_indices"]
            self._tag = ("x", self.labels)
        else:
            raise ValidationError(f"unknown group kind {kind!r}")

    # -- factories ---------------------------------------------------------

    @classmethod
    def integers(cls, name: str = "t") -> "GroupSpec":
        return cls("abelian", (name,), moduli=(0,))

    @classmethod
    def integers2(cls, names: tuple[str, str] = ("s", "t")) -> "GroupSpec":
        return cls("abelian", names, moduli=(0, 0))

    @classmethod
    def abelian(cls, names: Sequence[str], moduli: Sequence[int]) -> "GroupSpec":
        return cls("abelian", tuple(names), moduli=tuple(int(m) for m in moduli))

    @classmethod
    def cyclic(cls, order: int, name: str = "t") -> "GroupSpec":
        if order < 1:
            raise ValidationError("cyclic order must be >= 1")
        return cls("abelian", (name,), moduli=(order,))

    @classmethod
    def free(cls, rank: int, names: Sequence[str] | None = None) -> "GroupSpec":
        if names is None:
            names = tuple("abcdefgh"[:rank]) if rank <= 8 else tuple(f"x{i}" for i in range(rank))
        if len(names) != rank:
            raise ValidationError("name count must equal rank")
        return cls("free", tuple(names))

    @classmethod
    def from_table(
        cls,
        labels: Sequence[str],
        mul_table: Sequence[Sequence[int]],
        identity_index: int = 0,
        generator_indices: Sequence[int] | None = None,
    ) -> "GroupSpec":
        table = np.asarray(mul_table, dtype=np.int64)
        n = len(labels)
        gens = tuple(generator_indices) if generator_indices is not None else tuple(range(n))
        spec = cls(
            "table",
            tuple(labels[i] for i in gens),
            mul_table=table,
            labels=tuple(labels),
            identity_index=identity_index,
            generator_indices=gens,
        )
        spec._check_table_axioms()
        return spec

    # -- element algebra ---------------------------------------------------

    def identity(self) -> GroupElement:
        if self.kind == "abelian":
            return GroupElement((self._tag, (0,) * len(self.generators)))
        if self.kind == "free":
            return GroupElement((self._tag, ()))
        return GroupElement((self._tag, self.identity_index))

    def generator(self, i: int) -> GroupElement:
        if self.kind == "abelian":
            exps = [0] * len(self.generators)
            exps[i] = 1
            return self._reduce_abelian(tuple(exps))
        if self.kind == "free":
            return GroupElement((self._tag, ((i, 1),)))
        return GroupElement(("x", self.generator_indices[i]))

    def _reduce_abelian(self, exps: tuple[int, ...]) -> GroupElement:
        reduced = tuple(e % m if m else e for e, m in zip(exps, self.moduli))
        return GroupElement((self._tag, reduced))

    def multiply(self, a: GroupElement, b: GroupElement) -> GroupElement:
        if self.kind == "abelian":
            return self._reduce_abelian(tuple(x + y for x, y in zip(a.key[1], b.key[1])))
        if self.kind == "free":
            word = list(a.key[1])
            for gen, exp in b.key[1]:
                if word and word[-1][0] == gen:
                    merged = word[-1][1] + exp
                    word.pop()
                    if merged:
                        word.append((gen, merged))
                else:
                    word.append((gen, exp))
            return GroupElement((self._tag, tuple(word)))
        return GroupElement((self._tag, int(self.mul_table[a.key[1], b.key[1]])))

    def inverse(self, a: GroupElement) -> GroupElement:
        if self.kind == "abelian":
            return self._reduce_abelian(tuple(-e for e in a.key[1]))
        if self.kind == "free":
            return GroupElement((self._tag, tuple((g, -e) for g, e in reversed(a.key[1]))))
        return GroupElement((self._tag, int(self.inv_table[a.key[1]])))

    def canonicalize(self, a: GroupElement) -> GroupElement:
        """Re-reduce an element; idempotent (confluence of word reduction)."""
        if self.kind == "abelian":
            return self._reduce_abelian(a.key[1])
        if self.kind == "free":
            out = self.identity()
            for gen, exp in a.key[1]:
                step = GroupElement((self._tag, ((gen, exp),))) if exp else self.identity()
                out = self.multiply(out, step)
            return out
        return a

    def power(self, a: GroupElement, n: int) -> GroupElement:
        out = self.identity()
        base = a if n >= 0 else self.inverse(a)
        for _ in range(abs(n)):
            out = self.multiply(out, base)
        return out

    def is_identity(self, a: GroupElement) -> bool:
        return a == self.identity()

    def parse(self, text: str) -> GroupElement:
        """Parse a word like ``"t^2"``, ``"s*t^-1"``, ``"a b^-2"`` or ``"e"``."""
        text = text.strip()
        if text in ("e", "1", ""):
            return self.identity()
        name_to_index = {n: i for i, n in enumerate(self.generators)}
        if self.kind == "table":
            # also allow raw element labels
            label_to_index = {lab: i for i, lab in enumerate(self.labels)}
        out = self.identity()
        for token in text.replace("*", " ").split():
            if "^" in token:
                name, _, exp_s = token.partition("^")
                exp = int(exp_s)
            else:
                name, exp = token, 1
            if name in name_to_index:
                base = self.generator(name_to_index[name])
            elif self.kind == "table" and name in label_to_index:
                base = GroupElement((self._tag, label_to_index[name]))
            else:
                raise ValidationError(f"unknown generator {name!r}")
            out = self.multiply(out, self.power(base, exp))
        return out

    def ball(self, radius: int) -> tuple[GroupElement, ...]:
        """All products of at most ``radius`` generators/inverses, identity included."""
        seen = {self.identity()}
        frontier = [self.identity()]
        steps = []
        for i in range(len(self.generators)):
            g = self.generator(i)
            steps += [g, self.inverse(g)]
        for _ in range(radius):
            nxt = []
            for a in frontier:
                for s in steps:
                    b = self.multiply(a, s)
                    if b not in seen:
                        seen.add(b)
                        nxt.append(b)
            frontier = nxt
        return tuple(sorted(seen, key=_sort_key))

    def elements(self) -> tuple[GroupElement, ...]:
        """All elements (finite groups only)."""
        if self.kind == "table":
            return tuple(GroupElement((self._tag, i)) for i in range(len(self.labels)))
        if self.kind == "abelian" and all(self.moduli):
            out = []
            idx = [0] * len(self.moduli)
            total = math.prod(self.moduli)
            for _ in range(total):
                out.append(GroupElement((self._tag, tuple(idx))))
                for k in reversed(range(len(idx))):
                    idx[k] += 1
                    if idx[k] < self.moduli[k]:
                        break
                    idx[k] = 0
            return tuple(out)
        raise ValidationError("elements() needs a finite group")

    def order(self) -> int | None:
        if self.kind == "table":
            return len(self.labels)
        if self.kind == "abelian" and all(self.moduli):
            return math.prod(self.moduli)
        return None

    @property
    def relations(self) -> tuple[str, ...]:
        """Defining relations (display form) implied by the presentation."""
        if self.kind == "abelian":
            rels = []
            names = self.generators
            for i in range(len(names)):
                for j in range(i + 1, len(names)):
                    rels.append(f"{names[i]}*{names[j]}*{names[i]}^-1*{names[j]}^-1")
            for n, m in zip(names, self.moduli):
                if m:
                    rels.append(f"{n}^{m}")
            return tuple(rels)
        if self.kind == "free":
            return ()
        return ("<multiplication table>",)

    # -- quotients ---------------------------------------------------------

    def offers_quotient(self, quotient: Mapping) -> bool:
        try:
            self._quotient_data(quotient)
            return True
        except ValidationError:
            return False

    def _quotient_data(self, quotient: Mapping):
        kind = quotient.get("kind")
        copies = int(quotient.get("copies", 1))
        if copies < 1:
            raise ValidationError("copies must be >= 1")
        if self.kind == "abelian":
            if kind == "regular":
                # alias: regular representation of a finite abelian group
                if not all(self.moduli):
                    raise ValidationError("regular quotient needs a finite group")
                return ("cyclic-powers", self.moduli, copies)
            if kind != "cyclic-powers":
                raise ValidationError(f"abelian groups offer cyclic-powers quotients, not {kind!r}")
            orders = tuple(int(x) for x in quotient["orders"])
            if len(orders) != len(self.generators):
                raise ValidationError("one quotient order per generator")
            for m, o in zip(self.moduli, orders):
                if o < 1:
                    raise ValidationError("quotient orders must be >= 1")
                if m and m % o != 0:
                    raise ValidationError(f"relation g^{m} does not die in Z/{o}")
            return ("cyclic-powers", orders, copies)
        if self.kind == "table":
            if kind != "regular":
                raise ValidationError(f"table groups offer regular quotients, not {kind!r}")
            return ("regular", None, copies)
        if self.kind == "free":
            if kind != "random-permutations":
                raise ValidationError(f"free groups offer random-permutations models, not {kind!r}")
            degree = int(quotient["degree"])
            if degree < 1:
                raise ValidationError("degree must be >= 1")
            return ("random-permutations", degree, copies)
        raise ValidationError("no quotient family")

    def descriptor(self) -> dict:
        """JSON-able description used for hashing and caching."""
        if self.kind == "abelian":
            return {"kind": "abelian", "generators": list(self.generators), "moduli": list(self.moduli)}
        if self.kind == "free":
            return {"kind": "free", "generators": list(self.generators)}
        return {
            "kind": "table",
            "labels": list(self.labels),
            "mul_table": self.mul_table.tolist(),
            "identity_index": self.identity_index,
            "generator_indices": list(self.generator_indices),
        }

    def _check_table_axioms(self) -> None:
        n = len(self.labels)
        t = self.mul_table
        if (t < 0).any() or (t >= n).any():
            raise ValidationError("table entries out of range")
        e = self.identity_index
        if not ((t[e, :] == np.arange(n)).all() and (t[:, e] == np.arange(n)).all()):
            raise ValidationError("identity fails identity axiom")
        # exhaustive associativity spot-check (groups here are tiny):
        # t[t[a,b], c] == t[a, t[b,c]] for all a, b, c
        if n <= 64:
            if not (t[t, :] == t[:, t]).all():
                raise ValidationError("multiplication table is not associative")

    # -- misc ----------------------------------------------------------------

    def element_to_json(self, a: GroupElement):
        return list(list(p) for p in a.key[1]) if self.kind == "free" else (
            list(a.key[1]) if self.kind == "abelian" else a.key[1]
        )

    def element_from_json(self, data) -> GroupElement:
        if self.kind == "free":
            return GroupElement((self._tag, tuple((int(g), int(e)) for g, e in data)))
        if self.kind == "abelian":
            return self._reduce_abelian(tuple(int(x) for x in data))
        return GroupElement((self._tag, int(data)))

    def __repr__(self) -> str:
        if self.kind == "abelian":
            parts = [f"Z" if m == 0 else f"Z/{m}" for m in self.moduli]
            return f"GroupSpec({' x '.join(parts)})"
        if self.kind == "free":
            return f"GroupSpec(F_{self.rank})"
        return f"GroupSpec(table order {len(self.labels)})"


def _sort_key(el: GroupElement):
    tag = el.key[0][0]
    body = el.key[1]
    if tag == "x":
        return (0, body)
    if tag == "a":
        return (1, tuple((abs(e), e < 0) for e in body), body)
    flat = tuple(x for pair in body for x in pair)
    return (2, len(body), flat)


def _invert_table(mul: np.ndarray, e: int) -> np.ndarray:
    n = mul.shape[0]
    inv = np.full(n, -1, dtype=np.int64)
    rows, cols = np.nonzero(mul == e)
    inv[rows] = cols
    if (inv < 0).any():
        raise ValidationError("table has a non-invertible element")
    return inv


# ---------------------------------------------------------------------------
# sofic approximations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SoficApproximation:
    """A finite-support map sigma: G -> S_d stored as one-line permutations.

    Invariants enforced at construction: every table entry is a bijection of
    {0..d-1}; sigma(e) is the identity permutation whenever e is in the
    support.  sigma(g^-1) == sigma(g)^-1 is *not* enforced; the deviation is
    part of what sofic_defects measures.
    """

    group: GroupSpec
    d: int
    table: Mapping[GroupElement, np.ndarray]
    provenance: str
    seed: int | None = None
    quotient: Mapping | None = None

    def __post_init__(self):
        frozen = {}
        for g, perm in self.table.items():
            arr = np.asarray(perm, dtype=np.int64)
            if arr.shape != (self.d,) or not _is_permutation(arr, self.d):
                raise ValidationError(f"table entry for {g} is not a permutation of 0..{self.d - 1}")
            arr = arr.copy()
            arr.setflags(write=False)
            frozen[g] = arr
        e = self.group.identity()
        if e in frozen and not (frozen[e] == np.arange(self.d)).all():
            raise ValidationError("sigma(e) must be the identity permutation")
        object.__setattr__(self, "table", MappingProxyType(frozen))

    @property
    def support(self) -> tuple[GroupElement, ...]:
        return tuple(self.table.keys())

    def perm(self, g: GroupElement) -> np.ndarray:
        try:
            return self.table[g]
        except KeyError:
            raise UnsupportedElementError(g, "sofic approximation support") from None

    def permutation_matrix(self, g: GroupElement) -> np.ndarray:
        """0/1 matrix P with (P x)_a = x_{sigma(g)^{-1}(a)} (so P_g P_h = P_{gh}
        whenever the table composes exactly)."""
        p = self.perm(g)
        mat = np.zeros((self.d, self.d), dtype=np.int64)
        mat[p, np.arange(self.d)] = 1
        return mat

    def to_json_dict(self) -> dict:
        return {
            "format": "soficlab-sofic/1",
            "group": self.group.descriptor(),
            "d": self.d,
            "provenance": self.provenance,
            "seed": self.seed,
            "quotient": dict(self.quotient) if self.quotient is not None else None,
            "table": [
                [self.group.element_to_json(g), perm.tolist()] for g, perm in sorted(
                    self.table.items(), key=lambda kv: _sort_key(kv[0])
                )
            ],
        }

    @classmethod
    def from_json_dict(cls, data: Mapping, group: GroupSpec) -> "SoficApproximation":
        if data.get("format") != "soficlab-sofic/1":
            raise ValidationError("unknown sofic serialization format")
        table = {
            group.element_from_json(g): np.array(perm, dtype=np.int64)
            for g, perm in data["table"]
        }
        return cls(
            group=group,
            d=int(data["d"]),
            table=table,
            provenance=data["provenance"],
            seed=data["seed"],
            quotient=data["quotient"],
        )

    def cache_key(self) -> str:
        payload = {
            "group": self.group.descriptor(),
            "quotient": dict(self.quotient) if self.quotient is not None else None,
            "support": [self.group.element_to_json(g) for g in sorted(self.table, key=_sort_key)],
            "seed": self.seed,
            "provenance": self.provenance,
        }
        blob = json.dumps(payload, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()[:24]


@dataclass(frozen=True)
class SoficDefectReport:
    """Multiplicativity and freeness defects of a sofic approximation.

    ``pair_defects[(g, h)]`` is the fraction of j with
    sigma(g)sigma(h)(j) != sigma(gh)(j); ``fixed_fractions[g]`` the fraction
    of fixed points of sigma(g) for g != e.  All fractions exact.
    """

    pair_defects: Mapping[tuple[GroupElement, GroupElement], Fraction]
    fixed_fractions: Mapping[GroupElement, Fraction]

    def max_pair_defect(self) -> Fraction:
        return max(self.pair_defects.values(), default=Fraction(0))

    def max_fixed_fraction(self) -> Fraction:
        return max(self.fixed_fractions.values(), default=Fraction(0))


def _is_permutation(arr: np.ndarray, d: int) -> bool:
    if arr.min(initial=0) < 0 or arr.max(initial=-1) >= d:
        return False
    return np.bincount(arr, minlength=d).max() == 1


def _block_copies(perm: np.ndarray, copies: int) -> np.ndarray:
    d = perm.shape[0]
    if copies == 1:
        return perm
    out = np.concatenate([perm + k * d for k in range(copies)])
    return out


def quotient_sofic(
    spec: GroupSpec, quotient: Mapping, support: Sequence[GroupElement]
) -> SoficApproximation:
    """Sofic approximation from a designated finite quotient (or free-group
    random-permutation model), by left multiplication on the quotient.

    ``support`` must be finite and contain the identity.  Elements that the
    quotient family cannot express are rejected by name.
    """
    kind, data, copies = spec._quotient_data(quotient)
    support = tuple(dict.fromkeys(support))
    if spec.identity() not in support:
        raise ValidationError("support must contain the identity")
    table: dict[GroupElement, np.ndarray] = {}
    if kind == "cyclic-powers":
        orders = data
        d0 = math.prod(orders)
        strides = []
        acc = 1
        for o in reversed(orders):
            strides.append(acc)
            acc *= o
        strides = tuple(reversed(strides))
        # index of (a_1..a_k) is sum a_i * stride_i, lexicographic
        grids = np.meshgrid(*[np.arange(o) for o in orders], indexing="ij")
        for g in support:
            if g.key[0][0] != "a":
                raise UnsupportedElementError(g, "not an abelian word")
            coords = [(grid + e) % o for grid, e, o in zip(grids, g.key[1], orders)]
            perm = sum(c * s for c, s in zip(coords, strides)).reshape(-1)
            table[g] = _block_copies(perm.astype(np.int64), copies)
        d = d0 * copies
    elif kind == "regular":
        n = len(spec.labels)
        for g in support:
            if g.key[0][0] != "x":
                raise UnsupportedElementError(g, "not a table element")
            perm = spec.mul_table[g.key[1], :].astype(np.int64)  # j -> g*j
            table[g] = _block_copies(perm, copies)
        d = n * copies
    else:  # random-permutations, free group
        degree = data
        seed = quotient.get("seed", 0)
        rng_gens = [
            np.random.default_rng([int(seed), 0xF2EE, i]) for i in range(spec.rank)
        ]
        gen_perms = [rng.permutation(degree).astype(np.int64) for rng in rng_gens]
        inv_perms = [np.argsort(p).astype(np.int64) for p in gen_perms]
        for g in support:
            if g.key[0][0] != "f":
                raise UnsupportedElementError(g, "not a free word")
            # left-to-right function composition: sigma(uv) = sigma(u) o sigma(v)
            perm = np.arange(degree, dtype=np.int64)
            for gen, exp in g.key[1]:
                step = gen_perms[gen] if exp > 0 else inv_perms[gen]
                for _ in range(abs(exp)):
                    perm = perm[step]
            table[g] = _block_copies(perm, copies)
        d = degree * copies
    return SoficApproximation(
        group=spec,
        d=d,
        table=table,
        provenance="quotient-induced",
        seed=quotient.get("seed"),
        quotient=dict(quotient),
    )


def sofic_defects(sigma: SoficApproximation, F: Sequence[GroupElement]) -> SoficDefectReport:
    """Defect report over F: pair defects for (g, h) with g, h, gh all in the
    table support, fixed-point fractions for g != e."""
    spec = sigma.group
    F = tuple(dict.fromkeys(F))
    for g in F:
        if g not in sigma.table:
            raise UnsupportedElementError(g, "defect report window")
    pair_defects: dict[tuple[GroupElement, GroupElement], Fraction] = {}
    for g in F:
        for h in F:
            gh = spec.multiply(g, h)
            if gh not in sigma.table:
                # pairs whose product leaves the support are not measurable
                continue
            composed = sigma.table[g][sigma.table[h]]
            mismatches = int((composed != sigma.table[gh]).sum())
            pair_defects[(g, h)] = Fraction(mismatches, sigma.d)
    fixed: dict[GroupElement, Fraction] = {}
    idx = np.arange(sigma.d)
    for g in F:
        if spec.is_identity(g):
            continue
        fixed[g] = Fraction(int((sigma.table[g] == idx).sum()), sigma.d)
    return SoficDefectReport(
        pair_defects=MappingProxyType(pair_defects),
        fixed_fractions=MappingProxyType(fixed),
    )


def perturb(sigma: SoficApproximation, rate: float, seed: int) -> SoficApproximation:
    """Compose every table permutation with ceil(rate*d) random transpositions.

    The transposition stream is split per table entry from (seed, element), so
    the same (sigma, rate, seed) always reproduces the same output and the
    result does not depend on dict iteration order.
    """
    if not 0 <= rate <= 1:
        raise ValidationError("perturbation rate must be in [0, 1]")
    n_swaps = math.ceil(rate * sigma.d)
    table = {}
    for g in sorted(sigma.table, key=_sort_key):
        perm = sigma.table[g].copy()
        if n_swaps and not sigma.group.is_identity(g):
            tag = _element_stream_tag(sigma.group, g)
            rng = np.random.default_rng([int(seed), 0x5EED, tag])
            for _ in range(n_swaps):
                i, j = rng.integers(0, sigma.d, size=2)
                perm[i], perm[j] = perm[j], perm[i]
        table[g] = perm
    return SoficApproximation(
        group=sigma.group,
        d=sigma.d,
        table=table,
        provenance="perturbed",
        seed=seed,
        quotient=sigma.quotient,
    )


def _element_stream_tag(spec: GroupSpec, g: GroupElement) -> int:
    blob = json.dumps(spec.element_to_json(g), sort_keys=True).encode()
    return int.from_bytes(hashlib.sha256(blob).digest()[:8], "big")
