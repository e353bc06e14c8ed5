"""Finite groupoids, group actions by automorphisms, and orbit constructions.

Conventions.  An arrow x runs src(x) -> rng(x), and comp[(x, y)] is defined
exactly when src(x) == rng(y) (x is applied after y).  A left group action
satisfies act(s, act(t, x)) == act(s*t, x); a right action, written x.h, is
stored as act(h, x) and satisfies act(k, act(h, x)) == act(h*k, x).

Haar systems are fixed to counting measures on range fibers; they exist for
every finite groupoid and are invariant under any action by automorphisms,
so no measure data is stored.  Properness checks are vacuous for finite
discrete spaces and are reported as notes.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from ._util import canonical_min, fmt, sort_key
from .report import (
    InternalConsistencyError,
    InvalidStructureError,
    NonFreeActionError,
    ValidationReport,
)


@dataclass
class FiniteGroupoid:
    """A finite groupoid given by explicit source/range/composition tables."""

    units: tuple
    arrows: tuple
    src: dict
    rng: dict
    comp: dict
    inv: dict
    unit_arrow: dict

    def composable(self, x, y) -> bool:
        return self.src[x] == self.rng[y]

    def compose(self, x, y):
        return self.comp[(x, y)]

    def inverse(self, x):
        return self.inv[x]

    def is_unit_arrow(self, x) -> bool:
        u = self.rng[x]
        return self.src[x] == u and self.unit_arrow[u] == x

    def composable_pairs(self):
        for x in self.arrows:
            for y in self.arrows:
                if self.src[x] == self.rng[y]:
                    yield (x, y)

    def composable_triples(self):
        for x, y in self.composable_pairs():
            for z in self.arrows:
                if self.src[y] == self.rng[z]:
                    yield (x, y, z)

    def range_fiber(self, u):
        return [x for x in self.arrows if self.rng[x] == u]

    def __repr__(self) -> str:
        return f"FiniteGroupoid({len(self.units)} units, {len(self.arrows)} arrows)"


@dataclass
class FiniteGroup(FiniteGroupoid):
    """A one-unit groupoid; arrows are the group elements."""

    identity: object = None

    @property
    def elements(self) -> tuple:
        return self.arrows

    def mul(self, a, b):
        return self.comp[(a, b)]

    def inv_elem(self, a):
        return self.inv[a]

    def __repr__(self) -> str:
        return f"FiniteGroup(order {len(self.arrows)})"


@dataclass
class GroupoidHom:
    """A map of arrows that intertwines all structure tables."""

    source: FiniteGroupoid
    target: FiniteGroupoid
    arrow_map: dict

    def __call__(self, x):
        return self.arrow_map[x]


def check_homomorphism(f: GroupoidHom) -> ValidationReport:
    rep = ValidationReport(subject="groupoid homomorphism")
    src, tgt, m = f.source, f.target, f.arrow_map
    rep.add("total", all(x in m for x in src.arrows),
            None if all(x in m for x in src.arrows) else "missing arrow image")
    ok = all(m[x] in tgt.arrows for x in src.arrows if x in m)
    rep.add("arrows land in target", ok)
    for x, y in src.composable_pairs():
        if not tgt.composable(m[x], m[y]):
            rep.add("preserves composability", False, f"pair ({fmt(x)},{fmt(y)})")
            return rep
        if tgt.comp[(m[x], m[y])] != m[src.comp[(x, y)]]:
            rep.add("preserves composition", False, f"pair ({fmt(x)},{fmt(y)})")
            return rep
    rep.add("preserves composition", True)
    bad = [x for x in src.arrows if m[src.inv[x]] != tgt.inv[m[x]]]
    rep.add("preserves inverses", not bad, fmt(bad[0]) if bad else None)
    return rep


# ---------------------------------------------------------------------------
# basic constructors


def make_pair_groupoid(n: int) -> FiniteGroupoid:
    """Pair groupoid on units 1..n; arrow (i, j) runs j -> i."""
    if n < 1:
        raise InvalidStructureError("pair groupoid needs at least one point")
    units = tuple(range(1, n + 1))
    arrows = tuple((i, j) for i in units for j in units)
    comp = {}
    for i, j in arrows:
        for k in units:
            comp[((i, j), (j, k))] = (i, k)
    return FiniteGroupoid(
        units=units,
        arrows=arrows,
        src={(i, j): j for (i, j) in arrows},
        rng={(i, j): i for (i, j) in arrows},
        comp=comp,
        inv={(i, j): (j, i) for (i, j) in arrows},
        unit_arrow={u: (u, u) for u in units},
    )


def make_unit_groupoid(points) -> FiniteGroupoid:
    """Groupoid with only unit arrows; arrow ids coincide with the points."""
    pts = tuple(points)
    return FiniteGroupoid(
        units=pts,
        arrows=pts,
        src={p: p for p in pts},
        rng={p: p for p in pts},
        comp={(p, p): p for p in pts},
        inv={p: p for p in pts},
        unit_arrow={p: p for p in pts},
    )


def make_group(table: dict) -> FiniteGroup:
    """Build a group from a multiplication table {(a, b): ab}.

    Rejects non-associative or non-invertible tables with a witness triple.
    """
    elements = tuple(sorted({a for a, _ in table} | {b for _, b in table}, key=sort_key))
    for a, b in itertools.product(elements, repeat=2):
        if (a, b) not in table:
            raise InvalidStructureError(f"multiplication table missing ({fmt(a)},{fmt(b)})")
        if table[(a, b)] not in elements:
            raise InvalidStructureError(f"product of ({fmt(a)},{fmt(b)}) leaves the element set")
    for a, b, c in itertools.product(elements, repeat=3):
        if table[(table[(a, b)], c)] != table[(a, table[(b, c)])]:
            raise InvalidStructureError(
                f"not associative at triple ({fmt(a)},{fmt(b)},{fmt(c)})"
            )
    identity = None
    for e in elements:
        if all(table[(e, a)] == a and table[(a, e)] == a for a in elements):
            identity = e
            break
    if identity is None:
        raise InvalidStructureError("no two-sided identity element")
    inv = {}
    for a in elements:
        inverses = [b for b in elements if table[(a, b)] == identity and table[(b, a)] == identity]
        if not inverses:
            raise InvalidStructureError(f"element {fmt(a)} has no inverse")
        inv[a] = inverses[0]
    unit = ("u",)
    return FiniteGroup(
        units=(unit,),
        arrows=elements,
        src={a: unit for a in elements},
        rng={a: unit for a in elements},
        comp=dict(table),
        inv=inv,
        unit_arrow={unit: identity},
        identity=identity,
    )


def product_with_group(x: FiniteGroupoid, g: FiniteGroup) -> FiniteGroupoid:
    """Direct product groupoid x times g (used as an oracle for semidirects)."""
    arrows = tuple((a, s) for a in x.arrows for s in g.elements)
    units = tuple((u, g.identity) for u in x.units)
    comp = {}
    for a, b in x.composable_pairs():
        for s in g.elements:
            for t in g.elements:
                comp[((a, s), (b, t))] = (x.comp[(a, b)], g.mul(s, t))
    return FiniteGroupoid(
        units=units,
        arrows=arrows,
        src={(a, s): (x.src[a], g.identity) for (a, s) in arrows},
        rng={(a, s): (x.rng[a], g.identity) for (a, s) in arrows},
        comp=comp,
        inv={(a, s): (x.inv[a], g.inv_elem(s)) for (a, s) in arrows},
        unit_arrow={(u, e): (x.unit_arrow[u], g.identity) for (u, e) in units},
    )


# ---------------------------------------------------------------------------
# validation


def validate_groupoid(g: FiniteGroupoid) -> ValidationReport:
    """Exhaustively check every groupoid axiom; failures carry witnesses."""
    rep = ValidationReport(subject="groupoid")
    arrows, units = set(g.arrows), set(g.units)

    bad = [x for x in g.arrows if g.src.get(x) not in units or g.rng.get(x) not in units]
    rep.add("src/rng total with unit values", not bad, fmt(bad[0]) if bad else None)
    if bad:
        return rep

    bad = [x for x in g.arrows if g.inv.get(x) not in arrows]
    rep.add("inverse total", not bad, fmt(bad[0]) if bad else None)
    if bad:
        return rep

    bad = [u for u in g.units if g.unit_arrow.get(u) not in arrows]
    rep.add("unit arrows present", not bad, fmt(bad[0]) if bad else None)
    if bad:
        return rep

    missing = [(x, y) for x, y in g.composable_pairs() if (x, y) not in g.comp]
    extra = [k for k in g.comp if g.src[k[0]] != g.rng[k[1]]]
    rep.add("comp defined iff src(x)=rng(y)", not missing and not extra,
            f"pair ({fmt((missing + extra)[0][0])},{fmt((missing + extra)[0][1])})"
            if missing or extra else None)
    if missing:
        return rep

    bad = [(x, y) for (x, y), z in g.comp.items()
           if z not in arrows or g.rng[z] != g.rng[x] or g.src[z] != g.src[y]]
    rep.add("rng(xy)=rng(x), src(xy)=src(y)", not bad,
            f"pair ({fmt(bad[0][0])},{fmt(bad[0][1])})" if bad else None)

    bad = None
    for x, y, z in g.composable_triples():
        lhs = g.comp.get((g.comp[(x, y)], z))
        rhs = g.comp.get((x, g.comp[(y, z)]))
        if lhs is None or rhs is None or lhs != rhs:
            bad = (x, y, z)
            break
    rep.add("associativity", bad is None,
            f"triple ({fmt(bad[0])},{fmt(bad[1])},{fmt(bad[2])})" if bad else None)

    bad = [x for x in g.arrows if g.inv[g.inv[x]] != x]
    rep.add("inv involutive", not bad, fmt(bad[0]) if bad else None)

    bad = [x for x in g.arrows
           if g.comp.get((x, g.inv[x])) != g.unit_arrow[g.rng[x]]
           or g.comp.get((g.inv[x], x)) != g.unit_arrow[g.src[x]]]
    rep.add("x.inv(x) and inv(x).x are units", not bad, fmt(bad[0]) if bad else None)

    bad = [u for u in g.units
           if g.src[g.unit_arrow[u]] != u or g.rng[g.unit_arrow[u]] != u]
    rep.add("unit arrows sit at their unit", not bad, fmt(bad[0]) if bad else None)

    bad = None
    for x in g.arrows:
        if g.comp.get((x, g.unit_arrow[g.src[x]])) != x:
            bad = x
            break
        if g.comp.get((g.unit_arrow[g.rng[x]], x)) != x:
            bad = x
            break
    rep.add("unit arrows are two-sided identities", bad is None,
            fmt(bad) if bad is not None else None)
    return rep


# ---------------------------------------------------------------------------
# group actions on groupoids


@dataclass
class GroupAction:
    """A finite group acting on a groupoid by automorphisms."""

    group: FiniteGroup
    target: FiniteGroupoid
    act: dict
    side: str  # "left" or "right"
    _unit_act: dict = field(default=None, repr=False, compare=False)

    def apply(self, t, x):
        return self.act[(t, x)]

    def unit_image(self, t, u):
        if self._unit_act is None:
            self._unit_act = {}
        key = (t, u)
        if key not in self._unit_act:
            self._unit_act[key] = self.target.rng[self.act[(t, self.target.unit_arrow[u])]]
        return self._unit_act[key]

    def converted(self) -> "GroupAction":
        """The same orbits viewed from the opposite side (t acts as inv(t))."""
        flipped = {(t, x): self.act[(self.group.inv_elem(t), x)]
                   for (t, x) in self.act}
        side = "right" if self.side == "left" else "left"
        return GroupAction(self.group, self.target, flipped, side)


def trivial_action(group: FiniteGroup, target: FiniteGroupoid, side: str = "left") -> GroupAction:
    act = {(t, x): x for t in group.elements for x in target.arrows}
    return GroupAction(group, target, act, side)


def action_from_unit_map(group: FiniteGroup, target: FiniteGroupoid,
                         unit_maps: dict, side: str) -> GroupAction:
    """Lift permutations of the units of a pair groupoid to both coordinates."""
    act = {}
    for t in group.elements:
        perm = unit_maps[t]
        for (i, j) in target.arrows:
            act[(t, (i, j))] = (perm[i], perm[j])
    return GroupAction(group, target, act, side)


def check_action(a: GroupAction) -> ValidationReport:
    """Automorphism and group-law axioms; properness is noted as vacuous."""
    rep = ValidationReport(subject=f"{a.side} group action")
    g, x = a.group, a.target
    if a.side not in ("left", "right"):
        rep.add("side flag valid", False, a.side)
        return rep
    missing = [(t, ar) for t in g.elements for ar in x.arrows if (t, ar) not in a.act]
    rep.add("action total", not missing,
            f"({fmt(missing[0][0])},{fmt(missing[0][1])})" if missing else None)
    if missing:
        return rep

    bad = next((t for t in g.elements
                if sorted(map(sort_key, (a.act[(t, ar)] for ar in x.arrows)))
                != sorted(map(sort_key, x.arrows))), None)
    rep.add("each element acts bijectively", bad is None,
            fmt(bad) if bad is not None else None)

    bad = None
    for t in g.elements:
        for p, q in x.composable_pairs():
            tp, tq = a.act[(t, p)], a.act[(t, q)]
            if not x.composable(tp, tq) or x.comp[(tp, tq)] != a.act[(t, x.comp[(p, q)])]:
                bad = (t, p, q)
                break
        if bad:
            break
    rep.add("acts by automorphisms (composition)", bad is None,
            f"({fmt(bad[0])},{fmt(bad[1])},{fmt(bad[2])})" if bad else None)

    bad = next(((t, ar) for t in g.elements for ar in x.arrows
                if a.act[(t, x.inv[ar])] != x.inv[a.act[(t, ar)]]), None)
    rep.add("acts by automorphisms (inverse)", bad is None,
            f"({fmt(bad[0])},{fmt(bad[1])})" if bad else None)

    bad = next((ar for ar in x.arrows if a.act[(g.identity, ar)] != ar), None)
    rep.add("identity acts trivially", bad is None, fmt(bad) if bad is not None else None)

    bad = None
    for s, t in itertools.product(g.elements, repeat=2):
        prod = g.mul(s, t) if a.side == "left" else g.mul(t, s)
        for ar in x.arrows:
            if a.act[(s, a.act[(t, ar)])] != a.act[(prod, ar)]:
                bad = (s, t, ar)
                break
        if bad:
            break
    rep.add("group law", bad is None,
            f"({fmt(bad[0])},{fmt(bad[1])},{fmt(bad[2])})" if bad else None)

    rep.note("properness: vacuously true (finite discrete space)")
    return rep


def is_free(a: GroupAction) -> bool:
    """True iff act(t, x) == x implies t == identity, over all pairs."""
    e = a.group.identity
    return all(a.act[(t, x)] != x
               for t in a.group.elements if t != e
               for x in a.target.arrows)


def require_free(a: GroupAction, context: str) -> None:
    e = a.group.identity
    for t in a.group.elements:
        if t == e:
            continue
        for x in a.target.arrows:
            if a.act[(t, x)] == x:
                raise NonFreeActionError(
                    f"{context}: action not free, element {fmt(t)} fixes arrow {fmt(x)}"
                )


def actions_commute(left: GroupAction, right: GroupAction):
    """Witness (t, k, x) with (t.x).k != t.(x.k), or None if they commute."""
    for t in left.group.elements:
        for k in right.group.elements:
            for x in left.target.arrows:
                if right.act[(k, left.act[(t, x)])] != left.act[(t, right.act[(k, x)])]:
                    return (t, k, x)
    return None


# ---------------------------------------------------------------------------
# groupoid actions on finite sets


@dataclass
class SpaceAction:
    """A groupoid acting on a finite set along a fibring map.

    Left actions: act[(x, u)] defined iff src(x) == fibring(u), and
    fibring(x.u) == rng(x).  Right actions: act[(x, u)] (meaning u.x) defined
    iff fibring(u) == rng(x), and fibring(u.x) == src(x).
    """

    groupoid: FiniteGroupoid
    space: tuple
    fibring: dict
    act: dict
    side: str

    def defined(self, x, u) -> bool:
        return (x, u) in self.act

    def apply(self, x, u):
        return self.act[(x, u)]


def check_space_action(a: SpaceAction) -> ValidationReport:
    rep = ValidationReport(subject=f"{a.side} groupoid action on a set")
    g = a.groupoid
    if a.side not in ("left", "right"):
        rep.add("side flag valid", False, a.side)
        return rep

    bad = [u for u in a.space if a.fibring.get(u) not in set(g.units)]
    rep.add("fibring total with unit values", not bad, fmt(bad[0]) if bad else None)
    if bad:
        return rep

    left = a.side == "left"
    dom = {(x, u) for x in g.arrows for u in a.space
           if (g.src[x] if left else g.rng[x]) == a.fibring[u]}
    missing = dom - set(a.act)
    extra = set(a.act) - dom
    wit = next(iter(missing or extra), None)
    rep.add("defined iff fibring matches", not missing and not extra,
            f"({fmt(wit[0])},{fmt(wit[1])})" if wit else None)
    if missing:
        return rep

    bad = next(((x, u) for (x, u), v in a.act.items()
                if v not in set(a.space)
                or a.fibring[v] != (g.rng[x] if left else g.src[x])), None)
    rep.add("fibring of the image", bad is None,
            f"({fmt(bad[0])},{fmt(bad[1])})" if bad else None)
    if bad:
        return rep

    sentinel = object()
    bad = None
    for x, y in g.composable_pairs():
        xy = g.comp.get((x, y), sentinel)
        if left:
            for u in a.space:
                if (y, u) not in a.act:
                    continue
                step = a.act.get((x, a.act[(y, u)]), sentinel)
                if a.act.get((xy, u), sentinel) is sentinel or step is sentinel \
                        or a.act[(xy, u)] != step:
                    bad = (x, y, u)
                    break
        else:
            for u in a.space:
                if (x, u) not in a.act:
                    continue
                step = a.act.get((y, a.act[(x, u)]), sentinel)
                if a.act.get((xy, u), sentinel) is sentinel or step is sentinel \
                        or a.act[(xy, u)] != step:
                    bad = (x, y, u)
                    break
        if bad:
            break
    rep.add("compatible with composition", bad is None,
            f"({fmt(bad[0])},{fmt(bad[1])},{fmt(bad[2])})" if bad else None)

    bad = next((u for u in a.space
                if a.act[(g.unit_arrow[a.fibring[u]], u)] != u), None)
    rep.add("unit arrows act identically", bad is None,
            fmt(bad) if bad is not None else None)
    return rep


def left_translation_action(g: FiniteGroupoid) -> SpaceAction:
    """g acting on its own arrow set by composition on the left."""
    act = {(x, y): g.comp[(x, y)] for x, y in g.composable_pairs()}
    return SpaceAction(g, tuple(g.arrows), dict(g.rng), act, "left")


def group_set_action(group: FiniteGroup, points, mapping: dict, side: str) -> SpaceAction:
    """A group acting on a finite set, viewed as a one-unit groupoid action."""
    pts = tuple(points)
    unit = group.units[0]
    act = {(t, u): mapping[(t, u)] for t in group.elements for u in pts}
    return SpaceAction(group, pts, {u: unit for u in pts}, act, side)


def space_action_is_free(a: SpaceAction) -> bool:
    g = a.groupoid
    return all(v != u or g.is_unit_arrow(x) for (x, u), v in a.act.items())


# ---------------------------------------------------------------------------
# transformation groupoids


def transformation_groupoid(x: FiniteGroupoid, a: SpaceAction) -> FiniteGroupoid:
    """Pairs (arrow, point) with (x, y.u)(y, u) = (xy, u).

    Units are the pairs (fibring(u), u), one for each point of the space.
    """
    if a.side != "left" or a.groupoid != x:
        raise InvalidStructureError("transformation groupoid needs a left action of x")
    check_space_action(a).require("transformation_groupoid")

    arrows = tuple((ar, u) for ar in x.arrows for u in a.space if (ar, u) in a.act)
    units = tuple((a.fibring[u], u) for u in a.space)
    src = {(ar, u): (x.src[ar], u) for (ar, u) in arrows}
    rng = {(ar, u): (x.rng[ar], a.act[(ar, u)]) for (ar, u) in arrows}
    comp = {}
    for p, q in x.composable_pairs():
        for u in a.space:
            if (q, u) in a.act:
                comp[((p, a.act[(q, u)]), (q, u))] = (x.comp[(p, q)], u)
    inv = {(ar, u): (x.inv[ar], a.act[(ar, u)]) for (ar, u) in arrows}
    unit_arrow = {(v, u): (x.unit_arrow[v], u) for (v, u) in units}
    return FiniteGroupoid(units, arrows, src, rng, comp, inv, unit_arrow)


# ---------------------------------------------------------------------------
# semidirect products


def semidirect_left(x: FiniteGroupoid, a: GroupAction) -> FiniteGroupoid:
    """Arrows (x, s) with (x, s)(y, t) = (x(s.y), st); units (u, e)."""
    if a.side != "left" or a.target != x:
        raise InvalidStructureError("semidirect_left needs a left action on x")
    check_action(a).require("semidirect_left")
    g = a.group
    e = g.identity
    arrows = tuple((ar, s) for ar in x.arrows for s in g.elements)
    units = tuple((u, e) for u in x.units)
    src = {(ar, s): (a.unit_image(g.inv_elem(s), x.src[ar]), e) for (ar, s) in arrows}
    rng = {(ar, s): (x.rng[ar], e) for (ar, s) in arrows}
    comp = {}
    for (p, s) in arrows:
        for (q, t) in arrows:
            sq = a.act[(s, q)]
            if x.composable(p, sq):
                comp[((p, s), (q, t))] = (x.comp[(p, sq)], g.mul(s, t))
    inv = {(ar, s): (a.act[(g.inv_elem(s), x.inv[ar])], g.inv_elem(s))
           for (ar, s) in arrows}
    unit_arrow = {(u, _e): (x.unit_arrow[u], e) for (u, _e) in units}
    return FiniteGroupoid(units, arrows, src, rng, comp, inv, unit_arrow)


def semidirect_right(a: GroupAction, x: FiniteGroupoid) -> FiniteGroupoid:
    """Arrows (s, x) with (s, x)(t, y) = (st, (x.t)y); units (e, u)."""
    if a.side != "right" or a.target != x:
        raise InvalidStructureError("semidirect_right needs a right action on x")
    check_action(a).require("semidirect_right")
    g = a.group
    e = g.identity
    arrows = tuple((s, ar) for s in g.elements for ar in x.arrows)
    units = tuple((e, u) for u in x.units)
    src = {(s, ar): (e, x.src[ar]) for (s, ar) in arrows}
    rng = {(s, ar): (e, a.unit_image(g.inv_elem(s), x.rng[ar])) for (s, ar) in arrows}
    comp = {}
    for (s, p) in arrows:
        for (t, q) in arrows:
            pt = a.act[(t, p)]
            if x.composable(pt, q):
                comp[((s, p), (t, q))] = (g.mul(s, t), x.comp[(pt, q)])
    inv = {(s, ar): (g.inv_elem(s), a.act[(g.inv_elem(s), x.inv[ar])])
           for (s, ar) in arrows}
    unit_arrow = {(_e, u): (e, x.unit_arrow[u]) for (_e, u) in units}
    return FiniteGroupoid(units, arrows, src, rng, comp, inv, unit_arrow)


# ---------------------------------------------------------------------------
# quotients by free actions


@dataclass
class QuotientMap:
    """Orbit data of a free right action: canonical representatives and shifts.

    arrow_map[x] is the minimal arrow in the orbit of x; shift[x] is the
    unique group element with act(shift[x], arrow_map[x]) == x.  unit_map
    and unit_shift are the induced data on units.
    """

    action: GroupAction
    arrow_map: dict
    shift: dict
    unit_map: dict
    unit_shift: dict

    def rep(self, x):
        return self.arrow_map[x]


def quotient_groupoid(x: FiniteGroupoid, a: GroupAction) -> tuple[FiniteGroupoid, QuotientMap]:
    """Orbit groupoid of a free right action, (x.H)(y.H) = (xy).H.

    The composite is computed on representatives after the unique shift that
    matches sources, which exists exactly because the action is free.
    """
    if a.side != "right" or a.target != x:
        raise InvalidStructureError("quotient_groupoid needs a right action on x")
    check_action(a).require("quotient_groupoid")
    require_free(a, "quotient_groupoid")
    h = a.group

    arrow_map, shift = {}, {}
    for ar in x.arrows:
        orbit = {a.act[(t, ar)]: t for t in h.elements}
        rep = canonical_min(orbit.keys())
        arrow_map[ar] = rep
        # shift satisfies act(shift[ar], rep) == ar
        for t in h.elements:
            if a.act[(t, rep)] == ar:
                shift[ar] = t
                break
    unit_map, unit_shift = {}, {}
    for u in x.units:
        orbit = {a.unit_image(t, u) for t in h.elements}
        rep = canonical_min(orbit)
        unit_map[u] = rep
        unit_shift[u] = _unique_unit_shift(a, rep, u)

    q_arrows = tuple(sorted(set(arrow_map.values()), key=sort_key))
    q_units = tuple(sorted(set(unit_map.values()), key=sort_key))
    src = {p: unit_map[x.src[p]] for p in q_arrows}
    rng = {p: unit_map[x.rng[p]] for p in q_arrows}
    comp = {}
    for p in q_arrows:
        for q in q_arrows:
            if src[p] == rng[q]:
                t = _unique_unit_shift(a, x.src[p], x.rng[q])
                comp[(p, q)] = arrow_map[x.comp[(a.act[(t, p)], q)]]
    inv = {p: arrow_map[x.inv[p]] for p in q_arrows}
    unit_arrow = {u: arrow_map[x.unit_arrow[u]] for u in q_units}
    quot = FiniteGroupoid(q_units, q_arrows, src, rng, comp, inv, unit_arrow)
    return quot, QuotientMap(a, arrow_map, shift, unit_map, unit_shift)


def _unique_unit_shift(a: GroupAction, u_from, u_to):
    """The unique t with unit_image(t, u_from) == u_to (action pre-checked free)."""
    hits = [t for t in a.group.elements if a.unit_image(t, u_from) == u_to]
    if len(hits) != 1:
        raise InternalConsistencyError(
            f"expected a unique shift from {fmt(u_from)} to {fmt(u_to)}, found {len(hits)}"
        )
    return hits[0]


def orbit_space_action(x: FiniteGroupoid, a: GroupAction,
                       _quotient: tuple | None = None) -> SpaceAction:
    """x/H acting on the arrow set of x by (x.H).y = xy when sources match."""
    quot, qmap = _quotient if _quotient is not None else quotient_groupoid(x, a)
    act = {}
    for p in quot.arrows:
        for z in x.arrows:
            if qmap.unit_map[x.rng[z]] == quot.src[p]:
                t = _unique_unit_shift(a, x.src[p], x.rng[z])
                act[(p, z)] = x.comp[(a.act[(t, p)], z)]
    fibring = {z: qmap.unit_map[x.rng[z]] for z in x.arrows}
    return SpaceAction(quot, tuple(x.arrows), fibring, act, "left")


def orbit_space_action_right(x: FiniteGroupoid, g: GroupAction,
                             _quotient: tuple | None = None) -> SpaceAction:
    """G\\x acting on the right of the arrow set of x, y.(G.x) = yx."""
    gr = g.converted() if g.side == "left" else g
    quot, qmap = _quotient if _quotient is not None else quotient_groupoid(x, gr)
    act = {}
    for p in quot.arrows:
        for z in x.arrows:
            if qmap.unit_map[x.src[z]] == quot.rng[p]:
                t = _unique_unit_shift(gr, x.rng[p], x.src[z])
                act[(p, z)] = x.comp[(z, gr.act[(t, p)])]
    fibring = {z: qmap.unit_map[x.src[z]] for z in x.arrows}
    return SpaceAction(quot, tuple(x.arrows), fibring, act, "right")


# ---------------------------------------------------------------------------
# covariant pairs and semidirect-product actions


def check_covariant(g: GroupAction, s1: SpaceAction, s2: SpaceAction) -> bool:
    """True iff s.(x.u) == (s.x).(s.u) for all defined pairs, both sides.

    ``g`` is the group action on the groupoid, ``s1`` the group action on the
    set, ``s2`` the groupoid action on the set; all on the same side.
    """
    return _covariance_witness(g, s1, s2) is None


def _covariance_witness(g: GroupAction, s1: SpaceAction, s2: SpaceAction):
    grp = g.group
    for t in grp.elements:
        for u in s2.space:
            if s2.fibring[s1.act[(t, u)]] != g.unit_image(t, s2.fibring[u]):
                return (None, t, u)
    for t in grp.elements:
        for (x, u) in s2.act:
            lhs = s1.act[(t, s2.act[(x, u)])]
            tx, tu = g.act[(t, x)], s1.act[(t, u)]
            if (tx, tu) not in s2.act or lhs != s2.act[(tx, tu)]:
                return (x, t, u)
    return None


def semidirect_space_action(g: GroupAction, s1: SpaceAction, s2: SpaceAction,
                            semidirect: FiniteGroupoid | None = None) -> SpaceAction:
    """Left action of x|xG on the set, (x, t).u = x.(t.u) when defined."""
    if g.side != "left" or s1.side != "left" or s2.side != "left":
        raise InvalidStructureError("semidirect_space_action needs left-sided data")
    if not check_covariant(g, s1, s2):
        wit = _covariance_witness(g, s1, s2)
        raise InvalidStructureError(
            f"actions not covariant at (x,t,u)=({fmt(wit[0])},{fmt(wit[1])},{fmt(wit[2])})"
        )
    sd = semidirect if semidirect is not None else semidirect_left(g.target, g)
    e = g.group.identity
    act = {}
    for (x, t) in sd.arrows:
        for u in s2.space:
            tu = s1.act[(t, u)]
            if (x, tu) in s2.act:
                act[((x, t), u)] = s2.act[(x, tu)]
    fibring = {u: (s2.fibring[u], e) for u in s2.space}
    return SpaceAction(sd, tuple(s2.space), fibring, act, "left")


def semidirect_right_space_action(h: GroupAction, s1: SpaceAction, s2: SpaceAction,
                                  semidirect: FiniteGroupoid | None = None) -> SpaceAction:
    """Right action of H|xx on the set, u.(h, x) = (u.h).x when defined."""
    if h.side != "right" or s1.side != "right" or s2.side != "right":
        raise InvalidStructureError("semidirect_right_space_action needs right-sided data")
    wit = _covariance_witness(h, s1, s2)
    if wit is not None:
        raise InvalidStructureError(
            f"actions not covariant at (x,h,u)=({fmt(wit[0])},{fmt(wit[1])},{fmt(wit[2])})"
        )
    sd = semidirect if semidirect is not None else semidirect_right(h, h.target)
    e = h.group.identity
    act = {}
    for (k, x) in sd.arrows:
        for u in s2.space:
            uk = s1.act[(k, u)]
            if (x, uk) in s2.act:
                act[((k, x), u)] = s2.act[(x, uk)]
    fibring = {u: (e, s2.fibring[u]) for u in s2.space}
    return SpaceAction(sd, tuple(s2.space), fibring, act, "right")


# ---------------------------------------------------------------------------
# two-sided equivalences


@dataclass
class SymmetricData:
    """Provenance of an equivalence built from commuting group actions."""

    base: FiniteGroupoid
    g_action: GroupAction
    h_action: GroupAction
    h_quotient: FiniteGroupoid
    h_map: QuotientMap
    g_quotient: FiniteGroupoid
    g_map: QuotientMap
    g_on_quotient: GroupAction
    h_on_quotient: GroupAction


@dataclass
class GroupoidEquivalence:
    """A finite set with commuting free left/right groupoid actions."""

    left_action: SpaceAction
    right_action: SpaceAction
    symmetric: SymmetricData | None = None

    @property
    def left_groupoid(self) -> FiniteGroupoid:
        return self.left_action.groupoid

    @property
    def right_groupoid(self) -> FiniteGroupoid:
        return self.right_action.groupoid

    @property
    def space(self) -> tuple:
        return self.left_action.space

    @property
    def rho(self) -> dict:
        return self.left_action.fibring

    @property
    def sigma(self) -> dict:
        return self.right_action.fibring

    def left_apply(self, p, z):
        return self.left_action.act[(p, z)]

    def right_apply(self, z, q):
        return self.right_action.act[(q, z)]

    def left_defined(self, p, z) -> bool:
        return (p, z) in self.left_action.act

    def right_defined(self, z, q) -> bool:
        return (q, z) in self.right_action.act


def symmetric_groupoid_equivalence(x: FiniteGroupoid, g: GroupAction,
                                   h: GroupAction) -> GroupoidEquivalence:
    """The arrow set of x as an (x/H x| G) - (H |x G\\x) equivalence.

    Requires free commuting actions: g on the left, h on the right.
    """
    if g.side != "left" or h.side != "right":
        raise InvalidStructureError("expected a left action g and a right action h")
    check_action(g).require("symmetric_groupoid_equivalence")
    check_action(h).require("symmetric_groupoid_equivalence")
    require_free(g, "symmetric_groupoid_equivalence")
    require_free(h, "symmetric_groupoid_equivalence")
    wit = actions_commute(g, h)
    if wit is not None:
        raise InvalidStructureError(
            f"actions do not commute at (t,h,x)=({fmt(wit[0])},{fmt(wit[1])},{fmt(wit[2])})"
        )

    # left side: quotient by H, then the semidirect product with G
    yh, hmap = quotient_groupoid(x, h)
    g_on_yh = GroupAction(
        g.group, yh,
        {(t, p): hmap.arrow_map[g.act[(t, p)]] for t in g.group.elements for p in yh.arrows},
        "left",
    )
    p_groupoid = semidirect_left(yh, g_on_yh)
    g_on_space = group_set_action(
        g.group, x.arrows,
        {(t, z): g.act[(t, z)] for t in g.group.elements for z in x.arrows}, "left")
    left_base = orbit_space_action(x, h, _quotient=(yh, hmap))
    left_action = semidirect_space_action(g_on_yh, g_on_space, left_base,
                                          semidirect=p_groupoid)

    # right side: quotient by G, then the semidirect product with H
    gr = g.converted()
    yg, gmap = quotient_groupoid(x, gr)
    h_on_yg = GroupAction(
        h.group, yg,
        {(k, p): gmap.arrow_map[h.act[(k, p)]] for k in h.group.elements for p in yg.arrows},
        "right",
    )
    q_groupoid = semidirect_right(h_on_yg, yg)
    h_on_space = group_set_action(
        h.group, x.arrows,
        {(k, z): h.act[(k, z)] for k in h.group.elements for z in x.arrows}, "right")
    right_base = orbit_space_action_right(x, g, _quotient=(yg, gmap))
    right_action = semidirect_right_space_action(h_on_yg, h_on_space, right_base,
                                                 semidirect=q_groupoid)

    sym = SymmetricData(x, g, h, yh, hmap, yg, gmap, g_on_yh, h_on_yg)
    return GroupoidEquivalence(left_action, right_action, sym)


def left_bracket(e: GroupoidEquivalence, z1, z2):
    """The unique left-groupoid arrow p with z1 == p.z2 (same sigma fiber)."""
    if e.sigma[z1] != e.sigma[z2]:
        raise InvalidStructureError(
            f"left_bracket needs sigma({fmt(z1)}) == sigma({fmt(z2)})"
        )
    if e.symmetric is not None:
        sym = e.symmetric
        x, g = sym.base, sym.g_action
        hits = [t for t in g.group.elements
                if g.unit_image(t, x.src[z2]) == x.src[z1]]
        if len(hits) > 1:
            raise InternalConsistencyError("multiple translates in left_bracket")
        if not hits:
            raise InvalidStructureError(
                f"no group translate matches sources of {fmt(z1)}, {fmt(z2)}"
            )
        t = hits[0]
        w = x.comp[(z1, g.act[(t, x.inv[z2])])]
        return (sym.h_map.arrow_map[w], t)
    hits = [p for p in e.left_groupoid.arrows
            if e.left_defined(p, z2) and e.left_apply(p, z2) == z1]
    if len(hits) > 1:
        raise InternalConsistencyError("left translate not unique; action not free")
    if not hits:
        raise InvalidStructureError(
            f"no left translate carries {fmt(z2)} to {fmt(z1)}"
        )
    return hits[0]


def right_bracket(e: GroupoidEquivalence, z1, z2):
    """The unique right-groupoid arrow q with z2 == z1.q (same rho fiber)."""
    if e.rho[z1] != e.rho[z2]:
        raise InvalidStructureError(
            f"right_bracket needs rho({fmt(z1)}) == rho({fmt(z2)})"
        )
    if e.symmetric is not None:
        sym = e.symmetric
        x, h = sym.base, sym.h_action
        hits = [k for k in h.group.elements
                if h.unit_image(k, x.rng[z1]) == x.rng[z2]]
        if len(hits) > 1:
            raise InternalConsistencyError("multiple translates in right_bracket")
        if not hits:
            raise InvalidStructureError(
                f"no group translate matches ranges of {fmt(z1)}, {fmt(z2)}"
            )
        k = hits[0]
        w = x.comp[(h.act[(k, x.inv[z1])], z2)]
        return (k, sym.g_map.arrow_map[w])
    hits = [q for q in e.right_groupoid.arrows
            if e.right_defined(z1, q) and e.right_apply(z1, q) == z2]
    if len(hits) > 1:
        raise InternalConsistencyError("right translate not unique; action not free")
    if not hits:
        raise InvalidStructureError(
            f"no right translate carries {fmt(z1)} to {fmt(z2)}"
        )
    return hits[0]


def verify_groupoid_equivalence(e: GroupoidEquivalence) -> ValidationReport:
    """Exhaustive check of the equivalence axioms plus bracket identities."""
    rep = ValidationReport(subject="groupoid equivalence")
    p_gpd, q_gpd = e.left_groupoid, e.right_groupoid
    z_set = e.space

    rep.merge(validate_groupoid(p_gpd), prefix="left groupoid: ")
    rep.merge(validate_groupoid(q_gpd), prefix="right groupoid: ")
    if not rep.ok:
        return rep
    rep.merge(check_space_action(e.left_action), prefix="left action: ")
    rep.merge(check_space_action(e.right_action), prefix="right action: ")
    if not rep.ok:
        return rep

    bad = next(((p, z) for (p, z), v in e.left_action.act.items()
                if v == z and not p_gpd.is_unit_arrow(p)), None)
    rep.add("(i) left action free", bad is None,
            f"({fmt(bad[0])},{fmt(bad[1])})" if bad else None)

    bad = next(((q, z) for (q, z), v in e.right_action.act.items()
                if v == z and not q_gpd.is_unit_arrow(q)), None)
    rep.add("(ii) right action free", bad is None,
            f"({fmt(bad[0])},{fmt(bad[1])})" if bad else None)

    bad = None
    for (p, z) in e.left_action.act:
        for q in q_gpd.arrows:
            if not e.right_defined(z, q):
                continue
            if not e.right_defined(e.left_apply(p, z), q) or \
               not e.left_defined(p, e.right_apply(z, q)) or \
               e.right_apply(e.left_apply(p, z), q) != e.left_apply(p, e.right_apply(z, q)):
                bad = (p, z, q)
                break
        if bad:
            break
    rep.add("(iii) actions commute", bad is None,
            f"({fmt(bad[0])},{fmt(bad[1])},{fmt(bad[2])})" if bad else None)

    # (iv) rho is right-invariant and induces a bijection Z/Q -> left units
    bad = next(((q, z) for (q, z), v in e.right_action.act.items()
                if e.rho[v] != e.rho[z]), None)
    rep.add("(iv) rho invariant under the right action", bad is None,
            f"({fmt(bad[0])},{fmt(bad[1])})" if bad else None)
    orbits = _orbit_partition(z_set, ((z, v) for (q, z), v in e.right_action.act.items()))
    rho_vals = {canonical_min(o): {e.rho[z] for z in o} for o in orbits}
    bad = next((o for o, vals in rho_vals.items() if len(vals) != 1), None)
    single = bad is None
    vals = [next(iter(v)) for v in rho_vals.values()] if single else []
    bij = single and len(set(map(fmt, vals))) == len(vals) and \
        set(map(fmt, vals)) == set(map(fmt, p_gpd.units))
    rep.add("(iv) rho factors to a bijection onto left units", bij,
            None if bij else (f"orbit of {fmt(bad)}" if bad else "not bijective"))

    # (v) mirrored for sigma
    bad = next(((p, z) for (p, z), v in e.left_action.act.items()
                if e.sigma[v] != e.sigma[z]), None)
    rep.add("(v) sigma invariant under the left action", bad is None,
            f"({fmt(bad[0])},{fmt(bad[1])})" if bad else None)
    orbits = _orbit_partition(z_set, ((z, v) for (p, z), v in e.left_action.act.items()))
    sig_vals = {canonical_min(o): {e.sigma[z] for z in o} for o in orbits}
    bad = next((o for o, vals in sig_vals.items() if len(vals) != 1), None)
    single = bad is None
    vals = [next(iter(v)) for v in sig_vals.values()] if single else []
    bij = single and len(set(map(fmt, vals))) == len(vals) and \
        set(map(fmt, vals)) == set(map(fmt, q_gpd.units))
    rep.add("(v) sigma factors to a bijection onto right units", bij,
            None if bij else (f"orbit of {fmt(bad)}" if bad else "not bijective"))

    if not rep.ok:
        return rep

    bad = None
    seen_p, seen_q = set(), set()
    for z1 in z_set:
        for z2 in z_set:
            if e.sigma[z1] == e.sigma[z2]:
                try:
                    p = left_bracket(e, z1, z2)
                except (InvalidStructureError, InternalConsistencyError):
                    bad = ("left", z1, z2)
                    break
                seen_p.add(p)
                if not e.left_defined(p, z2) or e.left_apply(p, z2) != z1:
                    bad = ("left", z1, z2)
                    break
            if e.rho[z1] == e.rho[z2]:
                try:
                    q = right_bracket(e, z1, z2)
                except (InvalidStructureError, InternalConsistencyError):
                    bad = ("right", z1, z2)
                    break
                seen_q.add(q)
                if not e.right_defined(z1, q) or e.right_apply(z1, q) != z2:
                    bad = ("right", z1, z2)
                    break
        if bad:
            break
    rep.add("bracket characterizing identities", bad is None,
            f"{bad[0]} pair ({fmt(bad[1])},{fmt(bad[2])})" if bad else None)
    if bad is None:
        rep.add("brackets jointly surjective",
                seen_p == set(p_gpd.arrows) and seen_q == set(q_gpd.arrows))
    rep.note("properness: vacuously true (finite discrete space)")
    return rep


def _orbit_partition(points, edges) -> list[set]:
    parent = {p: p for p in points}

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for a, b in edges:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb
    groups = {}
    for p in points:
        groups.setdefault(find(p), set()).add(p)
    return list(groups.values())


# ---------------------------------------------------------------------------
# principal decomposition of a free action


@dataclass
class PrincipalDecomposition:
    """A free right action realized as a transformation groupoid.

    ``source_chart`` maps each arrow x to (orbit of x, src(x)); it is a
    groupoid isomorphism onto ``transformation`` that intertwines the group
    action (which acts on the second coordinate downstairs).
    """

    quotient: FiniteGroupoid
    quotient_map: QuotientMap
    action: SpaceAction
    transformation: FiniteGroupoid
    source_chart: dict


def principal_decomposition(x: FiniteGroupoid, h: GroupAction) -> PrincipalDecomposition:
    if h.side != "right" or h.target != x:
        raise InvalidStructureError("principal_decomposition needs a right action on x")
    require_free(h, "principal_decomposition")
    y, qmap = quotient_groupoid(x, h)

    # y acts on the units of x: (orbit of w).u = rng(w') for the unique
    # orbit member w' with src(w') == u
    act = {}
    for p in y.arrows:
        for u in x.units:
            if qmap.unit_map[u] == y.src[p]:
                hits = [h.act[(t, p)] for t in h.group.elements
                        if x.src[h.act[(t, p)]] == u]
                if len(hits) != 1:
                    raise InternalConsistencyError(
                        f"orbit of {fmt(p)} meets src fiber of {fmt(u)} {len(hits)} times"
                    )
                act[(p, u)] = x.rng[hits[0]]
    action = SpaceAction(y, tuple(x.units), dict(qmap.unit_map), act, "left")
    trans = transformation_groupoid(y, action)
    chart = {ar: (qmap.arrow_map[ar], x.src[ar]) for ar in x.arrows}

    image = set(chart.values())
    if len(image) != len(x.arrows) or image != set(trans.arrows):
        raise InternalConsistencyError("source chart is not a bijection")
    for a, b in x.composable_pairs():
        if trans.comp[(chart[a], chart[b])] != chart[x.comp[(a, b)]]:
            raise InternalConsistencyError(
                f"source chart not multiplicative at ({fmt(a)},{fmt(b)})"
            )
    for ar in x.arrows:
        for t in h.group.elements:
            p, u = chart[ar]
            if chart[h.act[(t, ar)]] != (p, h.unit_image(t, u)):
                raise InternalConsistencyError(
                    f"source chart not equivariant at ({fmt(t)},{fmt(ar)})"
                )
    return PrincipalDecomposition(y, qmap, action, trans, chart)
