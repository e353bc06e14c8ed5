"""Fell bundles with finite-dimensional fibers over finite groupoids.

Fibers are complex vector spaces with explicit bases; the multiplication
A(x) (x) A(y) -> A(xy) is stored as a structure tensor mult[(x, y)] of shape
(dim(xy), dim(x), dim(y)), and the involution A(x) -> A(inv(x)) as an
antilinear map given by the matrix star[x]: vec* = star[x] @ conj(vec).

All comparisons are entrywise with an absolute tolerance (default 1e-9);
structure constants are exact small rationals in every shipped instance.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from ._util import fmt
from .groupoids import (
    FiniteGroup,
    FiniteGroupoid,
    GroupAction,
    GroupoidEquivalence,
    GroupoidHom,
    PrincipalDecomposition,
    QuotientMap,
    SpaceAction,
    actions_commute,
    check_action,
    check_homomorphism,
    check_space_action,
    group_set_action,
    is_free,
    left_bracket,
    left_translation_action,
    make_group,
    make_unit_groupoid,
    orbit_space_action,
    principal_decomposition,
    quotient_groupoid,
    require_free,
    right_bracket,
    semidirect_left,
    semidirect_right,
    semidirect_space_action,
    symmetric_groupoid_equivalence,
    transformation_groupoid,
    trivial_action,
    verify_groupoid_equivalence,
    _unique_unit_shift,
)
from .report import (
    InternalConsistencyError,
    InvalidStructureError,
    ValidationReport,
)

DEFAULT_TOL = 1e-9


def _close(a, b, tol) -> bool:
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b)))) <= tol if np.size(a) else True


@dataclass(eq=False)
class FellBundle:
    base: FiniteGroupoid
    dim: dict
    mult: dict
    star: dict

    def multiply(self, x, y, va, vb) -> np.ndarray:
        return np.einsum("kij,i,j->k", self.mult[(x, y)], va, vb)

    def star_vec(self, x, v) -> np.ndarray:
        return self.star[x] @ np.conjugate(v)

    def total_dimension(self) -> int:
        return sum(self.dim[x] for x in self.base.arrows)

    def __repr__(self) -> str:
        return f"FellBundle({len(self.base.arrows)} fibers, total dim {self.total_dimension()})"


@dataclass
class BundleElement:
    """A vector in a single fiber, tagged by its arrow (or equivalence point)."""

    arrow: object
    vec: np.ndarray

    def __post_init__(self):
        self.vec = np.asarray(self.vec, dtype=complex)


def multiply_elements(b: FellBundle, e1: BundleElement, e2: BundleElement) -> BundleElement:
    x, y = e1.arrow, e2.arrow
    if not b.base.composable(x, y):
        raise InvalidStructureError(f"fibers at {fmt(x)}, {fmt(y)} are not composable")
    return BundleElement(b.base.comp[(x, y)], b.multiply(x, y, e1.vec, e2.vec))


def star_element(b: FellBundle, e: BundleElement) -> BundleElement:
    return BundleElement(b.base.inv[e.arrow], b.star_vec(e.arrow, e.vec))


def trivial_line_bundle(base: FiniteGroupoid) -> FellBundle:
    one = np.ones((1, 1, 1), dtype=complex)
    eye = np.eye(1, dtype=complex)
    return FellBundle(
        base=base,
        dim={x: 1 for x in base.arrows},
        mult={pair: one for pair in base.composable_pairs()},
        star={x: eye for x in base.arrows},
    )


def validate_fell_bundle(b: FellBundle, tol: float = DEFAULT_TOL) -> ValidationReport:
    """Associativity, involution, and dimension axioms, checked entrywise."""
    rep = ValidationReport(subject="fell bundle")
    g = b.base

    bad = [x for x in g.arrows if b.dim.get(x) is None or b.dim[x] < 0]
    rep.add("fiber dimensions total and nonnegative", not bad,
            fmt(bad[0]) if bad else None)
    if bad:
        return rep

    bad = [x for x in g.arrows if b.dim[x] != b.dim[g.inv[x]]]
    rep.add("dim(x) == dim(inv x)", not bad, fmt(bad[0]) if bad else None)

    pairs = set(g.composable_pairs())
    missing = pairs - set(b.mult)
    extra = set(b.mult) - pairs
    wit = next(iter(missing or extra), None)
    rep.add("mult defined exactly on composable pairs", not (missing or extra),
            f"({fmt(wit[0])},{fmt(wit[1])})" if wit else None)
    if missing:
        return rep

    bad = next(((x, y) for (x, y) in pairs
                if b.mult[(x, y)].shape != (b.dim[g.comp[(x, y)]], b.dim[x], b.dim[y])),
               None)
    rep.add("mult tensor shapes", bad is None,
            f"({fmt(bad[0])},{fmt(bad[1])})" if bad else None)

    bad = next((x for x in g.arrows
                if x not in b.star or b.star[x].shape != (b.dim[g.inv[x]], b.dim[x])),
               None)
    rep.add("star matrices present with matching shapes", bad is None,
            fmt(bad) if bad is not None else None)
    if not rep.ok:
        return rep

    worst, wit = 0.0, None
    for x, y, z in g.composable_triples():
        lhs = np.einsum("kij,lkm->lijm", b.mult[(x, y)], b.mult[(g.comp[(x, y)], z)])
        rhs = np.einsum("kjm,lik->lijm", b.mult[(y, z)], b.mult[(x, g.comp[(y, z)])])
        if lhs.size:
            d = float(np.max(np.abs(lhs - rhs)))
            if d > worst:
                worst, wit = d, (x, y, z)
    rep.record_metric("associativity", worst)
    rep.add("mult associative", worst <= tol,
            f"triple ({fmt(wit[0])},{fmt(wit[1])},{fmt(wit[2])})" if worst > tol else None)

    worst, wit = 0.0, None
    for x in g.arrows:
        d = float(np.max(np.abs(b.star[g.inv[x]] @ np.conjugate(b.star[x])
                                - np.eye(b.dim[x])))) if b.dim[x] else 0.0
        if d > worst:
            worst, wit = d, x
    rep.record_metric("involution", worst)
    rep.add("star involutive", worst <= tol, fmt(wit) if worst > tol else None)

    worst, wit = 0.0, None
    for (x, y) in pairs:
        xy = g.comp[(x, y)]
        lhs = np.einsum("kl,lij->kij", b.star[xy], np.conjugate(b.mult[(x, y)]))
        rhs = np.einsum("kab,aj,bi->kij", b.mult[(g.inv[y], g.inv[x])],
                        b.star[y], b.star[x])
        if lhs.size:
            d = float(np.max(np.abs(lhs - rhs)))
            if d > worst:
                worst, wit = d, (x, y)
    rep.record_metric("antihomomorphism", worst)
    rep.add("(ab)* == b*a*", worst <= tol,
            f"pair ({fmt(wit[0])},{fmt(wit[1])})" if worst > tol else None)

    rep.note("unit fibers are *-algebras; their C*-certification is a "
             "star_structure_report obligation")
    return rep


# ---------------------------------------------------------------------------
# group actions on bundles


@dataclass(eq=False)
class BundleAction:
    """A finite group acting on a Fell bundle by bundle automorphisms."""

    group: FiniteGroup
    bundle: FellBundle
    base_action: GroupAction
    fiber_maps: dict
    side: str

    def apply(self, t, x, vec) -> np.ndarray:
        return self.fiber_maps[(t, x)] @ vec

    def matrix(self, t, x) -> np.ndarray:
        return self.fiber_maps[(t, x)]


def identity_fiber_maps(bundle: FellBundle, base_action: GroupAction) -> dict:
    return {(t, x): np.eye(bundle.dim[x], dtype=complex)
            for t in base_action.group.elements for x in bundle.base.arrows}


def trivial_bundle_action(group: FiniteGroup, bundle: FellBundle,
                          side: str = "left") -> BundleAction:
    base = trivial_action(group, bundle.base, side)
    return BundleAction(group, bundle, base, identity_fiber_maps(bundle, base), side)


def check_bundle_action(ba: BundleAction, tol: float = DEFAULT_TOL) -> ValidationReport:
    rep = ValidationReport(subject=f"{ba.side} bundle action")
    rep.merge(check_action(ba.base_action), prefix="base: ")
    if ba.base_action.side != ba.side:
        rep.add("side matches base action", False, ba.side)
    if not rep.ok:
        return rep
    g, b, act = ba.group, ba.bundle, ba.base_action
    bad = next(((t, x) for t in g.elements for x in b.base.arrows
                if (t, x) not in ba.fiber_maps
                or ba.fiber_maps[(t, x)].shape != (b.dim[act.act[(t, x)]], b.dim[x])),
               None)
    rep.add("fiber maps cover p-equivariantly with matching shapes", bad is None,
            f"({fmt(bad[0])},{fmt(bad[1])})" if bad else None)
    if bad:
        return rep

    bad = next((x for x in b.base.arrows
                if not _close(ba.fiber_maps[(g.identity, x)], np.eye(b.dim[x]), tol)),
               None)
    rep.add("identity acts as the identity map", bad is None,
            fmt(bad) if bad is not None else None)

    worst, wit = 0.0, None
    for s, t in itertools.product(g.elements, repeat=2):
        prod = g.mul(s, t) if ba.side == "left" else g.mul(t, s)
        for x in b.base.arrows:
            lhs = ba.fiber_maps[(s, act.act[(t, x)])] @ ba.fiber_maps[(t, x)]
            d = float(np.max(np.abs(lhs - ba.fiber_maps[(prod, x)]))) if lhs.size else 0.0
            if d > worst:
                worst, wit = d, (s, t, x)
    rep.record_metric("group law", worst)
    rep.add("fiber maps satisfy the group law", worst <= tol,
            f"({fmt(wit[0])},{fmt(wit[1])},{fmt(wit[2])})" if worst > tol else None)

    worst, wit = 0.0, None
    for t in g.elements:
        for (x, y) in b.base.composable_pairs():
            tx, ty = act.act[(t, x)], act.act[(t, y)]
            lhs = np.einsum("kl,lij->kij", ba.fiber_maps[(t, b.base.comp[(x, y)])],
                            b.mult[(x, y)])
            rhs = np.einsum("kab,ai,bj->kij", b.mult[(tx, ty)],
                            ba.fiber_maps[(t, x)], ba.fiber_maps[(t, y)])
            if lhs.size:
                d = float(np.max(np.abs(lhs - rhs)))
                if d > worst:
                    worst, wit = d, (t, x, y)
    rep.record_metric("multiplicativity", worst)
    rep.add("fiber maps preserve multiplication", worst <= tol,
            f"({fmt(wit[0])},{fmt(wit[1])},{fmt(wit[2])})" if worst > tol else None)

    worst, wit = 0.0, None
    for t in g.elements:
        for x in b.base.arrows:
            tx = act.act[(t, x)]
            lhs = b.star[tx] @ np.conjugate(ba.fiber_maps[(t, x)])
            rhs = ba.fiber_maps[(t, b.base.inv[x])] @ b.star[x]
            if lhs.size:
                d = float(np.max(np.abs(lhs - rhs)))
                if d > worst:
                    worst, wit = d, (t, x)
    rep.record_metric("star equivariance", worst)
    rep.add("fiber maps preserve the involution", worst <= tol,
            f"({fmt(wit[0])},{fmt(wit[1])})" if worst > tol else None)

    rep.note("isometry: automorphisms of the *-structure are isometric for "
             "the regular-representation norms, so no norm check is stored")
    return rep


def is_free_bundle_action(ba: BundleAction) -> bool:
    """Freeness of a bundle action means freeness of the base action."""
    return is_free(ba.base_action)


def require_free_bundle_action(ba: BundleAction, context: str) -> None:
    require_free(ba.base_action, context)


# ---------------------------------------------------------------------------
# pullbacks, trivial C*-bundles, transformation bundles


def pullback_bundle(f: GroupoidHom, a: FellBundle) -> FellBundle:
    """Fiber over y is the fiber over f(y); tensors are transported verbatim."""
    check_homomorphism(f).require("pullback_bundle")
    if f.target != a.base:
        raise InvalidStructureError("pullback_bundle: homomorphism must land in the base")
    y = f.source
    return FellBundle(
        base=y,
        dim={p: a.dim[f(p)] for p in y.arrows},
        mult={(p, q): a.mult[(f(p), f(q))] for (p, q) in y.composable_pairs()},
        star={p: a.star[f(p)] for p in y.arrows},
    )


def make_trivial_cbundle(algebra, points) -> FellBundle:
    """The constant bundle with fiber a certified C*-algebra over a unit groupoid."""
    from .algebras import star_structure_report

    cert = star_structure_report(algebra)
    if not cert.is_cstar:
        raise InvalidStructureError(
            "make_trivial_cbundle: fiber algebra is not certified as a C*-algebra"
        )
    base = make_unit_groupoid(points)
    n = algebra.dimension
    return FellBundle(
        base=base,
        dim={x: n for x in base.arrows},
        mult={(x, x): algebra.struct.copy() for x in base.arrows},
        star={x: algebra.invol.copy() for x in base.arrows},
    )


def transformation_fell_bundle(a: FellBundle, act: SpaceAction) -> FellBundle:
    """Bundle over the transformation groupoid, (a, p(b).u)(b, u) = (ab, u)."""
    base = transformation_groupoid(a.base, act)
    dim = {(x, u): a.dim[x] for (x, u) in base.arrows}
    mult = {}
    for ((x, u1), (y, u)) in base.composable_pairs():
        mult[((x, u1), (y, u))] = a.mult[(x, y)]
    star = {(x, u): a.star[x] for (x, u) in base.arrows}
    return FellBundle(base, dim, mult, star)


# ---------------------------------------------------------------------------
# semidirect-product bundles


def semidirect_fell_bundle(a: FellBundle, ba: BundleAction) -> FellBundle:
    """Bundle over base x| G with (a, s)(b, t) = (a(s.b), st)."""
    if ba.side != "left" or ba.bundle.base != a.base:
        raise InvalidStructureError("semidirect_fell_bundle needs a left action on a")
    check_bundle_action(ba).require("semidirect_fell_bundle")
    g = ba.group
    act = ba.base_action
    base = semidirect_left(a.base, act)
    dim = {(x, s): a.dim[x] for (x, s) in base.arrows}
    mult = {}
    for ((x, s), (y, t)) in base.composable_pairs():
        sy = act.act[(s, y)]
        mult[((x, s), (y, t))] = np.einsum(
            "kib,bj->kij", a.mult[(x, sy)], ba.fiber_maps[(s, y)])
    star = {}
    for (x, s) in base.arrows:
        si = g.inv_elem(s)
        star[(x, s)] = ba.fiber_maps[(si, a.base.inv[x])] @ a.star[x]
    return FellBundle(base, dim, mult, star)


def semidirect_right_fell_bundle(ba: BundleAction, a: FellBundle) -> FellBundle:
    """Bundle over H |x base with (h, a)(k, b) = (hk, (a.k)b)."""
    if ba.side != "right" or ba.bundle.base != a.base:
        raise InvalidStructureError("semidirect_right_fell_bundle needs a right action on a")
    check_bundle_action(ba).require("semidirect_right_fell_bundle")
    h = ba.group
    act = ba.base_action
    base = semidirect_right(act, a.base)
    dim = {(s, x): a.dim[x] for (s, x) in base.arrows}
    mult = {}
    for ((s, x), (t, y)) in base.composable_pairs():
        xt = act.act[(t, x)]
        mult[((s, x), (t, y))] = np.einsum(
            "kaj,ai->kij", a.mult[(xt, y)], ba.fiber_maps[(t, x)])
    star = {}
    for (s, x) in base.arrows:
        si = h.inv_elem(s)
        star[(s, x)] = ba.fiber_maps[(si, a.base.inv[x])] @ a.star[x]
    return FellBundle(base, dim, mult, star)


# ---------------------------------------------------------------------------
# quotient bundles


@dataclass(eq=False)
class BundleQuotientMap:
    """Quotient data for a free right bundle action.

    base is the orbit data downstairs; fiber_transport[x] carries the fiber
    at x onto the fiber at the canonical representative of its orbit.
    """

    base: QuotientMap
    fiber_transport: dict

    def rep(self, x):
        return self.base.arrow_map[x]


def quotient_fell_bundle(a: FellBundle, ba: BundleAction) -> tuple[FellBundle, BundleQuotientMap]:
    """Orbit bundle of a free right action, (a.H)(b.H) = (ab).H.

    Fibers are identified with the fiber at the canonical orbit
    representative; freeness makes the identification well-defined.
    """
    if ba.side != "right" or ba.bundle.base != a.base:
        raise InvalidStructureError("quotient_fell_bundle needs a right action on a")
    check_bundle_action(ba).require("quotient_fell_bundle")
    require_free_bundle_action(ba, "quotient_fell_bundle")
    h = ba.group
    act = ba.base_action
    quot, qmap = quotient_groupoid(a.base, act)

    transport = {}
    for x in a.base.arrows:
        rep, t = qmap.arrow_map[x], qmap.shift[x]
        transport[x] = ba.fiber_maps[(h.inv_elem(t), x)]
        assert act.act[(t, rep)] == x

    dim = {p: a.dim[p] for p in quot.arrows}
    mult = {}
    for (p, q) in quot.composable_pairs():
        t = _unique_unit_shift(act, a.base.src[p], a.base.rng[q])
        w = a.base.comp[(act.act[(t, p)], q)]
        mult[(p, q)] = np.einsum(
            "kl,lbj,bi->kij", transport[w], a.mult[(act.act[(t, p)], q)],
            ba.fiber_maps[(t, p)])
    star = {}
    for p in quot.arrows:
        pi = a.base.inv[p]
        star[p] = transport[pi] @ a.star[p]
    bundle = FellBundle(quot, dim, mult, star)
    return bundle, BundleQuotientMap(qmap, transport)


def induced_quotient_bundle_action(a: FellBundle, g: BundleAction,
                                   quotient: tuple[FellBundle, BundleQuotientMap]) -> BundleAction:
    """The left action of G descends to the orbit bundle a/H, t.(a.H) = (t.a).H."""
    qb, qm = quotient
    base_act = GroupAction(
        g.group, qb.base,
        {(t, p): qm.base.arrow_map[g.base_action.act[(t, p)]]
         for t in g.group.elements for p in qb.base.arrows},
        "left",
    )
    fiber = {}
    for t in g.group.elements:
        for p in qb.base.arrows:
            tp = g.base_action.act[(t, p)]
            fiber[(t, p)] = qm.fiber_transport[tp] @ g.fiber_maps[(t, p)]
    return BundleAction(g.group, qb, base_act, fiber, "left")


def induced_quotient_bundle_action_right(a: FellBundle, h: BundleAction,
                                         quotient: tuple[FellBundle, BundleQuotientMap]) -> BundleAction:
    """The right action of H descends to the orbit bundle G\\a, (G.a).h = G.(a.h)."""
    qb, qm = quotient
    base_act = GroupAction(
        h.group, qb.base,
        {(k, p): qm.base.arrow_map[h.base_action.act[(k, p)]]
         for k in h.group.elements for p in qb.base.arrows},
        "right",
    )
    fiber = {}
    for k in h.group.elements:
        for p in qb.base.arrows:
            kp = h.base_action.act[(k, p)]
            fiber[(k, p)] = qm.fiber_transport[kp] @ h.fiber_maps[(k, p)]
    return BundleAction(h.group, qb, base_act, fiber, "right")


# ---------------------------------------------------------------------------
# module actions of orbit and semidirect-orbit bundles


@dataclass(eq=False)
class BundleModuleAction:
    """A Fell bundle acting on a fibered family of vector spaces.

    tensors[(p, z)] has shape (carrier_dim[base.act(p, z)], acting fiber dim,
    carrier_dim[z]) and is defined exactly where the base action is.
    """

    acting: FellBundle
    base: SpaceAction
    carrier_dims: dict
    tensors: dict


def orbit_bundle_action(a: FellBundle, ba: BundleAction) -> BundleModuleAction:
    """a/H acting on the fibers of a over its own arrow space, (a.H).b = ab."""
    require_free_bundle_action(ba, "orbit_bundle_action")
    qb, qm = quotient_fell_bundle(a, ba)
    act = ba.base_action
    base = orbit_space_action(a.base, act, _quotient=(qb.base, qm.base))
    tensors = {}
    for (p, z) in base.act:
        t = _unique_unit_shift(act, a.base.src[p], a.base.rng[z])
        tp = act.act[(t, p)]
        tensors[(p, z)] = np.einsum(
            "kaj,ai->kij", a.mult[(tp, z)], ba.fiber_maps[(t, p)])
    dims = {z: a.dim[z] for z in a.base.arrows}
    return BundleModuleAction(qb, base, dims, tensors)


def semidirect_orbit_bundle_action(a: FellBundle, g: BundleAction,
                                   h: BundleAction,
                                   _quotient: tuple | None = None) -> BundleModuleAction:
    """(a/H) x| G acting on the fibers of a, (a.H, t).b = (a.h)(t.b).

    The representative shift h with src(a).h == t.rng(b) realizes the module
    product when sources do not literally match.
    """
    _check_symmetric_bundle_hypotheses(a, g, h)
    quot = _quotient if _quotient is not None else quotient_fell_bundle(a, h)
    qb, qm = quot
    g_on_quot = induced_quotient_bundle_action(a, g, quot)
    acting = semidirect_fell_bundle(qb, g_on_quot)

    hact, gact = h.base_action, g.base_action
    g_on_space = group_set_action(
        gact.group, a.base.arrows,
        {(t, z): gact.act[(t, z)] for t in gact.group.elements for z in a.base.arrows},
        "left")
    left_base = orbit_space_action(a.base, hact, _quotient=(qb.base, qm.base))
    base = semidirect_space_action(g_on_quot.base_action, g_on_space, left_base,
                                   semidirect=acting.base)

    tensors = {}
    for ((p, t), z) in base.act:
        k = _unique_unit_shift(hact, a.base.src[p],
                               gact.unit_image(t, a.base.rng[z]))
        pk = hact.act[(k, p)]
        tz = gact.act[(t, z)]
        tensors[((p, t), z)] = np.einsum(
            "kab,ai,bj->kij", a.mult[(pk, tz)],
            h.fiber_maps[(k, p)], g.fiber_maps[(t, z)])
    dims = {z: a.dim[z] for z in a.base.arrows}
    return BundleModuleAction(acting, base, dims, tensors)


def check_module_action(m: BundleModuleAction, tol: float = DEFAULT_TOL) -> ValidationReport:
    """(pq).b == p.(q.b) entrywise over all composable module triples."""
    rep = ValidationReport(subject="bundle module action")
    rep.merge(check_space_action(m.base), prefix="base: ")
    missing = set(m.base.act) - set(m.tensors)
    rep.add("tensors cover the defined pairs", not missing,
            fmt(next(iter(missing))) if missing else None)
    if not rep.ok:
        return rep
    acting = m.acting
    worst, wit = 0.0, None
    for (q, z) in m.base.act:
        qz = m.base.act[(q, z)]
        for p in acting.base.arrows:
            if not acting.base.composable(p, q):
                continue
            pq = acting.base.comp[(p, q)]
            lhs = np.einsum("lam,mbj->labj", m.tensors[(p, qz)], m.tensors[(q, z)])
            rhs = np.einsum("lcj,cab->labj", m.tensors[(pq, z)], acting.mult[(p, q)])
            if lhs.size:
                d = float(np.max(np.abs(lhs - rhs)))
                if d > worst:
                    worst, wit = d, (p, q, z)
    rep.record_metric("module associativity", worst)
    rep.add("module action associative", worst <= tol,
            f"({fmt(wit[0])},{fmt(wit[1])},{fmt(wit[2])})" if worst > tol else None)
    return rep


def _check_symmetric_bundle_hypotheses(a: FellBundle, g: BundleAction,
                                       h: BundleAction) -> None:
    if g.side != "left" or h.side != "right":
        raise InvalidStructureError("expected a left action g and a right action h")
    if g.bundle.base != a.base or h.bundle.base != a.base:
        raise InvalidStructureError("both actions must act on the given bundle")
    check_bundle_action(g).require("bundle action g")
    check_bundle_action(h).require("bundle action h")
    require_free_bundle_action(g, "symmetric hypotheses")
    require_free_bundle_action(h, "symmetric hypotheses")
    wit = actions_commute(g.base_action, h.base_action)
    if wit is not None:
        raise InvalidStructureError(
            f"base actions do not commute at ({fmt(wit[0])},{fmt(wit[1])},{fmt(wit[2])})"
        )
    worst = 0.0
    for t in g.group.elements:
        for k in h.group.elements:
            for x in a.base.arrows:
                lhs = h.fiber_maps[(k, g.base_action.act[(t, x)])] @ g.fiber_maps[(t, x)]
                rhs = g.fiber_maps[(t, h.base_action.act[(k, x)])] @ h.fiber_maps[(k, x)]
                if lhs.size:
                    worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    if worst > DEFAULT_TOL:
        raise InvalidStructureError(
            f"fiber actions do not commute (residual {worst:.3e})"
        )


# ---------------------------------------------------------------------------
# principal decomposition for bundles


@dataclass(eq=False)
class BundleIso:
    """An arrow bijection plus per-fiber matrices between two bundles."""

    source: FellBundle
    target: FellBundle
    arrow_map: dict
    fiber_maps: dict


def verify_bundle_iso(iso: BundleIso, tol: float = DEFAULT_TOL) -> ValidationReport:
    rep = ValidationReport(subject="bundle isomorphism")
    src, tgt, amap = iso.source, iso.target, iso.arrow_map
    image = set(amap.values())
    rep.add("arrow map bijective", len(image) == len(src.base.arrows)
            and image == set(tgt.base.arrows))
    bad = next((x for x in src.base.arrows
                if iso.fiber_maps[x].shape != (tgt.dim[amap[x]], src.dim[x])
                or np.linalg.matrix_rank(iso.fiber_maps[x]) != src.dim[x]),
               None)
    rep.add("fiber maps are linear isomorphisms", bad is None,
            fmt(bad) if bad is not None else None)
    if not rep.ok:
        return rep

    worst, wit = 0.0, None
    for (x, y) in src.base.composable_pairs():
        fx, fy = amap[x], amap[y]
        if not tgt.base.composable(fx, fy) or tgt.base.comp[(fx, fy)] != amap[src.base.comp[(x, y)]]:
            rep.add("arrow map multiplicative", False, f"({fmt(x)},{fmt(y)})")
            return rep
        lhs = np.einsum("kl,lij->kij", iso.fiber_maps[src.base.comp[(x, y)]],
                        src.mult[(x, y)])
        rhs = np.einsum("kab,ai,bj->kij", tgt.mult[(fx, fy)],
                        iso.fiber_maps[x], iso.fiber_maps[y])
        if lhs.size:
            d = float(np.max(np.abs(lhs - rhs)))
            if d > worst:
                worst, wit = d, (x, y)
    rep.record_metric("multiplicativity", worst)
    rep.add("fiber maps multiplicative", worst <= tol,
            f"({fmt(wit[0])},{fmt(wit[1])})" if worst > tol else None)

    worst, wit = 0.0, None
    for x in src.base.arrows:
        lhs = tgt.star[amap[x]] @ np.conjugate(iso.fiber_maps[x])
        rhs = iso.fiber_maps[src.base.inv[x]] @ src.star[x]
        if lhs.size:
            d = float(np.max(np.abs(lhs - rhs)))
            if d > worst:
                worst, wit = d, x
    rep.record_metric("star preservation", worst)
    rep.add("fiber maps star-preserving", worst <= tol,
            fmt(wit) if worst > tol else None)
    return rep


@dataclass(eq=False)
class PrincipalFellDecomposition:
    quotient_bundle: FellBundle
    quotient_map: BundleQuotientMap
    transformation_bundle: FellBundle
    iso: BundleIso
    base: PrincipalDecomposition


def principal_fell_decomposition(a: FellBundle, ba: BundleAction) -> PrincipalFellDecomposition:
    """Realize a free right bundle action as a transformation bundle.

    tau sends a fiber element over x to its orbit representative paired with
    src(x); it is verified multiplicative, star-preserving, and equivariant.
    """
    require_free_bundle_action(ba, "principal_fell_decomposition")
    quot = quotient_fell_bundle(a, ba)
    qb, qm = quot
    pd = principal_decomposition(a.base, ba.base_action)
    trans = transformation_fell_bundle(qb, pd.action)
    arrow_map = dict(pd.source_chart)
    fiber_maps = {x: qm.fiber_transport[x] for x in a.base.arrows}
    iso = BundleIso(a, trans, arrow_map, fiber_maps)
    verify_bundle_iso(iso).require("principal_fell_decomposition")

    # equivariance: tau(a.h) == tau(a).h where H moves the space coordinate
    h = ba.group
    worst = 0.0
    for t in h.elements:
        for x in a.base.arrows:
            tx = ba.base_action.act[(t, x)]
            lhs = fiber_maps[tx] @ ba.fiber_maps[(t, x)]
            if lhs.size:
                worst = max(worst, float(np.max(np.abs(lhs - fiber_maps[x]))))
            if arrow_map[tx] != (arrow_map[x][0],
                                 ba.base_action.unit_image(t, arrow_map[x][1])):
                raise InternalConsistencyError(
                    f"tau not equivariant over ({fmt(t)},{fmt(x)})"
                )
    if worst > DEFAULT_TOL:
        raise InternalConsistencyError(
            f"tau fiber maps not equivariant (residual {worst:.3e})"
        )
    return PrincipalFellDecomposition(qb, qm, trans, iso, pd)


# ---------------------------------------------------------------------------
# equivalence bimodules


@dataclass(eq=False)
class BundleEquivalence:
    """A fibered family over an equivalence space with two-sided module data.

    The carrier fibers E(z) sit over the points of base.space; the left
    bundle acts through left_tensors[(p, z)], the right bundle through
    right_tensors[(z, q)], and the two algebra-valued inner products are
    stored as left_inner[(z1, z2)] (linear in the first slot, antilinear in
    the second) and right_inner[(z1, z2)] (antilinear in the first slot).
    """

    base: GroupoidEquivalence
    left_bundle: FellBundle
    right_bundle: FellBundle
    dims: dict
    left_tensors: dict
    right_tensors: dict
    left_inner: dict
    right_inner: dict
    provenance: str = ""


def symmetric_action_equivalence(a: FellBundle, g: BundleAction,
                                 h: BundleAction) -> BundleEquivalence:
    """The fibers of a as an (a/H x| G) - (H |x G\\a) equivalence.

    Structure maps, with t in G and k in H the unique matching translates:
      left action   (a.H, t).b = (a.k)(t.b)
      left inner    <a, b>_L  = (a(t.b*).H, t)
      right action  a.(k, G.b) = (a.k)(t.b)
      right inner   <a, b>_R  = (k, G.((a*.k)b))
    """
    _check_symmetric_bundle_hypotheses(a, g, h)
    gact, hact = g.base_action, h.base_action
    base = symmetric_groupoid_equivalence(a.base, gact, hact)

    h_quot = quotient_fell_bundle(a, h)
    hqm = h_quot[1]
    left_mod = semidirect_orbit_bundle_action(a, g, h, _quotient=h_quot)
    p_bundle = left_mod.acting
    left_tensors = dict(left_mod.tensors)

    # mirrored right side: quotient by G, then H |x (G\a)
    g_right = BundleAction(
        g.group, a,
        g.base_action.converted(),
        {(t, x): g.fiber_maps[(g.group.inv_elem(t), x)]
         for t in g.group.elements for x in a.base.arrows},
        "right",
    )
    g_quot = quotient_fell_bundle(a, g_right)
    gqb, gqm = g_quot
    h_on_gquot = induced_quotient_bundle_action_right(a, h, g_quot)
    q_bundle = semidirect_right_fell_bundle(h_on_gquot, gqb)

    right_tensors = {}
    for ((k, p), z) in base.right_action.act:
        t = _unique_unit_shift(g_right.base_action, a.base.rng[p],
                               hact.unit_image(k, a.base.src[z]))
        tp = g_right.base_action.act[(t, p)]
        right_tensors[(z, (k, p))] = np.einsum(
            "kab,ai,bj->kij", a.mult[(hact.act[(k, z)], tp)],
            h.fiber_maps[(k, z)], g_right.fiber_maps[(t, p)])

    x = a.base
    left_inner, right_inner = {}, {}
    for z1 in x.arrows:
        for z2 in x.arrows:
            if base.sigma[z1] == base.sigma[z2]:
                (_w_rep, t) = left_bracket(base, z1, z2)
                tz2i = gact.act[(t, x.inv[z2])]
                w = x.comp[(z1, tz2i)]
                twist = np.einsum("cd,dj->cj", g.fiber_maps[(t, x.inv[z2])], a.star[z2])
                left_inner[(z1, z2)] = np.einsum(
                    "lm,mic,cj->lij",
                    hqm.fiber_transport[w], a.mult[(z1, tz2i)], twist)
            if base.rho[z1] == base.rho[z2]:
                (k, _w_rep) = right_bracket(base, z1, z2)
                z1ik = hact.act[(k, x.inv[z1])]
                w = x.comp[(z1ik, z2)]
                twist = np.einsum("cd,di->ci", h.fiber_maps[(k, x.inv[z1])], a.star[z1])
                right_inner[(z1, z2)] = np.einsum(
                    "lm,mcj,ci->lij",
                    gqm.fiber_transport[w], a.mult[(z1ik, z2)], twist)

    return BundleEquivalence(
        base=base,
        left_bundle=p_bundle,
        right_bundle=q_bundle,
        dims={z: a.dim[z] for z in x.arrows},
        left_tensors=left_tensors,
        right_tensors=right_tensors,
        left_inner=left_inner,
        right_inner=right_inner,
        provenance="symmetric",
    )


def one_sided_equivalence(a: FellBundle, g: BundleAction) -> BundleEquivalence:
    """The H-trivial case: fibers of a as an (a x| G) - (G\\a) equivalence."""
    if g.side != "left":
        raise InvalidStructureError("one_sided_equivalence needs a left action")
    require_free_bundle_action(g, "one_sided_equivalence")
    triv = make_group({("e", "e"): "e"})
    h = trivial_bundle_action(triv, a, side="right")
    e = symmetric_action_equivalence(a, g, h)
    e.provenance = "one_sided"
    return e


def one_sided_transformation_equivalence(b: FellBundle, act: SpaceAction,
                                         gact: SpaceAction) -> BundleEquivalence:
    """Transformation-bundle equivalence between (b*Omega) x| G and b.

    ``act`` is the left action of the base groupoid on Omega, ``gact`` a free
    left action of a group G on Omega whose orbits are exactly the fibers of
    the fibring map, and the two actions commute.
    """
    y = b.base
    if act.side != "left" or act.groupoid != y:
        raise InvalidStructureError("needs a left action of the base groupoid")
    if gact.side != "left" or not isinstance(gact.groupoid, FiniteGroup):
        raise InvalidStructureError("needs a left group action on the space")
    if tuple(gact.space) != tuple(act.space):
        raise InvalidStructureError("the two actions must share the space")
    check_space_action(act).require("one_sided_transformation_equivalence")
    check_space_action(gact).require("one_sided_transformation_equivalence")
    grp: FiniteGroup = gact.groupoid
    e_g = grp.identity

    # principal-bundle hypothesis: G acts freely with orbits = fibring fibers
    for t in grp.elements:
        if t == e_g:
            continue
        for u in act.space:
            if gact.act[(t, u)] == u:
                raise InvalidStructureError(
                    f"group action on the space not free: {fmt(t)} fixes {fmt(u)}"
                )
    for u in act.space:
        orbit = {gact.act[(t, u)] for t in grp.elements}
        fiber = {v for v in act.space if act.fibring[v] == act.fibring[u]}
        if orbit != fiber:
            raise InvalidStructureError(
                f"orbits differ from fibring fibers at point {fmt(u)}"
            )
    for t in grp.elements:
        for (x, u) in act.act:
            if act.act[(x, gact.act[(t, u)])] != gact.act[(t, act.act[(x, u)])]:
                raise InvalidStructureError(
                    f"actions do not commute at ({fmt(x)},{fmt(t)},{fmt(u)})"
                )

    tb = transformation_fell_bundle(b, act)
    tg = tb.base
    g_on_tg = GroupAction(
        grp, tg,
        {(t, (x, u)): (x, gact.act[(t, u)])
         for t in grp.elements for (x, u) in tg.arrows},
        "left",
    )
    g_on_tb = BundleAction(grp, tb, g_on_tg, identity_fiber_maps(tb, g_on_tg), "left")
    p_bundle = semidirect_fell_bundle(tb, g_on_tb)

    g_on_z = group_set_action(
        grp, tg.arrows,
        {(t, z): g_on_tg.act[(t, z)] for t in grp.elements for z in tg.arrows},
        "left")
    left_base = semidirect_space_action(g_on_tg, g_on_z, left_translation_action(tg),
                                        semidirect=p_bundle.base)

    right_act = {}
    for (yv, u) in tg.arrows:
        for x in y.arrows:
            if y.src[yv] == y.rng[x]:
                right_act[(x, (yv, u))] = (y.comp[(yv, x)],
                                           act.act[(y.inv[x], u)])
    right_base = SpaceAction(y, tuple(tg.arrows),
                             {(yv, u): y.src[yv] for (yv, u) in tg.arrows},
                             right_act, "right")
    base = GroupoidEquivalence(left_base, right_base)

    dims = {z: b.dim[z[0]] for z in tg.arrows}
    left_tensors = {}
    for (p, z) in base.left_action.act:
        ((w, _uw), _t) = p
        left_tensors[(p, z)] = b.mult[(w, z[0])]
    right_tensors = {}
    for (x, z) in right_act:
        right_tensors[(z, x)] = b.mult[(z[0], x)]

    left_inner, right_inner = {}, {}
    for z1 in tg.arrows:
        for z2 in tg.arrows:
            y1, u1 = z1
            y2, u2 = z2
            if base.sigma[z1] == base.sigma[z2]:
                left_inner[(z1, z2)] = np.einsum(
                    "mic,cj->mij", b.mult[(y1, y.inv[y2])], b.star[y2])
            if base.rho[z1] == base.rho[z2]:
                right_inner[(z1, z2)] = np.einsum(
                    "mcj,ci->mij", b.mult[(y.inv[y1], y2)], b.star[y1])

    return BundleEquivalence(
        base=base,
        left_bundle=p_bundle,
        right_bundle=b,
        dims=dims,
        left_tensors=left_tensors,
        right_tensors=right_tensors,
        left_inner=left_inner,
        right_inner=right_inner,
        provenance="one_sided_transformation",
    )


# ---------------------------------------------------------------------------
# equivalence verification


def verify_bundle_equivalence(e: BundleEquivalence,
                              tol: float = DEFAULT_TOL) -> ValidationReport:
    """The six verification steps for an equivalence bimodule, entrywise.

    Step 1 commuting module actions; Step 2 inner products defined on the
    correct pairs and landing over the bracket arrows; Step 3 adjoint
    symmetry; Step 4 module compatibility; Step 5 the exchange identity;
    Step 6 per-fiber fullness and positivity of both inner products.
    """
    rep = ValidationReport(subject="bundle equivalence")
    base = e.base
    p_bundle, q_bundle = e.left_bundle, e.right_bundle
    p_gpd, q_gpd = base.left_groupoid, base.right_groupoid

    rep.merge(verify_groupoid_equivalence(base), prefix="base: ")
    rep.merge(validate_fell_bundle(p_bundle, tol), prefix="left bundle: ")
    rep.merge(validate_fell_bundle(q_bundle, tol), prefix="right bundle: ")
    if not rep.ok:
        return rep

    # structural coverage
    missing = set(base.left_action.act) - set(e.left_tensors)
    rep.add("left tensors cover the action", not missing,
            fmt(next(iter(missing))) if missing else None)
    missing = {(z, q) for (q, z) in base.right_action.act} - set(e.right_tensors)
    rep.add("right tensors cover the action", not missing,
            fmt(next(iter(missing))) if missing else None)
    sig_pairs = {(z1, z2) for z1 in base.space for z2 in base.space
                 if base.sigma[z1] == base.sigma[z2]}
    rho_pairs = {(z1, z2) for z1 in base.space for z2 in base.space
                 if base.rho[z1] == base.rho[z2]}
    rep.add("left inner product defined on sigma pairs",
            set(e.left_inner) == sig_pairs)
    rep.add("right inner product defined on rho pairs",
            set(e.right_inner) == rho_pairs)
    if not rep.ok:
        return rep

    def ldim(p):
        return p_bundle.dim[p]

    def qdim(q):
        return q_bundle.dim[q]

    bad = next(((p, z) for (p, z), tsr in e.left_tensors.items()
                if tsr.shape != (e.dims[base.left_apply(p, z)], ldim(p), e.dims[z])),
               None)
    rep.add("left tensor shapes", bad is None, fmt(bad) if bad else None)
    bad = next(((z, q) for (z, q), tsr in e.right_tensors.items()
                if tsr.shape != (e.dims[base.right_apply(z, q)], e.dims[z], qdim(q))),
               None)
    rep.add("right tensor shapes", bad is None, fmt(bad) if bad else None)
    if not rep.ok:
        return rep

    # Step 2: inner products land over the bracket arrows
    bad = None
    for (z1, z2), tsr in e.left_inner.items():
        p = left_bracket(base, z1, z2)
        if tsr.shape != (ldim(p), e.dims[z1], e.dims[z2]):
            bad = (z1, z2)
            break
    rep.add("step 2: left inner product lands over the left bracket",
            bad is None, fmt(bad) if bad else None)
    bad = None
    for (z1, z2), tsr in e.right_inner.items():
        q = right_bracket(base, z1, z2)
        if tsr.shape != (qdim(q), e.dims[z1], e.dims[z2]):
            bad = (z1, z2)
            break
    rep.add("step 2: right inner product lands over the right bracket",
            bad is None, fmt(bad) if bad else None)
    if not rep.ok:
        return rep

    # Step 1: the module actions commute
    worst, wit = 0.0, None
    for (p, z) in base.left_action.act:
        pz = base.left_apply(p, z)
        for q in q_gpd.arrows:
            if not base.right_defined(z, q):
                continue
            zq = base.right_apply(z, q)
            lhs = np.einsum("lmc,maj->lajc", e.right_tensors[(pz, q)],
                            e.left_tensors[(p, z)])
            rhs = np.einsum("lam,mjc->lajc", e.left_tensors[(p, zq)],
                            e.right_tensors[(z, q)])
            if lhs.size:
                d = float(np.max(np.abs(lhs - rhs)))
                if d > worst:
                    worst, wit = d, (p, z, q)
    rep.record_metric("step1 commuting", worst)
    rep.add("step 1: module actions commute", worst <= tol,
            fmt(wit) if worst > tol else None)

    # Step 3: adjoint symmetry of both inner products
    worst, wit = 0.0, None
    for (z1, z2), tsr in e.left_inner.items():
        p = left_bracket(base, z1, z2)
        p_op = left_bracket(base, z2, z1)
        if p_gpd.inv[p] != p_op:
            rep.add("step 3: left bracket antisymmetry", False, fmt((z1, z2)))
            return rep
        lhs = np.einsum("kl,lij->kij", p_bundle.star[p], np.conjugate(tsr))
        rhs = np.transpose(e.left_inner[(z2, z1)], (0, 2, 1))
        if lhs.size:
            d = float(np.max(np.abs(lhs - rhs)))
            if d > worst:
                worst, wit = d, (z1, z2)
    for (z1, z2), tsr in e.right_inner.items():
        q = right_bracket(base, z1, z2)
        q_op = right_bracket(base, z2, z1)
        if q_gpd.inv[q] != q_op:
            rep.add("step 3: right bracket antisymmetry", False, fmt((z1, z2)))
            return rep
        lhs = np.einsum("kl,lij->kij", q_bundle.star[q], np.conjugate(tsr))
        rhs = np.transpose(e.right_inner[(z2, z1)], (0, 2, 1))
        if lhs.size:
            d = float(np.max(np.abs(lhs - rhs)))
            if d > worst:
                worst, wit = d, (z1, z2)
    rep.record_metric("step3 adjoint symmetry", worst)
    rep.add("step 3: inner products adjoint-symmetric", worst <= tol,
            fmt(wit) if worst > tol else None)

    # Step 4: module compatibility on both sides
    worst, wit = 0.0, None
    for (p, z2) in base.left_action.act:
        z2p = base.left_apply(p, z2)
        for z3 in base.space:
            if base.sigma[z2] != base.sigma[z3]:
                continue
            b23 = left_bracket(base, z2, z3)
            if not p_gpd.composable(p, b23) or \
               p_gpd.comp[(p, b23)] != left_bracket(base, z2p, z3):
                rep.add("step 4: left bracket composition", False, fmt((p, z2, z3)))
                return rep
            lhs = np.einsum("lmk,maj->lajk", e.left_inner[(z2p, z3)],
                            e.left_tensors[(p, z2)])
            rhs = np.einsum("laq,qjk->lajk", p_bundle.mult[(p, b23)],
                            e.left_inner[(z2, z3)])
            if lhs.size:
                d = float(np.max(np.abs(lhs - rhs)))
                if d > worst:
                    worst, wit = d, (p, z2, z3)
    for (z2, q) in ((z, q) for (q, z) in base.right_action.act):
        z2q = base.right_apply(z2, q)
        for z1 in base.space:
            if base.rho[z1] != base.rho[z2]:
                continue
            b12 = right_bracket(base, z1, z2)
            if not q_gpd.composable(b12, q) or \
               q_gpd.comp[(b12, q)] != right_bracket(base, z1, z2q):
                rep.add("step 4: right bracket composition", False, fmt((z1, z2, q)))
                return rep
            lhs = np.einsum("lim,mjc->lijc", e.right_inner[(z1, z2q)],
                            e.right_tensors[(z2, q)])
            rhs = np.einsum("lsc,sij->lijc", q_bundle.mult[(b12, q)],
                            e.right_inner[(z1, z2)])
            if lhs.size:
                d = float(np.max(np.abs(lhs - rhs)))
                if d > worst:
                    worst, wit = d, (z1, z2, q)
    rep.record_metric("step4 module compatibility", worst)
    rep.add("step 4: inner products compatible with the module actions",
            worst <= tol, fmt(wit) if worst > tol else None)

    # Step 5: the exchange identity  <a,b>_L . c == a . <b,c>_R
    worst, wit = 0.0, None
    for (z1, z2) in e.left_inner:
        p12 = left_bracket(base, z1, z2)
        for z3 in base.space:
            if base.rho[z2] != base.rho[z3]:
                continue
            q23 = right_bracket(base, z2, z3)
            if not base.left_defined(p12, z3) or not base.right_defined(z1, q23) or \
               base.left_apply(p12, z3) != base.right_apply(z1, q23):
                rep.add("step 5: exchange identity (points)", False,
                        fmt((z1, z2, z3)))
                return rep
            lhs = np.einsum("mlk,lij->mijk", e.left_tensors[(p12, z3)],
                            e.left_inner[(z1, z2)])
            rhs = np.einsum("mil,ljk->mijk", e.right_tensors[(z1, q23)],
                            e.right_inner[(z2, z3)])
            if lhs.size:
                d = float(np.max(np.abs(lhs - rhs)))
                if d > worst:
                    worst, wit = d, (z1, z2, z3)
    rep.record_metric("step5 exchange", worst)
    rep.add("step 5: exchange identity", worst <= tol,
            fmt(wit) if worst > tol else None)

    # Step 6: per-fiber imprimitivity (fullness and positivity)
    from .algebras import fiber_algebra, regular_representation

    bad, worst_pos = None, 0.0
    rep_cache: dict = {}

    def unit_rep(bundle, unit):
        key = (id(bundle), unit)
        if key not in rep_cache:
            rep_cache[key] = regular_representation(fiber_algebra(bundle, unit))
        return rep_cache[key]

    for z in base.space:
        d = e.dims[z]
        pu = p_gpd.unit_arrow[base.rho[z]]
        tsr = e.left_inner[(z, z)].reshape(ldim(pu), d * d)
        if np.linalg.matrix_rank(tsr, tol=1e-7) != ldim(pu):
            bad = ("left fullness", z)
            break
        qu = q_gpd.unit_arrow[base.sigma[z]]
        tsr = e.right_inner[(z, z)].reshape(qdim(qu), d * d)
        if np.linalg.matrix_rank(tsr, tol=1e-7) != qdim(qu):
            bad = ("right fullness", z)
            break
        for (bundle, inner, unit) in (
            (p_bundle, e.left_inner[(z, z)], pu),
            (q_bundle, e.right_inner[(z, z)], qu),
        ):
            pi = unit_rep(bundle, unit)
            r = pi.size
            gram = np.zeros((d * r, d * r), dtype=complex)
            for i in range(d):
                for j in range(d):
                    block = pi.of_vec(inner[:, i, j])
                    gram[i * r:(i + 1) * r, j * r:(j + 1) * r] = block
            herm = 0.5 * (gram + gram.conj().T)
            if gram.size:
                worst_pos = min(worst_pos, float(np.min(np.linalg.eigvalsh(herm))))
    rep.add("step 6: inner products full on unit fibers", bad is None,
            f"{bad[0]} at {fmt(bad[1])}" if bad else None)
    rep.record_metric("step6 positivity margin", worst_pos)
    rep.add("step 6: inner products positive", worst_pos >= -tol,
            None if worst_pos >= -tol else f"min eigenvalue {worst_pos:.3e}")
    return rep


def exchange_residual(e: BundleEquivalence) -> float:
    """Max entrywise deviation of <a,b>_L . c - a . <b,c>_R over all triples."""
    base = e.base
    worst = 0.0
    for (z1, z2) in e.left_inner:
        p12 = left_bracket(base, z1, z2)
        for z3 in base.space:
            if base.rho[z2] != base.rho[z3]:
                continue
            q23 = right_bracket(base, z2, z3)
            lhs = np.einsum("mlk,lij->mijk", e.left_tensors[(p12, z3)],
                            e.left_inner[(z1, z2)])
            rhs = np.einsum("mil,ljk->mijk", e.right_tensors[(z1, q23)],
                            e.right_inner[(z2, z3)])
            if lhs.size:
                worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    return worst
