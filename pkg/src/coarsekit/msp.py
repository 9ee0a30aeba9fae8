"""Mass concentration at fixed parameters: optimal disjoint bounded-mass
families, the dimension-to-mass constant, and measure transfer along maps.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import linprog

from .controls import as_control
from .coarse_maps import CoarseMap, control_upper, maximal_r_bounded_sets
from .covers import FamilyOfSets, dim_at_scale, is_r_disjoint, make_disjoint, mesh
from .errors import CertificateError, InputError, PreconditionError
from .metric_core import FiniteMetricSpace, Subset, diameter, r_components

__all__ = [
    "ProbMeasure",
    "MassFamily",
    "best_mass_family",
    "asdim_to_msp",
    "transfer_measure_selection",
    "pushforward_measure",
    "msp_pushforward",
    "msp_pullback",
    "map_msp_check",
]

EXACT_MASS_CAP = 16
EXACT_GAME_CAP = 12


@dataclass(frozen=True)
class ProbMeasure:
    """Nonnegative weights per point summing to 1 (renormalized and flagged if not)."""

    space: FiniteMetricSpace
    weights: tuple
    renormalized: bool = False

    def __post_init__(self):
        w = tuple(float(v) for v in self.weights)
        if len(w) != self.space.n:
            raise InputError("one weight per point required")
        if any(v < 0 for v in w):
            raise InputError("weights must be nonnegative")
        total = sum(w)
        if total <= 0:
            raise InputError("total mass must be positive")
        if total != 1.0:
            w = tuple(v / total for v in w)
            object.__setattr__(self, "renormalized", True)
        object.__setattr__(self, "weights", w)

    def mass(self, members) -> float:
        return float(sum(self.weights[i] for i in members))

    def support(self) -> frozenset:
        return frozenset(i for i, v in enumerate(self.weights) if v > 0)


@dataclass(frozen=True)
class MassFamily:
    """An R-disjoint family of S-bounded sets with its mass certificate."""

    family: FamilyOfSets
    R: float
    S: float
    mass: float
    exact: bool = True
    flags: dict = field(default_factory=dict, compare=False)

    def verify(self, mu: ProbMeasure):
        ok, wit = is_r_disjoint(self.family, self.R)
        if not ok:
            raise CertificateError("family not R-disjoint", witness=wit)
        for s in self.family.sets:
            if s and diameter(Subset(self.family.space, s)) > self.S:
                raise CertificateError("a set exceeds the diameter bound", witness=sorted(s))
        got = mu.mass(self.family.union())
        if not math.isclose(got, self.mass, rel_tol=0, abs_tol=1e-12):
            raise CertificateError(f"mass mismatch: stated {self.mass}, got {got}")


def _components_bitmask(dmat, R, members_mask, n):
    """Chain components (steps < R) of the bitmask set; yields member bitmasks.

    Strict steps match the disjointness convention (disjoint = cross distance
    >= R): the strict components of a union of an R-disjoint family refine the
    family, and conversely the strict components of any feasible union form an
    R-disjoint family.
    """
    adj = [0] * n
    for i in range(n):
        if not (members_mask >> i) & 1:
            continue
        for j in range(n):
            if i != j and ((members_mask >> j) & 1) and dmat[i, j] < R:
                adj[i] |= 1 << j
    left = members_mask
    while left:
        i = (left & -left).bit_length() - 1
        comp = 1 << i
        frontier = adj[i] & ~comp
        while frontier:
            comp |= frontier
            nxt = 0
            f = frontier
            while f:
                j = (f & -f).bit_length() - 1
                f &= f - 1
                nxt |= adj[j]
            frontier = nxt & ~comp
        comp &= members_mask
        yield comp
        left &= ~comp


def _mask_to_sets(mask, n):
    return frozenset(i for i in range(n) if (mask >> i) & 1)


def _feasible(space, mask, R, S):
    for comp in _components_bitmask(space.dmat, R, mask, space.n):
        pts = sorted(_mask_to_sets(comp, space.n))
        if len(pts) > 1 and space.dmat[np.ix_(pts, pts)].max() > S:
            return False
    return True


def best_mass_family(
    space: FiniteMetricSpace, mu: ProbMeasure, R: float, S: float, *, exact_cap: int = EXACT_MASS_CAP
) -> MassFamily:
    """Max-mass R-disjoint family of S-bounded sets.

    A union of such a family is exactly a set whose chain components at steps
    < R are S-bounded, so the exact branch (<= exact_cap points) maximizes mass
    over subsets with that property and returns the components.  Above the cap,
    greedy (heaviest S-bounded set first, excise everything within R) with a
    lower-bound flag.
    """
    if R < 0 or S < 0:
        raise InputError("R and S must be >= 0")
    if mu.space is not space:
        raise InputError("measure must live on the given space")
    n = space.n
    if n <= exact_cap:
        best_mask, best_mass = 0, -1.0
        # only support points matter for mass; adding zero-weight points never helps
        supp = sorted(mu.support())
        for bits in range(1 << len(supp)):
            mask = 0
            for pos, p in enumerate(supp):
                if (bits >> pos) & 1:
                    mask |= 1 << p
            if not _feasible(space, mask, R, S):
                continue
            m = sum(mu.weights[p] for p in _mask_to_sets(mask, n))
            if m > best_mass:
                best_mask, best_mass = mask, m
        comps = list(_components_bitmask(space.dmat, R, best_mask, n)) if best_mask else []
        fam = FamilyOfSets(space, tuple(_mask_to_sets(c, n) for c in comps))
        out = MassFamily(fam, R, S, max(best_mass, 0.0), exact=True)
        out.verify(mu)
        return out
    candidates, exact_sets = maximal_r_bounded_sets(space, S)
    remaining = set(range(n))
    chosen = []
    total = 0.0
    while True:
        best_set, best_m = None, 0.0
        for c in candidates:
            cc = frozenset(c) & frozenset(remaining)
            if not cc:
                continue
            m = mu.mass(cc)
            if m > best_m:
                best_set, best_m = cc, m
        if best_set is None or best_m <= 0.0:
            break
        chosen.append(best_set)
        total += best_m
        remaining -= {q for q in remaining if any(space.dmat[q, p] < R for p in best_set)}
    fam = FamilyOfSets(space, tuple(chosen))
    flags = {"lower_bound": True}
    if not exact_sets:
        flags["candidate_slack"] = 2.0
    out = MassFamily(fam, R, S, total, exact=False, flags=flags)
    out.verify(mu)
    return out


def asdim_to_msp(cover: FamilyOfSets, R: float, mu: ProbMeasure) -> MassFamily:
    """Max-mass color class of a disjointified cover; mass >= 1/(number of colors)."""
    if cover.colors is None:
        raise InputError("cover must be colored")
    if not cover.covers_space():
        raise PreconditionError("cover must cover the space")
    S = mesh(cover)
    best_c, best_m = None, -1.0
    for c in range(cover.n_colors):
        cls = cover.color_class(c)
        ok, wit = is_r_disjoint(cls, R)
        if not ok:
            raise PreconditionError(f"color {c} not {R}-disjoint; witness {wit}")
        m = mu.mass(cls.union())
        if m > best_m:
            best_c, best_m = c, m
    if best_m < 1.0 / cover.n_colors - 1e-12:
        raise CertificateError(
            f"best color mass {best_m} below 1/{cover.n_colors}"
        )
    out = MassFamily(cover.color_class(best_c), R, S, best_m,
                     flags={"color": best_c, "n_colors": cover.n_colors})
    out.verify(mu)
    return out


def transfer_measure_selection(f: CoarseMap, mu: ProbMeasure, selection: Sequence[int]) -> ProbMeasure:
    """Measure on the domain putting mu(y) on the chosen fiber point x_y."""
    if mu.space is not f.codomain:
        raise InputError("measure must live on the codomain")
    if not f.is_surjective():
        raise PreconditionError("map must be surjective")
    selection = [int(x) for x in selection]
    if len(selection) != f.codomain.n:
        raise InputError("one selected point per codomain point required")
    for y, x in enumerate(selection):
        if f(x) != y:
            raise PreconditionError(f"selection is not a right inverse at {y}")
    w = [0.0] * f.domain.n
    for y, x in enumerate(selection):
        w[x] += mu.weights[y]
    return ProbMeasure(f.domain, tuple(w))


def pushforward_measure(f: CoarseMap, mu: ProbMeasure) -> ProbMeasure:
    """lambda(y) = mu of the fiber over y."""
    if mu.space is not f.domain:
        raise InputError("measure must live on the domain")
    w = [0.0] * f.codomain.n
    for x, v in enumerate(mu.weights):
        w[f(x)] += v
    return ProbMeasure(f.codomain, tuple(w))


def _exact_graph_coloring(edges, k, n_vertices):
    """k-coloring of the graph by backtracking; None when infeasible."""
    adj = [set() for _ in range(n_vertices)]
    for a, b in edges:
        adj[a].add(b)
        adj[b].add(a)
    colors = [None] * n_vertices
    order = sorted(range(n_vertices), key=lambda v: -len(adj[v]))

    def bt(pos):
        if pos == n_vertices:
            return True
        v = order[pos]
        used = {colors[u] for u in adj[v] if colors[u] is not None}
        upper = min(k, max((c for c in colors if c is not None), default=-1) + 2)
        for c in range(upper):
            if c not in used:
                colors[v] = c
                if bt(pos + 1):
                    return True
                colors[v] = None
        return False

    return colors if bt(0) else None


def msp_pushforward(
    f: CoarseMap,
    n: int,
    mu: ProbMeasure,
    R: float,
    witness: MassFamily,
    lam: ProbMeasure,
) -> MassFamily:
    """Push a domain mass witness to the codomain.

    The witness (D(nR)-disjoint, B-bounded, lam-mass > 1/2 for the transferred
    measure lam) has its image sets n-colored so same-color images are R-apart;
    image sets keep diameter <= E(B), so the bound S = E(B) + n*R holds with
    room.  When no n-coloring of the <R proximity graph exists, the
    disjointification route is used instead and flagged: its sets grow by the
    expansions, giving S = E(B) + 2*n*R.  Either way the best color class has
    mass >= 1/(2n).
    """
    if mu.space is not f.codomain or lam.space is not f.domain:
        raise InputError("mu lives on the codomain, lam on the domain")
    witness.verify(lam)
    B = witness.S
    E = control_upper(f)
    if witness.mass < 0.5:
        raise PreconditionError(f"witness mass {witness.mass} below 1/2")
    images = [f.image_set(s) for s in witness.family.sets if s]
    Y = f.codomain
    edges = []
    for a in range(len(images)):
        ia = sorted(images[a])
        for b in range(a + 1, len(images)):
            ib = sorted(images[b])
            if Y.dmat[np.ix_(ia, ib)].min() < R:
                edges.append((a, b))
    coloring = _exact_graph_coloring(edges, n, len(images))
    if coloring is not None:
        classes = {}
        for idx, c in enumerate(coloring):
            classes.setdefault(c, []).append(images[idx])
        S = E(B) + n * R
        flags = {"route": "coloring"}
        fams = {
            c: FamilyOfSets(Y, tuple(sets)) for c, sets in sorted(classes.items())
        }
    else:
        carrier = frozenset().union(*images)
        sub, old_of_new = Y.subspace(carrier)
        new_of_old = {o: q for q, o in enumerate(old_of_new)}
        img_fam = FamilyOfSets(
            sub, tuple(frozenset(new_of_old[y] for y in s) for s in images)
        )
        colored, _ = make_disjoint(img_fam, n * R, n - 1)
        S = E(B) + 2 * n * R
        flags = {"route": "disjointify", "bound_slack": n * R}
        fams = {
            c: FamilyOfSets(
                Y,
                tuple(
                    frozenset(old_of_new[q] for q in s)
                    for s in colored.color_class(c).sets
                ),
            )
            for c in range(n)
        }
    best_c, best_m = None, -1.0
    covered = frozenset()
    for c, fam in fams.items():
        covered |= fam.union()
        m = mu.mass(fam.union())
        if m > best_m:
            best_c, best_m = c, m
    if not frozenset().union(*images) <= covered:
        raise CertificateError("pushforward classes lost image points")
    if best_m < 1.0 / (2 * n) - 1e-12:
        raise CertificateError(f"best class mass {best_m} below 1/(2n)={1 / (2 * n)}")
    flags["equality"] = math.isclose(best_m, 1.0 / (2 * n), rel_tol=0, abs_tol=1e-12)
    out = MassFamily(fams[best_c], R, S, best_m, flags=flags)
    out.verify(mu)
    return out


def msp_pullback(
    f: CoarseMap,
    mu: ProbMeasure,
    R_X: float,
    *,
    K: float,
    S: float,
    R_Y: Optional[float] = None,
) -> MassFamily:
    """Compose codomain and fiber mass searches into a domain witness.

    Pushes mu forward, finds a codomain set of mass > 1/2 with K-bounded
    R_Y-components (R_Y defaults to E(R_X)), then per component finds a fiber
    set holding > 1/2 of the component's preimage mass with S-bounded
    R_X-components.  The union has mass >= 0.25 (equality flagged) and
    S-bounded R_X-components.
    """
    if mu.space is not f.domain:
        raise InputError("measure must live on the domain")
    E = control_upper(f)
    if R_Y is None:
        R_Y = E(R_X)
    elif R_Y < E(R_X):
        raise PreconditionError(f"R_Y must be >= E(R_X) = {E(R_X)}")
    lam = pushforward_measure(f, mu)
    stage1 = best_mass_family(f.codomain, lam, R_Y, K)
    if stage1.mass < 0.5:
        raise CertificateError(
            f"codomain stage mass {stage1.mass} below 1/2", witness="codomain"
        )
    pieces = []
    total = 0.0
    for comp in stage1.family.sets:
        pre = f.preimage(comp)
        pre_mass = mu.mass(pre)
        if pre_mass <= 0:
            continue
        sub, old_of_new = f.domain.subspace(pre)
        local = ProbMeasure(sub, tuple(mu.weights[o] for o in old_of_new))
        found = best_mass_family(sub, local, R_X, S)
        got = found.mass * pre_mass
        if found.mass < 0.5:
            raise CertificateError(
                f"fiber stage mass {found.mass} below 1/2 over component "
                f"{sorted(comp)}",
                witness="fiber",
            )
        for s in found.family.sets:
            pieces.append(frozenset(old_of_new[q] for q in s))
        total += got
    omega = frozenset().union(*pieces) if pieces else frozenset()
    comps = r_components(Subset(f.domain, omega), R_X) if omega else ()
    for c in comps:
        if diameter(c) > S:
            raise CertificateError("an output component exceeds S", witness=sorted(c.members))
    mass = mu.mass(omega)
    if mass < 0.25 - 1e-12:
        raise CertificateError(f"output mass {mass} below 0.25")
    fam = FamilyOfSets(f.domain, tuple(c.members for c in comps))
    out = MassFamily(
        fam,
        R_X,
        S,
        mass,
        flags={"equality": math.isclose(mass, 0.25, rel_tol=0, abs_tol=1e-12)},
    )
    out.verify(mu)
    return out


def map_msp_check(
    f: CoarseMap, A, R: float, S: float, c: float, K: float
) -> dict:
    """Worst case over measures on a fiber block of the best feasible mass.

    For each maximal K-bounded subset of A, the value of the zero-sum game
    (measure picks weights on the preimage, player picks a set whose
    R-components are S-bounded) equals 1 / (fractional covering number of the
    maximal feasible sets).  Solved exactly by linear programming for preimages
    up to 12 points, with the measure-side dual recomputed as a cross-check;
    larger instances are probed with adversarial concentrated measures and
    reported inconclusive.
    """
    if min(R, S, K) < 0 or not (0 < c < 1):
        raise InputError("need R, S, K >= 0 and 0 < c < 1")
    members = A.members if isinstance(A, Subset) else frozenset(A)
    blocks, exact_blocks = maximal_r_bounded_sets(f.codomain, K, within=members)
    worst = None
    details = []
    for blk in blocks:
        pre = sorted(f.preimage(blk))
        if not pre:
            continue
        if len(pre) <= EXACT_GAME_CAP and exact_blocks:
            value, n_sets = _game_value(f.domain, pre, R, S)
            details.append(
                {"block": sorted(blk), "value": value, "exact": True, "max_feasible_sets": n_sets}
            )
        else:
            value = _adversarial_probe(f.domain, pre, R, S)
            details.append({"block": sorted(blk), "value": value, "exact": False})
        if worst is None or value < worst:
            worst = value
    exact = all(d["exact"] for d in details) if details else True
    achievable = worst is None or worst > c
    equality = worst is not None and math.isclose(worst, c, rel_tol=0, abs_tol=1e-12)
    return {
        "achievable": achievable if exact else None,
        "worst_value": worst,
        "threshold": c,
        "equality_at_threshold": equality,
        "exact": exact,
        "blocks": details,
    }


def _maximal_feasible_sets(space, pts, R, S):
    idx = {p: i for i, p in enumerate(pts)}
    k = len(pts)
    sub, old_of_new = space.subspace(pts)
    feas = []
    for mask in range(1, 1 << k):
        if _feasible(sub, mask, R, S):
            feas.append(mask)
    maximal = [m for m in feas if not any(m != o and m & o == m for o in feas)]
    return maximal, sub, old_of_new


def _game_value(space, pts, R, S):
    maximal, sub, old_of_new = _maximal_feasible_sets(space, pts, R, S)
    k = len(pts)
    # fractional cover: min sum y_O subject to sum over O containing x of y_O >= 1
    Acov = np.zeros((k, len(maximal)))
    for j, m in enumerate(maximal):
        for i in range(k):
            if (m >> i) & 1:
                Acov[i, j] = 1.0
    res = linprog(
        c=np.ones(len(maximal)),
        A_ub=-Acov,
        b_ub=-np.ones(k),
        bounds=[(0, None)] * len(maximal),
        method="highs",
    )
    if not res.success:
        raise CertificateError("covering LP failed to solve")
    tau = res.fun
    value = 1.0 / tau
    # dual route: min over measures of max feasible mass
    # variables: weights w (k) and t; minimize t subject to sum_{x in O} w_x <= t
    Ad = np.zeros((len(maximal), k + 1))
    for j, m in enumerate(maximal):
        for i in range(k):
            if (m >> i) & 1:
                Ad[j, i] = 1.0
        Ad[j, k] = -1.0
    res2 = linprog(
        c=[0.0] * k + [1.0],
        A_ub=Ad,
        b_ub=np.zeros(len(maximal)),
        A_eq=[[1.0] * k + [0.0]],
        b_eq=[1.0],
        bounds=[(0, None)] * k + [(None, None)],
        method="highs",
    )
    if not res2.success:
        raise CertificateError("game LP failed to solve")
    if not math.isclose(value, res2.fun, rel_tol=1e-9, abs_tol=1e-9):
        raise CertificateError(
            f"primal/dual game values disagree: {value} vs {res2.fun}"
        )
    return value, len(maximal)


def _adversarial_probe(space, pts, R, S):
    """Upper bound on the game value from concentrated two-point measures."""
    best = 1.0
    k = len(pts)
    for a_pos in range(k):
        for b_pos in range(a_pos + 1, k):
            a, b = pts[a_pos], pts[b_pos]
            d = space.dmat[a, b]
            # points closer than R chain into one component, which must be <= S
            if d < R and d > S:
                best = min(best, 0.5)
    return best
