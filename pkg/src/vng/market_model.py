"""Margin-constrained market with proportional transaction costs.

Portfolios live in per-node margin cones: the cost-adjusted value of the long
positions must cover ``mu_t`` times the cost-adjusted value of the shorts.
Rebalancing a parent portfolio ``a`` into a child portfolio ``b`` is
self-financing when the cash released, net of costs,

    psi_t(a, b) = sum_i (1 - lam_plus_i) (R_i a_i - b_i)_+
                - sum_i (1 + lam_minus_i) (R_i a_i - b_i)_-

is nonnegative.  The admissible transition pairs form the convex cone
``Z_t = {(a, b): a in X_{t-1}, b in X_t, psi_t(a, b) >= 0}``.

Both the margin function and ``psi`` are concave and piecewise linear, so the
cones admit exact polyhedral lifts via split variables: inflating both halves
of a split strictly decreases each defining expression (the coefficients pair
a smaller positive weight against a larger negative one), hence the
componentwise-minimal split attains the defining value.  The lifts make every
membership and dual-cone question a small linear program.

Everything here is a pure function of immutable data; per-node operations are
independent.  The LP sub-solver (scipy's HiGHS) is re-entrant.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .errors import (
    DimensionMismatch,
    LPFailure,
    MarginTooTight,
    NonpositivePrice,
    NotInCone,
    PreconditionViolated,
)
from .scenario_tree import AdaptedVector, Node, ScenarioTree

MEMBERSHIP_TOL = 1e-9

# Resolution of the direction grid used for the cone-section constants when
# the asset count is small; larger markets switch to sign-pattern enumeration.
GRID_DIRECTIONS = 100_000
GRID_MAX_ASSETS = 3


def _pos(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def _neg(x: np.ndarray) -> np.ndarray:
    return np.maximum(-x, 0.0)


@dataclass(frozen=True, eq=False)
class MarketData:
    """Per-node returns and cost rates plus per-date margins, tied to a tree.

    Arrays are indexed by node index; the root row of ``returns`` is unused.
    Condition (B1) bounds are the observed per-date extremes.
    """

    tree: ScenarioTree
    m: int
    returns: np.ndarray      # (n_nodes, m); row of root is nan
    lam_plus: np.ndarray     # (n_nodes, m), in [0, 1)
    lam_minus: np.ndarray    # (n_nodes, m), >= 0
    margins: np.ndarray      # (N + 1,), each > 1
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        n = self.tree.n_nodes
        for name in ("returns", "lam_plus", "lam_minus"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (n, self.m):
                raise DimensionMismatch(
                    f"{name} must have shape ({n}, {self.m}), got {arr.shape}"
                )
            object.__setattr__(self, name, arr)
        margins = np.asarray(self.margins, dtype=float)
        if margins.shape != (self.tree.horizon + 1,):
            raise DimensionMismatch(
                f"margins must have length {self.tree.horizon + 1}"
            )
        object.__setattr__(self, "margins", margins)

        if np.any(self.lam_plus < 0) or np.any(self.lam_plus >= 1):
            raise ValueError("selling cost rates must lie in [0, 1)")
        if np.any(self.lam_minus < 0):
            raise ValueError("buying cost rates must be nonnegative")
        root = self.tree.root.index
        non_root = [i for i in range(n) if i != root]
        if non_root and np.any(self.returns[non_root] <= 0):
            raise NonpositivePrice("gross returns must be strictly positive")
        bad = [t for t, mu in enumerate(margins) if not mu > 1.0]
        if bad:
            raise MarginTooTight(f"margins must exceed 1, offending dates {bad}")

    # Cost multipliers: Lp = 1 - lam_plus <= 1 <= Lm = 1 + lam_minus.
    @property
    def Lp(self) -> np.ndarray:
        if "Lp" not in self._cache:
            self._cache["Lp"] = 1.0 - self.lam_plus
        return self._cache["Lp"]

    @property
    def Lm(self) -> np.ndarray:
        if "Lm" not in self._cache:
            self._cache["Lm"] = 1.0 + self.lam_minus
        return self._cache["Lm"]

    def bounds(self) -> dict[str, np.ndarray]:
        """Observed (B1) bounds per date: R_lo, R_hi (t>=1), L_lo, L_hi."""
        if "bounds" not in self._cache:
            N = self.tree.horizon
            R_lo = np.full(N + 1, np.nan)
            R_hi = np.full(N + 1, np.nan)
            L_lo = np.zeros(N + 1)
            L_hi = np.zeros(N + 1)
            for t in range(N + 1):
                idx = [n.index for n in self.tree.level(t)]
                L_lo[t] = self.Lp[idx].min()
                L_hi[t] = self.Lm[idx].max()
                if t >= 1:
                    R_lo[t] = self.returns[idx].min()
                    R_hi[t] = self.returns[idx].max()
            self._cache["bounds"] = {
                "R_lo": R_lo, "R_hi": R_hi, "L_lo": L_lo, "L_hi": L_hi,
            }
        return self._cache["bounds"]

    def constants(self) -> "MarketConstants":
        if "constants" not in self._cache:
            self._cache["constants"] = market_constants(self)
        return self._cache["constants"]

    def _check_dim(self, *vecs: np.ndarray) -> None:
        for v in vecs:
            if np.shape(v) != (self.m,):
                raise DimensionMismatch(
                    f"expected vectors of length {self.m}, got shape {np.shape(v)}"
                )


def returns_from_prices(tree: ScenarioTree, prices: np.ndarray) -> np.ndarray:
    """Componentwise gross returns child-price / parent-price.

    ``prices`` has one row per node index; the root row of the result is nan.
    """
    prices = np.asarray(prices, dtype=float)
    if np.any(prices <= 0):
        raise NonpositivePrice("all prices must be strictly positive")
    out = np.full_like(prices, np.nan)
    for node in tree.nodes:
        if node.parent is not None:
            out[node.index] = prices[node.index] / prices[node.parent]
    return out


def margin_residual(market: MarketData, a: np.ndarray, node: int | str | Node) -> float:
    """Margin slack of ``a`` at the node's cone; ``a`` is a member iff >= 0."""
    node = market.tree.node(node)
    a = np.asarray(a, dtype=float)
    market._check_dim(a)
    mu = market.margins[node.depth]
    i = node.index
    return float(market.Lp[i] @ _pos(a) - mu * (market.Lm[i] @ _neg(a)))


def self_financing_value(
    market: MarketData, a: np.ndarray, b: np.ndarray, node: int | str | Node
) -> float:
    """psi_t(a, b) at the node: cash released by rebalancing a into b."""
    node = market.tree.node(node)
    if node.parent is None:
        raise DimensionMismatch("self-financing values live on depth >= 1 nodes")
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    market._check_dim(a, b)
    i = node.index
    d = market.returns[i] * a - b
    return float(market.Lp[i] @ _pos(d) - market.Lm[i] @ _neg(d))


@dataclass(frozen=True)
class ZMembership:
    member: bool
    parent_margin: float
    child_margin: float
    psi: float


def in_Z(
    market: MarketData,
    a: np.ndarray,
    b: np.ndarray,
    node: int | str | Node,
    tol: float = MEMBERSHIP_TOL,
) -> ZMembership:
    """Transition-cone membership with the raw residual triple."""
    node = market.tree.node(node)
    parent = market.tree.parent(node)
    if parent is None:
        raise DimensionMismatch("transition cones live on depth >= 1 nodes")
    pm = margin_residual(market, a, parent)
    cm = margin_residual(market, b, node)
    psi = self_financing_value(market, a, b, node)
    return ZMembership(pm >= -tol and cm >= -tol and psi >= -tol, pm, cm, psi)


# --- polyhedral lifts ---------------------------------------------------------

@dataclass(frozen=True)
class ConeLift:
    """Polyhedral lift of a cone: feasibility in z >= 0 plus a projection.

    The represented set is ``{proj @ z : z >= 0, A_ub z <= b_ub, A_eq z = b_eq}``.
    """

    description: str
    n_vars: int
    A_ub: np.ndarray
    b_ub: np.ndarray
    A_eq: np.ndarray | None
    b_eq: np.ndarray | None
    proj: np.ndarray
    upper: np.ndarray | None = None

    def contains(self, vec: np.ndarray) -> bool:
        """LP feasibility of a point under the projection pin."""
        vec = np.asarray(vec, dtype=float)
        A_eq = self.proj if self.A_eq is None else np.vstack([self.proj, self.A_eq])
        b_eq = vec if self.b_eq is None else np.concatenate([vec, self.b_eq])
        ub = self.upper if self.upper is not None else np.full(self.n_vars, np.inf)
        res = linprog(
            c=np.zeros(self.n_vars),
            A_ub=self.A_ub, b_ub=self.b_ub,
            A_eq=A_eq, b_eq=b_eq,
            bounds=list(zip(np.zeros(self.n_vars), ub)),
            method="highs",
        )
        if res.status == 0:
            return True
        if res.status == 2:
            return False
        raise LPFailure(f"membership LP ended with status {res.status}: {res.message}")


def lift_X(market: MarketData, node: int | str | Node) -> ConeLift:
    """Split-variable lift of the node's margin cone: a = u - v, u, v >= 0."""
    node = market.tree.node(node)
    m = market.m
    i = node.index
    mu = market.margins[node.depth]
    eye = np.eye(m)
    # -(Lp . u - mu Lm . v) <= 0
    A_ub = np.concatenate([-market.Lp[i], mu * market.Lm[i]])[None, :]
    return ConeLift(
        description=f"X at node {node.node_id}",
        n_vars=2 * m,
        A_ub=A_ub,
        b_ub=np.zeros(1),
        A_eq=None,
        b_eq=None,
        proj=np.hstack([eye, -eye]),
    )


def lift_Z(market: MarketData, node: int | str | Node) -> ConeLift:
    """Lift of the transition cone into the node, in (u_a, v_a, u_b, v_b, d+, d-)."""
    node = market.tree.node(node)
    parent = market.tree.parent(node)
    if parent is None:
        raise DimensionMismatch("transition cones live on depth >= 1 nodes")
    m = market.m
    i, ip = node.index, parent.index
    mu_par = market.margins[parent.depth]
    mu = market.margins[node.depth]
    R = market.returns[i]
    eye = np.eye(m)
    Z = np.zeros((m, m))

    # d+ - d- = R (u_a - v_a) - (u_b - v_b)
    A_eq = np.hstack([R[:, None] * eye, -R[:, None] * eye, -eye, eye, -eye, eye])
    zrow = np.zeros(m)
    A_ub = np.vstack([
        np.concatenate([-market.Lp[ip], mu_par * market.Lm[ip], zrow, zrow, zrow, zrow]),
        np.concatenate([zrow, zrow, -market.Lp[i], mu * market.Lm[i], zrow, zrow]),
        np.concatenate([zrow, zrow, zrow, zrow, -market.Lp[i], market.Lm[i]]),
    ])
    proj = np.vstack([
        np.hstack([eye, -eye, Z, Z, Z, Z]),
        np.hstack([Z, Z, eye, -eye, Z, Z]),
    ])
    return ConeLift(
        description=f"Z into node {node.node_id}",
        n_vars=6 * m,
        A_ub=A_ub,
        b_ub=np.zeros(3),
        A_eq=A_eq,
        b_eq=np.zeros(m),
        proj=proj,
    )


@dataclass(frozen=True)
class DualConeCheck:
    """Max of p_bar . b - p . a over the normalized transition cone."""

    value: float
    witness_a: np.ndarray | None
    witness_b: np.ndarray | None


def dual_cone_violation(
    market: MarketData,
    p_parent: np.ndarray,
    p_bar_child: np.ndarray,
    node: int | str | Node,
    tol: float = 1e-9,
) -> DualConeCheck:
    """LP check of the dual transition inequality at one node.

    Maximizes ``p_bar . b - p . a`` over ``(a, b) in Z`` with ``|a| + |b| <= 1``.
    A value within ``tol`` of zero certifies the inequality at this node; a
    larger value comes with the violating pair as witness.
    """
    node = market.tree.node(node)
    lift = lift_Z(market, node)
    m = market.m
    p = np.asarray(p_parent, dtype=float)
    pb = np.asarray(p_bar_child, dtype=float)
    market._check_dim(p, pb)

    # maximize pb.(u_b - v_b) - p.(u_a - v_a)  ->  minimize the negation
    c = np.concatenate([p, -p, -pb, pb, np.zeros(2 * m)])
    norm_row = np.concatenate([np.ones(4 * m), np.zeros(2 * m)])
    A_ub = np.vstack([lift.A_ub, norm_row])
    b_ub = np.concatenate([lift.b_ub, [1.0]])
    d_cap = 2.0 * (1.0 + float(market.returns[node.index].max()))
    upper = np.concatenate([np.full(4 * m, np.inf), np.full(2 * m, d_cap)])
    res = linprog(
        c=c,
        A_ub=A_ub, b_ub=b_ub,
        A_eq=lift.A_eq, b_eq=lift.b_eq,
        bounds=list(zip(np.zeros(6 * m), upper)),
        method="highs",
    )
    if res.status != 0:
        raise LPFailure(
            f"dual-cone LP at node {node.node_id} failed "
            f"(status {res.status}): {res.message}"
        )
    value = -float(res.fun) + 0.0  # normalize -0.0
    if value <= tol:
        return DualConeCheck(value, None, None)
    z = res.x
    return DualConeCheck(value, z[:m] - z[m:2 * m], z[2 * m:3 * m] - z[3 * m:4 * m])


# --- cone sections and the (B2) constants --------------------------------------

def section_vertices(alpha: np.ndarray, beta: np.ndarray) -> np.ndarray:
    """Vertices of {a in X : |a|_1 = 1} for X = {alpha . a+ >= beta . a-}.

    They are the coordinate directions e_i and, per ordered pair (i, j), the
    point with one long and one short leg sitting on the margin boundary.  Any
    function that is linear on each orthant attains its section minimum here.
    """
    m = len(alpha)
    verts = [np.eye(m)[i] for i in range(m)]
    for i in range(m):
        for j in range(m):
            if i == j:
                continue
            v = np.zeros(m)
            v[i] = beta[j] / (alpha[i] + beta[j])
            v[j] = -alpha[i] / (alpha[i] + beta[j])
            verts.append(v)
    return np.array(verts)


def _section_grid(mu: float, m: int, n_dirs: int = GRID_DIRECTIONS) -> np.ndarray:
    """Deterministic direction grid over the section of {mu |a-| <= |a+|}.

    Axis directions plus, for every ordered coordinate pair, a dense sweep of
    one-long-one-short directions up to the margin boundary.
    """
    dirs = [np.eye(m)[i] for i in range(m)]
    if m >= 2:
        pairs = [(i, j) for i in range(m) for j in range(m) if i != j]
        k = max(2, n_dirs // len(pairs))
        s_max = 1.0 / (1.0 + mu)
        sweep = np.linspace(0.0, s_max, k)
        for i, j in pairs:
            block = np.zeros((k, m))
            block[:, i] = 1.0 - sweep
            block[:, j] = -sweep
            dirs.append(block)
    return np.vstack([np.atleast_2d(d) for d in dirs])


def _min_over_ideal_section(
    mu: float, m: int, weight_pos: float, weight_neg: float, method: str
) -> float:
    """Minimum of w+ |a+| - w- |a-| over the unit section of {mu |a-| <= |a+|}."""
    if method == "grid":
        dirs = _section_grid(mu, m)
        vals = weight_pos * _pos(dirs).sum(axis=1) - weight_neg * _neg(dirs).sum(axis=1)
        return float(vals.min())
    verts = section_vertices(np.ones(m), np.full(m, mu))
    vals = weight_pos * _pos(verts).sum(axis=1) - weight_neg * _neg(verts).sum(axis=1)
    return float(vals.min())


@dataclass(frozen=True)
class MarketConstants:
    """Per-date feasibility constants derived from the (B1) bounds.

    ``C2[t]`` and ``K[t]`` describe the transition into date t and are nan at
    t = 0.  ``H = 1/Q`` realizes the two-sided value bound with the all-ones
    price vector.
    """

    nu: np.ndarray
    C1: np.ndarray
    C2: np.ndarray
    K: np.ndarray
    H: np.ndarray
    Q: np.ndarray


def market_constants(market: MarketData, method: str | None = None) -> MarketConstants:
    """nu_t, C1_t, C2_t, K_t, H_t from the observed (B1) bounds.

    C1 and Q are section minima, computed on a direction grid for small asset
    counts and by sign-pattern vertex enumeration otherwise.  Raises
    MarginTooTight when (B2) fails at some date.  At the final date the
    forward-looking term of nu is absent and only the cost-ratio term remains.
    """
    N = market.tree.horizon
    b = market.bounds()
    if method is None:
        method = "grid" if market.m <= GRID_MAX_ASSETS else "pattern"

    nu = np.zeros(N + 1)
    for t in range(N + 1):
        ratio_here = b["L_hi"][t] / b["L_lo"][t]
        if t < N:
            ratio_next = (b["L_hi"][t + 1] * b["R_hi"][t + 1]) / (
                b["L_lo"][t + 1] * b["R_lo"][t + 1]
            )
            nu[t] = max(ratio_next, ratio_here)
        else:
            nu[t] = ratio_here

    bad = [t for t in range(N + 1) if market.margins[t] <= nu[t]]
    if bad:
        detail = ", ".join(
            f"t={t}: mu={market.margins[t]:.6g} <= nu={nu[t]:.6g}" for t in bad
        )
        raise MarginTooTight(f"(B2) fails: {detail}")

    C1 = np.zeros(N + 1)
    Q = np.zeros(N + 1)
    for t in range(N + 1):
        mu = float(market.margins[t])
        C1[t] = _min_over_ideal_section(mu, market.m, 1.0, nu[t], method)
        Q[t] = _min_over_ideal_section(mu, market.m, 1.0, 1.0, method)
    if np.any(C1 <= 0) or np.any(Q <= 0):
        raise MarginTooTight("section minimum is not strictly positive")

    C2 = np.full(N + 1, np.nan)
    K = np.full(N + 1, np.nan)
    for t in range(1, N + 1):
        C2[t] = C1[t - 1] * b["L_lo"][t] * b["R_lo"][t] / (2.0 * b["L_hi"][t])
        K[t] = 2.0 * b["L_hi"][t] * b["R_hi"][t] / (C1[t] * b["L_lo"][t])
    return MarketConstants(nu=nu, C1=C1, C2=C2, K=K, H=1.0 / Q, Q=Q)


def dual_cone_residual(
    market: MarketData, p: np.ndarray, node: int | str | Node
) -> float:
    """min of p . a over the node cone's unit section; membership iff >= 0.

    Exact: the margin cone is generated by the axis rays and the one-long,
    one-short boundary rays, and a linear functional attains its section
    minimum at those vertices.
    """
    node = market.tree.node(node)
    p = np.asarray(p, dtype=float)
    market._check_dim(p)
    i = node.index
    mu = market.margins[node.depth]
    verts = section_vertices(market.Lp[i], mu * market.Lm[i])
    return float((verts @ p).min())


# --- interior machinery: completion, Slater path, dominating path ---------------

def feasible_completion(
    market: MarketData,
    a: np.ndarray,
    node: int | str | Node,
    constants: MarketConstants | None = None,
    tol: float = MEMBERSHIP_TOL,
) -> np.ndarray:
    """A child portfolio b with (a, b) in the node's transition cone.

    Default is the strictly interior scaled all-ones completion with
    |b| = (C2_t / 2) |a|; falls back to b = 0 (always admissible under (B2)).
    """
    node = market.tree.node(node)
    parent = market.tree.parent(node)
    if parent is None:
        raise DimensionMismatch("completions live on depth >= 1 nodes")
    a = np.asarray(a, dtype=float)
    market._check_dim(a)
    if margin_residual(market, a, parent) < -tol:
        raise NotInCone(
            f"vector fails the margin test at parent of {node.node_id!r}"
        )
    constants = constants or market.constants()
    t = node.depth
    norm_a = float(np.abs(a).sum())
    b = (constants.C2[t] / 2.0) * norm_a * np.ones(market.m) / market.m
    if not in_Z(market, a, b, node, tol).member:
        b = np.zeros(market.m)
    return b


@dataclass(frozen=True)
class SlaterPath:
    """Deterministic strictly interior path: scaled all-ones portfolios.

    ``values[t]`` is the date-t vector (a positive multiple of (1, ..., 1) for
    t >= 1); ``radii[t]`` is a 1-norm ball radius keeping it inside every
    depth-t margin cone; ``psi_slack[t]`` is the worst-node strict
    self-financing slack of the transition into date t.
    """

    values: list[np.ndarray]
    radii: list[float]
    psi_slack: list[float]


def _ones_radius(market: MarketData, t: int, scale: float) -> float:
    """1-norm interiority radius of scale * (1, ..., 1) at depth t."""
    rad = np.inf
    mu = market.margins[t]
    for node in market.tree.level(t):
        i = node.index
        resid = scale * float(market.Lp[i].sum())
        lip = float(max(market.Lp[i].max(), mu * market.Lm[i].max()))
        rad = min(rad, resid / lip)
    return rad


def slater_path(
    tree: ScenarioTree,
    market: MarketData,
    constants: MarketConstants | None = None,
) -> SlaterPath:
    """Strictly interior path built by the lambda = delta / (2H) recursion.

    Starting from the all-ones portfolio, each step scales the interior
    transition witness (e, (C2_t / 2) e) so the previous state keeps half its
    interiority radius, then completes to a path; H = m bounds |(1, ..., 1)|.
    Raises MarginTooTight when (B2) fails.
    """
    constants = constants or market_constants(market)
    m = market.m
    N = tree.horizon
    e = np.ones(m)

    v_scale = [1.0]
    delta = [_ones_radius(market, 0, 1.0)]
    lam = [np.nan]
    for t in range(1, N + 1):
        lam_t = delta[t - 1] / (2.0 * m)
        v_t = lam_t * constants.C2[t] / 2.0
        lam.append(lam_t)
        v_scale.append(v_t)
        delta.append(_ones_radius(market, t, v_t))

    y_scale = [1.0]
    for t in range(1, N + 1):
        g = y_scale[t - 1] - lam[t]
        h = (constants.C2[t] / 2.0) * g
        y_scale.append(v_scale[t] + h)

    values = [y_scale[t] * e for t in range(N + 1)]
    radii = [_ones_radius(market, t, y_scale[t]) for t in range(N + 1)]
    psi_slack = [np.inf]
    for t in range(1, N + 1):
        slack = min(
            self_financing_value(market, values[t - 1], values[t], node)
            for node in tree.level(t)
        )
        psi_slack.append(slack)
        if slack <= 0:
            raise MarginTooTight(
                f"interior path lost strict self-financing slack at date {t}"
            )
    return SlaterPath(values=values, radii=radii, psi_slack=psi_slack)


def dominating_path(
    tree: ScenarioTree,
    market: MarketData,
    vs: list[AdaptedVector],
    us: list[AdaptedVector],
    constants: MarketConstants | None = None,
    tol: float = MEMBERSHIP_TOL,
) -> list[AdaptedVector]:
    """Turn a relaxed sequence (v_0, u_1, v_1, ..., u_{N+1}) into a path.

    ``vs[t]`` is the date-t state proposal, ``us[t - 1]`` the date-t input
    (F_t-measurable, valued in the date-(t-1) cone, with ``us[N]`` the
    terminal layer).  Requires (u_t, v_t) in Z_t and v_{t-1} - u_t in X_{t-1}
    nodewise.  Builds y_0 = v_0, g = y_{t-1} - u_t, h by feasible completion,
    y_t = v_t + h, so y_t - v_t is a cone element at every date.
    """
    N = tree.horizon
    if len(vs) != N + 1 or len(us) != N + 1:
        raise PreconditionViolated(
            f"need v_0..v_{N} and u_1..u_{N + 1}, got {len(vs)} and {len(us)}"
        )
    constants = constants or market.constants()

    def u_t(t: int) -> AdaptedVector:
        return us[t - 1]

    for t in range(1, N + 1):
        for node in tree.level(t):
            parent = tree.parent(node)
            u_val = u_t(t).value_at(tree, node)
            v_val = vs[t].value_at(tree, node)
            if not in_Z(market, u_val, v_val, node, tol).member:
                raise PreconditionViolated(
                    f"(u_{t}, v_{t}) leaves the transition cone at node "
                    f"{node.node_id!r}"
                )
            slack = vs[t - 1].value_at(tree, parent) - u_val
            if margin_residual(market, slack, parent) < -tol:
                raise PreconditionViolated(
                    f"v_{t - 1} - u_{t} leaves the margin cone at node "
                    f"{node.node_id!r}"
                )
    for leaf in tree.leaves():
        slack = vs[N].value_at(tree, leaf) - u_t(N + 1).value_at(tree, leaf)
        if margin_residual(market, slack, leaf) < -tol:
            raise PreconditionViolated(
                f"v_{N} - u_{N + 1} leaves the margin cone at leaf "
                f"{leaf.node_id!r}"
            )

    path = [AdaptedVector(0, vs[0].values.copy())]
    for t in range(1, N + 1):
        rows = np.zeros((len(tree.level(t)), market.m))
        for pos, node in enumerate(tree.level(t)):
            parent = tree.parent(node)
            g = path[t - 1].value_at(tree, parent) - u_t(t).value_at(tree, node)
            h = feasible_completion(market, g, node, constants, tol)
            rows[pos] = vs[t].value_at(tree, node) + h
        path.append(AdaptedVector(t, rows))
    return path


# --- samplers (shared by tests, axiom checks and competitor paths) --------------

def sample_cone_batch(
    market: MarketData,
    node: int | str | Node,
    rng: np.random.Generator,
    count: int,
    tightness: float | None = None,
) -> np.ndarray:
    """``count`` random members of the node's margin cone, one per row.

    Longs and shorts get disjoint supports; the shorts are scaled so they use
    a ``tightness`` fraction (default random in [0, 0.9]) of the cost-adjusted
    long value, which keeps the margin residual exactly (1 - tightness) times
    the long value.
    """
    node = market.tree.node(node)
    m = market.m
    i = node.index
    mu = market.margins[node.depth]
    longs = rng.random((count, m)) < (0.75 if m > 1 else 1.1)
    none = ~longs.any(axis=1)
    if none.any():
        longs[none, rng.integers(0, m)] = True
    shorts = ~longs & (rng.random((count, m)) < 0.7)
    u = rng.uniform(0.1, 1.0, (count, m)) * longs
    v = rng.uniform(0.1, 1.0, (count, m)) * shorts
    beta = (
        rng.uniform(0.0, 0.9, count) if tightness is None
        else np.full(count, tightness)
    )
    den = mu * (v @ market.Lm[i])
    num = u @ market.Lp[i]
    scale = np.where(den > 0.0, beta * num / np.where(den > 0.0, den, 1.0), 0.0)
    return u - scale[:, None] * v


def sample_cone_point(
    market: MarketData,
    node: int | str | Node,
    rng: np.random.Generator,
    scale: float = 1.0,
    tightness: float | None = None,
) -> np.ndarray:
    """Random member of the node's margin cone; see :func:`sample_cone_batch`."""
    return scale * sample_cone_batch(market, node, rng, 1, tightness)[0]


def transition_frontier_batch(
    market: MarketData,
    A: np.ndarray,
    D: np.ndarray,
    node: int | str | Node,
    constants: MarketConstants | None = None,
) -> np.ndarray:
    """Rowwise largest c >= 0 with (A_k, c_k D_k) self-financing at the node.

    Finite under (B1)/(B2) because admissible transitions satisfy the
    |b| <= K_t |a| bound; located by bisection on the concave psi.
    """
    node = market.tree.node(node)
    constants = constants or market.constants()
    i = node.index
    R, Lp, Lm = market.returns[i], market.Lp[i], market.Lm[i]

    def psi(c: np.ndarray) -> np.ndarray:
        diff = A * R - c[:, None] * D
        return np.minimum(Lp * diff, Lm * diff).sum(axis=1)

    norm_a = np.abs(A).sum(axis=1)
    norm_d = np.abs(D).sum(axis=1)
    active = (norm_a > 0.0) & (norm_d > 0.0)
    hi = np.where(
        active,
        2.0 * constants.K[node.depth] * norm_a / np.where(active, norm_d, 1.0),
        0.0,
    )
    lo = np.zeros(len(hi))
    cap = psi(hi) >= 0.0
    lo[cap & active] = hi[cap & active]
    work = active & ~cap
    for _ in range(60):
        if not work.any():
            break
        mid = 0.5 * (lo + hi)
        ok = psi(mid) >= 0.0
        lo = np.where(work & ok, mid, lo)
        hi = np.where(work & ~ok, mid, hi)
    return lo


def transition_frontier(
    market: MarketData,
    a: np.ndarray,
    direction: np.ndarray,
    node: int | str | Node,
    constants: MarketConstants | None = None,
) -> float:
    """Scalar form of :func:`transition_frontier_batch`."""
    return float(
        transition_frontier_batch(
            market, np.asarray(a, float)[None, :],
            np.asarray(direction, float)[None, :], node, constants,
        )[0]
    )


def sample_transition_pair(
    market: MarketData,
    node: int | str | Node,
    rng: np.random.Generator,
    a: np.ndarray | None = None,
    max_fill: float = 1.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Random (a, b) in the node's transition cone."""
    node = market.tree.node(node)
    parent = market.tree.parent(node)
    if a is None:
        a = sample_cone_point(market, parent, rng)
    direction = sample_cone_point(market, node, rng)
    c_max = transition_frontier(market, a, direction, node)
    return a, rng.uniform(0.0, max_fill) * c_max * direction
