"""Assembly of the spectral branches: one-boson dispersion and its domain,
the bottom of the one-boson manifold, the polaron ground branch and its
existence domain, the boundary merge, and the dispersion factorization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from . import model as model_mod
from . import quadrature as quad_mod
from . import selfenergy as se_mod
from .errors import DomainError, InputError, NumericError
from .friedrichs import FriedrichsSolver
from .model import ModelParams
from .quadrature import QuadratureSpec
from .selfenergy import SelfEnergyTables

__all__ = [
    "BranchPoint",
    "DomainMap",
    "Lambda2Proxy",
    "GammaResult",
    "BoundaryResult",
    "lambda2_proxy",
    "kappa_from_rule",
    "dispersion_point",
    "one_boson_domain",
    "lambda1",
    "ground_state",
    "g0_boundary",
    "gamma_factor",
]

CAP_MARGIN = 1e-6


@dataclass
class BranchPoint:
    q: np.ndarray
    xi: float | None
    iterations: int
    residual: float
    status: str  # converged | none | capped


@dataclass
class DomainMap:
    grid: np.ndarray          # (N, d) probe momenta
    membership: np.ndarray    # (N,) bool
    boundary: list            # [(direction, radius)]
    kappa: float | None
    points: list = field(default_factory=list)  # BranchPoints for members


@dataclass
class Lambda2Proxy:
    value: float
    margin: float


@dataclass
class GammaResult:
    k: np.ndarray
    gamma: float
    gamma_second: float | None
    residual: float | None


@dataclass
class BoundaryResult:
    direction: np.ndarray
    r_star: float | None
    ladder: list              # [(delta, gap)]
    status: str               # converged | inconclusive


def lambda2_proxy(params: ModelParams, p, delta_margin: float | None = None) -> Lambda2Proxy:
    """Heuristic stand-in lambda2_0(p) - margin for the variational
    two-boson edge; all caps kappa must stay below it."""
    if delta_margin is None:
        delta_margin = se_mod.default_proxy_margin(params)
    value = model_mod.threshold(params, 2, p) - delta_margin
    return Lambda2Proxy(value=value, margin=delta_margin)


def kappa_from_rule(params: ModelParams, p, mode: str = "fraction",
                    value: float = 0.9,
                    delta_margin: float | None = None) -> float:
    """Resolve the cap: absolute energy, or lambda1_0 + value * gap where
    gap = lambda2-proxy - lambda1_0."""
    if mode == "absolute":
        return float(value)
    if mode != "fraction":
        raise InputError(f"unknown kappa rule {mode!r}")
    lam1_0 = model_mod.threshold(params, 1, p)
    proxy = lambda2_proxy(params, p, delta_margin).value
    if proxy <= lam1_0:
        raise DomainError("two-boson proxy is not above the one-boson threshold")
    return lam1_0 + float(value) * (proxy - lam1_0)


def _axis_for(params: ModelParams, p):
    pmag = float(np.linalg.norm(p))
    if pmag > 0:
        return np.asarray(p, dtype=float) / pmag
    ax = np.zeros(params.d)
    ax[-1] = 1.0
    return ax


class _PointSolver:
    """Cached self-energy evaluation at one (p, q) pair: the node-pair
    energies are xi-independent, so the monotone root solve in xi costs
    one vector division per iterate."""

    def __init__(self, params, p, q, quad):
        self.params = params
        pts, w = quad_mod.nodes(quad, params.d)
        k = np.asarray(p, dtype=float) - np.asarray(q, dtype=float)
        diff = k[None, :] - pts
        self.num = params.coupling.evaluate(diff, pts) ** 2 * w
        self.den0 = 0.5 * np.einsum("ij,ij->i", diff, diff) \
            + float(params.eps(q)) + params.eps(pts)
        self.e1 = 0.5 * float(k @ k) + float(params.eps(q))

    def m(self, xi: float) -> float:
        den = self.den0 - xi
        if den.min() < se_mod.DENOM_MARGIN:
            raise DomainError(
                f"xi={xi} within {se_mod.DENOM_MARGIN:.1g} of the two-boson edge"
            )
        return -(self.params.alpha**2) * float((self.num / den).sum())

    def g(self, xi: float) -> float:
        return self.e1 + self.m(xi) - xi


def _check_cap(params, p, kappa, delta_margin=None):
    proxy = lambda2_proxy(params, p, delta_margin).value
    if kappa > proxy + 1e-12:
        raise DomainError(
            f"kappa={kappa} exceeds the two-boson proxy {proxy:.6g} at this p"
        )


def dispersion_point(params: ModelParams, p, q, kappa: float,
                     quad: QuadratureSpec, tol: float = 1e-10,
                     check_cap: bool = True) -> BranchPoint:
    """Solve a_p(xi; q) = xi below the cap.

    g(xi) = a_p(xi; q) - xi is strictly decreasing; q belongs to the
    one-boson domain iff g(kappa) < 0, in which case the unique root is
    bracketed downward from the free energy and bisected.
    """
    p = params._check_vec(p, "p")
    q = params._check_vec(q, "q")
    if check_cap:
        _check_cap(params, p, kappa)
    ps = _PointSolver(params, p, q, quad)

    g_cap = ps.g(kappa)
    if g_cap >= 0.0:
        return BranchPoint(q=q, xi=None, iterations=0, residual=abs(g_cap),
                           status="none")
    lo = min(ps.e1 + ps.m(kappa), kappa - 1.0)
    evals = 2
    for _ in range(200):
        g_lo = ps.g(lo)
        evals += 1
        if g_lo >= 0.0:
            break
        lo = kappa - 2.0 * (kappa - lo)
    else:
        raise NumericError(f"failed to bracket the dispersion root below kappa={kappa}")
    if g_lo == 0.0:
        root = lo
    else:
        root, info = brentq(ps.g, lo, kappa, xtol=1e-14,
                            rtol=4 * np.finfo(float).eps, full_output=True)
        evals += info.iterations
    resid = abs(ps.g(root))
    status = "converged" if resid <= tol * (1.0 + abs(root)) else "capped"
    return BranchPoint(q=q, xi=float(root), iterations=evals,
                       residual=resid, status=status)


def _member(params, p, kappa, q, quad):
    return _PointSolver(params, p, q, quad).g(kappa) < 0.0


def _boundary_radius(params, p, kappa, direction, quad, tol, r_seed):
    """Bisect the one-boson membership indicator outward along a ray."""
    direction = np.asarray(direction, dtype=float)
    direction = direction / np.linalg.norm(direction)
    if not _member(params, p, kappa, r_seed * direction, quad):
        return None
    r_in, r_out = r_seed, abs(r_seed) + 1.0
    for _ in range(200):
        if not _member(params, p, kappa, r_out * direction, quad):
            break
        r_in, r_out = r_out, 2.0 * r_out
    else:
        raise NumericError("membership did not terminate along the ray")
    while r_out - r_in > tol:
        mid = 0.5 * (r_in + r_out)
        if _member(params, p, kappa, mid * direction, quad):
            r_in = mid
        else:
            r_out = mid
    return 0.5 * (r_in + r_out)


def one_boson_domain(params: ModelParams, p, kappa: float, probes,
                     quad: QuadratureSpec, tol: float = 1e-10,
                     rays=None, boundary_tol: float = 1e-9) -> DomainMap:
    """Membership map of the one-boson domain over the probe momenta,
    with solved branch points for members and bisection-refined boundary
    radii along the requested rays."""
    p = params._check_vec(p, "p")
    _check_cap(params, p, kappa)
    probes = np.atleast_2d(np.asarray(probes, dtype=float))
    membership = np.zeros(probes.shape[0], dtype=bool)
    points = []
    for i, q in enumerate(probes):
        bp = dispersion_point(params, p, q, kappa, quad, tol, check_cap=False)
        membership[i] = bp.status != "none"
        if membership[i]:
            points.append(bp)
    if rays is None:
        rays = [_axis_for(params, p), -_axis_for(params, p)]
    boundary = []
    axis = _axis_for(params, p)
    t_seed = _free_minimizer(params, p, axis)
    for ray in rays:
        ray = np.asarray(ray, dtype=float)
        seed = t_seed if float(ray @ axis) > 0 else max(1e-3, -t_seed)
        radius = _boundary_radius(params, p, kappa, ray, quad, boundary_tol,
                                  max(abs(seed), 1e-3))
        boundary.append((ray / np.linalg.norm(ray), radius))
    return DomainMap(grid=probes, membership=membership, boundary=boundary,
                     kappa=kappa, points=points)


def _free_minimizer(params, p, axis):
    """On-axis minimizer of the free one-boson energy."""
    pmag = float(np.asarray(p, dtype=float) @ axis)

    def f(t):
        return 0.5 * (pmag - t) ** 2 + float(params.eps.radial(abs(t)))

    res = minimize_scalar(f, bounds=(-abs(pmag) - 5.0, abs(pmag) + 5.0),
                          method="bounded", options={"xatol": 1e-10})
    return float(res.x)


def lambda1(params: ModelParams, p, kappa: float, quad: QuadratureSpec,
            tol: float = 1e-10, delta_margin: float | None = None) -> float:
    """Bottom of the one-boson dispersion manifold: minimize the solved
    xi_p(q) over on-axis q (radial models reduce to a scalar search)."""
    p = params._check_vec(p, "p")
    _check_cap(params, p, kappa, delta_margin)
    axis = _axis_for(params, p)
    t0 = _free_minimizer(params, p, axis)
    if not _member(params, p, kappa, t0 * axis, quad):
        raise DomainError(
            "one-boson domain is empty along the axis; raise kappa"
        )
    hi = _boundary_radius(params, p, kappa, axis, quad, 1e-9, max(abs(t0), 1e-3))
    lo = -_boundary_radius(params, p, kappa, -axis, quad, 1e-9, 1e-3) \
        if _member(params, p, kappa, -1e-3 * axis, quad) else _inner_edge(
            params, p, kappa, axis, quad, t0)

    def xi_at(t):
        bp = dispersion_point(params, p, t * axis, kappa, quad, tol,
                              check_cap=False)
        return bp.xi if bp.xi is not None else kappa

    pad = 1e-9 * (1.0 + abs(hi) + abs(lo))
    res = minimize_scalar(xi_at, bounds=(lo + pad, hi - pad), method="bounded",
                          options={"xatol": 1e-8})
    if not res.success:
        raise NumericError(f"lambda1 minimization failed: {res.message}")
    return float(res.fun)


def _inner_edge(params, p, kappa, axis, quad, t_seed):
    """Inner membership boundary when q=0 is outside the domain."""
    lo, hi = 0.0, t_seed
    for _ in range(200):
        if _member(params, p, kappa, lo * axis, quad):
            return lo
        if hi - lo < 1e-9:
            break
        lo = 0.5 * (lo + hi)
    while hi - lo > 1e-9:
        mid = 0.5 * (lo + hi)
        if _member(params, p, kappa, mid * axis, quad):
            hi = mid
        else:
            lo = mid
    return hi


class _GroundSolver:
    """Evaluate e_p(xi) (the Friedrichs eigenvalue of the reduced operator
    at trial energy xi) with the pairwise tables cached across xi."""

    def __init__(self, params, p, quad, neumann_order, inner_tol):
        self.params = params
        self.p = np.asarray(p, dtype=float)
        self.order = neumann_order
        self.inner_tol = inner_tol
        self.tables = SelfEnergyTables(params, p, quad)
        self.axis = _axis_for(params, p)
        self.quad = quad
        self.e0 = 0.5 * float(self.p @ self.p)
        # scalar on-axis a(xi; t) evaluator for the edge refinement
        self._line_cache = {}

    def _a_line(self, xi, t):
        key = round(t, 15)
        ps = self._line_cache.get(key)
        if ps is None:
            ps = _PointSolver(self.params, self.p, t * self.axis, self.quad)
            if len(self._line_cache) > 4096:
                self._line_cache.clear()
            self._line_cache[key] = ps
        return ps.e1 + ps.m(xi)

    def _a_bar(self, xi, a_out_min):
        span = 10.0 + float(np.linalg.norm(self.p))
        grid = np.linspace(-span, span, 81)
        vals = np.array([self._a_line(xi, t) for t in grid])
        i = int(np.argmin(vals))
        res = minimize_scalar(lambda t: self._a_line(xi, t),
                              bounds=(grid[max(i - 1, 0)], grid[min(i + 1, 80)]),
                              method="bounded", options={"xatol": 1e-10})
        return min(float(res.fun), a_out_min)

    def e_p(self, xi: float):
        t = self.tables
        a_out = t.a_values(xi)
        dmat = t.d_matrix(xi) if self.order >= 1 else None
        a_bar = self._a_bar(xi, float(a_out.min()))
        solver = FriedrichsSolver(
            self.e0, self.params.alpha, t.v_out, a_out, dmat,
            t.ns.out_weights, t.ns.full_weights, t.ns.out_index, a_bar,
        )
        return solver.ground_eigenvalue(self.order, self.inner_tol)


def ground_state(params: ModelParams, p, kappa: float, neumann_order: int,
                 quad: QuadratureSpec, tol: float = 1e-10,
                 lam1: float | None = None,
                 delta_margin: float | None = None) -> BranchPoint:
    """Polaron ground branch: solve e_p(xi) = xi for xi below lambda1(p).

    e_p(xi) is the discrete Friedrichs eigenvalue of the reduced operator
    at trial energy xi and decreases in xi, so f(xi) = e_p(xi) - xi is
    strictly decreasing; a missing eigenvalue counts as f > 0.  Status is
    'none' when f is still nonnegative at lambda1 (p outside the ground
    domain).
    """
    p = params._check_vec(p, "p")
    _check_cap(params, p, kappa, delta_margin)
    if lam1 is None:
        lam1 = lambda1(params, p, kappa, quad, tol, delta_margin=delta_margin)
    gs = _GroundSolver(params, p, quad, neumann_order, inner_tol=max(tol, 1e-12))

    def f(xi):
        e = gs.e_p(xi)
        return math.inf if e is None else e - xi

    hi = lam1 - max(tol, 1e-9)
    evals = 1
    f_hi = f(hi)
    if f_hi >= 0.0:
        return BranchPoint(q=p, xi=None, iterations=evals,
                           residual=f_hi if math.isfinite(f_hi) else math.inf,
                           status="none")
    lo = min(gs.e0, hi) - 1.0
    for _ in range(200):
        f_lo = f(lo)
        evals += 1
        if f_lo > 0.0:
            break
        lo = hi - 2.0 * (hi - lo)
    else:
        raise NumericError("failed to bracket the ground-branch fixed point")
    # plain bisection: f may be +inf where the inner eigenvalue is absent
    while hi - lo > 1e-13 * (1.0 + abs(lo)):
        mid = 0.5 * (lo + hi)
        f_mid = f(mid)
        evals += 1
        if f_mid > 0.0:
            lo = mid
        elif f_mid < 0.0:
            hi = mid
        else:
            lo = hi = mid
    root = 0.5 * (lo + hi)
    resid = abs(f(root))
    status = "converged" if resid <= tol * (1.0 + abs(root)) else "capped"
    return BranchPoint(q=p, xi=float(root), iterations=evals,
                       residual=resid, status=status)


def g0_boundary(params: ModelParams, direction, quad: QuadratureSpec,
                tol: float = 1e-10, deltas=(0.1, 0.03, 0.01),
                kappa_mode: str = "fraction", kappa_value: float = 0.9,
                neumann_order: int = 1, r_tol: float = 1e-10,
                r_max: float = 8.0) -> BoundaryResult:
    """Boundary of the ground-branch existence domain along a ray, plus
    the gap ladder lambda1 - xi0 at distances delta inside the boundary."""
    direction = np.asarray(direction, dtype=float)
    direction = direction / np.linalg.norm(direction)

    def solve_at(r):
        p = r * direction
        kappa = kappa_from_rule(params, p, kappa_mode, kappa_value)
        lam1 = lambda1(params, p, kappa, quad, tol)
        bp = ground_state(params, p, kappa, neumann_order, quad, tol, lam1=lam1)
        return lam1, bp

    _, bp0 = solve_at(0.0)
    if bp0.status != "converged":
        raise DomainError("no ground state at p=0; boundary scan undefined")
    r_in, r_out = 0.0, 1.0
    for _ in range(60):
        _, bp = solve_at(r_out)
        if bp.status != "converged":
            break
        r_in, r_out = r_out, min(2.0 * r_out, r_out + 1.0)
        if r_in >= r_max:
            return BoundaryResult(direction=direction, r_star=None, ladder=[],
                                  status="inconclusive")
    while r_out - r_in > r_tol:
        mid = 0.5 * (r_in + r_out)
        _, bp = solve_at(mid)
        if bp.status == "converged":
            r_in = mid
        else:
            r_out = mid
    r_star = 0.5 * (r_in + r_out)
    ladder = []
    for dlt in deltas:
        lam1, bp = solve_at(r_star - dlt)
        if bp.status != "converged":
            raise NumericError(f"ground state lost at delta={dlt} inside the boundary")
        ladder.append((float(dlt), float(lam1 - bp.xi)))
    return BoundaryResult(direction=direction, r_star=float(r_star),
                          ladder=ladder, status="converged")


def gamma_factor(params: ModelParams, p, q, kappa: float,
                 quad: QuadratureSpec, tol: float = 1e-10,
                 second_pair=None) -> GammaResult:
    """Dressed-particle dispersion gamma(p - q) = xi_p(q) - eps(q), with a
    factorization residual from a second pair sharing the same p - q."""
    p = params._check_vec(p, "p")
    q = params._check_vec(q, "q")
    bp = dispersion_point(params, p, q, kappa, quad, tol)
    if bp.status == "none":
        raise DomainError("q is outside the one-boson domain for this cap")
    k = p - q
    gamma = bp.xi - float(params.eps(q))
    if second_pair is None:
        shift = np.zeros(params.d)
        shift[0] = 0.1
        second_pair = (p + shift, q + shift)
    p2 = params._check_vec(second_pair[0], "p2")
    q2 = params._check_vec(second_pair[1], "q2")
    if not np.allclose(p2 - q2, k, atol=1e-12):
        raise InputError("second pair must preserve p - q")
    bp2 = dispersion_point(params, p2, q2, kappa, quad, tol)
    if bp2.status == "none":
        return GammaResult(k=k, gamma=gamma, gamma_second=None, residual=None)
    gamma2 = bp2.xi - float(params.eps(q2))
    return GammaResult(k=k, gamma=gamma, gamma_second=gamma2,
                       residual=abs(gamma - gamma2))
