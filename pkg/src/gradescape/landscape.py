"""Test potentials with exactly known critical structure.

A :class:`Landscape` bundles evaluators for F, its gradient and Hessian with
an exact registry of critical points and the three landscape parameters
(spectral gap, gradient threshold, eigenvalue floor) that drive point
classification. Built-in landscapes: a pure quadratic saddle, a quadratic
bowl, and a blended staircase chain of strong saddles.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np

from ._blend import build_chain_field


class CriticalKind(enum.Enum):
    LOCAL_MIN = "local_min"
    STRONG_SADDLE = "strong_saddle"
    STRICT_ONLY_SADDLE = "strict_only_saddle"
    DEGENERATE = "degenerate"


@dataclass(frozen=True)
class CriticalPoint:
    """Registered critical point with exact location and local spectrum."""

    location: np.ndarray
    f_value: float
    eigenvalues: np.ndarray  # Hessian eigenvalues, ascending
    kind: CriticalKind

    def __post_init__(self):
        object.__setattr__(self, "location", np.asarray(self.location, dtype=float))
        ev = np.asarray(self.eigenvalues, dtype=float)
        if np.any(np.diff(ev) < 0):
            raise ValueError("eigenvalues must be sorted ascending")
        object.__setattr__(self, "eigenvalues", ev)


@dataclass(frozen=True)
class Landscape:
    """Potential with analytic evaluators and an exact critical registry.

    Evaluators are pure functions of the point; ``grad_batch``/``f_batch``
    (vectorized over an (B, n) array) are provided by all built-ins and used
    on simulation hot paths. ``spectral_gap``, ``gradient_threshold`` and
    ``eigen_floor`` are the positive classification parameters; the working
    region is the ball where the landscape's guarantees are audited.
    """

    name: str
    dim: int
    f: callable
    grad: callable
    hess: callable
    critical_points: tuple[CriticalPoint, ...]
    spectral_gap: float
    gradient_threshold: float
    eigen_floor: float
    working_center: np.ndarray
    working_radius: float
    params: dict = field(default_factory=dict)
    f_batch: callable | None = None
    grad_batch: callable | None = None

    def __post_init__(self):
        if not (self.spectral_gap > 0 and self.gradient_threshold > 0 and self.eigen_floor > 0):
            raise ValueError("spectral_gap, gradient_threshold, eigen_floor must be positive")
        object.__setattr__(self, "working_center", np.asarray(self.working_center, dtype=float))

    def eval_f_batch(self, pts):
        if self.f_batch is not None:
            return self.f_batch(pts)
        return np.array([self.f(p) for p in np.atleast_2d(pts)])

    def eval_grad_batch(self, pts):
        if self.grad_batch is not None:
            return self.grad_batch(pts)
        return np.array([self.grad(p) for p in np.atleast_2d(pts)])


def evaluate(landscape: Landscape, x) -> tuple[float, np.ndarray, np.ndarray]:
    """Evaluate F, gradient and Hessian at one point.

    Deterministic: repeated calls with the same x return bit-identical values.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (landscape.dim,):
        raise ValueError(f"point has shape {x.shape}, expected ({landscape.dim},)")
    return landscape.f(x), landscape.grad(x), landscape.hess(x)


def classify_critical_point(eigenvalues, spectral_gap: float, eigen_floor: float) -> CriticalKind:
    """Classify a critical point from its Hessian spectrum.

    Local minimum when the smallest eigenvalue is at least the spectral gap;
    strong saddle when it is at most minus the gap and every eigenvalue is
    bounded away from zero by the floor; strict-only saddle when the negative
    direction exists but some eigenvalue sits inside the floor; degenerate
    otherwise.
    """
    ev = np.asarray(eigenvalues, dtype=float)
    if ev.size == 0:
        raise ValueError("empty eigenvalue list")
    if spectral_gap <= 0 or eigen_floor <= 0:
        raise ValueError("spectral_gap and eigen_floor must be positive")
    lam_min = ev.min()
    if lam_min >= spectral_gap:
        return CriticalKind.LOCAL_MIN
    if lam_min <= -spectral_gap:
        if np.all(np.abs(ev) >= eigen_floor):
            return CriticalKind.STRONG_SADDLE
        return CriticalKind.STRICT_ONLY_SADDLE
    return CriticalKind.DEGENERATE


@dataclass
class StrictSaddleViolation:
    point: np.ndarray
    grad_norm: float
    lambda_min: float


@dataclass
class StrictSaddleReport:
    violations: list[StrictSaddleViolation]

    @property
    def ok(self) -> bool:
        return not self.violations


def verify_strict_saddle_property(landscape: Landscape, sample_points) -> StrictSaddleReport:
    """Check the three-way landscape alternative at each sample point.

    A point passes if its gradient norm reaches the gradient threshold, or the
    smallest Hessian eigenvalue leaves the (-gap, +gap) band. The three cases
    are mutually exclusive by construction, so "exactly one holds" reduces to
    "at least one holds". Report-only: violators are returned, never raised.
    """
    violations = []
    for p in sample_points:
        p = np.asarray(p, dtype=float)
        g = landscape.grad(p)
        gnorm = float(np.linalg.norm(g))
        if gnorm >= landscape.gradient_threshold:
            continue
        lam_min = float(np.linalg.eigvalsh(landscape.hess(p))[0])
        if lam_min <= -landscape.spectral_gap or lam_min >= landscape.spectral_gap:
            continue
        violations.append(StrictSaddleViolation(p, gnorm, lam_min))
    return StrictSaddleReport(violations)


def finite_difference_check(landscape: Landscape, x, step: float) -> float:
    """Max relative error of the analytic gradient/Hessian against central
    differences of F / of the gradient. Errors are scaled by
    max(1, ||analytic||_inf) so near-critical points do not blow up."""
    if step <= 0:
        raise ValueError("step must be positive")
    x = np.asarray(x, dtype=float)
    n = x.size
    g = landscape.grad(x)
    h = landscape.hess(x)
    g_fd = np.empty(n)
    h_fd = np.empty((n, n))
    for i in range(n):
        e = np.zeros(n)
        e[i] = step
        g_fd[i] = (landscape.f(x + e) - landscape.f(x - e)) / (2 * step)
        h_fd[:, i] = (landscape.grad(x + e) - landscape.grad(x - e)) / (2 * step)
    h_fd = 0.5 * (h_fd + h_fd.T)
    err_g = np.max(np.abs(g - g_fd)) / max(1.0, np.max(np.abs(g)))
    err_h = np.max(np.abs(h - h_fd)) / max(1.0, np.max(np.abs(h)))
    return float(max(err_g, err_h))


def _quadratic_landscape(name, hess_diag_unstable, hess_diag_stable, params):
    """Common core of the quadratic builtins: F = 1/2 x^T H x with H diagonal."""
    diag = np.concatenate([-np.asarray(hess_diag_unstable, float),
                           np.asarray(hess_diag_stable, float)])
    n = diag.size
    hmat = np.diag(diag)

    def f(x):
        return 0.5 * float(x @ (diag * x))

    def grad(x):
        return diag * x

    def hess(x):
        return hmat.copy()

    def f_batch(pts):
        pts = np.atleast_2d(pts)
        return 0.5 * np.einsum("bi,bi->b", pts, diag * pts)

    def grad_batch(pts):
        return np.atleast_2d(pts) * diag

    ev = np.sort(diag)
    return f, grad, hess, f_batch, grad_batch, ev, n


def builtin_quadratic_saddle(unstable_eigs, stable_eigs) -> Landscape:
    """Exactly linear strong saddle at the origin.

    F(x) = 1/2 (sum_stable mu_i x_i^2 - sum_unstable lam_j x_j^2), unstable
    coordinates first. The registry holds the single saddle; the spectral gap
    is the largest unstable eigenvalue and the eigenvalue floor the smallest
    magnitude in the spectrum.
    """
    unstable = [float(v) for v in np.atleast_1d(unstable_eigs)]
    stable = [float(v) for v in np.atleast_1d(stable_eigs)]
    if not unstable:
        raise ValueError("need at least one unstable eigenvalue")
    if any(v <= 0 for v in unstable + stable):
        raise ValueError("all eigenvalue magnitudes must be positive")
    f, grad, hess, f_batch, grad_batch, ev, n = _quadratic_landscape(
        "quadratic_saddle", unstable, stable, {})
    gap = max(unstable)
    floor = min(abs(v) for v in unstable + stable) if stable else min(unstable)
    cp = CriticalPoint(np.zeros(n), 0.0, ev,
                       classify_critical_point(ev, gap, floor))
    return Landscape(
        name="quadratic_saddle", dim=n, f=f, grad=grad, hess=hess,
        critical_points=(cp,),
        spectral_gap=gap, gradient_threshold=0.1, eigen_floor=floor,
        working_center=np.zeros(n), working_radius=2.0,
        params={"unstable": unstable, "stable": stable},
        f_batch=f_batch, grad_batch=grad_batch,
    )


def builtin_quadratic_bowl(eigs) -> Landscape:
    """Pure quadratic bowl (the saddle-free k=0 landscape)."""
    eigs = [float(v) for v in np.atleast_1d(eigs)]
    if not eigs or any(v <= 0 for v in eigs):
        raise ValueError("bowl needs positive eigenvalues")
    f, grad, hess, f_batch, grad_batch, ev, n = _quadratic_landscape(
        "quadratic_bowl", [], eigs, {})
    gap = min(eigs)
    cp = CriticalPoint(np.zeros(n), 0.0, ev, CriticalKind.LOCAL_MIN)
    return Landscape(
        name="quadratic_bowl", dim=n, f=f, grad=grad, hess=hess,
        critical_points=(cp,),
        spectral_gap=gap, gradient_threshold=0.1, eigen_floor=min(eigs),
        working_center=np.zeros(n), working_radius=2.0,
        params={"eigs": eigs},
        f_batch=f_batch, grad_batch=grad_batch,
    )


def _audit_gradient_threshold(field_eval, center, radius, spectral_gap, resolution=181):
    """Deterministic grid audit: the smallest gradient norm over working-region
    points whose Hessian min-eigenvalue sits strictly inside the spectral-gap
    band. Guarantees the strict-saddle alternative with threshold 0.8*min."""
    xs = np.linspace(center[0] - radius, center[0] + radius, resolution)
    ys = np.linspace(center[1] - radius, center[1] + radius, resolution)
    gx, gy = np.meshgrid(xs, ys)
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    _, grad, hess = field_eval(pts, want_hess=True)
    gnorm = np.linalg.norm(grad, axis=1)
    tr = hess[:, 0, 0] + hess[:, 1, 1]
    det = hess[:, 0, 0] * hess[:, 1, 1] - hess[:, 0, 1] * hess[:, 1, 0]
    disc = np.sqrt(np.maximum(tr * tr - 4.0 * det, 0.0))
    lam_min = 0.5 * (tr - disc)
    inside_band = (lam_min > -spectral_gap) & (lam_min < spectral_gap)
    if not inside_band.any():
        return 0.1 * spectral_gap
    floor = float(gnorm[inside_band].min())
    if floor <= 1e-9:
        raise RuntimeError("chain audit found a near-critical point outside the registry")
    return 0.8 * floor


def builtin_saddle_chain(k: int, lambda_u: float = 2.0, lambda_s: float = 2.0,
                         drop: float = 1.0) -> Landscape:
    """Staircase chain of k strong saddles descending to a quadratic minimum.

    Saddle i has value (k - i + 1) * drop and local eigenvalues
    (-lambda_u, lambda_s); the terminal minimum sits at value 0. Saddle cells
    are exactly quadratic and joined by monotone channels whose floors are
    invariant heteroclinic trajectories; each saddle's opposite unstable
    branch drains into its own registered auxiliary minimum at value 0. F is
    extended outside the channel structure by a coercive quadratic bowl.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    if lambda_u <= 0 or lambda_s <= 0 or drop <= 0:
        raise ValueError("lambda_u, lambda_s, drop must be positive")
    field_obj, geom = build_chain_field(k, lambda_u, lambda_s, drop)

    def field_eval(pts, want_hess=False):
        return field_obj.evaluate(pts, want_hess=want_hess)

    def f(x):
        val, _, _ = field_obj.evaluate(x[None, :], want_hess=False)
        return float(val[0])

    def grad(x):
        _, g, _ = field_obj.evaluate(x[None, :], want_hess=False)
        return g[0]

    def hess(x):
        _, _, h = field_obj.evaluate(x[None, :], want_hess=True)
        return h[0]

    def f_batch(pts):
        val, _, _ = field_obj.evaluate(pts, want_hess=False)
        return val

    def grad_batch(pts):
        _, g, _ = field_obj.evaluate(pts, want_hess=False)
        return g

    lam_m = geom.min_curvature
    gap = lambda_u
    floor = min(lambda_u, lambda_s)

    cps = []
    saddle_ev = np.sort(np.array([-lambda_u, lambda_s]))
    for loc, val in zip(geom.saddles, geom.saddle_values):
        cps.append(CriticalPoint(loc, float(val), saddle_ev,
                                 classify_critical_point(saddle_ev, gap, floor)))
    min_ev = np.array([lam_m, lam_m])
    cps.append(CriticalPoint(geom.terminal_min, 0.0, min_ev,
                             classify_critical_point(min_ev, gap, floor)))
    for loc in geom.spill_mins:
        cps.append(CriticalPoint(loc, 0.0, min_ev,
                                 classify_critical_point(min_ev, gap, floor)))

    pts = np.array([cp.location for cp in cps])
    center = 0.5 * (pts.min(axis=0) + pts.max(axis=0))
    radius = float(np.max(np.linalg.norm(pts - center, axis=1)) + 1.2 * geom.segment_length)

    gthr = _audit_gradient_threshold(field_eval, center, radius, gap)

    landscape = Landscape(
        name="saddle_chain", dim=2, f=f, grad=grad, hess=hess,
        critical_points=tuple(cps),
        spectral_gap=gap, gradient_threshold=gthr, eigen_floor=floor,
        working_center=center, working_radius=radius,
        params={"k": k, "lambda_u": lambda_u, "lambda_s": lambda_s, "drop": drop},
        f_batch=f_batch, grad_batch=grad_batch,
    )
    # Registry self-checks: exact critical points and consistent classification.
    for cp in landscape.critical_points:
        if np.linalg.norm(landscape.grad(cp.location)) > 1e-10:
            raise RuntimeError("registered critical point has nonzero gradient")
        if abs(landscape.f(cp.location) - cp.f_value) > 1e-12:
            raise RuntimeError("registered critical value mismatch")
    object.__setattr__(landscape, "chain_geometry", geom)
    return landscape


def chain_geometry(landscape: Landscape):
    """Exact geometry of a chain landscape (saddle positions, axes, channels)."""
    geom = getattr(landscape, "chain_geometry", None)
    if geom is None:
        raise ValueError("not a chain landscape")
    return geom


def terminal_minimum(landscape: Landscape) -> CriticalPoint:
    """The registered local minimum with the lowest value (first on ties)."""
    mins = [cp for cp in landscape.critical_points if cp.kind is CriticalKind.LOCAL_MIN]
    if not mins:
        raise ValueError("landscape has no registered local minimum")
    return min(mins, key=lambda cp: cp.f_value)


def strong_saddles(landscape: Landscape) -> list[CriticalPoint]:
    """Registered strong saddles in descending value order."""
    sads = [cp for cp in landscape.critical_points if cp.kind is CriticalKind.STRONG_SADDLE]
    return sorted(sads, key=lambda cp: -cp.f_value)


def default_level_margin(landscape: Landscape) -> float:
    """Default level margin h: a tenth of the smallest gap between consecutive
    registered critical values (saddles and the terminal minimum)."""
    values = sorted({cp.f_value for cp in strong_saddles(landscape)}
                    | {terminal_minimum(landscape).f_value}, reverse=True)
    if len(values) < 2:
        raise ValueError("need at least one saddle above the minimum")
    gaps = [a - b for a, b in zip(values, values[1:])]
    return 0.1 * min(gaps)


_BUILDERS = {
    "quadratic_saddle": builtin_quadratic_saddle,
    "quadratic_bowl": builtin_quadratic_bowl,
    "saddle_chain": builtin_saddle_chain,
}


def landscape_by_name(name: str, params: dict | None = None) -> Landscape:
    """Construct a built-in landscape from its name and parameter map."""
    if name not in _BUILDERS:
        raise KeyError(f"unknown landscape {name!r}; known: {sorted(_BUILDERS)}")
    return _BUILDERS[name](**(params or {}))


def with_parameters(landscape: Landscape, **kwargs) -> Landscape:
    """Copy with overridden classification parameters (for what-if checks)."""
    return replace(landscape, **kwargs)
