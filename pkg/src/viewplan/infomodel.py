"""
Continuous information model: one polynomial per sampling circle.

Each circle's discrete gains are regressed onto a degree-n polynomial in the
scan angle.  The piecewise model evaluates a point by snapping its radius to the
nearest circle and evaluating that circle's polynomial at the point's angle.
"""

from dataclasses import dataclass, field
import bisect
import math

import numpy as np

from .errors import EmptyModel, RankDeficient
from .geometry import wrap_angle
from .sampling import best_sample, polar_to_world

DEFAULT_DEGREE = 6


@dataclass(frozen=True)
class InfoCurve:
    circle_index: int
    radius: float
    coefficients: tuple
    theta_max: float
    residual: float = 0.0

    @property
    def degree(self):
        return len(self.coefficients) - 1

    def clamp(self, theta):
        """Clamp ``theta`` into the domain; the flag is set when clamping happened."""
        if theta > self.theta_max:
            return self.theta_max, True
        if theta < -self.theta_max:
            return -self.theta_max, True
        return theta, False


def fit_curve(thetas, gains, degree=DEFAULT_DEGREE, circle_index=0, radius=0.0, theta_max=None):
    """Least-squares polynomial fit of gains over scan angles.

    Angles are rescaled to [-1, 1] before building the Vandermonde matrix and the
    coefficients are mapped back afterwards.
    """
    th = np.asarray(thetas, dtype=float)
    g = np.asarray(gains, dtype=float)
    if th.shape != g.shape or th.ndim != 1:
        raise ValueError("thetas and gains must be 1-D arrays of equal length")
    if len(th) < degree + 1:
        raise RankDeficient(f"{len(th)} samples cannot determine a degree-{degree} polynomial")
    span = float(np.max(np.abs(th)))
    if span == 0.0:
        raise RankDeficient("all sample angles are zero")
    vander = np.vander(th / span, degree + 1, increasing=True)
    if np.linalg.matrix_rank(vander) < degree + 1:
        raise RankDeficient("Vandermonde matrix is rank deficient")
    scaled, *_ = np.linalg.lstsq(vander, g, rcond=None)
    resid = float(np.linalg.norm(vander @ scaled - g))
    coeffs = tuple(float(b) / span ** k for k, b in enumerate(scaled))
    return InfoCurve(circle_index, float(radius), coeffs, span if theta_max is None else float(theta_max), resid)


def _horner(coeffs, x):
    acc = 0.0
    for a in reversed(coeffs):
        acc = acc * x + a
    return acc


def _horner_d1(coeffs, x):
    acc = 0.0
    for s in range(len(coeffs) - 1, 0, -1):
        acc = acc * x + s * coeffs[s]
    return acc


def _horner_d2(coeffs, x):
    acc = 0.0
    for s in range(len(coeffs) - 1, 1, -1):
        acc = acc * x + s * (s - 1) * coeffs[s]
    return acc


def curve_eval(curve, theta):
    return _horner(curve.coefficients, curve.clamp(theta)[0])


def curve_derivative(curve, theta):
    return _horner_d1(curve.coefficients, curve.clamp(theta)[0])


def curve_argmax(curve, init_theta, tol=1e-8, max_iter=100):
    """Maximise a curve by projected gradient ascent from ``init_theta``.

    The step length starts at the inverse curvature when the curve is locally
    concave (a full step otherwise) and is halved until the Armijo condition
    holds.  Both domain ends are compared against the ascent result.
    """
    c = curve.coefficients
    lim = curve.theta_max
    th = curve.clamp(init_theta)[0]
    f = _horner(c, th)
    for _ in range(max_iter):
        g = _horner_d1(c, th)
        if abs(g) < tol:
            break
        h = _horner_d2(c, th)
        alpha = 1.0 / -h if h < -1e-12 else 2.0 * lim / abs(g)
        moved = False
        for _ in range(60):
            cand = min(lim, max(-lim, th + alpha * g))
            fc = _horner(c, cand)
            if fc >= f + 1e-4 * g * (cand - th) and cand != th:
                moved = True
                break
            alpha *= 0.5
        if not moved:
            break
        th, f = cand, fc
    best = (th, f)
    for end in (-lim, lim):
        fe = _horner(c, end)
        if fe > best[1]:
            best = (end, fe)
    return best


@dataclass
class LocalInfoModel:
    """Piecewise-circle information model around one robot pose."""

    center_position: np.ndarray
    base_yaw: float
    curves: list
    camera_position: np.ndarray = None
    init_thetas: list = field(default_factory=list)
    scale: float = 1.0

    def __post_init__(self):
        self.center_position = np.asarray(self.center_position, dtype=float)
        self.radii = np.array([c.radius for c in self.curves], dtype=float)
        self._radii = self.radii.tolist()
        if len(self.radii) > 1 and np.any(np.diff(self.radii) <= 0):
            raise ValueError("curves must be sorted by strictly increasing radius")

    def snap(self, radius):
        """Index of the nearest circle; exact midpoints go to the smaller radius."""
        if not self.curves:
            raise EmptyModel("model has no curves")
        radii = self._radii
        k = bisect.bisect_left(radii, radius)
        if k == 0:
            return 0
        if k == len(radii):
            return k - 1
        # within 1e-9 of the midpoint counts as a tie
        return k if radii[k] - radius < radius - radii[k - 1] - 1e-9 else k - 1

    def polar(self, point):
        dx = float(point[0]) - float(self.center_position[0])
        dy = float(point[1]) - float(self.center_position[1])
        return math.hypot(dx, dy), wrap_angle(math.atan2(dx, dy) - self.base_yaw)

    def evaluate(self, point):
        rho, theta = self.polar(point)
        return curve_eval(self.curves[self.snap(rho)], theta)

    def point_at(self, i, theta):
        return polar_to_world(self.center_position, self.base_yaw, self.curves[i].radius, theta)

    def peaks(self):
        """Per-curve ``(theta, value)`` maxima from the stored initial angles (computed once)."""
        if getattr(self, "_peaks", None) is None:
            inits = self.init_thetas if len(self.init_thetas) == len(self.curves) else [0.0] * len(self.curves)
            self._peaks = [curve_argmax(c, th) for c, th in zip(self.curves, inits)]
        return self._peaks


def build_local_model(grid, degree=DEFAULT_DEGREE, scale=1.0, camera_position=None):
    """Fit one curve per circle of an evaluated grid (gains divided by ``scale``)."""
    if grid.gains is None:
        raise ValueError("grid gains have not been evaluated")
    tmax = grid.params.theta_max
    curves = [
        fit_curve(grid.thetas, grid.gains[i] / scale, degree, i, float(grid.radii[i]), tmax)
        for i in range(len(grid.radii))
    ]
    inits = [s.theta for s in best_sample(grid)]
    return LocalInfoModel(grid.robot_position, grid.base_yaw, curves, camera_position, inits, scale)


@dataclass(frozen=True)
class BestPoint:
    point: np.ndarray
    value: float
    circle_index: int
    theta: float


def global_best(model, init_thetas=None):
    """Best point over all curves, each maximised from its initial angle."""
    if not model.curves:
        raise EmptyModel("model has no curves")
    inits = model.init_thetas if init_thetas is None else init_thetas
    if len(inits) != len(model.curves):
        inits = [0.0] * len(model.curves)
    found = []
    for curve, init in zip(model.curves, inits):
        th, val = curve_argmax(curve, init)
        found.append((val, curve.radius, abs(th), curve.circle_index, th))
    val, _, _, i, th = min(found, key=lambda t: (-t[0], t[1], t[2]))
    return BestPoint(model.point_at(i, th), val, i, th)
