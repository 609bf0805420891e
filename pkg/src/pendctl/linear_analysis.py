"""Linearized plant models, polynomial roots, root locus and pole-domain targets."""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .dynamics import PhysicalParams

ROOT_TOL = 1e-12
ROOT_MAX_ITER = 200
_EPS = 2.220446049250313e-16


class RootFindingError(ArithmeticError):
    """Aberth iteration did not converge; carries the best roots and residuals."""

    def __init__(self, message, roots=(), residuals=()):
        super().__init__(message)
        self.roots = list(roots)
        self.residuals = list(residuals)


@dataclass(frozen=True)
class Polynomial:
    """Real polynomial, coefficients highest degree first."""

    coeffs: tuple[float, ...]

    def __init__(self, coeffs: Iterable[float]):
        cs = [float(c) for c in coeffs]
        if not cs:
            cs = [0.0]
        if not all(math.isfinite(c) for c in cs):
            raise ValueError(f"non-finite coefficient in {cs}")
        while len(cs) > 1 and cs[0] == 0.0:
            cs.pop(0)
        object.__setattr__(self, "coeffs", tuple(cs))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def is_zero(self) -> bool:
        return self.coeffs == (0.0,)

    def __call__(self, z):
        acc = 0.0
        for c in self.coeffs:
            acc = acc * z + c
        return acc

    def __mul__(self, other: "Polynomial") -> "Polynomial":
        return Polynomial(np.convolve(self.coeffs, other.coeffs))

    def __add__(self, other: "Polynomial") -> "Polynomial":
        n = max(len(self.coeffs), len(other.coeffs))
        a = (0.0,) * (n - len(self.coeffs)) + self.coeffs
        b = (0.0,) * (n - len(other.coeffs)) + other.coeffs
        return Polynomial(x + y for x, y in zip(a, b))

    def scale(self, k: float) -> "Polynomial":
        return Polynomial(k * c for c in self.coeffs)

    def norm_inf(self) -> float:
        return max(abs(c) for c in self.coeffs)

    def trailing_zeros(self) -> int:
        n = 0
        for c in reversed(self.coeffs):
            if c != 0.0 or n == self.degree:
                break
            n += 1
        return n

    def strip_origin(self, n: int) -> "Polynomial":
        """Divide by s**n; the last n coefficients must be exactly zero."""
        if n == 0:
            return self
        if any(c != 0.0 for c in self.coeffs[-n:]):
            raise ValueError(f"polynomial is not divisible by s^{n}")
        return Polynomial(self.coeffs[:-n])


S = Polynomial([1.0, 0.0])


def _horner2(coeffs, z):
    p = 0j
    dp = 0j
    for c in coeffs:
        dp = dp * z + p
        p = p * z + c
    return p, dp


def _residual_bound(coeffs, z) -> float:
    """Rounding-error bound of Horner evaluation at z."""
    az = abs(z)
    acc = 0.0
    for c in coeffs:
        acc = acc * az + abs(c)
    return 4.0 * len(coeffs) * _EPS * acc


def _exact_eval(coeffs, z: complex):
    """P(z) and P'(z) in exact rational arithmetic, as (re, im, d_re, d_im)."""
    a, b = Fraction(z.real), Fraction(z.imag)
    re = im = dre = dim = Fraction(0)
    for c in coeffs:
        dre, dim = dre * a - dim * b + re, dre * b + dim * a + im
        re, im = re * a - im * b + Fraction(c), re * b + im * a
    return re, im, dre, dim


def _exact_residual(coeffs, z: complex) -> float:
    """|P(z)| evaluated exactly at the floating-point root."""
    re, im, _, _ = _exact_eval(coeffs, z)
    return math.hypot(float(re), float(im))


def _polish(coeffs, z: complex, steps: int = 3) -> tuple[complex, float]:
    """Newton steps with exact evaluation, rounded to doubles; returns the best point."""
    best, best_res = z, _exact_residual(coeffs, z)
    real = z.imag == 0.0
    for _ in range(steps):
        re, im, dre, dim = _exact_eval(coeffs, z)
        den = dre * dre + dim * dim
        if den == 0:
            break
        step_re = (re * dre + im * dim) / den
        step_im = (im * dre - re * dim) / den
        z = complex(float(Fraction(z.real) - step_re), 0.0 if real else float(Fraction(z.imag) - step_im))
        res = _exact_residual(coeffs, z)
        if res < best_res:
            best, best_res = z, res
        else:
            break
    return best, best_res


def _aberth(coeffs: tuple[float, ...]) -> list[complex]:
    n = len(coeffs) - 1
    c0 = coeffs[0]
    if n == 1:
        return [complex(-coeffs[1] / c0)]
    radius = 1.0 + max(abs(c / c0) for c in coeffs[1:])
    z = [radius * cmath.exp(1j * (2.0 * math.pi * k / n + 0.4)) for k in range(n)]
    offsets = [0j] * n
    for _ in range(ROOT_MAX_ITER):
        done = True
        for k in range(n):
            zk = z[k]
            p, dp = _horner2(coeffs, zk)
            if abs(p) <= _residual_bound(coeffs, zk):
                offsets[k] = 0j
                continue
            s = 0j
            for j in range(n):
                if j != k:
                    diff = zk - z[j]
                    if diff != 0:
                        s += 1.0 / diff
            if dp == 0:
                ratio = p / (_EPS * (1.0 + abs(zk)))
            else:
                ratio = p / dp
            denom = 1.0 - ratio * s
            w = ratio / denom if denom != 0 else ratio
            z[k] = zk - w
            offsets[k] = w
            if abs(w) > ROOT_TOL * (1.0 + abs(z[k])):
                done = False
        if done:
            return z
    residuals = [abs(_horner2(coeffs, zk)[0]) for zk in z]
    raise RootFindingError(
        f"Aberth iteration did not converge in {ROOT_MAX_ITER} iterations",
        z,
        residuals,
    )


def _pair_conjugates(roots: list[complex]) -> list[complex]:
    """Snap near-real roots to the real axis and pair the rest as exact conjugates."""
    out: list[complex] = []
    upper: list[complex] = []
    lower: list[complex] = []
    for r in roots:
        if abs(r.imag) <= 1e-9 * (1.0 + abs(r)):
            out.append(complex(r.real, 0.0))
        elif r.imag > 0:
            upper.append(r)
        else:
            lower.append(r)
    if len(upper) != len(lower):
        # odd leftover means one member of a pair sits on the axis within noise
        extra = upper + lower
        extra.sort(key=lambda r: abs(r.imag))
        while len(upper) != len(lower):
            r = extra.pop(0)
            (upper if r in upper else lower).remove(r)
            out.append(complex(r.real, 0.0))
    for r in upper:
        mate = min(lower, key=lambda q: abs(q - r.conjugate()))
        lower.remove(mate)
        c = 0.5 * (r + mate.conjugate())
        out += [c, c.conjugate()]
    return out


def root_sort_key(r: complex):
    return (-r.real, -r.imag)


def find_roots(poly: Polynomial | Sequence[float]) -> list[complex]:
    """All roots of a real polynomial, with multiplicity.

    Exact zero roots are deflated first; the rest come from Aberth-Ehrlich
    iteration started on a circle of radius 1 + max|c_i / c_0|. Complex roots
    are returned as exact conjugate pairs.
    """
    if not isinstance(poly, Polynomial):
        poly = Polynomial(poly)
    if poly.degree < 1:
        raise ValueError("find_roots needs a polynomial of degree >= 1")
    nz = poly.trailing_zeros()
    reduced = poly.strip_origin(nz)
    roots = [0j] * nz
    if reduced.degree >= 1:
        roots += _pair_conjugates(_aberth(reduced.coeffs))
    limit = 1e-8 * (1.0 + poly.norm_inf())
    # exact evaluation: floating Horner can misreport the residual either way
    residuals = [_exact_residual(poly.coeffs, r) for r in roots]
    for i, r in enumerate(roots):
        if residuals[i] >= limit and r.imag >= 0:
            z, res = _polish(poly.coeffs, r)
            roots[i], residuals[i] = z, res
            if r.imag > 0:
                j = roots.index(r.conjugate())
                roots[j], residuals[j] = z.conjugate(), res
    if max(residuals) >= limit:
        raise RootFindingError(
            f"root residual {max(residuals):.3g} exceeds {limit:.3g}", roots, residuals
        )
    return sorted(roots, key=root_sort_key)


@dataclass(frozen=True)
class TransferFunction:
    numerator: Polynomial
    denominator: Polynomial

    def __post_init__(self):
        if self.denominator.is_zero:
            raise ValueError("denominator is identically zero")

    def poles(self) -> list[complex]:
        return find_roots(self.denominator) if self.denominator.degree >= 1 else []

    def zeros(self) -> list[complex]:
        return find_roots(self.numerator) if self.numerator.degree >= 1 else []

    @property
    def is_proper(self) -> bool:
        return self.numerator.degree <= self.denominator.degree

    def series(self, other: "TransferFunction") -> "TransferFunction":
        return TransferFunction(
            self.numerator * other.numerator, self.denominator * other.denominator
        )

    def cancel_origin(self) -> "TransferFunction":
        """Remove common factors of s shared by numerator and denominator."""
        if self.numerator.is_zero:
            return self
        n = min(self.numerator.trailing_zeros(), self.denominator.trailing_zeros())
        return TransferFunction(
            self.numerator.strip_origin(n), self.denominator.strip_origin(n)
        )


@dataclass(frozen=True)
class StateSpaceModel:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray


def plant_transfer_function(p: PhysicalParams) -> TransferFunction:
    """theta(s)/U(s) of the linearized plant, normalized to a monic cubic."""
    q = p.determinant
    ml = p.bob_mass * p.arm_length
    mgl = ml * p.gravity
    b = p.viscous_friction
    num = Polynomial([ml / q, 0.0])
    den = Polynomial([1.0, b * p.pivot_inertia / q, -p.total_mass * mgl / q, -b * mgl / q])
    return TransferFunction(num, den)


def plant_state_space(p: PhysicalParams, outputs: Sequence[str] = ("theta", "theta_dot")) -> StateSpaceModel:
    """State (x, x_dot, theta, theta_dot), input u, selected outputs."""
    q = p.determinant
    ml = p.bob_mass * p.arm_length
    mgl = ml * p.gravity
    b = p.viscous_friction
    j = p.pivot_inertia
    A = np.array([
        [0.0, 1.0, 0.0, 0.0],
        [0.0, -b * j / q, ml * ml * p.gravity / q, 0.0],
        [0.0, 0.0, 0.0, 1.0],
        [0.0, -ml * b / q, p.total_mass * mgl / q, 0.0],
    ])
    B = np.array([[0.0], [j / q], [0.0], [ml / q]])
    index = {"x": 0, "x_dot": 1, "theta": 2, "theta_dot": 3}
    C = np.zeros((len(outputs), 4))
    for row, name in enumerate(outputs):
        C[row, index[name]] = 1.0
    return StateSpaceModel(A, B, C, np.zeros((len(outputs), 1)))


def augment_integrator(tf: TransferFunction) -> TransferFunction:
    """Append a pole at the origin."""
    return TransferFunction(tf.numerator, tf.denominator * S)


def controller_transfer_function(kp: float, ki: float = 0.0, kd: float = 0.0) -> TransferFunction:
    """(kd s^2 + kp s + ki) / s for PID, (kd s + kp) / 1 otherwise."""
    if ki:
        return TransferFunction(Polynomial([kd, kp, ki]), S)
    return TransferFunction(Polynomial([kd, kp]), Polynomial([1.0]))


@dataclass(frozen=True)
class RootLocusSample:
    gain: float
    closed_loop_poles: tuple[complex, ...]


def closed_loop_polynomial(loop: TransferFunction, k: float) -> Polynomial:
    return loop.denominator + loop.numerator.scale(k)


def root_locus(
    tf: TransferFunction,
    controller: TransferFunction,
    gains: Sequence[float],
    cancel_origin: bool = True,
) -> list[RootLocusSample]:
    """Closed-loop poles of den(tf)den(c) + K num(tf)num(c) for each K.

    With `cancel_origin`, exact s factors common to the loop numerator and
    denominator are removed first (e.g. the plant zero against a PID pole).
    Poles are ordered to follow branches by nearest-neighbour matching.
    """
    gains = [float(k) for k in gains]
    if any(k <= 0 for k in gains):
        raise ValueError("gains must be strictly positive")
    if any(b < a for a, b in zip(gains, gains[1:])):
        raise ValueError("gains must be sorted ascending")
    loop = tf.series(controller)
    if cancel_origin:
        loop = loop.cancel_origin()
    out: list[RootLocusSample] = []
    prev: list[complex] | None = None
    for k in gains:
        try:
            poles = find_roots(closed_loop_polynomial(loop, k))
        except RootFindingError as exc:
            raise RootFindingError(f"root locus failed at K={k}: {exc}", exc.roots, exc.residuals) from exc
        if prev is not None and len(prev) == len(poles):
            poles = match_poles(prev, poles)
        out.append(RootLocusSample(k, tuple(poles)))
        prev = poles
    return out


def match_poles(prev: Sequence[complex], current: Sequence[complex]) -> list[complex]:
    """Greedy nearest-neighbour assignment of `current` onto the order of `prev`."""
    remaining = sorted(current, key=lambda r: (r.imag, r.real))
    ordered = []
    for r in prev:
        best = min(remaining, key=lambda c: abs(c - r))
        remaining.remove(best)
        ordered.append(best)
    return ordered


SETTLING_TARGET_S = 0.1
OVERSHOOT_TARGET_PCT = 2.0


def damping_for_overshoot(overshoot_pct: float) -> float:
    """Damping ratio giving the requested second-order percent overshoot."""
    lo = math.log(overshoot_pct / 100.0)
    return -lo / math.sqrt(math.pi**2 + lo * lo)


@dataclass(frozen=True)
class DesignVerdict:
    stable: bool
    settling_ok: bool
    overshoot_ok: bool
    dominant_real: float
    estimated_settling_s: float  # 4/|Re| heuristic
    settling_margin: float  # required Re bound minus dominant Re; >= 0 passes
    min_damping: float
    damping_margin: float  # min damping minus required; >= 0 passes

    @property
    def passed(self) -> bool:
        return self.stable and self.settling_ok and self.overshoot_ok

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["passed"] = self.passed
        d["settling_heuristic"] = "t_s ~ 4/|Re(dominant pole)|"
        return d


def meets_design_targets(
    poles: Sequence[complex],
    settling_s: float = SETTLING_TARGET_S,
    overshoot_pct: float = OVERSHOOT_TARGET_PCT,
) -> DesignVerdict:
    """Check settling-time and overshoot targets in the pole domain."""
    if not poles:
        raise ValueError("empty pole list")
    poles = [complex(p) for p in poles]
    dominant = max(p.real for p in poles)
    stable = dominant < 0
    required_re = -4.0 / settling_s
    zeta_req = damping_for_overshoot(overshoot_pct)
    zetas = [
        -p.real / abs(p) for p in poles if abs(p.imag) > 0 and abs(p) > 0
    ]
    min_zeta = min(zetas) if zetas else 1.0
    est = 4.0 / abs(dominant) if dominant != 0 else math.inf
    return DesignVerdict(
        stable=stable,
        settling_ok=stable and dominant <= required_re,
        overshoot_ok=stable and min_zeta >= zeta_req,
        dominant_real=dominant,
        estimated_settling_s=est,
        settling_margin=required_re - dominant,
        min_damping=min_zeta,
        damping_margin=min_zeta - zeta_req,
    )
