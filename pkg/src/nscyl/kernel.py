"""Fundamental solution of the Laplacian on R x T and the constants derived from it.

``K(x1, x2) = log(2 cosh(2 pi x1) - 2 cos(2 pi x2)) / (4 pi)``

The velocity bounds need the L1 norms of d2K and of d1Kbar, where
``Kbar = K - |x1| / 2``.  Both are computed here by quadrature over
[-X, X] x T; the integrands decay like exp(-2 pi |x1|) and carry a 1/r
singularity at the origin, handled by geometric grading.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

TWO_PI = 2 * np.pi
ASYMPTOTIC_X1 = 10.0


class KernelSingularityError(ValueError):
    """Raised when K is evaluated on its logarithmic singularity."""


class QuadratureError(RuntimeError):
    """Raised when the kernel norms fail the refinement test."""


def _on_singularity(x1, x2) -> np.ndarray:
    frac = np.abs(x2 - np.rint(x2))
    return (np.asarray(x1) == 0) & (frac == 0)


def _denominator(x1, x2):
    # 2 cosh(2 pi x1) - 2 cos(2 pi x2) without cancellation near the origin
    return 4.0 * (np.sinh(np.pi * x1) ** 2 + np.sin(np.pi * x2) ** 2)


def kernel_K(x1, x2):
    """Evaluate K; switches to the asymptotic form for |x1| > 10."""
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    if np.any(_on_singularity(x1, x2)):
        raise KernelSingularityError("K has a logarithmic singularity at the lattice points (0, n)")
    a = np.abs(x1)
    far = a > ASYMPTOTIC_X1
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        near_val = np.log(_denominator(x1, x2)) / (4 * np.pi)
        q = np.exp(-TWO_PI * a)
        far_val = a / 2 + np.log1p(-2 * np.cos(TWO_PI * x2) * q + q * q) / (4 * np.pi)
    out = np.where(far, far_val, near_val)
    return out[()] if out.ndim == 0 else out


def _scaled_parts(x1, x2):
    """Return (q, den) with q = exp(-2 pi |x1|), den = 1 + q^2 - 2 q cos(2 pi x2).

    ``2 cosh - 2 cos = den / q``; this form stays finite for large |x1|.
    """
    q = np.exp(-TWO_PI * np.abs(x1))
    den = 1.0 + q * q - 2.0 * q * np.cos(TWO_PI * x2)
    return q, den


def kernel_d1K(x1, x2):
    """d K / d x1 = sinh(2 pi x1) / (2 cosh(2 pi x1) - 2 cos(2 pi x2))."""
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    return np.sign(x1) / 2 + kernel_d1Kbar(x1, x2)


def kernel_d1Kbar(x1, x2):
    """d Kbar / d x1 = sgn(x1) (cos(2 pi x2) - e^{-2 pi |x1|}) / (2 cosh - 2 cos)."""
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        near = np.abs(x1) <= 1.0
        den_near = _denominator(x1, x2)
        q, den_far = _scaled_parts(x1, x2)
        num = np.cos(TWO_PI * x2) - q
        val = np.where(near, num / den_near, num * q / den_far)
    return np.sign(x1) * val


def kernel_d2K(x1, x2):
    """d K / d x2 = sin(2 pi x2) / (2 cosh(2 pi x1) - 2 cos(2 pi x2))."""
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        near = np.abs(x1) <= 1.0
        q, den_far = _scaled_parts(x1, x2)
        s = np.sin(TWO_PI * x2)
        val = np.where(near, s / _denominator(x1, x2), s * q / den_far)
    return val


# ---------------------------------------------------------------------------
# L1 norms by graded composite Gauss-Legendre quadrature
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QuadratureSpec:
    """Resolution of the kernel-norm quadrature.

    Attributes:
        cutoff: horizontal truncation X of [-X, X] x T (must be >= 10).
        order: Gauss-Legendre nodes per panel.
        levels: number of geometric grading levels toward the singular point.
    """

    cutoff: float = 12.0
    order: int = 8
    levels: int = 24

    def __post_init__(self):
        if self.cutoff < 10:
            raise ValueError(f"quadrature cutoff must be >= 10, got {self.cutoff}")
        if self.order < 2 or self.levels < 4:
            raise ValueError("quadrature order must be >= 2 and levels >= 4")

    def refined(self) -> "QuadratureSpec":
        return QuadratureSpec(self.cutoff, 2 * self.order, 2 * self.levels)


def _composite_nodes(breaks: np.ndarray, order: int) -> tuple[np.ndarray, np.ndarray]:
    t, w = np.polynomial.legendre.leggauss(order)
    a = breaks[:-1, None]
    b = breaks[1:, None]
    half = (b - a) / 2
    nodes = (a + b) / 2 + half * t[None, :]
    weights = half * w[None, :]
    return nodes.ravel(), weights.ravel()


def _sign_curve(x1: float) -> float:
    # d1Kbar changes sign where cos(2 pi x2) = exp(-2 pi x1)
    return float(np.arccos(np.exp(-TWO_PI * x1)) / TWO_PI)


def _inner_breaks(x1: float, extra: float | None, levels: int) -> np.ndarray:
    pts = [0.0, 0.5]
    s = x1
    for _ in range(levels):
        if s >= 0.5:
            break
        pts.append(s)
        s *= 2
    if extra is not None and 0 < extra < 0.5:
        pts.append(extra)
    return np.unique(np.array(pts))


def _outer_breaks(spec: QuadratureSpec) -> np.ndarray:
    graded = 0.5 * 2.0 ** -np.arange(spec.levels + 1)
    uniform = np.arange(0.5, spec.cutoff + 1e-12, 0.5)
    return np.unique(np.concatenate([[0.0], graded, uniform]))


def kernel_l1_norms(spec: QuadratureSpec) -> tuple[float, float]:
    """Return (||d2K||_1, ||d1Kbar||_1) over [-X, X] x T.

    Both integrands are even under (x1, x2) -> (x1, -x2) and |.| is even in
    x1, so the integral is four times the quadrant [0, X] x [0, 1/2].  The
    inner x2 integral is split at the sign change of d1Kbar so that every
    panel sees a smooth integrand.
    """
    x1_nodes, x1_weights = _composite_nodes(_outer_breaks(spec), spec.order)
    total_d2 = 0.0
    total_d1 = 0.0
    for x1, w1 in zip(x1_nodes, x1_weights):
        breaks = _inner_breaks(x1, _sign_curve(x1), spec.levels)
        x2, w2 = _composite_nodes(breaks, spec.order)
        total_d2 += w1 * np.dot(w2, np.abs(kernel_d2K(x1, x2)))
        total_d1 += w1 * np.dot(w2, np.abs(kernel_d1Kbar(x1, x2)))
    return 4 * total_d2, 4 * total_d1


@dataclass
class KernelConstants:
    """Kernel norms and the velocity/pressure constants assembled from them."""

    norm_d2K: float
    norm_d1Kbar: float
    C1: float
    C2: float
    quadrature_resolution: dict
    refinement_change: dict = field(default_factory=dict)
    derivation: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "KernelConstants":
        keys = {"norm_d2K", "norm_d1Kbar", "C1", "C2", "quadrature_resolution",
                "refinement_change", "derivation"}
        return cls(**{k: v for k, v in data.items() if k in keys})


REFINEMENT_TOLERANCE = 5e-3


def assemble_kernel_constants(norm_d2K: float, norm_d1Kbar: float) -> tuple[float, float, list]:
    """C1 and C2 from the two kernel norms, with the derivation trace."""
    C1 = 2 * max(norm_d2K, norm_d1Kbar)
    C2 = C1**2 + 2 * norm_d2K * C1
    trace = [
        "||u1_osc||_inf <= ||d2K||_1 ||omega_osc||_inf and "
        "||u2_osc||_inf <= ||d1Kbar||_1 ||omega_osc||_inf (Young)",
        "||omega_osc||_inf <= 2 ||omega||_inf",
        f"C1 = 2 max(||d2K||_1, ||d1Kbar||_1) = 2 max({norm_d2K:.12g}, {norm_d1Kbar:.12g}) = {C1:.12g}",
        "||p||_inf <= ||u1||_inf^2 + 2 ||d2K||_1 ||omega||_inf ||u1||_inf with ||u1||_inf <= C1 ||omega||_inf",
        f"C2 = C1^2 + 2 ||d2K||_1 C1 = {C2:.12g}",
    ]
    return C1, C2, trace


def compute_kernel_constants(spec: QuadratureSpec | None = None) -> KernelConstants:
    """Compute the kernel norms at ``spec`` and at twice its resolution.

    The refined values are returned.  Raises :class:`QuadratureError` when
    either norm moves by more than 0.5% under refinement.
    """
    spec = spec or QuadratureSpec()
    fine = spec.refined()
    coarse_vals = kernel_l1_norms(spec)
    fine_vals = kernel_l1_norms(fine)
    change = {
        name: abs(f - c) / abs(f)
        for name, c, f in zip(("norm_d2K", "norm_d1Kbar"), coarse_vals, fine_vals)
    }
    if any(not math.isfinite(v) or v > REFINEMENT_TOLERANCE for v in change.values()):
        raise QuadratureError(f"kernel norms not converged under refinement: {change}")
    norm_d2K, norm_d1Kbar = fine_vals
    C1, C2, trace = assemble_kernel_constants(norm_d2K, norm_d1Kbar)
    return KernelConstants(
        norm_d2K=float(norm_d2K),
        norm_d1Kbar=float(norm_d1Kbar),
        C1=float(C1),
        C2=float(C2),
        quadrature_resolution={"base": asdict(spec), "refined": asdict(fine),
                               "method": "graded composite Gauss-Legendre"},
        refinement_change=change,
        derivation=trace,
    )


# ---------------------------------------------------------------------------
# Direct Biot-Savart convolution (reference path for the spectral inversion)
# ---------------------------------------------------------------------------


def biot_savart_direct(vorticity, targets, h: float = 1 / 64, half_width: float = 4.0,
                       richardson: bool = True) -> np.ndarray:
    """Oscillating velocity at ``targets`` by direct lattice quadrature of the kernel.

    ``vorticity`` is a vectorized callable ``w(y1, y2)`` for an oscillating
    field (zero vertical average) on the infinite cylinder.  For each target
    the convolution with (-d2K, d1Kbar) is summed over a lattice centred on
    the target, omitting the singular node; the odd kernel makes this
    second-order accurate and one Richardson step raises the order.

    Returns an array of shape (len(targets), 2).
    """
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    n2 = int(round(1 / h))
    if not math.isclose(n2 * h, 1.0):
        raise ValueError("h must divide the vertical period")

    def lattice_sum(step: float, per: int) -> np.ndarray:
        m = int(math.ceil(half_width / step))
        r1 = step * np.arange(-m, m + 1)
        r2 = step * (np.arange(per) - per // 2)
        R1, R2 = np.meshgrid(r1, r2, indexing="ij")
        puncture = (R1 == 0) & (R2 == 0)
        R1s = np.where(puncture, 1.0, R1)
        k1 = np.where(puncture, 0.0, -kernel_d2K(R1s, R2))
        k2 = np.where(puncture, 0.0, kernel_d1Kbar(R1s, R2))
        out = np.empty((len(targets), 2))
        for i, (t1, t2) in enumerate(targets):
            w = vorticity(t1 - R1, t2 - R2)
            out[i, 0] = np.sum(k1 * w) * step * step
            out[i, 1] = np.sum(k2 * w) * step * step
        return out

    coarse = lattice_sum(h, n2)
    if not richardson:
        return coarse
    fine = lattice_sum(h / 2, 2 * n2)
    return (4 * fine - coarse) / 3
