"""Non-Abelian holonomy over degenerate eigenspaces.

Frames spanning an eigenvalue cluster are tracked along a parameter path,
gauge-smoothed with the polar factor of each link overlap, and multiplied
in path order into a discretized Wilson line. For the four-level model the
result is checked against the closed-form rotation B(eta) with
eta = loop integral of sin(phi) d theta.

Link/product conventions: W_k = F_k^dag F_{k+1}; the Wilson line is
W_0 W_1 ... W_{N-2} W_close with W_close = F_{N-1}^dag F_0, unitarized,
expressed in the basis of the initial frame. An evolved frame G compared
as G^dag F_0 converges to this product in the adiabatic limit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .linalg import (
    dagger,
    eigh_batch,
    max_abs,
    nearest_unitary,
    unitarity_defect,
    wrap_angle,
)
from .models import DARK_SINGULAR_TOL, HamiltonianModel, ParameterPath

GAP_TOL = 1e-9
SUBSPACE_OVERLAP_TOL = 1e-6


class GapClosureError(ValueError):
    """The tracked cluster loses its spectral gap somewhere on the path."""

    def __init__(self, s: float, gap: float):
        self.s = s
        self.gap = gap
        super().__init__(
            f"eigenvalue cluster loses its gap at s = {s:.6f} (gap = {gap:.3e})"
        )


class IllConditionedLinkError(ValueError):
    """A link overlap matrix is nearly singular: the subspace jumped."""

    def __init__(self, index: int, sigma_min: float):
        self.index = index
        self.sigma_min = sigma_min
        super().__init__(
            f"link {index} overlap has smallest singular value {sigma_min:.3e} "
            f"<= {SUBSPACE_OVERLAP_TOL:.1e}; the tracked subspace is not continuous"
        )


@dataclass(frozen=True)
class BandBlock:
    """Contiguous range [start, stop) of ascending-eigenvalue indices."""

    start: int
    stop: int

    def __post_init__(self):
        if not 0 <= self.start < self.stop:
            raise ValueError(f"invalid band block [{self.start}, {self.stop})")

    @property
    def size(self) -> int:
        return self.stop - self.start

    def indices(self) -> slice:
        return slice(self.start, self.stop)


USB_DARK_BLOCK = BandBlock(1, 3)


@dataclass
class FramePath:
    """Gauge-smoothed orthonormal frames along a sampled path.

    frames has shape (n_samples, dim, m); consecutive raw overlaps were
    well conditioned (min_link_singular_value) and each smoothed link
    F_k^dag F_{k+1} is Hermitian positive up to the geometry's torsion.
    For closed paths the last frame is NOT re-aligned to the first: that
    mismatch is the holonomy.
    """

    frames: np.ndarray
    path: ParameterPath
    block: BandBlock
    min_link_singular_value: float

    @property
    def samples(self) -> int:
        return self.frames.shape[0]

    @property
    def block_size(self) -> int:
        return self.frames.shape[2]


@dataclass
class HolonomyResult:
    matrix: np.ndarray
    unitarity_defect: float
    samples: int
    min_link_singular_value: float
    eta_estimate: float | None = None


def _check_block_gap(
    w: np.ndarray, block: BandBlock, s_values: np.ndarray
) -> None:
    scale = max(1.0, float(np.max(np.abs(w))))
    gaps = []
    if block.start > 0:
        gaps.append(w[:, block.start] - w[:, block.start - 1])
    if block.stop < w.shape[1]:
        gaps.append(w[:, block.stop] - w[:, block.stop - 1])
    if not gaps:
        return
    gap = np.min(np.stack(gaps), axis=0)
    k = int(np.argmin(gap))
    if gap[k] <= GAP_TOL * scale:
        raise GapClosureError(float(s_values[k]), float(gap[k]))


def eigenframe_path(
    model: HamiltonianModel,
    path: ParameterPath,
    block: BandBlock,
    n_samples: int,
    initial_frame: np.ndarray | None = None,
) -> FramePath:
    """Track the block's eigenframe along the path with smoothed gauge.

    Each raw frame from the eigensolver is post-multiplied by the dagger
    of the polar factor of the previous link, killing the solver's
    arbitrary per-point gauge; what survives in the link product is the
    geometry. An explicit initial_frame (e.g. the analytic dark pair at
    the basepoint) fixes the basis the holonomy is reported in.
    """
    if n_samples < 16:
        raise ValueError(f"need at least 16 samples, got {n_samples}")
    s_values = path.sample_s(n_samples)
    lams = path(s_values)
    hs = model.evaluate_batch(lams)
    w, v = eigh_batch(hs)
    if block.stop > w.shape[1]:
        raise ValueError(
            f"block [{block.start}, {block.stop}) out of range for dim {w.shape[1]}"
        )
    _check_block_gap(w, block, s_values)

    raw = v[:, :, block.indices()]
    n, dim, m = raw.shape
    frames = np.empty_like(raw)
    if initial_frame is None:
        frames[0] = raw[0]
    else:
        f0 = np.asarray(initial_frame, dtype=complex).reshape(dim, m)
        if max_abs(dagger(f0) @ f0 - np.eye(m)) > 1e-10:
            raise ValueError("initial_frame columns are not orthonormal")
        residual = f0 - raw[0] @ (dagger(raw[0]) @ f0)
        if max_abs(residual) > 1e-8:
            raise ValueError(
                "initial_frame does not span the requested eigenvalue block "
                f"(projection residual {max_abs(residual):.3e})"
            )
        frames[0] = f0

    min_sv = math.inf
    for k in range(1, n):
        overlap = dagger(frames[k - 1]) @ raw[k]
        sv = np.linalg.svd(overlap, compute_uv=False)
        min_sv = min(min_sv, float(sv[-1]))
        if sv[-1] <= SUBSPACE_OVERLAP_TOL:
            raise IllConditionedLinkError(k - 1, float(sv[-1]))
        frames[k] = raw[k] @ dagger(nearest_unitary(overlap))
    if path.closed:
        closing = dagger(frames[-1]) @ frames[0]
        sv = np.linalg.svd(closing, compute_uv=False)
        min_sv = min(min_sv, float(sv[-1]))
        if sv[-1] <= SUBSPACE_OVERLAP_TOL:
            raise IllConditionedLinkError(n - 1, float(sv[-1]))
    return FramePath(
        frames=frames,
        path=path,
        block=block,
        min_link_singular_value=min_sv if min_sv < math.inf else 1.0,
    )


def wilson_line(frame_path: FramePath) -> HolonomyResult:
    """Ordered product of link overlaps around a closed path, unitarized.

    Discretizes the path-ordered holonomy as
    nearest_unitary(W_0 W_1 ... W_close); converges to the continuum
    limit as the sampling is refined and reduces to e^{i chi} with the
    chain phase chi for one-dimensional blocks.
    """
    if not frame_path.path.closed:
        raise ValueError("the Wilson line is defined for closed paths only")
    frames = frame_path.frames
    n, _, m = frames.shape
    product = np.eye(m, dtype=complex)
    min_sv = math.inf
    for k in range(n):
        nxt = frames[(k + 1) % n]
        link = dagger(frames[k]) @ nxt
        sv = np.linalg.svd(link, compute_uv=False)
        min_sv = min(min_sv, float(sv[-1]))
        if sv[-1] <= SUBSPACE_OVERLAP_TOL:
            raise IllConditionedLinkError(k, float(sv[-1]))
        product = product @ link
    matrix = nearest_unitary(product)
    return HolonomyResult(
        matrix=matrix,
        unitarity_defect=unitarity_defect(matrix),
        samples=n,
        min_link_singular_value=float(min_sv),
    )


# ---------------------------------------------------------------------------
# Four-level dark-space quantities
# ---------------------------------------------------------------------------


def _usb_samples(path: ParameterPath, n_samples: int) -> np.ndarray:
    lams = path.sample(n_samples, include_endpoint=True)
    hyp2 = lams[:, 0] ** 2 + lams[:, 1] ** 2
    bad = np.nonzero(hyp2 < DARK_SINGULAR_TOL**2)[0]
    if len(bad):
        s = bad[0] / n_samples
        raise ValueError(f"dark-frame angle singular at s = {s:.6f} (P = S = 0)")
    return lams


def usb_eta_pair(path: ParameterPath, n_samples: int = 2**14) -> tuple[float, float]:
    """The rotation angle eta by two independent quadratures.

    First form: trapezoidal integral of sin(phi) d theta with theta
    unwrapped along the path. Second form (closed loops): trapezoidal sum
    of the explicit line integrand Q (S dP - P dS) / ((P^2+S^2) R) with
    R = sqrt(P^2+S^2+Q^2). Both converge O(1/N^2) to the same value; their
    agreement is the internal consistency check for shipped loops.
    """
    lams = _usb_samples(path, n_samples)
    pp, ss, qq = lams[:, 0], lams[:, 1], lams[:, 2]
    hyp = np.hypot(pp, ss)
    theta = np.unwrap(np.arctan2(pp, ss))
    sin_phi = qq / np.hypot(hyp, qq)

    d_theta = np.diff(theta)
    eta_theta = float(np.sum(0.5 * (sin_phi[:-1] + sin_phi[1:]) * d_theta))

    r = np.hypot(hyp, qq)
    f = qq / (hyp**2 * r)
    fs, fp = f * ss, f * pp
    dp, ds = np.diff(pp), np.diff(ss)
    eta_line = float(
        np.sum(0.5 * (fs[:-1] + fs[1:]) * dp) - np.sum(0.5 * (fp[:-1] + fp[1:]) * ds)
    )
    return eta_theta, eta_line


def usb_eta(path: ParameterPath, n_samples: int = 2**14) -> float:
    """eta from the sin(phi) d theta quadrature (the primary form)."""
    return usb_eta_pair(path, n_samples)[0]


def usb_holonomy_closed_form(eta: float) -> np.ndarray:
    """Closed-form dark-space holonomy: rotation ((cos, sin), (-sin, cos))."""
    c, s = math.cos(eta), math.sin(eta)
    return np.array([[c, s], [-s, c]])


def usb_wilson_line(
    path: ParameterPath, n_samples: int, model: HamiltonianModel | None = None
) -> HolonomyResult:
    """Wilson line over the dark pair, based at the analytic dark frame.

    The initial frame is pinned to the analytic (Phi1, Phi2) at the loop
    basepoint so the result is directly comparable to the closed-form
    rotation; eta_estimate is read off the matrix as atan2(V01, V00).
    """
    from .models import UsbModel, usb_dark_frame

    model = model or UsbModel()
    phi1, phi2 = usb_dark_frame(path(np.array([0.0]))[0])
    f0 = np.stack([phi1, phi2], axis=1)
    frames = eigenframe_path(model, path, USB_DARK_BLOCK, n_samples, initial_frame=f0)
    result = wilson_line(frames)
    result.eta_estimate = float(
        math.atan2(result.matrix[0, 1].real, result.matrix[0, 0].real)
    )
    return result


# ---------------------------------------------------------------------------
# Unitary comparison
# ---------------------------------------------------------------------------


def holonomy_distance(u: np.ndarray, v: np.ndarray) -> float:
    """min over global phase of the max-entry norm ||e^{i a} U - V||.

    Zero iff the two unitaries agree up to a global phase. The minimum is
    located by a coarse phase scan refined by golden-section search, with
    the Frobenius-optimal phase included as a candidate.
    """
    u = np.asarray(u, dtype=complex)
    v = np.asarray(v, dtype=complex)
    if u.shape != v.shape or u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise ValueError(f"dimension mismatch: {u.shape} vs {v.shape}")

    def f(alpha: float) -> float:
        return max_abs(np.exp(1j * alpha) * u - v)

    grid = np.linspace(-math.pi, math.pi, 1024, endpoint=False)
    values = [f(a) for a in grid]
    k = int(np.argmin(values))
    candidates = [(values[k], grid[k])]
    trace = np.trace(dagger(u) @ v)
    if abs(trace) > 1e-14:
        alpha_f = float(np.angle(trace))
        candidates.append((f(alpha_f), alpha_f))
    best_val, best_alpha = min(candidates)

    span = grid[1] - grid[0]
    lo, hi = best_alpha - span, best_alpha + span
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(80):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return min(best_val, fc, fd)


def eigenangle_distance(u: np.ndarray, v: np.ndarray) -> float:
    """Distance between the eigenvalue multisets of two unitaries.

    Eigenangles are sorted on the circle and matched over cyclic shifts;
    invariant under basis conjugation of either argument.
    """
    au = np.sort(np.angle(np.linalg.eigvals(u)))
    av = np.sort(np.angle(np.linalg.eigvals(v)))
    if len(au) != len(av):
        raise ValueError("dimension mismatch")
    m = len(au)
    best = math.inf
    for shift in range(m):
        diffs = wrap_angle(au - np.roll(av, shift))
        best = min(best, float(np.max(np.abs(diffs))))
    return best
