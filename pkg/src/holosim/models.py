"""Parametrized Hamiltonians and the parameter-path abstraction.

Two concrete families ship:

* a qubit H = n . sigma, either with Cartesian parameters n in R^3 or
  pinned to a sphere of fixed radius with (theta, phi) parameters;
* a four-level system with one level coupled to the other three by
  couplings (P, S, Q), whose zero-eigenvalue pair ("dark space") carries
  the non-Abelian holonomy.

Angle conventions used throughout: theta = atan2(P, S) and
phi = atan2(Q, sqrt(P^2 + S^2)). With these, the dark vectors below are
exact null vectors of the four-level Hamiltonian; theta must be unwrapped
(|d theta| < pi between adjacent samples) when integrated along a path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .linalg import RANK_TOL, eigh_batch

CLOSURE_TOL = 1e-12
DARK_SINGULAR_TOL = 1e-9

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI = np.stack([SIGMA_X, SIGMA_Y, SIGMA_Z])


class DarkFrameSingularError(ValueError):
    """P = S = 0: the dark-frame angle theta is undefined there."""


@dataclass(frozen=True)
class QubitDirection:
    """A direction/field vector n in R^3 (energy units)."""

    n: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "n", np.asarray(self.n, dtype=float).reshape(3))

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.n))

    @property
    def theta(self) -> float:
        """Polar angle from +z."""
        return math.atan2(math.hypot(self.n[0], self.n[1]), self.n[2])

    @property
    def phi(self) -> float:
        """Azimuthal angle in the xy plane."""
        return math.atan2(self.n[1], self.n[0])


@dataclass(frozen=True)
class UsbParameters:
    """Couplings (P, S, Q) of the four-level model."""

    p: float
    s: float
    q: float

    def as_array(self) -> np.ndarray:
        return np.array([self.p, self.s, self.q], dtype=float)


def qubit_hamiltonian(n) -> np.ndarray:
    """H = n_x sigma_x + n_y sigma_y + n_z sigma_z (eigenvalues +-|n|)."""
    if isinstance(n, QubitDirection):
        n = n.n
    n = np.asarray(n, dtype=float).reshape(3)
    return np.einsum("i,ijk->jk", n, PAULI)


def qubit_ground_state(n) -> np.ndarray:
    """Closed-form lower-band eigenvector of n . sigma.

    For n with polar/azimuthal angles (theta, phi) this is
    (sin(theta/2), -exp(i phi) cos(theta/2)). Loop quantities are gauge
    invariant, so the particular phase choice here is only a convention.
    """
    d = n if isinstance(n, QubitDirection) else QubitDirection(np.asarray(n))
    if d.norm < RANK_TOL:
        raise ValueError("qubit band state undefined at n = 0 (degenerate levels)")
    half = 0.5 * d.theta
    return np.array(
        [math.sin(half), -np.exp(1j * d.phi) * math.cos(half)], dtype=complex
    )


def qubit_excited_state(n) -> np.ndarray:
    """Closed-form upper-band eigenvector: (cos(theta/2), e^{i phi} sin(theta/2))."""
    d = n if isinstance(n, QubitDirection) else QubitDirection(np.asarray(n))
    if d.norm < RANK_TOL:
        raise ValueError("qubit band state undefined at n = 0 (degenerate levels)")
    half = 0.5 * d.theta
    return np.array(
        [math.cos(half), np.exp(1j * d.phi) * math.sin(half)], dtype=complex
    )


def usb_hamiltonian(p) -> np.ndarray:
    """Four-level matrix: level 2 coupled to levels 1, 3, 4 by (P, S, Q)."""
    if isinstance(p, UsbParameters):
        p = p.as_array()
    pp, ss, qq = np.asarray(p, dtype=float).reshape(3)
    h = np.zeros((4, 4), dtype=complex)
    h[0, 1] = h[1, 0] = pp
    h[1, 2] = h[2, 1] = ss
    h[1, 3] = h[3, 1] = qq
    return h


def usb_dark_angles(p) -> tuple[float, float]:
    """(theta, phi) with tan theta = P/S and tan phi = Q/sqrt(P^2+S^2).

    Principal branch from atan2; callers integrating along paths must
    unwrap theta themselves. Raises when P = S = 0.
    """
    if isinstance(p, UsbParameters):
        p = p.as_array()
    pp, ss, qq = np.asarray(p, dtype=float).reshape(3)
    hyp = math.hypot(pp, ss)
    if hyp < DARK_SINGULAR_TOL:
        raise DarkFrameSingularError(
            f"dark frame angle undefined: P^2 + S^2 = {hyp**2:.3e} at (P,S,Q)="
            f"({pp}, {ss}, {qq})"
        )
    return math.atan2(pp, ss), math.atan2(qq, hyp)


def usb_dark_frame(p) -> tuple[np.ndarray, np.ndarray]:
    """The two zero-eigenvalue eigenvectors of the four-level Hamiltonian.

    Phi1 = (cos t, 0, -sin t, 0) and
    Phi2 = (sin f sin t, 0, sin f cos t, -cos f)
    with (t, f) = usb_dark_angles(p); both satisfy H Phi = 0 exactly and
    are orthonormal.
    """
    theta, phi = usb_dark_angles(p)
    ct, st = math.cos(theta), math.sin(theta)
    cf, sf = math.cos(phi), math.sin(phi)
    phi1 = np.array([ct, 0.0, -st, 0.0], dtype=complex)
    phi2 = np.array([sf * st, 0.0, sf * ct, -cf], dtype=complex)
    return phi1, phi2


# ---------------------------------------------------------------------------
# Parameter paths
# ---------------------------------------------------------------------------


@dataclass
class ParameterPath:
    """Map s in [0,1] -> parameter vector, with a closed-loop flag.

    evaluate is vectorized: an (k,) array of s values yields a (k, dim)
    array. Closed paths are built so that lambda(0) == lambda(1) bitwise
    (constructors reduce s modulo 1); the constructor still verifies the
    closure invariant.
    """

    evaluate: Callable[[np.ndarray], np.ndarray]
    parameter_dim: int
    closed: bool
    label: str = ""

    def __post_init__(self):
        if self.closed:
            ends = self.evaluate(np.array([0.0, 1.0]))
            gap = float(np.linalg.norm(ends[0] - ends[1]))
            if gap >= CLOSURE_TOL:
                raise ValueError(
                    f"path '{self.label}' flagged closed but "
                    f"|lambda(0)-lambda(1)| = {gap:.3e}"
                )

    def __call__(self, s) -> np.ndarray:
        s = np.atleast_1d(np.asarray(s, dtype=float))
        return self.evaluate(s)

    def sample_s(self, n: int, include_endpoint: bool = False) -> np.ndarray:
        """Sample grid: closed paths use k/n (endpoint implied by the wrap);
        open paths and endpoint-inclusive quadratures use k/(n-1) or k/n."""
        if include_endpoint or not self.closed:
            return np.linspace(0.0, 1.0, n + 1 if include_endpoint else n)
        return np.arange(n) / n

    def sample(self, n: int, include_endpoint: bool = False) -> np.ndarray:
        return self(self.sample_s(n, include_endpoint))


def constant_path(lam, label: str = "constant") -> ParameterPath:
    lam = np.asarray(lam, dtype=float).ravel()

    def evaluate(s: np.ndarray) -> np.ndarray:
        return np.tile(lam, (len(s), 1))

    return ParameterPath(evaluate, len(lam), closed=True, label=label)


def make_azimuthal_loop(theta0: float, radius: float = 1.0) -> ParameterPath:
    """Closed qubit loop at fixed polar angle theta0, azimuth 2 pi s.

    Counterclockwise as seen from +z; encloses solid angle
    2 pi (1 - cos theta0) around the +z axis.
    """
    if not 0.0 < theta0 < math.pi:
        raise ValueError(
            f"theta0 = {theta0} gives a zero-area loop; use constant_path for "
            "a fixed-direction path"
        )
    if radius <= 0.0:
        raise ValueError("radius must be positive")
    st, ct = math.sin(theta0), math.cos(theta0)

    def evaluate(s: np.ndarray) -> np.ndarray:
        a = 2.0 * math.pi * np.mod(s, 1.0)
        return radius * np.stack(
            [st * np.cos(a), st * np.sin(a), np.full_like(a, ct)], axis=1
        )

    return ParameterPath(evaluate, 3, closed=True, label=f"azimuthal(theta0={theta0:g})")


def reversed_path(path: ParameterPath) -> ParameterPath:
    """The same trace with orientation flipped: s -> lambda(1 - s)."""

    def evaluate(s: np.ndarray) -> np.ndarray:
        return path(1.0 - np.asarray(s, dtype=float))

    return ParameterPath(
        evaluate, path.parameter_dim, closed=path.closed, label=path.label + "[reversed]"
    )


USB_CIRCLE_DEFAULTS = {"s0": 1.0, "a": 0.5, "q0": 0.5, "b": 0.25}


def make_usb_loop(
    family: str = "circle",
    params: dict | None = None,
    validation_samples: int = 4096,
) -> ParameterPath:
    """Closed loop in (P, S, Q) space from a named pulse family.

    Families:
      circle   -- P = a sin(2 pi s), S = s0 + a cos(2 pi s),
                  Q = q0 + b sin(2 pi s); keeps P^2+S^2 >= (s0-a)^2 when
                  s0 > a > 0. This is the shipped default.
      constant -- fixed (p, s, q).

    The dark frame must stay defined (P^2 + S^2 > 0); the family is
    validated by dense sampling and rejected with the offending s.
    """
    params = dict(params or {})
    if family == "constant":
        p = params.get("p", 0.0)
        s = params.get("s", 1.0)
        q = params.get("q", 0.0)
        path = constant_path([p, s, q], label="usb-constant")
    elif family == "circle":
        cfg = dict(USB_CIRCLE_DEFAULTS)
        unknown = set(params) - set(cfg)
        if unknown:
            raise ValueError(f"unknown circle-family parameters: {sorted(unknown)}")
        cfg.update(params)
        s0, a, q0, b = cfg["s0"], cfg["a"], cfg["q0"], cfg["b"]

        def evaluate(s: np.ndarray) -> np.ndarray:
            w = 2.0 * math.pi * np.mod(s, 1.0)
            return np.stack(
                [a * np.sin(w), s0 + a * np.cos(w), q0 + b * np.sin(w)], axis=1
            )

        path = ParameterPath(
            evaluate,
            3,
            closed=True,
            label=f"usb-circle(s0={s0:g},a={a:g},q0={q0:g},b={b:g})",
        )
    else:
        raise ValueError(f"unknown pulse family '{family}' (expected circle|constant)")

    # odd point count so midpoints like s = 1/2 land on the grid exactly
    sgrid = np.linspace(0.0, 1.0, validation_samples + 1)
    lam = path(sgrid)
    hyp = np.hypot(lam[:, 0], lam[:, 1])
    floor = max(DARK_SINGULAR_TOL, 1e-3 * float(np.max(hyp)))
    k = int(np.argmin(hyp))
    if hyp[k] < floor:
        raise DarkFrameSingularError(
            f"loop '{path.label}' passes within {hyp[k]:.3e} of the dark-frame "
            f"singularity P=S=0 at s = {sgrid[k]:.6f}"
        )
    return path


# ---------------------------------------------------------------------------
# Hamiltonian models
# ---------------------------------------------------------------------------


class HamiltonianModel:
    """Provider of a Hermitian matrix H(lambda) for any parameter point.

    Subclasses implement evaluate_batch; energies_batch defaults to dense
    diagonalization but is overridden with closed forms where they are
    exact (this is what makes the dark-band dynamical phase identically
    zero rather than ~1e-16).
    """

    dim: int
    parameter_dim: int
    label: str

    def evaluate(self, lam) -> np.ndarray:
        lam = np.asarray(lam, dtype=float).reshape(1, self.parameter_dim)
        return self.evaluate_batch(lam)[0]

    def evaluate_batch(self, lams: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def energies(self, lam) -> np.ndarray:
        lam = np.asarray(lam, dtype=float).reshape(1, self.parameter_dim)
        return self.energies_batch(lam)[0]

    def energies_batch(self, lams: np.ndarray) -> np.ndarray:
        w, _ = eigh_batch(self.evaluate_batch(lams))
        return w


class QubitModel(HamiltonianModel):
    """Qubit with Cartesian parameters lambda = n in R^3."""

    dim = 2
    parameter_dim = 3
    label = "qubit"

    def evaluate_batch(self, lams: np.ndarray) -> np.ndarray:
        lams = np.asarray(lams, dtype=float).reshape(-1, 3)
        return np.einsum("ki,ijl->kjl", lams, PAULI)

    def energies_batch(self, lams: np.ndarray) -> np.ndarray:
        r = np.linalg.norm(np.asarray(lams, dtype=float).reshape(-1, 3), axis=1)
        return np.stack([-r, r], axis=1)


class SphereQubitModel(HamiltonianModel):
    """Qubit pinned to |n| = radius with lambda = (theta, phi)."""

    dim = 2
    parameter_dim = 2

    def __init__(self, radius: float = 1.0):
        if radius <= 0.0:
            raise ValueError("radius must be positive")
        self.radius = float(radius)
        self.label = f"qubit-sphere(r={radius:g})"

    def directions(self, lams: np.ndarray) -> np.ndarray:
        lams = np.asarray(lams, dtype=float).reshape(-1, 2)
        th, ph = lams[:, 0], lams[:, 1]
        return np.stack(
            [np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)], axis=1
        )

    def evaluate_batch(self, lams: np.ndarray) -> np.ndarray:
        return np.einsum(
            "ki,ijl->kjl", self.radius * self.directions(lams), PAULI
        )

    def energies_batch(self, lams: np.ndarray) -> np.ndarray:
        k = np.asarray(lams, dtype=float).reshape(-1, 2).shape[0]
        r = np.full(k, self.radius)
        return np.stack([-r, r], axis=1)


class UsbModel(HamiltonianModel):
    """Four-level star-coupled model, lambda = (P, S, Q).

    Spectrum is {-R, 0, 0, +R} with R = sqrt(P^2+S^2+Q^2); the middle
    zero pair is the dark space.
    """

    dim = 4
    parameter_dim = 3
    label = "usb"

    def evaluate_batch(self, lams: np.ndarray) -> np.ndarray:
        lams = np.asarray(lams, dtype=float).reshape(-1, 3)
        k = lams.shape[0]
        h = np.zeros((k, 4, 4), dtype=complex)
        h[:, 0, 1] = h[:, 1, 0] = lams[:, 0]
        h[:, 1, 2] = h[:, 2, 1] = lams[:, 1]
        h[:, 1, 3] = h[:, 3, 1] = lams[:, 2]
        return h

    def energies_batch(self, lams: np.ndarray) -> np.ndarray:
        lams = np.asarray(lams, dtype=float).reshape(-1, 3)
        r = np.linalg.norm(lams, axis=1)
        zero = np.zeros_like(r)
        return np.stack([-r, zero, zero, r], axis=1)

    def dark_frame_batch(self, lams: np.ndarray) -> np.ndarray:
        """Analytic dark frames, shape (k, 4, 2); principal angle branch."""
        lams = np.asarray(lams, dtype=float).reshape(-1, 3)
        pp, ss, qq = lams[:, 0], lams[:, 1], lams[:, 2]
        hyp = np.hypot(pp, ss)
        if np.any(hyp < DARK_SINGULAR_TOL):
            k = int(np.argmin(hyp))
            raise DarkFrameSingularError(
                f"dark frame undefined at sample {k}: P^2+S^2 = {hyp[k]**2:.3e}"
            )
        theta = np.arctan2(pp, ss)
        phi = np.arctan2(qq, hyp)
        ct, st = np.cos(theta), np.sin(theta)
        cf, sf = np.cos(phi), np.sin(phi)
        frames = np.zeros((len(pp), 4, 2), dtype=complex)
        frames[:, 0, 0] = ct
        frames[:, 2, 0] = -st
        frames[:, 0, 1] = sf * st
        frames[:, 2, 1] = sf * ct
        frames[:, 3, 1] = -cf
        return frames


def build_model_and_path(fragment: dict) -> tuple[HamiltonianModel, ParameterPath]:
    """Construct (model, path) from the CLI config fragment.

    Schema: {"model": "qubit"|"usb",
             "path": {"family": ..., "params": {...}}}
    """
    name = fragment.get("model")
    pathspec = fragment.get("path", {})
    family = pathspec.get("family")
    params = dict(pathspec.get("params", {}))
    if name == "qubit":
        model: HamiltonianModel = QubitModel()
        if family in (None, "azimuthal"):
            path = make_azimuthal_loop(
                theta0=float(params.get("theta0", math.pi / 3)),
                radius=float(params.get("radius", 1.0)),
            )
        elif family == "constant":
            path = constant_path(params.get("n", [0.0, 0.0, 1.0]), label="qubit-constant")
        else:
            raise ValueError(
                f"config.path.family: unknown qubit family '{family}' "
                "(expected azimuthal|constant)"
            )
    elif name == "usb":
        model = UsbModel()
        path = make_usb_loop(family or "circle", params)
    else:
        raise ValueError(f"config.model: unknown model '{name}' (expected qubit|usb)")
    return model, path
