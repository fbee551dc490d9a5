"""Gaussian-state engine in shot-noise units.

Quadratures are ordered ``(X+_1, X-_1, X+_2, X-_2, ...)`` with
``X+ = A^dag + A`` and ``X- = i(A^dag - A)``, so a vacuum mode has
``V(X+) = V(X-) = 1`` and a coherent amplitude ``alpha`` gives a mean of
``(2 Re alpha, 2 Im alpha)``.

All operations are pure: they return a new :class:`GaussianState`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

SYMMETRY_TOL = 1e-12
PHYSICAL_TOL = 1e-9


class StateError(ValueError):
    """Invalid state, mode label or transform argument."""


def omega(n: int) -> np.ndarray:
    """Standard symplectic form for ``n`` modes in interleaved ordering."""
    return np.kron(np.eye(n), np.array([[0.0, 1.0], [-1.0, 0.0]]))


def rotation(angle: float) -> np.ndarray:
    """2x2 phase-space rotation for ``A -> exp(i angle) A``."""
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s], [s, c]])


def complex_to_real(u: complex) -> np.ndarray:
    """Real 2x2 block acting on ``(X+, X-)`` for ``A -> u A``."""
    return np.array([[u.real, -u.imag], [u.imag, u.real]])


def is_symplectic(matrix: np.ndarray, tol: float = SYMMETRY_TOL) -> bool:
    n = matrix.shape[0] // 2
    w = omega(n)
    return bool(np.allclose(matrix @ w @ matrix.T, w, atol=tol, rtol=0.0))


@dataclass(frozen=True)
class SymplecticTransform:
    """Affine map ``x -> S x + d`` on the quadrature vector."""

    matrix: np.ndarray
    displacement: np.ndarray | None = None

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] % 2:
            raise StateError(f"symplectic matrix must be 2n x 2n, got {m.shape}")
        if not is_symplectic(m):
            raise StateError("matrix does not preserve the symplectic form")
        d = np.zeros(m.shape[0]) if self.displacement is None else np.asarray(self.displacement, float)
        if d.shape != (m.shape[0],):
            raise StateError("displacement length mismatch")
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "displacement", d)


@dataclass(frozen=True)
class GaussianState:
    """Mean quadrature vector and covariance over labelled modes."""

    modes: tuple[str, ...]
    mean: np.ndarray
    cov: np.ndarray = field(repr=False)

    def __post_init__(self):
        modes = tuple(self.modes)
        if not modes:
            raise StateError("a state needs at least one mode")
        if len(set(modes)) != len(modes):
            raise StateError(f"duplicate mode labels: {modes}")
        n2 = 2 * len(modes)
        mean = np.array(self.mean, dtype=float)
        cov = np.array(self.cov, dtype=float)
        if mean.shape != (n2,) or cov.shape != (n2, n2):
            raise StateError(f"shape mismatch for {len(modes)} modes: mean {mean.shape}, cov {cov.shape}")
        if not np.allclose(cov, cov.T, atol=SYMMETRY_TOL * max(1.0, np.abs(cov).max()), rtol=0.0):
            raise StateError("covariance matrix is not symmetric")
        cov = 0.5 * (cov + cov.T)
        mean.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "modes", modes)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def n_modes(self) -> int:
        return len(self.modes)

    def index(self, mode: str) -> int:
        try:
            return self.modes.index(mode)
        except ValueError:
            raise StateError(f"unknown mode {mode!r}; state has {self.modes}") from None

    def slots(self, mode: str) -> slice:
        k = self.index(mode)
        return slice(2 * k, 2 * k + 2)

    def block(self, mode: str) -> np.ndarray:
        s = self.slots(mode)
        return self.cov[s, s].copy()

    def amplitude(self, mode: str) -> complex:
        """Classical steady-state amplitude ``alpha`` of ``mode``."""
        x, y = self.mean[self.slots(mode)]
        return complex(x, y) / 2.0

    def power(self, mode: str) -> float:
        """Mean photon flux ``|alpha|^2`` (relative units)."""
        return abs(self.amplitude(mode)) ** 2

    def symplectic_eigenvalues(self) -> np.ndarray:
        ev = np.linalg.eigvals(1j * omega(self.n_modes) @ self.cov)
        return np.sort(np.abs(ev))[::2]

    def is_physical(self, tol: float = PHYSICAL_TOL) -> bool:
        return bool(self.symplectic_eigenvalues().min() >= 1.0 - tol)

    def transform(self, t: SymplecticTransform) -> "GaussianState":
        s = t.matrix
        if s.shape[0] != 2 * self.n_modes:
            raise StateError("transform dimension does not match state")
        return GaussianState(self.modes, s @ self.mean + t.displacement, s @ self.cov @ s.T)

    def relabel(self, mapping: Mapping[str, str]) -> "GaussianState":
        return GaussianState(tuple(mapping.get(m, m) for m in self.modes), self.mean, self.cov)

    def reduce(self, keep: Sequence[str]) -> "GaussianState":
        """Marginal state on ``keep`` (in the given order)."""
        idx = np.concatenate([np.arange(2 * self.index(m), 2 * self.index(m) + 2) for m in keep])
        return GaussianState(tuple(keep), self.mean[idx], self.cov[np.ix_(idx, idx)])

    def permute(self, order: Sequence[str]) -> "GaussianState":
        if sorted(order) != sorted(self.modes):
            raise StateError("permutation must contain every mode exactly once")
        return self.reduce(order)


def tensor(*states: GaussianState) -> GaussianState:
    """Direct sum of independent states."""
    modes: tuple[str, ...] = ()
    for st in states:
        modes += st.modes
    mean = np.concatenate([st.mean for st in states])
    n2 = mean.size
    cov = np.zeros((n2, n2))
    k = 0
    for st in states:
        m = st.cov.shape[0]
        cov[k:k + m, k:k + m] = st.cov
        k += m
    return GaussianState(modes, mean, cov)


def make_vacuum(n: int, labels: Iterable[str] | None = None) -> GaussianState:
    if n < 1:
        raise StateError("mode count must be >= 1")
    labels = tuple(labels) if labels is not None else tuple(f"m{k}" for k in range(n))
    if len(labels) != n:
        raise StateError(f"expected {n} labels, got {len(labels)}")
    return GaussianState(labels, np.zeros(2 * n), np.eye(2 * n))


def make_coherent(alpha: complex, label: str = "m0") -> GaussianState:
    return GaussianState((label,), np.array([2 * alpha.real, 2 * alpha.imag]), np.eye(2))


def make_squeezed(v_plus: float, v_minus: float, angle: float = 0.0,
                  carrier: complex = 0.0, label: str = "m0") -> GaussianState:
    """Single-mode squeezed (possibly impure) state.

    ``v_plus`` and ``v_minus`` are the principal-axis variances; the axes
    are rotated by ``angle`` and the mean is set from ``carrier``. Impure
    states (``v_plus * v_minus > 1``) are allowed.
    """
    if v_plus <= 0 or v_minus <= 0:
        raise StateError("variances must be positive")
    if v_plus * v_minus < 1.0 - PHYSICAL_TOL:
        raise StateError(f"unphysical: v_plus * v_minus = {v_plus * v_minus:.6g} < 1")
    r = rotation(angle)
    cov = r @ np.diag([v_plus, v_minus]) @ r.T
    carrier = complex(carrier)
    return GaussianState((label,), np.array([2 * carrier.real, 2 * carrier.imag]), cov)


def _embed(state: GaussianState, blocks: dict[tuple[int, int], np.ndarray]) -> np.ndarray:
    s = np.eye(2 * state.n_modes)
    for (i, j), b in blocks.items():
        s[2 * i:2 * i + 2, 2 * j:2 * j + 2] = b
    return s


def beamsplitter_matrix(reflectivity: float, rel_phase: float = 0.0) -> np.ndarray:
    """4x4 symplectic block for the two-port splitter.

    ``a_out = t a_i + i r e^{i theta} a_j`` and
    ``b_out = i r a_i + t e^{i theta} a_j`` with ``t = sqrt(1-R)``,
    ``r = sqrt(R)``.
    """
    if not 0.0 <= reflectivity <= 1.0:
        raise StateError(f"reflectivity must lie in [0, 1], got {reflectivity}")
    t, r = np.sqrt(1.0 - reflectivity), np.sqrt(reflectivity)
    e = np.exp(1j * rel_phase)
    u = np.array([[t, 1j * r * e], [1j * r, t * e]])
    out = np.zeros((4, 4))
    for p in range(2):
        for q in range(2):
            out[2 * p:2 * p + 2, 2 * q:2 * q + 2] = complex_to_real(u[p, q])
    return out


def apply_beamsplitter(state: GaussianState, mode_i: str, mode_j: str,
                       reflectivity: float, rel_phase: float = 0.0) -> GaussianState:
    if mode_i == mode_j:
        raise StateError("beamsplitter needs two distinct modes")
    i, j = state.index(mode_i), state.index(mode_j)
    b = beamsplitter_matrix(reflectivity, rel_phase)
    s = _embed(state, {(i, i): b[:2, :2], (i, j): b[:2, 2:], (j, i): b[2:, :2], (j, j): b[2:, 2:]})
    return state.transform(SymplecticTransform(s))


def apply_phase_shift(state: GaussianState, mode: str, phi: float) -> GaussianState:
    k = state.index(mode)
    return state.transform(SymplecticTransform(_embed(state, {(k, k): rotation(phi)})))


def carrier_angle(state: GaussianState, mode: str) -> float:
    alpha = state.amplitude(mode)
    if abs(alpha) < 1e-300:
        raise StateError(f"mode {mode!r} has zero mean field; carrier frame undefined")
    return float(np.angle(alpha))


def carrier_frame(state: GaussianState, mode: str) -> tuple[float, np.ndarray, np.ndarray]:
    """Return ``(angle, mean, cov)`` of ``mode`` rotated so X+ lies along its mean field."""
    theta = carrier_angle(state, mode)
    r = rotation(-theta)
    s = state.slots(mode)
    return theta, r @ state.mean[s], r @ state.cov[s, s] @ r.T


def kerr_shear_matrix(phi_nl: float) -> np.ndarray:
    return np.array([[1.0, 0.0], [2.0 * phi_nl, 1.0]])


def apply_kerr_shear(state: GaussianState, mode: str, phi_nl: float) -> GaussianState:
    """Linearised Kerr map.

    In the carrier frame ``dX- -> dX- + 2 phi_nl dX+`` while the mean field
    picks up the phase ``phi_nl``. A mode with zero mean has no carrier;
    its shear is taken along the global X+ axis.
    """
    k = state.index(mode)
    try:
        theta = carrier_angle(state, mode)
    except StateError:
        theta = 0.0
    local = rotation(phi_nl) @ rotation(theta) @ kerr_shear_matrix(phi_nl) @ rotation(-theta)
    s = SymplecticTransform(_embed(state, {(k, k): local}))
    mean = _embed(state, {(k, k): rotation(phi_nl)}) @ state.mean
    return GaussianState(state.modes, mean, s.matrix @ state.cov @ s.matrix.T)


def apply_loss(state: GaussianState, mode: str, eta: float) -> GaussianState:
    """Pure-loss channel of transmission ``eta`` (vacuum admixture)."""
    if not 0.0 <= eta <= 1.0:
        raise StateError(f"transmission must lie in [0, 1], got {eta}")
    k = state.index(mode)
    g = np.ones(2 * state.n_modes)
    g[2 * k:2 * k + 2] = np.sqrt(eta)
    noise = np.zeros_like(g)
    noise[2 * k:2 * k + 2] = 1.0 - eta
    cov = g[:, None] * state.cov * g[None, :] + np.diag(noise)
    return GaussianState(state.modes, g * state.mean, cov)


def add_phase_noise(state: GaussianState, mode: str, variance: float) -> GaussianState:
    """Add classical noise of ``variance`` to the carrier-frame X- of ``mode``."""
    if variance < 0:
        raise StateError("added noise variance must be non-negative")
    if variance == 0:
        return state
    theta = carrier_angle(state, mode)
    d = np.array([-np.sin(theta), np.cos(theta)])
    s = state.slots(mode)
    cov = state.cov.copy()
    cov[s, s] += variance * np.outer(d, d)
    return GaussianState(state.modes, state.mean, cov)


def carrier_coefficients(state: GaussianState, weights: Mapping[tuple[str, str], float]) -> np.ndarray:
    """Coefficient vector for a combination of carrier-frame quadratures.

    ``weights`` maps ``(mode, "+" | "-")`` to a real weight.
    """
    c = np.zeros(2 * state.n_modes)
    for (mode, quad), w in weights.items():
        if quad not in ("+", "-"):
            raise StateError(f"quadrature must be '+' or '-', got {quad!r}")
        theta = carrier_angle(state, mode)
        if quad == "+":
            d = np.array([np.cos(theta), np.sin(theta)])
        else:
            d = np.array([-np.sin(theta), np.cos(theta)])
        c[state.slots(mode)] += w * d
    return c


def quadrature_variance(state: GaussianState, coeffs: Sequence[float]) -> float:
    c = np.asarray(coeffs, dtype=float)
    if c.shape != (2 * state.n_modes,):
        raise StateError(f"need {2 * state.n_modes} coefficients, got {c.shape}")
    return float(c @ state.cov @ c)


def quadrature_covariance(state: GaussianState, c1: Sequence[float], c2: Sequence[float]) -> float:
    return float(np.asarray(c1, float) @ state.cov @ np.asarray(c2, float))


def sample_fluctuations(state: GaussianState, n_samples: int, seed: int) -> np.ndarray:
    """Zero-mean normal draws with the state's covariance, shape ``(n_samples, 2n)``."""
    if n_samples < 1:
        raise StateError("n_samples must be >= 1")
    w, v = np.linalg.eigh(state.cov)
    if w.min() < -1e-12 * max(1.0, w.max()):
        raise StateError("covariance is not positive semidefinite")
    root = v * np.sqrt(np.clip(w, 0.0, None))
    z = np.random.default_rng(seed).standard_normal((n_samples, w.size))
    return z @ root.T


def db_to_variance(db: float) -> float:
    """Squeezing in dB below shot noise to a linear variance."""
    return 10.0 ** (-db / 10.0)


def variance_to_db(v: float) -> float:
    return -10.0 * np.log10(v)
