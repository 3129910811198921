r"""Periodic-box spectral core: grids, transforms, multipliers, advection.

Fields live on the uniform n^3 grid of the torus [0, L)^3 and are stored as
full complex Fourier coefficient cubes with average normalization:

    coeff[k] = (1/n^3) * sum_x f(x) exp(-i 2*pi*k.x / L),

so a real field has a conjugate-symmetric cube and Parseval reads

    mean(|f|^2) = sum_k |coeff[k]|^2.

All L2 norms and inner products below use that box-average convention, which
makes every norm a plain coefficient sum.

Differentiation multiplies by i*xi with xi = (2*pi/L)*k and the Nyquist row
zeroed (the odd-derivative ambiguity of the +/- n/2 mode). The same
Nyquist-zeroed table feeds every operator symbol here, so compositions like
inverse_laplacian(laplacian(f)) are exact identities on dealiased data.

Quadratic terms are formed pseudo-spectrally and cut with the 2/3 rule
(coefficients with any |k_j| > n/3 are zeroed), which keeps the retained band
alias-free for products of two such fields.

The dynamical convention throughout the package is mean-zero: the k=0
coefficient of every evolved field is pinned to zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft as _fft

__all__ = [
    "Grid",
    "Params",
    "to_spectral",
    "from_spectral",
    "enforce_mean_zero",
    "derivative",
    "inverse_anisotropic_laplacian",
    "dealias",
    "leray_project",
    "advect",
    "advect_scalar",
    "l2_norm",
    "l2_inner",
    "max_divergence",
    "random_scalar",
    "random_state",
]

_AXES = (-3, -2, -1)


class Grid:
    """Cubic periodic grid with cached wavevector tables.

    n must be a power of two, at least 8. ``kd1/kd2/kd3`` are the scaled,
    Nyquist-zeroed wavevectors used by every operator symbol; ``kmag2`` keeps
    the true +/- n/2 magnitudes and is reserved for norm weights.
    """

    def __init__(self, n, box_length=2.0 * np.pi):
        n = int(n)
        if n < 8 or (n & (n - 1)) != 0:
            raise ValueError(f"grid size must be a power of two >= 8, got {n}")
        if box_length <= 0:
            raise ValueError(f"box length must be positive, got {box_length}")
        self.n = n
        self.box_length = float(box_length)

        k_int = np.fft.fftfreq(n, d=1.0 / n)  # 0, 1, ..., n/2-1, -n/2, ..., -1
        self.k_int = k_int.astype(np.int64)
        scale = 2.0 * np.pi / self.box_length

        kd_int = k_int.copy()
        kd_int[n // 2] = 0.0  # Nyquist mode carries no derivative
        self.kd1 = (scale * kd_int).reshape(n, 1, 1)
        self.kd2 = (scale * kd_int).reshape(1, n, 1)
        self.kd3 = (scale * kd_int).reshape(1, 1, n)
        self.kd_mag2 = self.kd1**2 + self.kd2**2 + self.kd3**2

        k1 = (scale * k_int).reshape(n, 1, 1)
        k2 = (scale * k_int).reshape(1, n, 1)
        k3 = (scale * k_int).reshape(1, 1, n)
        self.kmag2 = k1**2 + k2**2 + k3**2

        cut = n / 3.0
        keep = np.abs(k_int) <= cut
        self.dealias_mask = (
            keep.reshape(n, 1, 1) & keep.reshape(1, n, 1) & keep.reshape(1, 1, n)
        )

        self.kd_stack = np.stack(
            [
                np.broadcast_to(self.kd1, (n, n, n)),
                np.broadcast_to(self.kd2, (n, n, n)),
                np.broadcast_to(self.kd3, (n, n, n)),
            ]
        )
        # half-spectrum views for the real-transform fast paths
        self.nh = n // 2 + 1
        self.ikd_half = np.ascontiguousarray(1j * self.kd_stack[..., : self.nh])
        self.dealias_mask_half = np.ascontiguousarray(
            self.dealias_mask[..., : self.nh]
        )
        self._norm_weights = {}

    @property
    def cache_key(self):
        return (self.n, self.box_length)

    def mesh(self):
        """Physical coordinate arrays x1, x2, x3, each of shape (n, n, n)."""
        x = np.arange(self.n) * (self.box_length / self.n)
        return np.meshgrid(x, x, x, indexing="ij")

    def norm_weights(self, s):
        """|xi|^(2s) with the k=0 entry zeroed, cached per s."""
        s = float(s)
        w = self._norm_weights.get(s)
        if w is None:
            with np.errstate(divide="ignore"):
                w = self.kmag2 ** s
            w[0, 0, 0] = 0.0
            w.setflags(write=False)
            self._norm_weights[s] = w
        return w

    def check_shape(self, f, ncomp=None):
        n = self.n
        if ncomp is None:
            if f.shape[-3:] != (n, n, n):
                raise ValueError(f"field shape {f.shape} does not match grid n={n}")
        elif f.shape != (ncomp, n, n, n):
            raise ValueError(
                f"expected shape {(ncomp, n, n, n)}, got {f.shape}"
            )

    def __repr__(self):
        return f"Grid(n={self.n}, box_length={self.box_length:g})"


@dataclass(frozen=True)
class Params:
    """Physical constants: Rossby number, viscosities, Froude number."""

    epsilon: float
    nu: float
    nu_prime: float
    froude: float = 1.0

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if self.nu <= 0 or self.nu_prime <= 0:
            raise ValueError("viscosities must be positive")
        if not 0.0 < self.froude <= 1.0:
            raise ValueError(f"froude must lie in (0, 1], got {self.froude}")

    @property
    def nu_min(self):
        return min(self.nu, self.nu_prime)

    @property
    def nu_max(self):
        return max(self.nu, self.nu_prime)


def _hermitian_complete(grid, half):
    """Full spectral cube from the half-spectrum of a real field."""
    n = grid.n
    full = np.empty(half.shape[:-1] + (n,), dtype=np.complex128)
    full[..., : n // 2 + 1] = half
    inv = (-np.arange(n)) % n
    full[..., n // 2 + 1 :] = np.conj(
        half[..., inv[:, None], inv[None, :], n // 2 - 1 : 0 : -1]
    )
    return full


def to_spectral(grid, samples):
    """Forward transform of real samples, average-normalized.

    Uses the real-input transform and reconstructs the redundant half of the
    cube by conjugate symmetry.
    """
    samples = np.asarray(samples, dtype=np.float64)
    grid.check_shape(samples)
    half = _fft.rfftn(samples, axes=_AXES) / grid.n**3
    return _hermitian_complete(grid, half)


def from_spectral(grid, coeffs):
    """Inverse transform back to real samples.

    Fields are conjugate-symmetric by invariant, so only the stored half
    spectrum is consumed.
    """
    coeffs = np.asarray(coeffs)
    grid.check_shape(coeffs)
    n = grid.n
    return (
        _fft.irfftn(coeffs[..., : n // 2 + 1], s=(n, n, n), axes=_AXES) * n**3
    )


def enforce_mean_zero(f):
    """Pin the k=0 coefficient(s) to zero, in place; returns f."""
    f[..., 0, 0, 0] = 0.0
    return f


def derivative(grid, f, axis):
    """Spectral partial derivative along axis 1, 2 or 3."""
    if axis not in (1, 2, 3):
        raise ValueError(f"axis must be 1, 2 or 3, got {axis}")
    kd = (grid.kd1, grid.kd2, grid.kd3)[axis - 1]
    return 1j * kd * f


def inverse_anisotropic_laplacian(grid, f, froude=1.0):
    """Invert d11 + d22 + F^2 d33; the k=0 mode (and any mode the
    Nyquist-zeroed symbol cannot see) maps to zero."""
    sym = grid.kd1**2 + grid.kd2**2 + froude**2 * grid.kd3**2
    out = np.divide(-f, sym, out=np.zeros_like(f), where=sym > 0)
    return out


def dealias(grid, f):
    """2/3-rule cut: zero every coefficient with any |k_j| > n/3."""
    return f * grid.dealias_mask


def leray_project(grid, v):
    """Remove the gradient part of the velocity, per mode.

    Accepts a 3-component velocity or a 4-component state (the last,
    buoyancy component passes through untouched). Output satisfies
    xi . v_hat = 0 on every mode.
    """
    v = np.asarray(v)
    if v.shape[0] not in (3, 4):
        raise ValueError(f"expected 3 or 4 components, got shape {v.shape}")
    grid.check_shape(v)
    kd = (grid.kd1, grid.kd2, grid.kd3)
    div = kd[0] * v[0] + kd[1] * v[1] + kd[2] * v[2]
    factor = np.divide(
        div, grid.kd_mag2, out=np.zeros_like(div), where=grid.kd_mag2 > 0
    )
    out = v.copy()
    for i in range(3):
        out[i] -= kd[i] * factor
    return out


def phys_batch(grid, half_stack):
    """Physical samples of a batch of half-spectrum fields."""
    return (
        _fft.irfftn(half_stack, s=(grid.n,) * 3, axes=_AXES) * grid.n**3
    )


def spectral_product(grid, prod):
    """Dealiased mean-zero full spectrum of a physical-space product."""
    half = _fft.rfftn(prod, axes=_AXES) / grid.n**3
    half *= grid.dealias_mask_half
    half[..., 0, 0, 0] = 0.0
    return _hermitian_complete(grid, half)


def advect(grid, v, U):
    """Pseudo-spectral v . grad U for a 4-component state.

    Transforms to physical space, multiplies, transforms back and applies the
    2/3 cut; the (analytically zero-mean, for divergence-free v) k=0 output
    coefficient is pinned to zero.
    """
    v = np.asarray(v)
    U = np.asarray(U)
    grid.check_shape(v, 3)
    grid.check_shape(U, 4)
    n, nh = grid.n, grid.nh
    stack = np.empty((15, n, n, nh), dtype=np.complex128)
    stack[:3] = v[..., :nh]
    stack[3:] = (grid.ikd_half[:, None] * U[None, ..., :nh]).reshape(12, n, n, nh)
    p = phys_batch(grid, stack)
    prod = np.einsum("jxyz,jixyz->ixyz", p[:3], p[3:].reshape(3, 4, n, n, n))
    return spectral_product(grid, prod)


def advect_scalar(grid, v, f):
    """Pseudo-spectral v . grad f for a scalar field."""
    v = np.asarray(v)
    grid.check_shape(v, 3)
    grid.check_shape(f)
    n, nh = grid.n, grid.nh
    stack = np.empty((6, n, n, nh), dtype=np.complex128)
    stack[:3] = v[..., :nh]
    stack[3:] = grid.ikd_half * f[None, ..., :nh]
    p = phys_batch(grid, stack)
    prod = np.einsum("jxyz,jxyz->xyz", p[:3], p[3:])
    return spectral_product(grid, prod)


def l2_norm(f):
    """Box-average L2 norm: sqrt(sum |coeff|^2), all components pooled."""
    return float(np.sqrt(np.sum(np.abs(f) ** 2)))


def l2_inner(f, g):
    """Box-average L2 inner product (real part)."""
    return float(np.sum(f * np.conj(g)).real)


def max_divergence(grid, v):
    """max_k |xi . v_hat| / (|xi| max|v_hat|), the relative divergence."""
    kd = (grid.kd1, grid.kd2, grid.kd3)
    div = np.abs(kd[0] * v[0] + kd[1] * v[1] + kd[2] * v[2])
    kmag = np.sqrt(grid.kd_mag2)
    rel = np.divide(div, kmag, out=np.zeros_like(div), where=kmag > 0)
    vmax = np.abs(v[:3]).max()
    if vmax == 0.0:
        return 0.0
    return float(rel.max() / vmax)


def random_scalar(grid, rng, peak_k=2.0, width=1.0):
    """Random smooth mean-zero scalar: white noise shaped by a Gaussian
    ring spectrum around |k| = peak_k, dealiased."""
    noise = rng.standard_normal((grid.n,) * 3)
    f = to_spectral(grid, noise)
    kmag = np.sqrt(grid.kmag2) * (grid.box_length / (2.0 * np.pi))
    f *= np.exp(-0.5 * ((kmag - peak_k) / width) ** 2)
    return enforce_mean_zero(dealias(grid, f))


def random_state(grid, rng, peak_k=2.0, divergence_free=True):
    """Random smooth mean-zero 4-component state, optionally solenoidal."""
    U = np.stack([random_scalar(grid, rng, peak_k=peak_k) for _ in range(4)])
    if divergence_free:
        U = leray_project(grid, U)
    return U
