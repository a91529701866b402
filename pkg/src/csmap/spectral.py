"""Periodic pseudospectral engine on the square torus [0, L)^2.

Fourier derivatives, heat/free-Schrodinger propagators, smooth dyadic
band projections, shear-based rotation resampling, and the Galilean
boost used by the lateral norms. All operators act on N x N grids
(optionally with trailing component axes) and are exact on band-limited
fields.
"""

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import BandOutOfRange, IncompatibleBoost, NegativeTime


@dataclass(frozen=True)
class GridSpec:
    """Uniform N x N periodic grid on [0, L)^2.

    Wavenumbers are 2*pi*m/L for m in [-N/2, N/2). dealias_fraction is
    the usual 2/3-rule cutoff applied after nonlinear products.
    """

    N: int
    L: float
    dealias_fraction: float = 2.0 / 3.0

    def __post_init__(self):
        if self.N < 16 or (self.N & (self.N - 1)) != 0:
            raise ValueError("N must be a power of two, N >= 16")
        if not (0.0 < self.dealias_fraction <= 1.0):
            raise ValueError("dealias_fraction must lie in (0, 1]")

    @property
    def h(self):
        return self.L / self.N

    @property
    def cell_area(self):
        return (self.L / self.N) ** 2

    @property
    def k_nyquist(self):
        return math.pi * self.N / self.L

    @property
    def xi_dealias(self):
        return self.dealias_fraction * self.k_nyquist

    def coords(self):
        """Physical coordinates (X1, X2), each shaped (N, N); axis 0 is x1."""
        x = np.arange(self.N) * self.h
        return np.meshgrid(x, x, indexing="ij")

    def wavenumbers(self):
        return _wavenumbers(self.N, self.L)

    def dealias_mask(self):
        return _dealias_mask(self.N, self.L, self.dealias_fraction)


@lru_cache(maxsize=32)
def _wavenumbers(N, L):
    k = 2.0 * math.pi * np.fft.fftfreq(N, d=L / N)
    K1, K2 = np.meshgrid(k, k, indexing="ij")
    K1.setflags(write=False)
    K2.setflags(write=False)
    return K1, K2

@lru_cache(maxsize=32)
def _dealias_mask(N, L, frac):
    K1, K2 = _wavenumbers(N, L)
    cut = frac * math.pi * N / L
    mask = (np.abs(K1) <= cut) & (np.abs(K2) <= cut)
    mask.setflags(write=False)
    return mask

@lru_cache(maxsize=32)
def _ksq(N, L):
    K1, K2 = _wavenumbers(N, L)
    ksq = K1 ** 2 + K2 ** 2
    ksq.setflags(write=False)
    return ksq


def _fft2(f):
    return np.fft.fft2(f, axes=(0, 1))

def _ifft2(F, real_output):
    out = np.fft.ifft2(F, axes=(0, 1))
    return out.real if real_output else out

def _is_real(f):
    return not np.iscomplexobj(f)

def _expand(spec, extra_ndim):
    # broadcast an (N, N) multiplier over trailing component axes
    return spec.reshape(spec.shape + (1,) * extra_ndim)


def gradient(f, grid):
    """Spectral (d/dx1 f, d/dx2 f); exact on band-limited fields."""
    K1, K2 = grid.wavenumbers()
    F = _fft2(f)
    e = f.ndim - 2
    real = _is_real(f)
    f1 = _ifft2(1j * _expand(K1, e) * F, real)
    f2 = _ifft2(1j * _expand(K2, e) * F, real)
    return f1, f2


def laplacian(f, grid):
    """Spectral Laplacian, symbol -|xi|^2."""
    F = _fft2(f)
    return _ifft2(-_expand(_ksq(grid.N, grid.L), f.ndim - 2) * F, _is_real(f))


def dealias(f, grid):
    """Zero all modes outside the dealias box (2/3 rule by default)."""
    F = _fft2(f)
    F *= _expand(grid.dealias_mask(), f.ndim - 2)
    return _ifft2(F, _is_real(f))


def solve_helmholtz(rhs, grid, ds):
    """Solve (I - ds*Lap) u = rhs spectrally."""
    F = _fft2(rhs)
    F /= _expand(1.0 + ds * _ksq(grid.N, grid.L), rhs.ndim - 2)
    return _ifft2(F, _is_real(rhs))


def heat_propagator(f, grid, s):
    """exp(s*Lap): multiplier exp(-s|xi|^2); semigroup in s."""
    if s < 0:
        raise NegativeTime(f"heat propagator needs s >= 0, got {s}")
    F = _fft2(f)
    F *= _expand(np.exp(-s * _ksq(grid.N, grid.L)), f.ndim - 2)
    return _ifft2(F, _is_real(f))


def schrodinger_propagator(f, grid, t):
    """exp(i*t*Lap): multiplier exp(-i*t*|xi|^2); unitary on L^2."""
    F = _fft2(f)
    F *= _expand(np.exp(-1j * t * _ksq(grid.N, grid.L)), f.ndim - 2)
    return _ifft2(F, False)


def shift_field(f, grid, a):
    """Translate f(x) -> f(x + a) via Fourier phases; exact for any real a."""
    K1, K2 = grid.wavenumbers()
    F = _fft2(f)
    phase = np.exp(1j * (K1 * a[0] + K2 * a[1]))
    F *= _expand(phase, f.ndim - 2)
    return _ifft2(F, _is_real(f))


def l2_norm(f, grid):
    """Cell-sum L^2 norm over the torus (all component axes included)."""
    return math.sqrt(float(np.sum(np.abs(f) ** 2)) * grid.cell_area)


def parseval_spectral_l2(f, grid):
    F = _fft2(f)
    return math.sqrt(float(np.sum(np.abs(F) ** 2)) / f.shape[0] ** 2 / f.shape[1] ** 2
                     * grid.L ** 2)


# ---------------------------------------------------------------------------
# Littlewood-Paley bands
# ---------------------------------------------------------------------------

def _smoothstep(r):
    """C^1 cubic ramp: 0 for r<=0, 1 for r>=1, 3r^2-2r^3 between."""
    r = np.clip(r, 0.0, 1.0)
    return r * r * (3.0 - 2.0 * r)


@dataclass(frozen=True)
class LPBandSet:
    """Dyadic band projections P_k for 2^{k_min} <= |xi| <= 2^{k_max}.

    Each symbol is S(log2|xi| - k + 1) - S(log2|xi| - k) with S a cubic
    smoothstep, supported in |xi| in (2^{k-1}, 2^{k+1}); the symbols sum
    to one exactly on [2^{k_min}, 2^{k_max}] and the zero mode is kept in
    a separate mean channel.
    """

    grid: GridSpec
    k_min: int
    k_max: int

    @staticmethod
    def for_grid(grid):
        k_min = math.ceil(math.log2(2.0 * math.pi / grid.L))
        k_max = math.floor(math.log2(grid.xi_dealias))
        if k_max < k_min:
            raise ValueError("grid too small to carry any dyadic band")
        return LPBandSet(grid, k_min, k_max)

    @property
    def ks(self):
        return list(range(self.k_min, self.k_max + 1))

    def symbol(self, k):
        if not (self.k_min <= k <= self.k_max):
            raise BandOutOfRange(
                f"band {k} outside [{self.k_min}, {self.k_max}]")
        return _band_symbol(self.grid.N, self.grid.L, k)

    def project(self, f, k):
        F = _fft2(f)
        F *= _expand(self.symbol(k), f.ndim - 2)
        return _ifft2(F, _is_real(f))

    def mean(self, f):
        """The zero-mode channel, as a constant (over the grid axes)."""
        return np.mean(f, axis=(0, 1))

    def band_limit(self, f):
        """Sharp spectral restriction to the mean mode plus the annulus
        2^{k_min} <= |xi| <= 2^{k_max}, where the band symbols sum to one
        (so the projections reconstruct the result exactly)."""
        K1, K2 = self.grid.wavenumbers()
        mag = np.hypot(K1, K2)
        keep = ((mag >= 2.0 ** self.k_min) & (mag <= 2.0 ** self.k_max)) \
            | (mag == 0)
        F = _fft2(f) * _expand(keep.astype(float), f.ndim - 2)
        return _ifft2(F, _is_real(f))


@lru_cache(maxsize=256)
def _band_symbol(N, L, k):
    K1, K2 = _wavenumbers(N, L)
    mag = np.hypot(K1, K2)
    with np.errstate(divide="ignore"):
        lg = np.where(mag > 0, np.log2(np.maximum(mag, 1e-300)), -np.inf)
    sym = _smoothstep(lg - (k - 1)) - _smoothstep(lg - k)
    sym[mag == 0] = 0.0
    sym.setflags(write=False)
    return sym


@lru_cache(maxsize=256)
def _band_symbol_1d(N, L, k):
    kvec = 2.0 * math.pi * np.fft.fftfreq(N, d=L / N)
    mag = np.abs(kvec)
    with np.errstate(divide="ignore"):
        lg = np.where(mag > 0, np.log2(np.maximum(mag, 1e-300)), -np.inf)
    sym = _smoothstep(lg - (k - 1)) - _smoothstep(lg - k)
    sym[mag == 0] = 0.0
    sym.setflags(write=False)
    return sym


def lp_project_axis0(f, grid, k):
    """1-D dyadic band filter in the xi_1 variable (axis 0) only."""
    F = np.fft.fft(f, axis=0)
    sym = _band_symbol_1d(grid.N, grid.L, k)
    F *= sym.reshape((grid.N,) + (1,) * (f.ndim - 1))
    out = np.fft.ifft(F, axis=0)
    return out.real if _is_real(f) else out


# ---------------------------------------------------------------------------
# Rotation by shears (for the lateral norms)
# ---------------------------------------------------------------------------

def _quarter_turns(f, n):
    """Exact g(x) = f(c + R_{n*pi/2}(x-c)) about the grid center, by indexing.

    One turn is g[i, j] = f[(N-j) % N, i]; the roll accounts for index 0
    being its own mirror image on the periodic lattice.
    """
    n = n % 4
    out = f
    for _ in range(n):
        out = np.roll(np.flip(np.swapaxes(out, 0, 1), axis=1), 1, axis=1)
    return out


def _shear_axis(f, grid, coeff, shear_axis):
    """f(x) -> f(x + coeff*(x_other - L/2) e_axis) via row/column Fourier phases."""
    N = grid.N
    k = 2.0 * math.pi * np.fft.fftfreq(N, d=grid.L / N)
    x = np.arange(N) * grid.h - grid.L / 2.0
    if shear_axis == 0:
        F = np.fft.fft(f, axis=0)
        phase = np.exp(1j * coeff * np.outer(k, x))
    else:
        F = np.fft.fft(f, axis=1)
        phase = np.exp(1j * coeff * np.outer(x, k))
    F *= phase.reshape(phase.shape + (1,) * (f.ndim - 2))
    out = np.fft.ifft(F, axis=shear_axis)
    return out.real if _is_real(f) else out


def _pad_spectrum(f, grid):
    big = GridSpec(2 * grid.N, grid.L, grid.dealias_fraction)
    F = np.fft.fftshift(_fft2(f), axes=(0, 1))
    shape = (2 * grid.N, 2 * grid.N) + f.shape[2:]
    G = np.zeros(shape, dtype=complex)
    lo = grid.N // 2
    G[lo:lo + grid.N, lo:lo + grid.N] = F
    G = np.fft.ifftshift(G, axes=(0, 1)) * 4.0
    return _ifft2(G, _is_real(f)), big


def _crop_spectrum(f, grid):
    small_N = grid.N // 2
    F = np.fft.fftshift(_fft2(f), axes=(0, 1))
    lo = grid.N // 4
    G = np.fft.ifftshift(F[lo:lo + small_N, lo:lo + small_N], axes=(0, 1)) / 4.0
    return _ifft2(G, _is_real(f)), GridSpec(small_N, grid.L, grid.dealias_fraction)


def rotate_resample(f, grid, theta):
    """Fourier-interpolated g(x) = f(c + R_theta (x - c)), c the grid center.

    The theta direction of f is aligned with axis 0 of g. Exact for
    multiples of pi/2 (pure indexing); otherwise a three-shear rotation
    on a 2x padded spectrum. The shears wrap, so for generic angles the
    result is the true rotation only up to the field magnitude near the
    domain boundary; the intended inputs are band-limited fields centered
    well inside the torus, for which round trips recover the input to
    ~1e-12.
    """
    two_pi = 2.0 * math.pi
    theta = float(theta) % two_pi
    quarter = round(theta / (math.pi / 2.0))
    rem = theta - quarter * math.pi / 2.0
    out = _quarter_turns(f, quarter)
    if abs(rem) < 1e-14:
        return out
    a = -math.tan(rem / 2.0)
    b = math.sin(rem)
    out, big = _pad_spectrum(out, grid)
    out = _shear_axis(out, big, a, 0)
    out = _shear_axis(out, big, b, 1)
    out = _shear_axis(out, big, a, 0)
    out, _ = _crop_spectrum(out, big)
    return out


# ---------------------------------------------------------------------------
# Trajectories of scalar fields and the Galilean boost
# ---------------------------------------------------------------------------

@dataclass
class SpaceTimeField:
    """Complex scalar field sampled on a time grid: values[i] is the slice
    at t[i], shaped (N, N) (axis 0 is x1)."""

    grid: GridSpec
    t: np.ndarray
    values: np.ndarray  # (nt, N, N) complex

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.values = np.asarray(self.values)
        if self.values.ndim != 3 or self.values.shape[0] != self.t.shape[0]:
            raise ValueError("values must be (nt, N, N) matching t")

    def map_slices(self, fn):
        out = np.stack([fn(self.values[i], self.t[i])
                        for i in range(len(self.t))])
        return SpaceTimeField(self.grid, self.t.copy(), out)


def boost_lattice_unit(grid):
    """Smallest nonzero boost component keeping exp(-i x.w/2) periodic."""
    return 4.0 * math.pi / grid.L


def is_compatible_boost(w, grid, tol=1e-9):
    unit = boost_lattice_unit(grid)
    return all(abs(c / unit - round(c / unit)) < tol for c in w)


def quantize_boost(w, grid):
    """Round w componentwise to the compatible boost lattice."""
    unit = boost_lattice_unit(grid)
    return np.array([round(c / unit) * unit for c in w])


def galilean_transform(traj, w):
    """T_w f(t,x) = exp(-i x.w/2) exp(-i t|w|^2/4) f(t, x + t w).

    Composes covariantly with the free propagator. w must lie on the
    boost lattice (components multiples of 4*pi/L) so the half-phase is
    periodic; otherwise IncompatibleBoost.
    """
    grid = traj.grid
    w = np.asarray(w, dtype=float)
    if not is_compatible_boost(w, grid):
        raise IncompatibleBoost(
            f"boost {tuple(w)} not on the lattice (4*pi/L)*Z^2 = "
            f"{boost_lattice_unit(grid):.6g}*Z^2")
    if np.all(w == 0.0):
        return SpaceTimeField(grid, traj.t.copy(), traj.values.copy())
    X1, X2 = grid.coords()
    half_phase = np.exp(-0.5j * (X1 * w[0] + X2 * w[1]))
    wsq4 = 0.25 * float(w @ w)

    def one(f, t):
        g = shift_field(f, grid, t * w)
        return half_phase * np.exp(-1j * t * wsq4) * g

    return traj.map_slices(one)
