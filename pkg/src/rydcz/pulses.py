"""Drive waveforms: adiabatic sweeps, counterdiabatic synthesis, band limiting.

Contains the Gaussian-like Rabi / sine detuning sweep pair, the smoothed
variant whose value and slope vanish at the half-pulse edges, analytic and
numerically extracted counterdiabatic coefficients, the oscillating eCD
control triple, piecewise-constant controls with a hard frequency cutoff,
and the static drive-error transforms used for stability scans.
"""

from __future__ import annotations

import functools
import warnings
from dataclasses import dataclass

import numpy as np

from . import hilbert

TWO_PI = 2.0 * np.pi

#: Reference amplitudes scaled by s: Omega_max = s * 2pi * 17 MHz, Delta_max = s * 2pi * 23 MHz.
OMEGA_MAX_REF = TWO_PI * 17e6
DELTA_MAX_REF = TWO_PI * 23e6
#: Rabi pulse width relative to the total protocol time.
TAU_FRACTION = 0.175


class PulseError(ValueError):
    """Invalid pulse parameters or evaluation outside the time domain."""


class DegeneracyError(RuntimeError):
    """Eigenvalue gap collapsed during counterdiabatic extraction."""


class CalibrationError(RuntimeError):
    """Oscillation-frequency calibration has no solution."""


@dataclass(frozen=True)
class SweepParams:
    """Parameters of the two-half-pulse adiabatic sweep.

    omega_max, delta_max in rad/s; T, tau in seconds.  s_scale records the
    common amplitude multiplier relative to the 17/23 MHz reference pair.
    """

    omega_max: float
    delta_max: float
    T: float
    tau: float = -1.0
    s_scale: float = 1.0

    def __post_init__(self):
        if self.tau < 0:
            object.__setattr__(self, "tau", TAU_FRACTION * self.T)
        if self.T <= 0 or self.tau <= 0:
            raise PulseError("T and tau must be positive")
        if self.omega_max < 0 or self.delta_max < 0:
            raise PulseError("amplitudes must be non-negative")

    @classmethod
    def from_scale(cls, s: float, T: float) -> "SweepParams":
        """Sweep at amplitude scaling s: Omega_max = s*2pi*17 MHz, Delta_max = s*2pi*23 MHz."""
        return cls(omega_max=s * OMEGA_MAX_REF, delta_max=s * DELTA_MAX_REF, T=T, s_scale=s)


@dataclass(frozen=True)
class SmoothedPulseCoeffs:
    """Coefficients of the edge-flattened Rabi pulse on one half-pulse."""

    a: float
    b: float
    norm: float
    t0: float


@dataclass(frozen=True)
class ECDParams:
    """Fast-oscillation frequency and blockade strength for the eCD drive."""

    osc_freq: float
    blockade: float

    def __post_init__(self):
        if self.osc_freq <= 0:
            raise PulseError("osc_freq must be positive")


@dataclass(frozen=True)
class ErrorModel:
    """Static drive errors: absolute detuning offset, relative amplitude error."""

    delta_offset: float = 0.0
    omega_rel: float = 0.0


@dataclass(frozen=True)
class PiecewiseControl:
    """Uniform piecewise-constant control: values[i] holds on [i*T/n, (i+1)*T/n)."""

    n_segments: int
    values: np.ndarray
    T: float
    cutoff: float

    def __post_init__(self):
        if self.n_segments < 8:
            raise PulseError("piecewise controls need at least 8 segments")
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.n_segments,):
            raise PulseError(f"expected {self.n_segments} segment values, got shape {vals.shape}")
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        if self.T <= 0:
            raise PulseError("T must be positive")

    @property
    def dt(self) -> float:
        return self.T / self.n_segments

    @property
    def t_start(self) -> np.ndarray:
        return np.arange(self.n_segments) * self.dt


# ---------------------------------------------------------------------------
# analytic sweep waveforms
# ---------------------------------------------------------------------------

def _check_domain(t, T):
    t = np.asarray(t, dtype=float)
    if np.any(t < -1e-15 * T) or np.any(t > T * (1 + 1e-15)):
        raise PulseError(f"time outside [0, T={T}]")
    return np.clip(t, 0.0, T)


def _local_time(t, T):
    """Map protocol time onto the active half-pulse: local t in [0, T/2], center T/4."""
    half = T / 2.0
    return np.where(t <= half, t, t - half)


def saffman_rabi(t, p: SweepParams):
    """Gaussian-like Rabi pulse, zero at each half-pulse edge, peak omega_max."""
    t = _check_domain(t, p.T)
    tl = _local_time(t, p.T)
    t0 = p.T / 4.0
    a = np.exp(-(t0 / p.tau) ** 4)
    return p.omega_max / (1.0 - a) * (np.exp(-(((tl - t0) / p.tau) ** 4)) - a)


def saffman_detuning(t, p: SweepParams):
    """Sine detuning with period T, centered on the active half-pulse."""
    t = _check_domain(t, p.T)
    tl = _local_time(t, p.T)
    t0 = p.T / 4.0
    return p.delta_max * np.sin(TWO_PI / p.T * (tl - t0))


def saffman_detuning_derivative(t, p: SweepParams):
    t = _check_domain(t, p.T)
    tl = _local_time(t, p.T)
    t0 = p.T / 4.0
    return p.delta_max * (TWO_PI / p.T) * np.cos(TWO_PI / p.T * (tl - t0))


@functools.lru_cache(maxsize=256)
def _smoothed_cache(T: float, tau: float) -> tuple[float, float, float, float]:
    t0 = T / 4.0
    a = float(np.exp(-((t0 / tau) ** 4)))
    b = float(-(2.0 * t0**2 / tau**4) * np.exp(-((t0 / tau) ** 4)))
    # the parabola term shifts the maximum slightly off-center; take the
    # normalization from a dense local grid (relative error ~1e-9)
    tl = np.linspace(0.0, 2.0 * t0, 20001)
    q = np.exp(-(((tl - t0) / tau) ** 4)) - a - b * tl * (tl - 2.0 * t0)
    return a, b, float(q.max()), t0


def smoothed_rabi_coeffs(p: SweepParams, t0: float | None = None) -> SmoothedPulseCoeffs:
    """Solve the edge conditions value = slope = 0 for the modified Rabi pulse.

    Both half-pulses share the same coefficients in local coordinates; t0
    may be given as T/4 or 3T/4 and only fixes which center is recorded.
    """
    if p.tau <= 0:
        raise PulseError("tau must be positive")
    a, b, norm, t0_local = _smoothed_cache(p.T, p.tau)
    if t0 is None:
        t0 = t0_local
    if not (abs(t0 - p.T / 4) < 1e-12 * p.T or abs(t0 - 3 * p.T / 4) < 1e-12 * p.T):
        raise PulseError("t0 must be a half-pulse center (T/4 or 3T/4)")
    return SmoothedPulseCoeffs(a=a, b=b, norm=norm, t0=t0)


def smoothed_rabi(t, p: SweepParams):
    """Rabi pulse with vanishing value and slope at the half-pulse edges."""
    t = _check_domain(t, p.T)
    a, b, norm, t0 = _smoothed_cache(p.T, p.tau)
    tl = _local_time(t, p.T)
    q = np.exp(-(((tl - t0) / p.tau) ** 4)) - a - b * tl * (tl - 2.0 * t0)
    return p.omega_max * q / norm


def smoothed_rabi_derivative(t, p: SweepParams):
    t = _check_domain(t, p.T)
    a, b, norm, t0 = _smoothed_cache(p.T, p.tau)
    tl = _local_time(t, p.T)
    u = tl - t0
    dq = -(4.0 * u**3 / p.tau**4) * np.exp(-((u / p.tau) ** 4)) - 2.0 * b * u
    return p.omega_max * dq / norm


# ---------------------------------------------------------------------------
# counterdiabatic coefficients
# ---------------------------------------------------------------------------

def cd_coefficient_from_values(omega, domega, delta, ddelta, k: int, eps: float):
    """(Delta dOmega_k - Omega_k dDelta) / (Delta^2 + Omega_k^2) with Omega_1 = sqrt(2) Omega.

    Returns 0 where the denominator falls below eps^2 (zero-drive points).
    """
    if k not in (0, 1):
        raise PulseError("k must be 0 or 1")
    mult = np.sqrt(2.0) if k == 1 else 1.0
    om = mult * np.asarray(omega, dtype=float)
    dom = mult * np.asarray(domega, dtype=float)
    de = np.asarray(delta, dtype=float)
    dde = np.asarray(ddelta, dtype=float)
    den = de * de + om * om
    num = de * dom - om * dde
    out = np.where(den < eps * eps, 0.0, num / np.where(den == 0.0, 1.0, den))
    return out if out.ndim else float(out)


def cd_coefficient_analytic(t, k: int, p: SweepParams):
    """Counterdiabatic coefficient f_k of the smoothed sweep (units 1/s)."""
    eps = 1e-6 * max(p.omega_max, p.delta_max)
    return cd_coefficient_from_values(
        smoothed_rabi(t, p),
        smoothed_rabi_derivative(t, p),
        saffman_detuning(t, p),
        saffman_detuning_derivative(t, p),
        k,
        eps,
    )


def counterdiabatic_matrix(hfun, t: float, h: float, gap_tol: float = 0.0):
    """H_CD(t) = i sum_n (|dn><n| - <n|dn>|n><n|) via central differences.

    hfun(t) must return a Hermitian matrix.  Eigenvectors at t and t+h are
    phase-aligned to the t-h frame (overlap rotated to the positive real
    axis), the standard smooth gauge.  Raises DegeneracyError when any
    eigenvalue gap at t falls below gap_tol.
    """
    hm = np.asarray(hfun(t - h), dtype=complex)
    h0 = np.asarray(hfun(t), dtype=complex)
    hp = np.asarray(hfun(t + h), dtype=complex)
    wm, vm = np.linalg.eigh(hm)
    w0, v0 = np.linalg.eigh(h0)
    wp, vp = np.linalg.eigh(hp)
    if gap_tol > 0.0:
        gaps = np.diff(np.sort(w0))
        if gaps.size and gaps.min() < gap_tol:
            raise DegeneracyError(
                f"eigenvalue gap {gaps.min():.3e} below {gap_tol:.3e} at t={t:.6e} s"
            )

    def _align(v, ref):
        ov = np.sum(ref.conj() * v, axis=0)
        ph = np.where(np.abs(ov) == 0.0, 1.0, ov / np.abs(np.where(np.abs(ov) == 0.0, 1.0, ov)))
        return v * ph.conj()

    v0 = _align(v0, vm)
    vp = _align(vp, vm)
    dv = (vp - vm) / (2.0 * h)
    hcd = 1j * (dv @ v0.conj().T)
    diag = np.sum(v0.conj() * dv, axis=0)
    hcd -= 1j * (v0 * diag) @ v0.conj().T
    return 0.5 * (hcd + hcd.conj().T)


def _adiabatic_hamiltonian_smoothed(t, p: SweepParams, V: float):
    om = smoothed_rabi(t, p)
    de = saffman_detuning(t, p)
    return om * hilbert.DRIVE_COUPLING + de * hilbert.RYDBERG_NUMBER + V * hilbert.RR_PROJECTOR


# isometry onto the doubly-occupied symmetric sector {|11>, (|1r>+|r1>)/sqrt2, |rr>}
_SYM = np.zeros((9, 3))
_SYM[4, 0] = 1.0
_SYM[5, 1] = _SYM[7, 1] = 1.0 / np.sqrt(2.0)
_SYM[8, 2] = 1.0
_SYM.setflags(write=False)
_SINGLE = (1, 2)  # {|01>, |0r>}


def cd_coefficient_numeric(t, p: SweepParams, V: float, h: float | None = None):
    """Extract (f_0, f_1) from the counterdiabatic matrix of the full sweep.

    Works on the two symmetry blocks that carry the drive: the singly
    occupied {|01>, |0r>} pair and the symmetric {|11>, bright, |rr>}
    triple (the full 9x9 spectrum is degenerate across the mirrored
    single-atom sectors, which would leave the eigenvector gauge free).
    f_0 = 2 Im<01|H_CD|0r>, f_1 = 2 sqrt(2) Im<11|H_CD|1r>; both reduce to
    the analytic expressions in the strong-blockade limit.
    """
    if h is None:
        h = 1e-4 * p.T
    gap_tol = 1e-6 * abs(V)

    def _h_single(tt):
        full = _adiabatic_hamiltonian_smoothed(tt, p, V)
        return full[np.ix_(_SINGLE, _SINGLE)]

    def _h_sym(tt):
        full = _adiabatic_hamiltonian_smoothed(tt, p, V)
        return _SYM.T @ full @ _SYM

    cd0 = counterdiabatic_matrix(_h_single, t, h, gap_tol)
    cd1 = counterdiabatic_matrix(_h_sym, t, h, gap_tol)
    f0 = 2.0 * float(np.imag(cd0[0, 1]))
    f1 = 2.0 * float(np.imag(cd1[0, 1]))  # <11|H_CD|bright> = sqrt(2) <11|H_CD|1r>
    return f0, f1


# ---------------------------------------------------------------------------
# eCD controls
# ---------------------------------------------------------------------------

def _signed_sqrt(f, omega):
    f = np.asarray(f, dtype=float)
    return np.sign(f) * np.sqrt(omega * np.abs(f))


def ecd_amplitudes(t, p: SweepParams, e: ECDParams):
    """Slow envelopes (A0, A1) of the oscillating eCD controls.

    A0 drives the singly occupied sector and carries f_0 directly.  The
    doubly occupied sector couples through the bright state with a sqrt(2)
    enhancement, so its amplitude uses f_1/sqrt(2); this makes the
    period-averaged generator reproduce the counterdiabatic coefficients
    with their signs (validated by the omega^-2 infidelity scaling).
    """
    f0 = cd_coefficient_analytic(t, 0, p)
    f1 = cd_coefficient_analytic(t, 1, p)
    a0 = _signed_sqrt(f0, e.osc_freq)
    a1 = _signed_sqrt(np.asarray(f1) / np.sqrt(2.0), e.osc_freq)
    return a0, a1


def controls_from_amplitudes(a0, a1, osc_freq: float, t):
    """Assemble (g1, g2, g3) from slow envelopes and the fast phase."""
    s = np.sin(osc_freq * np.asarray(t, dtype=float))
    c = np.cos(osc_freq * np.asarray(t, dtype=float))
    return a0 * s, a1 * c, -a1 * s + a0 * c


def warn_if_slow_oscillation(osc_freq: float, T: float):
    if osc_freq * T / TWO_PI < 10:
        warnings.warn(
            "eCD oscillation frequency below ten cycles per protocol; "
            "the period-averaged generator is unreliable",
            stacklevel=3,
        )


def ecd_controls(t, p: SweepParams, e: ECDParams):
    """Oscillating control triple (g1, g2, g3) in rad/s."""
    warn_if_slow_oscillation(e.osc_freq, p.T)
    a0, a1 = ecd_amplitudes(t, p, e)
    return controls_from_amplitudes(a0, a1, e.osc_freq, t)


def _envelope_scale(p: SweepParams, n_grid: int = 4097):
    """max_t (|f_0| + |f_1|/sqrt(2)) on a refined grid."""
    ts = np.linspace(0.0, p.T, n_grid)
    f0 = np.abs(cd_coefficient_analytic(ts, 0, p))
    f1 = np.abs(cd_coefficient_analytic(ts, 1, p)) / np.sqrt(2.0)
    m = f0 + f1
    i = int(np.argmax(m))
    lo = max(ts[max(i - 1, 0)], 0.0)
    hi = min(ts[min(i + 1, n_grid - 1)], p.T)
    # golden-section refinement of the grid maximum
    gr = (np.sqrt(5.0) - 1.0) / 2.0
    def val(tt):
        return float(
            np.abs(cd_coefficient_analytic(tt, 0, p))
            + np.abs(cd_coefficient_analytic(tt, 1, p)) / np.sqrt(2.0)
        )
    c = hi - gr * (hi - lo)
    d = lo + gr * (hi - lo)
    fc, fd = val(c), val(d)
    for _ in range(80):
        if fc > fd:
            hi, d, fd = d, c, fc
            c = hi - gr * (hi - lo)
            fc = val(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + gr * (hi - lo)
            fd = val(d)
    return max(float(m[i]), fc, fd)


def calibrate_osc_freq(target_amp: float, p: SweepParams) -> float:
    """Oscillation frequency at which the largest eCD envelope equals target_amp.

    The envelopes scale as sqrt(omega), and the dominant one is
    sqrt(omega (|f_0| + |f_1|/sqrt(2))) from g3, so omega = target^2 / max_t(.).
    """
    if target_amp <= 0:
        raise CalibrationError("target amplitude must be positive")
    m = _envelope_scale(p)
    if m <= 0.0:
        raise CalibrationError("counterdiabatic coefficients vanish identically")
    return target_amp**2 / m


# ---------------------------------------------------------------------------
# band-limited piecewise controls
# ---------------------------------------------------------------------------

@functools.lru_cache(maxsize=64)
def band_limit_matrix(n_segments: int, T: float, cutoff: float) -> np.ndarray:
    """Circulant filter from a normalized periodic-sinc (Dirichlet) kernel.

    Convolving with the kernel projects onto the discrete Fourier modes
    with |omega_b| = 2 pi b / T <= cutoff.  Kernel entries below 1e-4 of
    the peak are dropped; rows are renormalized so a constant input maps
    to itself.
    """
    if cutoff <= 0:
        raise PulseError("cutoff must be positive")
    n = n_segments
    bmax = min(int(np.floor(cutoff * T / TWO_PI)), n // 2)
    m = np.arange(n)
    kernel = np.ones(n)
    for b in range(1, bmax + 1):
        kernel += 2.0 * np.cos(TWO_PI * b * m / n)
    kernel /= n
    kernel = np.where(np.abs(kernel) < 1e-4 * np.abs(kernel).max(), 0.0, kernel)
    idx = np.arange(n)
    w = kernel[(idx[:, None] - idx[None, :]) % n]
    w /= w.sum(axis=1, keepdims=True)
    w.setflags(write=False)
    return w


def band_limit(c: PiecewiseControl) -> PiecewiseControl:
    """Apply the sinc-kernel frequency cutoff to a piecewise control."""
    w = band_limit_matrix(c.n_segments, c.T, c.cutoff)
    return PiecewiseControl(c.n_segments, w @ c.values, c.T, c.cutoff)


# ---------------------------------------------------------------------------
# static error transforms
# ---------------------------------------------------------------------------

def apply_drive_errors(waveforms, e: ErrorModel):
    """(Omega, Delta) -> ((1+dOmega) Omega, Delta + dDelta) on waveform values."""
    omega, delta = waveforms
    return (1.0 + e.omega_rel) * np.asarray(omega), np.asarray(delta) + e.delta_offset


def apply_ecd_errors(g1, g2, g3, e: ErrorModel):
    """Relative error on g1, g2 and absolute offset on g3."""
    scale = 1.0 + e.omega_rel
    return scale * np.asarray(g1), scale * np.asarray(g2), np.asarray(g3) + e.delta_offset
