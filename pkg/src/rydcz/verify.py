"""Self-contained invariant suite behind the `rydcz verify` subcommand.

Quick structural and physical checks (a lighter sibling of the test
suite): operator algebra, Hermiticity, unitarity and norm conservation on
random draws, the closed-form infidelity values, filter linearity, and
gradient/finite-difference agreement.
"""

from __future__ import annotations

import numpy as np

from . import dynamics, hilbert, optimizer, pulses
from .hilbert import AtomLevel
from .pulses import TWO_PI, SweepParams


def _check_basis():
    ok = all(hilbert.basis_levels(hilbert.basis_index(a, b)) == (a, b)
             for a in AtomLevel for b in AtomLevel)
    ok &= hilbert.basis_index(AtomLevel.g0, AtomLevel.g0) == 0
    ok &= hilbert.basis_index(AtomLevel.ryd, AtomLevel.ryd) == 8
    return ok, "basis index bijective with fixed ordering"


def _check_projectors():
    ok = True
    for lvl in AtomLevel:
        p = hilbert.projector(lvl)
        ok &= np.allclose(p @ p, p) and abs(np.trace(p) - 1) < 1e-15
    return ok, "projectors idempotent with unit trace"


def _check_hermiticity(rng):
    ok = True
    worst = 0.0
    for _ in range(25):
        T = rng.uniform(0.027e-6, 0.54e-6)
        s = rng.uniform(1.0, 4.8)
        sweep = SweepParams.from_scale(s, T)
        t = rng.uniform(0.0, T)
        h = dynamics.hamiltonian_adiabatic(t, sweep, TWO_PI * 500e6)
        defect = np.abs(h - h.conj().T).max() / max(np.abs(h).max(), 1e-300)
        worst = max(worst, defect)
        ok &= defect < 1e-12
        ok &= np.abs(h[0, :]).max() == 0.0 and np.abs(h[:, 0]).max() == 0.0
    return ok, f"Hamiltonians Hermitian, |00> uncoupled (worst defect {worst:.1e})"


def _check_unitarity(rng):
    cfg = dynamics.PropagationConfig(min_substeps=2048)
    ok = True
    worst_u = worst_n = 0.0
    for _ in range(8):
        T = rng.uniform(0.027e-6, 0.54e-6)
        s = rng.uniform(1.0, 4.8)
        sweep = SweepParams.from_scale(s, T)
        u = dynamics.propagate(
            lambda t: dynamics.hamiltonian_adiabatic(t, sweep, TWO_PI * 500e6), T, cfg)
        worst_u = max(worst_u, hilbert.unitarity_defect(u))
        psi = rng.normal(size=9) + 1j * rng.normal(size=9)
        psi /= np.linalg.norm(psi)
        worst_n = max(worst_n, abs(np.linalg.norm(u @ psi) - 1.0))
    ok &= worst_u < 1e-8 and worst_n < 1e-9
    return ok, f"propagators unitary ({worst_u:.1e}), norms conserved ({worst_n:.1e})"


def _check_infidelity_values():
    cz = np.diag([1, -1, -1, -1]).astype(complex)
    i4 = np.eye(4, dtype=complex)
    alt = np.diag([1, -1, -1, 1]).astype(complex)
    ok = (dynamics.infidelity(cz) == 0.0
          and abs(dynamics.infidelity(i4) - 0.75) < 1e-15
          and abs(dynamics.infidelity(alt) - 0.75) < 1e-15)
    io, th = dynamics.infidelity_phase_optimized(cz)
    ok &= io < 1e-12
    return ok, "closed-form infidelity values match hand evaluation"


def _check_phase_opt_bound(rng):
    ok = True
    for _ in range(40):
        m = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        q, _ = np.linalg.qr(m)
        ok &= dynamics.infidelity_phase_optimized(q)[0] <= dynamics.infidelity(q) + 1e-12
    return ok, "phase-optimized infidelity never exceeds the raw value"


def _check_band_limit(rng):
    ctrl = pulses.PiecewiseControl(64, np.full(64, 3.0), 1e-6, TWO_PI * 20e6)
    const_ok = np.allclose(pulses.band_limit(ctrl).values, 3.0, atol=1e-12)
    x = rng.normal(size=64)
    y = rng.normal(size=64)
    w = pulses.band_limit_matrix(64, 1e-6, TWO_PI * 20e6)
    lin = np.abs(w @ (2.0 * x - 3.0 * y) - (2.0 * w @ x - 3.0 * w @ y)).max()
    return const_ok and lin < 1e-10, f"band limit linear (defect {lin:.1e}), DC gain 1"


def _check_pulse_boundaries():
    sweep = SweepParams.from_scale(1.0, 0.54e-6)
    tol = 1e-9 * sweep.omega_max
    vals = [pulses.saffman_rabi(t, sweep) for t in (0.0, sweep.T / 2, sweep.T)]
    ok = all(abs(v) < tol for v in vals)
    h = 1e-9 * sweep.T
    for t0 in (0.0, sweep.T / 2, sweep.T):
        lo = max(t0, h)
        d = (pulses.smoothed_rabi(min(lo + h, sweep.T), sweep)
             - pulses.smoothed_rabi(max(lo - h, 0.0), sweep)) / (2 * h)
        ok &= abs(d) < 1e-6 * sweep.omega_max / sweep.T * 100
    return ok, "sweep pulses vanish (and smoothed slope vanishes) at edges"


def _check_gradient(rng):
    cfg = optimizer.OptimizerConfig(T=0.2e-6, omega_bound=TWO_PI * 17e6,
                                    delta_bound=TWO_PI * 23e6, n_segments=32)
    om = rng.uniform(-0.3, 0.3, 32) * cfg.omega_bound
    de = rng.uniform(-0.3, 0.3, 32) * cfg.delta_bound
    g_om, g_de = optimizer.gradient(om, de, TWO_PI * 500e6, cfg)
    g = np.concatenate([g_om, g_de])
    worst = 0.0
    # restrict to coordinates where central differences are not drowned
    # in cancellation noise
    usable = np.flatnonzero(np.abs(g) > 1e-2 * np.abs(g).max())
    for k in rng.permutation(usable)[:6]:
        h = 1e-6 * (cfg.omega_bound if k < 32 else cfg.delta_bound)
        dv = np.zeros(64)
        dv[k] = h
        cp = optimizer.cost(om + dv[:32], de + dv[32:], TWO_PI * 500e6, cfg)
        cm = optimizer.cost(om - dv[:32], de - dv[32:], TWO_PI * 500e6, cfg)
        fd = (cp - cm) / (2 * h)
        worst = max(worst, abs(fd - g[k]) / max(abs(fd), abs(g[k]), 1e-300))
    return worst < 1e-5, f"adjoint gradient matches finite differences ({worst:.1e})"


def run_invariant_suite(seed: int = 12345):
    """Run all checks; returns a list of (name, passed, detail)."""
    rng = np.random.default_rng(seed)
    checks = [
        ("basis_indexing", _check_basis),
        ("projectors", _check_projectors),
        ("hermiticity", lambda: _check_hermiticity(rng)),
        ("unitarity_norms", lambda: _check_unitarity(rng)),
        ("infidelity_values", _check_infidelity_values),
        ("phase_opt_bound", lambda: _check_phase_opt_bound(rng)),
        ("band_limit", lambda: _check_band_limit(rng)),
        ("pulse_boundaries", _check_pulse_boundaries),
        ("gradient_fd", lambda: _check_gradient(rng)),
    ]
    results = []
    for name, fn in checks:
        try:
            ok, detail = fn()
        except Exception as exc:  # a crashed check is a failed check
            ok, detail = False, f"raised {exc!r}"
        results.append((name, bool(ok), detail))
    return results
