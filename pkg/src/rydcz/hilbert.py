"""Basis bookkeeping and operators for the two-atom, three-level Hilbert space.

Each atom has two ground states |0>, |1> and one Rydberg state |r>.  The
two-atom space is the 9-dimensional tensor product with the first atom as
the major index: index(a, b) = 3*idx(a) + idx(b).

Units: all angular frequencies are stored in rad/s (hbar = 1), so a value
quoted as "f/(2 pi) = x MHz" enters as 2*pi*x*1e6.  Times are in seconds.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

#: Alias for 9x9 complex operators (Hamiltonians, propagators).
OperatorMatrix = np.ndarray

DIM_ATOM = 3
DIM = DIM_ATOM * DIM_ATOM


class AtomLevel(enum.IntEnum):
    """Single-atom levels, ordered g0 < g1 < ryd for indexing."""

    g0 = 0
    g1 = 1
    ryd = 2


def basis_index(a: AtomLevel, b: AtomLevel) -> int:
    """Index of the product state |a,b> in the 9-dimensional basis."""
    return 3 * int(a) + int(b)


def basis_levels(index: int) -> tuple[AtomLevel, AtomLevel]:
    """Inverse of :func:`basis_index`."""
    if not 0 <= index < DIM:
        raise ValueError(f"basis index {index} outside [0, {DIM})")
    return AtomLevel(index // 3), AtomLevel(index % 3)


#: Indices of the computational basis {|00>, |01>, |10>, |11>}.
COMPUTATIONAL_INDICES = (
    basis_index(AtomLevel.g0, AtomLevel.g0),
    basis_index(AtomLevel.g0, AtomLevel.g1),
    basis_index(AtomLevel.g1, AtomLevel.g0),
    basis_index(AtomLevel.g1, AtomLevel.g1),
)


def projector(x: AtomLevel) -> np.ndarray:
    """Rank-1 projector |x><x| on the single-atom space."""
    p = np.zeros((DIM_ATOM, DIM_ATOM))
    p[int(x), int(x)] = 1.0
    return p


def tensor(a: np.ndarray, b: np.ndarray) -> OperatorMatrix:
    """Kronecker product with the first atom as the major index."""
    return np.kron(np.asarray(a), np.asarray(b))


def single_atom_drive(omega: float, delta: float) -> np.ndarray:
    """Single-atom control Hamiltonian (rad/s).

    (omega/2)(|r><1| + |1><r|) + delta |r><r|; the |0> level is never
    coupled by the drive.
    """
    h = np.zeros((DIM_ATOM, DIM_ATOM), dtype=complex)
    h[2, 1] = h[1, 2] = omega / 2.0
    h[2, 2] = delta
    return h


# Constant two-atom operator blocks reused by Hamiltonian assembly.
_I3 = np.eye(DIM_ATOM)
_X1R = np.zeros((DIM_ATOM, DIM_ATOM))
_X1R[2, 1] = _X1R[1, 2] = 1.0
_R_FROM_1 = np.zeros((DIM_ATOM, DIM_ATOM))
_R_FROM_1[2, 1] = 1.0  # |r><1|

#: dH/dOmega for the symmetric drive of both atoms.
DRIVE_COUPLING = 0.5 * (tensor(_X1R, _I3) + tensor(_I3, _X1R))
#: dH/dDelta: total Rydberg occupation number P_r x 1 + 1 x P_r.
RYDBERG_NUMBER = tensor(projector(AtomLevel.ryd), _I3) + tensor(_I3, projector(AtomLevel.ryd))
#: |rr><rr| projector carrying the blockade shift.
RR_PROJECTOR = tensor(projector(AtomLevel.ryd), projector(AtomLevel.ryd))

# eCD drive blocks: |r><1| (x) P_0 + P_0 (x) |r><1| and the P_1 analogue.
ECD_COUPLING_P0 = tensor(_R_FROM_1, projector(AtomLevel.g0)) + tensor(projector(AtomLevel.g0), _R_FROM_1)
ECD_COUPLING_P1 = tensor(_R_FROM_1, projector(AtomLevel.g1)) + tensor(projector(AtomLevel.g1), _R_FROM_1)

for _m in (DRIVE_COUPLING, RYDBERG_NUMBER, RR_PROJECTOR, ECD_COUPLING_P0, ECD_COUPLING_P1):
    _m.setflags(write=False)


@dataclass(frozen=True)
class TwoAtomState:
    """Complex amplitude vector over the 9-dimensional two-atom basis."""

    amp: np.ndarray

    def __post_init__(self):
        amp = np.asarray(self.amp, dtype=complex)
        if amp.shape != (DIM,):
            raise ValueError(f"amplitude vector must have shape ({DIM},), got {amp.shape}")
        amp = amp.copy()
        amp.setflags(write=False)
        object.__setattr__(self, "amp", amp)

    @classmethod
    def from_levels(cls, a: AtomLevel, b: AtomLevel) -> "TwoAtomState":
        amp = np.zeros(DIM, dtype=complex)
        amp[basis_index(a, b)] = 1.0
        return cls(amp)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amp))


def is_hermitian(h: np.ndarray, rtol: float = 1e-12) -> bool:
    """Check ||H - H^dag||_max < rtol * ||H||_max (true for exact zeros)."""
    scale = np.abs(h).max()
    if scale == 0.0:
        return True
    return float(np.abs(h - h.conj().T).max()) < rtol * scale

def unitarity_defect(u: np.ndarray) -> float:
    """Max-norm of U^dag U - I."""
    d = u.shape[0]
    return float(np.abs(u.conj().T @ u - np.eye(d)).max())


def is_unitary(u: np.ndarray, tol: float = 1e-8) -> bool:
    return unitarity_defect(u) < tol
