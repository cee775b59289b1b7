"""Stabilizer tableau simulation with symbolic measurement outcomes.

The simulator tracks destabilizer/stabilizer rows in the usual binary
(x, z) encoding.  Row signs are affine Boolean forms over "coins", one
coin per random measurement outcome, stored as Python int bitmasks
(bit 0 is the constant term, bit 1+k is coin k).  A detector or
observable parity is deterministic exactly when the coin part of its
outcome form cancels, which this module checks without any sampling.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .circuits import Circuit

_NOISE = ("DEPOL1", "DEPOL2", "MEAS_FLIP")


class StabilizerSimulator:
    """CHP-style simulator over ``num_qubits`` qubits, all starting in |0>."""

    def __init__(self, num_qubits: int):
        n = self.n = num_qubits
        self.x = np.zeros((2 * n + 1, n), dtype=bool)
        self.z = np.zeros((2 * n + 1, n), dtype=bool)
        for i in range(n):
            self.x[i, i] = True
            self.z[n + i, i] = True
        self.signs = [0] * (2 * n + 1)
        self.num_coins = 0

    # -- gates ---------------------------------------------------------

    def h(self, q: int) -> None:
        flip = self.x[:, q] & self.z[:, q]
        self._flip_signs(flip)
        self.x[:, q], self.z[:, q] = self.z[:, q].copy(), self.x[:, q].copy()

    def s(self, q: int) -> None:
        flip = self.x[:, q] & self.z[:, q]
        self._flip_signs(flip)
        self.z[:, q] ^= self.x[:, q]

    def x_gate(self, q: int) -> None:
        self._flip_signs(self.z[:, q])

    def z_gate(self, q: int) -> None:
        self._flip_signs(self.x[:, q])

    def y_gate(self, q: int) -> None:
        self._flip_signs(self.x[:, q] ^ self.z[:, q])

    def cx(self, c: int, t: int) -> None:
        flip = self.x[:, c] & self.z[:, t] & ~(self.x[:, t] ^ self.z[:, c])
        self._flip_signs(flip)
        self.x[:, t] ^= self.x[:, c]
        self.z[:, c] ^= self.z[:, t]

    def _flip_signs(self, mask: np.ndarray) -> None:
        for i in np.flatnonzero(mask):
            self.signs[i] ^= 1

    # -- measurement ---------------------------------------------------

    def measure_pauli(self, xp: np.ndarray, zp: np.ndarray, sign_bit: int = 0) -> int:
        """Measure the Pauli product (-1)^sign_bit * P and return its
        outcome as an affine form over coins."""
        n = self.n
        anti = self._anticommute_mask(xp, zp)
        stab_anti = np.flatnonzero(anti[n:2 * n])
        if stab_anti.size:
            p = n + stab_anti[0]
            # row p - n is overwritten below, so it is skipped here (it
            # anticommutes with row p and their product is not Hermitian)
            for i in np.flatnonzero(anti[:2 * n]):
                if i != p and i != p - n:
                    self._rowsum(i, p)
            # the old stabilizer becomes the destabilizer of the new one
            self.x[p - n] = self.x[p]
            self.z[p - n] = self.z[p]
            self.signs[p - n] = self.signs[p]
            coin = 1 << (1 + self.num_coins)
            self.num_coins += 1
            self.x[p] = xp
            self.z[p] = zp
            self.signs[p] = coin ^ (sign_bit & 1)
            return coin
        # deterministic: accumulate stabilizer rows whose destabilizer
        # partner anticommutes with P into the scratch row
        s = 2 * n
        self.x[s] = False
        self.z[s] = False
        self.signs[s] = 0
        for i in np.flatnonzero(anti[:n]):
            self._rowsum(s, n + i)
        if not (np.array_equal(self.x[s], xp) and np.array_equal(self.z[s], zp)):
            raise AssertionError("deterministic measurement did not reproduce operator")
        return self.signs[s] ^ (sign_bit & 1)

    def measure_z(self, q: int) -> int:
        xp = np.zeros(self.n, dtype=bool)
        zp = np.zeros(self.n, dtype=bool)
        zp[q] = True
        return self.measure_pauli(xp, zp)

    def reset_z(self, q: int) -> None:
        f = self.measure_z(q)
        if f:
            # classically controlled X^f folds into the sign forms
            for i in np.flatnonzero(self.z[:2 * self.n, q]):
                self.signs[i] ^= f

    def reset_x(self, q: int) -> None:
        xp = np.zeros(self.n, dtype=bool)
        zp = np.zeros(self.n, dtype=bool)
        xp[q] = True
        f = self.measure_pauli(xp, zp)
        if f:
            for i in np.flatnonzero(self.x[:2 * self.n, q]):
                self.signs[i] ^= f

    def _anticommute_mask(self, xp: np.ndarray, zp: np.ndarray) -> np.ndarray:
        a = self.x[:2 * self.n] & zp
        b = self.z[:2 * self.n] & xp
        return (a.sum(axis=1) + b.sum(axis=1)) % 2 == 1

    def _rowsum(self, h: int, i: int) -> None:
        """Row h := (row i) * (row h), with exact phase bookkeeping."""
        x1 = self.x[i].astype(np.int8)
        z1 = self.z[i].astype(np.int8)
        x2 = self.x[h].astype(np.int8)
        z2 = self.z[h].astype(np.int8)
        g = np.where(
            (x1 == 1) & (z1 == 1), z2 - x2,
            np.where((x1 == 1) & (z1 == 0), z2 * (2 * x2 - 1),
                     np.where((x1 == 0) & (z1 == 1), x2 * (1 - 2 * z2), 0)))
        tot = int(g.sum()) % 4
        if tot not in (0, 2):
            raise AssertionError("non-Hermitian phase in rowsum")
        self.signs[h] ^= self.signs[i] ^ (tot // 2)
        self.x[h] ^= self.x[i]
        self.z[h] ^= self.z[i]


@dataclass
class DeterminismReport:
    """Outcome of a noiseless symbolic run over a circuit."""

    measurement_forms: list[int] = field(default_factory=list)
    nondeterministic_detectors: list[int] = field(default_factory=list)
    nonzero_detectors: list[int] = field(default_factory=list)
    nondeterministic_observables: list[int] = field(default_factory=list)
    nonzero_observables: list[int] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not (self.nondeterministic_detectors or self.nonzero_detectors
                    or self.nondeterministic_observables or self.nonzero_observables)


def check_detector_determinism(circuit: Circuit) -> DeterminismReport:
    """Run the circuit noiselessly with symbolic coins and verify that
    every detector and observable parity is deterministic and zero.

    Noise channels are skipped; everything else is simulated exactly.
    """
    cols = {q.id: i for i, q in enumerate(circuit.qubits)}
    sim = StabilizerSimulator(len(cols))
    forms: list[int] = []
    for ins in circuit.instructions:
        op = ins.op
        if op in _NOISE or op in ("TICK", "DETECTOR", "OBSERVABLE"):
            continue
        if op == "MEAS_Z":
            for q in ins.targets:
                forms.append(sim.measure_z(cols[q]))
        elif op == "MPP":
            xp = np.zeros(sim.n, dtype=bool)
            zp = np.zeros(sim.n, dtype=bool)
            for q, p in ins.paulis:
                if p in ("X", "Y"):
                    xp[cols[q]] = True
                if p in ("Z", "Y"):
                    zp[cols[q]] = True
            forms.append(sim.measure_pauli(xp, zp, ins.sign))
        elif op == "H":
            for q in ins.targets:
                sim.h(cols[q])
        elif op == "S":
            for q in ins.targets:
                sim.s(cols[q])
        elif op == "X":
            for q in ins.targets:
                sim.x_gate(cols[q])
        elif op == "Y":
            for q in ins.targets:
                sim.y_gate(cols[q])
        elif op == "Z":
            for q in ins.targets:
                sim.z_gate(cols[q])
        elif op == "CX":
            for c, t in ins.target_pairs():
                sim.cx(cols[c], cols[t])
        elif op == "RESET_Z":
            for q in ins.targets:
                sim.reset_z(cols[q])
        elif op == "RESET_X":
            for q in ins.targets:
                sim.reset_x(cols[q])
        else:
            raise AssertionError(f"unhandled op {op}")

    report = DeterminismReport(measurement_forms=forms)
    for det in circuit.detectors:
        form = 0
        for m in det.meas:
            form ^= forms[m]
        if form >> 1:
            report.nondeterministic_detectors.append(det.index)
        elif form & 1:
            report.nonzero_detectors.append(det.index)
    for obs in circuit.observables:
        form = 0
        for m in obs.meas:
            form ^= forms[m]
        if form >> 1:
            report.nondeterministic_observables.append(obs.index)
        elif form & 1:
            report.nonzero_observables.append(obs.index)
    return report
