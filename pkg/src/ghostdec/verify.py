"""Independent oracles: exhaustive ML decoding, frame-simulation
crosschecks, and minimum failure-weight search.

These paths deliberately avoid the production decoder's machinery so
that agreement is evidence, not tautology.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .circuits import Circuit, CircuitError
from .dem import DetectorErrorModel, sample_dem, site_to_mechanism, mechanism_symptom_xor
from .frames import CircuitSampler


class VerifyError(CircuitError):
    pass


@dataclass(frozen=True)
class MLResult:
    observables: tuple[int, ...]   # most likely logical class
    probability: float             # odds mass of that class (unnormalized)
    ties: tuple[tuple[int, ...], ...]  # classes within tolerance of the max
    solutions: int                 # consistent subsets enumerated


def brute_force_ml_decode(dem: DetectorErrorModel, syndrome: np.ndarray,
                          weight_cap: int = 4,
                          tolerance: float = 1e-12) -> MLResult:
    """Maximum-likelihood logical class by exhaustive subset enumeration.

    Enumerates every mechanism subset of size <= weight_cap whose
    detector symptom equals the syndrome, accumulating odds-ratio mass
    per logical class.  Mechanisms without detectors are excluded (they
    decouple from the syndrome).  Intended for small models only.
    """
    mechs = [(e, m) for e, m in enumerate(dem.mechanisms) if m.detectors]
    if len(mechs) > 4000:
        raise VerifyError(f"{len(mechs)} mechanisms is too large for enumeration")
    if isinstance(syndrome, (set, frozenset)):
        want: frozenset[int] = frozenset(int(t) for t in syndrome)
    else:
        want = frozenset(int(t) for t in np.flatnonzero(syndrome))
    by_det: dict[int, list[int]] = {}
    det_sets = []
    obs_sets = []
    odds = []
    for i, (e, m) in enumerate(mechs):
        det_sets.append(frozenset(m.detectors))
        obs_sets.append(frozenset(m.observables))
        odds.append(m.probability / (1.0 - m.probability))
        for d in m.detectors:
            by_det.setdefault(d, []).append(i)
    class_mass: dict[frozenset[int], float] = {}
    solutions = 0

    # Each subset is enumerated once: the branch variable is always the
    # smallest-index member covering the lowest residual detector (or
    # the smallest-index member overall when the residual has cancelled
    # out), so alternatives below that index are banned in the subtree.
    def visit(residual: frozenset[int], floor: int, banned: frozenset[int],
              obs: frozenset[int], weight: float, depth: int):
        nonlocal solutions
        if not residual:
            class_mass[obs] = class_mass.get(obs, 0.0) + weight
            solutions += 1
        if depth == weight_cap:
            return
        if residual:
            pivot = min(residual)
            shown = [i for i in by_det.get(pivot, ())
                     if i >= floor and i not in banned]
            for pos, i in enumerate(shown):
                visit(residual ^ det_sets[i], floor,
                      banned | frozenset(shown[:pos + 1]),
                      obs ^ obs_sets[i], weight * odds[i], depth + 1)
        else:
            for i in range(floor, len(mechs)):
                if i in banned:
                    continue
                visit(det_sets[i], i + 1, banned,
                      obs ^ obs_sets[i], weight * odds[i], depth + 1)

    visit(want, 0, frozenset(), frozenset(), 1.0, 0)
    if not class_mass:
        raise VerifyError("no consistent correction within the weight cap")
    best = max(class_mass.values())
    tied = sorted(tuple(sorted(k)) for k, v in class_mass.items()
                  if v >= best * (1.0 - tolerance))
    return MLResult(tied[0], best, tuple(tied), solutions)


@dataclass(frozen=True)
class CrosscheckReport:
    shots: int
    mismatched_shots: int
    first_mismatch: int | None
    ok: bool


def frame_sim_crosscheck(circuit: Circuit, dem: DetectorErrorModel,
                         seed: int, shots: int) -> CrosscheckReport:
    """Shared-fault comparison of two independent sampling paths.

    One path propagates each realized fault through the circuit frame
    by frame; the other XORs the symptoms of the mechanisms those same
    faults belong to.  Any disagreement indicates an extraction bug.
    """
    sampler = CircuitSampler(circuit)
    rng = np.random.default_rng(seed)
    dets, obs, fired = sampler.sample(shots, rng, collect_sites=True)
    lookup = site_to_mechanism(dem)
    d2, o2 = mechanism_symptom_xor(dem, lookup, fired)
    bad = 0
    first = None
    for s in range(shots):
        if not (np.array_equal(dets[s], d2[s]) and np.array_equal(obs[s], o2[s])):
            bad += 1
            if first is None:
                first = s
    return CrosscheckReport(shots, bad, first, bad == 0)


@dataclass(frozen=True)
class FailurePattern:
    weight: int
    mechanism_ids: tuple[int, ...]
    failing_observables: tuple[int, ...]


def min_failure_weight_search(dem: DetectorErrorModel, decode, region,
                              max_weight: int = 4,
                              reference=None) -> FailurePattern | None:
    """Smallest in-region mechanism set whose injection fools a decoder.

    ``decode`` maps a detector syndrome to an observable flip vector.
    Failure means disagreeing with the injected mechanisms' true flips,
    or, when ``reference`` (another syndrome -> flips callable) is
    given, disagreeing with it; the relative form isolates one stage's
    own failures from losses every decoder shares, such as boundary
    faults whose symptom is likelier under the opposite logical class.
    Combinations are tried in lexicographic order per weight, so the
    returned witness is the lexicographically least at the minimal
    weight.  Returns None when nothing fails up to max_weight.
    """
    region = sorted(region)
    for w in range(1, max_weight + 1):
        for combo in itertools.combinations(region, w):
            syndrome = np.zeros(dem.detector_count, dtype=bool)
            truth = np.zeros(dem.observable_count, dtype=bool)
            for e in combo:
                m = dem.mechanisms[e]
                for d in m.detectors:
                    syndrome[d] ^= True
                for j in m.observables:
                    truth[j] ^= True
            got = decode(syndrome)
            want = truth if reference is None else reference(syndrome)
            if not np.array_equal(got, want):
                failing = tuple(int(j) for j in np.flatnonzero(got ^ want))
                return FailurePattern(w, tuple(combo), failing)
    return None
