"""Arrival-time model of entangled partners and pair identification.

Monte Carlo per shot: a Poisson number of pairs, each created at one
collision time (truncated exponential); each partner falls with its own
vertical velocity ``v_rec + N(0, dv_z)`` and is detected with probability
``efficiency``.  Identification greedily matches A/B detections by time.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .kinematics import GRAVITY, BeamParameters, fall_time

DEFAULT_COLLISION_TIME_CONSTANT = 150e-6
DEFAULT_COLLISION_WINDOW = 1e-3


def pair_time_spread(drop_height: float, recoil_velocity: float, spread_fraction: float,
                     gravity: float = GRAVITY) -> float:
    """Arrival delay of a partner launched with an extra ``spread_fraction * v_rec``."""
    v = recoil_velocity
    return (fall_time(drop_height, v * (1 + spread_fraction), gravity)
            - fall_time(drop_height, v, gravity))


@dataclass(frozen=True)
class ShotConfig:
    mean_pairs: float = 1.0
    efficiency: float = 1.0
    collision_time_constant: float = DEFAULT_COLLISION_TIME_CONSTANT  # 0: instantaneous
    collision_window: float = DEFAULT_COLLISION_WINDOW
    velocity_spread_z: float = 0.091  # fraction of v_rec
    drop_height: float = 0.5
    seed: int = 0
    beam: BeamParameters = field(default_factory=BeamParameters)
    lateral_half_width: float = 1e-3

    def __post_init__(self):
        if self.mean_pairs < 0:
            raise ValueError("mean_pairs must be >= 0")
        if not 0 <= self.efficiency <= 1:
            raise ValueError("efficiency must lie in [0, 1]")
        if self.collision_time_constant < 0 or self.collision_window < 0:
            raise ValueError("collision times must be >= 0")
        if self.velocity_spread_z < 0:
            raise ValueError("velocity_spread_z must be >= 0")
        if self.drop_height <= 0:
            raise ValueError("drop_height must be > 0")


@dataclass(frozen=True)
class AtomEvent:
    side: str
    time: float
    position: float
    pair_id: int  # truth label; identification never looks at it


@dataclass
class PairingResult:
    pairs: list[tuple[AtomEvent, AtomEvent]]
    true_pairs_detected: int  # pairs with both partners detected
    correct: int
    n_events: int

    @property
    def identified(self) -> int:
        return len(self.pairs)

    @property
    def true_positive_rate(self) -> float:
        """Fraction of fully detected true pairs that were identified correctly."""
        return self.correct / self.true_pairs_detected if self.true_pairs_detected else 1.0

    @property
    def false_pair_rate(self) -> float:
        """Fraction of identified pairs whose partners are not truly entangled."""
        return (self.identified - self.correct) / self.identified if self.identified else 0.0

    @property
    def unpaired_fraction(self) -> float:
        return (self.n_events - 2 * self.identified) / self.n_events if self.n_events else 0.0


def shot_rng(seed: int, shot_index: int) -> np.random.Generator:
    """Independent stream per (seed, shot), so results ignore scheduling."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(shot_index)]))


def _collision_times(rng, n: int, tau: float, window: float) -> np.ndarray:
    if tau == 0 or window == 0:
        return np.zeros(n)
    # inverse CDF of an exponential truncated to [0, window]
    u = rng.random(n)
    return -tau * np.log1p(-u * -math.expm1(-window / tau))


def _lateral_positions(rng, n: int, config: ShotConfig, pattern) -> np.ndarray:
    if pattern is None:
        w = config.lateral_half_width
        return rng.uniform(-w, w, size=(n, 2))
    p = np.clip(np.asarray(pattern.values, dtype=float), 0, None).ravel()
    flat = rng.choice(p.size, size=n, p=p / p.sum())
    i, j = np.unravel_index(flat, pattern.values.shape)
    return np.column_stack([pattern.x_a[i], pattern.x_b[j]])


def simulate_shot(config: ShotConfig, shot_index: int = 0, pattern=None) -> list[AtomEvent]:
    """Detected events of one shot, sorted by arrival time.

    With ``pattern`` (a two-particle pattern) the partners' lateral positions
    are drawn jointly from it, otherwise uniformly over the detector window.
    """
    rng = shot_rng(config.seed, shot_index)
    n = int(rng.poisson(config.mean_pairs))
    t_coll = _collision_times(rng, n, config.collision_time_constant, config.collision_window)
    v_rec = config.beam.recoil_velocity
    g = config.beam.constants.gravity
    sigma = config.velocity_spread_z * v_rec
    v = v_rec + sigma * rng.standard_normal((n, 2))
    detected = rng.random((n, 2)) < config.efficiency
    pos = _lateral_positions(rng, n, config, pattern)
    events = []
    for k in range(n):
        for s, side in enumerate("AB"):
            if detected[k, s]:
                t = float(t_coll[k]) + fall_time(config.drop_height, float(v[k, s]), g)
                events.append(AtomEvent(side, t, float(pos[k, s]), shot_index * 1_000_000 + k))
    # ties (if any) broken by position, never by the truth label
    events.sort(key=lambda e: (e.time, e.side, e.position))
    return events


def simulate_shots(config: ShotConfig, n_shots: int, pattern=None) -> list[list[AtomEvent]]:
    return [simulate_shot(config, i, pattern) for i in range(n_shots)]


def identify_pairs(events: Sequence[AtomEvent], window: float) -> PairingResult:
    """Greedy A-B matching, smallest arrival-time gap first, gaps <= ``window``."""
    a = [e for e in events if e.side == "A"]
    b = [e for e in events if e.side == "B"]
    candidates = []
    for i, ea in enumerate(a):
        for j, eb in enumerate(b):
            gap = abs(ea.time - eb.time)
            if gap <= window:
                candidates.append((gap, i, j))
    candidates.sort()
    used_a, used_b, pairs = set(), set(), []
    for _, i, j in candidates:
        if i in used_a or j in used_b:
            continue
        used_a.add(i)
        used_b.add(j)
        pairs.append((a[i], b[j]))
    ids_a = {e.pair_id for e in a}
    both = sum(1 for e in b if e.pair_id in ids_a)
    correct = sum(1 for ea, eb in pairs if ea.pair_id == eb.pair_id)
    return PairingResult(pairs, both, correct, len(events))


@dataclass
class TimingSummary:
    shots: int
    events: int
    true_pairs_detected: int
    identified: int
    correct: int

    @property
    def true_positive_rate(self) -> float:
        return self.correct / self.true_pairs_detected if self.true_pairs_detected else 1.0

    @property
    def false_pair_rate(self) -> float:
        return (self.identified - self.correct) / self.identified if self.identified else 0.0

    @property
    def correct_pairs_per_shot(self) -> float:
        return self.correct / self.shots if self.shots else 0.0


def run_timing(config: ShotConfig, n_shots: int, window: float, pattern=None) -> TimingSummary:
    """Pool identification results over ``n_shots`` independent shots."""
    tot = TimingSummary(n_shots, 0, 0, 0, 0)
    for i in range(n_shots):
        res = identify_pairs(simulate_shot(config, i, pattern), window)
        tot.events += res.n_events
        tot.true_pairs_detected += res.true_pairs_detected
        tot.identified += res.identified
        tot.correct += res.correct
    return tot


def partner_gaps(shots: Iterable[Sequence[AtomEvent]]) -> np.ndarray:
    """Arrival-time differences ``t_B - t_A`` of fully detected true pairs."""
    gaps = []
    for events in shots:
        by_id: dict[int, dict[str, float]] = {}
        for e in events:
            by_id.setdefault(e.pair_id, {})[e.side] = e.time
        gaps.extend(t["B"] - t["A"] for t in by_id.values() if len(t) == 2)
    return np.asarray(gaps)


def events_to_csv(events: Sequence[AtomEvent], include_truth: bool = True) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["side", "time_s", "position_m"] + (["pair_id"] if include_truth else []))
    for e in events:
        row = [e.side, repr(float(e.time)), repr(float(e.position))]
        w.writerow(row + ([e.pair_id] if include_truth else []))
    return buf.getvalue()


def events_from_csv(text: str) -> list[AtomEvent]:
    rows = list(csv.DictReader(io.StringIO(text)))
    return [AtomEvent(r["side"], float(r["time_s"]), float(r["position_m"]),
                      int(r["pair_id"]) if "pair_id" in r and r["pair_id"] != "" else -1)
            for r in rows]
