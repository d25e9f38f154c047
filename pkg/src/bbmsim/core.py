"""Exact event-driven simulation of one-dimensional branching Brownian motion.

A particle performs a standard Brownian motion for an Exp(1) lifetime, then
dies and leaves a random number of children at its death position; children
evolve independently. The engine realizes the exact joint law of the particle
positions at the requested snapshot times: within each interval between
consecutive requested times, alive particles are repeatedly split into those
dying inside the interval and those surviving to its end, positions advance
by Gaussian increments with the exact elapsed variance (to the death time or
to the interval end), and offspring are attached at death positions. There is
no time discretization anywhere; snapshot positions are generated once, as
part of the construction, and never re-derived.

Particle indices are assigned in birth order (the root is 0), so a child's
index always exceeds its parent's, and snapshot entries are emitted in
strictly increasing index order. Statistic sums over snapshots therefore run
in particle-index order, making every downstream number bit-reproducible for
a given stream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .sampling import OffspringDistribution, _as_generator

DEFAULT_PARTICLE_CAP = 5_000_000


@dataclass(frozen=True)
class SimConfig:
    """Immutable description of one simulation run.

    snapshot_times must be declared up front: positions at interior times are
    part of the exact path construction, and interpolating after the fact
    would change the realization's law. The optional barrier (slope, offset)
    kills a particle the first time a sampled checkpoint/death position
    exceeds slope*t + offset — a between-checkpoint approximation, never used
    by the verification suite. record_tree=False skips the genealogy arena
    (snapshots only) without touching the draw sequence.
    """

    horizon: float
    snapshot_times: tuple
    offspring: OffspringDistribution
    particle_cap: int = DEFAULT_PARTICLE_CAP
    barrier: Optional[tuple] = None
    record_tree: bool = True

    def __post_init__(self):
        if not (isinstance(self.horizon, (int, float)) and self.horizon > 0.0 and math.isfinite(self.horizon)):
            raise ValueError("horizon must be a positive finite real")
        times = tuple(float(t) for t in self.snapshot_times)
        if any(not (0.0 <= t <= self.horizon) for t in times):
            raise ValueError("snapshot_times must lie within [0, horizon]")
        if len(set(times)) != len(times):
            raise ValueError("snapshot_times contains duplicates")
        if tuple(sorted(times)) != times:
            raise ValueError("snapshot_times must be sorted ascending")
        if int(self.particle_cap) < 1:
            raise ValueError("particle_cap must be >= 1")
        if self.barrier is not None:
            slope, offset = self.barrier
            if not (math.isfinite(float(slope)) and math.isfinite(float(offset))):
                raise ValueError("barrier (slope, offset) must be finite")
            object.__setattr__(self, "barrier", (float(slope), float(offset)))
        object.__setattr__(self, "snapshot_times", times)
        object.__setattr__(self, "horizon", float(self.horizon))


@dataclass(frozen=True)
class Snapshot:
    """Alive population at one requested time: indices and positions X_u(t).

    Entries are sorted by particle index; every entry satisfies
    birth <= t < death against the recorded genealogy.
    """

    time: float
    indices: np.ndarray
    positions: np.ndarray

    @property
    def n(self) -> int:
        return len(self.indices)


@dataclass
class Realization:
    """One simulated genealogy plus its requested snapshots.

    Columnar particle arena (None when the tree was not recorded):
    parent (-1 for the root), rank (1-based child rank, 0 for the root),
    birth_time, death_time (+inf while alive at the horizon), birth_position,
    death_position (position at death, or at the horizon for alive
    particles), child_count (-1 = unset, i.e. alive at the horizon).
    """

    config: SimConfig
    n_particles: int
    snapshots: dict
    extinct_at: Optional[float]
    truncated: bool
    parent: Optional[np.ndarray] = None
    rank: Optional[np.ndarray] = None
    birth_time: Optional[np.ndarray] = None
    death_time: Optional[np.ndarray] = None
    birth_position: Optional[np.ndarray] = None
    death_position: Optional[np.ndarray] = None
    child_count: Optional[np.ndarray] = None

    # -- queries ---------------------------------------------------------

    @property
    def has_tree(self) -> bool:
        return self.parent is not None

    def alive_at(self, t) -> Snapshot:
        """The stored snapshot at t; never recomputes positions."""
        key = float(t)
        try:
            return self.snapshots[key]
        except KeyError:
            raise LookupError(
                f"time {t!r} was not among the requested snapshot times; "
                "positions at unrequested times are not reconstructible"
            ) from None

    def _require_tree(self):
        if not self.has_tree:
            raise RuntimeError("genealogy was not recorded (record_tree=False)")

    def _check_index(self, u) -> int:
        u = int(u)
        if not (0 <= u < self.n_particles):
            raise ValueError(f"particle index {u} out of range [0, {self.n_particles})")
        return u

    def ancestor_at(self, u, s) -> int:
        """Index of the unique ancestor v of u with birth <= s < death."""
        self._require_tree()
        u = self._check_index(u)
        s = float(s)
        if s < 0.0:
            raise ValueError("ancestor time must be >= 0")
        if s >= self.death_time[u]:
            raise ValueError(
                f"particle {u} is dead by time {s}; no ancestor on its line is alive there"
            )
        v = u
        while self.birth_time[v] > s:
            v = int(self.parent[v])
        return v

    def lca_death_time(self, u, v) -> float:
        """Death time of the most recent common ancestor of u and v."""
        self._require_tree()
        u = self._check_index(u)
        v = self._check_index(v)
        if u == v:
            raise ValueError("lca_death_time requires two distinct particles")
        # Parents always carry smaller indices, so repeatedly lifting the
        # larger index walks both lines back to their common prefix.
        while u != v:
            if u > v:
                u = int(self.parent[u])
            else:
                v = int(self.parent[v])
        return float(self.death_time[u])

    def label(self, u) -> tuple:
        """Ulam-Harris path of u: () for the root, else 1-based child ranks."""
        self._require_tree()
        u = self._check_index(u)
        path = []
        while self.rank[u] != 0:
            path.append(int(self.rank[u]))
            u = int(self.parent[u])
        return tuple(reversed(path))

    # -- serialization ---------------------------------------------------

    def dump(self, path):
        """Write the realization as delimited text.

        Particle rows:  P <label> <parent> <birth_time> <death_time>
                        <birth_position> <death_position> <child_count>
        Snapshot rows:  S <time> <particle index> <position>
        Tab-separated. The label is dot-separated child ranks (empty for the
        root); death_time is "inf" while alive at the horizon; child_count is
        -1 while unset. Snapshot rows follow the particle rows, in time order
        then index order. Floats use repr (shortest round-trip).
        """
        lines = []
        if self.has_tree:
            for u in range(self.n_particles):
                lab = ".".join(str(r) for r in self.label(u))
                lines.append(
                    "P\t%s\t%d\t%r\t%r\t%r\t%r\t%d"
                    % (
                        lab,
                        int(self.parent[u]),
                        float(self.birth_time[u]),
                        float(self.death_time[u]),
                        float(self.birth_position[u]),
                        float(self.death_position[u]),
                        int(self.child_count[u]),
                    )
                )
        for t in sorted(self.snapshots):
            snap = self.snapshots[t]
            for i in range(snap.n):
                lines.append(
                    "S\t%r\t%d\t%r" % (t, int(snap.indices[i]), float(snap.positions[i]))
                )
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")


def simulate(config: SimConfig, rng) -> Realization:
    """Run one exact realization of the branching Brownian motion.

    Within each interval between consecutive requested times the engine
    repeats: particles whose pre-drawn death time falls inside the interval
    advance exactly to their death and branch; the rest advance exactly to
    the interval end. Draws occur in a fixed order per wave (survivor
    increments, dier increments, offspring counts, child lifetimes), so the
    whole realization is a deterministic function of the stream. If the
    alive count ever exceeds particle_cap the run stops, truncated is set,
    and only snapshots of fully processed intervals are kept.
    """
    gen = _as_generator(rng)
    offspring = config.offspring
    snap_set = set(config.snapshot_times)
    checkpoints = sorted({t for t in config.snapshot_times if t > 0.0} | {config.horizon})
    barrier = config.barrier
    record = config.record_tree

    snapshots = {}
    if 0.0 in snap_set:
        snapshots[0.0] = Snapshot(0.0, np.zeros(1, dtype=np.int64), np.zeros(1))

    # Frontier: ids, positions at per-particle current times, current times,
    # and pre-drawn absolute death times (drawing the Exp(1) lifetime at
    # birth is equivalent to drawing it at death, by memorylessness).
    ids = np.zeros(1, dtype=np.int64)
    pos = np.zeros(1)
    ctime = np.zeros(1)
    dtime = np.array([gen.exponential(1.0)])

    next_id = 1
    truncated = False
    extinct_at = None
    last_death = 0.0

    if record:
        parent_chunks = [np.array([-1], dtype=np.int64)]
        rank_chunks = [np.zeros(1, dtype=np.int32)]
        btime_chunks = [np.zeros(1)]
        bpos_chunks = [np.zeros(1)]
        death_chunks = []  # (ids, death_time, death_position, child_count)

    for t1 in checkpoints:
        if len(ids) == 0:
            if t1 in snap_set:
                snapshots[t1] = Snapshot(t1, np.empty(0, dtype=np.int64), np.empty(0))
            continue

        out_ids, out_pos, out_dt = [], [], []
        out_count = 0
        a_ids, a_pos, a_ct, a_dt = ids, pos, ctime, dtime

        while len(a_ids) > 0:
            die = a_dt <= t1
            surv = ~die
            s_ids = a_ids[surv]
            s_dt = a_dt[surv]
            s_pos = a_pos[surv] + gen.standard_normal(len(s_ids)) * np.sqrt(t1 - a_ct[surv])
            d_ids = a_ids[die]
            d_dt = a_dt[die]
            d_pos = a_pos[die] + gen.standard_normal(len(d_ids)) * np.sqrt(d_dt - a_ct[die])
            counts = offspring.sample(gen, size=len(d_ids)).astype(np.int64)
            if barrier is not None and len(d_ids):
                # Killed at death: a position beyond the line leaves no offspring.
                counts[d_pos > barrier[0] * d_dt + barrier[1]] = 0
            total = int(counts.sum())
            lifetimes = gen.exponential(1.0, size=total)

            if len(d_dt):
                last_death = max(last_death, float(d_dt.max()))
                if record:
                    death_chunks.append((d_ids, d_dt, d_pos, counts))

            c_parent = np.repeat(d_ids, counts)
            c_btime = np.repeat(d_dt, counts)
            c_bpos = np.repeat(d_pos, counts)
            c_ids = next_id + np.arange(total, dtype=np.int64)
            next_id += total

            if record and total:
                sibling_start = np.cumsum(counts) - counts
                c_rank = (
                    np.arange(total, dtype=np.int64) - np.repeat(sibling_start, counts) + 1
                ).astype(np.int32)
                parent_chunks.append(c_parent)
                rank_chunks.append(c_rank)
                btime_chunks.append(c_btime)
                bpos_chunks.append(c_bpos)

            if barrier is not None and len(s_ids):
                hit = s_pos > barrier[0] * t1 + barrier[1]
                if hit.any():
                    k_ids = s_ids[hit]
                    if record:
                        death_chunks.append(
                            (
                                k_ids,
                                np.full(len(k_ids), t1),
                                s_pos[hit],
                                np.zeros(len(k_ids), dtype=np.int64),
                            )
                        )
                    last_death = max(last_death, t1)
                    keep = ~hit
                    s_ids, s_pos, s_dt = s_ids[keep], s_pos[keep], s_dt[keep]

            if len(s_ids):
                out_ids.append(s_ids)
                out_pos.append(s_pos)
                out_dt.append(s_dt)
                out_count += len(s_ids)

            a_ids, a_pos, a_ct = c_ids, c_bpos, c_btime
            a_dt = c_btime + lifetimes

            if out_count + len(a_ids) > config.particle_cap:
                truncated = True
                break
        if truncated:
            break

        if out_count:
            ids = np.concatenate(out_ids)
            pos = np.concatenate(out_pos)
            dtime = np.concatenate(out_dt)
        else:
            ids = np.empty(0, dtype=np.int64)
            pos = np.empty(0)
            dtime = np.empty(0)
        ctime = np.full(len(ids), t1)

        if t1 in snap_set:
            snapshots[t1] = Snapshot(t1, ids.copy(), pos.copy())
        if len(ids) == 0 and extinct_at is None:
            extinct_at = last_death

    real = Realization(
        config=config,
        n_particles=next_id,
        snapshots=snapshots,
        extinct_at=extinct_at,
        truncated=truncated,
    )
    if record:
        parent = np.concatenate(parent_chunks)
        n = len(parent)
        death_time = np.full(n, np.inf)
        death_pos = np.full(n, np.nan)
        child_count = np.full(n, -1, dtype=np.int64)
        for d_ids, d_dt, d_pos, counts in death_chunks:
            death_time[d_ids] = d_dt
            death_pos[d_ids] = d_pos
            child_count[d_ids] = counts
        if not truncated and len(ids):
            # Alive at the horizon: death stays open, endpoint position is
            # the exact position at the horizon.
            death_pos[ids] = pos
        real.parent = parent
        real.rank = np.concatenate(rank_chunks)
        real.birth_time = np.concatenate(btime_chunks)
        real.birth_position = np.concatenate(bpos_chunks)
        real.death_time = death_time
        real.death_position = death_pos
        real.child_count = child_count
    return real
