"""Open-system statistics: the hole-hitting point process and its diagnostics.

A hole of boundary measure mu turns each orbit into a point process on the
normalized time axis: a hit at collision i contributes the point i * mu.
This module collects those processes over SRB-sampled orbits and computes
the first-hitting survival law, KS distance to Exp(1), interval counts with
total-variation distance to Poisson, short-return fractions in induced time,
and the quasi-section defect of hole excursions.

Everything is driven by one batch engine; initial conditions are drawn once
per experiment (orbit i always owns sampler draws 2i, 2i+1), so results are
bit-identical no matter how the work would be scheduled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import FLAG_OK, step_batch
from .geometry import locate_batch
from .inducing import base_mask
from .measure import SrbSampler, ks_statistic

TV_TAIL_K = 20   # Poisson mass beyond this is < 1e-13 for lambda <= 3


@dataclass(frozen=True)
class HittingData:
    """Hit records for a batch of orbits against one hole."""

    mu: float
    n_orbits: int
    horizon: int
    t_max: float
    seed: int
    hit_orbit: np.ndarray      # sorted by (orbit, index)
    hit_index: np.ndarray      # collision indices >= 1
    censor_step: np.ndarray    # per orbit; horizon + 1 when never censored
    censor_kind: np.ndarray    # flag code at censoring, 0 otherwise
    hit_induced: np.ndarray = None    # induced-step counter at each hit
    final_induced: np.ndarray = None  # per-orbit induced counter at the end

    @property
    def normalized_times(self):
        return self.hit_index * self.mu

    def series(self, orbit):
        """Normalized hit times of one orbit (strictly increasing)."""
        sel = self.hit_orbit == orbit
        return self.hit_index[sel] * self.mu

    def first_hits(self):
        """Per-orbit first normalized hit time; +inf when the orbit never
        hits within the horizon."""
        fh = np.full(self.n_orbits, np.inf)
        if self.hit_orbit.size:
            orb, first_pos = np.unique(self.hit_orbit, return_index=True)
            fh[orb] = self.hit_index[first_pos] * self.mu
        return fh

    def censored_before_first_hit(self):
        """Orbits whose record ends (censoring) before any hit occurred."""
        has_hit = np.zeros(self.n_orbits, dtype=bool)
        has_hit[self.hit_orbit] = True
        return ~has_hit & (self.censor_step <= self.horizon)


def collect_hitting(table, hole, n_orbits, t_max, seed, track_induced=False):
    """March n_orbits SRB-seeded orbits and record hole hits.

    The horizon is ceil(t_max / mu) collisions.  Hits at flagged (censored)
    collisions are not recorded and the orbit stops there.  With
    track_induced, each hit also carries the number of inducing-base entries
    seen so far, which is what short-return and quasi-section statistics
    consume.
    """
    if n_orbits < 1:
        raise ValueError("need n_orbits >= 1")
    mu = hole.measure
    horizon = int(math.ceil(t_max / mu)) if t_max > 0 else 0
    s, phi = SrbSampler(table, seed).sample(n_orbits)
    prev = locate_batch(table, s)["component"]

    censor_step = np.full(n_orbits, horizon + 1, dtype=np.int64)
    censor_kind = np.zeros(n_orbits, dtype=np.int8)
    counter = np.zeros(n_orbits, dtype=np.int64) if track_induced else None
    chunks_orbit, chunks_index, chunks_c = [], [], []

    alive = np.arange(n_orbits)
    for j in range(1, horizon + 1):
        if alive.size == 0:
            break
        s1, phi1, tau, now, flag = step_batch(table, s, phi)
        ok = flag == FLAG_OK
        if not ok.all():
            dead = alive[~ok]
            censor_step[dead] = j
            censor_kind[dead] = flag[~ok]
        alive = alive[ok]
        s, phi = s1[ok], phi1[ok]
        if track_induced:
            member = base_mask(table, now[ok], prev[ok])
            counter[alive[member]] += 1
        prev = now[ok]
        hits = hole.contains(s)
        if hits.any():
            ho = alive[hits]
            chunks_orbit.append(ho)
            chunks_index.append(np.full(ho.size, j, dtype=np.int64))
            if track_induced:
                chunks_c.append(counter[ho])

    if chunks_orbit:
        hit_orbit = np.concatenate(chunks_orbit)
        hit_index = np.concatenate(chunks_index)
        order = np.lexsort((hit_index, hit_orbit))
        hit_orbit, hit_index = hit_orbit[order], hit_index[order]
        hit_c = np.concatenate(chunks_c)[order] if track_induced else None
    else:
        hit_orbit = np.empty(0, dtype=np.int64)
        hit_index = np.empty(0, dtype=np.int64)
        hit_c = np.empty(0, dtype=np.int64) if track_induced else None

    return HittingData(
        mu=mu, n_orbits=n_orbits, horizon=horizon, t_max=t_max, seed=seed,
        hit_orbit=hit_orbit, hit_index=hit_index,
        censor_step=censor_step, censor_kind=censor_kind,
        hit_induced=hit_c,
        final_induced=counter.copy() if track_induced else None,
    )


@dataclass(frozen=True)
class SurvivalCurve:
    t: np.ndarray
    empirical: np.ndarray
    exponential: np.ndarray
    n_orbits: int
    excluded_fraction: float


def survival_curve(data, t_grid):
    """Empirical P(first normalized hit > t) next to e^(-t).

    Orbits censored before their first hit are excluded and tallied; orbits
    that never hit within the horizon survive past every grid point (the
    grid must not extend beyond t_max).
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.size and t_grid.max() > data.t_max + 1e-12:
        raise ValueError("survival grid extends beyond the collected horizon")
    excluded = data.censored_before_first_hit()
    fh = data.first_hits()[~excluded]
    emp = (fh[None, :] > t_grid[:, None]).mean(axis=1)
    return SurvivalCurve(
        t=t_grid, empirical=emp, exponential=np.exp(-t_grid),
        n_orbits=int(fh.size),
        excluded_fraction=float(excluded.mean()),
    )


def ks_exp1(first_hits):
    """KS statistic of a first-hitting sample against Exp(1)."""
    x = np.sort(np.asarray(first_hits, dtype=float))
    if x.size == 0:
        raise ValueError("empty sample")
    return ks_statistic(x, 1.0 - np.exp(-x))


def poisson_pmf(lam, kmax):
    k = np.arange(kmax)
    logs = -lam + k * math.log(lam) - np.cumsum(
        np.concatenate([[0.0], np.log(np.arange(1, kmax))]))
    return np.exp(logs)


@dataclass(frozen=True)
class CountReport:
    intervals: tuple
    counts: np.ndarray        # (n_eligible, n_intervals)
    tv: np.ndarray            # TV distance to Poisson(len) per interval
    correlations: np.ndarray  # Pearson matrix between interval counts
    means: np.ndarray
    n_orbits: int
    excluded_fraction: float


def count_statistics(data, intervals):
    """Interval counts versus the Poisson limit law.

    Counts hits with normalized time in (a, b] per orbit, skipping (and
    tallying) orbits censored before the largest endpoint.  TV distances lump
    the Poisson tail at k = 20; correlations are plain Pearson between the
    per-orbit counts of interval pairs.
    """
    iv = [(float(a), float(b)) for a, b in intervals]
    if not iv:
        raise ValueError("need at least one interval")
    for a, b in iv:
        if not (0.0 <= a < b):
            raise ValueError(f"bad interval ({a}, {b})")
    for i in range(len(iv)):
        for j in range(i + 1, len(iv)):
            lo = max(iv[i][0], iv[j][0])
            hi = min(iv[i][1], iv[j][1])
            if lo < hi:
                raise ValueError("intervals overlap")
    t_end = max(b for _, b in iv)
    if t_end > data.t_max + 1e-12:
        raise ValueError("interval extends beyond the collected horizon")

    censor_t = data.censor_step * data.mu
    eligible = censor_t > t_end
    times = data.normalized_times
    counts = np.empty((int(eligible.sum()), len(iv)), dtype=np.int64)
    for k, (a, b) in enumerate(iv):
        sel = (times > a) & (times <= b)
        per_orbit = np.bincount(data.hit_orbit[sel], minlength=data.n_orbits)
        counts[:, k] = per_orbit[eligible]

    tv = np.empty(len(iv))
    for k, (a, b) in enumerate(iv):
        lam = b - a
        pmf = poisson_pmf(lam, TV_TAIL_K)
        emp = np.bincount(np.minimum(counts[:, k], TV_TAIL_K),
                          minlength=TV_TAIL_K + 1) / max(counts.shape[0], 1)
        model = np.concatenate([pmf, [max(1.0 - pmf.sum(), 0.0)]])
        tv[k] = 0.5 * np.abs(emp - model).sum()

    if len(iv) > 1 and counts.shape[0] > 1:
        with np.errstate(invalid="ignore"):
            corr = np.corrcoef(counts.T)
    else:
        corr = np.ones((len(iv), len(iv)))
    return CountReport(
        intervals=tuple(iv), counts=counts, tv=tv, correlations=corr,
        means=counts.mean(axis=0) if counts.size else np.zeros(len(iv)),
        n_orbits=counts.shape[0],
        excluded_fraction=float(1.0 - eligible.mean()),
    )


@dataclass(frozen=True)
class ShortReturnReport:
    fraction: float
    p: int
    n_pairs: int
    mu: float
    n_orbits: int
    censored_fraction: float


def short_return_fraction(table, hole, epsilon=0.1, n_hits=20000, seed=0,
                          t_max=20.0):
    """Fraction of hole hits whose next hit comes within p induced steps.

    p = ceil(mu^-(1-epsilon)).  Induced steps are entries into the class's
    inducing base X between the two hits (plain collisions where R = 1).
    The orbit budget is sized from the unit hit rate: hits arrive at rate
    one per normalized time unit, so about n_hits/t_max orbits suffice; the
    schedule is fixed up front for determinism.
    """
    mu = hole.measure
    p = math.ceil(mu ** -(1.0 - epsilon))
    n_orbits = max(int(math.ceil(1.3 * n_hits / t_max)), 1) if t_max > 0 else 1
    data = collect_hitting(table, hole, n_orbits, t_max, seed,
                           track_induced=True)
    if data.hit_orbit.size == 0:
        raise ValueError("no hole hits collected; cannot form a fraction")
    same = data.hit_orbit[1:] == data.hit_orbit[:-1]
    gaps = data.hit_induced[1:][same] - data.hit_induced[:-1][same]
    if gaps.size == 0:
        raise ValueError("no consecutive hit pairs collected")
    return ShortReturnReport(
        fraction=float((gaps <= p).mean()),
        p=p, n_pairs=int(gaps.size), mu=mu, n_orbits=n_orbits,
        censored_fraction=float((data.censor_step <= data.horizon).mean()),
    )


@dataclass(frozen=True)
class QuasiSectionReport:
    defect: float
    n_excursions_with_hit: int
    n_multi: int
    host_kind: str
    mu: float
    censored_fraction: float


def quasi_section_defect(table, hole, n_orbits, seed, t_max=20.0):
    """Fraction of hole-visiting excursions with two or more hits.

    An excursion is the block of collisions between consecutive entries into
    the inducing base X (a hit at an entry belongs to the new block).  Only
    completed excursions count: the orbit must re-enter X after the hits.
    For R = 1 classes every block is a single collision, so the defect is
    exactly zero.
    """
    data = collect_hitting(table, hole, n_orbits, t_max, seed,
                           track_induced=True)
    host_kind = table.components[locate_batch(
        table, np.array([hole.center_s]))["component"][0]].kind
    if data.hit_orbit.size == 0:
        return QuasiSectionReport(0.0, 0, 0, host_kind, data.mu,
                                  float((data.censor_step <= data.horizon).mean()))
    # group hits by (orbit, excursion id); an excursion is complete when the
    # orbit's final induced counter moved past it
    complete = data.hit_induced < data.final_induced[data.hit_orbit]
    key_orbit = data.hit_orbit[complete]
    key_exc = data.hit_induced[complete]
    if key_orbit.size == 0:
        return QuasiSectionReport(0.0, 0, 0, host_kind, data.mu,
                                  float((data.censor_step <= data.horizon).mean()))
    pairs = np.stack([key_orbit, key_exc], axis=1)
    _, sizes = np.unique(pairs, axis=0, return_counts=True)
    n_hit_exc = int(sizes.size)
    n_multi = int((sizes >= 2).sum())
    return QuasiSectionReport(
        defect=n_multi / n_hit_exc,
        n_excursions_with_hit=n_hit_exc,
        n_multi=n_multi,
        host_kind=host_kind,
        mu=data.mu,
        censored_fraction=float((data.censor_step <= data.horizon).mean()),
    )
