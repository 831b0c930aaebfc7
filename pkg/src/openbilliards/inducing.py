"""First-return structures: base sets X, return times, tails, Kac identity.

The base set is class-specific.  Dispersing tables take every collision
(R = 1).  Stadium-like tables take only the first collision of each run on
one circular arc; flowers additionally keep every dispersing collision;
the semi-dispersing rectangle keeps scatterer collisions.  Membership of a
collision therefore depends on the previous collision's component, which is
why extended points carry one step of history.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import FLAG_OK, PhasePoint, step_batch
from .geometry import locate_batch
from .measure import SrbSampler

RETURN_CAP = 100_000


@dataclass(frozen=True)
class ExtendedPhasePoint:
    point: PhasePoint
    current_component: int
    previous_component: int | None = None


@dataclass(frozen=True)
class ReturnSample:
    base: ExtendedPhasePoint
    R: int          # 0 when censored
    censored: bool


def base_mask(table, now, prev):
    """Vectorized base membership from (current, previous) component ids.

    prev entries of -1 mean "no history", which counts as a fresh entry.
    """
    now = np.asarray(now)
    prev = np.asarray(prev)
    tag = table.class_tag
    bg = table._bg
    if tag in ("sinai_torus", "diamond"):
        return np.ones(now.shape, dtype=bool)
    if tag in ("stadium", "squash"):
        return bg.is_arc[now] & (now != prev)
    if tag == "flower":
        dispersing = bg.is_arc[now] & (bg.K[now] > 0)
        focusing_entry = bg.is_arc[now] & (bg.K[now] < 0) & (now != prev)
        return dispersing | focusing_entry
    if tag == "semi_dispersing":
        return bg.is_arc[now]
    raise ValueError(f"no inducing rule for table class {tag!r}")


def in_base(table, x):
    """Membership of an extended phase point in the inducing base X."""
    prev = -1 if x.previous_component is None else x.previous_component
    return bool(base_mask(table, np.array([x.current_component]),
                          np.array([prev]))[0])


def _returns_batch(table, s, phi, comp0, cap):
    """Return times for lanes sitting on base collisions.

    Returns (R, cap_hit, flag_censored): R counts collision-map steps until
    the next base entry; cap_hit lanes are known to exceed cap; flag_censored
    lanes met a singular impact first.
    """
    n = s.size
    R = np.zeros(n, dtype=np.int64)
    cap_hit = np.zeros(n, dtype=bool)
    flagged = np.zeros(n, dtype=bool)
    active = np.arange(n)
    s_a, phi_a, prev_a = s.copy(), phi.copy(), comp0.copy()
    for j in range(1, cap + 1):
        if active.size == 0:
            break
        s1, phi1, _, now, flag = step_batch(table, s_a, phi_a)
        ok = flag == FLAG_OK
        flagged[active[~ok]] = True
        member = base_mask(table, now, prev_a) & ok
        R[active[member]] = j
        keep = ok & ~member
        active = active[keep]
        s_a, phi_a, prev_a = s1[keep], phi1[keep], now[keep]
    cap_hit[active] = True
    return R, cap_hit, flagged


def sample_base_points(table, n_samples, seed, stream=0):
    """Base points by rejection from SRB with one burn-in collision.

    The burn-in step populates the previous-component history; by invariance
    the accepted points follow the SRB measure conditioned on X.  Returns
    (s, phi, comp) arrays of accepted points, the empirical mu(X), and the
    fraction of lanes censored during burn-in.
    """
    sampler = SrbSampler(table, seed, stream)
    s, phi = sampler.sample(n_samples)
    comp_prev = locate_batch(table, s)["component"]
    s1, phi1, _, comp1, flag = step_batch(table, s, phi)
    ok = flag == FLAG_OK
    member = base_mask(table, comp1, comp_prev) & ok
    mu_x = member.sum() / max(ok.sum(), 1)
    return ((s1[member], phi1[member], comp1[member]),
            float(mu_x), float(1.0 - ok.mean()))


def return_time(table, x, cap=RETURN_CAP):
    """Return time of one base point (an ExtendedPhasePoint in X)."""
    if not in_base(table, x):
        raise ValueError("point is not in the inducing base")
    R, cap_hit, flagged = _returns_batch(
        table, np.array([x.point.s]), np.array([x.point.phi]),
        np.array([x.current_component]), cap)
    censored = bool(cap_hit[0] or flagged[0])
    return ReturnSample(base=x, R=int(R[0]), censored=censored)


@dataclass(frozen=True)
class TailReport:
    n: np.ndarray          # 1..n_max
    survival: np.ndarray   # empirical mu_X(R > n)
    count: np.ndarray      # histogram of R == n
    mean_R: float
    n_base: int
    censored_fraction: float   # flag-censored lanes (excluded)
    cap_fraction: float        # lanes still out after cap (kept in survival)


def return_tail(table, n_samples, cap, seed):
    """Empirical complementary return-time distribution on the base."""
    if n_samples < 1:
        raise ValueError("need n_samples >= 1")
    (s, phi, comp), mu_x, burn_cens = sample_base_points(table, n_samples, seed)
    R, cap_hit, flagged = _returns_batch(table, s, phi, comp, cap)
    valid = ~flagged
    n_valid = int(valid.sum())
    R_ok = R[valid & ~cap_hit]
    n_max = int(R_ok.max()) if R_ok.size else 1
    count = np.bincount(R_ok, minlength=n_max + 1)[1:]
    # lanes past the cap exceed every tabulated n
    above = np.concatenate([count[::-1].cumsum()[::-1][1:], [0]])
    survival = (above + int(cap_hit.sum())) / max(n_valid, 1)
    return TailReport(
        n=np.arange(1, n_max + 1),
        survival=survival,
        count=count,
        mean_R=float(R_ok.mean()) if R_ok.size else float("nan"),
        n_base=n_valid,
        censored_fraction=float(flagged.mean()) if R.size else 0.0,
        cap_fraction=float(cap_hit.mean()) if R.size else 0.0,
    )


@dataclass(frozen=True)
class KacReport:
    defect: float
    mu_x: float
    mean_R: float
    n_base: int
    censored_fraction: float


def kac_defect(table, n_samples, cap, seed):
    """|mean_X(R) * mu(X) - 1|: Kac's identity as an empirical defect."""
    if n_samples < 1:
        raise ValueError("need n_samples >= 1")
    (s, phi, comp), mu_x, burn_cens = sample_base_points(table, n_samples, seed)
    R, cap_hit, flagged = _returns_batch(table, s, phi, comp, cap)
    good = ~cap_hit & ~flagged
    mean_r = float(R[good].mean()) if good.any() else float("nan")
    defect = abs(mean_r * mu_x - 1.0)
    cens = (cap_hit | flagged).mean() if R.size else 0.0
    return KacReport(defect=float(defect), mu_x=mu_x, mean_R=mean_r,
                     n_base=int(good.sum()), censored_fraction=float(cens))
