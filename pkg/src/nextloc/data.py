"""Check-in ingestion, filtering, train/test structuring, and synthetic data.

A dataset is built from flat check-in records and keeps both orderings of the
same events: per-user trajectories (for next-place training) and per-place
visitor histories (for next-visitor training).  The synthetic generator plants
recoverable structure — paired "clone" users sharing a POI pool, per-POI time
profiles, uniform noise — so the association machinery can be verified against
known ground truth.
"""

from __future__ import annotations

import dataclasses
import json
import math
import os
from datetime import datetime, timezone
from typing import NamedTuple

import numpy as np


class DataError(ValueError):
    """Unusable input data or an infeasible synthetic specification."""


class CheckIn(NamedTuple):
    user: int
    t: int          # seconds since epoch, UTC
    lat: float
    lon: float
    poi: int


class VisitEvent(NamedTuple):
    poi: int
    user: int
    slot: int       # time-slot-of-day index in [0, slots)
    weekday: int    # Monday = 0
    t: int


# Column orders of the supported raw formats.  Both use tab-separated lines
# with ISO-8601 UTC timestamps; they differ only in where the POI id sits.
FORMATS = {
    "gowalla": ("user", "time", "lat", "lon", "poi"),
    "foursquare": ("user", "poi", "lat", "lon", "time"),
}

SECONDS_PER_DAY = 86400
# 1970-01-01 was a Thursday; shift so that Monday maps to 0.
_EPOCH_WEEKDAY_OFFSET = 3


def parse_timestamp(text: str) -> int:
    """ISO-8601 timestamp string to integer epoch seconds (UTC)."""
    dt = datetime.fromisoformat(text.replace("Z", "+00:00"))
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(dt.timestamp())


def format_timestamp(t: int) -> str:
    return datetime.fromtimestamp(int(t), tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def discretize_time(t: int, slots: int = 24) -> tuple[int, int]:
    """Map an epoch timestamp to (slot-of-day, weekday), both UTC-based."""
    slot = (t % SECONDS_PER_DAY) * slots // SECONDS_PER_DAY
    weekday = (t // SECONDS_PER_DAY + _EPOCH_WEEKDAY_OFFSET) % 7
    return int(slot), int(weekday)


def day_index(t: int) -> int:
    """Calendar day bucket (UTC) used for same-day co-visit counting."""
    return int(t // SECONDS_PER_DAY)


@dataclasses.dataclass
class ParseResult:
    records: list[CheckIn]
    user_ids: dict[str, int]   # raw id -> dense index, first-seen order
    poi_ids: dict[str, int]
    malformed: int
    total_lines: int


def parse_checkin_file(path, fmt: str = "gowalla",
                       user_ids: dict[str, int] | None = None,
                       poi_ids: dict[str, int] | None = None) -> ParseResult:
    """Parse a tab-separated check-in file into dense-indexed records.

    Dense ids are assigned in first-seen order, or taken from the optional
    preassigned dictionaries (which lets an exported dataset re-parse to the
    exact same indices).  Malformed lines are counted, not fatal, unless they
    exceed 1% of the file — that usually means the wrong format was chosen.
    """
    if fmt not in FORMATS:
        raise DataError(f"unknown format {fmt!r}; expected one of {sorted(FORMATS)}")
    columns = FORMATS[fmt]
    users = dict(user_ids) if user_ids else {}
    pois = dict(poi_ids) if poi_ids else {}
    records: list[CheckIn] = []
    malformed = 0
    total = 0
    try:
        fh = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    with fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            total += 1
            fields = line.split("\t")
            if len(fields) != 5:
                malformed += 1
                continue
            row = dict(zip(columns, fields))
            try:
                t = parse_timestamp(row["time"])
                lat = float(row["lat"])
                lon = float(row["lon"])
            except (ValueError, KeyError):
                malformed += 1
                continue
            if not (t > 0 and -90.0 <= lat <= 90.0 and -180.0 < lon <= 180.0):
                malformed += 1
                continue
            u = users.setdefault(row["user"], len(users))
            p = pois.setdefault(row["poi"], len(pois))
            records.append(CheckIn(u, t, lat, lon, p))
    if total and malformed * 100 > total:
        raise DataError(
            f"{path}: {malformed}/{total} malformed lines (>1%); wrong --format?")
    if not records:
        raise DataError(f"{path}: no usable check-in records")
    return ParseResult(records, users, pois, malformed, total)


def _compact(records: list[CheckIn]) -> tuple[list[CheckIn], dict[int, int], dict[int, int]]:
    """Reassign dense ids in first-seen order of the given record stream."""
    user_map: dict[int, int] = {}
    poi_map: dict[int, int] = {}
    out = []
    for r in records:
        u = user_map.setdefault(r.user, len(user_map))
        p = poi_map.setdefault(r.poi, len(poi_map))
        out.append(CheckIn(u, r.t, r.lat, r.lon, p))
    return out, user_map, poi_map


@dataclasses.dataclass
class FilterResult:
    records: list[CheckIn]
    user_map: dict[int, int]   # old dense id -> new dense id (dropped ids absent)
    poi_map: dict[int, int]


def filter_inactive_users(records: list[CheckIn], min_count: int = 100) -> FilterResult:
    """Drop users with fewer than min_count records and recompact dense ids.

    POIs left with zero records disappear from the index as a side effect of
    recompaction.
    """
    if min_count < 1:
        raise DataError("min_count must be >= 1")
    counts: dict[int, int] = {}
    for r in records:
        counts[r.user] = counts.get(r.user, 0) + 1
    kept = [r for r in records if counts[r.user] >= min_count]
    if not kept:
        raise DataError(f"no users with at least {min_count} records")
    compacted, user_map, poi_map = _compact(kept)
    return FilterResult(compacted, user_map, poi_map)


def filter_rare_pois(records: list[CheckIn], min_count: int) -> FilterResult:
    """Optional mirror of the user filter for rarely visited POIs (off by default)."""
    if min_count < 1:
        raise DataError("min_count must be >= 1")
    counts: dict[int, int] = {}
    for r in records:
        counts[r.poi] = counts.get(r.poi, 0) + 1
    kept = [r for r in records if counts[r.poi] >= min_count]
    if not kept:
        raise DataError(f"no POIs with at least {min_count} records")
    compacted, user_map, poi_map = _compact(kept)
    return FilterResult(compacted, user_map, poi_map)


def split_point(n_events: int, ratio: float) -> int:
    """Train-event count for a user with n_events records: ceil(ratio * n)."""
    return math.ceil(ratio * n_events)


def make_windows(events: list, window: int) -> list[list]:
    """Cut a sequence into non-overlapping chunks of the window length.

    A shorter tail is kept when it still has an input step and a target
    (length >= 2), otherwise dropped.
    """
    out = []
    for start in range(0, len(events), window):
        chunk = events[start:start + window]
        if len(chunk) >= 2:
            out.append(chunk)
    return out


@dataclasses.dataclass
class Dataset:
    """Both orderings of one event set, split chronologically per user."""
    n_users: int
    n_pois: int
    split_ratio: float
    window: int
    slots: int
    records: list[CheckIn]                 # all events, global (t, user, poi) order
    train: list[list[CheckIn]]             # per user
    test: list[list[CheckIn]]              # per user
    poi_train: list[list[VisitEvent]]      # per POI
    poi_test: list[list[VisitEvent]]
    user_windows: list[list[CheckIn]]      # training sub-sequences, all users
    poi_windows: list[list[VisitEvent]]
    user_raw: list[str]
    poi_raw: list[str]
    meta: dict

    @property
    def cold_pois(self) -> list[int]:
        return [p for p, h in enumerate(self.poi_train) if not h]

    def train_poi_sets(self) -> list[set[int]]:
        """Distinct POIs each user visits in the training split."""
        return [{r.poi for r in evs} for evs in self.train]


def build_dataset(records: list[CheckIn], split_ratio: float = 0.8,
                  window: int = 20, slots: int = 24,
                  user_raw: list[str] | None = None,
                  poi_raw: list[str] | None = None,
                  meta: dict | None = None) -> Dataset:
    if not records:
        raise DataError("no records to build a dataset from")
    n_users = max(r.user for r in records) + 1
    n_pois = max(r.poi for r in records) + 1
    ordered = sorted(records, key=lambda r: (r.t, r.user, r.poi))

    by_user: list[list[CheckIn]] = [[] for _ in range(n_users)]
    for r in ordered:
        by_user[r.user].append(r)

    train: list[list[CheckIn]] = []
    test: list[list[CheckIn]] = []
    train_cut_ts: dict[int, int] = {}
    for u, events in enumerate(by_user):
        n_train = split_point(len(events), split_ratio)
        if n_train < 2:
            raise DataError(f"user {u} has {n_train} train events; need at least 2")
        train.append(events[:n_train])
        test.append(events[n_train:])
        train_cut_ts[u] = events[n_train - 1].t

    poi_train: list[list[VisitEvent]] = [[] for _ in range(n_pois)]
    poi_test: list[list[VisitEvent]] = [[] for _ in range(n_pois)]
    train_counts = [len(t) for t in train]
    seen = [0] * n_users
    for r in ordered:
        slot, weekday = discretize_time(r.t, slots)
        ev = VisitEvent(r.poi, r.user, slot, weekday, r.t)
        seen[r.user] += 1
        if seen[r.user] <= train_counts[r.user]:
            poi_train[r.poi].append(ev)
        else:
            poi_test[r.poi].append(ev)

    user_windows = [w for evs in train for w in make_windows(evs, window)]
    poi_windows = [w for evs in poi_train for w in make_windows(evs, window)]

    return Dataset(
        n_users=n_users, n_pois=n_pois, split_ratio=split_ratio,
        window=window, slots=slots, records=ordered,
        train=train, test=test, poi_train=poi_train, poi_test=poi_test,
        user_windows=user_windows, poi_windows=poi_windows,
        user_raw=user_raw or [f"u{i}" for i in range(n_users)],
        poi_raw=poi_raw or [f"p{i}" for i in range(n_pois)],
        meta=meta or {},
    )


# ---------------------------------------------------------------------------
# Synthetic data with planted structure.
# ---------------------------------------------------------------------------

@dataclasses.dataclass
class SyntheticSpec:
    """Knobs for the generator; defaults match the verification battery.

    Users follow a daily routine over a small personal repertoire of POIs,
    visiting each near its characteristic hour on a random subset of days.
    The repertoire is split into two alternating day-plans; one coin per day
    picks which plan is on, so the start of a day is ambiguous from one's own
    history alone.  A fraction of users come in clone pairs: both repertoires
    are drawn from one shared pool (mostly common POIs plus a few exclusive
    to each member), the pair shares its outing draws and its daily plan coin
    (they go out *together*, so same-day co-visitation singles the partner
    out and the partner's morning reveals one's own evening), and late in the
    pair's timeline each member starts visiting the partner's exclusive POIs
    — exactly the events a purely personal model cannot predict.  Everyone
    else pairs into companions, a weaker tier with the same habits over a
    smaller shared set.  Noise events redirect a fixed share of visits to a
    small per-user palette of unrelated POIs, keeping the shared-pool share
    of clone visits at 1 - noise_rate.
    """
    n_users: int = 40
    n_pois: int = 30
    events_per_user: int = 120
    clone_fraction: float = 0.3
    pool_overlap: float = 0.9     # required minimum shared-pool share of clone visits
    noise_rate: float = 0.1
    n_zones: int = 3
    repertoire_size: int = 6
    exclusive_per_user: int = 1
    companion_shared: int = 4     # designed repertoire overlap of a companion pair
    noise_palette: int = 3
    adopt_count: int = 5          # late partner-POI visits planted per clone user
    drift_count: int = 5          # late companion-POI visits planted per non-clone user
    explore_count: int = 7        # late solo visits to one brand-new place, non-clones
    slot_jitter: int = 2          # visit slot scatter around a place's peak slot
    split_plans: bool = True      # alternate the repertoire over two day-plans
    go_prob: float = 0.3          # chance of a routine visit on a plan-active day
    off_prob: float = 0.1         # chance of one on an off-plan or off-profile day
    split_ratio: float = 0.8
    window: int = 20
    slots: int = 24
    base_day: int = 14613         # 2010-01-04, a Monday

    @property
    def pool_size(self) -> int:
        return self.repertoire_size - self.exclusive_per_user + 2 * self.exclusive_per_user


def _slot_gap(a: int, b: int, slots: int) -> int:
    """Circular distance between two time slots."""
    return min((a - b) % slots, (b - a) % slots)


def _validate_spec(spec: SyntheticSpec) -> None:
    if spec.n_zones < 1:
        raise DataError("infeasible synthetic spec: need at least one zone")
    max_zone = -(-spec.n_pois // spec.n_zones)
    min_zone = spec.n_pois - max_zone * (spec.n_zones - 1)
    core = spec.repertoire_size - spec.exclusive_per_user
    checks = [
        (spec.n_users >= 2, "need at least 2 users"),
        (min_zone >= spec.pool_size,
         f"clone pool of {spec.pool_size} does not fit a zone of {min_zone} POIs"),
        (min_zone >= spec.repertoire_size, "repertoire does not fit a zone"),
        (core >= 1, "repertoire must keep at least one shared POI"),
        (spec.noise_rate + spec.pool_overlap <= 1.0 + 1e-9,
         f"noise rate {spec.noise_rate} breaks the {spec.pool_overlap} pool-share floor"),
        (spec.n_pois - spec.pool_size >= spec.noise_palette or spec.noise_rate == 0,
         "not enough POIs outside a clone pool to draw noise from"),
        (spec.events_per_user >= 10, "too few events per user"),
        (0 <= spec.clone_fraction <= 1.0, "clone_fraction must be in [0,1]"),
        (spec.explore_count >= 0, "explore_count must be >= 0"),
        (1 <= spec.companion_shared < spec.repertoire_size,
         "companion_shared must leave each companion a unique POI"),
        (min_zone >= 2 * spec.repertoire_size - spec.companion_shared,
         "companion pool does not fit a zone"),
        (max(spec.adopt_count, spec.drift_count + spec.explore_count)
         <= spec.events_per_user
         - split_point(spec.events_per_user, spec.split_ratio) - 1,
         "planted late visits exceed the test segment"),
        (1 <= spec.slots and max_zone <= spec.slots,
         "zone POIs need distinct time slots; increase slots or zones"),
        (0 <= spec.slot_jitter <= spec.slots // 2,
         "slot_jitter must be between 0 and half the slot count"),
        (not spec.split_plans or spec.repertoire_size >= 2,
         "alternating day-plans need a repertoire of at least 2"),
        (0.0 < spec.go_prob <= 1.0 and 0.0 <= spec.off_prob <= spec.go_prob,
         "need 0 < go_prob <= 1 and 0 <= off_prob <= go_prob"),
    ]
    for ok, msg in checks:
        if not ok:
            raise DataError(f"infeasible synthetic spec: {msg}")


def generate_synthetic(spec: SyntheticSpec, seed: int) -> Dataset:
    """Deterministic planted-structure dataset; see SyntheticSpec for the design."""
    _validate_spec(spec)
    rng = np.random.default_rng(seed)
    M, N, E = spec.n_users, spec.n_pois, spec.events_per_user

    # POIs: zone blocks, coordinates around a zone centre, one characteristic
    # hour each (distinct within a zone), and an active-day profile.
    zone_of_poi = np.repeat(np.arange(spec.n_zones), -(-N // spec.n_zones))[:N]
    zone_pois = [np.flatnonzero(zone_of_poi == z) for z in range(spec.n_zones)]
    lat = np.empty(N)
    lon = np.empty(N)
    peak_slot = np.empty(N, dtype=int)
    for z, members in enumerate(zone_pois):
        lat[members] = 40.0 + 0.09 * z + rng.uniform(-0.004, 0.004, members.size)
        lon[members] = -75.0 + rng.uniform(-0.005, 0.005, members.size)
        peak_slot[members] = rng.choice(spec.slots, size=members.size, replace=False)
    day_profiles = [tuple(range(7)), tuple(range(5)), (5, 6)]
    profile_of_poi = rng.choice(len(day_profiles), size=N, p=[0.5, 0.3, 0.2])

    # Users: clone pairs first (both members in the same zone), then loners.
    n_pairs = int(M * spec.clone_fraction) // 2
    clone_pairs = [(2 * k, 2 * k + 1) for k in range(n_pairs)]
    partner = {a: b for a, b in clone_pairs} | {b: a for a, b in clone_pairs}
    # Everyone else pairs up too — companions, a weaker tier of relatedness:
    # they share a few repertoire POIs and keep a couple of their own, while
    # clone pairs share a designed pool covering nearly all their visits.
    companion_pairs = [(u, u + 1) for u in range(2 * n_pairs, M - 1, 2)]
    buddy = dict(partner)
    for a, b in companion_pairs:
        buddy[a], buddy[b] = b, a
    zone_of_user = np.empty(M, dtype=int)
    for k, (a, b) in enumerate(clone_pairs):
        zone_of_user[a] = zone_of_user[b] = k % spec.n_zones
    for j, (a, b) in enumerate(companion_pairs):
        zone_of_user[a] = zone_of_user[b] = (n_pairs + j) % spec.n_zones
    if M % 2 and M > 2 * n_pairs:
        zone_of_user[M - 1] = (n_pairs + len(companion_pairs)) % spec.n_zones

    core = spec.repertoire_size - spec.exclusive_per_user
    repertoires: list[list[int]] = [[] for _ in range(M)]
    pools: list[list[int] | None] = [None] * M
    exclusives: list[list[int] | None] = [None] * M
    for k, (a, b) in enumerate(clone_pairs):
        pool = [int(p) for p in rng.choice(zone_pois[zone_of_user[a]],
                                           size=spec.pool_size, replace=False)]
        shared = list(pool[:core])
        excl_a = list(pool[core:core + spec.exclusive_per_user])
        excl_b = list(pool[core + spec.exclusive_per_user:])
        repertoires[a] = shared + excl_a
        repertoires[b] = shared + excl_b
        pools[a] = pools[b] = list(pool)
        exclusives[a], exclusives[b] = excl_a, excl_b
    comp_pool = 2 * spec.repertoire_size - spec.companion_shared
    for a, b in companion_pairs:
        pool = [int(p) for p in rng.choice(zone_pois[zone_of_user[a]],
                                           size=comp_pool, replace=False)]
        shared = list(pool[:spec.companion_shared])
        repertoires[a] = shared + list(pool[spec.companion_shared:spec.repertoire_size])
        repertoires[b] = shared + list(pool[spec.repertoire_size:])
        pools[a] = pools[b] = list(pool)
    if M % 2 and M > 2 * n_pairs:
        u = M - 1
        repertoires[u] = [int(p) for p in rng.choice(
            zone_pois[zone_of_user[u]], size=spec.repertoire_size, replace=False)]

    # Outings on a pair's common POIs are made together: one go/stay draw per
    # (pair, POI, day) for both members.  For clones that is the designed core;
    # for companions, their designed shared set.
    sync_key: dict[int, int] = {}
    sync_set: dict[int, set[int]] = {}
    sync_groups: list[tuple[int, set[int]]] = []
    for k, (a, b) in enumerate(clone_pairs):
        sync_key[a] = sync_key[b] = len(sync_groups)
        sync_set[a] = sync_set[b] = set(repertoires[a][:core])
        sync_groups.append((len(sync_groups), sync_set[a]))
    for a, b in companion_pairs:
        common = set(repertoires[a]) & set(repertoires[b])
        if common:
            sync_key[a] = sync_key[b] = len(sync_groups)
            sync_set[a] = sync_set[b] = common
            sync_groups.append((len(sync_groups), common))

    # Each repertoire alternates over two day-plans, split in lock-step on a
    # pair's shared POIs so both members agree on what kind of day it is.
    # The first moves of a day are then ambiguous from one member's history
    # alone, yet readable off the other member's earlier visits.
    plan_of: list[dict[int, int]] = [{} for _ in range(M)]
    if spec.split_plans:
        def by_slot(p: int) -> tuple[int, int]:
            return int(peak_slot[p]), int(p)
        for u in range(M):
            common = sorted(sync_set.get(u, ()), key=by_slot)
            rest = sorted(set(repertoires[u]) - set(common), key=by_slot)
            for i, p in enumerate(common + rest):
                plan_of[u][int(p)] = i % 2

    # Noise palettes are drawn outside the user's pool (or repertoire), so a
    # partner's exclusive POIs can never leak into one's own training history.
    palettes: list[list[int]] = []
    for u in range(M):
        own = set(pools[u] if pools[u] is not None else repertoires[u])
        candidates = np.array([p for p in range(N) if p not in own])
        k = min(spec.noise_palette, candidates.size)
        palettes.append([int(p) for p in rng.choice(candidates, size=k, replace=False)]
                        if k else [])

    n_train = split_point(E, spec.split_ratio)
    n_noise = int(spec.noise_rate * E)
    slot_seconds = SECONDS_PER_DAY // spec.slots
    routines = [sorted(repertoires[u], key=lambda p: peak_slot[p]) for u in range(M)]

    # Day-synchronous generation with the shared draws described above.
    visits: list[list[tuple[int, int]]] = [[] for _ in range(M)]   # (timestamp, poi)
    day = 0
    while any(len(v) < E for v in visits):
        if day > 10000:
            raise DataError("synthetic day loop failed to fill the event budget")
        weekday = (spec.base_day + day + _EPOCH_WEEKDAY_OFFSET) % 7
        pair_draw: dict[tuple[int, int], float] = {}
        plan_today: dict[int, int] = {}
        for key, members in sync_groups:
            if spec.split_plans:
                plan_today[key] = int(rng.random() < 0.5)
            for p in sorted(members):
                pair_draw[(key, p)] = rng.random()
        for u in range(M):
            todays_plan = 0
            if spec.split_plans:
                todays_plan = (plan_today[sync_key[u]] if u in sync_key
                               else int(rng.random() < 0.5))
            for p in routines[u]:
                if u in sync_key and p in sync_set[u]:
                    r = pair_draw[(sync_key[u], p)]
                else:
                    r = rng.random()
                active = weekday in day_profiles[profile_of_poi[p]]
                if spec.split_plans and plan_of[u][p] != todays_plan:
                    active = False
                if r < (spec.go_prob if active else spec.off_prob):
                    slot = int(peak_slot[p])
                    if spec.slot_jitter:
                        slot = (slot + int(rng.integers(-spec.slot_jitter,
                                                        spec.slot_jitter + 1))) % spec.slots
                    t = ((spec.base_day + day) * SECONDS_PER_DAY
                         + slot * slot_seconds
                         + int(rng.integers(0, slot_seconds)))
                    visits[u].append((t, p))
        day += 1

    records: list[CheckIn] = []
    adoption: list[list[int]] = [[] for _ in range(M)]
    discovery: list[list[int]] = [[] for _ in range(M)]
    discovery_poi: list[int | None] = [None] * M
    exploration: list[list[int]] = [[] for _ in range(M)]
    exploration_poi: list[int | None] = [None] * M
    for u in range(M):
        # Jitter can reorder a day's visits, so re-sort: replacement positions
        # below are meant relative to the chronological sequence.
        seq = sorted(visits[u][:E])
        target = [p for _, p in seq]
        open_tail = list(range(n_train + 1, E))

        # Late adoption: in the test tail a user starts visiting places only
        # their other half frequents — absent from their own training history.
        # Clone members take up the partner's designed exclusives; companions
        # discover one place unique to their companion.  The member tags
        # along: each planted visit takes over a tail event on a day the mate
        # actually goes there, at the hour closest to that place's
        # characteristic hour, so both time-of-day and arrival-sequence
        # predictors get a fair shot at it.
        mate = buddy.get(u)
        if mate is not None:
            if partner.get(u) is not None:
                goals = list(exclusives[mate] or [])
                n_plant, book = spec.adopt_count, adoption[u]
            else:
                known = set(repertoires[u]) | set(palettes[u])
                cand = sorted(set(repertoires[mate]) - known)
                goals = [cand[int(rng.integers(0, len(cand)))]] if cand else []
                n_plant, book = spec.drift_count, discovery[u]
                discovery_poi[u] = goals[0] if goals else None
            if goals and n_plant:
                mate_seq = sorted(visits[mate][:E])
                for j in range(n_plant):
                    g = goals[j % len(goals)]
                    g_days = {t // SECONDS_PER_DAY for t, p in mate_seq if p == g}
                    together = [i for i in open_tail
                                if seq[i][0] // SECONDS_PER_DAY in g_days]
                    pos = min(together or open_tail,
                              key=lambda i: (_slot_gap(int(peak_slot[target[i]]),
                                                       int(peak_slot[g]), spec.slots), i))
                    target[pos] = g
                    open_tail.remove(pos)
                    book.append(pos)
                book.sort()

        # Solo exploration: late in their timeline, non-clone users also take
        # up one brand-new in-zone place nobody pointed them to.  No companion
        # is involved, so only the overlap between the place's visitor crowd
        # and the user's own haunts can explain these visits.
        if partner.get(u) is None and spec.explore_count and open_tail:
            known = set(repertoires[u]) | set(palettes[u])
            if discovery_poi[u] is not None:
                known.add(discovery_poi[u])
            mate_known = (set(repertoires[mate]) | set(palettes[mate])
                          if mate is not None else set())
            here = [int(p) for p in zone_pois[zone_of_user[u]] if p not in known]
            cand = [p for p in here if p not in mate_known] or here
            if cand:
                g = cand[int(rng.integers(0, len(cand)))]
                exploration_poi[u] = g
                for _ in range(min(spec.explore_count, len(open_tail))):
                    pos = min(open_tail,
                              key=lambda i: (_slot_gap(int(peak_slot[target[i]]),
                                                       int(peak_slot[g]), spec.slots), i))
                    target[pos] = g
                    open_tail.remove(pos)
                    exploration[u].append(pos)
                exploration[u].sort()

        if n_noise and palettes[u]:
            protected = set(adoption[u]) | set(discovery[u]) | set(exploration[u])
            open_slots = [i for i in range(E) if i not in protected]
            chosen = rng.choice(len(open_slots), size=n_noise, replace=False)
            for c in chosen:
                target[open_slots[c]] = palettes[u][int(rng.integers(0, len(palettes[u])))]

        for (t, _), p in zip(seq, target):
            records.append(CheckIn(u, t, float(lat[p]), float(lon[p]), p))

    meta = {
        "seed": seed,
        "spec": dataclasses.asdict(spec),
        "clone_pairs": [list(p) for p in clone_pairs],
        "repertoires": repertoires,
        "pools": pools,
        "exclusives": exclusives,
        "palettes": palettes,
        "adoption_positions": adoption,
        "companion_pairs": [list(p) for p in companion_pairs],
        "discovery_positions": discovery,
        "discovery_poi": discovery_poi,
        "exploration_positions": exploration,
        "exploration_poi": exploration_poi,
        "plan_of_poi": [sorted([p, pl] for p, pl in plan_of[u].items())
                        for u in range(M)],
        "zone_of_user": zone_of_user.tolist(),
        "zone_of_poi": zone_of_poi.tolist(),
        "peak_slot": peak_slot.tolist(),
        "active_days": [list(day_profiles[k]) for k in profile_of_poi],
    }
    return build_dataset(records, spec.split_ratio, spec.window, spec.slots,
                         user_raw=[f"u{i:03d}" for i in range(M)],
                         poi_raw=[f"p{i:03d}" for i in range(N)],
                         meta=meta)


# ---------------------------------------------------------------------------
# Dataset directory I/O.
# ---------------------------------------------------------------------------

MANIFEST_NAME = "manifest.json"


def write_checkin_file(path, records: list[CheckIn], user_raw: list[str],
                       poi_raw: list[str], fmt: str = "gowalla") -> None:
    columns = FORMATS[fmt]
    with open(path, "w", encoding="utf-8") as f:
        for r in records:
            row = {"user": user_raw[r.user], "poi": poi_raw[r.poi],
                   "time": format_timestamp(r.t), "lat": repr(r.lat), "lon": repr(r.lon)}
            f.write("\t".join(row[c] for c in columns) + "\n")


def save_dataset(dataset: Dataset, out_dir) -> None:
    """Write a self-describing dataset directory (manifest, events, id maps)."""
    os.makedirs(out_dir, exist_ok=True)
    manifest = {
        "version": 1,
        "format": "gowalla",
        "n_users": dataset.n_users,
        "n_pois": dataset.n_pois,
        "n_events": len(dataset.records),
        "split_ratio": dataset.split_ratio,
        "window": dataset.window,
        "slots": dataset.slots,
    }
    with open(os.path.join(out_dir, MANIFEST_NAME), "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")
    write_checkin_file(os.path.join(out_dir, "events.tsv"), dataset.records,
                       dataset.user_raw, dataset.poi_raw, "gowalla")
    for name, raw in (("users.tsv", dataset.user_raw), ("pois.tsv", dataset.poi_raw)):
        with open(os.path.join(out_dir, name), "w", encoding="utf-8") as f:
            for dense, raw_id in enumerate(raw):
                f.write(f"{dense}\t{raw_id}\n")
    if dataset.meta:
        with open(os.path.join(out_dir, "meta.json"), "w", encoding="utf-8") as f:
            json.dump(dataset.meta, f, indent=2, sort_keys=True)
            f.write("\n")


def _read_id_map(path) -> list[str]:
    out: list[str] = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            dense, raw = line.rstrip("\n").split("\t")
            if int(dense) != len(out):
                raise DataError(f"{path}: id map not densely ordered")
            out.append(raw)
    return out


def load_dataset(in_dir) -> Dataset:
    manifest_path = os.path.join(in_dir, MANIFEST_NAME)
    try:
        with open(manifest_path, "r", encoding="utf-8") as f:
            manifest = json.load(f)
    except OSError as exc:
        raise DataError(f"not a dataset directory (missing {MANIFEST_NAME}): {in_dir}") from exc
    user_raw = _read_id_map(os.path.join(in_dir, "users.tsv"))
    poi_raw = _read_id_map(os.path.join(in_dir, "pois.tsv"))
    parsed = parse_checkin_file(
        os.path.join(in_dir, "events.tsv"), manifest.get("format", "gowalla"),
        user_ids={raw: i for i, raw in enumerate(user_raw)},
        poi_ids={raw: i for i, raw in enumerate(poi_raw)},
    )
    meta = {}
    meta_path = os.path.join(in_dir, "meta.json")
    if os.path.exists(meta_path):
        with open(meta_path, "r", encoding="utf-8") as f:
            meta = json.load(f)
    return build_dataset(parsed.records, manifest["split_ratio"], manifest["window"],
                         manifest["slots"], user_raw=user_raw, poi_raw=poi_raw, meta=meta)
