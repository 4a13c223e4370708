"""Acceptance gate: one test per release criterion, at its stated tolerance.

Run with -v to get one pass/fail line per criterion.  The planted-structure
battery (criteria 7 and 8) trains real models over five seeds and dominates
the runtime of this file; everything else is seconds.
"""

import hashlib
import os
import time

import numpy as np
import pytest
import scipy.stats

from nextloc import association, autodiff as ad, cli, evaluate
from nextloc.data import (CheckIn, SECONDS_PER_DAY, SyntheticSpec,
                          build_dataset, generate_synthetic)
from nextloc.evaluate import FusionStrategy, acc_at_k, mrr
from nextloc.poi_net import PoiNet
from nextloc.user_net import UserNet, decay_weight

SMALL_SET = ["--set", "n_users=10", "--set", "n_pois=20",
             "--set", "events_per_user=80", "--set", "n_zones=2"]


# -- shared battery (criteria 7 and 8) ----------------------------------------

@pytest.fixture(scope="module")
def battery():
    start = time.perf_counter()
    reports = evaluate.synthetic_battery()
    minpool = evaluate.synthetic_battery(variants=("full",),
                                         fusion=FusionStrategy("minpool"))
    elapsed = time.perf_counter() - start
    return reports, minpool["full"], elapsed


# -- helpers -------------------------------------------------------------------

def random_tiny_dataset(seed, n_users, n_pois, per_user, window=20, days=30):
    rng = np.random.default_rng(seed)
    records = []
    for u in range(n_users):
        times = np.sort(rng.choice(days * SECONDS_PER_DAY, size=per_user,
                                   replace=False))
        lat, lon = rng.uniform(-0.05, 0.05, size=2)
        for t, p in zip(times, rng.integers(0, n_pois, size=per_user)):
            records.append(CheckIn(u, int(t), float(lat), float(lon), int(p)))
    return build_dataset(records, split_ratio=0.8, window=window)


def fingerprint(directory):
    out = {}
    for root, _, names in os.walk(directory):
        for name in names:
            if name == "run.log":      # the only timestamped output, by design
                continue
            path = os.path.join(root, name)
            with open(path, "rb") as f:
                out[os.path.relpath(path, directory)] = hashlib.sha256(f.read()).hexdigest()
    return out


def ranked(position, length):
    """Candidate list of the given length with truth -1 at a 1-based position."""
    out = list(range(100, 100 + length))
    out[position - 1] = -1
    return out


def same_length_windows(windows, count=2):
    """Training batches a loss only over equal-length windows; pick one group."""
    groups = {}
    for w in windows:
        groups.setdefault(len(w), []).append(w)
    return max(groups.values(), key=len)[:count]


# -- criteria ------------------------------------------------------------------

def test_criterion_01_training_gradients_match_finite_differences():
    start = time.perf_counter()
    worst = 0.0
    for seed in range(20):
        ds = random_tiny_dataset(seed, n_users=5, n_pois=6, per_user=10, window=4)
        user_net = UserNet(ds.n_users, ds.n_pois, dim=3, alpha=0.1, beta=0.1,
                           seed=seed)
        poi_net = PoiNet(ds.n_users, ds.n_pois, n_slots=ds.slots, dim=3,
                         slot_dim=2, seed=seed)
        for net, windows in ((user_net, same_length_windows(ds.user_windows)),
                             (poi_net, same_length_windows(ds.poi_windows))):
            assert windows and all(2 <= len(w) <= 4 for w in windows)
            err = ad.gradient_check(lambda tape: net.window_loss(windows, tape),
                                    net.parameters())
            worst = max(worst, err)
    assert worst < 1e-4
    assert time.perf_counter() - start < 10.0


def test_criterion_02_recall_weight_closed_forms():
    assert decay_weight(0.0, 0.0) == 1.0
    assert abs(decay_weight(0.5, 0.0)) < 1e-12
    assert abs(decay_weight(1.0, 0.0, alpha=0.1) - 0.904837) < 1e-6


def test_criterion_03_similarity_matches_brute_force_oracle():
    start = time.perf_counter()
    for trial in range(50):
        rng = np.random.default_rng(1000 + trial)
        ds = random_tiny_dataset(2000 + trial,
                                 n_users=int(rng.integers(2, 21)),
                                 n_pois=int(rng.integers(2, 21)),
                                 per_user=12)
        # user side, both variants
        for same_day in (False, True):
            if same_day:
                sets = [{(e.poi, e.t // SECONDS_PER_DAY) for e in evs}
                        for evs in ds.train]
            else:
                sets = [{e.poi for e in evs} for evs in ds.train]
            expected = np.zeros((ds.n_users, ds.n_users))
            for m in range(ds.n_users):
                for n in range(ds.n_users):
                    if sets[m]:
                        expected[m, n] = len(sets[m] & sets[n]) / len(sets[m])
                expected[m, m] = 1.0
            np.testing.assert_array_equal(
                association.user_similarity(ds, same_day=same_day), expected)
        # place side, both normalizations
        visited = {}
        for evs in ds.train:
            for e in evs:
                visited.setdefault(e.poi, set()).add((e.user, e.t // SECONDS_PER_DAY))
        raw = np.zeros((ds.n_pois, ds.n_pois))
        for m in range(ds.n_pois):
            for n in range(m + 1, ds.n_pois):
                both = visited.get(m, set()) & visited.get(n, set())
                raw[m, n] = raw[n, m] = len({d for _, d in both})
        top = raw.max()
        expected = raw / top if top > 0 else raw.copy()
        np.fill_diagonal(expected, 1.0)
        np.testing.assert_array_equal(association.poi_similarity(ds), expected)
        by_row = np.zeros_like(raw)
        row_top = raw.max(axis=1)
        for i in range(ds.n_pois):
            if row_top[i] > 0:
                by_row[i] = raw[i] / row_top[i]
        np.fill_diagonal(by_row, 1.0)
        np.testing.assert_array_equal(
            association.poi_similarity(ds, normalize="row"), by_row)
    assert time.perf_counter() - start < 30.0


def test_criterion_04_identity_similarity_is_a_no_op():
    for seed in range(10):
        rng = np.random.default_rng(seed)
        m, n = int(rng.integers(2, 16)), int(rng.integers(2, 16))
        scores = rng.random((m, n)) + 1e-3
        scores /= scores.sum(axis=1, keepdims=True)
        adjusted = association.adjust_user_scores(np.eye(m), scores)
        assert np.abs(adjusted - scores).max() < 1e-12
        flipped = rng.random((n, m)) + 1e-3
        flipped /= flipped.sum(axis=1, keepdims=True)
        adjusted = association.adjust_poi_scores(np.eye(n), flipped)
        assert np.abs(adjusted - flipped).max() < 1e-12


def test_criterion_05_metric_fixtures():
    approx = lambda x: pytest.approx(x, abs=1e-12)
    # 1: the two-list reciprocal-rank example
    assert mrr([[7, 3, 2, 5], [1, 2, 3, 4]], [7, 4]) == 0.625
    # 2: ranks 1, 2, 4
    lists = [ranked(1, 6), ranked(2, 6), ranked(4, 6)]
    assert mrr(lists, [-1] * 3) == approx(7 / 12)
    # 3: ranks 1, 1, 2, 5, 10 over ten candidates
    lists = [ranked(r, 10) for r in (1, 1, 2, 5, 10)]
    truths = [-1] * 5
    assert acc_at_k(lists, truths, 1) == approx(0.4)
    assert acc_at_k(lists, truths, 5) == approx(0.8)
    assert acc_at_k(lists, truths, 10) == approx(1.0)
    assert mrr(lists, truths) == approx(0.56)
    # 4: truth outside the top ten
    lists = [ranked(11, 12)]
    assert acc_at_k(lists, [-1], 10) == 0.0
    assert mrr(lists, [-1]) == approx(1 / 11)
    # 5: three of four inside the top five
    lists = [ranked(1, 8), ranked(5, 8), ranked(5, 8), ranked(6, 8)]
    assert acc_at_k(lists, [-1] * 4, 5) == approx(0.75)
    # 6: perfect single prediction
    assert mrr([ranked(1, 3)], [-1]) == 1.0
    assert acc_at_k([ranked(1, 3)], [-1], 1) == 1.0
    # 7: truth dead last
    assert mrr([ranked(4, 4)], [-1]) == 0.25
    assert acc_at_k([ranked(4, 4)], [-1], 3) == 0.0
    assert acc_at_k([ranked(4, 4)], [-1], 4) == 1.0
    # 8: ranks 2 and 3
    lists = [ranked(2, 5), ranked(3, 5)]
    assert mrr(lists, [-1] * 2) == approx(5 / 12)
    assert acc_at_k(lists, [-1] * 2, 2) == approx(0.5)
    assert acc_at_k(lists, [-1] * 2, 3) == approx(1.0)
    # 9: deep list, truth at the bottom
    assert mrr([ranked(20, 20)], [-1]) == approx(0.05)
    # 10: ranks 1 and 2
    lists = [ranked(1, 4), ranked(2, 4)]
    assert acc_at_k(lists, [-1] * 2, 1) == approx(0.5)
    assert mrr(lists, [-1] * 2) == 0.75


def _train_until_memorized(net, dataset, events, truth_of, lr):
    """Train in 50-epoch slices, max 200, until top-1 recall of the training
    sequence is perfect.  Returns the final training-set hit rate."""
    accuracy = 0.0
    for round_start in range(0, 200, 50):
        net.train(dataset, 50, seed=round_start, lr=lr)
        cuts = list(range(1, len(events)))
        rows = net.score_rows_at_cuts(events, 0, cuts)
        hits = [int(np.argmax(rows[i]) == truth_of(events[c]))
                for i, c in enumerate(cuts)]
        accuracy = sum(hits) / len(hits)
        if accuracy == 1.0:
            break
    return accuracy


def test_criterion_06_single_sequence_memorization():
    start = time.perf_counter()
    cycle = [CheckIn(0, 1_000_000 + k * 3600, 0.0, 0.0, k % 3) for k in range(30)]
    ds = build_dataset(cycle, split_ratio=0.8, window=10)
    user_net = UserNet(ds.n_users, ds.n_pois, dim=8, beta=1.0, seed=0)
    assert _train_until_memorized(user_net, ds, ds.train[0],
                                  lambda e: e.poi, lr=0.05) == 1.0

    rotation = [CheckIn(k % 3, 1_000_000 + k * 3600, 0.0, 0.0, 0) for k in range(30)]
    ds = build_dataset(rotation, split_ratio=0.8, window=10)
    poi_net = PoiNet(ds.n_users, ds.n_pois, n_slots=ds.slots, dim=8,
                     slot_dim=4, seed=0)
    assert _train_until_memorized(poi_net, ds, ds.poi_train[0],
                                  lambda e: e.user, lr=0.05) == 1.0
    assert time.perf_counter() - start < 60.0


def test_criterion_07_planted_structure_ablation_ordering(battery):
    spec = SyntheticSpec()
    assert (spec.n_users, spec.n_pois, spec.events_per_user) == (40, 30, 120)
    assert (spec.clone_fraction, spec.pool_overlap, spec.noise_rate) == (0.3, 0.9, 0.1)

    reports, _, elapsed = battery
    full = reports["full"]
    assert full.mrr >= reports["no_cross_user"].mrr
    assert full.mrr >= reports["no_cross_poi"].mrr
    assert full.mrr >= reports["no_user_prediction"].mrr

    lone = reports["user_net_only"]
    assert full.unseen_n > 0 and lone.unseen_n > 0
    assert full.unseen_mrr >= 1.05 * lone.unseen_mrr
    assert elapsed < 300.0


def test_criterion_08_maxpool_fusion_beats_minpool(battery):
    reports, minpool_full, _ = battery
    assert reports["full"].mrr >= minpool_full.mrr


def test_criterion_09_similarity_tracks_shared_element_counts():
    start = time.perf_counter()
    ds = generate_synthetic(SyntheticSpec(), seed=0)
    for which in ("user_sim_vs_common", "poi_sim_vs_common"):
        _, rows = evaluate.motivation_stats(ds, which)
        sims = [row[2] for row in rows]
        commons = [row[3] for row in rows]
        rho = scipy.stats.spearmanr(sims, commons).statistic
        assert rho > 0.3, f"{which}: spearman {rho:.3f}"
    assert time.perf_counter() - start < 30.0


def _run_pipeline(root, spec_file):
    data, model = root / "data", root / "model"
    steps = [
        ["synth", "--seed", "3", *SMALL_SET, "--out", str(data)],
        ["train", "--data", str(data), "--net", "user", "--epochs", "2",
         "--dim", "4", "--lr", "0.01", "--beta", "1.0", "--seed", "0",
         "--out", str(model)],
        ["train", "--data", str(data), "--net", "poi", "--epochs", "2",
         "--dim", "4", "--slot-dim", "2", "--lr", "0.01", "--seed", "0",
         "--out", str(model)],
        ["associate", "--data", str(data), "--out", str(root / "sim")],
        ["evaluate", "--data", str(data),
         "--user-ckpt", str(model / "user_net.ckpt"),
         "--poi-ckpt", str(model / "poi_net.ckpt"),
         "--variant", "full", "--s-u-mode", "static",
         "--out", str(root / "report")],
        ["stats", "--data", str(data), "--which", "user_sim_vs_common",
         "--out", str(root / "stats")],
        ["case", "--data", str(data),
         "--user-ckpt", str(model / "user_net.ckpt"),
         "--poi-ckpt", str(model / "poi_net.ckpt"),
         "--user", "u003", "--poi", "p007", "--k", "3",
         "--out", str(root / "case")],
        ["ablate", "--spec", str(spec_file), "--seeds", "0", "--epochs", "1",
         "--out", str(root / "ablation")],
    ]
    for argv in steps:
        assert cli.main(argv) == 0, f"{argv[0]} failed"
    return fingerprint(root)


def test_criterion_10_reruns_are_byte_identical(tmp_path):
    spec_file = tmp_path / "spec.txt"
    spec_file.write_text("n_users = 10\nn_pois = 20\n"
                         "events_per_user = 80\nn_zones = 2\n")
    first = _run_pipeline(tmp_path / "one", spec_file)
    second = _run_pipeline(tmp_path / "two", spec_file)
    assert len(first) > 10
    assert first == second


@pytest.mark.skipif("NEXTLOC_GOWALLA" not in os.environ,
                    reason="reference check-in file not present; reference "
                           "targets Acc@1=0.1454 MRR=0.2413 are documentation, "
                           "not a gate")
def test_criterion_11_real_data_reference_run(tmp_path):
    assert cli.main(["ingest", "--input", os.environ["NEXTLOC_GOWALLA"],
                     "--out", str(tmp_path / "data")]) == 0
    model = tmp_path / "model"
    for net in ("user", "poi"):
        assert cli.main(["train", "--data", str(tmp_path / "data"), "--net", net,
                         "--out", str(model)]) == 0
    assert cli.main(["evaluate", "--data", str(tmp_path / "data"),
                     "--user-ckpt", str(model / "user_net.ckpt"),
                     "--poi-ckpt", str(model / "poi_net.ckpt"),
                     "--variant", "full", "--out", str(tmp_path / "report")]) == 0
