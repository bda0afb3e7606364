import itertools

import numpy as np
import pytest

from aminothread.geometry import Box3, iou
from aminothread.proposals import (
    NoiseConfig, Proposal, average_precision, evaluate_map, format_proposals, match_matrix,
    oracle_detect, parse_proposals, read_proposals, write_proposals,
)
from aminothread.residues import NUM_CLASSES
from aminothread.volume import Structure

from conftest import glycine


def one_hot(c):
    p = np.zeros(NUM_CLASSES)
    p[c] = 1.0
    return p


class TestOracle:
    def test_zero_noise_identity(self, helix50, oracle50):
        assert len(oracle50) == len(helix50)
        assert sorted(p.source for p in oracle50) == list(range(50))
        for p in oracle50:
            res = helix50.residues[p.source]
            assert p.box == res.gt_box
            assert p.score == 1.0
            np.testing.assert_array_equal(p.class_probs, one_hot(res.class_id))
            np.testing.assert_array_equal(p.atoms, res.coords)

    def test_false_positive_count(self, helix50):
        props = oracle_detect(helix50, NoiseConfig(fp_rate=1.0, seed=3))
        assert len(props) == 100
        fps = [p for p in props if p.source is None]
        assert len(fps) == 50
        assert all(p.atoms is None and 0.05 <= p.score <= 0.5 for p in fps)
        assert all(match_matrix([p]).all() for p in fps)

    def test_determinism(self, helix50):
        cfg = NoiseConfig(0.5, 0.2, 0.1, 0.3, 0.2, 0.1, seed=42)
        assert format_proposals(oracle_detect(helix50, cfg)) == format_proposals(oracle_detect(helix50, cfg))
        other = NoiseConfig(0.5, 0.2, 0.1, 0.3, 0.2, 0.1, seed=43)
        assert format_proposals(oracle_detect(helix50, cfg)) != format_proposals(oracle_detect(helix50, other))

    def test_drop_keeps_subset(self, helix50):
        props = oracle_detect(helix50, NoiseConfig(drop_rate=0.3, seed=1))
        src = [p.source for p in props]
        assert len(set(src)) == len(src) < 50

    def test_confusion_keeps_argmax(self, helix50):
        props = oracle_detect(helix50, NoiseConfig(class_confusion=0.4, seed=1))
        assert all(p.class_id == helix50.residues[p.source].class_id for p in props)
        assert all(p.score < 1.0 + 1e-12 for p in props)

    def test_noise_validation(self):
        for kwargs in ({"drop_rate": 1.0}, {"jitter_sigma": -1}, {"class_confusion": 1.0}, {"fp_rate": -0.1}):
            with pytest.raises(ValueError):
                NoiseConfig(**kwargs)

    def test_empty_structure(self):
        with pytest.raises(ValueError):
            oracle_detect(Structure([]))


class TestProposal:
    def test_validation(self):
        box = Box3(0, 0, 0, 1, 1, 1)
        with pytest.raises(ValueError):
            Proposal(box, np.ones(NUM_CLASSES), 0.5)
        with pytest.raises(ValueError):
            Proposal(box, one_hot(0), 1.5)

    def test_tie_matching(self):
        p = np.zeros(NUM_CLASSES)
        p[[2, 7]] = 0.5
        prop = Proposal(Box3(0, 0, 0, 1, 1, 1), p, 0.5)
        assert prop.matches(2) and prop.matches(7) and not prop.matches(0)


class TestFile:
    def test_roundtrip(self, helix50, tmp_path):
        props = oracle_detect(helix50, NoiseConfig(0.4, 0.1, 0.1, 0.2, 0.1, seed=5))
        write_proposals(tmp_path / "p.txt", props)
        back = read_proposals(tmp_path / "p.txt")
        assert len(back) == len(props)
        for a, b in zip(props, back):
            np.testing.assert_array_equal(a.box.as_array(), b.box.as_array())
            np.testing.assert_array_equal(a.class_probs, b.class_probs)
            assert a.score == b.score
            assert (a.atoms is None) == (b.atoms is None)
            if a.atoms is not None:
                assert a.atom_names == b.atom_names
                np.testing.assert_array_equal(a.atoms, b.atoms)
        # a second trip is a fixed point
        assert format_proposals(back) == format_proposals(parse_proposals(format_proposals(back)))

    def test_bad_lines(self):
        with pytest.raises(ValueError, match="line 1"):
            parse_proposals("0 1 2 3\n")
        good = format_proposals([Proposal(Box3(0, 0, 0, 1, 1, 1), one_hot(3), 0.5)]).strip()
        with pytest.raises(ValueError, match="trailing"):
            parse_proposals(good + " junk")
        with pytest.raises(ValueError, match="atom block"):
            parse_proposals(good + " atoms 2 N 0 0 0")

    def test_comments_and_blanks(self):
        good = format_proposals([Proposal(Box3(0, 0, 0, 1, 1, 1), one_hot(3), 0.5)])
        assert len(parse_proposals("# header\n\n" + good)) == 1


def brute_force_ap(scored, gts, thr):
    """AP of a single class by direct enumeration.

    ``scored`` is a list of (score, box). Detections are ranked by score; at each
    rank every assignment of the detections so far to distinct gts is
    enumerated and the greedy one (each detection takes its best free gt above
    threshold) is kept. AP is the mean over gts of the best precision reached
    at or beyond each recall level.
    """
    ranked = sorted(scored, key=lambda s: -s[0])
    n = len(ranked)
    best_assignment = None
    for assign in itertools.product([None] + list(range(len(gts))), repeat=n):
        used = [a for a in assign if a is not None]
        if len(used) != len(set(used)):
            continue
        ok = True
        for r, (score, box) in enumerate(ranked):
            free = [g for g in range(len(gts)) if g not in assign[:r]]
            cands = [(iou(box, gts[g]), -g) for g in free if iou(box, gts[g]) > thr]
            want = -max(cands)[1] if cands else None
            if assign[r] != want:
                ok = False
                break
        if ok:
            best_assignment = assign
    tp = np.array([a is not None for a in best_assignment], dtype=float)
    prec = np.cumsum(tp) / np.arange(1, n + 1)
    rec = np.cumsum(tp) / len(gts)
    total = 0.0
    for k in range(1, len(gts) + 1):
        level = k / len(gts)
        reach = prec[rec >= level - 1e-12]
        total += reach.max() if len(reach) else 0.0
    return total / len(gts)


class TestMap:
    def test_perfect(self, helix50, oracle50):
        assert evaluate_map(oracle50, helix50).mean_ap == 1.0

    def test_empty(self, helix50):
        assert evaluate_map([], helix50).mean_ap == 0.0

    def test_toy_against_brute_force(self):
        s = Structure([glycine((0, 0, 0), 1), glycine((10, 0, 0), 2)])
        g0, g1 = s.residues[0].gt_box, s.residues[1].gt_box
        gly = s.residues[0].class_id
        dets = [
            (0.9, Box3.from_center(g0.center + [0.2, 0, 0], g0.size)),
            (0.8, Box3.from_center(g0.center + [0.1, 0.1, 0], g0.size)),  # duplicate of gt 0
            (0.7, Box3.from_center(g1.center + [0, 0.3, 0], g1.size)),
        ]
        props = [Proposal(b, one_hot(gly), sc) for sc, b in dets]
        got = evaluate_map(props, s).ap[gly]
        assert got == pytest.approx(brute_force_ap(dets, [g0, g1], 0.5), abs=1e-12)
        # ranks: TP, FP, TP -> precision 1, 1/2, 2/3 at recall 1/2, 1/2, 1
        assert got == pytest.approx(0.5 * 1 + 0.5 * 2 / 3)

    @pytest.mark.parametrize("seed", range(5))
    def test_random_against_brute_force(self, seed):
        rng = np.random.default_rng(seed)
        s = Structure([glycine((4.0 * i, 0, 0), i + 1) for i in range(3)])
        gts = [r.gt_box for r in s.residues]
        dets = []
        for _ in range(4):
            g = gts[rng.integers(3)]
            dets.append((float(rng.uniform(0.1, 1.0)), Box3.from_center(g.center + rng.normal(0, 0.4, 3), g.size)))
        props = [Proposal(b, one_hot(s.residues[0].class_id), sc) for sc, b in dets]
        got = evaluate_map(props, s).mean_ap
        assert got == pytest.approx(brute_force_ap(dets, gts, 0.5), abs=1e-12)

    def test_monotone_in_threshold(self, helix50):
        props = oracle_detect(helix50, NoiseConfig(jitter_sigma=0.6, size_sigma=0.3, fp_rate=0.3, seed=2))
        vals = [evaluate_map(props, helix50, t).mean_ap for t in (0.1, 0.3, 0.5, 0.7, 0.9)]
        assert all(a >= b - 1e-12 for a, b in zip(vals, vals[1:]))
        assert vals[0] > vals[-1]

    def test_average_precision_edges(self):
        assert average_precision([], 3) == 0.0
        assert average_precision([1, 1], 0) == 0.0
        assert average_precision([1, 1], 2) == 1.0
        assert average_precision([0, 1], 1) == pytest.approx(0.5)
