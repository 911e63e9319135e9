import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import box, det, perfect_predictions
from oracles import ap_11pt_ref, ap_voc_ref, enumerate_instances, greedy_ref, iou_ref
from zcal.data import (
    BoxGeometry,
    CategorySet,
    DatasetIndex,
    GroundTruthAnnotation,
    GroundTruthBox,
    ImagePrediction,
)
from zcal.errors import DomainError
from zcal.evaluation import (
    ELEVEN_POINT,
    MatchResult,
    average_precision,
    evaluate,
    iou,
    match_detections,
    mean_ap,
)
from zcal.synthdet import make_dataset


def _mr(conf, tp, n_gt):
    return MatchResult(tp=np.array(tp, dtype=np.int8), confidence=np.array(conf, dtype=float), n_gt=n_gt)


class TestIoU:
    def test_identical(self):
        assert iou(box(0, 0, 10, 10), box(0, 0, 10, 10)) == 1.0

    def test_disjoint(self):
        assert iou(box(0, 0, 10, 10), box(20, 20, 30, 30)) == 0.0

    def test_touching_edges(self):
        assert iou(box(0, 0, 10, 10), box(10, 0, 20, 10)) == 0.0

    def test_half_overlap(self):
        assert iou(box(0, 0, 10, 10), box(5, 0, 15, 10)) == pytest.approx(1 / 3, abs=1e-9)

    def test_against_shapely(self):
        rng = np.random.default_rng(5)
        for _ in range(300):
            a = rng.uniform(0, 50, 2)
            b = rng.uniform(0, 50, 2)
            ba = box(a[0], a[1], a[0] + rng.uniform(1, 30), a[1] + rng.uniform(1, 30))
            bb = box(b[0], b[1], b[0] + rng.uniform(1, 30), b[1] + rng.uniform(1, 30))
            assert iou(ba, bb) == pytest.approx(iou_ref(ba.as_tuple(), bb.as_tuple()), abs=1e-12)


_coord = st.floats(-100, 100, allow_nan=False)
_size = st.floats(0.5, 80)


@settings(max_examples=300, deadline=None)
@given(_coord, _coord, _size, _size, _coord, _coord, _size, _size, _coord, _coord)
def test_iou_symmetry_and_translation(x1, y1, w1, h1, x2, y2, w2, h2, dx, dy):
    a = BoxGeometry(x1, y1, x1 + w1, y1 + h1)
    b = BoxGeometry(x2, y2, x2 + w2, y2 + h2)
    v = iou(a, b)
    assert 0.0 <= v <= 1.0
    assert v == iou(b, a)
    assert iou(a, a) == 1.0
    ta = BoxGeometry(a.x_min + dx, a.y_min + dy, a.x_max + dx, a.y_max + dy)
    tb = BoxGeometry(b.x_min + dx, b.y_min + dy, b.x_max + dx, b.y_max + dy)
    assert iou(ta, tb) == pytest.approx(v, abs=1e-6)


class TestMatching:
    def test_perfect(self):
        m = match_detections([(box(0, 0, 10, 10), 0.9)], [box(0, 0, 10, 10)])
        assert (m.n_tp, m.n_fp) == (1, 0)

    def test_single_claim(self):
        m = match_detections([(box(0, 0, 10, 10), 0.6), (box(0, 0, 10, 10), 0.9)], [box(0, 0, 10, 10)])
        assert list(m.tp) == [0, 1]

    def test_claims_best_unmatched(self):
        gts = [box(0, 0, 10, 10), box(5, 0, 15, 10)]
        dets = [(box(4, 0, 14, 10), 0.9), (box(1, 0, 11, 10), 0.8)]
        m = match_detections(dets, gts)
        assert list(m.matched) == [1, 0]

    def test_iou_tie_earliest_gt(self):
        gts = [box(0, 0, 10, 10), box(10, 0, 20, 10)]
        m = match_detections([(box(5, 0, 15, 10), 0.9)], gts, threshold=0.3)
        assert list(m.matched) == [0]

    def test_below_threshold(self):
        m = match_detections([(box(0, 0, 10, 10), 0.9)], [box(5, 0, 15, 10)])
        assert m.n_tp == 0

    def test_threshold_inclusive(self):
        m = match_detections([(box(0, 0, 10, 20), 0.9)], [box(0, 0, 10, 10)], threshold=0.5)
        assert m.n_tp == 1

    def test_bad_threshold(self):
        with pytest.raises(DomainError):
            match_detections([], [], threshold=0.0)

    def test_brute_force_random_small(self):
        for dets, gts in enumerate_instances()[::7]:
            m = match_detections([(BoxGeometry(*b), c) for b, c in dets], [BoxGeometry(*g) for g in gts], 0.5)
            assert list(m.tp) == greedy_ref(dets, gts, 0.5)


class TestAveragePrecision:
    def test_perfect(self):
        assert average_precision(_mr([0.9], [1], 1)) == 1.0

    def test_tp_then_fp(self):
        assert average_precision(_mr([0.9, 0.8], [1, 0], 1)) == 1.0

    def test_fp_then_tp(self):
        assert average_precision(_mr([0.9, 0.8], [0, 1], 1)) == 0.5

    def test_no_gt(self):
        assert average_precision(_mr([0.9], [0], 0)) is None

    def test_no_detections(self):
        assert average_precision(_mr([], [], 3)) == 0.0

    def test_matches_voc_reference(self):
        rng = np.random.default_rng(9)
        for _ in range(500):
            n = int(rng.integers(1, 15))
            conf = rng.choice([0.1, 0.3, 0.5, 0.7, 0.9], n).tolist()
            tp = rng.integers(0, 2, n).tolist()
            n_gt = int(sum(tp) + rng.integers(0, 3)) or 1
            ap = average_precision(_mr(conf, tp, n_gt))
            assert ap == pytest.approx(ap_voc_ref(conf, tp, n_gt), abs=1e-12)
            ap11 = average_precision(_mr(conf, tp, n_gt), ELEVEN_POINT)
            assert ap11 == pytest.approx(ap_11pt_ref(conf, tp, n_gt), abs=1e-12)

    def test_unknown_interpolation(self):
        with pytest.raises(DomainError):
            average_precision(_mr([0.9], [1], 1), "voc2007")


@settings(max_examples=300, deadline=None)
@given(st.lists(st.tuples(st.floats(0.05, 0.95), st.booleans()), min_size=1, max_size=20),
       st.integers(0, 3), st.booleans())
def test_fp_monotonicity(dets, extra_gt, remove_instead):
    conf = [c for c, _ in dets]
    tp = [int(t) for _, t in dets]
    n_gt = sum(tp) + extra_gt or 1
    base = average_precision(_mr(conf, tp, n_gt))
    if remove_instead:
        fps = [k for k, t in enumerate(tp) if not t]
        if not fps:
            return
        k = fps[0]
        smaller = average_precision(_mr(conf[:k] + conf[k + 1:], tp[:k] + tp[k + 1:], n_gt))
        assert smaller >= base - 1e-12
    else:
        worse = average_precision(_mr(conf + [min(conf) / 2], tp + [0], n_gt))
        assert worse <= base + 1e-12


class TestMeanAP:
    def test_arithmetic(self):
        assert mean_ap([(1, 0.5), (2, 1.0)]) == 0.75

    def test_identity(self):
        assert mean_ap([(1, 0.42)]) == 0.42

    def test_excludes_no_gt(self):
        assert mean_ap([(1, 1.0), (2, None)]) == 1.0

    def test_nothing(self):
        with pytest.raises(DomainError):
            mean_ap([(1, None)])


class TestEvaluate:
    def test_perfect_fixture(self, tiny_index):
        result = evaluate(tiny_index, perfect_predictions(tiny_index))
        assert result.map == 1.0
        assert all(c.ap == 1.0 for c in result.per_class)

    def test_perfect_synthetic(self):
        index = make_dataset(150, 7, seed=3, mean_objects=5)
        assert evaluate(index, perfect_predictions(index)).map == 1.0

    def test_wrong_class_is_fp(self):
        index = DatasetIndex(
            CategorySet(("a", "b")), ("i",),
            {"i": GroundTruthAnnotation("i", (GroundTruthBox(box(0, 0, 10, 10), 1),))},
        )
        result = evaluate(index, [ImagePrediction("i", (det(0, 0, 10, 10, (0.3, 0.7)),))])
        assert result.per_class[0].ap == 0.0
        assert result.per_class[1].ap is None
        assert result.map == 0.0

    def test_missing_prediction_counts_as_empty(self, tiny_index):
        result = evaluate(tiny_index, perfect_predictions(tiny_index)[:1])
        assert result.per_class[0].ap == 1.0  # class 1 only lives in image "a"
        assert result.per_class[1].ap == 0.5  # one of two dogs found

    def test_matching_is_per_image(self):
        # identical boxes in two images must not claim each other's ground truth
        g = GroundTruthBox(box(0, 0, 10, 10), 1)
        index = DatasetIndex(CategorySet(("a", "b")), ("i", "j"),
                             {"i": GroundTruthAnnotation("i", (g,)), "j": GroundTruthAnnotation("j", ())})
        preds = [ImagePrediction("j", (det(0, 0, 10, 10, (0.9, 0.1)),)),
                 ImagePrediction("i", (det(0, 0, 10, 10, (0.8, 0.2)),))]
        assert evaluate(index, preds).map == 0.5
