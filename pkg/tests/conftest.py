import json

import numpy as np
import pytest

from zcal import _kernels_py
from zcal.data import (
    BoxGeometry,
    CategorySet,
    ClassDistribution,
    DatasetIndex,
    Detection,
    GroundTruthAnnotation,
    GroundTruthBox,
    ImagePrediction,
)

try:
    from zcal import _ckernels
except ImportError:  # extension not built
    _ckernels = None

BACKENDS = [pytest.param(_kernels_py, id="python")]
BACKENDS.append(
    pytest.param(_ckernels, id="cython", marks=pytest.mark.skipif(_ckernels is None, reason="extension not built"))
)


@pytest.fixture(params=BACKENDS)
def backend(request):
    return request.param


def box(x0, y0, x1, y1):
    return BoxGeometry(float(x0), float(y0), float(x1), float(y1))


def det(x0, y0, x1, y1, probs):
    return Detection(box(x0, y0, x1, y1), ClassDistribution(tuple(probs)))


@pytest.fixture
def tiny_index():
    """Two images, two categories, three boxes."""
    return DatasetIndex(
        CategorySet(("cat", "dog")),
        ("a", "b"),
        {
            "a": GroundTruthAnnotation("a", (GroundTruthBox(box(0, 0, 10, 10), 1), GroundTruthBox(box(20, 20, 40, 40), 2))),
            "b": GroundTruthAnnotation("b", (GroundTruthBox(box(5, 5, 15, 25), 2),)),
        },
    )


@pytest.fixture
def gt_file(tmp_path):
    doc = {
        "categories": ["cat", "dog"],
        "images": ["a", "b"],
        "annotations": [
            {"image_id": "a", "boxes": [
                {"x_min": 0, "y_min": 0, "x_max": 10, "y_max": 10, "category": 1},
                {"x_min": 20, "y_min": 20, "x_max": 40, "y_max": 40, "category": 2},
            ]},
            {"image_id": "b", "boxes": [
                {"x_min": 5, "y_min": 5, "x_max": 15, "y_max": 25, "category": 2},
            ]},
        ],
    }
    path = tmp_path / "gt.json"
    path.write_text(json.dumps(doc))
    return path


def perfect_predictions(index):
    """Ground truth turned into one-hot predictions."""
    D = index.categories.D
    preds = []
    for image_id in index.images:
        dets = []
        for b in index.annotation(image_id).boxes:
            probs = [0.0] * D
            probs[b.category - 1] = 1.0
            dets.append(Detection(b.geometry, ClassDistribution(tuple(probs))))
        preds.append(ImagePrediction(image_id, tuple(dets)))
    return preds


def random_simplex(rng, n, D):
    return rng.dirichlet(np.ones(D), size=n)
