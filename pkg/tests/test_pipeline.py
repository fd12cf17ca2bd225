import numpy as np
import pytest

from graspkit.core import GripperModel
from graspkit.errors import PreconditionError
from graspkit.pipeline import PipelineConfig, annotate, best_per_view, detect
from graspkit.scenegen import PrimitiveSpec, SceneSpec, build_scene


def test_best_per_view_ties_take_lowest_column():
    s = np.array([[0.1, 0.5, 0.5, 0.2, 0.0, 0.0]])
    cols, best = best_per_view(s, None, 2, 3)
    assert cols.tolist() == [[1, 3]] and best.tolist() == [[0.5, 0.2]]


def test_config_validation():
    for bad in ({"sampling": "rand"}, {"top_k": 0}, {"max_approach_angle": 0.0}, {"group_shape": "cube"},
                {"radii": (0.01, 0.02, 0.03, 0.2)}, {"threads": 0}):
        with pytest.raises(PreconditionError):
            PipelineConfig(**bad).validate()
    assert "config.threads" not in PipelineConfig().as_meta()


@pytest.fixture(scope="module")
def plate_detection():
    cloud = build_scene(SceneSpec((PrimitiveSpec("box", (0.08, 0.06, 0.012), (0, 0, 0.1), label=0, density=2e4),),
                                  None))
    cfg = PipelineConfig(num_samples=32, views=20, angles=6)
    return cfg, annotate(cloud, cfg)


def test_detect_output_invariants(plate_detection):
    cfg, cloud = plate_detection
    det = detect(cloud, cfg)
    s = det.grasps.scores
    assert np.all(np.diff(s) <= 0) and np.all(s > 0) and len(det.grasps) <= cfg.top_k
    assert len(det.groups) == len(det.grasps)
    assert all(gs.groups[0].radius == cfg.radii[0] for _, gs in det.groups)
    g = GripperModel()
    for p in det.grasps:
        p.validate(g)
    assert det.stats["output"] == len(det.grasps) <= det.stats["after_filter"] <= det.stats["nonzero"]


def test_detect_thread_independent(plate_detection):
    cfg, cloud = plate_detection
    a = detect(cloud, cfg)
    b = detect(cloud, PipelineConfig(num_samples=32, views=20, angles=6, threads=3))
    assert a.grasps.tags == b.grasps.tags and np.array_equal(a.grasps.scores, b.grasps.scores)


def test_approach_filter_applied(plate_detection):
    cfg, cloud = plate_detection
    from graspkit.evaluation import approach_angle
    det = detect(cloud, PipelineConfig(num_samples=32, views=20, angles=6, max_approach_angle=30.0))
    assert all(approach_angle(p) <= np.radians(30) + 1e-12 for p in det.grasps)


def test_detect_needs_graspness():
    cloud = build_scene(SceneSpec((PrimitiveSpec("sphere", (0.02,), label=0, density=1e4),), None))
    with pytest.raises(PreconditionError):
        detect(cloud, PipelineConfig())
