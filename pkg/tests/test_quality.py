import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from graspkit.collision import check_collision
from graspkit.core import GraspPose, GripperModel, LabeledCloud, euler_xyz, in_plane_pose
from graspkit.errors import DegenerateContact, PreconditionError
from graspkit.quality import (
    COLLIDE, WIDE, CandidateGrid, ContactPair, QualityParams, annotate_graspness, candidate_grid, candidate_status,
    closing_width, evaluate_grasp, fibonacci_views, find_contacts, fit_width, force_closure, graspness,
    graspness_reference, min_friction, quality_score, score_candidates,
)
from graspkit.spatial import build_index

from conftest import cloud_from, plate_pair

G = GripperModel()
ANGLES = st.floats(0, math.radians(89.0))


def tilted_pair(t1, t2=0.0):
    """Contacts on the x axis with inward normals rotated off the contact line by t1 and t2."""
    n1 = [math.cos(t1), math.sin(t1), 0.0]
    n2 = [-math.cos(t2), 0.0, math.sin(t2)]
    return ContactPair(np.zeros(3), np.array([0.05, 0, 0]), np.array(n1), np.array(n2))


def test_force_closure_examples():
    assert force_closure(tilted_pair(0.0), 1e-6)
    t = math.radians(30)
    assert not force_closure(tilted_pair(t, t), 0.5)
    assert force_closure(tilted_pair(t, t), 0.6)
    with pytest.raises(DegenerateContact):
        force_closure(ContactPair(np.zeros(3), np.zeros(3), np.array([1.0, 0, 0]), np.array([-1.0, 0, 0])), 0.5)
    with pytest.raises(PreconditionError):
        force_closure(tilted_pair(0.0), 0.0)


def test_min_friction_examples():
    assert min_friction(tilted_pair(0.0)) == 0.0
    assert abs(min_friction(tilted_pair(math.radians(45))) - 1.0) < 1e-12
    away = ContactPair(np.zeros(3), np.array([0.05, 0, 0]), np.array([-1.0, 0, 0]), np.array([-1.0, 0, 0]))
    assert min_friction(away) == math.inf


@pytest.mark.parametrize("deg", [10, 30, 45, 60])
def test_min_friction_is_tan_of_offset(deg):
    t = math.radians(deg)
    assert abs(min_friction(tilted_pair(t)) - math.tan(t)) < 1e-9
    assert abs(min_friction(tilted_pair(0.0, t)) - math.tan(t)) < 1e-9


def test_sphere_diametral_grasp():
    rng = np.random.default_rng(0)
    d = rng.standard_normal(3)
    d /= np.linalg.norm(d)
    c, r = np.array([0.1, -0.2, 0.3]), 0.03
    pair = ContactPair(c - r * d, c + r * d, d, -d)
    assert min_friction(pair) <= 1e-12


def test_quality_score_grid_lookup():
    p = QualityParams()
    assert quality_score(tilted_pair(0.0), p) == pytest.approx(0.9, abs=1e-15)
    assert quality_score(tilted_pair(math.atan(1.3)), p) == 0.0
    assert quality_score(tilted_pair(math.atan(0.577)), p) == pytest.approx(0.5, abs=1e-15)
    # the last grid value 1.2 would give a negative score; it is clamped to 0
    assert quality_score(tilted_pair(math.atan(1.1)), p) == 0.0


@given(ANGLES, ANGLES, st.floats(0.05, 2.0), st.floats(0.0, 2.0))
def test_force_closure_monotone_and_consistent(t1, t2, mu, extra):
    pair = tilted_pair(t1, t2)
    if force_closure(pair, mu):
        assert force_closure(pair, mu + extra)
    mf = min_friction(pair)
    if abs(mu - mf) > 1e-12:
        assert force_closure(pair, mu) == (mu >= mf)


@given(ANGLES, ANGLES, ANGLES, ANGLES)
def test_quality_monotone_in_min_friction(a1, a2, b1, b2):
    p, q = tilted_pair(a1, a2), tilted_pair(b1, b2)
    if min_friction(p) <= min_friction(q):
        assert quality_score(p) >= quality_score(q)
    assert quality_score(p) in {0.0} | {1.1 - m for m in QualityParams().mu_grid}



@given(ANGLES, ANGLES)
def test_positive_score_iff_closure_below_clamp(t1, t2):
    # with the clamp, a positive score means closure at a grid value below 1.1
    pair = tilted_pair(t1, t2)
    usable = max(m for m in QualityParams().mu_grid if m < 1.1)
    mf = min_friction(pair)
    if abs(mf - usable) > 1e-12:
        assert (quality_score(pair) > 0) == (mf <= usable)

def plates_pose(depth=0.02, width=0.06):
    # approach along +x, closing along y
    return GraspPose((-0.0, 0, 0), np.column_stack([[1, 0, 0], [0, 1, 0], [0, 0, 1]]), width, depth)


def test_find_contacts_on_plates():
    cloud = plate_pair(gap=0.04)
    pair = find_contacts(cloud, plates_pose(), G, build_index(cloud))
    assert pair.p1[1] == -0.02 and pair.p2[1] == 0.02
    assert np.allclose(pair.n1, [0, 1, 0]) and np.allclose(pair.n2, [0, -1, 0])
    assert find_contacts(cloud, plates_pose(width=0.03), G) is None


def test_find_contacts_on_box():
    from graspkit.scenegen import PrimitiveSpec, sample_surface
    pts, nrm, lab = sample_surface(PrimitiveSpec("box", (0.04, 0.05, 0.06), density=2e5))
    cloud = LabeledCloud(pts, nrm, lab)
    pose = GraspPose((-0.02, 0, 0), np.eye(3), 0.06, 0.03)
    pair = find_contacts(cloud, pose, G, build_index(cloud))
    # contacts land on the two y faces with antipodal inward normals
    assert pair.p1[1] == -0.025 and pair.p2[1] == 0.025
    assert np.array_equal(pair.n1, [0, 1.0, 0]) and np.array_equal(pair.n2, [0, -1.0, 0])
    # offsets within the jaw slab tilt the contact line, so some friction is needed
    assert 0.0 <= min_friction(pair) < math.inf


def test_evaluate_grasp_cases():
    cloud = plate_pair(gap=0.04)
    idx = build_index(cloud)
    p = QualityParams()
    assert evaluate_grasp(cloud, idx, plates_pose(), G, p) == pytest.approx(0.9, abs=1e-15)
    # fingers inside the plates
    assert evaluate_grasp(cloud, idx, plates_pose(width=0.035), G, p) == 0.0
    one_side = LabeledCloud(cloud.points[cloud.points[:, 1] > 0], cloud.normals[cloud.points[:, 1] > 0])
    assert evaluate_grasp(one_side, build_index(one_side), plates_pose(), G, p) == 0.0


@given(st.integers(0, 2**32 - 1))
def test_evaluate_grasp_zero_when_colliding(seed):
    rng = np.random.default_rng(seed)
    cloud = plate_pair(gap=rng.uniform(0.02, 0.08))
    idx = build_index(cloud)
    pose = GraspPose(rng.uniform(-0.01, 0.01, 3), in_plane_pose([1, 0, 0], rng.uniform(0, math.pi)),
                     rng.uniform(0.01, 0.1), G.depth_set[rng.integers(4)])
    if not check_collision(idx, pose, G).admissible:
        assert evaluate_grasp(cloud, idx, pose, G, QualityParams()) == 0.0


def test_closing_width_rule():
    cloud = plate_pair(gap=0.04)
    w = closing_width(cloud, plates_pose(width=0.1), G, 0.01, build_index(cloud))
    assert w == pytest.approx(0.05, abs=1e-15)
    assert fit_width(cloud, plates_pose(width=0.1), G, 0.01).width == w
    wide = plate_pair(gap=0.095)
    assert fit_width(wide, plates_pose(width=0.1), G, 0.01) is None


def test_candidate_grid_counts_and_order():
    grid = CandidateGrid(fibonacci_views(1), 1, (0.02,))
    g1 = GripperModel(depth_set=(0.02,))
    poses = candidate_grid([0, 0, 0], grid, g1)
    assert len(poses) == 1 and np.allclose(poses[0].approach, -fibonacci_views(1)[0])
    grid = CandidateGrid.fibonacci(2, 12, G)
    poses = candidate_grid([0, 0, 0], grid, G)
    assert len(poses) == 96 == grid.size
    for col in (0, 5, 47, 95):
        v, a, d = grid.decode(col)
        assert poses[col].depth == G.depth_set[d]
        assert np.array_equal(poses[col].rotation, grid.rotations()[v, a])


def test_fibonacci_views_separation():
    v = fibonacci_views(60)
    assert np.allclose(np.linalg.norm(v, axis=1), 1.0, atol=1e-12)
    cos = np.clip(v @ v.T, -1, 1)
    np.fill_diagonal(cos, -1)
    assert math.degrees(math.acos(cos.max())) >= 15.0


def isolated_point():
    return cloud_from([[0.0, 0.0, 0.0]])


def test_graspness_isolated_point_is_zero():
    grid = CandidateGrid.fibonacci(10, 4, G)
    assert graspness(isolated_point(), 0, grid, G) == 0.0
    assert annotate_graspness(isolated_point(), grid, G).graspness[0] == 0.0


def sandwich():
    """A seed point midway between two facing plates."""
    plates = plate_pair(gap=0.04)
    pts = np.concatenate([[[0.0, 0.0, 0.0]], plates.points])
    nrm = np.concatenate([[[0.0, 0.0, 1.0]], plates.normals])
    return LabeledCloud(pts, nrm)


def test_graspness_saturates_and_halves():
    g1 = GripperModel(depth_set=(0.02,))
    view = np.array([[-1.0, 0.0, 0.0]])  # approach along +x, closing along y at angle 0
    cloud = sandwich()
    assert graspness(cloud, 0, CandidateGrid(view, 1, (0.02,)), g1) == 1.0
    # at a quarter turn the jaws close along z and find no contact pair
    assert graspness(cloud, 0, CandidateGrid(view, 2, (0.02,)), g1) == 0.5


def test_thin_plate_interior_is_graspable():
    from graspkit.scenegen import PrimitiveSpec, SceneSpec, build_scene
    cloud = build_scene(SceneSpec((PrimitiveSpec("box", (0.06, 0.06, 0.01), density=4e4),), None))
    grid = CandidateGrid.fibonacci(20, 6, G)
    interior = np.flatnonzero((np.abs(cloud.points[:, :2]).max(axis=1) < 0.02) & (cloud.points[:, 2] > 0))[:5]
    out = score_candidates(cloud, interior, grid, G).graspness(QualityParams())
    assert np.all(out > 0)


def test_kernel_matches_reference(three_primitive_cloud):
    cloud = three_primitive_cloud
    idx = build_index(cloud)
    grid = CandidateGrid.fibonacci(12, 4, G)
    params = QualityParams()
    rng = np.random.default_rng(11)
    pts = np.concatenate([rng.choice(np.flatnonzero(cloud.labels >= 0), 6, replace=False), [0]])
    res = score_candidates(cloud, pts, grid, G, params, index=idx)
    poses = None
    for r, i in enumerate(pts):
        poses = candidate_grid(cloud.points[i], grid, G)
        for col, pose in enumerate(poses):
            status, width, score = candidate_status(cloud, idx, pose, G, params)
            got = int(res.status[r, col])
            if status in (WIDE, COLLIDE):
                assert got in (WIDE, COLLIDE)
            else:
                assert got == status
                assert res.width[r, col] == width
            assert res.score[r, col] == score
        ref = graspness_reference(cloud, int(i), grid, G, params, idx)
        assert res.graspness(params)[r] == ref


def test_score_candidates_thread_independent(three_primitive_cloud):
    cloud = three_primitive_cloud
    grid = CandidateGrid.fibonacci(8, 3, G)
    pts = np.arange(0, len(cloud), 7)
    a = score_candidates(cloud, pts, grid, G)
    b = score_candidates(cloud, pts, grid, G, threads=4)
    assert np.array_equal(a.score, b.score) and np.array_equal(a.status, b.status) and np.array_equal(a.width, b.width)


def test_graspness_range_monotone_and_idempotent(three_primitive_cloud):
    cloud = three_primitive_cloud
    grid = CandidateGrid.fibonacci(10, 4, G)
    pts = np.arange(0, len(cloud), 11)
    res = score_candidates(cloud, pts, grid, G)
    prev = None
    for c in (0.1, 0.3, 0.5, 0.7, 0.9):
        g = res.graspness(QualityParams(c=c))
        assert np.all((g >= 0) & (g <= 1))
        if prev is not None:
            assert np.all(g <= prev)
        prev = g
    again = score_candidates(cloud, pts, grid, G)
    assert np.array_equal(res.score, again.score)


def test_collision_free_denominator(three_primitive_cloud):
    cloud = three_primitive_cloud
    grid = CandidateGrid.fibonacci(10, 4, G)
    pts = np.arange(0, len(cloud), 13)
    res = score_candidates(cloud, pts, grid, G)
    full = res.graspness(QualityParams())
    free = res.graspness(QualityParams(denominator="collision_free"))
    assert np.all(free >= full) and np.all((free >= 0) & (free <= 1))


def test_rigid_invariance_of_graspness(three_primitive_cloud):
    cloud = three_primitive_cloud
    R = euler_xyz((30, 0, 0))
    grid = CandidateGrid.fibonacci(10, 4, G)
    pts = np.arange(0, len(cloud), 17)
    a = score_candidates(cloud, pts, grid, G).graspness(QualityParams())
    b = score_candidates(cloud.transformed(R, (0.1, 0.0, -0.2)), pts, grid.rotated(R), G).graspness(QualityParams())
    assert np.max(np.abs(a - b)) <= 1e-9


def test_quality_params_validation():
    for bad in (dict(mu_grid=()), dict(mu_grid=(0.4, 0.2)), dict(c=1.1), dict(clearance=0.0),
                dict(min_inner=-1), dict(denominator="some")):
        with pytest.raises(PreconditionError):
            QualityParams(**bad)
    with pytest.raises(PreconditionError):
        score_candidates(isolated_point(), [0], CandidateGrid(fibonacci_views(3), 2, (0.01,)), G)
