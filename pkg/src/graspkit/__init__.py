"""Analytic toolkit for small-scale-aware 6-DoF grasp analysis on labeled point clouds."""

__version__ = "0.1.0"

from .core import GraspPose, GripperModel, LabeledCloud, in_plane_pose, to_local, to_world
from .errors import (
    ConsistencyError, DegenerateContact, DuplicateLabel, EmptyCloud, EmptyGraspable, GraspkitError,
    Insufficient, NoObjects, ParseError, PreconditionError,
)
from .spatial import SpatialIndex, ball_query, build_index, cylinder_query
from .sampling import SamplePlan, balanced_sample, fps, training_sample
from .grouping import RadiiSchedule, group_multi, group_single
from .collision import check_collision, gripper_boxes
from .quality import (
    CandidateGrid, ContactPair, QualityParams, annotate_graspness, evaluate_grasp, find_contacts,
    force_closure, graspness, min_friction, quality_score, score_candidates,
)
from .scenegen import PrimitiveSpec, SceneSpec, TableSpec, build_scene, perturb_labels, sample_surface
from .evaluation import GraspList, ap_mu, ap_overall, approach_filter, nms, precision_at_k, scale_stratified_ap
