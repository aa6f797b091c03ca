"""Surface metrics: conformal grids, radial profiles, exact models, finite metric spaces."""
from .cones import ConeSpace, SmoothedCone, SpaceForm, cone_distance, polar_pattern
from .grid import DEFAULT_REACH, ConformalGrid, laplacian
from .metric import FiniteMetricSpace, metric_closure
from .models import MODEL_KINDS, ModelMetric, make_model, thin_cylinder_radius
from .ops import (TruncatedBallWarning, area, ball_area, ball_truncated, distance,
                  gauss_curvature, grid_ball_areas, sample_fms, sample_pattern)
from .radial import RadialProfile, log_nodes

__all__ = [
    "ConeSpace", "SmoothedCone", "SpaceForm", "cone_distance", "polar_pattern",
    "DEFAULT_REACH", "ConformalGrid", "laplacian", "FiniteMetricSpace", "metric_closure",
    "MODEL_KINDS", "ModelMetric", "make_model", "thin_cylinder_radius",
    "TruncatedBallWarning", "area", "ball_area", "ball_truncated", "distance",
    "gauss_curvature", "grid_ball_areas", "sample_fms", "sample_pattern",
    "RadialProfile", "log_nodes",
]
