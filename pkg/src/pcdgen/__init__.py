"""Point-cloud demonstration generation toolkit.

Takes one parsed robot demonstration (point-cloud observations, end-effector
actions, object templates and poses, human skill/motion annotations) and
synthesizes batches of spatially augmented, camera-consistent demonstrations
without a simulator or renderer in the loop.
"""

from .errors import (
    ConstraintViolation,
    DegenerateGeometry,
    FillInfeasible,
    InterleaveError,
    InvariantViolation,
    IoFailure,
    MalformedContainer,
    MissingPose,
    NonRigidTemplate,
    PcdgenError,
    PlanError,
    RangeError,
    SamplingExhausted,
    SchemaError,
)
from .model import (
    Action,
    CameraModel,
    Demonstration,
    ObjectTemplate,
    ParsedScene,
    PointCloud,
    TrackingInput,
    transform_cloud,
)
from .annotations import AnnotationSet, parse_annotation, write_annotation
from .augment import (
    DemoPlan,
    GeneratorConfig,
    SamplerConfig,
    generate_dataset,
    generate_one,
)
from .parsing import parse_scene
from .validate import validate_dataset, validate_demo

__version__ = "0.1.0"
