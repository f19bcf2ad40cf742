"""Exception taxonomy shared across the pipeline."""


class PcdgenError(Exception):
    """Base class for all pipeline errors."""


class InvariantViolation(PcdgenError):
    """A domain-type invariant failed validation (e.g. non-orthonormal pose)."""


class MalformedContainer(PcdgenError):
    """A demonstration container is structurally broken (bad magic, truncation)."""


class IoFailure(PcdgenError):
    """A filesystem write failed."""


class NonRigidTemplate(PcdgenError):
    """Completion was requested for a template that is not rigid."""


class MissingPose(PcdgenError):
    """Tracking input lacks a pose for a (frame, object) pair."""

    def __init__(self, frame: int, object_id: int):
        super().__init__(f"missing pose for object {object_id} at frame {frame}")
        self.frame = frame
        self.object_id = object_id


class SchemaError(PcdgenError):
    """An annotation file is missing a field or has a field of the wrong type."""


class InterleaveError(PcdgenError):
    """Annotation segments do not alternate motion/skill correctly."""


class RangeError(PcdgenError):
    """An annotation id or frame index is out of range."""


class DegenerateGeometry(PcdgenError):
    """Plane fitting could not find a dominant plane."""


class SamplingExhausted(PcdgenError):
    """No valid group transform was found within the attempt budget."""


class PlanError(PcdgenError):
    """The augmentation plan is inconsistent with the scene or annotation."""


class ConstraintViolation(PcdgenError):
    """A bimanual rigid-coupling constraint was violated."""

    def __init__(self, frame: int, message: str = ""):
        super().__init__(message or f"inter-arm relative pose drifts at frame {frame}")
        self.frame = frame


class FillInfeasible(PcdgenError):
    """Shrink-fill rectangle collapsed below the configured minimum size."""


class SpecError(PcdgenError):
    """A synthetic scene specification is invalid."""
