"""Package exception types."""


class SoftgripError(Exception):
    pass


class MeshNotWatertightError(SoftgripError):
    """Triangle mesh failed the watertightness check at load time."""


class NoOverlapError(SoftgripError):
    """No object surface points fall inside the gripper bounding box."""


class UngraspableError(SoftgripError):
    """Object wider than the maximum finger span in all sampled directions."""


class DegenerateRouteError(SoftgripError):
    """Adjacent tendon waypoints coincide."""


class DivergenceError(SoftgripError):
    """Simulation produced a non-finite quantity."""

    def __init__(self, quantity: str, phase: str = "", frame: int = -1):
        self.quantity = quantity
        self.phase = phase
        self.frame = frame
        msg = f"non-finite {quantity}"
        if phase:
            msg += f" during phase '{phase}'"
        if frame >= 0:
            msg += f" at frame {frame}"
        super().__init__(msg)


class MissingArtifactError(SoftgripError):
    """A pipeline stage is missing an upstream artifact."""

    def __init__(self, path):
        self.path = str(path)
        super().__init__(f"missing artifact: {self.path}")
