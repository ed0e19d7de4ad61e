"""Exception types shared across the package."""


class GeoContactError(Exception):
    """Base class for all errors raised by this package."""


class MeshLoadError(GeoContactError):
    """Raised when a mesh file cannot be parsed or describes invalid geometry."""


class NonManifoldError(GeoContactError):
    """Raised when connectivity is not manifold.

    Carries the offending element so callers can report it: ``kind`` is
    ``"edge"`` or ``"vertex"``, ``element`` is a vertex index or an ordered
    vertex pair.
    """

    def __init__(self, kind, element, message):
        super().__init__(message)
        self.kind = kind
        self.element = element


class InvalidPointError(GeoContactError):
    """Raised when a surface point has out-of-range indices or coordinates."""


class TraceTruncationError(GeoContactError):
    """Raised when a traced geodesic runs off an open boundary.

    ``partial`` holds the path walked up to the boundary crossing.
    """

    def __init__(self, partial, message="trace left the surface at an open boundary"):
        super().__init__(message)
        self.partial = partial


class DegeneratePathError(GeoContactError):
    """Raised when a direction or transport is requested on a zero-length path."""


class DisconnectedPointsError(GeoContactError):
    """Raised when no surface path joins the two query points."""


class PatchError(GeoContactError):
    """Raised for invalid patch inputs: empty axes, repeated consecutive
    axis points, or region points that no axis sample can reach."""


class EditError(GeoContactError):
    """Raised for invalid edit operations: unknown patch ids, out-of-range
    deformation pivots, hierarchy cycles, or an empty undo journal."""


class SceneError(GeoContactError):
    """Raised when a scene, rig, or patch file is malformed."""


class SolveError(GeoContactError):
    """Raised when a pose solve is given inconsistent inputs."""
