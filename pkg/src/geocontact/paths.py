"""Geodesic path records and parallel transport along them."""

import dataclasses
import math

import numpy as np

from .errors import DegeneratePathError


@dataclasses.dataclass
class GeodesicPath:
    """A polyline on a mesh: consecutive points always share a face, so
    3D segment lengths equal intrinsic lengths.

    ``initial_dir`` and ``ending_dir`` are unit chart complexes at the first
    and last point; both point forward along the path. They are None for
    degenerate single-point paths.
    """

    mesh: object
    points: list
    initial_dir: complex = None
    ending_dir: complex = None

    def __post_init__(self):
        pos = np.array([self.mesh.position(p) for p in self.points])
        self._positions = pos
        if len(pos) > 1:
            self.seg_lengths = np.linalg.norm(np.diff(pos, axis=0), axis=1)
        else:
            self.seg_lengths = np.zeros(0)
        # fsum is exactly rounded, so length is independent of segment
        # order and reversed() reproduces it bit for bit
        self.length = math.fsum(self.seg_lengths)
        if self.initial_dir is not None:
            self.initial_dir = self.initial_dir / abs(self.initial_dir)
        if self.ending_dir is not None:
            self.ending_dir = self.ending_dir / abs(self.ending_dir)

    @property
    def start(self):
        return self.points[0]

    @property
    def end(self):
        return self.points[-1]

    def positions(self):
        return self._positions.copy()

    def is_degenerate(self):
        return self.initial_dir is None

    def reversed(self):
        """Same curve traversed end to start.

        Rotating a chart direction by pi is complex negation, so the
        reversed forward directions are the negated originals, swapped.
        """
        ini = None if self.ending_dir is None else -self.ending_dir
        end = None if self.initial_dir is None else -self.initial_dir
        return GeodesicPath(self.mesh, list(reversed(self.points)), ini, end)

    def require_directions(self):
        if self.is_degenerate():
            raise DegeneratePathError("path has zero length, directions are undefined")


def parallel_transport(path, z):
    """Carry tangent complex ``z`` from the start of ``path`` to its end.

    Transport preserves the angle to the path direction and the magnitude;
    on a zero-length path ``z`` comes back unchanged.
    """
    if path.is_degenerate():
        return complex(z)
    return path.ending_dir * (complex(z) / path.initial_dir)
