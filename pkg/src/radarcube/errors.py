"""Exception hierarchy with stable CLI exit codes.

Exit codes: 2 validation, 3 I/O, 4 numeric or infeasible.
"""


class RadarCubeError(Exception):
    """Base class; ``code`` is the machine-readable name, ``exit_code`` the CLI status."""

    code = "RadarCubeError"
    exit_code = 4


class ValidationError(RadarCubeError, ValueError):
    code = "ValidationError"
    exit_code = 2


class AliasedSceneError(ValidationError):
    """A scatterer's beat frequency reaches f_s/2 somewhere in the frame."""

    code = "AliasedScene"


class SceneMismatchError(ValidationError):
    code = "SceneMismatch"


class FileFormatError(RadarCubeError, OSError):
    """Corrupt or inconsistent file (bad magic, dimensions, header mismatch)."""

    code = "FileFormat"
    exit_code = 3


class InfeasibleConstraints(RadarCubeError):
    code = "InfeasibleConstraints"
    exit_code = 4


class MainlobeUnresolved(RadarCubeError, ValueError):
    """The -3 dB mainlobe edge is not reached inside the evaluated grid."""

    code = "MainlobeUnresolved"
    exit_code = 4


class DegenerateSnapshot(RadarCubeError, ValueError):
    code = "DegenerateSnapshot"
    exit_code = 4
