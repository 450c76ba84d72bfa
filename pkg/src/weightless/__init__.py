"""Motion labeling, relaxation prediction and torque modulation for humanoid tracking."""

from .autolabel import annotate_sequence
from .errors import DimensionError, FormatError, SimulationDiverged, WeightlessError
from .kinematics import KinematicTree, Pose, forward_kinematics, load_example_tree, load_tree
from .motion import MotionSequence

__version__ = "0.1.0"

__all__ = ["annotate_sequence", "DimensionError", "FormatError", "SimulationDiverged", "WeightlessError",
           "KinematicTree", "Pose", "forward_kinematics", "load_example_tree", "load_tree",
           "MotionSequence", "__version__"]
