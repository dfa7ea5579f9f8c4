"""Phase-field approximation of mean curvature flow with a constant contact angle.

The package builds sharp-interface evolutions in a disk, glues calibration
fields around them, solves the Allen-Cahn equation with a nonlinear Robin
boundary condition, and measures how close the two are.
"""

__version__ = "0.1.0"
