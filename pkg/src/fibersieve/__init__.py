"""Computational model of a two-color optical trap on a tapered nanofiber.

The subpackages cover guided modes (:mod:`.modes`), optical forces on gold
spheres (:mod:`.particles`), the axial trap landscape (:mod:`.taper`),
Brownian transport and kymograph rendering (:mod:`.transport`), trajectory
analysis (:mod:`.tracking`) and orchestration (:mod:`.pipeline`).
"""

__version__ = "0.1.0"
