"""Forward modeling: current patterns, meshing, and the Complete Electrode Model."""

from .patterns import CurrentPatternSet, MeasurementFrame, change_of_basis, trig_patterns
from .mesh import Mesh, generate_mesh, load_mesh, save_mesh
from .cem import (
    CEMSystem,
    Ellipse,
    Phantom,
    Polygon,
    homogeneous_frame,
    radial_oracle,
    simulate_frame,
    solve_cem,
)

__all__ = [
    "CEMSystem",
    "CurrentPatternSet",
    "Ellipse",
    "MeasurementFrame",
    "Mesh",
    "Phantom",
    "Polygon",
    "change_of_basis",
    "generate_mesh",
    "homogeneous_frame",
    "load_mesh",
    "radial_oracle",
    "save_mesh",
    "simulate_frame",
    "solve_cem",
    "trig_patterns",
]
