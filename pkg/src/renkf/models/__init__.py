from .base import Model
from .chebyshev import ChebyshevGrid, chebyshev_grid
from .integrate import integrate, rk4_step
from .rijke import Rijke, RijkeParams, RijkeState, heat_release, pressure_observation, rijke_rhs
from .vdp import VanDerPol, VdpParams, vdp_rhs
