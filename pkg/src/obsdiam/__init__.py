"""Observable diameter of finite metric measure spaces and their l_p powers."""

from .errors import MMError
from .mmspace import FiniteMMSpace, generate, load, new_finite, save, scale, stats
from .realdist import DiscreteRealMeasure, convolve_power, partial_diameter, pushforward
from .invariants import Bracket, concentration, dominates, obs_diam_bracket, obs_diam_lower_family, sep
from .products import ProductHandle, asymptotic_lower, mc_obs_lower, product_explicit, upper_bound, witness_bound
from .boxdist import box_distance_exact, box_distance_upper, product_lemma_bound

__version__ = "0.1.0"

__all__ = [
    "MMError",
    "FiniteMMSpace", "generate", "load", "new_finite", "save", "scale", "stats",
    "DiscreteRealMeasure", "convolve_power", "partial_diameter", "pushforward",
    "Bracket", "concentration", "dominates", "obs_diam_bracket", "obs_diam_lower_family", "sep",
    "ProductHandle", "asymptotic_lower", "mc_obs_lower", "product_explicit", "upper_bound", "witness_bound",
    "box_distance_exact", "box_distance_upper", "product_lemma_bound",
]
