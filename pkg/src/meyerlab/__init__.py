"""Numerical laboratory for Meyer sets, their Bragg spectra and epsilon-dual characters."""

__version__ = "0.1.0"

from .pointset import (Box, PointSet, build_pointset, covering_radius, deform, density_bounds,
                       difference_set, meyer_certificate, min_separation, thin)
from .cutproject import (CutProjectScheme, EmbeddingLattice, fibonacci_scheme, fourier_candidates,
                         generate_fibonacci, generate_lattice_patch, generate_model_set,
                         integer_scheme)
from .autocorr import WeightedComb, autocorr_coefficient, finite_autocorrelation
from .spectrum import (PeakSet, SpectrumEstimate, interval_peaks, scan_spectrum, visible_peaks)
from .harmonic import (CharacterSet, almost_periods, epsilon_dual_set, extract_period_lattice,
                       sup_distance, translation_distance)
from .verify import CheckReport, count_failures, run_suite

__all__ = sorted(name for name, obj in globals().items()
                 if not name.startswith("_") and not isinstance(obj, type(__import__("sys"))))
