"""Built-in mineral-analog spectral library.

The signatures are procedural: a smooth continuum, an optional ferric
charge-transfer edge in the visible, and Gaussian absorption bands placed near
the diagnostic wavelengths of each named mineral. They are stand-ins for
measured library spectra, good enough to exercise the unmixing pipeline, and
are *not* laboratory measurements.
"""

from __future__ import annotations

from importlib import resources

import numpy as np

BUILTIN_LIBRARY = "mineral_analogs.csv"

# The six materials of the first synthetic experiment, and the eight similar
# clays and iron oxides of the second.
EXPERIMENT_1 = ("Alunite", "Andradite", "Buddingtonite", "Calcite", "Jarosite", "Chalcedony")
EXPERIMENT_2 = ("Kaolinite", "Gibbsite", "Lepidolite", "Montmorillonite",
                "Muscovite", "Goethite", "Hematite", "Limonite")

# name: (albedo, slope per um, curvature, visible edge (centre, width, floor) or None,
#        [(band centre um, depth, width um), ...])
_MINERALS = {
    "Alunite": (0.72, 0.02, -0.04, None,
                [(1.43, 0.35, 0.025), (1.76, 0.25, 0.03), (2.17, 0.40, 0.03), (2.32, 0.20, 0.03)]),
    "Andradite": (0.30, 0.10, 0.0, (0.50, 0.05, 0.25),
                  [(0.86, 0.25, 0.12), (1.25, 0.35, 0.25)]),
    "Buddingtonite": (0.55, -0.05, 0.0, None,
                      [(1.56, 0.20, 0.03), (2.02, 0.30, 0.035), (2.12, 0.28, 0.03), (1.91, 0.30, 0.05)]),
    "Calcite": (0.85, -0.03, 0.0, None,
                [(1.99, 0.10, 0.04), (2.16, 0.08, 0.04), (2.34, 0.50, 0.04)]),
    "Jarosite": (0.45, 0.12, -0.05, (0.50, 0.04, 0.10),
                 [(0.92, 0.40, 0.10), (1.47, 0.20, 0.03), (2.265, 0.35, 0.03)]),
    "Chalcedony": (0.60, 0.06, -0.02, None,
                   [(1.41, 0.40, 0.05), (1.91, 0.50, 0.06), (2.25, 0.35, 0.08)]),
    "Kaolinite": (0.80, 0.00, -0.02, None,
                  [(1.395, 0.25, 0.015), (1.415, 0.25, 0.015), (1.91, 0.10, 0.03),
                   (2.165, 0.30, 0.02), (2.205, 0.35, 0.02)]),
    "Gibbsite": (0.78, -0.01, -0.02, None,
                 [(1.52, 0.20, 0.02), (1.55, 0.25, 0.02), (2.27, 0.25, 0.04), (1.91, 0.08, 0.03)]),
    "Lepidolite": (0.75, 0.01, -0.03, None,
                   [(1.41, 0.25, 0.02), (1.91, 0.08, 0.03), (2.20, 0.35, 0.025), (2.44, 0.20, 0.03)]),
    "Montmorillonite": (0.70, 0.02, -0.03, None,
                        [(1.41, 0.30, 0.03), (1.91, 0.40, 0.04), (2.205, 0.25, 0.03)]),
    "Muscovite": (0.72, 0.02, -0.03, None,
                  [(1.41, 0.25, 0.02), (1.91, 0.08, 0.03), (2.20, 0.40, 0.025),
                   (2.35, 0.20, 0.03), (2.44, 0.15, 0.03)]),
    "Goethite": (0.45, 0.06, -0.03, (0.55, 0.04, 0.08),
                 [(0.66, 0.15, 0.04), (0.93, 0.40, 0.12), (1.91, 0.05, 0.04)]),
    "Hematite": (0.40, 0.08, -0.04, (0.58, 0.03, 0.05),
                 [(0.53, 0.20, 0.03), (0.86, 0.45, 0.09)]),
    "Limonite": (0.42, 0.07, -0.03, (0.56, 0.05, 0.08),
                 [(0.66, 0.10, 0.05), (0.92, 0.35, 0.13), (1.91, 0.12, 0.05)]),
    "Nontronite": (0.50, 0.05, -0.03, (0.52, 0.05, 0.20),
                   [(0.95, 0.20, 0.10), (1.42, 0.30, 0.03), (1.91, 0.45, 0.04), (2.285, 0.30, 0.025)]),
    "Pyrophyllite": (0.82, -0.01, -0.01, None,
                     [(1.395, 0.35, 0.012), (2.165, 0.50, 0.012)]),
    "Dumortierite": (0.55, 0.03, -0.02, (0.45, 0.05, 0.30),
                     [(1.41, 0.15, 0.025), (2.17, 0.25, 0.02), (2.26, 0.20, 0.025), (2.36, 0.15, 0.03)]),
    "Sphene": (0.35, 0.04, -0.01, (0.45, 0.06, 0.50),
               [(1.05, 0.12, 0.20), (2.00, 0.10, 0.30)]),
}


def aviris_like_wavelengths(bands: int = 224, start: float = 0.37, stop: float = 2.50) -> np.ndarray:
    """Evenly spaced band centres in micrometres."""
    return np.linspace(start, stop, bands)


def mineral_signature(name: str, wavelengths) -> np.ndarray:
    """Procedural reflectance of ``name`` sampled at ``wavelengths`` (um)."""
    albedo, slope, curve, edge, bands = _MINERALS[name]
    wl = np.asarray(wavelengths, dtype=float)
    x = wl - 1.4
    r = albedo + slope * x + curve * x ** 2
    if edge is not None:
        centre, width, floor = edge
        r = r * (floor + (1.0 - floor) / (1.0 + np.exp(-(wl - centre) / width)))
    for centre, depth, width in bands:
        r = r * (1.0 - depth * np.exp(-0.5 * ((wl - centre) / width) ** 2))
    return np.clip(r, 0.01, 1.0)


def mineral_names() -> list[str]:
    return list(_MINERALS)


def synthetic_library(wavelengths=None):
    """Build the full procedural library as a :class:`~sgnmf.io.SpectralLibrary`."""
    from .io import SpectralLibrary

    wl = aviris_like_wavelengths() if wavelengths is None else np.asarray(wavelengths, dtype=float)
    sigs = np.column_stack([mineral_signature(n, wl) for n in _MINERALS])
    return SpectralLibrary(names=list(_MINERALS), wavelengths=wl, signatures=sigs)


def builtin_library_path():
    return resources.files("sgnmf") / "data" / BUILTIN_LIBRARY


def load_builtin_library():
    """Load the shipped CSV copy of :func:`synthetic_library`."""
    from .io import load_spectral_library

    with resources.as_file(builtin_library_path()) as path:
        return load_spectral_library(path, "csv")
