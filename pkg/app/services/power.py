"""Link-budget terms: free-space loss, Fresnel interface losses, knife-edge diffraction.

All losses are positive dB. Fresnel coefficients use perpendicular (TE)
polarization with the complex permittivity eps_r - j*sigma/(omega*eps0).
"""

import math

import numpy as np

from app.config import SPEED_OF_LIGHT, VACUUM_PERMITTIVITY
from app.errors import DegenerateGeometryError
from app.scene import Material

NEPER_TO_DB = 20.0 / math.log(10.0)
KNIFE_EDGE_FLOOR_V = -0.78


def fspl_db(distance_m: float, frequency_hz: float) -> float:
    if distance_m <= 0.0:
        raise DegenerateGeometryError(f"zero-length path ({distance_m} m)")
    return 20.0 * math.log10(4.0 * math.pi * distance_m * frequency_hz / SPEED_OF_LIGHT)


def complex_permittivity(relative_permittivity: float, conductivity: float, frequency_hz: float) -> complex:
    omega = 2.0 * math.pi * frequency_hz
    return complex(relative_permittivity, -conductivity / (omega * VACUUM_PERMITTIVITY))


def fresnel_reflection_perpendicular(eps_c: complex, incidence_rad: float) -> complex:
    cos_i = math.cos(incidence_rad)
    root = np.sqrt(eps_c - math.sin(incidence_rad) ** 2)
    return complex((cos_i - root) / (cos_i + root))


def _material_eps(material: Material, band: str, frequency_hz: float) -> complex:
    eps_r, sigma = material.constants(band)
    return complex_permittivity(eps_r, sigma, frequency_hz)


def reflection_loss_db(material: Material, incidence_rad: float, band: str, frequency_hz: float) -> float:
    gamma = abs(fresnel_reflection_perpendicular(_material_eps(material, band, frequency_hz), incidence_rad))
    if gamma <= 0.0:
        return math.inf
    return -20.0 * math.log10(gamma)


def penetration_loss_db(material: Material, incidence_rad: float, band: str, frequency_hz: float) -> float:
    """Entry and exit interface losses of a slab plus absorption along the refracted ray."""
    eps_c = _material_eps(material, band, frequency_hz)
    gamma_sq = abs(fresnel_reflection_perpendicular(eps_c, incidence_rad)) ** 2
    transmitted = (1.0 - gamma_sq) ** 2
    if transmitted <= 0.0:
        return math.inf
    interface = -10.0 * math.log10(transmitted)

    if material.thickness_m <= 0.0:
        return interface
    eps_r = material.constants(band)[0]
    sin_t = math.sin(incidence_rad) / math.sqrt(eps_r)
    cos_t = math.sqrt(max(1.0 - sin_t * sin_t, 1e-12))
    k0 = 2.0 * math.pi * frequency_hz / SPEED_OF_LIGHT
    alpha = k0 * abs(np.sqrt(eps_c).imag)
    return interface + NEPER_TO_DB * alpha * material.thickness_m / cos_t


def fresnel_kirchhoff_v(excess_m: float, wavelength_m: float, shadowed: bool) -> float:
    """Diffraction parameter from the excess length of the diffracted ray (v^2 = 4*excess/lambda)."""
    v = 2.0 * math.sqrt(max(excess_m, 0.0) / wavelength_m)
    return v if shadowed else -v


def knife_edge_loss_db(v: float) -> float:
    if v <= KNIFE_EDGE_FLOOR_V:
        return 0.0
    return 6.9 + 20.0 * math.log10(math.sqrt((v - 0.1) ** 2 + 1.0) + v - 0.1)
