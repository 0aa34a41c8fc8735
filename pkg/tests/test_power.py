import math

import pytest

from app.config import CBAND, MMWAVE
from app.errors import DegenerateGeometryError
from app.scene import BandConstants, Material
from app.services.power import (
    complex_permittivity,
    fresnel_kirchhoff_v,
    fspl_db,
    knife_edge_loss_db,
    penetration_loss_db,
    reflection_loss_db,
)
from tests.conftest import CONCRETE, GLASS, METAL

LOSSLESS = Material("lossless", 4.0, 0.0)


def test_fspl_reference_value():
    assert fspl_db(1.0, CBAND.center_frequency_hz) == pytest.approx(43.986, abs=0.01)


def test_fspl_grows_six_db_per_doubling():
    assert fspl_db(20.0, 3.775e9) - fspl_db(10.0, 3.775e9) == pytest.approx(20.0 * math.log10(2.0))


def test_fspl_gap_between_bands():
    gap = fspl_db(15.0, MMWAVE.center_frequency_hz) - fspl_db(15.0, CBAND.center_frequency_hz)
    assert gap == pytest.approx(20.0 * math.log10(26.85 / 3.775))


@pytest.mark.parametrize("distance", [0.0, -1.0])
def test_fspl_rejects_degenerate_distance(distance):
    with pytest.raises(DegenerateGeometryError):
        fspl_db(distance, 3.775e9)


def test_complex_permittivity_carries_conductivity():
    eps = complex_permittivity(5.24, 0.12, 3.775e9)
    assert eps.real == 5.24
    assert eps.imag < 0


def test_reflection_loss_at_normal_incidence():
    # |Gamma| = (2 - 1) / (2 + 1) for eps_r = 4
    assert reflection_loss_db(LOSSLESS, 0.0, "cband", 3.775e9) == pytest.approx(20.0 * math.log10(3.0))


def test_reflection_loss_falls_towards_grazing_incidence():
    losses = [reflection_loss_db(CONCRETE, math.radians(a), "cband", 3.775e9) for a in (0, 30, 60, 85)]
    assert losses == sorted(losses, reverse=True)
    assert all(loss > 0 for loss in losses)


def test_metal_reflects_almost_everything():
    assert reflection_loss_db(METAL, 0.3, "cband", 3.775e9) < 0.01


def test_band_specific_constants_override_defaults():
    material = Material("tuned", 4.0, 0.0, bands=(BandConstants("mmwave", 9.0, 0.0),))
    assert material.constants("mmwave") == (9.0, 0.0)
    assert material.constants("cband") == (4.0, 0.0)
    # |Gamma| = (3 - 1) / (3 + 1) for eps_r = 9
    assert reflection_loss_db(material, 0.0, "mmwave", 26.85e9) == pytest.approx(20.0 * math.log10(2.0))


def test_penetration_interface_loss_of_thin_slab():
    loss = penetration_loss_db(LOSSLESS, 0.0, "cband", 3.775e9)
    assert loss == pytest.approx(-20.0 * math.log10(8.0 / 9.0))


def test_penetration_absorption_grows_with_thickness():
    thick = Material("glass", GLASS.relative_permittivity, GLASS.conductivity, True, 0.05)
    assert penetration_loss_db(thick, 0.0, "cband", 3.775e9) > penetration_loss_db(GLASS, 0.0, "cband", 3.775e9)


def test_fresnel_kirchhoff_parameter_sign():
    assert fresnel_kirchhoff_v(0.1, 0.1, shadowed=True) == pytest.approx(2.0)
    assert fresnel_kirchhoff_v(0.1, 0.1, shadowed=False) == pytest.approx(-2.0)
    assert fresnel_kirchhoff_v(0.0, 0.1, shadowed=True) == 0.0


def test_knife_edge_loss_at_grazing():
    assert knife_edge_loss_db(0.0) == pytest.approx(6.9 + 20.0 * math.log10(math.sqrt(1.01) - 0.1))
    assert knife_edge_loss_db(0.0) == pytest.approx(6.03, abs=0.01)


def test_knife_edge_loss_is_zero_deep_in_the_lit_region():
    assert knife_edge_loss_db(-0.78) == 0.0
    assert knife_edge_loss_db(-3.0) == 0.0


def test_knife_edge_loss_increases_with_shadowing():
    values = [knife_edge_loss_db(v) for v in (-0.5, 0.0, 1.0, 2.4, 10.0)]
    assert values == sorted(values)
    assert values[-1] > 25.0
