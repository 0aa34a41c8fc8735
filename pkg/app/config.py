import logging
from enum import Enum
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field

SPEED_OF_LIGHT = 299_792_458.0
VACUUM_PERMITTIVITY = 8.8541878128e-12

DEFAULT_TX_POWER_DBM = 20.0
DEFAULT_RX_SENSITIVITY_DBM = -120.0
DEFAULT_DURATION_S = 60.0
DEFAULT_SNAPSHOT_INTERVAL_S = 0.1
DEFAULT_SYNC_PRECISION_NS = 10.0
DEFAULT_BS_SPACING_MS = 10.0

# Intersections this close to a segment end belong to the interaction itself.
SURFACE_EPS_M = 1e-6
POLYGON_TOL_M = 1e-9
TOA_TIE_S = 1e-15

LOG_FORMAT = "%(asctime)s | %(levelname)s | %(name)s | %(message)s"
LOG_FILE: Optional[str] = None


class Band(str, Enum):
    CBAND = "cband"
    MMWAVE = "mmwave"


class BandConfig(BaseModel):
    """Carrier configuration. OFDM numerology is carried as metadata only."""

    model_config = ConfigDict(frozen=True)

    name: Band
    center_frequency_hz: float = Field(gt=0)
    bandwidth_hz: float = Field(gt=0)
    subcarrier_spacing_hz: float = Field(gt=0)
    rx_sensitivity_dbm: float = DEFAULT_RX_SENSITIVITY_DBM

    @property
    def wavelength_m(self) -> float:
        return SPEED_OF_LIGHT / self.center_frequency_hz


CBAND = BandConfig(
    name=Band.CBAND,
    center_frequency_hz=3.775e9,
    bandwidth_hz=100e6,
    subcarrier_spacing_hz=30e3,
)
MMWAVE = BandConfig(
    name=Band.MMWAVE,
    center_frequency_hz=26.85e9,
    bandwidth_hz=400e6,
    subcarrier_spacing_hz=120e3,
)
BANDS = {Band.CBAND: CBAND, Band.MMWAVE: MMWAVE}


def band_config(name: str, rx_sensitivity_dbm: Optional[float] = None) -> BandConfig:
    band = BANDS[Band(name.lower())]
    if rx_sensitivity_dbm is not None:
        band = band.model_copy(update={"rx_sensitivity_dbm": rx_sensitivity_dbm})
    return band


def configure_logging(level: int = logging.INFO, log_file: Optional[str] = LOG_FILE):
    handlers = [logging.StreamHandler()]
    if log_file:
        handlers.append(logging.FileHandler(log_file, encoding="utf-8"))
    logging.basicConfig(
        level=level,
        format=LOG_FORMAT,
        handlers=handlers,
        force=True,
    )
