import pytest

from rumexsim.geo import GeoPoint, LocalPoint
from rumexsim.mission import FieldPolygon


@pytest.fixture
def origin() -> GeoPoint:
    return GeoPoint(49.0, 8.0)


def square(side_m: float, x0: float = 0.0, y0: float = 0.0) -> FieldPolygon:
    return FieldPolygon([
        LocalPoint(x0, y0), LocalPoint(x0 + side_m, y0),
        LocalPoint(x0 + side_m, y0 + side_m), LocalPoint(x0, y0 + side_m),
    ])


@pytest.fixture
def hectare() -> FieldPolygon:
    return square(100.0)


@pytest.fixture
def quarter_ha() -> FieldPolygon:
    return square(50.0)
