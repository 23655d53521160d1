"""Coordinate and attitude math for flight-local reference frames.

Global positions are latitude/longitude in degrees plus altitude in meters
above the takeoff datum.  Local positions are meters in an East-North-Up
tangent plane centered at a flight's first pose, with attitude angles taken
relative to that first pose.  Angles are radians everywhere in memory;
degrees appear only at file boundaries.

The tangent-plane mapping is the equirectangular approximation on a sphere:

    x = (lon - lon0) * cos(lat0) * R * pi/180
    y = (lat - lat0) * R * pi/180
    z = alt - alt0

with R = 6,371,000 m.  Its inverse is exact algebraically, and the mapping is
only trusted for offsets below 0.1 degree in latitude and longitude.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

from uavbench.errors import HarnessError

EARTH_RADIUS_M = 6_371_000.0
DEG_TO_M = EARTH_RADIUS_M * math.pi / 180.0

# Beyond this offset the flat-plane approximation is the wrong tool.
MAX_TANGENT_OFFSET_DEG = 0.1

_TWO_PI = 2.0 * math.pi


class GeoError(HarnessError):
    pass


class InvalidLatitude(GeoError):
    pass


class InvalidLongitude(GeoError):
    pass


class TangentPlaneViolation(GeoError):
    pass


class NonFinite(GeoError):
    pass


class OutOfRange(GeoError):
    pass


def wrap_angle(a: float) -> float:
    """Reduce an angle to (-pi, pi]; exactly -pi maps to +pi."""
    if not math.isfinite(a):
        raise NonFinite(f"angle is not finite: {a!r}")
    r = math.fmod(a, _TWO_PI)
    if r <= -math.pi:
        r += _TWO_PI
    elif r > math.pi:
        r -= _TWO_PI
    return r


def interp_angle(a: float, b: float, t: float) -> float:
    """Interpolate from angle a to angle b along the shortest arc.

    t is the blend fraction in [0, 1].  When a and b are exactly pi apart the
    sweep goes counter-clockwise (through +pi relative to a).
    """
    if not 0.0 <= t <= 1.0:
        raise OutOfRange(f"blend fraction outside [0, 1]: {t!r}")
    a = wrap_angle(a)
    d = wrap_angle(b - a)
    return wrap_angle(a + t * d)


def _require_finite(name: str, *values: float) -> None:
    for v in values:
        if not math.isfinite(v):
            raise NonFinite(f"{name} is not finite: {v!r}")


@dataclass(frozen=True)
class GeoPose:
    """Global pose: degrees latitude/longitude, meters altitude, radian attitude.

    lat must lie in [-90, 90], lon in (-180, 180].  Attitude angles are
    normalized to (-pi, pi] on construction.
    """

    lat: float
    lon: float
    alt: float
    roll: float
    pitch: float
    yaw: float

    def __post_init__(self) -> None:
        if not -90.0 <= self.lat <= 90.0:
            raise InvalidLatitude(f"latitude out of range: {self.lat!r}")
        if not -180.0 < self.lon <= 180.0:
            raise InvalidLongitude(f"longitude out of range: {self.lon!r}")
        _require_finite("altitude", self.alt)
        for field in ("roll", "pitch", "yaw"):
            object.__setattr__(self, field, wrap_angle(getattr(self, field)))


@dataclass(frozen=True)
class LocalPose:
    """Pose in a flight-local ENU frame: meters position, radian attitude.

    Attitude angles are normalized to (-pi, pi] on construction.
    """

    x: float
    y: float
    z: float
    roll: float
    pitch: float
    yaw: float

    def __post_init__(self) -> None:
        _require_finite("position", self.x, self.y, self.z)
        for field in ("roll", "pitch", "yaw"):
            object.__setattr__(self, field, wrap_angle(getattr(self, field)))

    @property
    def position(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.z)

    @property
    def attitude(self) -> tuple[float, float, float]:
        return (self.roll, self.pitch, self.yaw)


class Vec6(NamedTuple):
    """Trajectory-embedding vector: position plus attitude cosines.

    Component order is (x, y, z, cos roll, cos yaw, cos pitch).
    """

    x: float
    y: float
    z: float
    cos_roll: float
    cos_yaw: float
    cos_pitch: float


def gps_to_local(origin: GeoPose, p: GeoPose) -> LocalPose:
    """Project a global pose into the tangent plane centered at origin.

    Attitude comes out relative to the origin attitude (shortest-arc
    difference per axis).  Raises TangentPlaneViolation when the lat/lon
    offset reaches 0.1 degree.
    """
    dlat = p.lat - origin.lat
    dlon = p.lon - origin.lon
    if abs(dlat) >= MAX_TANGENT_OFFSET_DEG or abs(dlon) >= MAX_TANGENT_OFFSET_DEG:
        raise TangentPlaneViolation(
            f"offset too large for tangent plane: dlat={dlat!r} dlon={dlon!r}"
        )
    return LocalPose(
        x=dlon * math.cos(math.radians(origin.lat)) * DEG_TO_M,
        y=dlat * DEG_TO_M,
        z=p.alt - origin.alt,
        roll=wrap_angle(p.roll - origin.roll),
        pitch=wrap_angle(p.pitch - origin.pitch),
        yaw=wrap_angle(p.yaw - origin.yaw),
    )


def local_to_gps(origin: GeoPose, p: LocalPose) -> GeoPose:
    """Invert gps_to_local: lift a tangent-plane pose back to global."""
    lat = origin.lat + p.y / DEG_TO_M
    lon = origin.lon + p.x / (math.cos(math.radians(origin.lat)) * DEG_TO_M)
    if abs(lat - origin.lat) >= MAX_TANGENT_OFFSET_DEG or abs(
        lon - origin.lon
    ) >= MAX_TANGENT_OFFSET_DEG:
        raise TangentPlaneViolation(
            f"offset too large for tangent plane: lat={lat!r} lon={lon!r}"
        )
    return GeoPose(
        lat=lat,
        lon=lon,
        alt=origin.alt + p.z,
        roll=wrap_angle(origin.roll + p.roll),
        pitch=wrap_angle(origin.pitch + p.pitch),
        yaw=wrap_angle(origin.yaw + p.yaw),
    )


def pose_to_vec6(p: LocalPose) -> Vec6:
    """Embed a local pose for trajectory comparison.

    Order is fixed: (x, y, z, cos roll, cos yaw, cos pitch).
    """
    return Vec6(
        p.x, p.y, p.z, math.cos(p.roll), math.cos(p.yaw), math.cos(p.pitch)
    )


def compose_pose(anchor: LocalPose, offset: LocalPose) -> LocalPose:
    """Apply a body-frame offset to an anchor pose.

    The xy offset is rotated by the anchor yaw only; z translates directly;
    attitude offsets compose additively with wrapping.
    """
    c = math.cos(anchor.yaw)
    s = math.sin(anchor.yaw)
    return LocalPose(
        x=anchor.x + c * offset.x - s * offset.y,
        y=anchor.y + s * offset.x + c * offset.y,
        z=anchor.z + offset.z,
        roll=wrap_angle(anchor.roll + offset.roll),
        pitch=wrap_angle(anchor.pitch + offset.pitch),
        yaw=wrap_angle(anchor.yaw + offset.yaw),
    )


def body_offset(anchor: LocalPose, p: LocalPose) -> LocalPose:
    """Express a world pose as a body-frame offset from anchor.

    Exact inverse of compose_pose up to floating-point rounding.
    """
    dx = p.x - anchor.x
    dy = p.y - anchor.y
    c = math.cos(anchor.yaw)
    s = math.sin(anchor.yaw)
    return LocalPose(
        x=c * dx + s * dy,
        y=-s * dx + c * dy,
        z=p.z - anchor.z,
        roll=wrap_angle(p.roll - anchor.roll),
        pitch=wrap_angle(p.pitch - anchor.pitch),
        yaw=wrap_angle(p.yaw - anchor.yaw),
    )


def pose_delta(origin: LocalPose, p: LocalPose) -> LocalPose:
    """Re-center a pose on origin without rotating the position axes.

    This is the frame used by recorded episodes: positions translate, attitude
    angles subtract with wrapping.
    """
    return LocalPose(
        x=p.x - origin.x,
        y=p.y - origin.y,
        z=p.z - origin.z,
        roll=wrap_angle(p.roll - origin.roll),
        pitch=wrap_angle(p.pitch - origin.pitch),
        yaw=wrap_angle(p.yaw - origin.yaw),
    )
