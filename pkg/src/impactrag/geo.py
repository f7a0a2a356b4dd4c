"""ZIP polygons, rain-gauge lookup, and imagery tile selection."""

from __future__ import annotations

import csv
import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Iterable, Sequence

from .corpus import ZIP_RE, parse_timestamp
from .window import TimeWindow

EARTH_RADIUS_KM = 6371.0
_EDGE_EPS = 1e-12

LatLon = tuple[float, float]


class UnknownZipError(KeyError):
    pass


def _check_coord(p: LatLon) -> None:
    lat, lon = p
    if not (-90.0 <= lat <= 90.0) or not (-180.0 <= lon <= 180.0):
        raise ValueError(f"coordinate out of range: {p}")


def haversine_km(a: LatLon, b: LatLon) -> float:
    _check_coord(a)
    _check_coord(b)
    lat1, lon1 = map(math.radians, a)
    lat2, lon2 = map(math.radians, b)
    h = math.sin((lat2 - lat1) / 2) ** 2 + math.cos(lat1) * math.cos(lat2) * math.sin((lon2 - lon1) / 2) ** 2
    return 2 * EARTH_RADIUS_KM * math.asin(min(1.0, math.sqrt(h)))


@dataclass(frozen=True)
class ZipRegion:
    zip: str
    rings: tuple[tuple[LatLon, ...], ...]
    centroid: LatLon

    def __post_init__(self) -> None:
        if not ZIP_RE.match(self.zip):
            raise ValueError(f"invalid zip {self.zip!r}")
        if not self.rings:
            raise ValueError(f"{self.zip}: empty polygon")
        for ring in self.rings:
            if len(ring) < 4 or ring[0] != ring[-1]:
                raise ValueError(f"{self.zip}: ring not closed")
        lat_lo, lat_hi, lon_lo, lon_hi = self.bbox
        if not (lat_lo <= self.centroid[0] <= lat_hi and lon_lo <= self.centroid[1] <= lon_hi):
            raise ValueError(f"{self.zip}: centroid outside bounding box")

    @property
    def bbox(self) -> tuple[float, float, float, float]:
        pts = [p for ring in self.rings for p in ring]
        lats = [p[0] for p in pts]
        lons = [p[1] for p in pts]
        return min(lats), max(lats), min(lons), max(lons)

    @classmethod
    def from_rings(cls, zip_code: str, rings: Sequence[Sequence[LatLon]],
                   centroid: LatLon | None = None) -> "ZipRegion":
        closed = []
        for ring in rings:
            ring = [tuple(map(float, p)) for p in ring]
            if ring[0] != ring[-1]:
                ring.append(ring[0])
            closed.append(tuple(ring))
        return cls(zip_code, tuple(closed), centroid or polygon_centroid(closed[0]))


def polygon_centroid(ring: Sequence[LatLon]) -> LatLon:
    """Area-weighted centroid of a closed ring (planar in lat/lon)."""
    area2 = cx = cy = 0.0
    for (y0, x0), (y1, x1) in zip(ring, ring[1:]):
        cross = x0 * y1 - x1 * y0
        area2 += cross
        cx += (x0 + x1) * cross
        cy += (y0 + y1) * cross
    if abs(area2) < 1e-15:
        pts = ring[:-1]
        return sum(p[0] for p in pts) / len(pts), sum(p[1] for p in pts) / len(pts)
    return cy / (3 * area2), cx / (3 * area2)


def _on_segment(p: LatLon, a: LatLon, b: LatLon) -> bool:
    (py, px), (ay, ax), (by, bx) = p, a, b
    cross = (bx - ax) * (py - ay) - (by - ay) * (px - ax)
    if abs(cross) > _EDGE_EPS * max(1.0, abs(bx - ax) + abs(by - ay)):
        return False
    return min(ax, bx) - _EDGE_EPS <= px <= max(ax, bx) + _EDGE_EPS and \
        min(ay, by) - _EDGE_EPS <= py <= max(ay, by) + _EDGE_EPS


def point_in_zip(p: LatLon, region: ZipRegion) -> bool:
    """Even-odd ray casting over all rings; points on an edge count as inside."""
    lat, lon = p
    lat_lo, lat_hi, lon_lo, lon_hi = region.bbox
    if not (lat_lo <= lat <= lat_hi and lon_lo <= lon <= lon_hi):
        return False
    inside = False
    for ring in region.rings:
        for a, b in zip(ring, ring[1:]):
            if _on_segment(p, a, b):
                return True
            (ay, ax), (by, bx) = a, b
            if (ay > lat) != (by > lat):
                x_cross = ax + (lat - ay) * (bx - ax) / (by - ay)
                if lon < x_cross:
                    inside = not inside
    return inside


@dataclass(frozen=True)
class SensorSite:
    sensor_id: str
    location: LatLon
    readings: tuple[tuple[datetime, float], ...] = ()

    def __post_init__(self) -> None:
        for (t0, _), (t1, _) in zip(self.readings, self.readings[1:]):
            if not t0 < t1:
                raise ValueError(f"sensor {self.sensor_id}: readings not strictly increasing")
        if any(v < 0 for _, v in self.readings):
            raise ValueError(f"sensor {self.sensor_id}: negative precipitation")

    def readings_in(self, window: TimeWindow) -> list[tuple[datetime, float]]:
        return [(t, v) for t, v in self.readings if window.contains(t)]


def nearest_sensor(region: ZipRegion, sensors: Sequence[SensorSite]) -> SensorSite:
    if not sensors:
        raise ValueError("no sensors available")
    return min(sensors, key=lambda s: (haversine_km(region.centroid, s.location), s.sensor_id))


@dataclass(frozen=True)
class ImageryTile:
    tile_id: str
    bbox: tuple[float, float, float, float]  # min_lat, max_lat, min_lon, max_lon
    acquired_at: datetime
    caption_doc_id: str | None = None
    embedding_id: str | None = None
    image_uri: str | None = None

    def __post_init__(self) -> None:
        min_lat, max_lat, min_lon, max_lon = self.bbox
        if not (min_lat < max_lat and min_lon < max_lon):
            raise ValueError(f"tile {self.tile_id}: degenerate bbox")

    @property
    def center(self) -> LatLon:
        min_lat, max_lat, min_lon, max_lon = self.bbox
        return (min_lat + max_lat) / 2, (min_lon + max_lon) / 2


@dataclass(frozen=True)
class TileSelection:
    tiles: tuple[ImageryTile, ...]
    fallback_used: bool = False
    off_window: bool = False
    flags: tuple[str, ...] = field(default=())

    @property
    def tile_ids(self) -> list[str]:
        return [t.tile_id for t in self.tiles]


def _temporal_pick(tiles: Sequence[ImageryTile], window: TimeWindow) -> tuple[list[ImageryTile], bool]:
    """Tiles inside the window, else the acquisition pass (UTC day) nearest to it."""
    in_window = [t for t in tiles if window.contains(t.acquired_at)]
    if in_window or not tiles:
        return in_window, False
    passes: dict = defaultdict(list)
    for t in tiles:
        passes[t.acquired_at.date()].append(t)
    best = min(passes, key=lambda day: (min(window.distance(t.acquired_at) for t in passes[day]), day))
    return passes[best], True


def tiles_for_query(
    region: ZipRegion,
    window: TimeWindow,
    tiles: Sequence[ImageryTile],
    radius_km: float = 5.0,
    min_tiles: int = 1,
) -> TileSelection:
    """Tiles centred in the ZIP polygon, topped up from a radius around the centroid.

    The radius fallback only runs when the in-polygon pick has fewer than
    ``min_tiles`` tiles. Output is ordered by centre distance to the centroid,
    then tile_id.
    """
    if radius_km <= 0 or min_tiles < 1:
        raise ValueError("radius_km must be > 0 and min_tiles >= 1")
    inside = [t for t in tiles if point_in_zip(t.center, region)]
    chosen, off_window = _temporal_pick(inside, window)
    fallback = False
    if len(chosen) < min_tiles:
        taken = {t.tile_id for t in chosen}
        nearby = [t for t in tiles if t.tile_id not in taken
                  and haversine_km(region.centroid, t.center) <= radius_km]
        extra, extra_off = _temporal_pick(nearby, window)
        if extra:
            fallback = True
            off_window = off_window or extra_off
            chosen = chosen + extra
    dist = {t.tile_id: haversine_km(region.centroid, t.center) for t in chosen}
    ordered = tuple(sorted({t.tile_id: t for t in chosen}.values(), key=lambda t: (dist[t.tile_id], t.tile_id)))
    flags = []
    if not ordered:
        flags.append("no_imagery")
    if fallback:
        flags.append("radius_fallback")
    if off_window:
        flags.append("nearest_pass")
    return TileSelection(ordered, fallback, off_window, tuple(flags))


# --- loaders ---------------------------------------------------------------


def load_zip_regions(path: str | Path) -> dict[str, ZipRegion]:
    """GeoJSON FeatureCollection of Polygon/MultiPolygon features with a ``zip`` property.

    An optional ``centroid`` property ``[lat, lon]`` overrides the computed one.
    """
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    regions: dict[str, ZipRegion] = {}
    for feat in data.get("features", []):
        props = feat.get("properties") or {}
        zip_code = str(props["zip"])
        geom = feat["geometry"]
        if geom["type"] == "Polygon":
            polys = [geom["coordinates"]]
        elif geom["type"] == "MultiPolygon":
            polys = geom["coordinates"]
        else:
            raise ValueError(f"{zip_code}: unsupported geometry {geom['type']}")
        rings = [[(lat, lon) for lon, lat, *_ in ring] for poly in polys for ring in poly]
        centroid = tuple(props["centroid"]) if props.get("centroid") else None
        regions[zip_code] = ZipRegion.from_rings(zip_code, rings, centroid)
    return regions


def load_sensors(path: str | Path) -> list[SensorSite]:
    """CSV with columns sensor_id, lat, lon, hour, precip_in (one row per reading)."""
    rows: dict[str, dict] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            sid = row["sensor_id"].strip()
            entry = rows.setdefault(sid, {"loc": (float(row["lat"]), float(row["lon"])), "readings": []})
            if row.get("hour"):
                entry["readings"].append((parse_timestamp(row["hour"]), float(row["precip_in"])))
    return [
        SensorSite(sid, e["loc"], tuple(sorted(e["readings"])))
        for sid, e in sorted(rows.items())
    ]


def load_tiles(path: str | Path) -> list[ImageryTile]:
    """JSONL tile metadata: tile_id, min_lat, max_lat, min_lon, max_lon, acquired_at, ..."""
    tiles = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            tiles.append(ImageryTile(
                tile_id=str(rec["tile_id"]),
                bbox=(float(rec["min_lat"]), float(rec["max_lat"]), float(rec["min_lon"]), float(rec["max_lon"])),
                acquired_at=parse_timestamp(rec["acquired_at"]),
                caption_doc_id=rec.get("caption_doc_id"),
                embedding_id=rec.get("embedding_id"),
                image_uri=rec.get("image_uri"),
            ))
    return tiles


def regions_to_geojson(regions: Iterable[ZipRegion], properties: dict[str, dict]) -> dict:
    """FeatureCollection joining per-ZIP properties onto the polygons (lon/lat order)."""
    features = []
    for region in regions:
        if region.zip not in properties:
            continue
        features.append({
            "type": "Feature",
            "properties": {"zip": region.zip, **properties[region.zip]},
            "geometry": {
                "type": "Polygon",
                "coordinates": [[[lon, lat] for lat, lon in ring] for ring in region.rings],
            },
        })
    return {"type": "FeatureCollection", "features": features}
