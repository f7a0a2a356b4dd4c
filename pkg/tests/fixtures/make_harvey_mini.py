"""Regenerate the harvey_mini fixture (deterministic). Run from the repo root:

    python3 tests/fixtures/make_harvey_mini.py
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

OUT = Path(__file__).parent / "harvey_mini"
HALF = 0.02  # half-width of each square ZIP polygon, degrees

# zip -> (centroid lat, lon, flooded_pct, mean_pde or None)
ZIPS = {
    "77067": (29.95, -95.45, 59.5, 0.42),
    "77061": (29.66, -95.28, 57.3, 0.35),
    "77494": (29.74, -95.82, 28.7, 0.18),
    "77447": (30.06, -95.93, 30.5, None),
    "77096": (29.67, -95.48, 45.0, 0.30),
    "77002": (29.756, -95.363, 12.0, 0.05),
    "77024": (29.77, -95.51, 22.0, 0.12),
    "77079": (29.77, -95.60, 35.0, None),
    "77084": (29.83, -95.66, 40.0, 0.25),
    "77401": (29.70, -95.46, 50.0, 0.33),
    "77030": (29.71, -95.40, 38.0, 0.21),
    "77339": (30.05, -95.22, 18.0, 0.10),
}

TWEETS = [
    ("902310479695147013", "It's not flooded in my zip code 77061 and we have been without power since Saturday",
     "2017-08-29T15:02:11Z", None),
    ("901826476210876417", "Harvey unleashes historic flooding in Houston area", "2017-08-27T15:40:03Z", None),
    ("901849278003372034", "Hurricane Harvey damage", "2017-08-27T17:10:40Z", None),
    ("903399005224357889", "1,000-year flood event unprecedented in scale", "2017-08-31T23:05:12Z", None),
    ("903028781920788480", "no words for the amount of flood damage I've seen up close in Bellaire",
     "2017-08-30T22:31:54Z", None),
    ("903081533124247553", "Hurricane Harvey destroyed a lot", "2017-08-31T02:00:26Z", None),
    ("901377628594196481", "Houston braces for impact from Hurricane Harvey", "2017-08-26T09:57:17Z", None),
    ("901917030970003457", "Texas Flood Damage From Harvey May Match Katrina", "2017-08-27T21:46:58Z", None),
    ("903033982874517505", "Hurricane Harvey Relief @ GHIC 200 W Greens Rd Houston Texas 77067",
     "2017-08-30T22:51:52Z", "77067"),
    # synthetic local reports
    ("t-1001", "Water over the road on Brays Bayou near Meyerland 77096, rescue boats out", "2017-08-27T08:12:00Z", "77096"),
    ("t-1002", "Street flooded waist deep off Bissonnet in Bellaire 77401", "2017-08-27T11:30:00Z", "77401"),
    ("t-1003", "Buffalo Bayou over its banks downtown 77002, Allen Parkway underwater", "2017-08-27T13:45:00Z", "77002"),
    ("t-1004", "Addicks reservoir release flooding Energy Corridor 77079 homes", "2017-08-29T06:20:00Z", "77079"),
    ("t-1005", "Memorial Drive flooded near 77024 after the dam release", "2017-08-29T10:05:00Z", "77024"),
    ("t-1006", "Katy 77494 roads closed, water rising on Mason Road", "2017-08-28T19:40:00Z", "77494"),
    ("t-1007", "Kingwood 77339 rescue needed, San Jacinto river flooding homes", "2017-08-29T01:15:00Z", "77339"),
    ("t-1008", "Medical Center 77030 garages flooded again, storm still pounding", "2017-08-27T04:50:00Z", "77030"),
    ("t-1009", "Bear Creek in 77084 flooded, families trapped on roofs", "2017-08-29T14:00:00Z", "77084"),
    ("t-1010", "Power outage across Hockley 77447 but no water in the house", "2017-08-28T09:00:00Z", "77447"),
    ("t-1011", "Greens Bayou rising fast near 77067, please help", "2017-08-27T03:30:00Z", "77067"),
    ("t-1012", "Hobby airport area 77061 rain gauge off the charts", "2017-08-27T07:45:00Z", "77061"),
    ("t-1013", "Day 6: cleanup begins, drywall piling up on the curb after the flood", "2017-09-02T16:00:00Z", None),
    ("t-1014", "Before the storm: stocking water and batteries", "2017-08-24T18:00:00Z", None),
    # removed by the filter
    ("t-2001", "RT @KHOU: Harvey unleashes historic flooding in Houston area", "2017-08-27T15:41:00Z", None),
    ("t-2002", "rt @abc13houston: rescue crews on I-10", "2017-08-27T16:00:00Z", None),
    ("t-2003", "This flood of new music is great, stream the album on spotify", "2017-08-28T12:00:00Z", None),
    ("t-2004", "Nice weather for a barbecue today", "2017-08-28T12:30:00Z", None),
    ("t-2005", "#harvey #flood #houston #rain #help #texas donate now", "2017-08-28T13:00:00Z", None),
    ("t-2006", "flood relief http://a.co/1 http://a.co/2 https://a.co/3 http://a.co/4", "2017-08-28T13:30:00Z", None),
]

CALLS = [
    ("311-5001", "Flooding in street, water entering homes", "77096", "2017-08-27 06:10:00", 29.671, -95.481),
    ("311-5002", "Storm drain blocked, standing water on Bissonnet", "77401", "2017-08-27 09:00:00", 29.701, -95.462),
    ("311-5003", "Flooded garage and fallen tree on Memorial", "77024", "2017-08-29 12:00:00", 29.771, -95.512),
    ("311-5004", "Debris pickup request after flood damage", "77084", "2017-08-31 10:00:00", 29.829, -95.659),
    ("311-5005", "Water main break downtown", "77002", "2017-08-28 08:00:00", 29.757, -95.364),
    ("311-5006", "Sewer backup after heavy rain", "77030", "2017-09-03 09:30:00", 29.711, -95.401),
]

# zips whose tiles exist; all acquired on the post-event pass
TILE_ZIPS = ["77067", "77061", "77494", "77096", "77002", "77024", "77084", "77401"]
CAPTIONS = {
    "77067": "Residential streets appear dry; debris piles visible along Greens Road.",
    "77061": "Industrial lots and rooftops intact; no standing water visible.",
    "77494": "Suburban subdivisions with dry streets; retention ponds full.",
    "77096": "Mud lines on houses along the bayou; debris on curbs.",
    "77002": "Downtown streets clear; Buffalo Bayou banks muddy.",
    "77024": "Standing water in low-lying yards near the bayou.",
    "77084": "Water-damaged furniture stacked outside many homes.",
    "77401": "Roof tarps and curbside debris throughout neighborhood.",
}

# zip -> (text_only (E, S, conf), with imagery prompt (E, S, conf), visual (E, S, conf, recession) or None)
PREDICTIONS = {
    "77067": ((60.0, 35.0, 0.7), (60.0, 38.0, 0.7), None),
    "77061": ((0.5, 5.0, 0.8), (0.5, 6.0, 0.8), None),
    "77494": ((75.0, 40.0, 0.6), (75.0, 40.0, 0.6), (5.0, 15.0, 0.5, True)),
    "77447": ((25.0, 20.0, 0.5), (25.0, 22.0, 0.5), None),
    "77096": ((50.0, 30.0, 0.7), (48.0, 28.0, 0.7), (30.0, 35.0, 0.6, False)),
    "77002": ((20.0, 8.0, 0.6), (15.0, 6.0, 0.6), (10.0, 4.0, 0.4, True)),
    "77024": ((30.0, 15.0, 0.6), (28.0, 14.0, 0.6), (20.0, 18.0, 0.5, False)),
    "77079": ((40.0, 20.0, 0.5), (42.0, 22.0, 0.5), None),
    "77084": ((55.0, 30.0, 0.6), (50.0, 28.0, 0.6), (35.0, 26.0, 0.5, True)),
    "77401": ((65.0, 40.0, 0.7), (60.0, 38.0, 0.7), (70.0, 45.0, 0.6, True)),
    "77030": ((35.0, 25.0, 0.6), (36.0, 24.0, 0.6), None),
    "77339": ((10.0, 6.0, 0.5), (12.0, 8.0, 0.5), None),
}

# cited ids per zip (unknown ones get stripped by the engine)
CITED = {
    "77067": ["903033982874517505", "901826476210876417", "903081533124247553"],
    "77061": ["902310479695147013"],
    "77494": ["901826476210876417", "903399005224357889", "903028781920788480", "999999999999999999"],
}

EARLY = {"77096", "77401"}  # queries ending on the peak day


def write_jsonl(path: Path, rows) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")


def square(lat: float, lon: float) -> list[list[float]]:
    return [[lon - HALF, lat - HALF], [lon + HALF, lat - HALF], [lon + HALF, lat + HALF],
            [lon - HALF, lat + HALF], [lon - HALF, lat - HALF]]


def text_response(zip_code: str, est, with_imagery: bool) -> dict:
    e, s, conf = est
    return {
        "reasoning": f"Scripted {'multimodal' if with_imagery else 'text-only'} assessment for {zip_code}.",
        "zip": zip_code,
        "estimates": {"flood_extent_pct": e, "damage_severity_pct": s,
                      "roads_impacted": [] if zip_code != "77096" else ["Brays Bayou Dr"],
                      "confidence": conf},
        "evidence_refs": {"tweet_ids": CITED.get(zip_code, []), "call_311_ids": [], "imagery_tile_ids": [],
                          "sensor_ids": [], "kb_refs": [f"fema:{zip_code}"]},
        "natural_language_summary": f"Estimated {e}% flooded and {s}% mean damage in {zip_code}.",
    }


def visual_response(zip_code: str, est) -> str:
    e, s, conf, rec = est
    body = {
        "reasoning": f"Scripted imagery read for {zip_code}.",
        "estimates": {"flood_extent_pct": e, "damage_severity_pct": s, "roads_impacted": [],
                      "confidence": conf, "recession_observed": rec},
        "evidence_refs": {"imagery_tile_ids": [f"tile-{zip_code}-a"]},
        "natural_language_summary": f"Imagery for {zip_code}.",
    }
    # fenced, as chat models often answer
    return "```json\n" + json.dumps(body, indent=1) + "\n```"


def main() -> None:
    OUT.mkdir(exist_ok=True)
    features = [{"type": "Feature", "properties": {"zip": z},
                 "geometry": {"type": "Polygon", "coordinates": [square(lat, lon)]}}
                for z, (lat, lon, *_rest) in ZIPS.items()]
    (OUT / "zips.geojson").write_text(json.dumps({"type": "FeatureCollection", "features": features}, indent=1) + "\n")

    write_jsonl(OUT / "tweets.jsonl", (
        {"id": i, "text": t, "timestamp": ts, **({"zip": z} if z else {})} for i, t, ts, z in TWEETS
    ))
    # one malformed line to exercise skip counting
    with open(OUT / "tweets.jsonl", "a", encoding="utf-8") as fh:
        fh.write('{"id": "t-bad", "text": "flood"}\n')

    with open(OUT / "calls_311.csv", "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["case_number", "description", "zip_code", "created_date", "latitude", "longitude"])
        w.writerows(CALLS)
        w.writerow(["311-bad", "Missing timestamp", "77002", "", "", ""])

    sensors = []
    zips = list(ZIPS.items())
    for n in range(15):
        z, (lat, lon, *_r) = zips[n % len(zips)]
        offset = 0.03 if n >= len(zips) else 0.004
        sid = f"HCFWS-{100 + n}"
        for hour, base in (("2017-08-27T00:00:00Z", 1.2), ("2017-08-27T06:00:00Z", 2.4),
                           ("2017-08-28T00:00:00Z", 0.8), ("2017-09-10T12:00:00Z", 0.0)):
            sensors.append([sid, round(lat + offset, 4), round(lon - offset, 4), hour, round(base + 0.1 * n, 2)
                            if base else 0.0])
    with open(OUT / "sensors.csv", "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sensor_id", "lat", "lon", "hour", "precip_in"])
        w.writerows(sensors)

    tiles, captions = [], []
    for z in TILE_ZIPS:
        lat, lon = ZIPS[z][:2]
        for k, (dlat, dlon) in enumerate(((-0.005, -0.005), (0.005, 0.005))):
            tid = f"tile-{z}-{'ab'[k]}"
            c = (lat + dlat, lon + dlon)
            cap_id = f"cap-{z}-{'ab'[k]}"
            tiles.append({"tile_id": tid, "min_lat": round(c[0] - 0.004, 4), "max_lat": round(c[0] + 0.004, 4),
                          "min_lon": round(c[1] - 0.004, 4), "max_lon": round(c[1] + 0.004, 4),
                          "acquired_at": "2017-08-31T17:00:00Z", "caption_doc_id": cap_id,
                          "image_uri": f"https://imagery.example/{tid}.png"})
            captions.append({"id": cap_id, "text": CAPTIONS[z], "timestamp": "2017-08-31T17:00:00Z", "zip": z})
    write_jsonl(OUT / "tiles.jsonl", tiles)
    write_jsonl(OUT / "captions.jsonl", captions)

    with open(OUT / "ground_truth.csv", "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["zip", "flooded_pct", "mean_pde"])
        for z, (_a, _b, flooded, pde) in ZIPS.items():
            w.writerow([z, flooded, "" if pde is None else pde])

    with open(OUT / "fema.csv", "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["zip", "summary"])
        w.writerow(["77096", "Repetitive-loss area along Brays Bayou; 2015 and 2016 floods."])
        w.writerow(["77024", "Downstream of Addicks and Barker reservoirs."])
        w.writerow(["77067", "Greens Bayou watershed; moderate historical claims."])

    with open(OUT / "queries.csv", "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["zip", "start", "end"])
        for z in ZIPS:
            w.writerow([z, "2017-08-26", "2017-08-28" if z in EARLY else "2017-09-01"])

    text_rules, visual_rules = [], []
    for z, (t_only, t_img, vis) in PREDICTIONS.items():
        text_rules.append({"contains": [f"ZIP: {z}\n", "Do NOT mention imagery"],
                           "response": text_response(z, t_only, False)})
        text_rules.append({"contains": [f"ZIP: {z}\n"], "response": text_response(z, t_img, True)})
        if vis is not None:
            visual_rules.append({"contains": [f"ZIP: {z}\n", "recession_observed"],
                                 "response": visual_response(z, vis)})
    (OUT / "mock_text.json").write_text(json.dumps({"rules": text_rules}, indent=1) + "\n")
    (OUT / "mock_visual.json").write_text(json.dumps({"rules": visual_rules}, indent=1) + "\n")
    parser_rules = [
        {"contains": ["flooded was 77096"], "response": {"zip": "77096", "start": "2017-08-26", "end": "2017-08-28"}},
        {"contains": ["happened in 77067"], "response": {"zip": "77067", "start": None, "end": None}},
        {"contains": ['"garbage"'], "response": "I cannot help with that."},
    ]
    (OUT / "mock_parser.json").write_text(json.dumps({"rules": parser_rules, "default": {"zip": None}}, indent=1) + "\n")


if __name__ == "__main__":
    main()
