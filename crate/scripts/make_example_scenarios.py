#!/usr/bin/env python3
"""Writes scenarios/baseline.example.json and scenarios/green.example.json.

Seven tri-sector sites on a hexagonal grid over a dense urban block pattern.
The green variant adds one outdoor receive-only antenna at the triple point
east of the center site, where every surrounding sector sees it at the edge
of its beam, attached to all six of those sectors.
"""
import json
import math
import pathlib

ISD = 700.0
AZIMUTHS = (30.0, 150.0, 270.0)
HALF = 1.7 * ISD


def site(name, bearing, dist):
    b = math.radians(bearing)
    x, y = round(dist * math.sin(b), 3), round(dist * math.cos(b), 3)
    return {
        "id": name,
        "position": [x, y],
        "sectors": [
            {
                "id": f"{name}-{k}",
                "azimuth_deg": az,
                "antenna": {"kind": "sector", "gain_dbi": 15.0, "theta_3db_deg": 65.0, "front_to_back_db": 20.0},
                "tx_power_dbm": 43.0,
            }
            for k, az in enumerate(AZIMUTHS)
        ],
    }


def baseline():
    sites = [site("C", 0.0, 0.0)] + [site(f"N{k}", 60.0 * k, ISD) for k in range(6)]
    return {
        "sites": sites,
        "greens": [],
        "clutter": {
            "bounds": {"min": [-HALF, -HALF], "max": [HALF, HALF]},
            "cell_size_m": 50.0,
            "default_class": "urban",
            "buildings": [],
            "building_blocks": [
                {
                    "id_prefix": "blk",
                    "min": [-HALF + 20.0, -HALF + 20.0],
                    "max": [HALF - 20.0, HALF - 20.0],
                    "pitch_m": [90.0, 90.0],
                    "footprint_m": [50.0, 50.0],
                    "penetration_loss_db": 20.0,
                }
            ],
        },
        "radio": {
            "p_min_dbm": -50.0,
            "p_max_dbm": 24.0,
            "thermal_noise_dbm": -104.0,
            "processing_gain_db": 25.0,
            "pathloss": {
                "open": {"pl0_db": 110.0, "d0_m": 1000.0, "exponent": 3.3},
                "suburban": {"pl0_db": 120.0, "d0_m": 1000.0, "exponent": 3.5},
                "urban": {"pl0_db": 128.1, "d0_m": 1000.0, "exponent": 3.76},
            },
            "shadowing_sigma_db": {"open": 5.0, "suburban": 6.0, "urban": 6.0},
            "dl_shadowing_mode": "independent",
            "combining": "mrc",
        },
        "traffic": {
            "mobiles_per_sector": 10,
            "indoor_fraction": 0.3,
            "voice_fraction": 0.5,
            "sinr_target_db": {"voice": 2.0, "data": 8.0},
        },
    }


def green():
    doc = baseline()
    hole = [round(ISD / math.sqrt(3.0), 3), 0.0]
    doc["greens"] = [
        {
            "id": "G1",
            "position": hole,
            "antenna": {"kind": "omni", "gain_dbi": 5.0},
            "attached_sectors": ["C-0", "C-1", "N1-1", "N1-2", "N2-2", "N2-0"],
        }
    ]
    return doc


if __name__ == "__main__":
    out = pathlib.Path(__file__).resolve().parent.parent / "scenarios"
    out.mkdir(exist_ok=True)
    for name, doc in (("baseline", baseline()), ("green", green())):
        (out / f"{name}.example.json").write_text(json.dumps(doc, indent=2) + "\n")
