"""Smoke test for the `oflp` extension module.

Build first:

    cargo build --release -p oflp-python --features extension-module

then run `python3 python/smoke_test.py` from the repository root. The script
copies the built library next to a temporary `oflp.so` and imports it.
"""

import json
import math
import shutil
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def find_library():
    for profile in ("release", "debug"):
        for name in ("liboflp.so", "liboflp.dylib", "oflp.dll"):
            path = ROOT / "target" / profile / name
            if path.exists():
                return path
    sys.exit("extension not built; run cargo build -p oflp-python --features extension-module")


def toy_scenario(workdir):
    (workdir / "clients.csv").write_text(
        "sat_id,a_km,e,i_deg,raan_deg,argp_deg\n"
        "C-1,26560.0,0.001,55.0,0.0,0.0\n"
        "C-2,26560.0,0.001,55.0,10.0,0.0\n"
    )
    (workdir / "toy.toml").write_text(
        f"""name = "toy"
output_dir = "{workdir / 'out'}"

[units]
du_km = 26560.0

[constellation]
file = "clients.csv"

[grid]
a_du = "0.95:0.05:1.05"
e = 0.0
i_deg = 55.0
raan_deg = [0.0, 10.0]

[servicer]
thrust_n = 1.74
isp_s = 1790.0
dry_kg = 500.0
payload_kg = 100.0

[depot]
dry_kg = 1500.0
isp_s = 320.0

[launch]
r0_km = 6578.0
isp_s = 457.0
m_l_max_kg = 12950.0
"""
    )
    return workdir / "toy.toml"


def main():
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        shutil.copy(find_library(), tmp / "oflp.so")
        sys.path.insert(0, str(tmp))
        import oflp

        r = oflp.transfer([0.9, 0.0, 55.0, 0.0, 0.0], [1.0, 0.0, 55.0, 0.0, 0.0])
        assert r["converged"], r
        mdot = 1.74 / (9.80665 * 1790.0)
        assert math.isclose(r["dm_kg"], mdot * r["tof_days"] * 86400.0, rel_tol=1e-3), r
        assert r["q_history"][-1] < r["q_history"][0]

        park = oflp.mass_ratio(6578.0, 0.0)
        assert abs(park["z"] - 1.0) < 1e-12, park
        assert oflp.mass_ratio(26560.0, 0.0)["z"] > 1.0

        try:
            oflp.mass_ratio(6000.0, 0.0)
        except ValueError:
            pass
        else:
            raise AssertionError("perigee below the parking orbit was accepted")

        scenario = toy_scenario(tmp)
        assert oflp.slot_count(str(scenario)) == 6
        cost = oflp.cost_matrix(str(scenario))
        assert len(cost) == 2 and all(len(row) == 6 for row in cost)
        doc = json.loads(oflp.solve(str(scenario)))
        assert doc["status"] == "optimal", doc
        assert len(doc["assignment"]) == 2
        print(f"ok: transfer {r['tof_days']:.2f} d / {r['dm_kg']:.2f} kg, "
              f"objective {doc['objective_kg']:.1f} kg with {doc['n_facilities']} depot(s)")


if __name__ == "__main__":
    main()
