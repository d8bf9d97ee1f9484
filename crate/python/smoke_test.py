"""Quick end-to-end check of the Python bindings."""

import json
import math
import pathlib

import beaconplace as bp

ROOT = pathlib.Path(__file__).resolve().parent.parent


def main():
    plan = bp.FloorPlan.from_file(str(ROOT / "plans" / "room-3x3x4.toml"))
    print(plan)

    # corner beacons on a regular tetrahedron around the origin
    tet = [(1, 1, 1), (1, -1, -1), (-1, 1, -1), (-1, -1, 1)]
    g, band, singular = bp.gdop_at((0, 0, 0), tet)
    assert not singular and 0 < g < 2
    print(f"tetrahedron gdop {g:.4f} ({band})")
    assert bp.classify_band(2.8) == "good"

    assert math.isclose(bp.range_from_toa(0.01), 3.43)
    beacons = [(0, 0, 0), (4, 0, 0), (0, 4, 0), (0, 0, 4), (4, 4, 4)]
    target = (1.0, 1.0, 1.0)
    d = [math.dist(b, target) for b in beacons]
    est = bp.trilaterate(beacons, d)
    assert math.dist(est, target) < 1e-9, est

    try:
        bp.trilaterate([(0, 0, 0), (1, 0, 0), (0, 1, 0), (1, 1, 0)], [1, 1, 1, 1])
    except bp.DegenerateGeometryError as e:
        print("coplanar rejected:", e)
    else:
        raise AssertionError("coplanar beacons accepted")

    problem = bp.Problem(plan)
    print(f"{problem.n_sites} sites, {problem.n_points} points")
    lb = problem.lower_bound(4)
    print("lower bound", lb)

    sol = bp.solve(plan, seed=1)
    print(sol)
    assert sol.beacon_count >= lb["value"]
    assert sol.per_k_coverage[3] == 1.0
    doc = sol.to_json()
    checks = bp.validate_placement(plan, doc)
    assert all(ok for _, ok, _ in checks), checks

    tampered = json.loads(doc)
    tampered["metrics"]["gdop_avg"] += 1.0
    bad = [n for n, ok, _ in bp.validate_placement(plan, json.dumps(tampered)) if not ok]
    assert "gdop_avg" in bad, bad

    rows = [[True, True, False], [False, True, True], [True, False, True]]
    assert bp.brute_force_min_cover(rows, 1) == (2, [0, 1])
    assert bp.lower_bound(rows, 1)["value"] == 2
    assert bp.brute_force_min_cover(rows, 3) is None

    pos = [b[1] for b in sol.beacons]
    r = bp.simulate_point(pos, (1.5, 1.5, 1.5), 0.01, 2000, seed=3)
    print("simulated", r)
    assert 0.8 < r["ratio"] < 1.2

    print("smoke test passed")


if __name__ == "__main__":
    main()
