"""Smoke test for the gyrotop extension module.

Build and install it first, e.g. `maturin develop -m crates/python/Cargo.toml`,
then run `python crates/python/python/smoke_test.py`.
"""

import math

import gyrotop


def main():
    kinds = {entry["kind"] for entry in gyrotop.catalog()}
    assert {"Uniform", "Monopole", "LinearNull", "ScrewPinch", "ToroidalTokamak", "GradBSlab"} <= kinds

    null = gyrotop.Field("LinearNull", {"B0": 1.0})
    sphere = {"kind": "Sphere", "center": [0.0, 0.0, 0.0], "radius": 2.0}
    report = gyrotop.flux(null, sphere)
    assert abs(report["flux"] + 4.0 * math.pi) < 1e-6, report
    assert report["q"] == -2

    n = null.n([1.0, -0.5, 0.25])
    assert len(n) == 3
    frame = null.frame([1.0, -0.5, 0.25])
    assert abs(sum(a * b for a, b in zip(frame["e1"], frame["b"]))) < 1e-12

    tokamak = gyrotop.Field("ToroidalTokamak")
    verdict = gyrotop.verdict(tokamak, {"generator_surfaces": [], "excluded_regions": []})
    assert verdict["exists"] is True and verdict["charges"] == []

    monopole = gyrotop.Field.from_dict({"kind": "Monopole", "params": {"g": 1.0}})
    shell = {
        "generator_surfaces": [{"kind": "Sphere", "center": [0.0, 0.0, 0.0], "radius": 1.0}],
        "excluded_regions": [{"kind": "Ball", "center": [0.0, 0.0, 0.0], "radius": 0.5}],
    }
    assert gyrotop.verdict(monopole, shell)["exists"] is False

    pinch = gyrotop.Field("ScrewPinch")
    assert gyrotop.bundle_check(pinch, points=10)["passed"]

    run = gyrotop.integrate(pinch, "exact", [1.0, 0.0, 0.0], [0.3, 0.4, 0.1], 1.0, 0.01)
    assert len(run["t"]) == 101 and run["summary"]["samples"] == 101
    assert run["summary"]["energy_relative_drift"] < 1e-8

    try:
        gyrotop.integrate(gyrotop.Field("Uniform"), "gc-global", [0, 0, 0], [0, 0, 1], 1.0, 0.01)
    except gyrotop.GyrotopError as e:
        assert "SingularPoint" in str(e)
    else:
        raise AssertionError("parallel velocity should be singular")

    try:
        gyrotop.Field("Uniform", {"B0": 0.0})
    except ValueError:
        pass
    else:
        raise AssertionError("B0 = 0 should be rejected")

    print("smoke test passed")


if __name__ == "__main__":
    main()
