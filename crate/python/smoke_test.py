#!/usr/bin/env python3
"""Smoke test for the holonomy_py extension module.

Builds (or reuses) the cdylib, exposes it on sys.path under the module
name, and exercises the main operations end to end. Run from the repo
root:

    python3 python/smoke_test.py
"""

import json
import math
import shutil
import subprocess
import sys
import tempfile
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent


def build_extension() -> Path:
    subprocess.run(
        ["cargo", "build", "-p", "holonomy-py", "--release"],
        cwd=REPO,
        check=True,
    )
    for name in ("libholonomy_py.so", "libholonomy_py.dylib", "holonomy_py.dll"):
        candidate = REPO / "target" / "release" / name
        if candidate.exists():
            return candidate
    raise FileNotFoundError("built extension library not found under target/release")


def load_module():
    lib = build_extension()
    staging = Path(tempfile.mkdtemp(prefix="holonomy_py_"))
    suffix = ".pyd" if lib.suffix == ".dll" else ".so"
    shutil.copy2(lib, staging / f"holonomy_py{suffix}")
    sys.path.insert(0, str(staging))
    import holonomy_py  # noqa: E402

    return holonomy_py


def approx(a, b, tol):
    assert abs(a - b) <= tol, f"{a} vs {b} (tol {tol})"


def wrap(x):
    y = math.fmod(x + math.pi, 2.0 * math.pi)
    if y < 0:
        y += 2.0 * math.pi
    return y - math.pi


def mat_to_complex(m):
    return [[complex(re, im) for (re, im) in row] for row in m]


def unitarity_defect(m):
    n = len(m)
    worst = 0.0
    for i in range(n):
        for j in range(n):
            s = sum(m[k][i].conjugate() * m[k][j] for k in range(n))
            want = 1.0 if i == j else 0.0
            worst = max(worst, abs(s - want))
    return worst


def main():
    hp = load_module()

    # Berry phase on the latitude loop: principal value is -Omega/2
    theta = math.pi / 3
    gamma, winding, principal = hp.berry_phase_latitude(1.0, theta, 1.0, 10_000, 1)
    approx(principal, -math.pi * (1.0 - math.cos(theta)), 1e-6)
    assert gamma == principal + 2.0 * math.pi * winding

    # closed-form solid-angle route agrees modulo 2 pi
    closed = hp.solid_angle_phase(theta, True, 4000)
    approx(wrap(closed - gamma), 0.0, 1e-6)

    # effective angle: quarter-turn cases
    approx(hp.effective_angle(math.pi / 2, 1.0, 1.0, True), math.pi / 4, 1e-12)
    approx(hp.effective_angle(math.pi / 2, 1.0, 1.0, False), 3 * math.pi / 4, 1e-12)

    # exact Rabi propagator is unitary
    u = mat_to_complex(hp.rabi_propagator(0.83, 0.41, 0.57, 7.3))
    assert unitarity_defect(u) < 1e-12

    # two-qubit diagonal gate: pattern, J-independence
    g = hp.two_qubit_geometric_gate(1.3, 0.8, 0.4, 0.5, 0.6)
    gate = mat_to_complex(g["gate"])
    g1, g2 = g["gamma1"], g["gamma2"]
    expect = [g1 + g2, g1 - g2, -g1 + g2, -(g1 + g2)]
    for i in range(4):
        approx(abs(gate[i][i] - complex(math.cos(expect[i]), math.sin(expect[i]))), 0.0, 1e-12)
    g_j = hp.two_qubit_geometric_gate(1.3, 0.8, 10.0, 0.5, 0.6)
    flat = lambda m: [x for row in m for x in row]
    drift = max(
        abs(complex(*a) - complex(*b))
        for a, b in zip(flat(g["gate"]), flat(g_j["gate"]))
    )
    assert drift <= 1e-12, f"J drift {drift}"

    # quadrupole gate: unitary, mixing at finite tilt
    t = 2.0 * math.pi / 0.1 / 3.0
    q = hp.quadrupole_gate(1.0, 0.1, math.pi / 4, t)
    qg = mat_to_complex(q["gate"])
    assert unitarity_defect(qg) < 1e-9
    off = max(abs(qg[r][s]) for r in range(4) for s in range(4) if r != s)
    assert off >= 1e-3, f"expected basis-state mixing, max off-diagonal {off}"

    # connection mismatch is reported
    conn = hp.quadrupole_connection(1.0, 0.1, math.pi / 4)
    assert conn["mismatch"] > 0.0
    assert conn["hermiticity_residual"] <= 1e-12

    # Wilczek-Zee holonomy of the adiabatic quadrupole doublet is unitary
    wz = mat_to_complex(hp.quadrupole_holonomy(1.0, 0.5, 2, 1024))
    assert unitarity_defect(wz) < 1e-9

    # the declarative job layer round-trips and is deterministic
    cfg = json.dumps(
        {
            "schema_version": 1,
            "method": "abelian",
            "model": {"name": "spin_half"},
            "loop": {
                "name": "latitude",
                "params": {"theta": theta, "omega_r": 1.0, "steps": 2000},
            },
            "level": 1,
        }
    )
    out1, _ = hp.run_config(cfg)
    out2, _ = hp.run_config(cfg)
    assert out1 == out2
    parsed = json.loads(out1)
    approx(parsed["gamma_principal"], -math.pi / 2, 1e-4)

    assert "spin_half" in hp.list_models()

    print("smoke test: all checks passed")


if __name__ == "__main__":
    main()
