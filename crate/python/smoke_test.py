#!/usr/bin/env python3
"""Smoke test for the cavchem_py extension module.

Builds nothing itself: it locates the compiled cdylib under target/, copies
it next to a temp dir as an importable module, and runs quick physics checks
on deliberately coarse grids (seconds, not minutes).

Usage:
    cargo build -p cavchem-py [--release]
    python3 python/smoke_test.py
"""

import math
import pathlib
import shutil
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parent.parent


def load_module():
    candidates = [
        ROOT / "target" / "release" / "libcavchem_py.so",
        ROOT / "target" / "debug" / "libcavchem_py.so",
    ]
    lib = next((p for p in candidates if p.exists()), None)
    if lib is None:
        sys.exit("build the extension first: cargo build -p cavchem-py")
    tmp = tempfile.mkdtemp(prefix="cavchem_py_")
    shutil.copy(lib, pathlib.Path(tmp) / "cavchem_py.so")
    sys.path.insert(0, tmp)
    import cavchem_py

    return cavchem_py


def approx(a, b, rel):
    return abs(a - b) <= rel * max(abs(a), abs(b), 1e-300)


def main():
    cc = load_module()
    checks = []

    def check(name, ok):
        checks.append((name, ok))
        print(f"{'PASS' if ok else 'FAIL'}  {name}")

    params = cc.ShinMetiuParams()
    check("default params", approx(params.l, 18.897, 1e-3) and params.mass == 1836.0)

    # coarse scan: fast but good enough for structural checks
    x_grid = (-20.0, 20.0, 16, 6)
    r_grid = (-7.0, 7.0, 12, 6)
    table = cc.bo_scan(params, x_grid, r_grid, 8)

    mu = table.mu00()
    r = table.r_nodes()
    i_mid = min(range(len(r)), key=lambda i: abs(r[i]))
    check("dipole vanishes at the symmetric configuration", abs(mu[i_mid]) < 1e-6)
    check("dipole is odd", approx(mu[0], -mu[-1], 1e-6))

    r0, omega_nu, dmu, mu_v = table.harmonic_fit("left")
    check("left minimum near -4.2 bohr", abs(r0 + 4.16) < 0.1)
    omega_mev = omega_nu * cc.HARTREE_EV * 1000.0
    check(f"vibrational frequency {omega_mev:.1f} meV in [70, 77]", 70.0 < omega_mev < 77.0)
    check("transition dipole identity", approx(mu_v, dmu / math.sqrt(2 * params.mass * omega_nu), 1e-12))

    barrier_ev = table.barrier() * cc.HARTREE_EV
    check(f"bare barrier {barrier_ev:.3f} eV in [0.8, 0.95]", 0.8 < barrier_ev < 0.95)

    levels = table.vibrational_levels(4)
    check("tunneling doublet", abs(levels[1][0] - levels[0][0]) < 1e-6)
    check("left/right labels", {levels[0][1], levels[1][1]} == {-1, 1})

    # second-order algebra
    check("path value identity", cc.pert_path_value(0.3, 2.0, 0.05) == 0.3 - 0.5 * 0.05**2 * 4.0)
    check("q_min reduction", approx(cc.q_min(1.5, 0.0, 0.02, 0.005), -0.02 * 1.5 / 0.005, 1e-12))
    w_eff = cc.effective_frequency(80.0, 0.02, 0.003)
    check("effective frequency drops", 0 < w_eff < 0.003)
    check("resonant zpe shift", approx(cc.vibrational_zpe_shift(1.0, 1.0, 0.2), -0.005, 1e-12))

    # sphere quantization: static polarizability equals radius^3
    w0, mu_eg, alpha0 = cc.drude_sphere_mode(0.2, 50.0)
    check("drude mode frequency", approx(w0, 0.2 / math.sqrt(3.0), 1e-12))
    check("static sphere polarizability = a^3", approx(alpha0, 50.0**3, 1e-9))

    # plane-dipole closed form through the image series (sphere removed)
    d = 10.0
    u = cc.npom_energy(1.3, 0.0, 30.0, placement_fraction=d / 30.0)
    check("plane-dipole energy -mu^2/(8 d^3)", approx(u, -1.3**2 / (8 * d**3), 1e-9))

    # the experimental-geometry row
    rows = cc.npom_barrier_sweep(2.3021, 0.0, 20.0, [0.9])
    gap_nm, deb_ev, lam_eff, v_eff = rows[0]
    check(f"nanogap coupling {lam_eff:.4f} near 0.031", abs(lam_eff - 0.031) < 0.004)
    check(f"nanogap barrier change {deb_ev:.3f} eV near 0.07", abs(deb_ev - 0.07) < 0.02)
    check(f"mode volume {v_eff:.2f} nm^3 near 1.9", abs(v_eff - 1.9) < 0.4)

    # collective identity: both barrier forms agree
    d1, d2, cos = cc.collective_barrier(table, 200, 8.0, (1.0, 16.0), 1.5, seed=3)
    check("collective barrier forms agree", approx(d1, d2, 1e-12))
    check("aligned ensemble", cos > 0.99)
    check("suppression factor < 1", cc.tst_rate_ratio(d1, 0.0, 300.0) < 1.0)

    # a tiny coupled-rate run (coarse basis)
    basis = cc.molecular_eigenbasis(params, x_grid, r_grid, n_electronic=4, e_cut_quanta=6.0)
    k0 = basis.bare_rate(300.0)
    k, ratio = basis.coupled_rate(0.02, 300.0)
    check(f"bare rate positive ({k0:.3e})", k0 > 0.0)
    check(f"coupling suppresses the rate (ratio {ratio:.3f})", 0.1 < ratio < 0.9)

    failed = [n for n, ok in checks if not ok]
    print()
    if failed:
        print(f"{len(failed)} of {len(checks)} checks failed: {failed}")
        sys.exit(1)
    print(f"all {len(checks)} checks passed")


if __name__ == "__main__":
    main()
