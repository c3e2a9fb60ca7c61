#!/usr/bin/env python3
"""Smoke test for the crobstruct_py extension module.

Builds nothing itself: expects `cargo build --release -p crobstruct-py` to
have produced target/release/libcrobstruct_py.so. Copies the shared object
into a temp directory under an importable name, imports it, and exercises
the main types and operations against known values.

Run from the repository root:

    cargo build --release -p crobstruct-py
    python3 python/smoke_test.py
"""

import json
import os
import shutil
import sys
import tempfile

REPO = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def load_module():
    candidates = [
        os.path.join(REPO, "target", "release", "libcrobstruct_py.so"),
        os.path.join(REPO, "target", "release", "crobstruct_py.dll"),
        os.path.join(REPO, "target", "release", "libcrobstruct_py.dylib"),
    ]
    src = next((c for c in candidates if os.path.exists(c)), None)
    if src is None:
        sys.exit(
            "extension not built; run `cargo build --release -p crobstruct-py` first"
        )
    tmp = tempfile.mkdtemp(prefix="crobstruct_py_")
    dst = os.path.join(tmp, "crobstruct_py.so")
    shutil.copyfile(src, dst)
    sys.path.insert(0, tmp)
    import crobstruct_py

    return crobstruct_py


def main():
    m = load_module()
    failures = 0

    def check(label, ok):
        nonlocal failures
        print(f"{'PASS' if ok else 'FAIL'}: {label}")
        if not ok:
            failures += 1

    # exact arithmetic
    a = m.GaussianRational("1/2+i")
    b = m.GaussianRational("1/2-i")
    check("gaussian rational product (1/2+i)(1/2-i) = 5/4", str(a * b) == "5/4")
    q = m.GaussianRational("2/3+1/6i") / m.GaussianRational("1/3")
    check("gaussian rational division", str(q) == "2+1/2i")

    # marked tree counts
    counts = [m.marked_trees(k)[0] for k in (1, 2, 3)]
    check("marked tree counts 1, 3, 10", counts == [1, 3, 10])

    # quadric: Segre graph and vanishing higher jets
    quadric = m.Surface.from_file(os.path.join(REPO, "surfaces", "quadric.srf"))
    check("quadric solve_q", quadric.solve_q() == ["(1)*tau1 + (-2i)*z1*chi1"])
    jets2 = json.loads(quadric.q_jets(2))
    check("quadric Q_{z^2} = 0", jets2["Q_z[2]"] == "0")

    # quartic: the budgeted relation is found
    quartic = m.Surface.from_file(os.path.join(REPO, "surfaces", "quartic.srf"))
    report = json.loads(quartic.certify(1, [[2], [3]]))
    check("quartic certify is Inconclusive", report["verdict"] == "Inconclusive")
    found = [r for r in report["runs"] if r["kind"] == "Found"]
    check("quartic has a Found certificate", len(found) >= 1)

    # rapid-degree family: unconditional refutation
    m1 = m.Surface.from_file(os.path.join(REPO, "surfaces", "m1.srf"))
    report = json.loads(m1.certify(1, [[2], [3]]))
    check(
        "m1 certify NotEmbeddable, unconditional",
        report["verdict"] == "NotEmbeddable" and report["unconditional"],
    )
    deg = json.loads(m1.degree_certificate(2))
    check(
        "m1 degree certificate at k=2 (24 vs 18)",
        deg["certified"] and deg["target_degree"] == 24 and deg["coarse_bound"] == "18",
    )

    # CLI pass-through
    code, out = m.run_cli(["trees", "--k", "3", "--output", "json"])
    payload = json.loads(out)["payload"]
    check("run_cli trees --k 3", code == 0 and payload["count"] == 10)

    print()
    if failures:
        sys.exit(f"{failures} smoke checks failed")
    print("all smoke checks passed")


if __name__ == "__main__":
    main()
