"""Smoke test for the qdesc Python module.

Builds the extension with cargo when `qdesc` is not importable, then exercises
the main entry points. Run from anywhere: python3 python/smoke_test.py
"""

import cmath
import importlib
import math
import pathlib
import shutil
import subprocess
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parent.parent


def load():
    try:
        return importlib.import_module("qdesc")
    except ImportError:
        pass
    subprocess.run(
        ["cargo", "build", "--release", "-p", "qdesc-python", "--features", "extension-module"],
        cwd=ROOT,
        check=True,
    )
    out = pathlib.Path(tempfile.mkdtemp())
    shutil.copy(ROOT / "target" / "release" / "libqdesc.so", out / "qdesc.so")
    sys.path.insert(0, str(out))
    return importlib.import_module("qdesc")


def close(a, b, tol=1e-9):
    return all(abs(x - y) <= tol for x, y in zip(a, b))


def main():
    q = load()
    phi = [0.3, 0.7, 1.1]

    tele = q.Circuit.teleportation(phi)
    assert (tele.n, tele.depth) == (5, 9), tele
    assert q.Circuit.parse((ROOT / "circuits" / "teleport.qnet").read_text()) == tele
    assert q.Circuit.parse(tele.to_text()) == tele

    # the state prepared on wire 1 ends up on wire 3
    a = cmath.exp(1j * phi[0]) * math.cos(phi[1]) * cmath.exp(1j * phi[2])
    b = cmath.exp(1j * phi[0]) * 1j * math.sin(phi[1]) * cmath.exp(-1j * phi[2])
    want = (2 * (a.conjugate() * b).real, 2 * (a.conjugate() * b).imag, abs(a) ** 2 - abs(b) ** 2)
    final = tele.evolve()
    assert close(final.bloch(3), want), (final.bloch(3), want)
    rho = final.reduced_density([3])
    assert close([rho[0][0].real, rho[1][1].real], [abs(a) ** 2, abs(b) ** 2])

    amps = tele.state()
    assert len(amps) == 32 and abs(sum(abs(x) ** 2 for x in amps) - 1) < 1e-12

    trace = tele.trace()
    assert len(trace) == 10
    assert trace.at(0).z(1).endswith("Z1")
    assert "color=green" in trace.dot()
    assert len(trace.rows()) == 10 * 5

    cmp = tele.compare_oracle()
    assert cmp["passed"], cmp

    audit = tele.audit(probes=4, seed=1)
    assert audit["schema"] == "qdesc-audit/1" and not audit["soundness_failures"]

    report = q.run_experiment("teleport", {"phi": phi})
    assert report["passed"], [c for c in report["claims"] if not c["pass"]]
    for name, params in [("telephone", {"chain": 2, "decohere": True}), ("eta", {"seed": 3})]:
        r = q.run_experiment(name, params)
        assert r["passed"], (name, [c for c in r["claims"] if not c["pass"]])

    eta = q.Circuit.eta(0.6, 0.8j, 1j, ("x", math.pi / 3))
    assert eta.depth == 9

    phone = q.Circuit.telephone(phi, chain=3, decohere=True)
    assert phone.n == 13

    assert q.Circuit.random(4, 10, seed=7).compare_oracle()["passed"]

    try:
        q.Circuit.parse("wires 2\nt=1 h 3\n")
    except ValueError as e:
        assert "2:" in str(e), e
    else:
        raise AssertionError("out-of-range wire was accepted")

    print("python smoke test: ok")


if __name__ == "__main__":
    main()
