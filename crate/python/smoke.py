"""Smoke test for the enclosure_atlas extension module.

Build the module first, e.g. `maturin develop -m crates/python/Cargo.toml`,
or copy target/<profile>/libenclosure_atlas.so to enclosure_atlas.so on the
Python path.
"""

import json
import math

import enclosure_atlas as ea


def close(a, b, tol=1e-9):
    return abs(a - b) <= tol


def main():
    assert set(ea.examples()) >= {"faithful-2d", "rotation-channel", "two-state-chain"}

    faithful = ea.decompose(ea.Model.example("faithful-2d"))
    assert faithful.shape == "D(0) + V_a(2)", faithful.shape
    state = faithful.extremal_states()[0]
    assert close(state[0][0].real, 0.5) and close(state[1][1].real, 0.5)

    unfaithful = ea.decompose(ea.Model.example("unfaithful-2d"))
    assert unfaithful.transient_rank == 1
    assert close(unfaithful.transient_projector[1][1].real, 1.0)

    zero = ea.decompose(ea.Model.lindblad([[0, 0], [0, 0]], []))
    assert not zero.is_unique and zero.families == [2]
    q = zero.isometry(0, 0, 1)
    assert close(sum(abs(x) ** 2 for row in q for x in row), 1.0)
    assert zero.verify()

    c, s = math.cos(math.pi / 4), math.sin(math.pi / 4)
    rotation = ea.Model.kraus([[[c, -s], [s, c]]])
    d = ea.decompose(rotation, seed=3)
    assert d.is_unique and d.dimensions == [1, 1]
    report = json.loads(ea.identifiability(rotation, max_len=6))
    assert report["passed"] is False
    assert all(p["magnitude"] <= 1e-12 for p in report["identifiability"]["pairs"])

    passed, classes, measures = ea.verify_oqrw(ea.Model.rates([[-1, 1], [2, -2]]))
    assert passed and classes == [[0, 1]]
    assert close(measures[0][0], 2 / 3) and close(measures[0][1], 1 / 3)

    qnd = ea.Model.qnd([0.0, 1.0, 2.0], [[1j, -1j, 1.0]], diffusive=1)
    verdicts = json.loads(ea.identifiability(qnd))["identifiability"]["pairs"]
    assert [(p["a"], p["b"]) for p in verdicts if not p["separated"]] == [(0, 1)]

    parsed = json.loads(d.to_json())
    assert parsed["decomposition"]["shape"] == d.shape

    try:
        ea.Model.rates([[-1, 1], [2, -1]])
    except ValueError as e:
        assert "row 1" in str(e)
    else:
        raise AssertionError("invalid rate matrix accepted")

    print("smoke test passed")


if __name__ == "__main__":
    main()
