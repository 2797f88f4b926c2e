"""Smoke test for the pretlab extension module."""

import json
import math

import pretlab


def main():
    assert pretlab.classify_rado(9, 16, 25) == "APlusB"
    assert pretlab.classify_rado(1, 1, 4) == "NotRado"

    t = pretlab.RadoTriple(1, 1, 1)
    x, y, z = t.solution(1, 2, 1)
    assert (x, y, z) == (3, 4, 5)
    assert len(t.forms()) == 3

    p = pretlab.BinaryQuadraticForm(1, 0, 1)
    assert p.discriminant() == -4
    assert p.is_irreducible()
    assert p.omega(5) == 2 and p.omega(3) == 0

    f = pretlab.MultiplicativeFunction.character_lift(4, 1)
    assert abs(f.eval(3) - 0.5) < 1e-12
    assert abs(f.eval(5)) < 1e-12
    g = pretlab.MultiplicativeFunction.from_json(f.to_json())
    assert g.eval(3 ** 41) == f.eval(3 ** 41)
    assert abs(g.distance(q=4, index=1, b=1e4) - math.sqrt(0.5)) < 1e-12
    assert g.distance(q=4, index=1, a=2, b=1e4) < 1e-12

    mode, elems = pretlab.folner_elements(json.dumps({"kind": "phi_r", "r": 4}))
    assert mode == "Exhaustive" and sorted(elems) == sorted(2 ** i * 3 ** j for i in (5, 6) for j in (5, 6))

    n_shift, value, chord = pretlab.q_delta_l(0.5, 3)
    assert chord <= 0.5 and value % 6 == 0

    recs = pretlab.grid_witnesses("APB_AllIrreducible", 1, 1, 2)
    assert len(recs) == 1 and "witness" in recs[0]

    mu = pretlab.joint_measure([f], [(0.0, 0.25)], 3, 5, 7)
    assert 0.0 <= mu <= 0.5 + 1e-12

    lhs, rhs, holds = pretlab.chu_check([0.5, 0.5], [0.2, 0.8], [[0, 1]])
    assert holds and abs(lhs - 0.34) < 1e-12 and abs(rhs - 0.25) < 1e-12

    summary, csv = pretlab.run_experiment("solve", json.dumps({"a": 1, "b": 1, "c": 1, "m": 3, "n": 2}))
    assert summary.strip() == "5 12 13", summary
    assert csv.startswith("# pretlab ")

    try:
        pretlab.RadoTriple(1, 1, 4).forms()
    except ValueError:
        pass
    else:
        raise AssertionError("expected ValueError")

    print("pretlab", pretlab.__version__, "smoke test ok")


if __name__ == "__main__":
    main()
