"""Smoke test for the pymastereq extension module."""

import json
import math
import pathlib

import pymastereq as mq

FIXTURES = pathlib.Path(__file__).resolve().parent.parent / "crates" / "core" / "tests" / "fixtures"


def main():
    spec = mq.EnergySpectrum([-0.5, 0.5])
    sigma = mq.CouplingChannelSet.qubit_rotating()
    bath = mq.BathSpectrum.thermal_ohmic(2, 0.1, 5.0, 1.0)

    ec = mq.build_kernel("energy_conserving", spec, sigma, bath)
    li = mq.build_kernel("lindblad", spec, sigma, bath)
    assert ec.dim == 2 and len(ec.matrix()) == 4
    assert ec.max_abs_difference(li) < 1e-12
    assert li.trace_residual() < 1e-12

    mult, states = mq.steady_state(spec, li)
    assert mult == 1
    rho = states[0]
    ratio = rho[1][1].real / rho[0][0].real
    assert abs(ratio - math.exp(-1.0)) < 1e-10, ratio

    traj = mq.evolve(spec, li, [[0, 0], [0, 1]], [0.0, 1.0, 5.0])
    assert len(traj) == 3
    assert all(abs(r[0][0] + r[1][1] - 1) < 1e-10 for r in traj)

    x = [[0, 1], [1, 0]]
    hermitian = mq.CouplingChannelSet([("x", x)])
    report = json.loads(mq.equivalence_report(spec, hermitian, mq.BathSpectrum.flat(1, 0.3)))
    assert report["equivalence_holds"]

    spec3, c3, bath3 = mq.load_config(str(FIXTURES / "discrepancy_3level.json"))
    qq = mq.build_kernel("redfield_qq", spec3, c3, bath3)
    pp = mq.build_kernel("redfield_pp", spec3, c3, bath3)
    assert qq.max_abs_difference(pp) > 1e-3

    try:
        mq.EnergySpectrum([0.0, float("nan")])
    except ValueError:
        pass
    else:
        raise AssertionError("NaN level accepted")

    scaling = json.loads(mq.born_scaling())
    assert all(3.0 <= r <= 5.0 for r in scaling["ratios"])

    print("pymastereq", mq.__version__, "smoke test ok")


if __name__ == "__main__":
    main()
