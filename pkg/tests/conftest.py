import dataclasses
import math

import pytest

from jerkit.circuit import JerCircuit, JunctionArray, LineSpec
from jerkit.synth import build_scenario, default_config

REF_Z0 = 80.0
REF_VPH = 1.2e8


def make_circuit(l_tj=0.0, c_couple=2e-15, l_couple=2e-9, alpha=0.0,
                 c_shunt=0.0, r_series=0.0, g_shunt=0.0, f1_target=5.85e9,
                 z0=REF_Z0, v_ph=REF_VPH, feed_z0=50.0):
    """Reference-design device with its total length solved for f1_target."""
    if l_tj > 0.0:
        theta = math.atan(2.0 * z0 / (2.0 * math.pi * f1_target * l_tj))
        length = theta * v_ph / (math.pi * f1_target)
        count, area = 2, 10.0
    else:
        length = v_ph / (2.0 * f1_target)
        count, area = 0, 0.0
    half = LineSpec(z0=z0, v_ph=v_ph, length=0.5 * length, alpha=alpha)
    junction = JunctionArray(count=count, area_each=area, l_total=l_tj,
                             r_series=r_series, g_shunt=g_shunt,
                             c_shunt=c_shunt)
    return JerCircuit(feed_z0=feed_z0, c_couple=c_couple, l_couple=l_couple,
                      left=half, right=half, junction=junction,
                      temperature=0.015)


def search_band(circuit):
    f2_bare = circuit.left.v_ph / circuit.total_length
    return (0.08 * f2_bare, 1.12 * f2_bare)


def decoupled(circuit):
    return dataclasses.replace(circuit, c_couple=0.0)


@pytest.fixture(scope="session")
def default_scenario():
    return build_scenario(default_config())


@pytest.fixture(scope="session")
def sim_dir(tmp_path_factory):
    """One simulated sweep directory shared by analysis-side tests."""
    from jerkit.cli import main

    out = tmp_path_factory.mktemp("sweep")
    assert main(["simulate", "--out", str(out), "--seed", "11"]) == 0
    return out
