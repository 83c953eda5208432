"""Smoke test for the mhd2d_py extension module."""

import pytest

import mhd2d_py

ZPINCH = """
scenario = "static-zpinch"
dt = 1e-3
t_end = 0.01

[plasma]
radial = 16
angular = 16

[vacuum]
radial = 16
angular = 16

[checks]
report_every = 5
"""


def test_check_names():
    names = mhd2d_py.check_names()
    assert "gauss-disk" in names
    assert len(names) == len(set(names))


def test_single_check_suite():
    rep = mhd2d_py.run_suite('{"checks": ["gauss-disk"]}')
    assert rep["failures"] == []
    assert all(r["check_name"] == "gauss-disk" for r in rep["reports"])


def test_unknown_check_is_value_error():
    with pytest.raises(ValueError):
        mhd2d_py.run_suite('{"checks": ["no-such-check"]}')


def test_zpinch_run_keeps_energy():
    out = mhd2d_py.run_scenario(ZPINCH, "toml")
    s = out["summary"]
    assert s["steps"] == 10
    assert s["e0_drift"] < 1e-10
    assert out["records"][0]["report"] is not None
