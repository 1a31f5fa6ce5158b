"""Cheap end-to-end passes over every experiment runner (small grids).

The acceptance module runs the full-size pinned configurations; these
exercise the plumbing, artifact writing and gate logic quickly.
"""

import numpy as np
import pytest

from pflab.config import default_config
from pflab.errors import VerificationError
from pflab.experiments import run_experiment


def test_exponent_identities(tmp_path):
    r = run_experiment(default_config("exponent-identities",
                                      outdir=str(tmp_path)))
    assert r["passed"] and r["max_residual"] <= 1e-12
    assert (tmp_path / "identities.csv").exists()
    assert (tmp_path / "manifest.txt").exists()


def test_stampacchia_suite_small(tmp_path):
    r = run_experiment(default_config("stampacchia-suite", a1_cases=25,
                                      seed=5, outdir=str(tmp_path)))
    assert r["passed_cases"] == 25
    header = (tmp_path / "cases.csv").read_text().splitlines()[0]
    assert header == "case_id,passed,detail"


def test_interpolation_suite_small(tmp_path):
    r = run_experiment(default_config("interpolation-suite", bump_count=12,
                                      gn_cells=96, outdir=str(tmp_path)))
    assert r["passed"]


def test_barenblatt_fit_small(tmp_path):
    r = run_experiment(default_config(
        "barenblatt-fit", outdir=str(tmp_path), p=3.0, dimension=1,
        cells=(1024,), bounds="-13:13", t0=1.0, t_end=60.0,
        stepper="implicit", snapshots_per_decade=48, tol_inner=1e-9))
    assert r["passed"]
    assert abs(r["fitted_slope"] - 0.25) / 0.25 <= 0.05
    assert (tmp_path / "fit.svg").exists()
    # sensitivity to the threshold is reported over the documented band
    assert set(r["threshold_sensitivity"]) == {"slope_at_frac_1e-08",
                                               "slope_at_frac_0.0001"}


def test_barenblatt_2d_small(tmp_path):
    r = run_experiment(default_config(
        "barenblatt-fit", outdir=str(tmp_path), p=3.0, dimension=2,
        cells=(128,), bounds="-5.5:5.5", t0=1.0, t_end=12.0,
        stepper="implicit", snapshots_per_decade=16, tol_inner=1e-8,
        height_c=0.5, exponent_tol=0.08))
    assert r["passed"]


def test_halfspace_small(tmp_path):
    r = run_experiment(default_config(
        "halfspace-fsp", outdir=str(tmp_path), p=3.0, dimension=1,
        cells=(1536,), bounds="-7.8:7.5", t0=5e-8, t_end=3.0,
        stepper="explicit", snapshots_per_decade=48, t_ref=0.1))
    assert r["envelope_l2"]["violations"] == 0
    assert r["envelope_l1"]["max_ratio"] <= 1.02
    assert r["l1_max_over_initial"] <= 1 + 1e-6


def test_energy_ledger_small(tmp_path):
    r = run_experiment(default_config(
        "energy-ledger", outdir=str(tmp_path), p=3.0, dimension=1,
        cells=(1024,), bounds="-7.8:7.5", t0=5e-8, t_end=3.0,
        stepper="explicit", snapshots_per_decade=48, s_count=25,
        delta_count=6, eps_iter=0.5, refine_check=False))
    assert r["passed"]
    assert r["tail_beyond_front_A"] == 0.0
    assert r["iteration_covers_front"]
    lines = (tmp_path / "ledger.csv").read_text().splitlines()
    assert lines[2] == "s,A,B,C,J,L"


def test_taylor_green_small(tmp_path):
    r = run_experiment(default_config(
        "fluid2d-taylor-green", outdir=str(tmp_path), p=2.0, dimension=2,
        cells=(48,), t_end=0.5, snapshot_count=26, ke_rate_tol=0.03))
    assert r["passed"]
    assert (tmp_path / "kinetic_energy.csv").exists()


def test_fluid_halfplane_small(tmp_path):
    r = run_experiment(default_config(
        "fluid2d-halfplane", outdir=str(tmp_path), p=3.5, dimension=2,
        cells=(64,), t_end=0.1, threshold_frac=0.05))
    assert r["passed"]
    assert r["background_tail_over_max"] < 0.05
    assert r["l1_ratio_max"] > 0  # reported, never asserted against 1


def test_gate_failure_raises_with_report(tmp_path):
    with pytest.raises(VerificationError) as exc:
        run_experiment(default_config(
            "barenblatt-fit", outdir=str(tmp_path), p=3.0, dimension=1,
            cells=(512,), bounds="-12:12", t0=1.0, t_end=20.0,
            stepper="implicit", exponent_tol=1e-9))
    assert getattr(exc.value, "report", None) is not None
    assert exc.value.report["passed"] is False
