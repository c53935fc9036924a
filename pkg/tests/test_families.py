"""Calibration: exact residuals, feasibility boundaries, serialization."""

import json
import math

import pytest
from hypothesis import given, settings, strategies as st

from branchwalk.families import (
    RESIDUAL_TOL,
    CalibrationError,
    DegenerateLawError,
    DisplacementLaw,
    calibrate_law,
    preset,
    PRESET_NAMES,
)


def exact_residuals(law):
    # independent re-derivation of the two defining moments, pure math module
    mu = law.mean_offspring
    mass = mu * math.fsum(p * math.exp(-v) for v, p in zip(law.values, law.probs)) - 1.0
    mean = mu * math.fsum(p * v * math.exp(-v) for v, p in zip(law.values, law.probs))
    return mass, mean


@pytest.mark.parametrize("name", PRESET_NAMES)
def test_preset_residuals_within_tolerance(name):
    law = preset(name)
    mass, mean = exact_residuals(law)
    assert abs(mass) <= RESIDUAL_TOL
    assert abs(mean) <= RESIDUAL_TOL
    assert law.residual_mass == pytest.approx(mass, abs=1e-15)
    assert law.residual_mean == pytest.approx(mean, abs=1e-15)


@pytest.mark.parametrize("name", ["f1", "f2", "f3"])
def test_simulation_presets_have_positive_sigma2(name):
    law = preset(name)
    assert law.sigma2 > 0
    law.require_positive_sigma2()


# solver output snapshots; guards against silent drift of the deterministic solve
_SNAPSHOTS = {
    "f1": ((-0.48330277117647807, 2.0699421380091798), 1.0004087714748),
    "f2": ((-0.36551835253670906, 2.3371509353037863), 0.85427155950186884),
    "f3": ((0.2338589021888112, -0.4, 3.2315269606162715), 0.48051685584009718),
}


@pytest.mark.parametrize("name", sorted(_SNAPSHOTS))
def test_preset_values_stable(name):
    law = preset(name)
    values, sigma2 = _SNAPSHOTS[name]
    assert law.values == pytest.approx(values, abs=1e-12)
    assert law.sigma2 == pytest.approx(sigma2, abs=1e-12)


def test_sigma2_equals_second_tilted_moment():
    for name in ("f1", "f2", "f3"):
        law = preset(name)
        assert law.sigma2 == pytest.approx(law.tilted_moment(2), abs=1e-15)


def test_degenerate_fixture_rejected_for_simulation():
    law = preset("degenerate")
    assert law.sigma2 == 0.0
    assert law.residual_mass == 0.0 and law.residual_mean == 0.0
    with pytest.raises(DegenerateLawError):
        law.require_positive_sigma2()


def test_two_point_equal_split_is_infeasible():
    # e^{-u}+e^{-v}=1 forces u,v>0, contradicting zero tilted mean
    with pytest.raises(CalibrationError, match="infeasible"):
        calibrate_law("f1", q=0.5)


def test_two_point_high_q_uses_swapped_atoms():
    law = calibrate_law("f1", q=0.75)
    mass, mean = exact_residuals(law)
    assert abs(mass) <= RESIDUAL_TOL and abs(mean) <= RESIDUAL_TOL
    # the q-atom is now the high one
    assert law.values[0] > 0 > law.values[1]
    assert law.probs == (0.75, 0.25)


def test_unknown_family_and_params_rejected():
    with pytest.raises(CalibrationError, match="unknown family"):
        calibrate_law("f9")
    with pytest.raises(CalibrationError, match="unknown parameters"):
        calibrate_law("f1", spread=2.0)
    with pytest.raises(CalibrationError, match="supercritical"):
        calibrate_law("f2", mean=0.9)


def test_psi_moments_finite_at_certificate():
    for name in ("f1", "f2", "f3"):
        law = preset(name)
        d = law.delta_certificate
        assert d > 0
        assert math.isfinite(law.psi_moment(1.0 + d))
        assert math.isfinite(law.psi_moment(-d))
        # psi(1) is the calibrated unit mass
        assert law.psi_moment(1.0) == pytest.approx(1.0, abs=RESIDUAL_TOL)


def test_doc_round_trip(tmp_path):
    law = preset("f3")
    doc = law.to_doc()
    assert set(doc) == {
        "family", "params", "residuals", "sigma2", "mean_offspring", "delta_certificate",
    }
    again = DisplacementLaw.from_doc(doc)
    assert again == law

    path = tmp_path / "law.json"
    law.dump(path)
    parsed = json.loads(path.read_text())
    assert parsed["family"] == "f3"
    assert DisplacementLaw.load(path) == law


def test_extinction_probability_matches_fixed_point():
    # geometric mean 2 (r=2/3): classical extinction (1-r)/r = 1/2
    assert preset("f2").extinction_probability() == pytest.approx(0.5, abs=1e-10)
    assert preset("f1").extinction_probability() == 0.0
    q = preset("f3").extinction_probability()
    # s = exp(1.8 (s-1)) fixed point, verified by substitution
    assert q == pytest.approx(math.exp(1.8 * (q - 1.0)), abs=1e-10)


@settings(max_examples=60, deadline=None)
@given(
    q=st.floats(min_value=0.05, max_value=0.45),
    mean=st.floats(min_value=1.2, max_value=4.0),
)
def test_two_point_calibration_always_lands_on_boundary(q, mean):
    # the low atom must carry tilted mass < 1, so q*mean < 1 is the feasible regime
    if q * mean >= 1.0:
        with pytest.raises(CalibrationError):
            calibrate_law("f2", mean=mean, q=q)
        return
    law = calibrate_law("f2", mean=mean, q=q)
    mass, mean_resid = exact_residuals(law)
    assert abs(mass) <= RESIDUAL_TOL
    assert abs(mean_resid) <= RESIDUAL_TOL
    assert law.sigma2 > 0
    assert law.values[0] < 0 < law.values[1]
