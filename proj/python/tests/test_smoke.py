import math

import pytest

import brpath

FLAT_R2 = """[run]
experiment = r2
model = euclidean:n=2,kf=0
seed = 7
[params]
paths = 2000
testfn = linear:t=1
"""


def test_experiment_ids():
    ids = brpath.experiment_ids()
    assert "r2" in ids and "cone-holonomy" in ids and len(ids) == 14


def test_flat_linear_is_the_equality_case():
    r = brpath.check_r2("euclidean:n=2,kf=0", 0.0, "linear:t=1", n_paths=2000)
    assert r.verdict == "pass"
    assert r.lhs == pytest.approx(1.0, abs=1e-12)
    assert r.rhs == pytest.approx(1.0, abs=1e-12)


def test_ou_gradient_sharp_at_minus_one():
    r = brpath.check_r2("ou:n=1,kf=1", -1.0, "linear:t=1", n_paths=4000)
    assert r.lhs == pytest.approx(math.exp(-0.5), abs=1e-9)
    assert r.verdict != "fail"


def test_increment_fails_under_a_wrong_bound():
    r = brpath.check_r2("ou:n=1,kf=1", 0.5, "twopoint:t1=0,t2=0.5,c1=-1", n_paths=4000)
    assert r.verdict == "fail"
    assert r.margin < 0


def test_run_experiment_csv_and_exit_code():
    csv, verdict, code = brpath.run_experiment(FLAT_R2)
    assert csv.startswith("inequality,model,testfn,kappa,")
    assert verdict == "pass" and code == 0


def test_bad_config_lists_every_error():
    errors = brpath.validate_config(FLAT_R2.replace("seed = 7", "seed = x") + "colour = red\n")
    assert any("TypeError" in e for e in errors)
    assert any("UnknownKey" in e for e in errors)
    with pytest.raises(ValueError):
        brpath.run_experiment("[run]\nexperiment = r2\n")


def test_cone_geometry():
    for l in (math.pi, 2 * math.pi, 3 * math.pi):
        h = brpath.cone_holonomy(l)
        assert math.remainder(h - (2 * math.pi - l), 2 * math.pi) == pytest.approx(0.0, abs=1e-9)
    assert brpath.cone_distance(2 * math.pi, (1.0, 0.0), (1.0, math.pi / 2)) == pytest.approx(math.sqrt(2))


def test_exact_kappa():
    assert brpath.exact_kappa("sphere2:r=2") == pytest.approx(0.25)
    with pytest.raises(ValueError):
        brpath.exact_kappa("torus:n=2")
