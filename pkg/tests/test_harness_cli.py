import json
import math

import numpy as np
import pytest
import yaml

from mpcn import cli
from mpcn.config import ExperimentConfig, kernel_from_spec, load_config_file, merge
from mpcn.csvio import body, read_csv, write_csv
from mpcn.errors import ConfigError, NumericalError
from mpcn.harness import (
    ACF_COLUMNS,
    SUMMARY_COLUMNS,
    TRIPLET_COLUMNS,
    ScalingConfig,
    SdeCompareConfig,
    estimate_peak,
    run_experiment,
    run_scaling_study,
    run_shift_study,
    sde_compare,
    simulate,
)
from mpcn.rand import RNG_ALGORITHM, RngStream
from mpcn.samplers import ProposalKernel, run_chain
from mpcn.targets import target_gaussian, target_shifted


def cfg(**kw):
    base = dict(algorithm={"kind": "mpcn"}, target={"name": "student_t", "nu": 2.0, "sigma": 5.0},
                d=10, M=5000, seed=4)
    base.update(kw)
    return ExperimentConfig(**base)


# -- config ----------------------------------------------------------------------

@pytest.mark.parametrize("changes,field", [
    ({"algorithm": {"kind": "hmc"}}, "algorithm.kind"),
    ({"target": {"name": "cauchy"}}, "target.name"),
    ({"d": 0}, "d"),
    ({"d": 2.5}, "d"),
    ({"M": -1}, "M"),
    ({"seed": -3}, "seed"),
    ({"thin": 0}, "thin"),
    ({"init": "zeros"}, "init"),
    ({"init": [1.0, 2.0]}, "init"),
    ({"xi": 1.0, "target": {"name": "perturbed_t"}}, "xi"),
    ({"peak_estimation": {"pilot_M": 0}}, "peak_estimation.pilot_M"),
    ({"algorithm": {"kind": "pcn", "rho": 1.5}}, "algorithm"),
    ({"algorithm": {"kind": "pcn", "sigma_d": 0.5}}, "algorithm"),
    ({"target": {"name": "gaussian", "sigma": -1.0}}, "target"),
    ({"init": "exact_target", "target": {"name": "perturbed_t"}}, "init"),
])
def test_config_errors_name_the_field(changes, field):
    with pytest.raises(ConfigError) as exc:
        cfg(**changes)
    assert exc.value.field == field


def test_config_json_roundtrip():
    c = cfg(xi=2.0, peak_estimation={"pilot_M": 100}, init=[0.5] * 10)
    back = ExperimentConfig.from_json(c.to_json())
    assert back == c
    assert back.to_json() == c.to_json()
    assert json.loads(c.to_json())["rng"] == RNG_ALGORITHM


def test_config_rejects_unknown_keys():
    with pytest.raises(ConfigError) as exc:
        ExperimentConfig.from_dict({"d": 3, "temperature": 2})
    assert exc.value.field == "temperature"


def test_kernel_defaults():
    assert kernel_from_spec({"kind": "rwm_gauss"}, 25).sigma_d == pytest.approx(0.2)
    assert kernel_from_spec({"kind": "rwm_t"}, 4).df == 2.0
    assert kernel_from_spec({"kind": "mpcn"}, 4).rho == 0.8
    assert kernel_from_spec({"kind": "mpcn_general"}, 4).nu_bar == 1.0


def test_merge():
    base = {"a": {"x": 1, "y": 2}, "b": 3}
    assert merge(base, {"a": {"y": 5, "z": None}, "b": None, "c": 7}) == {"a": {"x": 1, "y": 5}, "b": 3, "c": 7}
    assert merge({}, {"a": {"x": None}}) == {"a": {}}
    assert base == {"a": {"x": 1, "y": 2}, "b": 3}


def test_load_config_file(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text("d: 4\nalgorithm:\n  kind: pcn\n  rho: 0.5\n")
    assert load_config_file(p) == {"d": 4, "algorithm": {"kind": "pcn", "rho": 0.5}}
    p.write_text("- 1\n- 2\n")
    with pytest.raises(ConfigError):
        load_config_file(p)
    p.write_text("a: [1\n")
    with pytest.raises(ConfigError):
        load_config_file(p)


# -- csv -------------------------------------------------------------------------

def test_csv_roundtrip(tmp_path):
    p = write_csv(tmp_path / "x.csv", ["a", "b"], [{"a": 1, "b": 0.1}, [True, float("nan")]], '{"k":1}')
    c, rows = read_csv(p)
    assert c == '{"k":1}'
    assert rows == [{"a": "1", "b": "0.1"}, {"a": "1", "b": "nan"}]
    assert body(p) == "a,b\n1,0.1\n1,nan\n"


# -- run_experiment ----------------------------------------------------------------

def test_run_experiment_writes_schemas(tmp_path):
    c = cfg(output_dir=str(tmp_path), max_lag=50)
    res = run_experiment(c)
    head, rows = read_csv(res.files["summary"])
    assert list(rows[0]) == SUMMARY_COLUMNS
    assert ExperimentConfig.from_json(head) == c
    assert rows[0]["algorithm"] == "mpcn" and rows[0]["rho_or_sigma"] == "0.8"
    _, acf = read_csv(res.files["acf"])
    assert list(acf[0]) == ACF_COLUMNS and len(acf) == 51
    assert float(acf[0]["acf_radial"]) == 1.0 and float(acf[0]["acf_coord1"]) == 1.0


def test_output_reproducible_from_header(tmp_path):
    res = run_experiment(cfg(output_dir=str(tmp_path / "a")))
    head, _ = read_csv(res.files["summary"])
    again = ExperimentConfig.from_json(head).replace(output_dir=str(tmp_path / "b"))
    res2 = run_experiment(again)
    for kind in ("summary", "acf"):
        assert body(res.files[kind]) == body(res2.files[kind])


def test_sim1_pcn_always_accepts():
    r = simulate(cfg(algorithm={"kind": "pcn", "rho": 0.8}, target={"name": "gaussian", "sigma": 1.0},
                     d=20, M=1_000_000))
    assert r.summary["acceptance_rate"] == 1.0


def _iat(alg, target, M=1_000_000):
    return simulate(cfg(algorithm={"kind": alg}, target=target, d=20, M=M, seed=1)).summary["iat_radial"]


def test_sim2_mpcn_beats_baselines_on_t():
    t = {"name": "student_t", "nu": 2.0, "sigma": 5.0}
    m = _iat("mpcn", t)
    assert m < _iat("pcn", t) and m < _iat("rwm_gauss", t)


def test_sim3_mpcn_beats_baselines_on_perturbed_t():
    t = {"name": "perturbed_t"}
    m = _iat("mpcn", t)
    assert m < min(_iat(a, t) for a in ("pcn", "rwm_gauss", "rwm_t"))


def test_explicit_init_and_path():
    c = cfg(init=[1.0] * 10, M=10, record={"radial": True, "coord1": True, "path": True})
    r = simulate(c)
    assert r.trace.path.shape == (10, 10)


# -- peak estimation / shift study --------------------------------------------------

def test_estimate_peak_null_case():
    c = cfg(algorithm={"kind": "pcn"}, target={"name": "gaussian", "sigma": 1.0}, d=20, seed=2)
    xi = estimate_peak(c, 1000)
    assert np.array_equal(xi, estimate_peak(c, 1000))
    # IAT of a pCN coordinate is ~18, so the pilot mean has sd ~ sqrt(18 / 1000)
    assert np.linalg.norm(xi) / math.sqrt(20) < 3 * math.sqrt(18 / 1000)


def test_estimate_peak_is_pilot_average():
    c = cfg(M=10)
    rng = RngStream(c.seed, c.stream_id)
    x0 = rng.normal(10)
    tr = run_chain(x0, c.kernel(), c.base_target(), 99, rng, record_path=True)
    assert np.allclose(estimate_peak(c, 100), (x0 + tr.path.sum(0)) / 100, rtol=1e-14)


def test_zero_peak_bookkeeping_is_exact(rng):
    t = target_gaussian(5)
    k = ProposalKernel("mpcn", rho=0.8)
    x0 = rng.normal(5)
    a = run_chain(x0, k, t, 3000, RngStream(1))
    b = run_chain(x0, k, target_shifted(t, -np.zeros(5)), 3000, RngStream(1), offset=np.zeros(5))
    assert np.array_equal(a.radial, b.radial) and np.array_equal(a.coord1, b.coord1)


def test_peak_run_reports_original_coordinates():
    c = cfg(algorithm={"kind": "mpcn"}, target={"name": "gaussian", "sigma": 1.0}, d=5, M=20_000,
            xi=3.0, peak_estimation={"pilot_M": 1000}, record={"radial": True, "coord1": True, "path": True})
    r = simulate(c)
    assert r.xi_hat is not None
    assert abs(r.trace.coord1.mean() - 3.0) < 0.2
    assert np.allclose(r.trace.path[:, 0], r.trace.coord1)


def test_shift_study_rows(tmp_path):
    base = cfg(algorithm={"kind": "pcn"}, target={"name": "gaussian", "sigma": 1.0}, d=5, M=3000,
               output_dir=str(tmp_path))
    rows, files = run_shift_study(base, xis=(0, 2), pilot_M=100)
    assert len(rows) == 2 * 2 * 2
    assert {(r["algorithm"], r["peak_estimation"], r["xi"]) for r in rows} == {
        (a, p, x) for a in ("pcn", "mpcn") for p in (False, True) for x in (0.0, 2.0)}
    head, got = read_csv(files["shift"])
    assert len(got) == 8 and json.loads(head)["pilot_M"] == 100


def test_shift_study_target_check():
    with pytest.raises(ConfigError):
        run_shift_study(cfg(target={"name": "perturbed_t"}, d=20), write=False)


# -- scaling study -------------------------------------------------------------------

def small_scaling(tmp_path, **kw):
    algs = [{"kind": "mpcn", "M_scale": 2000, "M_power": 1},
            {"kind": "rwm_gauss", "M_scale": 200, "M_power": 2, "thin_power": 1}]
    return ScalingConfig(algorithms=algs, dims=[4, 8, 16], replications=3, seed=1,
                         output_dir=str(tmp_path), **kw)


def test_scaling_study_outputs(tmp_path):
    res = run_scaling_study(small_scaling(tmp_path))
    assert len(res.rows) == 2 * 3 * 3
    _, rows = read_csv(res.files["scaling"])
    assert list(rows[0])[:4] == ["algorithm", "d", "replication", "iat"]
    _, slopes = read_csv(res.files["slopes"])
    assert {r["algorithm"] for r in slopes} == {"mpcn", "rwm_gauss"}
    assert set(res.stuck["mpcn"]) == {4, 8, 16}


def test_scaling_cells_share_seeds_across_algorithms(tmp_path):
    res = run_scaling_study(small_scaling(tmp_path), write=False)
    again = run_scaling_study(small_scaling(tmp_path), write=False)
    assert res.rows == again.rows


def test_scaling_flags_unreliable(tmp_path):
    c = small_scaling(tmp_path, unreliable_fraction=1e-9)
    res = run_scaling_study(c, write=False)
    assert not any(r["reliable"] for r in res.rows)
    assert all(v is None for v in res.slopes.values())


def test_scaling_config_validation():
    with pytest.raises(ConfigError):
        ScalingConfig(dims=[8, 16])
    with pytest.raises(ConfigError):
        ScalingConfig(replications=2)
    with pytest.raises(ConfigError):
        ScalingConfig(algorithms=[{"rho": 0.5}])


# -- sde compare -----------------------------------------------------------------------

def test_sde_compare_small(tmp_path):
    c = SdeCompareConfig(d=20, M=50_000, chains=2, em_steps=10_000, min_count=50, output_dir=str(tmp_path))
    est, rows, em, files = sde_compare(c)
    _, got = read_csv(files["triplet"])
    assert list(got[0]) == TRIPLET_COLUMNS and len(got) == len(est)
    assert all(float(r["a_closed"]) == pytest.approx(10.0) for r in got)
    assert em["q_median"] == pytest.approx(25 / math.log(2))
    assert em["em_min"] > 0


# -- CLI -------------------------------------------------------------------------------------

def test_cli_run(tmp_path, capsys):
    rc = cli.main(["run", "--algorithm", "pcn", "--target", "gaussian", "-d", "5", "-M", "2000",
                   "--output-dir", str(tmp_path), "--seed", "3"])
    assert rc == 0
    out = capsys.readouterr().out.splitlines()
    assert json.loads(out[0])["acceptance_rate"] == 1.0
    assert (tmp_path / "pcn_gaussian_d5_s3_summary.csv").exists()


def test_cli_config_file_and_override(tmp_path, capsys):
    p = tmp_path / "exp.yaml"
    p.write_text(yaml.safe_dump({"algorithm": {"kind": "mpcn", "rho": 0.5}, "d": 6, "M": 1000,
                                 "output_dir": str(tmp_path)}))
    assert cli.main(["run", "--config", str(p), "--rho", "0.7", "-M", "1500"]) == 0
    head, rows = read_csv(tmp_path / "mpcn_student_t_d6_s0_summary.csv")
    c = json.loads(head)
    assert c["algorithm"] == {"kind": "mpcn", "rho": 0.7} and c["M"] == 1500
    assert rows[0]["rho_or_sigma"] == "0.7"


def test_cli_algorithm_switch_drops_old_params(tmp_path):
    p = tmp_path / "exp.yaml"
    p.write_text(yaml.safe_dump({"algorithm": {"kind": "pcn", "rho": 0.5}, "d": 4, "M": 500,
                                 "output_dir": str(tmp_path)}))
    assert cli.main(["run", "--config", str(p), "--algorithm", "rwm_gauss"]) == 0


def test_cli_config_error_exit_code(tmp_path, capsys):
    assert cli.main(["run", "--algorithm", "pcn", "-d", "0", "--output-dir", str(tmp_path)]) == 1
    assert "d:" in capsys.readouterr().err
    p = tmp_path / "bad.yaml"
    p.write_text("bogus: 1\n")
    assert cli.main(["run", "--config", str(p)]) == 1
    assert cli.main(["scaling-study", "--dims", "4,8"]) == 1


def test_cli_numerical_error_exit_code(monkeypatch, tmp_path):
    import mpcn.harness

    def boom(cfg, write=True):
        raise NumericalError("quadrature failed", value=float("nan"))

    monkeypatch.setattr(mpcn.harness, "run_experiment", boom)
    assert cli.main(["run", "--output-dir", str(tmp_path), "-d", "3", "-M", "10"]) == 2


def test_cli_shift_study(tmp_path, capsys):
    rc = cli.main(["shift-study", "--algorithm", "pcn", "--target", "gaussian", "-d", "4", "-M", "1000",
                   "--xis", "0,1", "--algorithms", "pcn", "--peak", "off", "--output-dir", str(tmp_path)])
    assert rc == 0
    assert (tmp_path / "shift_study.csv").exists()


def test_cli_scaling_study(tmp_path, capsys):
    p = tmp_path / "s.yaml"
    p.write_text(yaml.safe_dump({"algorithms": [{"kind": "mpcn", "M_scale": 500, "M_power": 1}],
                                 "replications": 3}))
    rc = cli.main(["scaling-study", "--config", str(p), "--dims", "4,8,16", "--output-dir", str(tmp_path)])
    assert rc == 0
    assert (tmp_path / "slopes.csv").exists()


def test_cli_sde_compare(tmp_path, capsys):
    rc = cli.main(["sde-compare", "-d", "10", "-M", "20000", "--chains", "1", "--em-steps", "1000",
                   "--output-dir", str(tmp_path)])
    assert rc == 0
    assert (tmp_path / "triplet_d10.csv").exists()


def test_cli_selftest(capsys):
    assert cli.main(["selftest"]) == 0
    assert "FAIL" not in capsys.readouterr().out


def test_module_entry_point():
    import subprocess
    import sys

    out = subprocess.run([sys.executable, "-m", "mpcn", "--help"], capture_output=True, text=True)
    assert out.returncode == 0 and "scaling-study" in out.stdout
