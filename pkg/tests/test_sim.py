import json

import numpy as np
import pytest

from imtreg import (
    InvalidConfig,
    SimConfig,
    evaluate_value,
    generate,
    oracle_value,
    pixel_grid,
    run_study,
)
from imtreg.sim import surface_integrals
from oracles import (
    oracle_value_closed_form,
    sim_component_integrals,
    triangle_quadrature,
)


class TestConfigValidation:
    def test_sample_size(self):
        with pytest.raises(InvalidConfig):
            SimConfig(n=1)

    def test_autocorrelation_range(self):
        with pytest.raises(InvalidConfig):
            SimConfig(n=10, r=1.0)

    def test_negative_noise(self):
        with pytest.raises(InvalidConfig):
            SimConfig(n=10, noise_sd=-0.5)

    def test_alpha_length(self):
        with pytest.raises(InvalidConfig):
            SimConfig(n=10, q=3, alpha1=[1.0, 2.0])

    def test_treat_prob_range(self):
        with pytest.raises(InvalidConfig):
            SimConfig(n=10, treat_prob=1.0)


class TestGenerate:
    def test_zero_model_gives_zero_outcomes(self):
        cfg = SimConfig(
            n=20,
            noise_sd=0.0,
            beta1=0.0,
            beta2=0.0,
            alpha1=np.zeros(5),
            alpha2=np.zeros(5),
            seed=1,
        )
        data, truth = generate(cfg)
        assert np.abs(data.Y).max() == 0.0
        assert np.abs(truth.contrast).max() == 0.0

    def test_component_integrals_match_closed_forms(self):
        i1, i2 = sim_component_integrals()
        assert i1 == pytest.approx(10.0 / 3.0, rel=1e-14)
        computed = surface_integrals(1.0)
        assert computed[0] == pytest.approx(i1, rel=1e-12)
        assert computed[1] == pytest.approx(i2, rel=1e-12)
        # independent quadrature over the two unit-square halves
        from imtreg.sim import exponential_component, quadratic_component

        verts = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
        tris = [[0, 1, 2], [0, 2, 3]]
        for comp, expected in ((quadratic_component, i1), (exponential_component, i2)):
            total = 0.0
            for tri in tris:
                pts, w = triangle_quadrature(verts[tri], 40)
                total += w @ comp(pts[:, 0], pts[:, 1])
            assert total == pytest.approx(expected, rel=1e-9)

    def test_covariate_correlation(self):
        cfg = SimConfig(n=500, r=0.5, seed=3)
        data, _ = generate(cfg)
        cov = np.cov(data.X.T)
        assert abs(cov[0, 1] - 0.5) < 0.1

    def test_images_have_exact_rank_two(self):
        data, _ = generate(SimConfig(n=50, seed=4))
        s = np.linalg.svd(data.images, compute_uv=False)
        assert s[2] < 1e-12 * s[0]

    def test_deterministic_under_seed(self):
        a, ta = generate(SimConfig(n=30, seed=11))
        b, tb = generate(SimConfig(n=30, seed=11))
        assert np.array_equal(a.Y, b.Y)
        assert np.array_equal(a.images, b.images)
        assert np.array_equal(ta.zeta, tb.zeta)

    def test_oracle_action_is_contrast_sign(self):
        _, truth = generate(SimConfig(n=100, seed=5))
        assert np.array_equal(truth.oracle_action, (truth.contrast > 0).astype(int))

    def test_pixel_grid_layout(self):
        grid = pixel_grid((40, 40))
        assert grid.shape == (1600, 2)
        assert grid[0] == pytest.approx([0.5 / 40, 0.5 / 40])
        assert grid[1] == pytest.approx([0.5 / 40, 1.5 / 40])
        assert grid[-1] == pytest.approx([39.5 / 40, 39.5 / 40])


class TestEvaluateValue:
    def test_always_treat_has_zero_value(self):
        # every generator term is mean zero, so always-treating earns nothing
        cfg = SimConfig(n=10, seed=0)
        v = evaluate_value(
            lambda data: np.ones(data.n), cfg, n_eval=100_000, seed=21
        )
        assert abs(v) < 0.05

    def test_oracle_value_matches_closed_form(self):
        # E max(0, C) = sd(C)/sqrt(2 pi) for the centered Gaussian contrast
        for r in (0.0, 0.5):
            cfg = SimConfig(n=10, r=r, seed=0)
            v = oracle_value(cfg, n_eval=200_000, seed=33)
            assert v == pytest.approx(oracle_value_closed_form(r), abs=0.03)

    def test_minimum_eval_size_enforced(self):
        with pytest.raises(InvalidConfig):
            evaluate_value(lambda data: np.zeros(data.n), SimConfig(n=10), n_eval=10)

    def test_policy_shape_checked(self):
        with pytest.raises(InvalidConfig):
            evaluate_value(lambda data: np.zeros(3), SimConfig(n=10), n_eval=1000)


FAST_STUDY = dict(
    n_reps=2,
    criteria=("pve", "pave"),
    seed=9,
    n_eval=1000,
    triangles=8,
    degree=5,
    smoothness=1,
)


class TestRunStudy:
    def test_report_schema_and_determinism(self):
        configs = [{"n": 60, "r": 0.0, "grid_shape": (20, 20), "seed": None}]
        rep1 = run_study(configs, **FAST_STUDY)
        rep2 = run_study(configs, **FAST_STUDY)
        assert rep1.to_json() == rep2.to_json()
        key = "config0:pve"
        res = rep1.results[key]
        assert set(res) >= {"value_opt", "value_hat", "mse_alpha1", "mse_alpha2"}
        assert len(res["mse_alpha1"]) == 5
        value_csv = rep1.value_table_csv()
        assert value_csv.startswith("policy,")
        assert "V(pi_opt)" in value_csv and "V(pi_PVE)" in value_csv
        mse_csv = rep1.mse_table_csv()
        assert mse_csv.splitlines()[0].startswith("r,n,criterion,alpha1_1_x1e2")

    def test_pve_and_pave_rows_agree(self):
        configs = [{"n": 80, "r": 0.0, "grid_shape": (20, 20)}]
        rep = run_study(configs, **FAST_STUDY)
        pve = rep.results["config0:pve"]
        pave = rep.results["config0:pave"]
        assert pve["value_hat"] == pytest.approx(pave["value_hat"], abs=1e-12)
        assert np.allclose(pve["mse_alpha1"], pave["mse_alpha1"], atol=1e-14)

    def test_checkpoint_resume_loads_saved_records(self, tmp_path):
        configs = [{"n": 60, "r": 0.0, "grid_shape": (20, 20)}]
        kwargs = dict(FAST_STUDY, n_reps=2)
        run_study(configs, checkpoint_dir=tmp_path, **kwargs)
        ck = tmp_path / "config0_rep0000.json"
        doc = json.loads(ck.read_text())
        doc["value_opt"] = 999.0
        ck.write_text(json.dumps(doc, sort_keys=True))
        resumed = run_study(configs, checkpoint_dir=tmp_path, resume=True, **kwargs)
        assert resumed.records["0:0"]["value_opt"] == 999.0

    def test_single_rep_runs(self):
        configs = [{"n": 60, "r": 0.0, "grid_shape": (20, 20)}]
        rep = run_study(configs, **dict(FAST_STUDY, n_reps=1))
        assert rep.results["config0:pve"]["n_success"] == 1

    def test_fitted_regime_never_beats_oracle(self):
        # per subject the oracle takes max(0, contrast), so dominance holds
        # pointwise in every replication, not just in expectation
        configs = [{"n": 80, "r": 0.0, "grid_shape": (20, 20)}]
        rep = run_study(configs, **FAST_STUDY)
        for key, record in rep.records.items():
            for crit in ("pve", "pave"):
                assert record[crit]["value_hat"] <= record["value_opt"] + 1e-12


class TestFittedPolicyValue:
    def test_fitted_policy_value_through_evaluator(self, space32, sim500):
        from imtreg import fit

        cfg, data, _ = sim500
        model = fit(data, space32, selection="pve")
        v_hat = evaluate_value(model.policy(), cfg, n_eval=2000, seed=606)
        v_opt = oracle_value(cfg, n_eval=2000, seed=606)
        assert v_hat <= v_opt + 1e-12
        assert v_opt - v_hat < 0.1
