import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nlslab import field as fld
from nlslab.config import DEFAULTS
from nlslab.functionals import evaluate
from nlslab.nonlinearity import NonlinearityModel
from nlslab.variational import (FamilyError, ProjectionError, RayError, build_family, estimate_d_M,
                                estimate_d_omega, gaussian_family, level_tolerance, mountain_pass_level,
                                nehari_project, ray_level, ray_max_count, run_variational)


@pytest.fixture(scope="module")
def gaussians(grid1):
    g = DEFAULTS["family"]["gaussian"]
    return gaussian_family(grid1, g["widths"], g["amplitudes"])


@pytest.fixture(scope="module")
def gauss_report(gaussians, septic, gs7):
    return run_variational(gaussians, septic, 1.0, gs7.level_m)


class TestProjection:
    def test_phi_fixed(self, gs7, septic):
        assert nehari_project(gs7.field, septic, 1.0).t_star == pytest.approx(1.0, abs=1e-8)

    def test_double_phi(self, gs7, septic):
        assert nehari_project(gs7.field * 2.0, septic, 1.0).t_star == pytest.approx(0.5, abs=1e-8)

    def test_gaussian(self, grid1, septic):
        v = fld.sample_profile(grid1, lambda x: np.exp(-x * x))
        pr = nehari_project(v, septic, 1.0)
        assert abs(pr.I) <= 1e-10 * pr.kinetic and pr.ray_max_ok
        # ray maximum confirmed independently by a dense resampled scan
        ts = np.linspace(0.01, 2 * pr.t_star, 400)
        dense = [evaluate(v * t, septic, 1.0).S for t in ts]
        assert max(dense) <= pr.S + 1e-12

    @given(st.floats(0.3, 3.0), st.floats(0.3, 3.0))
    def test_projection_lies_on_manifold(self, grid1, septic, a, w):
        v = fld.sample_profile(grid1, lambda x: a * np.exp(-(x / w) ** 2))
        pr = nehari_project(v, septic, 1.0)
        rep = evaluate(pr.field, septic, 1.0)
        assert abs(rep.I) <= 1e-9 * rep.kinetic
        assert pr.S >= 1.335495209426766 - 1e-6

    def test_no_bracket(self, grid1):
        s = np.linspace(0, 50, 501)
        weak = NonlinearityModel.tabulated(s, np.tanh(s) * 1e-3)
        v = fld.sample_profile(grid1, lambda x: np.exp(-x * x))
        with pytest.raises(ProjectionError):
            nehari_project(v, weak, 1.0, max_doublings=5)

    def test_zero(self, grid1, septic):
        with pytest.raises(ProjectionError):
            nehari_project(fld.zeros(grid1), septic, 1.0)


class TestDOmega:
    def test_phi_alone(self, gs7, septic):
        assert estimate_d_omega([("phi", gs7.field)], septic, 1.0)[0] == pytest.approx(gs7.level_m, abs=1e-12)

    def test_phi_scalings(self, gs7, septic):
        fam = [("phi", gs7.field), ("2phi", gs7.field * 2.0), ("phi13", fld.rescale(gs7.field, 1.3))]
        assert estimate_d_omega(fam, septic, 1.0)[0] == pytest.approx(gs7.level_m, abs=1e-6)

    def test_gaussians_one_sided(self, gauss_report):
        assert gauss_report.d_omega_est >= gauss_report.m_ref - 1e-6

    @pytest.mark.xfail(strict=True, reason="best Gaussian on the Nehari manifold sits 7.6% above m")
    def test_gaussians_within_five_percent(self, gauss_report):
        assert gauss_report.d_omega_est <= 1.05 * gauss_report.m_ref

    def test_empty(self, grid1, septic):
        with pytest.raises(FamilyError):
            estimate_d_omega([("z", fld.zeros(grid1))], septic, 1.0)


class TestDM:
    def test_phi(self, gs7, septic):
        assert estimate_d_M([("phi", gs7.field)], septic, 1.0)[0] == pytest.approx(gs7.level_m, abs=1e-6)

    def test_dilated_phi(self, gs7, septic):
        value, rows = estimate_d_M([("phi11", fld.rescale(gs7.field, 1.1))], septic, 1.0)
        assert value == pytest.approx(gs7.level_m, abs=1e-3)
        assert rows[0].lambda0 == pytest.approx(1 / 1.1, rel=1e-9)

    def test_gaussians_one_sided(self, gauss_report):
        assert gauss_report.d_M_est >= gauss_report.m_ref - 1e-6

    def test_rejects_positive_nehari(self, grid1, septic):
        # on Q = 0 a septic profile has I = M - 5K/3; tall seeds reach Q = 0 at small K, so I > 0
        v = fld.sample_profile(grid1, lambda x: 3.0 * np.exp(-x * x))
        with pytest.raises(FamilyError):
            estimate_d_M([("small", v)], septic, 1.0)


class TestMountainPass:
    def test_phi_seed(self, gs7, septic):
        level, s, amp = ray_level(gs7.field, septic, 1.0)
        assert level == pytest.approx(gs7.level_m, abs=1e-6)
        assert s * amp == pytest.approx(1.0, abs=1e-4)

    def test_amplitude_doubled(self, gs7, septic):
        _, _, amp = ray_level(gs7.field, septic, 1.0)
        a = ray_level(gs7.field, septic, 1.0, amplitude=amp)[0]
        b = ray_level(gs7.field, septic, 1.0, amplitude=2 * amp)[0]
        assert a == pytest.approx(b, abs=1e-8)

    def test_gaussian_seed(self, grid1, septic, gs7):
        v = fld.sample_profile(grid1, lambda x: np.exp(-x * x))
        assert ray_level(v, septic, 1.0)[0] >= gs7.level_m - 1e-6

    def test_single_interior_maximum(self, grid1, septic):
        v = fld.sample_profile(grid1, lambda x: np.exp(-x * x))
        assert ray_max_count(v, septic, 1.0, 3.0) == 1

    def test_bad_amplitude(self, gs7, septic):
        with pytest.raises(RayError):
            ray_level(gs7.field, septic, 1.0, amplitude=0.5)

    def test_no_seeds(self, septic):
        with pytest.raises(FamilyError):
            mountain_pass_level([], septic, 1.0)


class TestReport:
    def test_chain_with_phi(self, gaussians, gs7, septic, tmp_path):
        rep = run_variational(gaussians[:20] + [("phi", gs7.field)], septic, 1.0, gs7.level_m)
        assert rep.chain_ok and rep.one_sided_ok
        for est in (rep.d_omega_est, rep.d_M_est, rep.c_est):
            assert abs(est - gs7.level_m) <= 1e-6
        rep.write(tmp_path / "v.json", tmp_path / "v.csv")
        assert json.loads((tmp_path / "v.json").read_text())["chain_ok"] is True
        lines = (tmp_path / "v.csv").read_text().splitlines()
        assert lines[0] == "member_id,S_projected,t_star,lambda0,admitted" and len(lines) == 22

    def test_gaussians_one_sided_not_chain(self, gauss_report):
        assert gauss_report.family_size == 200
        assert gauss_report.one_sided_ok and not gauss_report.chain_ok
        assert gauss_report.c_est >= gauss_report.m_ref - 1e-6

    def test_build_family(self, grid1, gs7):
        spec = {"gaussian": {"widths": [1.0], "amplitudes": [1.0, 2.0]}, "sech": {"widths": [1.0], "powers": [1.0]},
                "include_phi": True, "phi_scales": [1.1]}
        ids = [mid for mid, _ in build_family(spec, grid1, gs7.field)]
        assert ids == ["gauss_w1_a1", "gauss_w1_a2", "sech_w1_q1", "phi", "phi_lam1.1"]
        with pytest.raises(FamilyError):
            build_family({"include_phi": True}, grid1)
        with pytest.raises(FamilyError):
            build_family({}, grid1)

    def test_tolerance_by_method(self):
        assert level_tolerance("shooting") == 1e-3 and level_tolerance("closed_form") == 1e-6
