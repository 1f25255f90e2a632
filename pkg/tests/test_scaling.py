import numpy as np
import pytest

from nlslab import field as fld
from nlslab.field import TruncationError
from nlslab.functionals import ScaledFunctionals, evaluate
from nlslab.scaling import (RootNotBracketedError, chord_gaps, find_lambda0, find_lambda1, find_q_root,
                            scan)


@pytest.fixture(scope="module")
def phi_scan(gs7, septic):
    return scan(gs7.field, septic, 1.0, (0.5, 2.0, 400))


class TestRoots:
    def test_phi_is_its_own_root(self, gs7, septic):
        assert find_lambda0(gs7.field, septic, 1.0) == 1.0
        assert find_lambda1(gs7.field, septic, 1.0) == 1.0

    @pytest.mark.parametrize("scale", [1.05, 1.2, 1.6])
    def test_dilated_phi(self, gs7, septic, scale):
        v = fld.rescale(gs7.field, scale)
        assert find_lambda0(v, septic, 1.0) == pytest.approx(1 / scale, rel=1e-9)

    def test_lambda1_below_lambda0(self, gs7, septic):
        v = fld.rescale(gs7.field, 1.2)
        l0, l1 = find_lambda0(v, septic, 1.0), find_lambda1(v, septic, 1.0)
        assert l1 < 1 and l0 < 1
        assert abs(ScaledFunctionals(v, septic, 1.0).dilation(l1).I) <= 1e-9

    def test_root_by_resampling(self, gs7, septic):
        v = fld.rescale(gs7.field, 1.3)
        lam = find_lambda0(v, septic, 1.0)
        rep = evaluate(fld.rescale(v, lam), septic, 1.0)
        assert abs(rep.Q) <= 1e-8 * rep.kinetic

    def test_requires_sign(self, gs7, septic):
        v = fld.rescale(gs7.field, 0.8)
        with pytest.raises(ValueError):
            find_lambda0(v, septic, 1.0)
        with pytest.raises(ValueError):
            find_lambda1(v, septic, 1.0)
        assert find_q_root(v, septic, 1.0) == pytest.approx(1.25, rel=1e-9)

    def test_zero_field(self, grid1, septic):
        with pytest.raises(ValueError):
            find_lambda0(fld.zeros(grid1), septic, 1.0)

    def test_unbracketed(self, grid1, septic):
        # Q(v^lam)/lam^2 stays negative down to lam = 0.9
        v = fld.sample_profile(grid1, lambda x: 3 * np.exp(-x * x))
        with pytest.raises(RootNotBracketedError):
            find_lambda0(v, septic, 1.0, lam_floor=0.9)


class TestScan:
    def test_examples(self, phi_scan):
        assert phi_scan.lambdas.size == 400
        assert phi_scan.lambda0 == pytest.approx(1.0, abs=1e-9)
        assert phi_scan.lambda1 == pytest.approx(1.0, abs=1e-9)

    def test_scaling_structure_on_phi(self, phi_scan):
        assert phi_scan.sign_pattern_ok
        assert phi_scan.concave_past_lambda0
        assert phi_scan.derivative_identity_max_error <= 1e-3

    def test_maximum_at_phi(self, phi_scan, gs7):
        i = int(np.argmax(phi_scan.S_curve))
        assert phi_scan.S_curve[i] <= gs7.level_m + 1e-12
        assert abs(phi_scan.lambdas[i] - 1.0) <= 0.01

    def test_seed_phi_12(self, gs7, septic):
        res = scan(fld.rescale(gs7.field, 1.2), septic, 1.0)
        assert res.lambda0 == pytest.approx(1 / 1.2, rel=1e-8)
        assert res.sign_pattern_ok and res.concave_past_lambda0
        assert res.derivative_identity_max_error <= 1e-3

    @pytest.mark.parametrize("shape", ["gaussian", "two_bump"])
    def test_other_seeds(self, grid1, septic, shape):
        if shape == "gaussian":
            v = fld.sample_profile(grid1, lambda x: 1.5 * np.exp(-x * x))
        else:
            v = fld.sample_profile(grid1, lambda x: 1.5 * (np.exp(-(x - 2) ** 2) + np.exp(-(x + 2) ** 2)))
        res = scan(v, septic, 1.0, (0.3, 3.0, 400))
        assert res.lambda0 is not None
        assert res.sign_pattern_ok and res.concave_past_lambda0
        lam0 = find_q_root(v, septic, 1.0)
        assert res.lambda0 == pytest.approx(lam0, rel=1e-8)

    def test_summary_and_rows(self, phi_scan):
        rows = list(phi_scan.rows())
        assert len(rows) == 400 and len(rows[0]) == 4
        assert phi_scan.summary()["count"] == 400

    def test_bad_range(self, gs7, septic):
        with pytest.raises(ValueError):
            scan(gs7.field, septic, 1.0, (2.0, 0.5, 10))

    def test_truncated_everywhere(self, grid1, septic):
        wide = fld.sample_profile(grid1, lambda x: np.exp(-(x / 7) ** 2))
        with pytest.raises(TruncationError):
            scan(wide, septic, 1.0, (0.1, 0.2, 10))


def test_chord_gaps_of_concave_curve():
    lam = np.linspace(0.1, 2, 50)
    assert np.all(chord_gaps(lam, -lam**2) > 0)
    assert np.allclose(chord_gaps(lam, 3 * lam + 1), 0, atol=1e-12)
