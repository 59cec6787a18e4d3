import numpy as np
import pytest

from mspursuit import (
    ClassPartition,
    EquilibriumReport,
    GenerationConfig,
    ShapeMismatch,
    VerifyThresholds,
    alignment_residuals,
    class_spectra,
    cosine_heatmap,
    dominance_ratios,
    generate,
    isometry_ratios,
    oracle_msp_encoder,
    project_encoder_ssp,
    pseudoinverse_decoder,
    report_status,
    verify_msp_equilibrium,
    verify_ssp_equilibrium,
)
from mspursuit.metrics import ORACLE_THRESHOLDS


class TestCosineHeatmap:
    def test_identical_columns(self):
        Z = np.array([[1.0, 1.0], [1.0, 1.0]])
        H = cosine_heatmap(Z)
        assert H[0, 1] == pytest.approx(1.0, abs=1e-12)

    def test_orthogonal_columns(self):
        H = cosine_heatmap(np.eye(2))
        assert H[0, 1] == 0.0
        assert H[0, 0] == 1.0

    def test_zero_column_convention(self):
        Z = np.array([[1.0, 0.0], [0.0, 0.0]])
        H = cosine_heatmap(Z)
        assert np.array_equal(H[:, 1], np.zeros(2))
        assert np.array_equal(H[1, :], np.zeros(2))
        assert H[0, 0] == 1.0

    def test_symmetric_unit_range(self, rng):
        Z = rng.standard_normal((4, 12))
        H = cosine_heatmap(Z)
        assert np.array_equal(H, H.T)
        assert H.min() >= 0.0 and H.max() <= 1.0


class TestClassSpectra:
    def test_orthonormal_block(self):
        part = ClassPartition.from_counts([3, 2])
        Z = np.zeros((4, 5))
        Z[:3, :3] = np.eye(3)
        Z[3, 3:] = [1.0, 1.0]
        spectra = class_spectra(Z, part)
        assert np.allclose(spectra[0], np.ones(3), atol=1e-12)
        assert spectra[1][0] == pytest.approx(np.sqrt(2.0), abs=1e-12)

    def test_rank_visible_in_tail(self, rng):
        part = ClassPartition.from_counts([8])
        Z = rng.standard_normal((5, 2)) @ rng.standard_normal((2, 8))
        s = class_spectra(Z, part)[0]
        assert s[2] < 1e-8 * s[0]
        assert np.all(np.diff(s) <= 1e-12)  # non-increasing

    def test_zero_block(self):
        part = ClassPartition.from_counts([3])
        s = class_spectra(np.zeros((4, 3)), part)[0]
        assert np.array_equal(s, np.zeros(3))


class TestAlignmentResiduals:
    def test_equal_matrices_zero_residual(self, rng):
        Z = rng.standard_normal((4, 9))
        part = ClassPartition.from_counts([4, 5])
        assert np.max(alignment_residuals(Z, Z.copy(), part)) < 1e-10

    def test_orthogonal_span_gives_column_norms(self):
        part = ClassPartition.from_counts([2])
        Z = np.zeros((4, 2))
        Z[0] = [1.0, 2.0]
        Zhat = np.zeros((4, 2))
        Zhat[1] = [1.0, 1.0]
        r = alignment_residuals(Z, Zhat, part)
        assert np.allclose(r, np.linalg.norm(Z, axis=0), atol=1e-12)

    def test_orthogonal_invariance(self, rng):
        part = ClassPartition.from_counts([5, 4])
        Z = rng.standard_normal((4, 9))
        Zhat = rng.standard_normal((4, 9))
        Q, _ = np.linalg.qr(rng.standard_normal((4, 4)))
        a = alignment_residuals(Z, Zhat, part)
        b = alignment_residuals(Q @ Z, Q @ Zhat, part)
        assert np.allclose(a, b, atol=1e-10)

    def test_shape_mismatch(self):
        part = ClassPartition.from_counts([2])
        with pytest.raises(ShapeMismatch):
            alignment_residuals(np.ones((2, 2)), np.ones((3, 2)), part)


class TestIsometryRatios:
    def test_identity(self, rng):
        X = rng.standard_normal((4, 8))
        r = isometry_ratios(X, X.copy())
        assert r.size == 8 * 7 // 2
        assert np.allclose(r, 1.0, atol=1e-12)

    def test_scaling(self, rng):
        X = rng.standard_normal((4, 6))
        assert np.allclose(isometry_ratios(X, 2.0 * X), 2.0, atol=1e-12)

    def test_semi_orthogonal_on_row_space(self, rng):
        # data inside the encoder's row space: exact isometry
        F = project_encoder_ssp(rng.standard_normal((3, 6)))
        X = F.T @ rng.standard_normal((3, 10))  # columns in rowspace(F)
        r = isometry_ratios(X, F @ X)
        assert np.max(np.abs(r - 1.0)) < 1e-10

    def test_skips_coincident_points(self):
        X = np.array([[1.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
        Z = np.array([[2.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
        r = isometry_ratios(X, Z)
        assert r.size == 2  # the coincident pair is dropped


class TestDominance:
    def test_clean_rank_gives_inf(self):
        spectra = [np.array([3.0, 2.0, 0.0])]
        assert dominance_ratios(spectra, [2]) == [float("inf")]

    def test_finite_ratio(self):
        spectra = [np.array([4.0, 2.0, 0.5])]
        assert dominance_ratios(spectra, [2]) == [4.0]


def oracle_pair(seed=0):
    cfg = GenerationConfig(
        n_per_class=(30, 40), d_x=12, subspace_dims=(2, 3), nu=1e6, sigma_sq=0.0, seed=seed
    )
    ds = generate(cfg)
    F, G = oracle_msp_encoder(ds, 8)
    return ds, F, G


class TestVerifyMsp:
    def test_oracle_passes_all_groups(self):
        ds, F, G = oracle_pair()
        report = verify_msp_equilibrium(F, G, ds, 1.0, ORACLE_THRESHOLDS)
        assert report.passed
        assert report.injective_pass and report.discriminative_pass and report.consistent_pass
        assert report.rank_counts == list(ds.config.subspace_dims)

    def test_zero_encoder_fails_injectivity(self):
        ds, F, G = oracle_pair(seed=1)
        report = verify_msp_equilibrium(np.zeros_like(F), np.zeros_like(G), ds, 1.0)
        assert not report.injective_pass
        assert not report.passed

    def test_zero_decoder_fails_consistency(self):
        ds, F, _ = oracle_pair(seed=2)
        report = verify_msp_equilibrium(F, np.zeros((ds.d_x, 8)), ds, 1.0)
        assert not report.consistent_pass
        # residuals then equal the representation column norms (relative 1)
        assert report.max_residual_rel == pytest.approx(1.0, abs=1e-9)

    def test_report_recomputable_from_evidence(self):
        ds, F, G = oracle_pair(seed=3)
        report = verify_msp_equilibrium(F, G, ds, 1.0)
        d = report.to_dict()
        # recompute pass/fail from the stored numbers alone
        th = VerifyThresholds.from_dict(d["thresholds"])
        cross = np.array(d["cross_gram"])
        k = len(d["class_dims"])
        assert d["discriminative_pass"] == bool(
            np.all(cross[np.triu_indices(k, 1)] < th.cross_gram_tol)
        )
        assert d["consistent_pass"] == (d["max_residual_rel"] < th.residual_rel_tol)
        back = EquilibriumReport.from_dict(d)
        assert back.passed == report.passed

    def test_json_round_trip(self):
        import json

        ds, F, G = oracle_pair(seed=4)
        report = verify_msp_equilibrium(F, G, ds, 1.0)
        blob = json.dumps(report.to_dict(), sort_keys=True)
        back = EquilibriumReport.from_dict(json.loads(blob))
        assert back.passed == report.passed
        assert back.branches == report.branches


class TestVerifySsp:
    def _ssp_dataset(self, seed=5):
        cfg = GenerationConfig(
            n_per_class=(40,), d_x=10, subspace_dims=(3,), nu=0.0, sigma_sq=0.0, seed=seed
        )
        return generate(cfg)

    def test_semi_orthogonal_containing_span_passes(self, rng):
        ds = self._ssp_dataset()
        # build a semi-orthogonal encoder whose row space contains the subspace
        B = np.linalg.svd(ds.X, full_matrices=False)[0][:, :3]
        extra = rng.standard_normal((10, 3))
        basis = np.linalg.qr(np.concatenate([B, extra], axis=1))[0][:, :6]
        F = basis.T
        G = pseudoinverse_decoder(F)
        report = verify_ssp_equilibrium(F, G, ds, 1.0)
        assert report.passed
        assert report.isometry["fraction_in_band"] == 1.0

    def test_rank_deficient_encoder_fails(self):
        ds = self._ssp_dataset(seed=6)
        # encoder that collapses the subspace to 2 dimensions
        B = np.linalg.svd(ds.X, full_matrices=False)[0][:, :2]
        F = np.zeros((6, 10))
        F[:2] = B.T
        report = verify_ssp_equilibrium(F, pseudoinverse_decoder(F), ds, 1.0)
        assert not report.injective_pass
        assert not report.passed


class TestStatus:
    def test_pass_maps_to_pass(self):
        ds, F, G = oracle_pair(seed=7)
        report = verify_msp_equilibrium(F, G, ds, 1.0)
        assert report_status(report, partial_eligible=True) == "pass"

    def test_partial_when_dominant_but_failing(self):
        ds, F, G = oracle_pair(seed=8)
        strict = VerifyThresholds(cross_gram_tol=1e-18, spectral_rel_tol=1e-18)
        report = verify_msp_equilibrium(F, G, ds, 1.0, strict)
        assert not report.passed
        assert report_status(report, partial_eligible=True) == "partial"
        assert report_status(report, partial_eligible=False) == "fail"

    def test_fail_when_not_dominant(self):
        ds, F, G = oracle_pair(seed=9)
        report = verify_msp_equilibrium(np.zeros_like(F), G, ds, 1.0)
        assert report_status(report, partial_eligible=True) == "fail"
