import numpy as np
import numpy.testing as npt
import pytest

from aerosparse.deim import SensorSelection, deim_select, reconstruction_matrix
from aerosparse.errors import DataError
from aerosparse.force_model import (LinearForceModel, assemble_force_model,
                                    load_model, predict_force,
                                    reconstruct_pressure, save_model)
from aerosparse.geometry import integrate_force, scaled_normal_matrix
from aerosparse.pod import ReducedBasis, pod_basis
from aerosparse.synth import ellipse_geometry
from conftest import snapshots_from


def demo_setup(n=24, n_s=4, seed=0):
    geom = ellipse_geometry(n)
    rng = np.random.default_rng(seed)
    ds = snapshots_from(rng.normal(size=(n, 12)))
    basis = pod_basis(ds, n_s)
    sel = deim_select(basis, np.arange(n), n_s)
    model = assemble_force_model(geom, basis, sel)
    return geom, basis, sel, model


class TestAssembly:
    def test_operator_matches_parts(self):
        geom, basis, sel, model = demo_setup()
        smat = scaled_normal_matrix(geom).s_matrix
        r = reconstruction_matrix(basis, sel)
        npt.assert_allclose(model.m_s, smat @ r, atol=1e-12)
        npt.assert_allclose(model.m_0,
                            smat @ basis.mean - smat @ r @ basis.mean[sel.indices],
                            atol=1e-12)

    def test_mean_input_gives_mean_force(self):
        geom, basis, sel, model = demo_setup()
        smat = scaled_normal_matrix(geom)
        force = predict_force(model, basis.mean[sel.indices])
        npt.assert_allclose(force, integrate_force(smat, basis.mean), atol=1e-12)

    def test_full_sampling_equals_direct_integration(self):
        n = 10
        geom = ellipse_geometry(n)
        q = np.linalg.qr(np.random.default_rng(2).normal(size=(n, n)))[0]
        basis = ReducedBasis(mean=np.zeros(n), basis=q,
                             singular_values=np.linspace(2.0, 1.0, n))
        sel = SensorSelection(indices=np.arange(n), candidates=np.arange(n))
        model = assemble_force_model(geom, basis, sel)
        smat = scaled_normal_matrix(geom)
        rng = np.random.default_rng(3)
        for _ in range(10):
            cp = rng.normal(size=n)
            npt.assert_allclose(predict_force(model, cp),
                                integrate_force(smat, cp), atol=1e-12)

    def test_geometry_size_mismatch(self):
        geom, basis, sel, _ = demo_setup()
        small = ellipse_geometry(12)
        with pytest.raises(DataError, match="geometry"):
            assemble_force_model(small, basis, sel)


class TestPredictForce:
    def test_equivalence_with_reconstruction_path(self):
        geom, _, _, model = demo_setup()
        smat = scaled_normal_matrix(geom).s_matrix
        rng = np.random.default_rng(4)
        for _ in range(200):
            cp_s = rng.normal(size=model.n_sensors)
            direct = predict_force(model, cp_s)
            through_field = smat @ reconstruct_pressure(model, cp_s)
            bound = 1e-12 * (1.0 + np.abs(direct))
            assert np.all(np.abs(direct - through_field) <= bound)

    def test_affinity(self):
        _, _, _, model = demo_setup()
        rng = np.random.default_rng(5)
        for _ in range(30):
            x, y = rng.normal(size=model.n_sensors), rng.normal(size=model.n_sensors)
            a = rng.uniform(-2, 2)
            lhs = predict_force(model, a * x + (1 - a) * y)
            rhs = a * predict_force(model, x) + (1 - a) * predict_force(model, y)
            npt.assert_allclose(lhs, rhs, atol=1e-12 * (1 + np.max(np.abs(rhs))))

    def test_length_mismatch(self):
        _, _, _, model = demo_setup()
        with pytest.raises(DataError, match="shape"):
            predict_force(model, np.zeros(model.n_sensors + 1))

    def test_non_finite_rejected(self):
        _, _, _, model = demo_setup()
        bad = np.zeros(model.n_sensors)
        bad[0] = np.inf
        with pytest.raises(DataError, match="non-finite"):
            predict_force(model, bad)


class TestReconstructPressure:
    def test_sensor_values_interpolated(self):
        _, _, sel, model = demo_setup()
        rng = np.random.default_rng(6)
        cp_s = rng.normal(size=model.n_sensors)
        field = reconstruct_pressure(model, cp_s)
        npt.assert_allclose(field[sel.indices], cp_s, atol=1e-10)

    def test_mean_input_returns_mean(self):
        _, basis, _, model = demo_setup()
        field = reconstruct_pressure(model, model.mean_at_sensors)
        npt.assert_allclose(field, basis.mean, atol=1e-12)

    def test_in_span_snapshot_recovered(self):
        _, basis, sel, model = demo_setup()
        rng = np.random.default_rng(7)
        for _ in range(20):
            b = rng.normal(size=basis.n_modes)
            x = basis.mean + basis.basis @ b
            recon = reconstruct_pressure(model, x[sel.indices])
            scale = max(1.0, np.max(np.abs(x)))
            assert np.max(np.abs(recon - x)) <= 1e-9 * scale


class TestPersistence:
    def test_round_trip_bit_for_bit(self, tmp_path):
        geom, _, _, model = demo_setup()
        path = tmp_path / "model.json"
        save_model(path, model, {"config": {"n_s": model.n_sensors}, "seed": 0})
        loaded, meta = load_model(path)
        npt.assert_array_equal(loaded.m_s, model.m_s)
        npt.assert_array_equal(loaded.m_0, model.m_0)
        npt.assert_array_equal(loaded.recon, model.recon)
        npt.assert_array_equal(loaded.mean, model.mean)
        npt.assert_array_equal(loaded.mean_at_sensors, model.mean_at_sensors)
        npt.assert_array_equal(loaded.selection.indices, model.selection.indices)
        assert loaded.geometry_hash == model.geometry_hash == geom.fingerprint()
        assert meta["seed"] == 0

    def test_rejects_wrong_schema(self, tmp_path):
        path = tmp_path / "other.json"
        path.write_text('{"schema": "aerosparse/reduced-basis/1"}')
        with pytest.raises(DataError, match="not a linear-force-model"):
            load_model(path)

    def test_reassembled_model_identical(self, tmp_path):
        # Rebuilding from a round-tripped basis/selection must reproduce the
        # operator exactly: JSON float serialization is lossless.
        geom, basis, sel, model = demo_setup()
        rebuilt = assemble_force_model(geom, basis, sel)
        npt.assert_array_equal(rebuilt.m_s, model.m_s)
        npt.assert_array_equal(rebuilt.m_0, model.m_0)


def test_invariant_shapes_enforced():
    _, _, sel, model = demo_setup()
    with pytest.raises(DataError, match="m_s"):
        LinearForceModel(m_s=np.zeros((3, 2)), m_0=np.zeros(3), selection=sel,
                         mean_at_sensors=np.zeros(sel.n_sensors),
                         recon=model.recon, mean=model.mean)
