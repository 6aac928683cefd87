import numpy as np
import numpy.testing as npt
import pytest

from aerosparse.errors import DataError
from aerosparse.geometry import (ForceIntegrationMatrix, SnapshotSet,
                                 SurfaceGeometry, integrate_force, lift_drag,
                                 load_snapshots, scaled_normal_matrix,
                                 write_manifest)
from aerosparse.synth import ellipse_geometry


def make_geometry(normals, areas, ref_area=1.0, dim=3):
    return SurfaceGeometry(normals=np.array(normals, dtype=float),
                           areas=np.array(areas, dtype=float),
                           ref_area=ref_area, dim=dim)


class TestSurfaceGeometry:
    def test_valid_construction(self):
        geom = make_geometry([(0, 1, 0), (1, 0, 0)], [1.0, 2.0])
        assert geom.n_points == 2
        assert not geom.normals.flags.writeable

    def test_rejects_non_unit_normal(self):
        with pytest.raises(DataError, match="norm"):
            make_geometry([(0, 2, 0)], [1.0])

    def test_rejects_nonpositive_area(self):
        with pytest.raises(DataError, match="area"):
            make_geometry([(0, 1, 0)], [0.0])

    def test_rejects_nonpositive_ref_area(self):
        with pytest.raises(DataError, match="ref_area"):
            make_geometry([(0, 1, 0)], [1.0], ref_area=-1.0)

    def test_rejects_2d_with_z_component(self):
        v = 1.0 / np.sqrt(3.0)
        with pytest.raises(DataError, match="z component"):
            make_geometry([(v, v, v)], [1.0], dim=2)

    def test_rejects_area_count_mismatch(self):
        with pytest.raises(DataError, match="does not match"):
            make_geometry([(0, 1, 0), (1, 0, 0)], [1.0])


class TestScaledNormalMatrix:
    def test_direct_evaluation(self):
        geom = make_geometry([(0, 1, 0), (1, 0, 0)], [1.0, 2.0], ref_area=1.0)
        smat = scaled_normal_matrix(geom)
        npt.assert_allclose(smat.s_matrix[:, 0], [0, 1, 0], atol=1e-14)
        npt.assert_allclose(smat.s_matrix[:, 1], [2, 0, 0], atol=1e-14)

    def test_identity_scaling(self):
        rng = np.random.default_rng(0)
        normals = rng.normal(size=(6, 3))
        normals /= np.linalg.norm(normals, axis=1, keepdims=True)
        geom = make_geometry(normals, np.ones(6), ref_area=1.0)
        npt.assert_allclose(scaled_normal_matrix(geom).s_matrix, normals.T, atol=1e-14)

    def test_ref_area_halves_entries(self):
        geom1 = make_geometry([(0, 1, 0), (1, 0, 0)], [1.0, 2.0], ref_area=1.0)
        geom2 = make_geometry([(0, 1, 0), (1, 0, 0)], [1.0, 2.0], ref_area=2.0)
        npt.assert_allclose(scaled_normal_matrix(geom2).s_matrix,
                            scaled_normal_matrix(geom1).s_matrix / 2.0, rtol=1e-14)

    def test_column_definition(self):
        geom = ellipse_geometry(32)
        smat = scaled_normal_matrix(geom)
        expected = geom.normals.T * geom.areas / geom.ref_area
        npt.assert_allclose(smat.s_matrix, expected, atol=1e-14)


class TestIntegrateForce:
    def setup_method(self):
        self.smat = ForceIntegrationMatrix(np.array([[0.0, 2.0], [1.0, 0.0],
                                                     [0.0, 0.0]]))

    def test_zero_input(self):
        npt.assert_array_equal(integrate_force(self.smat, np.zeros(2)), np.zeros(3))

    def test_direct_multiply(self):
        npt.assert_allclose(integrate_force(self.smat, np.array([2.0, 3.0])),
                            [6.0, 2.0, 0.0], rtol=1e-15)

    def test_linearity(self):
        rng = np.random.default_rng(7)
        smat = ForceIntegrationMatrix(rng.normal(size=(3, 40)))
        for _ in range(25):
            x, y = rng.normal(size=40), rng.normal(size=40)
            a, b = rng.normal(size=2)
            lhs = integrate_force(smat, a * x + b * y)
            rhs = a * integrate_force(smat, x) + b * integrate_force(smat, y)
            npt.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-12)

    def test_length_mismatch(self):
        with pytest.raises(DataError, match="length"):
            integrate_force(self.smat, np.zeros(3))

    def test_non_finite_rejected(self):
        with pytest.raises(DataError, match="non-finite"):
            integrate_force(self.smat, np.array([1.0, np.nan]))


class TestLiftDrag:
    def test_zero_angle_identity(self):
        cl, cd = lift_drag(np.array([1.0, 2.0, 0.0]), 0.0)
        assert cl == 2.0 and cd == 1.0

    def test_right_angle(self):
        cl, cd = lift_drag(np.array([1.0, 0.0, 0.0]), 90.0)
        assert abs(cd) < 1e-15
        npt.assert_allclose(cl, -1.0, rtol=1e-15)

    def test_isometry(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            force = rng.normal(size=3)
            alpha = rng.uniform(-180, 180)
            cl, cd = lift_drag(force, alpha)
            npt.assert_allclose(cl ** 2 + cd ** 2, force[0] ** 2 + force[1] ** 2,
                                rtol=1e-12)

    def test_rejects_non_finite_alpha(self):
        with pytest.raises(DataError):
            lift_drag(np.zeros(3), np.nan)


def test_closed_surface_integrates_to_zero():
    # Divergence-theorem check: area-weighted normals of a closed contour
    # cancel, so constant pressure produces no net force.
    for n in (8, 57, 200):
        geom = ellipse_geometry(n)
        force = integrate_force(scaled_normal_matrix(geom), np.ones(n))
        assert np.max(np.abs(force)) < 1e-8


class TestSnapshotSet:
    def test_label_length_mismatch(self):
        with pytest.raises(DataError, match="label 't'"):
            SnapshotSet(values=np.zeros((3, 2)), t=np.zeros(3), f=np.zeros(2),
                        alpha=np.zeros(2))

    def test_forces_shape(self):
        with pytest.raises(DataError, match="forces"):
            SnapshotSet(values=np.zeros((3, 2)), t=np.zeros(2), f=np.zeros(2),
                        alpha=np.zeros(2), forces=np.zeros((3, 3)))

    def test_non_finite_values(self):
        values = np.zeros((3, 2))
        values[1, 0] = np.inf
        with pytest.raises(DataError, match="row 1, column 0"):
            SnapshotSet(values=values, t=np.zeros(2), f=np.zeros(2), alpha=np.zeros(2))

    def test_bad_role(self):
        with pytest.raises(DataError, match="role_tag"):
            SnapshotSet(values=np.zeros((3, 2)), t=np.zeros(2), f=np.zeros(2),
                        alpha=np.zeros(2), role_tag="test")


class TestManifestRoundTrip:
    def make_inputs(self):
        geom = make_geometry([(0, 1, 0), (1, 0, 0), (0, -1, 0), (-1, 0, 0)],
                             [0.5, 1.0, 0.5, 1.0], ref_area=2.0, dim=2)
        rng = np.random.default_rng(3)
        values = rng.normal(size=(4, 3))
        ds = SnapshotSet(values=values, t=np.array([0.0, 0.1, 0.2]),
                         f=np.array([1.0, 1.0, 1.0]),
                         alpha=np.array([10.0, 12.0, 14.0]),
                         forces=rng.normal(size=(3, 3)),
                         role_tag="training", name="demo")
        return geom, [ds]

    def test_round_trip_exact(self, tmp_path):
        geom, datasets = self.make_inputs()
        manifest = write_manifest(tmp_path, geom, datasets)
        geom2, loaded = load_snapshots(manifest)
        npt.assert_array_equal(geom2.normals, geom.normals)
        npt.assert_array_equal(geom2.areas, geom.areas)
        assert geom2.ref_area == geom.ref_area and geom2.dim == geom.dim
        assert len(loaded) == 1
        ds, ds2 = datasets[0], loaded[0]
        npt.assert_array_equal(ds2.values, ds.values)
        npt.assert_array_equal(ds2.forces, ds.forces)
        npt.assert_array_equal(ds2.alpha, ds.alpha)
        assert ds2.name == "demo" and ds2.role_tag == "training"
        assert ds2.n_points == 4 and ds2.n_samples == 3
        assert geom2.fingerprint() == geom.fingerprint()

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(DataError, match="not found"):
            load_snapshots(tmp_path / "absent.json")

    def test_dimension_mismatch_names_both_counts(self, tmp_path):
        geom, datasets = self.make_inputs()
        manifest = write_manifest(tmp_path, geom, datasets)
        # Rewrite the snapshot CSV with an extra row.
        snap = tmp_path / "demo_snapshots.csv"
        lines = snap.read_text().strip().splitlines()
        lines.append(lines[-1])
        snap.write_text("\n".join(lines) + "\n")
        with pytest.raises(DataError, match=r"5 rows.*4 points"):
            load_snapshots(manifest)

    def test_nan_entry_cites_position(self, tmp_path):
        geom, datasets = self.make_inputs()
        manifest = write_manifest(tmp_path, geom, datasets)
        snap = tmp_path / "demo_snapshots.csv"
        lines = snap.read_text().strip().splitlines()
        row = lines[3].split(",")      # data row 2 (0-based), after the header
        row[1] = "nan"
        lines[3] = ",".join(row)
        snap.write_text("\n".join(lines) + "\n")
        with pytest.raises(DataError, match="row 2, column 1"):
            load_snapshots(manifest)

    def test_malformed_manifest(self, tmp_path):
        bad = tmp_path / "manifest.json"
        bad.write_text("{not json")
        with pytest.raises(DataError, match="malformed"):
            load_snapshots(bad)

    def test_label_count_mismatch(self, tmp_path):
        geom, datasets = self.make_inputs()
        manifest = write_manifest(tmp_path, geom, datasets)
        labels = tmp_path / "demo_labels.csv"
        lines = labels.read_text().strip().splitlines()
        labels.write_text("\n".join(lines[:-1]) + "\n")
        with pytest.raises(DataError, match="label rows"):
            load_snapshots(manifest)
