import numpy as np
import pytest

from aerosparse.geometry import SnapshotSet


def snapshots_from(values, role="training", forces=None, alpha=None):
    """Wrap a plain matrix in a SnapshotSet with placeholder labels."""
    values = np.asarray(values, dtype=float)
    m = values.shape[1]
    return SnapshotSet(values=values, t=np.arange(m, dtype=float),
                       f=np.ones(m),
                       alpha=np.zeros(m) if alpha is None else np.asarray(alpha, float),
                       forces=forces, role_tag=role)


@pytest.fixture(scope="session")
def benchmark():
    """The default synthetic two-fidelity benchmark, shared across tests."""
    from aerosparse import deim, force_model, pod, synth

    geom, datasets = synth.default_benchmark(seed=0)
    by_name = {ds.name: ds for ds in datasets}
    basis = pod.pod_basis(by_name["lofi-training"], 10)
    selection = deim.deim_select(basis, np.arange(geom.n_points), 10)
    model = force_model.assemble_force_model(geom, basis, selection)
    return {"geom": geom, "datasets": by_name, "basis": basis,
            "selection": selection, "model": model}
