"""Each figure helper renders a non-empty PNG and returns its path."""

import numpy as np

from topotrack import RunTrace, TraceRecord, figures


def _trace():
    records = []
    for t in range(1, 8):
        measured = t % 2 == 1
        records.append(TraceRecord(
            t=t, objective=10.0 / t, post_objective=9.0 / t, gamma=0.1,
            lambda_max=2.0, lipschitz=10.0, iters=1, iterate_norm=1.0,
            opt_objective=8.0 / t if measured else None,
            tracking_error=1.0 / t if measured else None,
            bound=2.0 / t if measured else None,
            f_measure=min(1.0, 0.2 * t) if measured else None))
    return RunTrace(n=4, records=records)


def _check(path):
    data = path.read_bytes() if hasattr(path, "read_bytes") else open(path, "rb").read()
    assert data[:8] == b"\x89PNG\r\n\x1a\n"
    assert len(data) > 1000


def test_objective_trajectory(tmp_path):
    out = figures.save_objective_trajectory(tmp_path / "obj.png", [5.0, 2.0, 1.0, 0.5])
    assert str(out).endswith("obj.png")
    _check(tmp_path / "obj.png")


def test_objective_trajectory_handles_zero_floor(tmp_path):
    figures.save_objective_trajectory(tmp_path / "flat.png", [1.0, 0.0, 0.0])
    _check(tmp_path / "flat.png")


def test_online_objective(tmp_path):
    figures.save_online_objective(tmp_path / "online.png", _trace())
    _check(tmp_path / "online.png")


def test_tracking(tmp_path):
    figures.save_tracking(tmp_path / "track.png", _trace())
    _check(tmp_path / "track.png")


def test_f_measure_trajectory(tmp_path):
    figures.save_f_measure_trajectory(tmp_path / "f.png", _trace())
    _check(tmp_path / "f.png")


def test_adjacency_heatmaps(tmp_path):
    estimate = np.random.default_rng(0).uniform(size=(6, 6))
    figures.save_adjacency_heatmaps(tmp_path / "single.png", estimate)
    _check(tmp_path / "single.png")
    figures.save_adjacency_heatmaps(tmp_path / "pair.png", estimate, truth=np.eye(6))
    _check(tmp_path / "pair.png")


def test_spectrum(tmp_path):
    sv = np.geomspace(1.0, 1e-12, 20)
    figures.save_spectrum(tmp_path / "spec.png", sv, kernel_dim=3)
    _check(tmp_path / "spec.png")


def test_pr_sweep(tmp_path):
    rows = [{"threshold": 10.0 ** -k, "precision": 0.5, "recall": 1.0 - 0.1 * k,
             "f_measure": 0.6} for k in range(5)]
    figures.save_pr_sweep(tmp_path / "pr.png", rows)
    _check(tmp_path / "pr.png")
