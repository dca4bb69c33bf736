"""Smoke test for the rom_apod extension module."""

import math
import tempfile

import rom_apod


def main():
    mesh = rom_apod.Mesh(4)
    assert mesh.num_dofs == 64
    assert abs(mesh.total_volume() - (2 * math.pi) ** 3) < 1e-9

    model = rom_apod.Model("kolmogorov", 0.1, 4, 0.01)
    times, states = model.trajectory(20, stride=5)
    assert len(states) == 5 and abs(times[-1] - 0.2) < 1e-12

    sigmas, modes = rom_apod.thin_svd(states)
    assert all(a >= b for a, b in zip(sigmas, sigmas[1:]))
    basis = rom_apod.pod_mode(states, 0.999)
    assert 1 <= len(basis) <= len(states)
    assert rom_apod.energy_mode_count([10.0, 1.0, 0.1], 0.9) == 1
    assert rom_apod.relative_error(states[-1], states[-1]) == 0.0
    assert rom_apod.two_grid_indicator(states[-1], states[-1]) == 0.0
    assert set(rom_apod.indicator_names()) == {"residual", "two-grid", "aug-random", "aug-coarse"}

    config = "\n".join([
        "problem = kolmogorov",
        "epsilon = 0.1",
        "fine_n = 4",
        "T = 1",
        "T0 = 0.5",
        "dt = 0.01",
        "coarse_dt = 0.05",
        "snapshot_stride = 5",
        "methods = pod,aug-random",
    ])
    assert "fine_n = 4" in rom_apod.check_config(config)
    with tempfile.TemporaryDirectory() as out:
        summary = rom_apod.run_experiment(config, out)
    assert [s["method"] for s in summary] == ["pod", "aug-random"]
    assert all(s["ok"] and s["average_error"] < 1.0 for s in summary)
    print("rom_apod", rom_apod.__version__, "smoke test passed")


if __name__ == "__main__":
    main()
