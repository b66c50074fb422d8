"""Config parsing, validation, defaults, and round-tripping."""

import json

import numpy as np
import pytest

from spacetraj.config import (
    apply_overrides,
    build_landing_problem,
    build_two_phase_problem,
    default_sweep_grid,
    emit_config,
    parse_config,
    parse_config_dict,
    scenario_defaults,
)
from spacetraj.errors import ConfigError


def test_empty_file_plus_scenario_gives_full_defaults(tmp_path):
    cfg_file = tmp_path / "empty.json"
    cfg_file.write_text("")
    cfg = parse_config(str(cfg_file), overrides=["scenario=attitude"])
    assert cfg.dt == 0.1
    assert cfg.horizon == 200.0
    assert cfg.attitude.inertia_diag == [4500.0, 2000.0, 7500.0]
    assert cfg.initial_state == [85.94, -68.75, -120.32, 5.72, -5.72, 2.86]
    assert cfg.q == [1.0] * 6 and cfg.r == [1.0] * 3


def test_rendezvous_defaults():
    cfg = parse_config_dict({"scenario": "rendezvous"})
    assert cfg.dt == 2.0 and cfg.horizon == 6000.0
    assert cfg.rendezvous.mu == 398600.0
    assert cfg.rendezvous.alpha == 5e-4
    assert cfg.rendezvous.chaser.a_km == 7200.0 and cfg.rendezvous.chaser.e == 0.22
    assert cfg.rendezvous.target.nu_deg == 120.0


def test_lander_defaults():
    cfg = parse_config_dict({"scenario": "soft-landing"})
    assert cfg.dt == 0.2 and cfg.horizon == 30.0
    assert cfg.lander.isp_s == 225.0
    assert cfg.lander.g_ref == 3.7114
    assert cfg.lander.penalty_weight == 100.0 and cfg.lander.penalty_rate == 1.0
    assert cfg.lander.initial_position_m == [300.0, -200.0, 1000.0]
    assert cfg.lander.initial_velocity_mps == [100.0, 120.0, 0.0]


def test_negative_dt_rejected():
    with pytest.raises(ConfigError, match="dt"):
        parse_config_dict({"scenario": "attitude", "dt": -1.0})


def test_unknown_key_rejected_with_path():
    with pytest.raises(ConfigError, match="lander.warp_drive"):
        parse_config_dict({"scenario": "soft-landing", "lander": {"warp_drive": 9}})


def test_unknown_scenario_rejected():
    with pytest.raises(ConfigError, match="scenario"):
        parse_config_dict({"scenario": "submarine"})


def test_diagonal_weight_expansion_and_dimension_error():
    cfg = parse_config_dict({"scenario": "attitude", "q": [1, 2, 3, 4, 5, 6]})
    problem = build_two_phase_problem(cfg)
    # per-degree weights land on the diagonal after the unit conversion
    deg = np.pi / 180.0
    assert np.allclose(np.diag(problem.cost.Q), np.array([1, 2, 3, 4, 5, 6]) / deg**2)
    with pytest.raises(ConfigError, match="q"):
        parse_config_dict({"scenario": "attitude", "q": [1, 2, 3, 4, 5]})


def test_full_matrix_weights_accepted():
    q = (np.eye(6) + 0.01 * np.ones((6, 6))).tolist()
    cfg = parse_config_dict({"scenario": "attitude", "q": q})
    problem = build_two_phase_problem(cfg)
    assert problem.cost.Q[0, 1] != 0.0


def test_pitch_singularity_initial_state_rejected():
    bad = [0.0, 90.0, 0.0, 0.0, 0.0, 0.0]
    with pytest.raises(ConfigError, match="initial_state"):
        parse_config_dict({"scenario": "attitude", "initial_state": bad})


def test_nonzero_goal_rejected():
    with pytest.raises(ConfigError, match="goal_state"):
        parse_config_dict({"scenario": "attitude", "goal_state": [1, 0, 0, 0, 0, 0]})


def test_sweep_grid_validation():
    with pytest.raises(ConfigError, match="sweep.grid"):
        parse_config_dict({"scenario": "attitude", "sweep": {"grid": [10.0, 5.0]}})
    with pytest.raises(ConfigError, match="sweep.grid"):
        parse_config_dict({"scenario": "attitude", "sweep": {"grid": [10.05]}})


@pytest.mark.parametrize("scenario", ["attitude", "rendezvous", "soft-landing", "custom-linear"])
def test_round_trip(scenario):
    cfg = scenario_defaults(scenario)
    assert parse_config_dict({"scenario": scenario, **{k: v for k, v in emit_config(cfg).items() if k != "scenario"}}) == cfg


def test_round_trip_with_overrides(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"scenario": "soft-landing", "lander": {"isp_s": 300.0}}))
    cfg = parse_config(str(path), overrides=["lander.g_ref=3.0", "dt=0.1"])
    assert cfg.lander.isp_s == 300.0 and cfg.lander.g_ref == 3.0 and cfg.dt == 0.1
    again = parse_config_dict(emit_config(cfg))
    assert again == cfg


def test_apply_overrides_json_values():
    data = apply_overrides({}, ["scenario=attitude", "sweep.grid=[10, 80]", "sweep.warm_start=false"])
    assert data["sweep"]["grid"] == [10, 80]
    assert data["sweep"]["warm_start"] is False


def test_default_sweep_grid_is_ascending_multiple_of_dt():
    cfg = parse_config_dict({"scenario": "attitude"})
    grid = default_sweep_grid(cfg)
    assert len(grid) >= 2
    assert all(b > a for a, b in zip(grid, grid[1:]))
    for T in grid:
        assert abs(T / cfg.dt - round(T / cfg.dt)) < 1e-9
    assert grid[-1] == cfg.horizon


def test_build_landing_problem_requires_lander_scenario():
    cfg = parse_config_dict({"scenario": "attitude"})
    with pytest.raises(ConfigError):
        build_landing_problem(cfg)


def test_invalid_json_reports_path(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{nope")
    with pytest.raises(ConfigError, match="invalid JSON"):
        parse_config(str(path))
