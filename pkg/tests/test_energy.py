"""Energy-class solver: closed forms, inequality slack, composed pipeline."""
import math

import numpy as np
import pytest

from besovflow.energy_solver import (
    CFLError,
    SpaceTimeBump,
    build_composed_solution,
    decay_exponent_fit,
    excess_energy_trace,
    integrability_check,
    local_energy_spotcheck,
    solve_perturbed,
    stability_demo,
    uniqueness_compare,
)
from besovflow.fields import random_divergence_free, taylor_green
from besovflow.fourier_calculus import riesz_pressure
from besovflow.mild_solver import CaloricTrajectory, TimeGrid, picard_solve
from besovflow.spectral_core import l2_norm


def test_taylor_green_closed_form(grid32):
    """The 2D vortex decays as pure heat flow: E(t) = E(0) e^{-4t}."""
    tg = taylor_green(grid32)
    T = 0.5
    traj, trace = solve_perturbed(None, tg, T, n_steps=128,
                                  subtract_W=False)
    e0 = l2_norm(tg) ** 2  # the trace records int |u|^2, not half of it
    expect = e0 * np.exp(-4 * trace.times)
    rel = np.abs(trace.kinetic - expect) / e0
    assert rel.max() < 1e-4
    assert trace.min_slack() >= -1e-6
    # the saved trajectory matches the exponential decay pointwise
    i = len(traj) - 1
    t_end = traj.times[i]
    assert l2_norm(traj.field(i)) == pytest.approx(
        math.exp(-2 * t_end) * l2_norm(tg), rel=1e-4)


def test_cfl_guard(grid32):
    tg = taylor_green(grid32, amplitude=50.0)
    with pytest.raises(CFLError):
        solve_perturbed(None, tg, 0.5, n_steps=8, subtract_W=False)


def test_global_slack_and_mean_mode(grid32, part32):
    u0 = random_divergence_free(grid32, part32, seed=0, norm=0.1)
    traj, trace = solve_perturbed(None, u0, 0.4, n_steps=96,
                                  subtract_W=False)
    assert trace.min_slack() >= -1e-6
    # the mean mode stays zero along the whole trajectory
    for i in (0, len(traj) // 2, len(traj) - 1):
        assert np.abs(traj.field(i).coeffs[:, 0, 0, 0]).max() < 1e-14


def test_slack_improves_with_refinement(grid32, part32):
    u0 = random_divergence_free(grid32, part32, seed=1, norm=0.3)
    _, coarse = solve_perturbed(None, u0, 0.4, n_steps=48,
                                subtract_W=False, reject_on_slack=False)
    _, fine = solve_perturbed(None, u0, 0.4, n_steps=192,
                              subtract_W=False, reject_on_slack=False)
    assert abs(fine.min_slack()) <= abs(coarse.min_slack()) + 1e-12


def test_trace_rows(grid32):
    tg = taylor_green(grid32, amplitude=0.2)
    _, trace = solve_perturbed(None, tg, 0.2, n_steps=32, subtract_W=False)
    rows = list(trace.rows())
    assert len(rows) == len(trace.times)
    assert {"t", "kinetic", "dissipation", "rhs", "slack"} <= set(rows[0])


def test_excess_trace_and_decay_fit(grid32, part32):
    u0 = random_divergence_free(grid32, part32, seed=2, norm=0.1)
    T = 0.5
    trace = excess_energy_trace(u0, T, n_steps=96)
    assert trace.min_slack() >= -1e-5
    beta_hat = decay_exponent_fit(trace, (0.0, T / 10))
    assert math.isfinite(beta_hat)
    with pytest.raises(ValueError):
        decay_exponent_fit(trace, (T * 0.99, T))  # too few nodes


def test_composed_solution_certificates(grid32, part32, ledger4):
    u0 = random_divergence_free(grid32, part32, seed=3, norm=0.1)
    comp = build_composed_solution(u0, 0.4, n_sweep=(1, 4, 16),
                                   n_steps=64, mild_nodes=24,
                                   ledger=ledger4, part=part32)
    cert = comp.certificates
    assert cert["mild_converged"]
    assert cert["gate_value"] < 1.0
    assert cert["energy_min_slack"] >= -1e-6
    assert comp.N in (1.0, 4.0, 16.0)
    # the split underlying the composition reconstructs the data
    assert comp.split.norm_table["reconstruction_error"] < 1e-10


def test_local_energy_spotcheck(grid32):
    tg = taylor_green(grid32, amplitude=0.5)
    T = 0.4
    traj, _ = solve_perturbed(None, tg, T, n_steps=96, subtract_W=False)
    q = [riesz_pressure(traj.field(i), traj.field(i))
         for i in range(len(traj))]
    bump = SpaceTimeBump()
    slack = local_energy_spotcheck(traj, q, bump, T)
    assert slack >= -1e-5


def test_integrability_report(grid32, part32):
    u0 = random_divergence_free(grid32, part32, seed=4, norm=0.05)
    st = picard_solve(u0, 0.4, n_nodes=24)
    V = CaloricTrajectory(u0, st.timegrid)
    rep = integrability_check(st.u, V, st.x4_V)
    assert len(rep.ratios) == 3 == len(rep.majorants)
    for v in rep.ratios:
        assert math.isfinite(v) and v >= 0


def test_uniqueness_compare_smoke(grid32, part32):
    u0 = random_divergence_free(grid32, part32, seed=5, norm=0.05)
    rep = uniqueness_compare(u0, 0.3, n_steps=32, mild_nodes=24,
                             n_sweep=(1, 4))
    assert math.isfinite(rep.sup_relative_distance)
    assert rep.sup_relative_distance < 1e-2
    assert rep.refined_distance is None
    assert len(rep.sample_times) > 0


def test_stability_demo_structure(grid32, part32):
    u0 = random_divergence_free(grid32, part32, seed=6, norm=0.2)
    rep = stability_demo(u0, (1, 3), 0.3, n_steps=48, part=part32)
    assert rep.ks == [1, 3]
    assert len(rep.window_distances) == 2
    assert not rep.failures
    assert rep.window_distances[1] <= rep.window_distances[0] + 1e-12
    for k in rep.ks:
        assert len(rep.pairings[k]) == 5
