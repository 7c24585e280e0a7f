import math

import numpy as np
import pytest

from chain_synthesis.core import synthesis
from chain_synthesis.core.chain_basis import coupling_matrix
from chain_synthesis.core.error import DimensionError, NotSymplecticError, SolverError
from chain_synthesis.core.gaussian_state import (
    cradle_to_site,
    pair_ellipses,
    phonon_target_symplectic,
    site_to_cradle,
    symplectic_eigenvalues,
    vacuum_state,
)
from chain_synthesis.core.schemas import CouplingStep, PhononTarget, SynthesisPlan, Tolerances
from chain_synthesis.core.symplectic import (
    is_symplectic,
    rotation,
    sp2_exp,
    squeeze,
    symplectic_inverse,
    wrap_angle,
)
from chain_synthesis.core.synthesis import (
    correlation_trace,
    decorrelate_last,
    plan_matrix,
    random_symplectic,
    solve_triple,
    synthesize,
    triple_factors,
    verify_plan,
)

PHONON_SEVEN = PhononTarget(n_oscillators=7, k1=1, k2=1, xi=1.0)


def test_plan_matrix_empty():
    assert np.array_equal(plan_matrix([], 3), np.eye(6))


def test_plan_matrix_order():
    first = CouplingStep(site=2, inner=squeeze(0.3))
    second = CouplingStep(site=1, inner=rotation(0.4))
    expected = coupling_matrix(1, rotation(0.4), 3) @ coupling_matrix(2, squeeze(0.3), 3)
    assert np.allclose(plan_matrix([first, second], 3), expected, atol=1e-14)


def test_CouplingStep_rejects_non_symplectic():
    with pytest.raises(NotSymplecticError):
        CouplingStep(site=1, inner=np.diag([2.0, 2.0]))


def test_SynthesisPlan_rejects_site_outside_chain():
    with pytest.raises(ValueError):
        SynthesisPlan(chain_length=3, steps=[CouplingStep(site=3, inner=np.eye(2))], target=np.eye(4))


def test_SynthesisPlan_step_bound():
    plan = SynthesisPlan(chain_length=7, target=np.eye(12))
    assert plan.n_modes == 6
    assert plan.step_bound == 63


def test_verify_plan_identity():
    plan = SynthesisPlan(chain_length=4, target=np.eye(6))
    assert verify_plan(plan) == 0.0


def test_random_symplectic(rng):
    T = random_symplectic(4, rng)
    assert T.shape == (8, 8)
    assert is_symplectic(T, 1e-10)
    assert np.array_equal(random_symplectic(3, np.random.default_rng(5)), random_symplectic(3, np.random.default_rng(5)))


def test_triple_factors():
    S1, S2, S3 = triple_factors(np.arange(9) / 10.0)
    assert np.allclose(S1, sp2_exp(0.0, 0.1, 0.2), atol=1e-15)
    assert np.allclose(S2, sp2_exp(0.3, 0.4, 0.5), atol=1e-15)
    assert np.allclose(S3, sp2_exp(0.6, 0.7, 0.8), atol=1e-15)


def test_solve_triple_reaches_single_coupling(random_sp2):
    for n in (2, 3):
        S = random_sp2(0.8)
        start = np.eye(2 * n)[-2:, :]
        goal = coupling_matrix(n, S, n)[-2:, :]
        S1, S2, S3 = solve_triple(n, start, goal)

        rows = start @ coupling_matrix(n, S1, n) @ coupling_matrix(n - 1, S2, n) @ coupling_matrix(n, S3, n)
        assert np.max(np.abs(rows[:, -2:] - goal[:, -2:])) <= 1e-9
        for inner in (S1, S2, S3):
            assert is_symplectic(inner, 1e-10)


def test_solve_triple_reaches_coupling_product(random_sp2):
    n = 3
    goal = (coupling_matrix(3, random_sp2(0.8), 3) @ coupling_matrix(2, random_sp2(0.8), 3))[-2:, :]
    start = np.eye(6)[-2:, :]
    S1, S2, S3 = solve_triple(n, start, goal, rng=np.random.default_rng(1))

    rows = start @ coupling_matrix(3, S1, 3) @ coupling_matrix(2, S2, 3) @ coupling_matrix(3, S3, 3)
    assert np.max(np.abs(rows[:, -2:] - goal[:, -2:])) <= 1e-9


def test_solve_triple_mid_sweep(random_target):
    # block 3 of the last rows of a random target, reached from rows already moved by a first triple
    T = random_target(4)
    start = np.eye(8)[-2:, :] @ coupling_matrix(4, rotation(0.5 * math.pi), 4) @ coupling_matrix(3, squeeze(0.4), 4)
    S1, S2, S3 = solve_triple(3, start, T[-2:, :], rng=np.random.default_rng(2))

    rows = start @ coupling_matrix(3, S1, 4) @ coupling_matrix(2, S2, 4) @ coupling_matrix(3, S3, 4)
    scale = max(1.0, float(np.max(np.abs(T[-2:, :]))))
    assert np.max(np.abs(rows[:, 4:6] - T[-2:, 4:6])) <= 1e-10 * scale


def test_solve_triple_gives_up():
    # the rows vanish on every block the triple touches, so block 2 cannot leave zero
    tolerances = Tolerances(max_restarts=2)
    start = np.eye(6)[-2:, :]
    goal = start.copy()
    goal[:, 2:4] = sp2_exp(0.3, -0.2, 0.5)
    try:
        solve_triple(2, start, goal, tolerances=tolerances)
        assert False
    except SolverError:
        pass


def test_solve_triple_diverging_restarts(monkeypatch):
    def overflowing(*args, **kwargs):
        raise OverflowError("math range error")

    monkeypatch.setattr(synthesis, "_closed_form_triples", lambda *args: iter(()))
    monkeypatch.setattr(synthesis, "triple_factors", overflowing)
    goal = coupling_matrix(2, sp2_exp(0.3, -0.2, 0.5), 2)[-2:, :]
    try:
        solve_triple(2, np.eye(4)[-2:, :], goal, tolerances=Tolerances(max_restarts=3))
        assert False
    except SolverError:
        pass


def test_solve_triple_damped_restarts(monkeypatch):
    monkeypatch.setattr(synthesis, "_closed_form_triples", lambda *args: iter(()))
    goal = coupling_matrix(2, sp2_exp(0.3, -0.2, 0.5), 2)[-2:, :]
    S1, S2, S3 = solve_triple(2, np.eye(4)[-2:, :], goal)

    rows = np.eye(4)[-2:, :] @ coupling_matrix(2, S1, 2) @ coupling_matrix(1, S2, 2) @ coupling_matrix(2, S3, 2)
    assert np.max(np.abs(rows[:, 2:] - goal[:, 2:])) <= 1e-10


def test_solve_triple_first_site():
    try:
        solve_triple(1, np.eye(2), np.eye(2))
        assert False
    except DimensionError:
        pass


def test_decorrelate_last_already_decorrelated(random_sp2):
    T = np.eye(6)
    T[:2, :2] = random_sp2(1.0)
    steps, reduced = decorrelate_last(T)
    assert steps == []
    assert np.array_equal(reduced, T[:4, :4])


def test_decorrelate_last_single_mode(random_sp2):
    S = random_sp2(1.0)
    steps, reduced = decorrelate_last(S)
    assert len(steps) == 1
    assert steps[0].site == 1
    assert np.allclose(steps[0].inner, S, atol=1e-12)
    assert reduced.shape == (0, 0)


def test_decorrelate_last_reconstructs(random_target):
    m = 3
    T = random_target(m)
    steps, reduced = decorrelate_last(T, seed=3)

    assert len(steps) <= 3 * m
    assert all(step.site <= m for step in steps)
    assert is_symplectic(reduced, 1e-8)

    U = plan_matrix(steps, m)
    leftover = T @ symplectic_inverse(U)
    scale = max(1.0, float(np.max(np.abs(T))))
    assert np.max(np.abs(leftover[-2:, :] - np.eye(2 * m)[-2:, :])) <= 1e-8 * scale

    rebuilt = np.eye(2 * m)
    rebuilt[:-2, :-2] = reduced
    assert np.max(np.abs(rebuilt @ U - T)) <= 1e-8 * scale


def test_decorrelate_last_coupling_product(random_sp2):
    T = coupling_matrix(3, random_sp2(0.8), 3) @ coupling_matrix(2, random_sp2(0.8), 3)
    steps, reduced = decorrelate_last(T)

    assert is_symplectic(reduced, 1e-8)
    rebuilt = np.eye(6)
    rebuilt[:-2, :-2] = reduced
    assert np.max(np.abs(rebuilt @ plan_matrix(steps, 3) - T)) <= 1e-8


def test_decorrelate_last_singular_leading_block(random_sp2):
    # D_3 leaves block 1 of the last rows exactly zero
    T = coupling_matrix(3, random_sp2(0.8), 3)
    assert np.array_equal(T[-2:, 0:2], np.zeros((2, 2)))
    steps, reduced = decorrelate_last(T)

    assert len(steps) <= 3 * 3
    assert is_symplectic(reduced, 1e-8)
    rebuilt = np.eye(6)
    rebuilt[:-2, :-2] = reduced
    assert np.max(np.abs(rebuilt @ plan_matrix(steps, 3) - T)) <= 1e-8


def test_synthesize_identity():
    plan = synthesize(np.eye(8))
    assert plan.steps == []
    assert plan.residual == 0.0
    assert plan.chain_length == 5
    assert plan.stage_boundaries == [0, 0, 0, 0]
    assert plan.stage_modes == [4, 3, 2, 1]


def test_synthesize_single_mode(random_sp2):
    S = random_sp2(1.0)
    plan = synthesize(S)
    assert plan.chain_length == 2
    assert len(plan.steps) == 1
    assert np.allclose(plan.steps[0].inner, S, atol=1e-12)


@pytest.mark.parametrize("n_modes", [1, 2, 3, 4, 5, 6])
def test_synthesize_random_targets(n_modes):
    rng = np.random.default_rng(n_modes)
    for _ in range(15):
        plan = synthesize(random_symplectic(n_modes, rng), seed=int(rng.integers(0, 2**31)))
        assert plan.residual <= 1e-8
        assert len(plan.steps) <= plan.step_bound
        assert plan.variant == "row"


def test_synthesize_residual_is_absolute(random_target):
    T = random_target(3)
    T_large = T @ coupling_matrix(3, squeeze(3.0), 3)
    assert np.linalg.norm(T_large, 2) > 100
    residual = synthesize(T_large).residual
    assert 0.0 < residual <= 1e-8
    # a tolerance scaled by the target norm would still accept this plan
    try:
        synthesize(T_large, tolerances=Tolerances(tol_plan=0.5 * residual))
        assert False
    except SolverError:
        pass


def test_synthesize_stage_locality(random_target):
    plan = synthesize(random_target(4))

    assert len(plan.stage_boundaries) == 4
    assert plan.stage_boundaries[-1] == len(plan.steps)
    assert plan.stage_boundaries == sorted(plan.stage_boundaries)

    start = 0
    for boundary, mode in zip(plan.stage_boundaries, plan.stage_modes):
        assert all(step.site <= mode for step in plan.steps[start:boundary])
        start = boundary


def test_synthesize_column_variant(random_target):
    T = random_target(3)
    plan = synthesize(T, use_column_variant=True)
    assert plan.variant == "column"
    assert plan.stage_modes == [1, 2, 3]
    assert plan.residual <= 1e-8
    assert len(plan.steps) <= plan.step_bound


def test_synthesize_is_deterministic(random_target):
    T = random_target(3)
    first, second = synthesize(T, seed=7), synthesize(T, seed=7)

    assert [step.site for step in first.steps] == [step.site for step in second.steps]
    for a, b in zip(first.steps, second.steps):
        assert np.array_equal(a.inner, b.inner)


def test_synthesize_not_symplectic():
    try:
        synthesize(np.diag([2.0, 1.0, 1.0, 1.0]))
        assert False
    except NotSymplecticError:
        pass


def test_verify_plan_detects_corruption(random_target):
    plan = synthesize(random_target(3))
    index = max(range(len(plan.steps)), key=lambda k: np.max(np.abs(plan.steps[k].inner - np.eye(2))))
    plan.steps[index] = CouplingStep(site=plan.steps[index].site, inner=np.eye(2))
    assert verify_plan(plan) > 1e-3


@pytest.mark.slow
@pytest.mark.parametrize("n_modes", [1, 2, 3, 4, 5, 6])
def test_synthesize_many_random_targets(rng, n_modes):
    for _ in range(100):
        plan = synthesize(random_symplectic(n_modes, rng), seed=int(rng.integers(0, 2**31)))
        assert plan.residual <= 1e-8
        assert len(plan.steps) <= plan.step_bound


def test_correlation_trace_empty_plan():
    records = correlation_trace(SynthesisPlan(chain_length=4, target=np.eye(6)))
    assert len(records) == 1
    assert records[0].step == 0
    assert records[0].pair_count == 0
    assert records[0].bound == 0


def test_correlation_trace_single_squeeze():
    plan = synthesize(squeeze(0.5))
    records = correlation_trace(plan)

    assert [record.step for record in records] == [0, 1]
    assert records[1].site == 1
    assert records[1].stage == 1
    assert records[1].pair_count == 1
    assert records[1].bound == 1
    assert records[1].table[0, 1] > 0.0


def test_correlation_trace_dominance(random_target):
    plan = synthesize(random_target(4))
    for record in correlation_trace(plan):
        assert record.pair_count <= record.bound
        assert np.allclose(record.table, record.table.T)


def test_correlation_trace_final_count_mismatch():
    # the plan is empty but its target squeezes the relative mode
    plan = SynthesisPlan(chain_length=2, target=squeeze(0.5))
    try:
        correlation_trace(plan)
        assert False
    except SolverError:
        pass


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_synthesize_phonon_target(seed):
    plan = synthesize(phonon_target_symplectic(PHONON_SEVEN), seed=seed)

    assert len(plan.steps) <= 63
    assert plan.residual <= 1e-8

    records = correlation_trace(plan)
    assert records[-1].pair_count == 21
    assert all(record.pair_count <= record.bound for record in records)


def test_synthesized_phonon_state():
    N = PHONON_SEVEN.n_oscillators
    plan = synthesize(phonon_target_symplectic(PHONON_SEVEN))
    U = plan_matrix(plan.steps, plan.n_modes)
    sigma = cradle_to_site(U @ vacuum_state(plan.n_modes) @ U.T)

    singles = [pair_ellipses(sigma, n, n)[0] for n in range(1, N + 1)]
    for first, second in zip(singles, singles[1:]):
        # axes are defined modulo pi
        advance = wrap_angle(2 * (second.angle - first.angle)) / 2
        assert abs(advance) == pytest.approx(2 * math.pi / N, abs=1e-6)

    _, sum_block = site_to_cradle(sigma)
    assert np.max(np.abs(sum_block - 0.5 * np.eye(2))) <= 1e-10
    assert np.max(np.abs(symplectic_eigenvalues(sigma) - 0.5)) <= 1e-8
