import pytest

from slotplan import (
    ConstantModel,
    SearchConfig,
    SlotState,
    concentration,
    generate_instance,
    plan_sequential,
    root_entropy_bits,
    sequentiality_rate,
    sweep,
    time_scaling_fit,
)
from slotplan.analysis import (
    record_from_jsonable,
    record_to_jsonable,
    trace_from_jsonable,
    trace_to_jsonable,
)
from slotplan.baselines import run_planner


def make_trace(permutation):
    k = len(permutation)
    model = ConstantModel([0.5] * k)
    from slotplan import apply_action

    state = SlotState.initial(k, 1)
    from slotplan.core import DecisionRecord, PlanTrace

    decisions = []
    for a in permutation:
        state = apply_action(state, model.propose(state, a))
        decisions.append(
            DecisionRecord(
                root_visit_counts={},
                root_q_values={},
                root_priors={},
                entropy_bits=None,
                concentration=None,
                wall_time=0.0,
            )
        )
    return PlanTrace(permutation=tuple(permutation), final_state=state, decisions=tuple(decisions))


class TestSequentialityRate:
    def test_identity_is_one(self):
        assert sequentiality_rate(make_trace((0, 1, 2, 3))) == 1.0

    def test_reversed_counts_only_last_decision(self):
        assert sequentiality_rate(make_trace((3, 2, 1, 0))) == 0.25

    def test_single_slot_is_one(self):
        assert sequentiality_rate(make_trace((0,))) == 1.0


class TestRootEntropyBits:
    def test_uniform_four_actions(self):
        assert root_entropy_bits({0: 5, 1: 5, 2: 5, 3: 5}) == pytest.approx(2.0)

    def test_single_action_mass(self):
        assert root_entropy_bits({0: 9, 1: 0}) == 0.0

    def test_walkthrough_counts(self):
        assert root_entropy_bits({0: 1, 1: 2, 2: 1, 3: 0}) == pytest.approx(1.5)


class TestConcentration:
    def test_all_mass_on_one_action(self):
        assert concentration({0: 7, 1: 0}) == 1.0

    def test_uniform_four(self):
        assert concentration({a: 3 for a in range(4)}) == 0.25

    def test_walkthrough_counts(self):
        assert concentration({0: 1, 1: 2, 2: 1, 3: 0}) == 0.5


from hypothesis import given
from hypothesis import strategies as st


@given(
    counts=st.dictionaries(
        st.integers(0, 8),
        st.integers(0, 200),
        min_size=1,
        max_size=8,
    ).filter(lambda d: sum(d.values()) > 0)
)
def test_entropy_and_concentration_bounds(counts):
    import math

    nonzero = sum(1 for v in counts.values() if v > 0)
    assert root_entropy_bits(counts) <= math.log2(nonzero) + 1e-9
    assert concentration(counts) >= 1.0 / len(counts) - 1e-12


class TestTimeScalingFit:
    def test_exactly_linear_points(self):
        fit = time_scaling_fit([(30, 1.0), (90, 3.0), (270, 9.0)])
        assert fit["r2"] == pytest.approx(1.0)
        assert fit["slope"] == pytest.approx(1 / 30)
        assert not fit["insufficient_data"]

    def test_two_points_flagged(self):
        fit = time_scaling_fit([(30, 1.0), (90, 2.0)])
        assert fit["r2"] == pytest.approx(1.0)
        assert fit["insufficient_data"]

    def test_accepts_run_records(self):
        inst = generate_instance(3, 1, "chain", 0, seed=1)
        records = [
            run_planner("mcts", inst, SearchConfig(exploration_c=2.0, n_sim=n, seed=0))
            for n in (8, 16, 32)
        ]
        fit = time_scaling_fit(records)
        assert fit["n_points"] == 3


class TestSweep:
    def test_single_cell_equals_its_run(self):
        inst = generate_instance(3, 1, "chain", 0, seed=2)
        rows, records = sweep([2.0], [16], [inst], [0])
        assert len(rows) == 1 and len(records) == 1
        row = rows[0]
        assert row["c"] == 2.0 and row["n_sim"] == 16
        assert row["mean_accuracy"] == records[0].accuracy
        assert row["std_accuracy"] == 0.0

    def test_grid_shape(self):
        instances = [generate_instance(3, 1, "chain", 0, seed=s) for s in (1, 2)]
        rows, records = sweep([2.0, 4.0], [8, 16], instances, [0, 1])
        assert len(rows) == 4
        assert len(records) == 16

    def test_aggregates_are_instance_order_invariant(self):
        instances = [generate_instance(3, 1, "chain", 0, seed=s) for s in (1, 2, 3)]
        rows_a, _ = sweep([2.0], [8], instances, [0, 1])
        rows_b, _ = sweep([2.0], [8], list(reversed(instances)), [1, 0])
        for key in ("mean_accuracy", "mean_entropy_bits", "mean_seq_rate"):
            assert rows_a[0][key] == pytest.approx(rows_b[0][key])


class TestSerialization:
    def test_trace_round_trip(self):
        inst = generate_instance(4, 1, "random_dag", 1, seed=3)
        rec = run_planner("mcts", inst, SearchConfig(exploration_c=3.0, n_sim=16, seed=2))
        assert trace_from_jsonable(trace_to_jsonable(rec.trace)) == rec.trace

    def test_record_round_trip(self):
        inst = generate_instance(4, 1, "chain", 1, seed=4)
        rec = run_planner("sequential", inst, SearchConfig(seed=0))
        assert record_from_jsonable(record_to_jsonable(rec)) == rec

    def test_baseline_trace_round_trip(self):
        inst = generate_instance(3, 1, "chain", 0, seed=5)
        from slotplan import SyntheticModel

        m = SyntheticModel(inst)
        trace = plan_sequential(m.initial_state(), m)
        assert trace_from_jsonable(trace_to_jsonable(trace)) == trace
