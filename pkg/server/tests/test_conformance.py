"""Cross-implementation conformance against the in-process synthetic model.

The toy backend re-implements the instance family independently; these tests
prove both implementations agree field-by-field on randomized probes, and
that a full plan run through the live HTTP stack equals the in-process plan.
"""

import threading
import time

import numpy as np
import pytest
import uvicorn
from fastapi.testclient import TestClient

from slotplan import (
    CachedModel,
    RemoteModel,
    SearchConfig,
    SlotState,
    SyntheticModel,
    apply_action,
    generate_instance,
    plan,
    register_remote_instance,
)
from slotplan.analysis import trace_to_jsonable
from slotplan_server import create_app


def random_partial_state(model, instance, rng):
    """A reachable partial state: a random number of model-consistent fills,
    occasionally corrupted with arbitrary token content."""
    state = SlotState.initial(instance.k, instance.l)
    fills = rng.integers(0, instance.k)  # leave at least one slot open
    order = [int(a) for a in rng.permutation(instance.k)][:fills]
    for action in order:
        proposal = model.propose(state, action)
        if rng.random() < 0.2:
            garbage = tuple(int(t) for t in rng.integers(0, 1_000_000, size=instance.l))
            proposal = type(proposal)(
                slot_index=action,
                tokens=garbage,
                token_probs=proposal.token_probs,
            )
        state = apply_action(state, proposal)
    return state


def test_thousand_randomized_probes_match_field_by_field():
    client = TestClient(create_app())
    rng = np.random.default_rng(12345)
    specs = [
        {"k": 4, "l": 1, "dag_kind": "chain", "decoy_count": 1, "seed": 3},
        {"k": 5, "l": 2, "dag_kind": "random_dag", "decoy_count": 1, "seed": 11},
        {"k": 6, "l": 1, "dag_kind": "diamond", "decoy_count": 2, "seed": 21},
        {"k": 5, "l": 3, "dag_kind": "random_dag", "decoy_count": 0, "seed": 42},
    ]
    pool = []
    for spec in specs:
        response = client.post("/v1/instances", json=spec)
        assert response.status_code == 200
        instance = generate_instance(**spec)
        pool.append((response.json()["instance_id"], instance, SyntheticModel(instance)))

    probes = 0
    while probes < 1000:
        instance_id, instance, model = pool[int(rng.integers(len(pool)))]
        state = random_partial_state(model, instance, rng)
        open_slots = [i for i, s in enumerate(state.slots) if s is None]
        target = int(rng.choice(open_slots))
        expected = model.propose(state, target)
        response = client.post(
            "/v1/propose",
            json={
                "protocol_version": "1",
                "instance_id": instance_id,
                "slot_size": instance.l,
                "slots": [list(s) if s is not None else None for s in state.slots],
                "target_slot": target,
            },
        )
        assert response.status_code == 200
        payload = response.json()
        assert tuple(payload["tokens"]) == expected.tokens
        assert tuple(payload["token_probs"]) == expected.token_probs
        probes += 1


def test_probability_serialization_round_trip():
    client = TestClient(create_app())
    spec = {"k": 4, "l": 1, "dag_kind": "random_dag", "decoy_count": 1, "seed": 5}
    instance_id = client.post("/v1/instances", json=spec).json()["instance_id"]
    instance = generate_instance(**spec)
    model = SyntheticModel(instance)
    state = SlotState.initial(instance.k, instance.l)
    for target in range(instance.k):
        expected = model.propose(state, target).token_probs
        got = client.post(
            "/v1/propose",
            json={
                "protocol_version": "1",
                "instance_id": instance_id,
                "slot_size": instance.l,
                "slots": [None] * instance.k,
                "target_slot": target,
            },
        ).json()["token_probs"]
        for a, b in zip(expected, got):
            assert abs(a - b) <= 1e-12 * max(abs(a), 1.0)


@pytest.fixture(scope="module")
def live_server():
    config = uvicorn.Config(create_app(), host="127.0.0.1", port=0, log_level="warning")
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.time() + 10
    while not server.started:
        if time.time() > deadline:
            raise RuntimeError("server did not start")
        time.sleep(0.02)
    port = server.servers[0].sockets[0].getsockname()[1]
    yield f"http://127.0.0.1:{port}"
    server.should_exit = True
    thread.join(timeout=5)


def test_full_remote_plan_equals_in_process_plan(live_server):
    spec = {"k": 5, "l": 2, "dag_kind": "random_dag", "decoy_count": 1, "seed": 17}
    instance = generate_instance(**spec)
    instance_id = register_remote_instance(live_server, spec)
    cfg = SearchConfig(exploration_c=3.0, n_sim=32, seed=9)

    remote_trace = plan(
        SlotState.initial(instance.k, instance.l),
        CachedModel(RemoteModel(live_server, instance_id, slot_len=instance.l)),
        cfg,
    )
    local_trace = plan(
        SlotState.initial(instance.k, instance.l),
        CachedModel(SyntheticModel(instance)),
        cfg,
    )
    assert trace_to_jsonable(remote_trace, include_timing=False) == trace_to_jsonable(
        local_trace, include_timing=False
    )


def test_registration_idempotent_over_http(live_server):
    spec = {"k": 4, "l": 1, "dag_kind": "chain", "decoy_count": 0, "seed": 2}
    assert register_remote_instance(live_server, spec) == register_remote_instance(
        live_server, spec
    )


def test_cli_remote_plan_and_replay_round_trip(live_server, tmp_path, monkeypatch):
    """Plan through the CLI against the live server, then replay the records.

    A mutated embedded registration (a stand-in for a changed server backend)
    must be reported as a mismatch with the divergent decision."""
    import json

    from slotplan.cli import main as cli_main

    records = tmp_path / "remote_runs.jsonl"
    config = tmp_path / "remote.cfg"
    config.write_text(
        "planner = mcts\n"
        "search.c = 3.0\n"
        "search.n_sim = 24\n"
        "model.kind = remote\n"
        "model.k = 4\n"
        "model.l = 1\n"
        "model.dag_kind = chain\n"
        "model.decoy_count = 1\n"
        "model.instance_seeds = 3,4\n"
        "run.seeds = 0\n"
        f"output.records = {records}\n"
    )
    monkeypatch.setenv("SLOTPLAN_REMOTE_URL", live_server)
    assert cli_main(["plan", "--config", str(config)]) == 0
    assert cli_main(["replay", str(records)]) == 0

    lines = records.read_text().splitlines()
    record = json.loads(lines[0])
    record["instance"]["gen"]["seed"] = 99  # the server now scores differently
    lines[0] = json.dumps(record)
    records.write_text("\n".join(lines) + "\n")
    assert cli_main(["replay", str(records), "--index", "0"]) == 1
