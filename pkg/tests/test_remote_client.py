"""Remote-client behavior against a minimal in-test HTTP stub.

The stub delegates scoring to an in-process synthetic model, so these tests
cover the client's wire handling (request shape, error mapping) without the
standalone scoring server.
"""

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from slotplan import (
    ModelUnavailable,
    PlanAborted,
    RemoteModel,
    SearchConfig,
    SlotState,
    SyntheticModel,
    generate_instance,
    plan,
)
from slotplan.analysis import trace_to_jsonable
from slotplan.model import CachedModel


def make_stub(instance, fail_after=None, mangle=False):
    model = SyntheticModel(instance)
    calls = {"n": 0}

    class Handler(BaseHTTPRequestHandler):
        def log_message(self, *args):
            pass

        def do_POST(self):
            body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
            calls["n"] += 1
            if fail_after is not None and calls["n"] > fail_after:
                self.send_response(503)
                self.end_headers()
                return
            state = SlotState(
                order_prefix=tuple(
                    i for i, s in sorted(
                        ((i, s) for i, s in enumerate(body["slots"]) if s is not None),
                    )
                ),
                slots=tuple(tuple(s) if s is not None else None for s in body["slots"]),
                slot_len=body["slot_size"],
            )
            proposal = model.propose(state, body["target_slot"])
            payload = {"tokens": list(proposal.tokens), "token_probs": list(proposal.token_probs)}
            if mangle:
                payload = {"tokens": "oops"}
            data = json.dumps(payload).encode()
            self.send_response(200)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)

    server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return server, f"http://127.0.0.1:{server.server_port}"


@pytest.fixture
def instance():
    return generate_instance(4, 2, "chain", 1, seed=7)


def test_remote_proposals_match_in_process(instance):
    server, url = make_stub(instance)
    try:
        remote = RemoteModel(url, "test", slot_len=instance.l)
        local = SyntheticModel(instance)
        state = SlotState.initial(instance.k, instance.l)
        for action in (0, 1, 3):
            assert remote.propose(state, action) == local.propose(state, action)
    finally:
        server.shutdown()


def test_remote_plan_equals_in_process_plan(instance):
    server, url = make_stub(instance)
    try:
        cfg = SearchConfig(exploration_c=3.0, n_sim=16, seed=5)
        remote_trace = plan(
            SlotState.initial(instance.k, instance.l),
            CachedModel(RemoteModel(url, "test", slot_len=instance.l)),
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
    finally:
        server.shutdown()


def test_non_200_maps_to_model_unavailable(instance):
    server, url = make_stub(instance, fail_after=0)
    try:
        remote = RemoteModel(url, "test", slot_len=instance.l)
        with pytest.raises(ModelUnavailable):
            remote.propose(SlotState.initial(instance.k, instance.l), 0)
    finally:
        server.shutdown()


def test_malformed_response_maps_to_model_unavailable(instance):
    server, url = make_stub(instance, mangle=True)
    try:
        remote = RemoteModel(url, "test", slot_len=instance.l)
        with pytest.raises(ModelUnavailable):
            remote.propose(SlotState.initial(instance.k, instance.l), 0)
    finally:
        server.shutdown()


def test_unreachable_server_maps_to_model_unavailable(instance):
    remote = RemoteModel("http://127.0.0.1:9", "test", slot_len=instance.l, timeout=0.2)
    with pytest.raises(ModelUnavailable):
        remote.propose(SlotState.initial(instance.k, instance.l), 0)


def test_mid_plan_failure_aborts_with_step_index(instance):
    server, url = make_stub(instance, fail_after=30)
    try:
        cfg = SearchConfig(exploration_c=3.0, n_sim=16, seed=5)
        with pytest.raises(PlanAborted) as excinfo:
            plan(
                SlotState.initial(instance.k, instance.l),
                RemoteModel(url, "test", slot_len=instance.l),
                cfg,
            )
        assert excinfo.value.step_index >= 0
    finally:
        server.shutdown()
