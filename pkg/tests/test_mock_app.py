"""Tests for the scripted chat-completions backend."""

from fastapi.testclient import TestClient

from app.api.chat import CQ_HEADER
from app.main import create_mock_app
from tests.conftest import CASES

client = TestClient(create_mock_app(CASES / "library" / "replies"))

BODY = {"model": "mock-model", "messages": [{"role": "user", "content": "Model the question."}]}


def post(cq_id: str, test_client: TestClient = client, **headers):
    return test_client.post("/v1/chat/completions", json=BODY, headers={CQ_HEADER: cq_id, **headers})


class TestHealth:
    def test_health(self):
        resp = client.get("/health")
        assert resp.status_code == 200
        assert resp.json() == {"status": "ok", "scripted": True}

    def test_health_without_replies(self):
        resp = TestClient(create_mock_app()).get("/health")
        assert resp.json() == {"status": "ok", "scripted": False}


class TestChatCompletions:
    def test_scripted_reply(self):
        resp = post("cq1")
        assert resp.status_code == 200
        data = resp.json()
        assert data["object"] == "chat.completion"
        assert data["model"] == "mock-model"
        assert "lib:holds a owl:ObjectProperty" in data["choices"][0]["message"]["content"]

    def test_completion_id_is_deterministic(self):
        assert post("cq1").json()["id"] == post("cq1").json()["id"]

    def test_status_script_then_success(self):
        fresh = TestClient(create_mock_app(CASES / "library" / "replies"))
        assert post("cq2", fresh).status_code == 429
        assert post("cq2", fresh).status_code == 200
        assert post("cq2", fresh).status_code == 200
        assert fresh.app.state.replies.calls("cq2") == 3

    def test_unknown_cq_gets_empty_content(self):
        resp = post("cq99")
        assert resp.status_code == 200
        assert resp.json()["choices"][0]["message"]["content"] == ""

    def test_path_like_cq_id_is_ignored(self):
        resp = post("../manifest")
        assert resp.json()["choices"][0]["message"]["content"] == ""

    def test_api_key_required(self):
        guarded = TestClient(create_mock_app(CASES / "library" / "replies", api_key="k1"))
        assert post("cq1", guarded).status_code == 401
        assert post("cq1", guarded, Authorization="Bearer wrong").status_code == 401
        assert post("cq1", guarded, Authorization="Bearer k1").status_code == 200

    def test_invalid_body(self):
        resp = client.post("/v1/chat/completions", json={"messages": []}, headers={CQ_HEADER: "cq1"})
        assert resp.status_code == 422
