"""Scoring endpoint: mock hashing, registry models, annotations, errors."""

from __future__ import annotations

import pytest
import yaml
from fastapi.testclient import TestClient

import fake_models
from qeshim import ModelEntry, ModelRegistry, Settings, create_app
from qeshim.registry import InvalidRegistry, mock_score


def client_for(settings: Settings | None = None) -> TestClient:
    return TestClient(create_app(settings))


def score_body(pairs, model="mock", **extra):
    return {"pairs": pairs, "model": model, "batch_hint": len(pairs), **extra}


def registry_client(**entry_kwargs) -> TestClient:
    entry = ModelEntry(name="fake-qe", target="fake_models:counting_factory", **entry_kwargs)
    return client_for(Settings(registry=ModelRegistry(entries=(entry,))))


class TestMockScoring:
    def test_identical_pairs_score_identically(self):
        client = client_for()
        response = client.post(
            "/v1/score",
            json=score_body([{"src": "a b", "tgt": "x"}, {"src": "a b", "tgt": "x"}]),
        )
        assert response.status_code == 200
        first, second = response.json()["scores"]
        assert first == second
        assert 0.0 <= first < 1.0

    @pytest.mark.parametrize("count", [1, 2, 33])
    def test_score_count_equals_pair_count(self, count):
        client = client_for()
        pairs = [{"src": f"source {i}", "tgt": f"target {i}"} for i in range(count)]
        response = client.post("/v1/score", json=score_body(pairs))
        assert response.status_code == 200
        assert len(response.json()["scores"]) == count

    def test_order_is_preserved(self):
        client = client_for()
        pairs = [{"src": f"s{i}", "tgt": f"t{i}"} for i in range(10)]
        batch = client.post("/v1/score", json=score_body(pairs)).json()["scores"]
        solo = [
            client.post("/v1/score", json=score_body([pair])).json()["scores"][0]
            for pair in pairs
        ]
        assert batch == solo

    def test_same_body_same_bytes_across_instances(self):
        body = score_body([{"src": "stable", "tgt": "安定"}, {"src": "x", "tgt": "y"}])
        one = client_for().post("/v1/score", json=body)
        two = client_for().post("/v1/score", json=body)
        assert one.content == two.content
        assert one.content == client_for().post("/v1/score", json=body).content

    def test_context_and_ref_do_not_change_the_mock_score(self):
        client = client_for()
        bare = client.post(
            "/v1/score", json=score_body([{"src": "a", "tgt": "b"}])
        ).json()["scores"][0]
        dressed = client.post(
            "/v1/score",
            json=score_body(
                [
                    {
                        "src": "a",
                        "tgt": "b",
                        "src_context": "before.",
                        "tgt_context": "前。",
                        "mask_context": True,
                        "ref": "b!",
                    }
                ]
            ),
        ).json()["scores"][0]
        assert bare == dressed

    def test_mock_responses_carry_no_annotations(self):
        client = client_for()
        payload = client.post(
            "/v1/score", json=score_body([{"src": "a", "tgt": "b"}])
        ).json()
        assert set(payload) == {"scores"}


class TestMalformedBodies:
    @pytest.mark.parametrize(
        "body",
        [
            {"pairs": [], "model": "mock"},
            {"model": "mock"},
            {"pairs": [{"src": "a", "tgt": "b"}]},
            {"pairs": [{"src": "a"}], "model": "mock"},
            {"pairs": [{"src": "a", "tgt": 3}], "model": "mock"},
            {"pairs": [{"src": "a", "tgt": "b", "weight": 2}], "model": "mock"},
            {"pairs": [{"src": "a", "tgt": "b"}], "model": "mock", "batch_hint": -1},
            {"pairs": "not a list", "model": "mock"},
        ],
    )
    def test_malformed_bodies_return_400(self, body):
        response = client_for().post("/v1/score", json=body)
        assert response.status_code == 400

    def test_unknown_model_returns_404_naming_it(self):
        response = client_for().post(
            "/v1/score", json=score_body([{"src": "a", "tgt": "b"}], model="absent-qe")
        )
        assert response.status_code == 404
        assert "absent-qe" in response.json()["detail"]


class TestRegistryModels:
    def test_model_loads_once_and_is_reused(self):
        fake_models.LOADS = 0
        client = registry_client()
        for _ in range(3):
            response = client.post(
                "/v1/score",
                json=score_body([{"src": "a", "tgt": "b" * 30}], model="fake-qe"),
            )
            assert response.status_code == 200
            assert response.json()["scores"] == [0.3]
        assert fake_models.LOADS == 1

    def test_load_failure_returns_503(self):
        entry = ModelEntry(name="broken", target="fake_models:broken_factory")
        client = client_for(Settings(registry=ModelRegistry(entries=(entry,))))
        response = client.post(
            "/v1/score", json=score_body([{"src": "a", "tgt": "b"}], model="broken")
        )
        assert response.status_code == 503
        assert "broken" in response.json()["detail"]

    def test_missing_module_returns_503(self):
        entry = ModelEntry(name="ghost", target="no_such_module:factory")
        client = client_for(Settings(registry=ModelRegistry(entries=(entry,))))
        response = client.post(
            "/v1/score", json=score_body([{"src": "a", "tgt": "b"}], model="ghost")
        )
        assert response.status_code == 503

    def test_miscounting_model_is_a_server_error_not_a_partial_list(self):
        entry = ModelEntry(name="liar", target="fake_models:miscounting_factory")
        client = client_for(Settings(registry=ModelRegistry(entries=(entry,))))
        response = client.post(
            "/v1/score",
            json=score_body(
                [{"src": "a", "tgt": "b"}, {"src": "c", "tgt": "d"}], model="liar"
            ),
        )
        assert response.status_code == 500
        assert "scores" not in response.json()

    def test_truncation_is_annotated_per_pair(self):
        client = registry_client(token_cap=4)
        response = client.post(
            "/v1/score",
            json=score_body(
                [
                    {"src": "one two", "tgt": "three four five"},
                    {"src": "one", "tgt": "two"},
                ],
                model="fake-qe",
            ),
        )
        notes = response.json()["annotations"]
        assert notes[0]["truncated"] is True
        assert notes[1]["truncated"] is False

    def test_masking_degrades_when_the_model_cannot_mask(self):
        fake_models.RECEIVED.clear()
        entry = ModelEntry(
            name="no-mask", target="fake_models:recording_factory", can_mask=False
        )
        client = client_for(Settings(registry=ModelRegistry(entries=(entry,))))
        response = client.post(
            "/v1/score",
            json=score_body(
                [
                    {
                        "src": "a",
                        "tgt": "b",
                        "src_context": "ctx",
                        "tgt_context": "ctx",
                        "mask_context": True,
                    }
                ],
                model="no-mask",
            ),
        )
        assert response.status_code == 200
        assert response.json()["annotations"][0]["mask_degraded"] is True
        assert fake_models.RECEIVED[-1] == [{"src": "a", "tgt": "b"}]

    def test_masking_passes_through_when_the_model_can_mask(self):
        fake_models.RECEIVED.clear()
        entry = ModelEntry(
            name="masker", target="fake_models:recording_factory", can_mask=True
        )
        client = client_for(Settings(registry=ModelRegistry(entries=(entry,))))
        response = client.post(
            "/v1/score",
            json=score_body(
                [
                    {
                        "src": "a",
                        "tgt": "b",
                        "src_context": "ctx",
                        "tgt_context": "前",
                        "mask_context": True,
                    }
                ],
                model="masker",
            ),
        )
        assert response.status_code == 200
        assert "mask_degraded" not in response.json()["annotations"][0]
        assert fake_models.RECEIVED[-1] == [
            {
                "src": "a",
                "tgt": "b",
                "src_context": "ctx",
                "tgt_context": "前",
                "mask_context": True,
            }
        ]


class TestRegistryConfig:
    def test_reads_a_yaml_registry(self, tmp_path):
        path = tmp_path / "models.yaml"
        path.write_text(
            yaml.safe_dump(
                {
                    "models": {
                        "fake-qe": {
                            "target": "fake_models:counting_factory",
                            "token_cap": 256,
                            "can_mask": False,
                        }
                    }
                }
            ),
            encoding="utf-8",
        )
        registry = ModelRegistry.from_file(path)
        assert registry.names == ["fake-qe", "mock"]
        entry = registry.entry("fake-qe")
        assert entry.token_cap == 256
        assert entry.can_mask is False

    def test_registry_without_target_is_invalid(self, tmp_path):
        path = tmp_path / "models.yaml"
        path.write_text(yaml.safe_dump({"models": {"x": {}}}), encoding="utf-8")
        with pytest.raises(InvalidRegistry, match="target"):
            ModelRegistry.from_file(path)

    def test_duplicate_names_are_invalid(self):
        entry = ModelEntry(name="twin", target="fake_models:counting_factory")
        with pytest.raises(InvalidRegistry, match="duplicate"):
            ModelRegistry(entries=(entry, entry))

    def test_mock_name_cannot_be_registered(self):
        with pytest.raises(InvalidRegistry):
            ModelEntry(name="mock", target="fake_models:counting_factory")

    def test_bad_target_shape_is_invalid(self):
        with pytest.raises(InvalidRegistry, match="module:attribute"):
            ModelEntry(name="x", target="no-colon")

    def test_mock_score_is_a_pure_function_of_the_pair(self):
        one = mock_score([{"src": "a", "tgt": "b", "ref": "r"}])
        two = mock_score([{"src": "a", "tgt": "b"}])
        assert one == two


class TestAuth:
    def test_token_is_required_when_configured(self):
        client = client_for(Settings(auth_token="s3cret"))
        body = score_body([{"src": "a", "tgt": "b"}])
        assert client.post("/v1/score", json=body).status_code == 401
        assert (
            client.post(
                "/v1/score", json=body, headers={"Authorization": "Bearer wrong"}
            ).status_code
            == 401
        )
        assert (
            client.post(
                "/v1/score", json=body, headers={"Authorization": "Bearer s3cret"}
            ).status_code
            == 200
        )

    def test_health_probe_needs_no_token(self):
        client = client_for(Settings(auth_token="s3cret"))
        assert client.get("/healthz").status_code == 200
