import numpy as np
import pytest

from paraprompt.backend import (
    BackendConfig,
    CompletionParseError,
    EmptyParaphraseError,
    GenerationRequest,
    HttpBackend,
    MalformedResponseError,
    MockBackend,
    PromptBudgetError,
    TransportError,
    generate_batch,
    make_embedding_backend,
    make_generation_backend,
    parse_completion,
)
from paraprompt.novelty import NoveltyClass
from paraprompt.promptkit import DEFAULT_TEMPLATE


def test_mock_echo_returns_first_line_after_final_marker():
    mock = MockBackend(mode="echo")
    response = mock.generate(
        GenerationRequest(prompt="Input: a\nParaphrase: b c d\nInput: next")
    )
    assert response.text == "b c d"


def test_mock_echo_falls_back_to_query_for_open_prompts():
    mock = MockBackend(mode="echo")
    response = mock.generate(
        GenerationRequest(prompt="Input: how do i learn\nParaphrase:")
    )
    assert response.text == "how do i learn"


def test_mock_stop_truncation():
    mock = MockBackend(mode="constant", constant_text="one\ntwo")
    response = mock.generate(GenerationRequest(prompt="p", stop=("\n",)))
    assert response.text == "one"


def test_mock_generation_deterministic():
    a = MockBackend(mode="shuffle", seed=3)
    b = MockBackend(mode="shuffle", seed=3)
    prompt = "Input: w x y z\nParaphrase:"
    assert a.generate(GenerationRequest(prompt=prompt)).text == b.generate(
        GenerationRequest(prompt=prompt)
    ).text


def test_mock_embed_deterministic_and_unit():
    mock = MockBackend(dim=8)
    first, second = mock.embed(["hello world", "hello world"])
    assert np.allclose(first, second)
    assert np.linalg.norm(first) == pytest.approx(1.0, abs=1e-9)


def test_mock_embed_batch_order():
    mock = MockBackend(dim=4)
    vectors = mock.embed(["a", "b", "c"])
    assert len(vectors) == 3
    assert not np.allclose(vectors[0], vectors[1])
    assert np.allclose(vectors[0], mock.embed(["a"])[0])


def test_mock_embed_empty_rejected():
    with pytest.raises(ValueError):
        MockBackend().embed([])


def test_generate_batch_preserves_order_and_bounds_concurrency():
    import time

    class SlowMock(MockBackend):
        # sleep inside the instrumented window so in-flight overlap is visible
        def _completion_for(self, prompt):
            time.sleep(0.01)
            return super()._completion_for(prompt)

    mock = SlowMock(mode="echo")
    requests_list = [
        GenerationRequest(
            prompt=f"Input: text {i}\nParaphrase:", request_id=str(i)
        )
        for i in range(16)
    ]
    responses = generate_batch(mock, requests_list, max_in_flight=3)
    assert [r.text for r in responses] == [f"text {i}" for i in range(16)]
    # the pool actually runs requests concurrently, but never more than
    # the configured bound at once
    assert 2 <= mock.max_in_flight_observed <= 3


def test_retry_does_not_duplicate_completions():
    mock = MockBackend(mode="echo", fail_first_attempts=1)
    request = GenerationRequest(prompt="Input: a b\nParaphrase:", request_id="r1")
    with pytest.raises(TransportError):
        mock.generate(request)
    response = mock.generate(request)
    assert response.text == "a b"
    assert mock.completed_ids.count("r1") == 1


def test_make_backend_selects_mock_by_scheme():
    config = BackendConfig(generation_url="mock:shuffle?seed=5", embedding_url="mock:hash?dim=12")
    gen = make_generation_backend(config)
    emb = make_embedding_backend(config)
    assert isinstance(gen, MockBackend) and gen.mode == "shuffle" and gen.seed == 5
    assert isinstance(emb, MockBackend) and emb.dim == 12


def test_env_overrides_urls(monkeypatch):
    monkeypatch.setenv("PARAPROMPT_GENERATION_URL", "mock:constant?text=hi")
    config = BackendConfig(generation_url="http://example.invalid/generate")
    backend = make_generation_backend(config)
    assert isinstance(backend, MockBackend)


def test_empty_prompt_rejected():
    with pytest.raises(ValueError):
        GenerationRequest(prompt="")


class _FakeResponse:
    def __init__(self, status_code=200, body=None, text=""):
        self.status_code = status_code
        self._body = body
        self.text = text

    def json(self):
        if self._body is None:
            raise ValueError("no json")
        return self._body


def test_http_transport_error_after_retries(monkeypatch):
    import requests as requests_lib

    calls = {"n": 0}

    def failing_post(*args, **kwargs):
        calls["n"] += 1
        raise requests_lib.ConnectionError("refused")

    monkeypatch.setattr("paraprompt.backend.requests.post", failing_post)
    backend = HttpBackend(BackendConfig(generation_url="http://x/gen", retry_limit=3))
    with pytest.raises(TransportError, match="after 3 attempts"):
        backend.generate(GenerationRequest(prompt="p"))
    assert calls["n"] == 3


def test_http_malformed_response_not_retried(monkeypatch):
    calls = {"n": 0}

    def bad_post(*args, **kwargs):
        calls["n"] += 1
        return _FakeResponse(body={"unexpected": 1})

    monkeypatch.setattr("paraprompt.backend.requests.post", bad_post)
    backend = HttpBackend(BackendConfig(generation_url="http://x/gen", retry_limit=3))
    with pytest.raises(MalformedResponseError):
        backend.generate(GenerationRequest(prompt="p"))
    assert calls["n"] == 1


def test_http_success_and_stop_truncation(monkeypatch):
    def ok_post(url, json=None, timeout=None, headers=None):
        assert json["prompt"] == "p"
        return _FakeResponse(body={"text": "abc\ndef", "token_count": 2})

    monkeypatch.setattr("paraprompt.backend.requests.post", ok_post)
    backend = HttpBackend(BackendConfig(generation_url="http://x/gen"))
    response = backend.generate(GenerationRequest(prompt="p", stop=("\n",)))
    assert response.text == "abc"
    assert response.token_count == 2


def test_http_budget_rejection_surfaces_n(monkeypatch):
    def over_post(*args, **kwargs):
        return _FakeResponse(status_code=413, body={"token_count": 2048})

    monkeypatch.setattr("paraprompt.backend.requests.post", over_post)
    backend = HttpBackend(BackendConfig(generation_url="http://x/gen"))
    with pytest.raises(PromptBudgetError) as err:
        backend.generate(GenerationRequest(prompt="p"))
    assert err.value.prompt_tokens == 2048


def test_http_embed_batch_dimension_check(monkeypatch):
    def mixed_post(*args, **kwargs):
        return _FakeResponse(body={"vectors": [[1.0, 2.0], [1.0]]})

    monkeypatch.setattr("paraprompt.backend.requests.post", mixed_post)
    backend = HttpBackend(BackendConfig(embedding_url="http://x/emb"))
    with pytest.raises(MalformedResponseError, match="mixed"):
        backend.embed(["a", "b"])


def test_parse_completion_extracts_after_final_marker():
    raw = "Input: x\nParaphrase: noise\n\nInput: q\nParaphrase: how do i learn\nInput:"
    assert parse_completion(raw) == ("how", "do", "i", "learn")


def test_parse_completion_missing_marker():
    with pytest.raises(CompletionParseError):
        parse_completion("no marker here")


def test_parse_completion_empty_after_marker():
    with pytest.raises(EmptyParaphraseError):
        parse_completion("Input: q\nParaphrase:   \nInput:")


def test_parse_completion_class_tagged_marker():
    raw = "Input: q\nParaphrase: (high) brand new words"
    tokens = parse_completion(raw, DEFAULT_TEMPLATE, NoveltyClass.HIGH)
    assert tokens == ("brand", "new", "words")


def test_config_validation():
    with pytest.raises(ValueError):
        BackendConfig(max_in_flight=0)
    with pytest.raises(ValueError):
        BackendConfig(retry_limit=0)
