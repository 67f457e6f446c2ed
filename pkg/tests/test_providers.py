import json
import threading

import httpx
import pytest

from trajkg.errors import ProviderError, TemplateError
from trajkg.providers import (
    DeterministicProvider,
    PromptTemplate,
    RemoteProvider,
    default_templates,
    extract_payloads,
    load_templates,
    resolve_json_pointer,
    split_into_statements,
)


class TestTemplates:
    def test_defaults_cover_all_ids(self):
        templates = default_templates()
        assert set(templates) == {"REFINE", "EXTRACT_NODES", "EXTRACT_RELATIONS", "MAP_QUESTION"}

    def test_load_from_directory(self, tmp_path):
        for template_id, grammar in [
            ("REFINE", "STATEMENTS"),
            ("EXTRACT_NODES", "NODES"),
            ("EXTRACT_RELATIONS", "RELATIONS"),
            ("MAP_QUESTION", "EDGES"),
        ]:
            (tmp_path / f"{template_id}.txt").write_text("body ${x}", encoding="utf-8")
        templates = load_templates(tmp_path)
        assert templates["REFINE"].output_grammar_id == "STATEMENTS"

    def test_missing_template_file(self, tmp_path):
        (tmp_path / "REFINE.txt").write_text("x", encoding="utf-8")
        with pytest.raises(TemplateError, match="EXTRACT_NODES"):
            load_templates(tmp_path)

    def test_unbound_placeholder(self):
        template = PromptTemplate("REFINE", "hello ${name}", "STATEMENTS")
        with pytest.raises(TemplateError, match="name"):
            template.render({})

    def test_payload_fences_round_trip(self):
        rendered = "intro\n<<<SECTION\nline one\nline two\nSECTION>>>\noutro"
        assert extract_payloads(rendered) == {"SECTION": "line one\nline two"}


class TestDeterministicProvider:
    def test_same_prompt_same_response(self, provider):
        bindings = {"section_body": "One fact. Another fact."}
        first = provider.complete("REFINE", bindings)
        second = provider.complete("REFINE", bindings)
        assert first == second

    def test_pure_across_instances(self):
        bindings = {"section_body": "Alpha. Beta. And gamma."}
        assert DeterministicProvider().complete("REFINE", bindings) == DeterministicProvider().complete(
            "REFINE", bindings
        )

    def test_missing_binding_records_no_exchange(self, provider):
        with pytest.raises(TemplateError):
            provider.complete("REFINE", {})
        assert provider.exchanges == ()

    def test_every_call_leaves_one_exchange(self, provider):
        provider.complete("REFINE", {"section_body": "A fact."})
        provider.complete(
            "EXTRACT_NODES", {"statements": "for loop | iterates | sequence"}
        )
        assert len(provider.exchanges) == 2
        assert [x.template_id for x in provider.exchanges] == ["REFINE", "EXTRACT_NODES"]
        assert all(x.provider_kind == "deterministic" for x in provider.exchanges)

    def test_map_question_defers_to_lexical(self, provider):
        response = provider.complete(
            "MAP_QUESTION",
            {"stem": "s", "options": "0. a\n1. b", "correct_option": "a", "edges": "e1\tx\ty\tz"},
        )
        assert response == ""

    def test_broken_template_loses_payload(self, provider):
        broken = PromptTemplate("REFINE", "no fences ${section_body}", "STATEMENTS")
        provider._templates["REFINE"] = broken
        with pytest.raises(ProviderError, match="SECTION"):
            provider.complete("REFINE", {"section_body": "A fact."})

    def test_thread_safe_exchange_log(self):
        provider = DeterministicProvider()

        def worker(i):
            provider.complete("REFINE", {"section_body": f"Fact {i}."})

        threads = [threading.Thread(target=worker, args=(i,)) for i in range(16)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert len(provider.exchanges) == 16


class TestSentenceRules:
    def test_split_on_all_terminators(self):
        assert split_into_statements("One! Two? Three.") == ["One", "Two", "Three"]

    def test_fillers_only_dropped_when_initial(self):
        assert split_into_statements("Then it runs and stops.") == ["it runs and stops"]

    def test_multiple_leading_fillers(self):
        assert split_into_statements("And also, well, a loop runs.") == ["a loop runs"]

    def test_filler_prefix_words_survive(self):
        # "sombrero" starts with "so" but is not the filler token "so".
        assert split_into_statements("Sombrero fits.") == ["Sombrero fits"]


def _remote(handler, **kwargs):
    kwargs.setdefault("retry_budget", 2)
    kwargs.setdefault("sleep", lambda _s: None)
    return RemoteProvider(
        "https://llm.example/v1/chat",
        transport=httpx.MockTransport(handler),
        **kwargs,
    )


def _completion(text):
    return {"choices": [{"message": {"content": text}}]}


class TestRemoteProvider:
    def test_success_posts_wire_format(self):
        seen = {}

        def handler(request):
            seen["body"] = json.loads(request.content)
            return httpx.Response(200, json=_completion("statement one\nstatement two"))

        provider = _remote(handler)
        response = provider.complete("REFINE", {"section_body": "text"})
        assert response == "statement one\nstatement two"
        body = seen["body"]
        assert body["temperature"] == 0
        assert body["model"] == "default"
        assert body["messages"][0]["role"] == "user"
        assert "<<<SECTION" in body["messages"][0]["content"]

    def test_500_then_200_succeeds_with_two_exchanges(self):
        calls = {"n": 0}

        def handler(request):
            calls["n"] += 1
            if calls["n"] == 1:
                return httpx.Response(500, text="upstream sad")
            return httpx.Response(200, json=_completion("ok"))

        provider = _remote(handler, retry_budget=2)
        assert provider.complete("REFINE", {"section_body": "x"}) == "ok"
        assert len(provider.exchanges) == 2
        assert provider.exchanges[0].raw_response == "upstream sad"

    def test_retry_budget_exhausted_is_terminal(self):
        def handler(request):
            return httpx.Response(503, text="down")

        provider = _remote(handler, retry_budget=2)
        with pytest.raises(ProviderError, match="retry budget"):
            provider.complete("REFINE", {"section_body": "x"})
        assert len(provider.exchanges) == 3  # initial try plus two retries

    def test_transport_error_is_retried(self):
        calls = {"n": 0}

        def handler(request):
            calls["n"] += 1
            if calls["n"] == 1:
                raise httpx.ConnectError("refused")
            return httpx.Response(200, json=_completion("ok"))

        provider = _remote(handler)
        assert provider.complete("REFINE", {"section_body": "x"}) == "ok"
        assert "transport-error" in provider.exchanges[0].raw_response

    def test_client_error_is_not_retried(self):
        calls = {"n": 0}

        def handler(request):
            calls["n"] += 1
            return httpx.Response(400, text="bad request")

        provider = _remote(handler)
        with pytest.raises(ProviderError, match="HTTP 400"):
            provider.complete("REFINE", {"section_body": "x"})
        assert calls["n"] == 1

    def test_malformed_content_is_terminal_not_retried(self):
        calls = {"n": 0}

        def handler(request):
            calls["n"] += 1
            return httpx.Response(200, text="not json at all")

        provider = _remote(handler)
        with pytest.raises(ProviderError, match="not JSON"):
            provider.complete("REFINE", {"section_body": "x"})
        assert calls["n"] == 1

    def test_missing_pointer_is_terminal(self):
        def handler(request):
            return httpx.Response(200, json={"choices": []})

        provider = _remote(handler)
        with pytest.raises(ProviderError, match="pointer"):
            provider.complete("REFINE", {"section_body": "x"})

    def test_custom_pointer(self):
        def handler(request):
            return httpx.Response(200, json={"output": {"text": "hi"}})

        provider = _remote(handler, response_pointer="/output/text")
        assert provider.complete("REFINE", {"section_body": "x"}) == "hi"

    def test_api_key_from_environment_only(self, monkeypatch):
        seen = {}

        def handler(request):
            seen["auth"] = request.headers.get("Authorization")
            return httpx.Response(200, json=_completion("ok"))

        monkeypatch.setenv("TRAJKG_API_KEY", "sk-secret")
        provider = _remote(handler)
        provider.complete("REFINE", {"section_body": "x"})
        assert seen["auth"] == "Bearer sk-secret"

        monkeypatch.delenv("TRAJKG_API_KEY")
        provider.complete("REFINE", {"section_body": "x"})
        assert seen["auth"] is None

    def test_backoff_is_exponential(self):
        naps = []

        def handler(request):
            return httpx.Response(500, text="sad")

        provider = RemoteProvider(
            "https://llm.example/v1/chat",
            transport=httpx.MockTransport(handler),
            retry_budget=2,
            backoff_base=0.5,
            sleep=naps.append,
        )
        with pytest.raises(ProviderError):
            provider.complete("REFINE", {"section_body": "x"})
        assert naps == [0.5, 1.0]


class TestJsonPointer:
    @pytest.mark.parametrize(
        "pointer,expected",
        [
            ("", {"a": [{"b~c": 1, "d/e": 2}]}),
            ("/a", [{"b~c": 1, "d/e": 2}]),
            ("/a/0/b~0c", 1),
            ("/a/0/d~1e", 2),
        ],
    )
    def test_resolution(self, pointer, expected):
        document = {"a": [{"b~c": 1, "d/e": 2}]}
        assert resolve_json_pointer(document, pointer) == expected

    def test_relative_pointer_rejected(self):
        with pytest.raises(ValueError):
            resolve_json_pointer({}, "a/b")
