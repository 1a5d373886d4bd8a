"""Tests for the MCP tool handlers."""

import json

import pytest

from lightake import server
from lightake.cli import main

STORY = (
    "Officials of Kalomar Vestry announced a harbour plan today. "
    "The harbour plan follows talks with Dremon Pask last week. "
    "Critics of Kalomar Vestry questioned the cost of the harbour plan. "
    "Dremon Pask defended the timetable for the harbour works. "
    "The weather stayed mild across the coast."
)


@pytest.fixture(scope="module")
def model_path(small_corpus, tmp_path_factory):
    path = tmp_path_factory.mktemp("server-model") / "model.json"
    assert main(["train", str(small_corpus / "train"), "--out", str(path), "--bags", "2"]) == 0
    return path


@pytest.fixture(autouse=True)
def fresh_pipeline(monkeypatch):
    """Drop the lazily loaded pipeline between tests."""
    monkeypatch.setattr(server, "pipeline", None)


@pytest.fixture
def configured(monkeypatch, model_path, tmp_path):
    index = tmp_path / "index.jsonl"
    monkeypatch.setenv("LIGHTAKE_MODEL_PATH", str(model_path))
    monkeypatch.setenv("LIGHTAKE_INDEX_PATH", str(index))
    return index


async def test_list_tools():
    """Test the three tools are advertised."""
    tools = await server.list_tools()
    names = [tool.name for tool in tools]
    assert names == ["filter_story", "extract_keyphrases", "keyphrase_cloud"]


async def test_filter_story():
    """Test filtering through the tool keeps sentences in order."""
    text = " ".join(f"Sentence number {word} arrived." for word in ["one", "two", "three", "four"])
    result = await server.call_tool(
        "filter_story", {"text": text + " More words followed here.", "cr": 0.2}
    )
    assert result[0].text.startswith("Kept 4 sentence(s)")


async def test_filter_story_short():
    """Test a three-sentence story comes back unchanged."""
    result = await server.call_tool("filter_story", {"text": "One ran. Two sat. Three slept."})
    payload = json.loads(result[0].text.split("\n\n", 1)[1])
    assert payload["kept_indices"] == [0, 1, 2]
    assert payload["guard_triggered"] is False


async def test_filter_story_invalid_metric():
    """Test configuration errors are reported as tool errors."""
    result = await server.call_tool("filter_story", {"text": STORY, "metric": "hamming"})
    assert result[0].text.startswith("Error: Invalid configuration")


async def test_missing_text():
    """Test the text argument is required."""
    result = await server.call_tool("filter_story", {})
    assert "text parameter is required" in result[0].text


async def test_unknown_tool():
    """Test unknown tool names are reported."""
    result = await server.call_tool("summarize", {"text": STORY})
    assert "Unknown tool: summarize" in result[0].text


async def test_extract_without_model():
    """Test extraction reports a model error when no model is configured."""
    result = await server.call_tool("extract_keyphrases", {"text": STORY})
    assert result[0].text.startswith("Model error:")


async def test_cloud_without_store():
    """Test the cloud needs an index store."""
    result = await server.call_tool("keyphrase_cloud", {})
    assert result[0].text.startswith("Error: No index store configured")


async def test_extract_index_and_cloud(configured):
    """Test extraction indexes a record that the cloud and resources expose."""
    result = await server.call_tool(
        "extract_keyphrases", {"text": STORY, "doc_id": "harbour", "k": 5}
    )
    assert result[0].text.startswith("Extracted ")
    assert "'harbour'" in result[0].text
    assert len(configured.read_text().splitlines()) == 1

    cloud = json.loads((await server.call_tool("keyphrase_cloud", {"top": 3}))[0].text)
    assert 0 < len(cloud) <= 3
    assert all(entry["doc_ids"] == ["harbour"] for entry in cloud)

    resources = await server.list_resources()
    assert [str(resource.uri) for resource in resources] == ["lightake://record/harbour"]
    record = json.loads(await server.read_resource("lightake://record/harbour"))
    assert record["doc_id"] == "harbour"
    assert record["k"] == 5


async def test_extract_without_storing(configured):
    """Test store=false leaves the index untouched."""
    await server.call_tool("extract_keyphrases", {"text": STORY, "store": False})
    assert not configured.exists()
    assert await server.list_resources() == []


async def test_read_unknown_resource(configured):
    """Test unknown URIs and records are errors."""
    with pytest.raises(ValueError):
        await server.read_resource("lightake://record/absent")
    with pytest.raises(ValueError):
        await server.read_resource("other://thing")
