"""MCP server exposing light filtering and keyphrase extraction as tools."""

import asyncio
import json
import logging
import uuid
from typing import Any, Sequence

from mcp.server import Server
from mcp.server.stdio import stdio_server
from mcp.types import Resource, TextContent, Tool
from pydantic import AnyUrl

from .config import PipelineConfig, get_config
from .exceptions import ConfigurationError, LightAKEError, ModelError
from .pipeline import Pipeline
from .store import DEFAULT_CLOUD_SIZE, IndexStore, build_cloud, cloud_json
from .summarizer import light_filter
from .textcore import TextAnalyzer

logger = logging.getLogger(__name__)

RECORD_URI_PREFIX = "lightake://record/"

# Initialize server
app = Server("lightake")

# Loaded lazily on the first extraction request
pipeline: Pipeline | None = None


def get_pipeline() -> Pipeline:
    """Get the extraction pipeline, loading the model if necessary."""
    global pipeline
    if pipeline is None:
        pipeline = Pipeline.load(get_config())
    return pipeline


def get_store(config: PipelineConfig) -> IndexStore | None:
    return IndexStore(config.index_path) if config.index_path else None


def _require_text(arguments: dict[str, Any]) -> str:
    text = arguments.get("text")
    if not text or not str(text).strip():
        raise ValueError("text parameter is required")
    return str(text)


def filter_story(arguments: dict[str, Any]) -> dict[str, Any]:
    overrides = {key: arguments.get(key) for key in ("cr", "metric", "ssc", "minkowski_p")}
    config = get_config(**overrides)
    analyzer = TextAnalyzer.from_config(config)
    document = analyzer.analyze(arguments.get("doc_id") or "story", _require_text(arguments))
    result = light_filter(document, config.cr, config.centrality(), analyzer.stopwords)
    return {
        "cr": config.cr,
        "guard_triggered": result.guard_triggered,
        "kept_indices": list(result.kept_indices),
        "sentences": [sentence.text for sentence in result.document.sentences],
    }


def extract_keyphrases(arguments: dict[str, Any]) -> dict[str, Any]:
    text = _require_text(arguments)
    doc_id = arguments.get("doc_id") or uuid.uuid4().hex[:12]
    current = get_pipeline()
    record = current.process_story(doc_id, text, k=arguments.get("k"))
    store = get_store(current.config)
    if store is not None and arguments.get("store", True):
        store.append([record])
    return record.model_dump(mode="json")


def keyphrase_cloud(arguments: dict[str, Any]) -> str:
    store = get_store(get_config())
    if store is None:
        raise ConfigurationError("No index store configured (set LIGHTAKE_INDEX_PATH)")
    return cloud_json(build_cloud(store.read(), arguments.get("top") or DEFAULT_CLOUD_SIZE))


@app.list_resources()
async def list_resources() -> list[Resource]:
    """List the index records of the configured store."""
    try:
        store = get_store(get_config())
        if store is None or not store.path.exists():
            return []
        records = await asyncio.to_thread(store.read)
        seen: dict[str, Resource] = {}
        for record in records:
            seen[record.doc_id] = Resource(
                uri=AnyUrl(f"{RECORD_URI_PREFIX}{record.doc_id}"),
                name=f"Record: {record.doc_id}",
                description=f"Keyphrases and summary of story '{record.doc_id}'",
                mimeType="application/json",
            )
        return list(seen.values())
    except Exception as e:
        logger.error(f"Error listing resources: {e}", exc_info=True)
        return []


@app.read_resource()
async def read_resource(uri: str) -> str:
    """Read an index record by URI."""
    uri = str(uri)
    try:
        if not uri.startswith(RECORD_URI_PREFIX):
            raise ValueError(f"Unknown resource URI: {uri}")
        store = get_store(get_config())
        if store is None:
            raise ConfigurationError("No index store configured (set LIGHTAKE_INDEX_PATH)")
        doc_id = uri.removeprefix(RECORD_URI_PREFIX)
        record = await asyncio.to_thread(store.get, doc_id)
        if record is None:
            raise ValueError(f"Record not found: {doc_id}")
        return record.model_dump_json(indent=2)
    except Exception as e:
        logger.error(f"Error reading resource {uri}: {e}", exc_info=True)
        raise ValueError(f"Error reading resource: {str(e)}") from e


@app.list_tools()
async def list_tools() -> list[Tool]:
    """List all available tools."""
    return [
        Tool(
            name="filter_story",
            description="Remove the least central sentences of a news story (light filtering). Stories that would keep 3 sentences or fewer are returned unchanged.",
            inputSchema={
                "type": "object",
                "properties": {
                    "text": {"type": "string", "description": "Story text"},
                    "cr": {
                        "type": "number",
                        "description": "Compression ratio: fraction of sentences to remove (default: 0.1)",
                    },
                    "metric": {
                        "type": "string",
                        "description": "Distance metric: manhattan, euclidean, chebyshev, minkowski or cosine",
                    },
                    "ssc": {
                        "type": "string",
                        "description": "Support set cardinality, e.g. '10%' or '8'",
                    },
                    "minkowski_p": {"type": "number", "description": "Minkowski order"},
                },
                "required": ["text"],
            },
        ),
        Tool(
            name="extract_keyphrases",
            description="Filter a story at the model's compression ratio, extract its top-k keyphrases and index the result",
            inputSchema={
                "type": "object",
                "properties": {
                    "text": {"type": "string", "description": "Story text"},
                    "doc_id": {"type": "string", "description": "Story identifier"},
                    "k": {"type": "integer", "description": "Number of keyphrases (default: 10)"},
                    "store": {
                        "type": "boolean",
                        "description": "Append the record to the index store (default: true)",
                    },
                },
                "required": ["text"],
            },
        ),
        Tool(
            name="keyphrase_cloud",
            description="Aggregate keyphrase scores across all indexed stories",
            inputSchema={
                "type": "object",
                "properties": {
                    "top": {
                        "type": "integer",
                        "description": "Number of phrases in the cloud (default: 10)",
                    },
                },
                "required": [],
            },
        ),
    ]


@app.call_tool()
async def call_tool(name: str, arguments: dict[str, Any]) -> Sequence[TextContent]:
    """Handle tool calls."""
    arguments = arguments or {}
    try:
        if name == "filter_story":
            result = await asyncio.to_thread(filter_story, arguments)
            return [
                TextContent(
                    type="text",
                    text=f"Kept {len(result['kept_indices'])} sentence(s):\n\n"
                    + json.dumps(result, indent=2),
                )
            ]

        elif name == "extract_keyphrases":
            record = await asyncio.to_thread(extract_keyphrases, arguments)
            lines = [
                f"{rank}\t{kp['score']:.4f}\t{kp['phrase']}"
                for rank, kp in enumerate(record["keyphrases"], start=1)
            ]
            return [
                TextContent(
                    type="text",
                    text=f"Extracted {len(lines)} keyphrase(s) for '{record['doc_id']}':\n"
                    + "\n".join(lines)
                    + f"\n\nRecord:\n{json.dumps(record, indent=2)}",
                )
            ]

        elif name == "keyphrase_cloud":
            cloud = await asyncio.to_thread(keyphrase_cloud, arguments)
            return [TextContent(type="text", text=cloud)]

        else:
            raise ValueError(f"Unknown tool: {name}")

    except ModelError as e:
        logger.error(f"Model error: {e}")
        return [TextContent(type="text", text=f"Model error: {str(e)}")]
    except LightAKEError as e:
        logger.error(f"lightake error: {e}")
        return [TextContent(type="text", text=f"Error: {str(e)}")]
    except Exception as e:
        logger.error(f"Error executing tool {name}: {e}", exc_info=True)
        return [TextContent(type="text", text=f"Unexpected error: {str(e)}")]


async def main():
    """Main entry point for the MCP server."""
    config = get_config()
    if config.model_path is None:
        logger.warning("LIGHTAKE_MODEL_PATH is not set; extract_keyphrases will fail")

    # Run the server using stdio transport
    async with stdio_server() as (read_stream, write_stream):
        await app.run(
            read_stream,
            write_stream,
            app.create_initialization_options(),
        )


def cli():
    """CLI entry point for the MCP server."""
    logging.basicConfig(
        level=logging.INFO,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    )
    try:
        asyncio.run(main())
    except KeyboardInterrupt:
        logger.info("Server stopped by user")
    except Exception as e:
        logger.error(f"Fatal error: {e}", exc_info=True)
        raise


if __name__ == "__main__":
    cli()
