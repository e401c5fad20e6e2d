"""JSON reports written by the command-line tool.

Reports are plain dicts serialized with sorted keys, so equal content gives
equal bytes. The JSON Schema shipped next to this module documents the
layout; :func:`load_schema` returns it for validators.
"""
import json
from importlib import resources

SCHEMA_VERSION = 1


def load_schema():
    text = resources.files(__package__).joinpath("report_schema.json").read_text("utf-8")
    return json.loads(text)


def dumps_report(report):
    body = dict(report)
    body.setdefault("schema_version", SCHEMA_VERSION)
    return json.dumps(body, indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_report(report, path=None, stream=None):
    """Write to ``path`` or, when it is ``None``, to ``stream``."""
    text = dumps_report(report)
    if path is None:
        stream.write(text)
        stream.flush()
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    return text


def read_report(path):
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    version = data.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ValueError(f"{path}: unsupported report schema version {version!r}")
    return data
