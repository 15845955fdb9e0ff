"""Report serialization.

JSON reports carry a top-level schema_version and are written with sorted
keys so identical runs produce identical bytes; CSV tables are UTF-8 with a
header row, comma delimiters, and "." as the decimal separator (floats are
rendered with repr, which round-trips).
"""

import csv
import io
import json

SCHEMA_VERSION = 1


def verdict_payload(verdict) -> dict:
    """SequentialVerdict as plain data for a report."""
    return {
        "status": verdict.status,
        "total_effort": verdict.total_effort,
        "n_iterations": verdict.n_iterations,
        "iterations": [
            {
                "index": it.index,
                "n": it.n,
                "q": it.q,
                "beta": it.beta,
                "p": list(it.p),
                "decision": it.decision,
            }
            for it in verdict.iterations
        ],
    }


def render_json(payload: dict) -> str:
    body = {"schema_version": SCHEMA_VERSION}
    body.update(payload)
    return json.dumps(body, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def write_json(path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(render_json(payload))


def _render_cell(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def render_csv(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, delimiter=",", lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_render_cell(v) for v in row])
    return buf.getvalue()


def write_csv(path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(render_csv(header, rows))


TABLE_HEADER = ("test", "scenario", "test_function", "rejection_rate", "mc_se")
TUNING_HEADER = ("scenario", "k", "delta", "rejection_rate", "mc_se")


def table_rows(cells):
    return [
        (c.test, c.scenario, c.test_function, c.rate, c.mc_se) for c in cells
    ]


def tuning_rows(cells):
    return [(c.scenario, c.k, c.delta, c.rate, c.mc_se) for c in cells]
