"""Bit-stable CSV/JSON emission and run manifests."""

from __future__ import annotations

import datetime as _dt
import json
import math
from typing import Iterable, Optional, Sequence

from . import __version__

CSV_SCHEMA_VERSION = 1
NA = "NA"


def fmt(v) -> str:
    """Render one cell: strings and integers verbatim, floats to 17 significant digits, None as NA."""
    if v is None:
        return NA
    if isinstance(v, str):
        return v
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, int):
        return str(v)
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return format(v, ".17g")


def sweep_columns(n: int) -> list:
    return (["snr_db", "snr", "n", "eps", "beta", "samples", "mse", "ci"]
            + [f"err_q_{i}" for i in range(1, n)]
            + ["err_e", "opta", "lemma4", "lemma5", "ziv", "theorem_ref"])


def sweep_record(row) -> dict:
    rec = {"snr_db": row.snr_db, "snr": row.snr, "n": int(row.n), "eps": row.eps,
           "beta": row.beta, "samples": int(row.samples), "mse": row.mse, "ci": row.ci_halfwidth}
    for i, v in enumerate(row.err_q, start=1):
        rec[f"err_q_{i}"] = v
    rec.update(err_e=row.err_e, opta=row.opta, lemma4=row.lemma4, lemma5=row.lemma5,
               ziv=row.ziv, theorem_ref=row.theorem_ref)
    return rec


def to_csv(records: Sequence[dict], columns: Sequence[str],
           trailer: Iterable[str] = ()) -> str:
    lines = [",".join(columns)]
    lines += [",".join(fmt(rec.get(c)) for c in columns) for rec in records]
    lines += [f"# {t}" for t in trailer]
    return "\n".join(lines) + "\n"


def _json_value(v):
    if v is None or isinstance(v, (bool, int, str)):
        return v
    v = float(v)
    if not math.isfinite(v):
        return fmt(v)
    return v


def to_json(records: Sequence[dict], columns: Sequence[str]) -> str:
    """JSON array, one object per row, keys in column order."""
    objs = [{c: _json_value(rec.get(c)) for c in columns} for rec in records]
    if not objs:
        return "[]\n"
    body = ",\n".join("  " + json.dumps(o) for o in objs)
    return "[\n" + body + "\n]\n"


def manifest(command: str, config: dict, seed: Optional[int], outputs: Sequence[str],
             argv: Sequence[str] = (), extra: Optional[dict] = None) -> dict:
    return {
        "command": command,
        "argv": list(argv),
        "config": config,
        "seed": seed,
        "version": __version__,
        "csv_schema": CSV_SCHEMA_VERSION,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "outputs": list(outputs),
        **(extra or {}),
    }


def write_output(path: str, text: str, man: dict) -> str:
    """Write ``text`` to ``path`` and the manifest next to it; returns the manifest path."""
    with open(path, "w", newline="\n") as fh:
        fh.write(text)
    mpath = path + ".manifest.json"
    with open(mpath, "w", newline="\n") as fh:
        json.dump(man, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return mpath
