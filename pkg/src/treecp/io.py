"""Output writers: a header record followed by CSV rows or JSON lines.

Every file starts with a header carrying the resolved configuration, its
hash, the root seed and the package version. The thread count is left out
of the hash and the header so outputs do not depend on it.
"""
import csv
import hashlib
import json
import math

ESTIMATE_COLUMNS = ("op", "params", "value", "ci_lo", "ci_hi", "n", "censored", "seed")
EXCLUDED = ("threads", "output", "format")


def _clean(x):
    if hasattr(x, "item") and not isinstance(x, (list, tuple, dict)):
        x = x.item()
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    return x


def dumps(obj):
    return json.dumps(_clean(obj), sort_keys=True, separators=(",", ":"))


def config_hash(config):
    body = {k: v for k, v in config.items() if k not in EXCLUDED}
    return hashlib.sha256(dumps(body).encode()).hexdigest()[:16]


def header(config, version):
    body = {k: v for k, v in config.items() if k not in EXCLUDED}
    return {"header": True, "config": body, "config_hash": config_hash(config),
            "seed": config.get("seed"), "version": version}


class Writer:
    """Writes records in the order given; ``fmt`` is "csv" or "jsonl"."""

    def __init__(self, stream, fmt, head):
        if fmt not in ("csv", "jsonl"):
            raise ValueError(f"unknown output format {fmt!r}")
        self.stream = stream
        self.fmt = fmt
        self._csv = None
        self._cols = None
        if fmt == "jsonl":
            stream.write(dumps(head) + "\n")
        else:
            stream.write("# " + dumps(head) + "\n")

    def write(self, rec):
        if self.fmt == "jsonl":
            self.stream.write(dumps(rec) + "\n")
            return
        if self._csv is None:
            self._cols = list(ESTIMATE_COLUMNS) if set(rec) <= set(ESTIMATE_COLUMNS) else list(rec)
            self._csv = csv.DictWriter(self.stream, fieldnames=self._cols, lineterminator="\n",
                                       extrasaction="ignore")
            self._csv.writeheader()
        row = {}
        for k in self._cols:
            v = _clean(rec.get(k))
            row[k] = dumps(v) if isinstance(v, (dict, list)) else v
        self._csv.writerow(row)
