"""Attribute-relation text export of the mining table.

Columns in order: ``model_name`` (string), one numeric column per part
attribute, the intrusion results, then ``class`` when present. Reals use the
shortest round-trip rendering, lines end in ``\\n``.
"""

from __future__ import annotations

import re

import numpy as np

from .._num import fmt_real
from ..errors import MiningError
from .table import MiningTable

_PLAIN = re.compile(r"[A-Za-z0-9_.\-]+\Z")
RESULT_PREFIX = "result."


def _quote(s: str) -> str:
    if _PLAIN.match(s):
        return s
    return "'" + s.replace("\\", "\\\\").replace("'", "\\'") + "'"


def _unquote(s: str) -> str:
    s = s.strip()
    if len(s) >= 2 and s[0] == "'" and s[-1] == "'":
        return re.sub(r"\\(.)", r"\1", s[1:-1])
    return s


def write_arff(table: MiningTable) -> str:
    out = [f"@relation {_quote(table.name)}", ""]
    out.append("@attribute model_name string")
    for a in table.attributes:
        out.append(f"@attribute {_quote(a)} numeric")
    for r in table.result_names:
        out.append(f"@attribute {_quote(RESULT_PREFIX + r)} numeric")
    if table.classes is not None:
        out.append("@attribute class {" + ",".join(table.class_labels) + "}")
    out += ["", "@data"]
    for i in range(table.n_rows):
        cells = [_quote(table.model_names[i])]
        cells += [fmt_real(v) for v in table.values[i]]
        cells += [fmt_real(v) for v in table.results[i]]
        if table.classes is not None:
            cells.append(table.classes[i])
        out.append(",".join(cells))
    return "\n".join(out) + "\n"


def _split_row(line):
    cells, cur, quoted, esc = [], [], False, False
    for ch in line:
        if esc:
            cur.append(ch)
            esc = False
        elif ch == "\\" and quoted:
            cur.append(ch)
            esc = True
        elif ch == "'":
            quoted = not quoted
            cur.append(ch)
        elif ch == "," and not quoted:
            cells.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    cells.append("".join(cur))
    return cells


def read_arff(text: str) -> MiningTable:
    """Parse a table written by :func:`write_arff`.

    Simulation ids are not part of the format; rows get ids ``row1``... and
    the model names are kept.
    """
    name = "table"
    cols: list[tuple[str, str]] = []
    data = []
    in_data = False
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("%"):
            continue
        low = line.lower()
        if in_data:
            data.append(_split_row(line))
        elif low.startswith("@relation"):
            name = _unquote(line[len("@relation"):])
        elif low.startswith("@attribute"):
            rest = line[len("@attribute"):].strip()
            if rest.startswith("'"):
                end = rest.index("'", 1)
                while rest[end - 1] == "\\":
                    end = rest.index("'", end + 1)
                aname, atype = _unquote(rest[:end + 1]), rest[end + 1:].strip()
            else:
                aname, atype = rest.split(None, 1)
            cols.append((aname, atype))
        elif low.startswith("@data"):
            in_data = True
        else:
            raise MiningError(f"unexpected line in table file: {raw!r}")

    names = [c[0] for c in cols]
    if not names or names[0] != "model_name":
        raise MiningError("table file must start with a model_name attribute")
    has_class = names[-1] == "class"
    class_labels = ()
    if has_class:
        spec = cols[-1][1]
        class_labels = tuple(s.strip() for s in spec.strip("{}").split(","))
    body = names[1:-1] if has_class else names[1:]
    attrs = [n for n in body if not n.startswith(RESULT_PREFIX)]
    results = [n[len(RESULT_PREFIX):] for n in body if n.startswith(RESULT_PREFIX)]

    models, vals, res, classes = [], [], [], []
    for row in data:
        if len(row) != len(names):
            raise MiningError(f"row has {len(row)} cells, expected {len(names)}")
        models.append(_unquote(row[0]))
        nums = [float(c) for c in row[1:1 + len(body)]]
        vals.append(nums[:len(attrs)])
        res.append(nums[len(attrs):])
        if has_class:
            classes.append(row[-1].strip())
    n = len(data)
    return MiningTable(
        name=name,
        simulation_ids=[f"row{i + 1}" for i in range(n)],
        model_names=models,
        attributes=attrs,
        values=np.array(vals, dtype=float).reshape(n, len(attrs)),
        result_names=results,
        results=np.array(res, dtype=float).reshape(n, len(results)),
        classes=classes if has_class else None,
        class_labels=class_labels,
    )
