"""Model-definition documents (YAML or JSON).

Layout::

    A: [[0.5, 0.1], [0.0, 0.8]]
    C: [[1.0, 0.0]]
    Q: [[1.0, 0.0], [0.0, 1.0]]
    R: [[0.1]]
    deviations:
      - name: damping
        dA: [[0.1, 0.0], [0.0, 0.0]]
      - dR: [[0.05]]

Matrices are row-major nested lists; absent deviation blocks are zero.
"""

from __future__ import annotations

import yaml

from .errors import ModelFileError, StructuralError
from .model import ModelDeviation, StateSpaceModel

MATRIX_KEYS = ("A", "C", "Q", "R")
DEVIATION_KEYS = ("dA", "dC", "dQ", "dR")


def _line(node):
    return node.start_mark.line + 1


def _scalar(node, field):
    if not isinstance(node, yaml.ScalarNode):
        raise ModelFileError("expected a number", field, _line(node))
    try:
        return float(node.value)
    except ValueError:
        raise ModelFileError(f"not a number: {node.value!r}", field, _line(node)) from None


def _matrix(node, field):
    if not isinstance(node, yaml.SequenceNode) or not node.value:
        raise ModelFileError("expected a non-empty list of rows", field, _line(node))
    rows = []
    for i, row in enumerate(node.value):
        if not isinstance(row, yaml.SequenceNode):
            raise ModelFileError(f"row {i} is not a list", field, _line(row))
        rows.append([_scalar(v, f"{field}[{i}][{j}]") for j, v in enumerate(row.value)])
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        bad = next(i for i, r in enumerate(rows) if len(r) != len(rows[0]))
        raise ModelFileError(
            f"ragged array: row {bad} has {len(rows[bad])} entries, row 0 has {len(rows[0])}",
            field,
            _line(node.value[bad]),
        )
    return rows


def _mapping(node, field):
    if not isinstance(node, yaml.MappingNode):
        raise ModelFileError("expected a mapping", field, _line(node))
    out = {}
    for k, v in node.value:
        out[k.value] = v
    return out


def parse_model(text: str, source: str = "<string>"):
    """Parse a document into ``(StateSpaceModel, [ModelDeviation, ...])``."""
    try:
        root = yaml.compose(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ModelFileError(f"{source}: malformed document: {exc}", None,
                             mark.line + 1 if mark else None) from None
    if root is None:
        raise ModelFileError(f"{source}: empty document")
    top = _mapping(root, "<root>")
    mats = {}
    for key in MATRIX_KEYS:
        if key not in top:
            raise ModelFileError("missing required matrix", key, _line(root))
        mats[key] = _matrix(top[key], key)
    name = top["name"].value if "name" in top and isinstance(top["name"], yaml.ScalarNode) else ""
    try:
        model = StateSpaceModel(name=name, **mats)
    except StructuralError as exc:
        raise ModelFileError(str(exc), None, _line(root)) from None

    basis = []
    devs = top.get("deviations")
    if devs is not None:
        if not isinstance(devs, yaml.SequenceNode):
            raise ModelFileError("expected a list of deviations", "deviations", _line(devs))
        for i, dnode in enumerate(devs.value):
            field = f"deviations[{i}]"
            d = _mapping(dnode, field)
            unknown = set(d) - set(DEVIATION_KEYS) - {"name"}
            if unknown:
                raise ModelFileError(f"unknown keys {sorted(unknown)}", field, _line(dnode))
            blocks = {k: _matrix(d[k], f"{field}.{k}") for k in DEVIATION_KEYS if k in d}
            dname = d["name"].value if "name" in d else ""
            try:
                basis.append(ModelDeviation.for_model(model, name=dname, **blocks))
            except StructuralError as exc:
                raise ModelFileError(str(exc), field, _line(dnode)) from None
    return model, basis


def load_model(path):
    with open(path) as fh:
        return parse_model(fh.read(), str(path))


def dump_model(model: StateSpaceModel, basis=()) -> str:
    doc = {"name": model.name} if model.name else {}
    doc.update(model.to_dict())
    if basis:
        doc["deviations"] = []
        for dev in basis:
            entry = {"name": dev.name} if dev.name else {}
            for k in DEVIATION_KEYS:
                m = getattr(dev, k)
                if m.any():
                    entry[k] = m.tolist()
            doc["deviations"].append(entry)
    return yaml.safe_dump(doc, sort_keys=False, default_flow_style=None)
