"""
State files: a line-oriented text format and an equivalent json document.

Text format (see specs/state-file-format.md)::

    # comments (a '#' opening a token) and blank lines are ignored
    label thermal1
    n 1
    mean
    0 0
    cov
    3 0
    0 3

Numbers are written with 17 significant digits so that re-parsing reproduces
the moments bit for bit.
"""

import json
import re
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
from pydantic import ValidationError

from ..config import Settings
from ..errors import ParseError
from ..models import GaussianState, StateFile, StateRecipe
from .symplectic import gaussian_state

JSON_FORMAT = "gaussfid-state/1"
TEXT_HEADER = "# gaussfid state v1"

# a quoted string, or a '#' that opens a token
_COMMENT_OR_QUOTE = re.compile(r'("(?:[^"\\]|\\.)*")|(?:^|(?<=\s))#')


def _number(token: str, line: int, field: str) -> float:
    try:
        value = float(token)
    except ValueError:
        raise ParseError(f"not a number: {token!r}", line=line, field=field)
    return value


def _strip_comment(raw: str) -> str:
    for match in _COMMENT_OR_QUOTE.finditer(raw):
        if match.group(1) is None:
            return raw[:match.start()]
    return raw


def _parse_label(rest: str, line: int) -> Optional[str]:
    if not rest.startswith('"'):
        return rest or None
    try:
        label = json.loads(rest)
    except ValueError:
        raise ParseError(f"bad quoted label {rest!r}", line=line, field="label")
    if not isinstance(label, str):
        raise ParseError(f"bad quoted label {rest!r}", line=line, field="label")
    return label or None


def _format_label(label: str) -> str:
    plain = label == label.strip() and not label.startswith('"') and label.splitlines() == [label]
    if plain and _strip_comment(label) == label:
        return label
    return json.dumps(label)


def _meaningful_lines(text: str) -> List[Tuple[int, str]]:
    out = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        content = _strip_comment(raw).strip()
        if content:
            out.append((lineno, content))
    return out


def parse_text(text: str) -> StateFile:
    """Parse the line-oriented format into a StateFile (no physics checks)."""
    lines = _meaningful_lines(text)
    n: Optional[int] = None
    label: Optional[str] = None
    mean: Optional[List[float]] = None
    cov: Optional[List[List[float]]] = None

    i = 0
    while i < len(lines):
        lineno, content = lines[i]
        keyword, _, rest = content.partition(" ")
        rest = rest.strip()
        i += 1

        if keyword == "label":
            label = _parse_label(rest, lineno)
        elif keyword == "n":
            if n is not None:
                raise ParseError("duplicate section", line=lineno, field="n")
            try:
                n = int(rest)
            except ValueError:
                raise ParseError(f"mode count must be an integer, got {rest!r}", line=lineno, field="n")
            if n < 1:
                raise ParseError(f"mode count must be positive, got {n}", line=lineno, field="n")
        elif keyword == "mean":
            if n is None:
                raise ParseError("'n' must precede 'mean'", line=lineno, field="mean")
            if mean is not None:
                raise ParseError("duplicate section", line=lineno, field="mean")
            tokens = [(lineno, t) for t in rest.split()]
            while len(tokens) < 2 * n and i < len(lines) and _is_numeric_line(lines[i][1]):
                tokens.extend((lines[i][0], t) for t in lines[i][1].split())
                i += 1
            if len(tokens) != 2 * n:
                raise ParseError(f"mean needs {2 * n} values, found {len(tokens)}", line=lineno, field="mean")
            mean = [_number(t, ln, "mean") for ln, t in tokens]
        elif keyword == "cov":
            if n is None:
                raise ParseError("'n' must precede 'cov'", line=lineno, field="cov")
            if cov is not None:
                raise ParseError("duplicate section", line=lineno, field="cov")
            cov = []
            for row in range(2 * n):
                if i >= len(lines) or not _is_numeric_line(lines[i][1]):
                    raise ParseError(f"cov needs {2 * n} rows, found {row}", line=lineno, field="cov")
                row_line, row_content = lines[i]
                values = [_number(t, row_line, "cov") for t in row_content.split()]
                if len(values) != 2 * n:
                    raise ParseError(f"cov row needs {2 * n} values, found {len(values)}", line=row_line, field="cov")
                cov.append(values)
                i += 1
        else:
            raise ParseError(f"unknown section {keyword!r}", line=lineno, field=keyword)

    for name, value in (("n", n), ("mean", mean), ("cov", cov)):
        if value is None:
            raise ParseError("missing section", field=name)
    return StateFile(n=n, mean=mean, cov=cov, label=label)


def _is_numeric_line(content: str) -> bool:
    head = content.split()[0]
    try:
        float(head)
    except ValueError:
        return False
    return True


def parse_json(text: str) -> StateFile:
    """Parse the json variant into a StateFile (no physics checks)."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"invalid json: {e.msg}", line=e.lineno)
    if not isinstance(data, dict):
        raise ParseError("json state must be an object")
    fmt = data.pop("format", JSON_FORMAT)
    if fmt != JSON_FORMAT:
        raise ParseError(f"unsupported format {fmt!r}", field="format")
    try:
        doc = StateFile.model_validate(data)
    except ValidationError as e:
        err = e.errors()[0]
        raise ParseError(err["msg"], field=".".join(str(x) for x in err["loc"]))
    if len(doc.mean) != 2 * doc.n:
        raise ParseError(f"mean needs {2 * doc.n} values, found {len(doc.mean)}", field="mean")
    if len(doc.cov) != 2 * doc.n or any(len(row) != 2 * doc.n for row in doc.cov):
        raise ParseError(f"cov must be {2 * doc.n}x{2 * doc.n}", field="cov")
    return doc


def load_state_file(path: Union[str, Path]) -> StateFile:
    """Read a state file in either format; json is detected by suffix or a leading '{'."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ParseError(f"cannot read {path}: {e.strerror}")
    if path.suffix.lower() == ".json" or text.lstrip().startswith("{"):
        return parse_json(text)
    return parse_text(text)


def to_state(doc: StateFile, settings: Optional[Settings] = None) -> GaussianState:
    return gaussian_state(doc.mean, doc.cov, label=doc.label, settings=settings)


def parse_state(path: Union[str, Path], settings: Optional[Settings] = None) -> GaussianState:
    """
    Read and validate a state file.

    Args:
        path: Text or json state file

    Returns:
        Validated GaussianState; a missing label defaults to the file stem

    Raises:
        ParseError: malformed file, with line and field where known
        PhysicalityError: unphysical covariance matrix, carrying the ValidationReport
    """
    doc = load_state_file(path)
    if doc.label is None:
        doc = doc.model_copy(update={"label": Path(path).stem})
    return to_state(doc, settings)


def state_from_dict(data: Dict[str, Any], settings: Optional[Settings] = None) -> GaussianState:
    """Validated GaussianState from a json-style mapping (MCP parameters)."""
    return to_state(parse_json(json.dumps(data)), settings)


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def format_text(state: GaussianState) -> str:
    lines = [TEXT_HEADER]
    if state.label:
        lines.append(f"label {_format_label(state.label)}")
    lines.append(f"n {state.n}")
    lines.append("mean")
    lines.append(" ".join(_fmt(x) for x in state.mean))
    lines.append("cov")
    lines.extend(" ".join(_fmt(x) for x in row) for row in state.cov)
    return "\n".join(lines) + "\n"


def state_to_dict(state: GaussianState, recipe: Optional[StateRecipe] = None) -> Dict[str, Any]:
    data: Dict[str, Any] = {"format": JSON_FORMAT, "n": state.n}
    if state.label:
        data["label"] = state.label
    data["mean"] = [float(x) for x in state.mean]
    data["cov"] = np.asarray(state.cov, dtype=np.float64).tolist()
    if recipe is not None:
        data["recipe"] = recipe.model_dump(mode="json", exclude_none=True)
    return data


def write_state(
    state: GaussianState,
    path: Union[str, Path],
    fmt: str = "text",
    recipe: Optional[StateRecipe] = None,
) -> Path:
    """Write a state in the text or json format."""
    path = Path(path)
    if fmt == "json":
        path.write_text(json.dumps(state_to_dict(state, recipe), indent=2) + "\n", encoding="utf-8")
    elif fmt == "text":
        if recipe is not None:
            raise ValueError("recipes are only stored in the json format")
        path.write_text(format_text(state), encoding="utf-8")
    else:
        raise ValueError(f"unknown state format {fmt!r}")
    return path
