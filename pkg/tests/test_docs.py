import dataclasses
import json
from pathlib import Path

from dasp.corr_structures import Kind
from dasp.io import SCHEMAS
from dasp.sim_harness import ScenarioSpec
from dasp.sim_harness.scenarios import COEF_SCHEMES

DOCS = Path(__file__).resolve().parent.parent / "docs"


def test_scenario_schema_matches_the_dataclass():
    schema = json.loads((DOCS / "scenario.schema.json").read_text())
    props = schema["properties"]
    fields = {f.name: f.default for f in dataclasses.fields(ScenarioSpec)}
    assert set(props) == set(fields)
    for name, default in fields.items():
        assert props[name]["default"] == default, name
    assert set(props["structure"]["enum"]) == {k.value for k in Kind}
    assert tuple(props["coef_scheme"]["enum"]) == COEF_SCHEMES


def test_schema_table_lists_every_layout():
    text = (DOCS / "schemas.md").read_text()
    for name, columns in SCHEMAS.items():
        row = next(line for line in text.splitlines() if line.startswith(f"| `{name}` |"))
        if columns:
            assert row.rstrip(" |").endswith(", ".join(columns)), name
