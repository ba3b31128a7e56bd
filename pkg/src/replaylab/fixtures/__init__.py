"""Access to the bundled contract sources and recording scenarios."""

from __future__ import annotations

import json
from importlib import resources


def fixture_text(name: str) -> str:
    """Source text of a bundled .mcl file, e.g. ``minilotto.mcl``."""
    return (resources.files("replaylab.fixtures") / name).read_text("utf-8")


def scenario_document(name: str) -> dict:
    """A bundled scenario, e.g. ``minilotto`` → minilotto.scenario.json."""
    path = resources.files("replaylab.fixtures") / f"{name}.scenario.json"
    return json.loads(path.read_text("utf-8"))


def list_scenarios() -> list[str]:
    names = []
    for entry in resources.files("replaylab.fixtures").iterdir():
        if entry.name.endswith(".scenario.json"):
            names.append(entry.name[:-len(".scenario.json")])
    return sorted(names)


# Scenarios whose contracts depend on nothing outside themselves; a
# replay of their recorded history must match it exactly. Values are the
# deployment ids of the contracts to replay.
CLOSED_LOOP_FIXTURES: dict[str, tuple[str, ...]] = {
    "minilotto": ("lotto",),
    "tokenledger": ("ledger",),
    "gatedgame": ("game",),
    "timedraffle": ("raffle",),
    "counter": ("tally",),
    "factory": ("plant", "@created:build1"),
}

# The constructed statistics corpus: deployment ids of the twelve
# contracts, three per dependency condition (two carrying the
# dependency, one plain).
CORPUS_FIXTURE = "corpus12"
CORPUS_DEPLOY_IDS = (
    "raffle1", "raffle2", "dice", "eager", "board1", "board2",
    "vault1", "vault2", "tally1", "tally2", "tally3", "tally4",
)
