"""Execute a test plan against fresh chains and measure how closely the
replay tracks the recorded history.

Each run starts from its own genesis; every transaction step is
submitted and then mined explicitly with the timestamp its schedule
dictates (the historic schedule reproduces the recorded timestamps).
Steps whose historic transaction failed are forced to fail by sending
them from an account the chain does not know; an empty block is still
mined so block numbering stays aligned with history.

Accuracy is prefix-based: counting stops at the first step whose
replayed outcome disagrees with the recorded one.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Union

from .addresses import Address, ILLEGAL_SENDER
from .chain import (
    ChainError, EventRecord, STATUS_FAILED, STATUS_SUCCESS, WorldState,
    genesis, make_call_tx, make_create_tx,
)
from .mcl import MclError, compile_unit
from .mcl.ast import T_ADDRESS
from .scriptgen import (
    AddressMap, CONTRACT_PLACEHOLDER, GetterProbe, TestPlan, TxStep,
    normalize_event,
)
from .wire import encode_value, event_to_json, type_of_value

CATEGORY_FAILED = "failed"
CATEGORY_INTERMEDIATE = "intermediate"
CATEGORY_PERFECT = "perfect"
CATEGORIES = (CATEGORY_FAILED, CATEGORY_INTERMEDIATE, CATEGORY_PERFECT)


class ReplayError(Exception):
    pass


# ── timestamp schedules ──────────────────────────────────────────────────────


@dataclass(frozen=True)
class HistoricSchedule:
    """Replay every step at its recorded timestamp."""

    def deploy_timestamp(self, plan: TestPlan) -> int:
        return plan.deploy.timestamp

    def tx_timestamp(self, plan: TestPlan, index: int) -> int:
        return plan.tx_steps[index].timestamp

    def describe(self) -> str:
        return "historic"


@dataclass(frozen=True)
class SequentialSchedule:
    """Timestamps form the sequence start, start+stride, ..."""

    start: int
    stride: int

    def deploy_timestamp(self, plan: TestPlan) -> int:
        return self.start

    def tx_timestamp(self, plan: TestPlan, index: int) -> int:
        return self.start + self.stride * index

    def describe(self) -> str:
        return f"sequential_{self.start}_{self.stride}"


@dataclass(frozen=True)
class OffsetSchedule:
    """Historic timestamps shifted by a constant."""

    delta: int

    def deploy_timestamp(self, plan: TestPlan) -> int:
        return plan.deploy.timestamp + self.delta

    def tx_timestamp(self, plan: TestPlan, index: int) -> int:
        return plan.tx_steps[index].timestamp + self.delta

    def describe(self) -> str:
        return f"offset_{self.delta}"


@dataclass(frozen=True)
class ExplicitSchedule:
    """One caller-chosen timestamp per transaction step; the deploy
    shares the first entry."""

    timestamps: tuple[int, ...]

    def deploy_timestamp(self, plan: TestPlan) -> int:
        return self.timestamps[0]

    def tx_timestamp(self, plan: TestPlan, index: int) -> int:
        return self.timestamps[index]

    def describe(self) -> str:
        return "explicit"


Schedule = Union[HistoricSchedule, SequentialSchedule, OffsetSchedule,
                 ExplicitSchedule]


def parse_schedule(text: str) -> Schedule:
    """Parse a schedule spec: ``historic``, ``sequential:<start>:<stride>``,
    ``offset:<delta>``, or ``file:<path>`` (one timestamp per line)."""
    if text == "historic":
        return HistoricSchedule()
    if text.startswith("sequential:"):
        _, start, stride = text.split(":")
        return SequentialSchedule(int(start), int(stride))
    if text.startswith("offset:"):
        return OffsetSchedule(int(text.split(":", 1)[1]))
    if text.startswith("file:"):
        path = text.split(":", 1)[1]
        with open(path, encoding="utf-8") as handle:
            stamps = tuple(int(line) for line in handle if line.strip())
        return ExplicitSchedule(stamps)
    raise ValueError(f"unknown schedule {text!r}")


@dataclass
class RunConfig:
    runs: int = 5
    schedule: Schedule = field(default_factory=HistoricSchedule)
    gas_price: int = 0
    endowment: int = 10 ** 24

    def __post_init__(self) -> None:
        if self.runs < 1:
            raise ValueError("need at least one run")
        if isinstance(self.schedule, str):
            self.schedule = parse_schedule(self.schedule)


# ── run records ──────────────────────────────────────────────────────────────


@dataclass
class StepOutcome:
    index: int
    kind: str  # deploy | tx | getter
    executed: bool
    status: Optional[str] = None
    gas_used: Optional[int] = None
    events: list[EventRecord] = field(default_factory=list)
    balances: dict[str, int] = field(default_factory=dict)
    failure_reason: Optional[str] = None
    values: Optional[list] = None
    tx_hash: Optional[str] = None

    def to_json(self) -> dict:
        return {
            "index": self.index,
            "kind": self.kind,
            "executed": self.executed,
            "status": self.status,
            "gas_used": self.gas_used,
            "events": [event_to_json(e) for e in self.events],
            "balances": {k: str(v) for k, v in sorted(self.balances.items())},
            "failure_reason": self.failure_reason,
            "values": self.values,
            "tx_hash": self.tx_hash,
        }


@dataclass
class ReplayRun:
    run_index: int
    deploy_ok: bool
    deploy_outcome: StepOutcome
    outcomes: list[StepOutcome]
    getter_outcomes: list[StepOutcome]
    resolved_map: AddressMap
    chain: WorldState = field(repr=False, default=None)

    def to_json_lines(self) -> list[dict]:
        lines = [self.deploy_outcome.to_json()]
        lines.extend(o.to_json() for o in self.outcomes)
        lines.extend(o.to_json() for o in self.getter_outcomes)
        for line in lines:
            line["run"] = self.run_index
        return lines


# ── execution ────────────────────────────────────────────────────────────────


def _resolve(address: Address, deployed: Optional[Address]) -> Address:
    if address == CONTRACT_PLACEHOLDER:
        if deployed is None:
            raise ReplayError("contract placeholder used before deployment")
        return deployed
    return address


def _resolve_args(args: list, arg_types: list[str],
                  deployed: Optional[Address]) -> list:
    resolved = []
    for semtype, value in zip(arg_types, args):
        if semtype == T_ADDRESS:
            resolved.append(_resolve(value, deployed))
        else:
            resolved.append(value)
    return resolved


def replay(plan: TestPlan, config: RunConfig, run_index: int) -> ReplayRun:
    """One replay run on a fresh chain."""
    try:
        unit = compile_unit(plan.source_text)
    except MclError as exc:
        raise ReplayError(f"plan source does not compile: {exc}") from exc

    endowments = []
    seen = set()
    for address in plan.address_map.replay:
        if address == CONTRACT_PLACEHOLDER or address in seen:
            continue
        seen.add(address)
        endowments.append((address, config.endowment))
    state = genesis(endowments, gas_price=config.gas_price)

    schedule = config.schedule
    deploy = plan.deploy
    deploy_tx = make_create_tx(deploy.from_, unit, deploy.contract,
                               _resolve_args(deploy.args, deploy.arg_types,
                                             None),
                               value=deploy.value,
                               gas_limit=deploy.gas_limit)
    state.submit(deploy_tx)
    _, receipts = state.mine_block(schedule.deploy_timestamp(plan))
    receipt = receipts[0]
    deploy_ok = receipt.status == STATUS_SUCCESS
    deployed = receipt.created
    deploy_outcome = StepOutcome(
        index=-1, kind="deploy", executed=True, status=receipt.status,
        gas_used=receipt.gas_used, events=list(receipt.events),
        failure_reason=receipt.failure_reason, tx_hash=deploy_tx.hash)
    resolved_map = (plan.address_map.with_contract(deployed)
                    if deployed is not None else plan.address_map)

    run = ReplayRun(run_index=run_index, deploy_ok=deploy_ok,
                    deploy_outcome=deploy_outcome, outcomes=[],
                    getter_outcomes=[], resolved_map=resolved_map,
                    chain=state)
    if not deploy_ok:
        return run

    for step in plan.tx_steps:
        run.outcomes.append(_run_tx_step(state, plan, step, deployed,
                                         schedule))
    for index, probe in enumerate(plan.getter_probes):
        run.getter_outcomes.append(
            _run_getter(state, probe, index, deployed))
    return run


def _run_tx_step(state: WorldState, plan: TestPlan, step: TxStep,
                 deployed: Address, schedule: Schedule) -> StepOutcome:
    timestamp = schedule.tx_timestamp(plan, step.index)
    to = _resolve(step.to, deployed)
    outcome = StepOutcome(index=step.index, kind="tx", executed=True)
    try:
        tx = make_call_tx(step.from_, to, step.method,
                          _resolve_args(step.args, step.arg_types, deployed),
                          value=step.value, gas_limit=step.gas_limit)
        state.submit(tx)
        outcome.tx_hash = tx.hash
    except ChainError as exc:
        # the forced-failure path: the sender is unknown to the chain
        outcome.status = STATUS_FAILED
        outcome.failure_reason = str(exc)
        block, _ = state.mine_block(timestamp)
    else:
        block, receipts = state.mine_block(timestamp)
        receipt = receipts[0]
        outcome.status = receipt.status
        outcome.gas_used = receipt.gas_used
        outcome.events = list(receipt.events)
        outcome.failure_reason = receipt.failure_reason
    for address in step.balance_queries:
        resolved = _resolve(address, deployed)
        outcome.balances[resolved.hex()] = state.balance_at(resolved,
                                                            block.number)
    return outcome


def _run_getter(state: WorldState, probe: GetterProbe, index: int,
                deployed: Address) -> StepOutcome:
    outcome = StepOutcome(index=index, kind="getter", executed=True)
    try:
        values = state.call_pure(deployed, probe.method,
                                 _resolve_args(probe.args, probe.arg_types,
                                               deployed))
        outcome.status = STATUS_SUCCESS
        outcome.values = [encode_value(type_of_value(v), v) for v in values]
    except Exception as exc:  # noqa: BLE001 - getter probes must not abort runs
        outcome.status = STATUS_FAILED
        outcome.failure_reason = str(exc)
    return outcome


def replay_all(plan: TestPlan, config: RunConfig) -> list[ReplayRun]:
    return [replay(plan, config, i) for i in range(config.runs)]


# ── accuracy ─────────────────────────────────────────────────────────────────


@dataclass(frozen=True)
class AccuracyResult:
    kind: str  # status | event
    prefix_len: int
    total: int
    ratio: Fraction
    category: str

    def describe(self) -> str:
        return (f"{self.kind} accuracy {self.prefix_len}/{self.total} "
                f"({self.category})")


def _result(kind: str, prefix: int, total: int, deploy_ok: bool
            ) -> AccuracyResult:
    if not deploy_ok:
        category = CATEGORY_FAILED
    elif prefix == total:
        category = CATEGORY_PERFECT
    else:
        category = CATEGORY_INTERMEDIATE
    if total > 0:
        ratio = Fraction(prefix, total)
    else:
        ratio = Fraction(1, 1) if deploy_ok else Fraction(0, 1)
    return AccuracyResult(kind, prefix, total, ratio, category)


def status_agrees(step: TxStep, outcome: StepOutcome) -> bool:
    if outcome.status == step.expected_status:
        return True
    # a forced failure replaces the historic failure mode; any
    # non-success termination counts as agreement
    return step.force_fail and outcome.status != STATUS_SUCCESS


def status_accuracy(run: ReplayRun, plan: TestPlan) -> AccuracyResult:
    total = plan.tx_count
    if not run.deploy_ok:
        return _result("status", 0, total, False)
    prefix = total
    for step, outcome in zip(plan.tx_steps, run.outcomes):
        if not status_agrees(step, outcome):
            prefix = step.index
            break
    return _result("status", prefix, total, True)


def event_agrees(step: TxStep, outcome: StepOutcome,
                 address_map: AddressMap) -> bool:
    if (step.expected_status == STATUS_SUCCESS
            and outcome.status != STATUS_SUCCESS):
        # the replay produced no output where history had some
        return False
    expected = sorted(normalize_event(e, address_map)
                      for e in step.expected_events)
    observed = sorted(normalize_event(e, address_map)
                      for e in outcome.events)
    return expected == observed


def event_accuracy(run: ReplayRun, plan: TestPlan) -> AccuracyResult:
    total = plan.tx_count
    if not run.deploy_ok:
        return _result("event", 0, total, False)
    prefix = total
    for step, outcome in zip(plan.tx_steps, run.outcomes):
        if not event_agrees(step, outcome, run.resolved_map):
            prefix = step.index
            break
    return _result("event", prefix, total, True)


# ── output matrices ──────────────────────────────────────────────────────────


@dataclass
class OutputMatrix:
    """One tracked output as a (transaction steps × runs) table."""

    name: str
    cells: list[list[object]]  # cells[step][run]; None marks absent

    @property
    def rows(self) -> int:
        return len(self.cells)

    @property
    def cols(self) -> int:
        return len(self.cells[0]) if self.cells else 0

    def column(self, run: int) -> list[object]:
        return [row[run] for row in self.cells]

    def values(self) -> list[object]:
        return [v for row in self.cells for v in row if v is not None]


def _tracked_value(outcome: StepOutcome, tracked: str) -> object:
    if tracked == "gas":
        return outcome.gas_used
    if tracked == "status":
        return outcome.status
    if tracked.startswith("event:"):
        wanted = tracked.split(":", 1)[1]
        for event in outcome.events:
            for name, semtype, value in event.params:
                if name == wanted:
                    if isinstance(value, Address):
                        return value.hex()
                    if isinstance(value, bytes):
                        return "0x" + value.hex()
                    return value
        return None
    if tracked.startswith("balance:"):
        return outcome.balances.get(tracked.split(":", 1)[1])
    raise ValueError(f"unknown tracked output {tracked!r}")


def collect_matrices(runs: list[ReplayRun], tracked: list[str]
                     ) -> list[OutputMatrix]:
    """One (steps × runs) table per tracked output. Cells stay empty
    where a step did not execute or did not produce the output."""
    if not runs:
        return []
    steps = max(len(run.outcomes) for run in runs)
    for run in runs:
        if run.outcomes and len(run.outcomes) != steps:
            raise ReplayError("runs disagree on step count")
    matrices = []
    for name in tracked:
        cells = []
        for step_index in range(steps):
            row = []
            for run in runs:
                if step_index < len(run.outcomes):
                    row.append(_tracked_value(run.outcomes[step_index], name))
                else:
                    row.append(None)
            cells.append(row)
        matrices.append(OutputMatrix(name, cells))
    return matrices


def tracked_event_params(plan: TestPlan) -> list[str]:
    """Every event parameter name the plan's history mentions."""
    names: list[str] = []
    for step in plan.tx_steps:
        for event in step.expected_events:
            for name, _semtype, _value in event.params:
                if name not in names:
                    names.append(name)
    return names
