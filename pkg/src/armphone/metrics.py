"""Benchmark metrics: success rate, completion rate and step efficiency.

For task i with golden (human) step count H_i:

* SR  = S_n / N over a task set;
* CR_i = min(1, A_i / H_i) with A_i the agent's successful steps, CR = mean(CR_i);
* SE_i = H_i / T_i over successful tasks only, with T_i the steps the agent
  took, SE = mean(SE_i). A set with no successes has no SE (shown as ``-``).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence


@dataclass(frozen=True)
class TaskOutcome:
    task_id: str
    success: bool
    agent_steps_successful: int
    agent_steps_total: int
    diagnostics: str = ""

    def __post_init__(self):
        if self.agent_steps_successful < 0:
            raise ValueError("agent_steps_successful must be >= 0")
        if self.agent_steps_total < self.agent_steps_successful:
            raise ValueError("agent_steps_total must be >= agent_steps_successful")
        if self.success and self.agent_steps_successful < 1:
            raise ValueError("a successful task needs at least one successful step")

    def to_json(self) -> dict:
        return {
            "task_id": self.task_id,
            "success": self.success,
            "agent_steps_successful": self.agent_steps_successful,
            "agent_steps_total": self.agent_steps_total,
            "diagnostics": self.diagnostics,
        }


def _golden(tasks, task_id: str) -> int:
    t = tasks[task_id]
    h = t if isinstance(t, int) else t.golden_steps
    if h < 1:
        raise ValueError(f"task {task_id!r} has golden_steps {h}")
    return h


def _as_map(tasks) -> Mapping:
    if isinstance(tasks, Mapping):
        return tasks
    return {t.task_id: t for t in tasks}


def success_rate(outcomes: Sequence[TaskOutcome]) -> tuple[int, int, float]:
    n = len(outcomes)
    if n == 0:
        raise ValueError("success rate of an empty outcome set")
    s = sum(1 for o in outcomes if o.success)
    return s, n, s / n


def completion_rate(outcomes: Sequence[TaskOutcome], tasks) -> tuple[dict[str, float], float]:
    if not outcomes:
        raise ValueError("completion rate of an empty outcome set")
    tasks = _as_map(tasks)
    per_task = {
        o.task_id: min(1.0, o.agent_steps_successful / _golden(tasks, o.task_id)) for o in outcomes
    }
    return per_task, sum(per_task.values()) / len(per_task)


def step_efficiency(outcomes: Sequence[TaskOutcome], tasks) -> tuple[dict[str, float], Optional[float]]:
    """Per-task and mean step efficiency over successes; ``None`` when there are none."""
    tasks = _as_map(tasks)
    per_task = {
        o.task_id: _golden(tasks, o.task_id) / o.agent_steps_total for o in outcomes if o.success
    }
    if not per_task:
        return per_task, None
    return per_task, sum(per_task.values()) / len(per_task)


@dataclass(frozen=True)
class MetricsRow:
    group: tuple  # ((key, value), ...)
    n: int
    successes: int
    cr: float
    se: Optional[float]

    @property
    def sr(self) -> float:
        return self.successes / self.n

    def to_json(self) -> dict:
        return {
            "group": dict(self.group),
            "n": self.n,
            "sr": {"numerator": self.successes, "denominator": self.n, "ratio": self.sr},
            "cr": self.cr,
            "se": self.se if self.se is not None else "-",
        }


def metrics_row(group: dict, outcomes: Sequence[TaskOutcome], tasks) -> MetricsRow:
    s, n, _ = success_rate(outcomes)
    _, cr = completion_rate(outcomes, tasks)
    _, se = step_efficiency(outcomes, tasks)
    return MetricsRow(tuple(group.items()), n, s, cr, se)


GROUPINGS = ((), ("set",), ("set", "level"), ("set", "category"), ("set", "category", "level"))


@dataclass
class MetricsReport:
    rows: list = field(default_factory=list)

    def find(self, **group) -> MetricsRow:
        key = tuple(group.items())
        for row in self.rows:
            if row.group == key:
                return row
        raise KeyError(group)

    def to_json(self) -> dict:
        return {"report_version": 1, "rows": [r.to_json() for r in self.rows]}

    def to_text(self) -> str:
        header = ("group", "SR", "ratio", "CR", "SE")
        lines = []
        for r in self.rows:
            label = " / ".join(str(v) for _, v in r.group) or "all"
            se = f"{r.se:.3f}" if r.se is not None else "-"
            lines.append((label, f"{r.successes}/{r.n}", f"{r.sr:.3f}", f"{r.cr:.3f}", se))
        widths = [max(len(x[i]) for x in [header] + lines) for i in range(len(header))]
        fmt = "  ".join(f"{{:{'<' if i == 0 else '>'}{w}}}" for i, w in enumerate(widths))
        out = [fmt.format(*header), fmt.format(*("-" * w for w in widths))]
        out += [fmt.format(*row) for row in lines]
        return "\n".join(out) + "\n"


def aggregate(outcomes: Iterable[TaskOutcome], tasks) -> MetricsReport:
    """Overall row, then rows per set, set x level, set x category and set x category x level."""
    tasks = _as_map(tasks)
    outcomes = list(outcomes)
    report = MetricsReport()
    for keys in GROUPINGS:
        groups: dict[tuple, list] = {}
        for o in outcomes:
            t = tasks[o.task_id]
            values = tuple(getattr(t, k) for k in keys)
            if "level" in keys and t.level is None:
                continue
            groups.setdefault(values, []).append(o)
        for values in sorted(groups, key=lambda v: tuple(str(x) for x in v)):
            report.rows.append(metrics_row(dict(zip(keys, values)), groups[values], tasks))
    return report

