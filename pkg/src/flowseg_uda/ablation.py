"""Architecture ablation grid: appearance-only baseline, then each fusion mode with and without flow supervision."""
from __future__ import annotations

import json
import traceback
from dataclasses import dataclass

from .errors import FlowSegError


@dataclass(frozen=True)
class AblationRow:
    name: str
    flow_branch: bool
    fusion: str | None
    flow_supervision: bool

    def overrides(self) -> dict:
        if not self.flow_branch:
            return {"flow_branch": False, "flow_supervision": False}
        return {"flow_branch": True, "fusion": self.fusion, "flow_supervision": self.flow_supervision}


ROWS = (
    AblationRow("baseline", False, None, False),
    AblationRow("flow+product", True, "product", False),
    AblationRow("flow+addition", True, "addition", False),
    AblationRow("flow+conv", True, "conv", False),
    AblationRow("flow+product+fs", True, "product", True),
    AblationRow("flow+addition+fs", True, "addition", True),
    AblationRow("flow+conv+fs", True, "conv", True),
)
ROW_NAMES = tuple(r.name for r in ROWS)


@dataclass
class AblationResult:
    row: AblationRow
    j_mean: float | None = None
    f_mean: float | None = None
    error: str | None = None
    exit_code: int = 0

    @property
    def ok(self) -> bool:
        return self.error is None


def select_rows(names=None) -> list[AblationRow]:
    if names is None:
        return list(ROWS)
    unknown = sorted(set(names) - set(ROW_NAMES))
    if unknown:
        from .errors import UsageError

        raise UsageError(f"unknown ablation rows {unknown}; choose from {list(ROW_NAMES)}")
    return [r for r in ROWS if r.name in set(names)]


def run_row(row: AblationRow, base_cfg, source, val, out_dir=None) -> AblationResult:
    """Train one variant and score it; failures are captured, never raised."""
    from .evaluate import evaluate_model
    from .train import train_supervised

    try:
        cfg = base_cfg.replace(regime="supervised", **row.overrides())
        model, _ = train_supervised(cfg, source, out_dir=out_dir)
        report = evaluate_model(model, val)
        if out_dir is not None:
            report.write(out_dir)
        return AblationResult(row, report.j_mean, report.f_mean)
    except FlowSegError as exc:
        return AblationResult(row, error=f"{type(exc).__name__}: {exc}", exit_code=exc.exit_code)
    except Exception as exc:  # noqa: BLE001 - keep going with the remaining rows
        return AblationResult(row, error="".join(traceback.format_exception_only(type(exc), exc)).strip(),
                              exit_code=3 if isinstance(exc, ArithmeticError) else 2)


def format_table(results: list[AblationResult]) -> str:
    lines = [f"{'variant':20}{'flow':>6}{'fusion':>10}{'fs':>5}{'J mean':>9}{'F mean':>9}"]
    for r in results:
        row = r.row
        flags = f"{'yes' if row.flow_branch else '-':>6}{row.fusion or '-':>10}{'yes' if row.flow_supervision else '-':>5}"
        if r.ok:
            lines.append(f"{row.name:20}{flags}{r.j_mean * 100:9.1f}{r.f_mean * 100:9.1f}")
        else:
            lines.append(f"{row.name:20}{flags}{'FAILED':>9}  {r.error}")
    return "\n".join(lines) + "\n"


def to_json(results: list[AblationResult]) -> str:
    return json.dumps([
        {"variant": r.row.name, "flow_branch": r.row.flow_branch, "fusion": r.row.fusion,
         "flow_supervision": r.row.flow_supervision, "j_mean": r.j_mean, "f_mean": r.f_mean,
         "error": r.error}
        for r in results
    ], indent=2)
