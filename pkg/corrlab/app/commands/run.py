"""`corrlab run`: one scenario file"""

from pathlib import Path

from ..services.scenario_service import exit_code, run_scenario
from ..utils.logging import logger
from ..utils.serialization import dump_report, render_text


def run_command(args) -> int:
    report = run_scenario(args.file, tol_override=args.tol, seed_override=args.seed)
    payload = report.model_dump(exclude_none=True)
    text = dump_report(payload) if args.report == "json" else render_text(payload) + "\n"
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text, encoding="utf-8")
        logger.log_step("report_written", {"path": str(out), "verdict": report.verdict})
    else:
        print(text, end="")
    return exit_code(report.verdict)
