"""`corrlab suite`: every scenario in a directory"""

from ..services.scenario_service import run_suite
from ..utils.serialization import dump_report, render_text


def suite_command(args) -> int:
    report = run_suite(args.directory, jobs=args.jobs)
    payload = report.model_dump(exclude_none=True)
    if args.report == "json":
        print(dump_report(payload), end="")
    else:
        summary = {k: v for k, v in payload.items() if k != "reports"}
        summary["scenarios"] = {r["scenario"]: r["verdict"] for r in payload["reports"]}
        print(render_text(summary))
    return 0 if report.verdict == "pass" else 1
