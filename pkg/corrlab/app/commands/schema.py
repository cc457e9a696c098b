"""`corrlab schema`: JSON schema of a scenario payload"""

import json

from ..models.schemas import PAYLOADS, Scenario


def schema_command(args) -> int:
    model = Scenario if args.kind == "scenario" else PAYLOADS[args.kind]
    print(json.dumps(model.model_json_schema(), indent=2, sort_keys=True))
    return 0
