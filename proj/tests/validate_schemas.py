"""Validates sample inputs and live CLI reports against the schema files."""

import json
import pathlib
import subprocess
import sys

import jsonschema
from referencing import Registry, Resource


def main(binary: str, root: str) -> int:
    root_path = pathlib.Path(root)
    schemas = {}
    for path in sorted((root_path / "schemas").glob("shellquad.*.v1.json")):
        schemas[path.name.split(".")[1]] = json.loads(path.read_text())
    registry = Registry().with_resources(
        [(doc["$id"], Resource.from_contents(doc)) for doc in schemas.values()]
    )

    def check(kind: str, document: dict, label: str) -> None:
        validator = jsonschema.Draft202012Validator(schemas[kind], registry=registry)
        validator.validate(document)
        print(f"ok  {kind:8s} {label}")

    samples = root_path / "samples"
    check("sequence", json.loads((samples / "sequence.json").read_text()), "samples/sequence.json")
    for name in ("term.json", "term_odd.json"):
        check("term", json.loads((samples / name).read_text()), f"samples/{name}")
    check("states", json.loads((samples / "states.json").read_text()), "samples/states.json")

    runs = [
        ["gradient-check", "--draws", "500"],
        ["singularity-scan", "--levels", "3", "--budget", "500"],
        ["evaluate", "--term", str(samples / "term.json"), "--sequence", str(samples / "sequence.json"),
         "--budget", "500"],
        ["evaluate", "--term", str(samples / "term_odd.json"), "--sequence", str(samples / "sequence.json")],
        ["lsz4", "--states", str(samples / "states.json"), "--budget", "500"],
    ]
    for args in runs:
        out = subprocess.run([binary, *args], capture_output=True, text=True, check=True)
        check("report", json.loads(out.stdout), " ".join(args[:1]))

    csv = subprocess.run([binary, "singularity-scan", "--levels", "2", "--budget", "200", "--format", "csv"],
                         capture_output=True, text=True, check=True).stdout
    columns = schemas["report"]["x-shell-csv-columns"]
    header = csv.splitlines()[0].split(",")
    if header != columns:
        print(f"CSV header {header} does not match schema columns {columns}")
        return 1
    print("ok  csv      header")
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv[1], sys.argv[2]))
