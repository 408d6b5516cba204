"""Runs the CLI on a tiny dataset and validates every artifact against the schemas in schemas/."""
import json
import pathlib
import shutil
import subprocess
import sys
import tempfile

import jsonschema

cli, schema_dir = pathlib.Path(sys.argv[1]), pathlib.Path(sys.argv[2])
schemas = {p.stem.split(".")[0]: json.loads(p.read_text()) for p in schema_dir.glob("*.schema.json")}

work = pathlib.Path(tempfile.mkdtemp(prefix="advblur-schemas-"))
config = {
    "out": str(work / "runs"),
    "data": {
        "root": str(work / "data"),
        "synth": {"height": 32, "width": 32, "train_per_family": 4, "val_per_family": 1, "test_per_family": 2,
                  "blend_radius_min": 6.0, "blend_radius_max": 9.0},
    },
    "train": {
        "epochs": 1,
        "batch_size": 4,
        "detector": {"height": 32, "width": 32, "widths": [4, 8]},
        "generator": {"height": 32, "width": 32, "base_width": 2, "res_blocks": 1},
    },
    "attack": {"max_samples": 4},
    "acceptance": {"gradient_cases": 1},
}
cfg = work / "exp.json"
cfg.write_text(json.dumps(config))


def run(*args):
    r = subprocess.run([str(cli), *args, "--config", str(cfg)], capture_output=True, text=True)
    if r.returncode != 0:
        sys.exit(f"{' '.join(args)} exited {r.returncode}: {r.stderr}")
    return pathlib.Path(r.stdout.strip().splitlines()[-1]) if r.stdout.strip() else None


def check(kind, doc, where):
    try:
        jsonschema.validate(doc, schemas[kind])
    except jsonschema.ValidationError as e:
        sys.exit(f"{where} violates {kind} schema: {e.message}")


run("synth")
for line in (work / "data" / "manifest.jsonl").read_text().splitlines():
    check("manifest", json.loads(line), "manifest.jsonl")

normal = run("train", "--regime", "normal")
twogen = run("train", "--regime", "bat_twogen")
for ck in list(normal.glob("*.ckpt.json")) + list(twogen.glob("*.ckpt.json")):
    check("checkpoint", json.loads(ck.read_text()), ck.name)

check("report", json.loads((run("attack", str(normal)) / "report.json").read_text()), "attack report")
check("report", json.loads((run("eval", str(normal), str(twogen)) / "report.json").read_text()), "eval report")

shutil.rmtree(work)
print("all artifacts match their schemas")
