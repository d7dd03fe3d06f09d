"""Fixture contracts: assembled bytecode, ABI and branch targets.

The assembled artifacts live in ``data/`` (one ``.hex`` init-code file, one
``.abi.json`` and one ``.meta.json`` per fixture) so that the CLI can be
pointed at them like at any other contract. ``python -m svmfuzz.fixtures``
regenerates them from :mod:`svmfuzz.fixtures.sources`.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

from svmfuzz.abi import parse_abi
from svmfuzz.coverage import RUNTIME, Branch
from svmfuzz.evm.asm import assemble, init_code
from svmfuzz.evm.hexio import read_hex
from svmfuzz.fixtures import sources

DATA_DIR = os.path.join(os.path.dirname(__file__), "data")


@dataclass
class BuiltFixture:
    name: str
    init_code: bytes
    runtime: bytes
    abi_json: str
    labels: dict
    targets: tuple  # runtime Branches
    oracle: str | None
    positive: bool
    attacker: str

    @property
    def specs(self):
        return parse_abi(self.abi_json)

    @property
    def bytecode_path(self):
        return os.path.join(DATA_DIR, f"{self.name}.hex")

    @property
    def abi_path(self):
        return os.path.join(DATA_DIR, f"{self.name}.abi.json")


def build(fx: sources.Fixture) -> BuiltFixture:
    runtime, labels = assemble(fx.runtime)
    code = init_code(runtime, fx.ctor)
    targets = tuple(Branch(RUNTIME, labels[t], labels[t] + 1) for t in fx.targets)
    return BuiltFixture(fx.name, code, runtime, json.dumps(fx.abi, indent=1), labels, targets,
                        fx.oracle, fx.positive, fx.attacker)


def write_all(directory=DATA_DIR):
    os.makedirs(directory, exist_ok=True)
    for fx in sources.ALL:
        b = build(fx)
        with open(os.path.join(directory, f"{b.name}.hex"), "w") as fh:
            fh.write(b.init_code.hex() + "\n")
        with open(os.path.join(directory, f"{b.name}.abi.json"), "w") as fh:
            fh.write(b.abi_json + "\n")
        meta = {"oracle": b.oracle, "positive": b.positive, "attacker": b.attacker,
                "targets": [[t.src, t.dst] for t in b.targets], "notes": fx.notes}
        with open(os.path.join(directory, f"{b.name}.meta.json"), "w") as fh:
            fh.write(json.dumps(meta, indent=1) + "\n")


def load(name) -> BuiltFixture:
    """Load a fixture from the data directory."""
    base = os.path.join(DATA_DIR, name)
    code = read_hex(base + ".hex")
    with open(base + ".abi.json") as fh:
        abi = fh.read()
    with open(base + ".meta.json") as fh:
        meta = json.load(fh)
    built = build(sources.BY_NAME[name])
    return BuiltFixture(name, code, built.runtime, abi, built.labels,
                        tuple(Branch(RUNTIME, s, d) for s, d in meta["targets"]),
                        meta["oracle"], meta["positive"], meta["attacker"])


def names():
    return [f.name for f in sources.ALL]
