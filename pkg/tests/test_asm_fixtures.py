import pytest

from svmfuzz.evm import opcodes as O
from svmfuzz.evm.asm import AsmError, assemble, disassemble, init_code
from svmfuzz.evm.hexio import parse_hex
from svmfuzz.fixtures import build, load, names, sources


def test_assemble_labels_and_widths():
    code, labels = assemble("PUSH 1 PUSH @end JUMP @end STOP")
    assert code[0] == O.PUSH1 and code[2] == O.PUSH1 + 1
    assert code[labels["end"]] == O.JUMPDEST
    assert assemble("PUSH4 1")[0] == bytes([O.PUSH1 + 3, 0, 0, 0, 1])
    assert assemble("PUSH -1")[0] == bytes([O.PUSH32]) + b"\xff" * 32


def test_assemble_errors():
    with pytest.raises(AsmError):
        assemble("FROB")
    with pytest.raises(AsmError):
        assemble("PUSH @nowhere")


def test_disassemble_round_trip():
    code, _ = assemble("PUSH 0x1234 DUP1 ADD STOP")
    text = disassemble(code)
    assert "PUSH2 0x1234" in text and "ADD" in text


def test_init_code_places_runtime_at_end():
    runtime, _ = assemble("PUSH 1 STOP")
    code = init_code(runtime)
    assert code.endswith(runtime)


def test_parse_hex_tolerates_prefix_and_whitespace():
    assert parse_hex("0x60 00\n") == b"\x60\x00"


@pytest.mark.parametrize("name", names())
def test_fixture_data_matches_sources(name):
    built = build(sources.BY_NAME[name])
    stored = load(name)
    assert stored.init_code == built.init_code
    assert stored.specs == built.specs
    assert stored.targets == built.targets
