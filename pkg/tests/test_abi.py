import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from keccak_ref import keccak256 as ref_keccak
from svmfuzz.abi import (
    AbiError,
    FunctionSpec,
    constructor_of,
    decode_args,
    decode_call,
    encode_args,
    encode_call,
    fuzzable,
    parse_abi,
    parse_type,
    selector,
)
from svmfuzz.fixtures import load
from svmfuzz.hashing import keccak256

# frozen from the pure-Python reference in keccak_ref.py
SELECTORS = {
    "transfer(address,uint256)": "a9059cbb",
    "approve(address,uint256)": "095ea7b3",
    "transferFrom(address,address,uint256)": "23b872dd",
    "balanceOf(address)": "70a08231",
    "totalSupply()": "18160ddd",
    "allowance(address,address)": "dd62ed3e",
    "Try(string)": "3853682c",
    "start_quiz_game(string,string)": "b96d64fb",
    "StopGame()": "f50ab247",
    "NewQuestion(string,bytes32)": "3e3ee859",
    "withdraw(uint256)": "2e1a7d4d",
    "deposit()": "d0e30db0",
    "owner()": "8da5cb5b",
    "name()": "06fdde03",
    "symbol()": "95d89b41",
    "decimals()": "313ce567",
    "mint(address,uint256)": "40c10f19",
    "burn(uint256)": "42966c68",
    "setOwner(address)": "13af4035",
    "f(uint256)": "b3de648b",
    "g(bytes)": "c0b88415",
    "h(uint256[])": "40dcbb08",
    "set(int8,bool)": "2a5a202b",
    "kill()": "41c0e1b5",
}

KECCAK_EMPTY = "c5d2460186f7233c927e7db2dcc703c0e500b653ca82273b7bfad8045d85a470"


@pytest.mark.parametrize("sig,expected", sorted(SELECTORS.items()))
def test_selector_golden(sig, expected):
    assert selector(sig).hex() == expected


def test_selector_of_empty_string_is_keccak_prefix():
    assert selector("").hex() == KECCAK_EMPTY[:8]
    assert keccak256(b"").hex() == KECCAK_EMPTY


@settings(max_examples=200, deadline=None)
@given(st.binary(max_size=400))
def test_keccak_matches_reference(data):
    assert keccak256(data) == ref_keccak(data)


def test_quiz_abi():
    specs = load("quiz").specs
    funcs = [s for s in specs if not s.is_constructor]
    assert len(funcs) == 4
    assert constructor_of(specs).is_constructor
    by_name = {s.name: s for s in funcs}
    assert by_name["Try"].payable
    assert [s.name for s in fuzzable(specs)] == ["Try", "start_quiz_game", "StopGame"]


def test_view_function_is_excluded():
    specs = parse_abi('[{"type":"function","name":"f","inputs":[],"stateMutability":"view"}]')
    assert specs[0].excluded
    assert fuzzable(specs) == []


def test_legacy_constant_flag_is_excluded():
    specs = parse_abi('[{"type":"function","name":"f","inputs":[],"constant":true}]')
    assert specs[0].excluded


def test_empty_abi():
    assert parse_abi("[]") == []


def test_malformed_abi_reports_offset():
    with pytest.raises(AbiError, match="byte offset 13"):
        parse_abi('[{"type": "f"')
    # offsets count UTF-8 bytes, not characters
    with pytest.raises(AbiError, match="byte offset 15"):
        parse_abi("[{\"type\": \"\u00e9f\"".encode())


def test_unsupported_param_skipped(caplog):
    doc = [{"type": "function", "name": "t", "inputs": [{"type": "tuple"}]},
           {"type": "function", "name": "ok", "inputs": [{"type": "uint8"}]}]
    specs = parse_abi(json.dumps(doc))
    assert [s.name for s in specs] == ["ok"]
    assert "skipping" in caplog.text


def test_events_are_ignored():
    doc = [{"type": "event", "name": "E", "inputs": []}, {"type": "fallback"}]
    assert parse_abi(json.dumps(doc)) == []


def test_encode_single_uint():
    f = FunctionSpec("f", (parse_type("uint256"),))
    assert encode_call(f, [100]) == selector("f(uint256)") + (100).to_bytes(32, "big")


def test_encode_five_char_string():
    f = FunctionSpec("f", (parse_type("string"),))
    data = encode_call(f, [b"hello"])[4:]
    assert data[:32] == (0x20).to_bytes(32, "big")
    assert data[32:64] == (5).to_bytes(32, "big")
    assert data[64:96] == b"hello" + bytes(27)
    assert len(data) == 96


def test_dynamic_array_round_trip():
    t = (parse_type("uint256[]"),)
    assert decode_args(t, encode_args(t, [[1, 2 ** 255]])) == [[1, 2 ** 255]]


def test_out_of_range_rejected():
    with pytest.raises(AbiError):
        encode_args((parse_type("uint8"),), [256])
    with pytest.raises(AbiError):
        encode_args((parse_type("bytes"),), [bytes(256)])


def test_array_of_dynamic_rejected():
    with pytest.raises(AbiError):
        parse_type("string[]")


def _value(t):
    k = t.kind
    if k == "uint":
        return st.integers(0, (1 << t.bits) - 1)
    if k == "int":
        return st.integers(-(1 << (t.bits - 1)), (1 << (t.bits - 1)) - 1)
    if k == "address":
        return st.integers(0, (1 << 160) - 1)
    if k == "bool":
        return st.booleans()
    if k == "fixedbytes":
        return st.binary(min_size=t.bits, max_size=t.bits)
    if k in ("bytes", "string"):
        return st.binary(max_size=255)
    if t.length is None:
        return st.lists(_value(t.elem), max_size=8)
    return st.lists(_value(t.elem), min_size=t.length, max_size=t.length)


TYPE_NAMES = ["uint8", "uint256", "int16", "int256", "address", "bool", "bytes4", "bytes32",
              "bytes", "string", "uint256[]", "int8[3]", "address[]", "bool[2]"]


@st.composite
def typed_args(draw):
    names = draw(st.lists(st.sampled_from(TYPE_NAMES), max_size=5))
    types = tuple(parse_type(n) for n in names)
    return types, [draw(_value(t)) for t in types]


@settings(max_examples=300, deadline=None)
@given(typed_args())
def test_abi_round_trip(case):
    types, values = case
    f = FunctionSpec("f", types)
    assert decode_call(f, encode_call(f, values)) == values
