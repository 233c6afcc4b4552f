"""The iotchain command line: exit codes, output shapes, artifact determinism."""

import filecmp
import json
import os

import pytest

from iotchain.cli import main
from iotchain.crypto import hash_data
from iotchain.merkle import build_tree, prove


GOLDEN_SIZES = [
    ("device-registration", "merkle", 79),
    ("entity-registration", "direct", 80),
    ("cancellation", "direct", 80),
    ("update-release-header", "merkle", 77),
    ("update-release-header", "direct", 77),
    ("update-query", "merkle", 5),
    ("device-storage", "direct", 112),
    ("permission-release", "merkle", 10),
    ("permission-request", "merkle", 82),
    ("permission-release-cross-region", "direct", 154),
    ("permission-request-cross-region", "direct", 154),
    ("local-batch-root", "direct", 109),
]


def test_sizes_prints_the_wire_table(capsys):
    assert main(["sizes"]) == 0
    rows = []
    for line in capsys.readouterr().out.strip().splitlines():
        name, mode, length = (part.strip() for part in line.split(","))
        rows.append((name, mode, int(length)))
    assert rows == GOLDEN_SIZES


def test_run_passing_scenario_exits_zero(capsys):
    assert main(["run", "--scenario", "baseline"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("PASS baseline (seed=0,")
    assert "[ok ]" in out


def test_run_unknown_scenario_exits_two(capsys):
    assert main(["run", "--scenario", "no-such-thing"]) == 2
    err = capsys.readouterr().err
    assert "error: unknown scenario 'no-such-thing'" in err
    assert "baseline" in err


def test_run_structured_output_is_one_json_line(capsys):
    assert main(["run", "--scenario", "baseline", "--format", "structured"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 1
    verdict = json.loads(lines[0])
    assert verdict["scenario"] == "baseline"
    assert verdict["passed"] is True


def test_run_needs_a_scenario_or_a_file():
    with pytest.raises(SystemExit):
        main(["run"])
    with pytest.raises(SystemExit):
        main(["run", "--scenario", "baseline", "--file", "x.json"])


def test_run_artifacts_are_bit_identical_across_reruns(tmp_path, capsys):
    first, second = str(tmp_path / "a"), str(tmp_path / "b")
    assert main(["run", "--scenario", "baseline", "--seed", "1",
                 "--out", first]) == 0
    assert main(["run", "--scenario", "baseline", "--seed", "1",
                 "--out", second]) == 0
    capsys.readouterr()
    names = sorted(os.listdir(first))
    assert names == sorted(os.listdir(second))
    assert "trace.txt" in names and "verdict.json" in names
    assert [n for n in names if n.startswith("ledger-rn-")]
    match, mismatch, errors = filecmp.cmpfiles(first, second, names, shallow=False)
    assert (sorted(match), mismatch, errors) == (names, [], [])


def test_run_scenario_file(tmp_path, capsys):
    plan = {
        "name": "two-stores",
        "world": {"regions": 4, "seed": 2},
        "workload": [
            {"at": 5000, "target": "dev-1-1", "action": "store", "payload": "a"},
            {"at": 5200, "target": "dev-2-1", "action": "store", "payload": "b"},
        ],
        "run_until": 12000,
    }
    path = tmp_path / "two-stores.json"
    path.write_text(json.dumps(plan))
    assert main(["run", "--file", str(path)]) == 0
    assert capsys.readouterr().out.startswith("PASS two-stores")


def test_run_file_errors_exit_two(tmp_path, capsys):
    missing = str(tmp_path / "nope.json")
    assert main(["run", "--file", missing]) == 2

    garbled = tmp_path / "garbled.json"
    garbled.write_text("{not json")
    assert main(["run", "--file", str(garbled)]) == 2

    too_small = tmp_path / "too-small.json"
    too_small.write_text(json.dumps({"world": {"regions": 3}}))
    assert main(["run", "--file", str(too_small)]) == 2
    assert "at least 4" in capsys.readouterr().err


def proof_file(tmp_path, name="proof.bin", mutate=None, as_hex=False):
    leaves = [hash_data(b"leaf-%d" % i) for i in range(8)]
    tree = build_tree(leaves)
    blob = prove(tree, 3).to_bytes()
    if mutate is not None:
        blob = mutate(blob)
    path = tmp_path / name
    if as_hex:
        path.write_text(blob.hex() + "\n")
    else:
        path.write_bytes(blob)
    return str(path), tree.root


def test_verify_proof_accepts_raw_and_hex(tmp_path, capsys):
    raw_path, root = proof_file(tmp_path)
    assert main(["verify-proof", "--proof", raw_path]) == 0
    assert capsys.readouterr().out.startswith("ok: leaf")

    hex_path, _ = proof_file(tmp_path, "proof.hex", as_hex=True)
    assert main(["verify-proof", "--proof", hex_path]) == 0

    assert main(["verify-proof", "--proof", raw_path, "--root", root.hex()]) == 0


def test_verify_proof_failure_modes(tmp_path, capsys):
    path, root = proof_file(tmp_path)

    wrong_root = bytes(32).hex()
    assert main(["verify-proof", "--proof", path, "--root", wrong_root]) == 1
    assert capsys.readouterr().out.startswith("mismatch: proof commits to")

    def corrupt(blob):  # flip one byte inside the first sibling hash
        index = 34
        return blob[:index] + bytes([blob[index] ^ 0x01]) + blob[index + 1:]

    bad_path, _ = proof_file(tmp_path, "bad.bin", mutate=corrupt)
    assert main(["verify-proof", "--proof", bad_path]) == 1
    assert capsys.readouterr().out.startswith("invalid:")

    short_path, _ = proof_file(tmp_path, "short.bin", mutate=lambda b: b[:40])
    assert main(["verify-proof", "--proof", short_path]) == 2
    assert "malformed proof" in capsys.readouterr().err

    assert main(["verify-proof", "--proof", str(tmp_path / "missing.bin")]) == 2


def test_export_ledger_writes_a_chain(tmp_path, capsys):
    out = tmp_path / "ledger.json"
    assert main(["export-ledger", "--scenario", "baseline", "--node", "rn-2",
                 "--out", str(out)]) == 0
    capsys.readouterr()
    dump = json.loads(out.read_text())
    assert dump["height"] >= 1
    heights = [block["height"] for block in dump["blocks"]]
    assert heights == list(range(len(heights)))

    assert main(["export-ledger", "--scenario", "baseline"]) == 0
    stdout_dump = json.loads(capsys.readouterr().out)
    assert stdout_dump["height"] >= 1


def test_export_ledger_rejects_unknown_node(capsys):
    assert main(["export-ledger", "--scenario", "baseline", "--node", "rn-9"]) == 2
    assert "no regional node named 'rn-9'" in capsys.readouterr().err


def test_suite_reports_every_scenario(capsys):
    assert main(["suite"]) == 0
    out = capsys.readouterr().out
    assert "suite: 12 of 12 scenarios passed" in out
    assert out.count("PASS ") == 12
