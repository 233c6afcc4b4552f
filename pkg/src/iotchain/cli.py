"""Command-line front end: run scenarios, dump wire sizes, verify proofs.

Exit codes are stable so scripts can branch on them: 0 success, 1 a
scenario or proof check failed, 2 the request itself was bad (unknown
scenario, unreadable file, malformed proof, bad topology).
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import tx as txmod
from .crypto import DeterministicRng, generate_keypair, hash_data, sign
from .merkle import MerkleProof, ProofParseError, verify_proof
from .scenarios import RunResult, run_scenario, run_scenario_file, run_suite
from .simnet import ConfigError


def _canonical_sizes() -> list[tuple[str, str, int]]:
    """One representative of each wire format, signed with throwaway keys.

    ``mode`` records how the transaction normally reaches the chain:
    batched into a region-local merkle tree, or sent directly to the
    ordering nodes.
    """
    rng = DeterministicRng("wire-size-survey")
    maker = generate_keypair(rng)
    authority = generate_keypair(rng)
    device = generate_keypair(rng)
    rn_east = generate_keypair(rng)
    rn_west = generate_keypair(rng)

    def signed(blank, key):
        return sign(key.secret_key, txmod.signing_bytes(blank))

    registration = txmod.DeviceRegistrationTx(
        1, 7, signed(txmod.DeviceRegistrationTx(1, 7, b""), maker)
    )
    entity = txmod.EntityRegistrationTx(
        txmod.EntityClass.MANUFACTURER, 1, 3,
        signed(txmod.EntityRegistrationTx(txmod.EntityClass.MANUFACTURER, 1, 3, b""),
               authority),
    )
    cancellation = txmod.CancellationTx(
        txmod.EntityClass.MANUFACTURER, 1, 3,
        signed(txmod.CancellationTx(txmod.EntityClass.MANUFACTURER, 1, 3, b""),
               authority),
    )
    firmware = b"firmware image, any length"
    release = txmod.UpdateReleaseTx(
        1, 2, signed(txmod.UpdateReleaseTx(1, 2, b"", firmware), maker), firmware
    )
    header_len = len(txmod.encode(release)) - len(firmware)
    query = txmod.UpdateQueryTx(1, 2)
    storage = txmod.DeviceStorageTx(
        7, 0, 0, hash_data(b"sensor reading"),
        signed(txmod.DeviceStorageTx(7, 0, 0, hash_data(b"sensor reading"), b""),
               device),
    )

    release_local = txmod.PermissionTx(
        txmod.TxType.PERMISSION_RELEASE, 7, 8, txmod.Operation.READ
    )
    request_base = txmod.PermissionTx(
        txmod.TxType.PERMISSION_REQUEST, 8, 7, txmod.Operation.READ
    )
    request_local = txmod.PermissionTx(
        txmod.TxType.PERMISSION_REQUEST, 8, 7, txmod.Operation.READ,
        (signed(request_base, device),),
    )

    def endorse_twice(base):
        first = sign(rn_east.secret_key, txmod.signing_bytes(base))
        once = txmod.PermissionTx(
            base.tx_type, base.d1_id, base.d2_id, base.operation, (first,)
        )
        second = sign(rn_west.secret_key, txmod.signing_bytes(once))
        return txmod.PermissionTx(
            base.tx_type, base.d1_id, base.d2_id, base.operation, (first, second)
        )

    release_cross = endorse_twice(
        txmod.PermissionTx(txmod.TxType.PERMISSION_RELEASE, 7, 9,
                           txmod.Operation.READ)
    )
    request_cross = endorse_twice(
        txmod.PermissionTx(txmod.TxType.PERMISSION_REQUEST, 9, 7,
                           txmod.Operation.READ)
    )
    batch_root = txmod.LocalInteractiveTx(
        2, hash_data(b"batch"), 4,
        signed(txmod.LocalInteractiveTx(2, hash_data(b"batch"), 4, b""), rn_east),
    )

    return [
        ("device-registration", "merkle", len(txmod.encode(registration))),
        ("entity-registration", "direct", len(txmod.encode(entity))),
        ("cancellation", "direct", len(txmod.encode(cancellation))),
        ("update-release-header", "merkle", header_len),
        ("update-release-header", "direct", header_len),
        ("update-query", "merkle", len(txmod.encode(query))),
        ("device-storage", "direct", len(txmod.encode(storage))),
        ("permission-release", "merkle", len(txmod.encode(release_local))),
        ("permission-request", "merkle", len(txmod.encode(request_local))),
        ("permission-release-cross-region", "direct",
         len(txmod.encode(release_cross))),
        ("permission-request-cross-region", "direct",
         len(txmod.encode(request_cross))),
        ("local-batch-root", "direct", len(txmod.encode(batch_root))),
    ]


def _write_artifacts(out_dir: str, result: RunResult) -> None:
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "trace.txt"), "w") as fh:
        fh.write(result.network.trace_text())
    with open(os.path.join(out_dir, "verdict.json"), "w") as fh:
        json.dump(result.verdict.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    if result.world is not None:
        for rn in result.world.honest_rns():
            path = os.path.join(out_dir, f"ledger-{rn.actor_id}.json")
            with open(path, "w") as fh:
                fh.write(rn.ledger.export_json())
                fh.write("\n")


def cmd_run(args) -> int:
    try:
        if args.file:
            result = run_scenario_file(args.file, seed=args.seed,
                                       horizon_ms=args.horizon_ms)
        else:
            result = run_scenario(args.scenario,
                                  seed=0 if args.seed is None else args.seed,
                                  horizon_ms=args.horizon_ms)
    except KeyError as exc:
        print(f"error: {exc.args[0]}", file=sys.stderr)
        return 2
    except (ConfigError, OSError, json.JSONDecodeError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.out:
        _write_artifacts(args.out, result)
    if args.format == "structured":
        print(json.dumps(result.verdict.to_dict(), sort_keys=True))
    else:
        print(result.verdict.summary())
    return 0 if result.verdict.passed else 1


def cmd_suite(args) -> int:
    verdicts = run_suite(seed=args.seed)
    for verdict in verdicts:
        if args.format == "structured":
            print(json.dumps(verdict.to_dict(), sort_keys=True))
        else:
            print(verdict.summary())
    passed = sum(v.passed for v in verdicts)
    if args.format != "structured":
        print(f"suite: {passed} of {len(verdicts)} scenarios passed")
    return 0 if passed == len(verdicts) else 1


def cmd_sizes(args) -> int:
    for name, mode, length in _canonical_sizes():
        print(f"{name}, {mode}, {length}")
    return 0


def cmd_verify_proof(args) -> int:
    try:
        with open(args.proof, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    text = data.strip()
    if text and all(c in b"0123456789abcdefABCDEF" for c in text) and len(text) % 2 == 0:
        data = bytes.fromhex(text.decode())
    try:
        proof = MerkleProof.from_bytes(data)
    except ProofParseError as exc:
        print(f"error: malformed proof: {exc}", file=sys.stderr)
        return 2
    if args.root is not None:
        try:
            expected = bytes.fromhex(args.root)
        except ValueError:
            print("error: root must be hex", file=sys.stderr)
            return 2
        if proof.root != expected:
            print(f"mismatch: proof commits to {proof.root.hex()}")
            return 1
    if not verify_proof(proof):
        print("invalid: authentication path does not reach the root")
        return 1
    print(f"ok: leaf {proof.leaf.hex()[:16]}… verifies under root {proof.root.hex()}")
    return 0


def cmd_export_ledger(args) -> int:
    try:
        result = run_scenario(args.scenario,
                              seed=0 if args.seed is None else args.seed,
                              horizon_ms=args.horizon_ms)
    except KeyError as exc:
        print(f"error: {exc.args[0]}", file=sys.stderr)
        return 2
    try:
        node = result.world.rn(args.node)
    except (KeyError, AttributeError):
        print(f"error: no regional node named {args.node!r}", file=sys.stderr)
        return 2
    rendered = node.ledger.export_json() + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(rendered)
    else:
        sys.stdout.write(rendered)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="iotchain",
        description="Deterministic simulator for a three-tier device/"
                    "region/chain security architecture.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one scenario and judge it")
    which = run_p.add_mutually_exclusive_group(required=True)
    which.add_argument("--scenario", metavar="NAME",
                       help="a built-in scenario (see 'suite' for the list)")
    which.add_argument("--file", metavar="PATH",
                       help="a JSON scenario definition")
    run_p.add_argument("--seed", type=int, default=None,
                       help="replay seed (default 0, or the file's)")
    run_p.add_argument("--horizon-ms", type=int, default=None, dest="horizon_ms",
                       help="override how long the simulation runs")
    run_p.add_argument("--out", metavar="DIR",
                       help="write trace.txt, verdict.json and per-node ledgers")
    run_p.add_argument("--format", choices=("text", "structured"),
                       default="text", help="verdict as prose or JSON lines")
    run_p.set_defaults(func=cmd_run)

    suite_p = sub.add_parser("suite", help="run every built-in scenario")
    suite_p.add_argument("--seed", type=int, default=0)
    suite_p.add_argument("--format", choices=("text", "structured"),
                         default="text")
    suite_p.set_defaults(func=cmd_suite)

    sizes_p = sub.add_parser(
        "sizes", help="print the encoded size of each transaction type"
    )
    sizes_p.set_defaults(func=cmd_sizes)

    verify_p = sub.add_parser("verify-proof",
                              help="check a serialized membership proof")
    verify_p.add_argument("--proof", required=True, metavar="FILE",
                          help="proof bytes, raw or hex text")
    verify_p.add_argument("--root", metavar="HEX",
                          help="expected root (defaults to the embedded one)")
    verify_p.set_defaults(func=cmd_verify_proof)

    export_p = sub.add_parser("export-ledger",
                              help="re-run a scenario and dump one node's chain")
    export_p.add_argument("--scenario", required=True, metavar="NAME")
    export_p.add_argument("--seed", type=int, default=None)
    export_p.add_argument("--horizon-ms", type=int, default=None,
                          dest="horizon_ms")
    export_p.add_argument("--node", default="rn-1",
                          help="which regional node's ledger (default rn-1)")
    export_p.add_argument("--out", metavar="FILE",
                          help="write here instead of stdout")
    export_p.set_defaults(func=cmd_export_ledger)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
