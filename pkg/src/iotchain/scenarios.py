"""Built-in simulation scenarios with machine-checked verdicts.

Each scenario builds a world, schedules a workload, injects its fault or
adversary, runs the clock, and evaluates named checks. The verdict records
every check with a pass flag and enough detail to replay: the seed fully
determines the run, and the trace digest fingerprints it.

Custom scenarios can be loaded from a JSON file; see
:func:`run_scenario_file` for the accepted shape.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .consensus import CONSENSUS_TYPES
from .crypto import hash_data
from .ledger import EntityClass, audit_chain, block_bytes
from .roles import (
    Device,
    RegionalNode,
    ScriptAudit,
    ScriptForge,
    ScriptGrant,
    ScriptRelease,
    ScriptRequest,
    ScriptStore,
    World,
    WorldConfig,
    build_world,
)
from .simnet import Crash, Dos, Heal, Network, Partition


@dataclass
class Check:
    name: str
    passed: bool
    details: str = ""


@dataclass
class Verdict:
    scenario: str
    seed: int
    passed: bool
    checks: list[Check]
    sim_time_ms: int
    trace_lines: int
    trace_digest: str

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "seed": self.seed,
            "passed": self.passed,
            "sim_time_ms": self.sim_time_ms,
            "trace_lines": self.trace_lines,
            "trace_digest": self.trace_digest,
            "checks": [
                {"name": c.name, "passed": c.passed, "details": c.details}
                for c in self.checks
            ],
        }

    def summary(self) -> str:
        lines = [
            f"{'PASS' if self.passed else 'FAIL'} {self.scenario}"
            f" (seed={self.seed}, {self.sim_time_ms} ms simulated,"
            f" trace {self.trace_digest})"
        ]
        for check in self.checks:
            mark = "ok " if check.passed else "FAIL"
            suffix = f" -- {check.details}" if check.details and not check.passed else ""
            lines.append(f"  [{mark}] {check.name}{suffix}")
        return "\n".join(lines)


@dataclass
class RunResult:
    verdict: Verdict
    network: Network
    world: World | None = None


def _verdict(name: str, seed: int, network: Network, checks: list[Check]) -> Verdict:
    text = network.trace_text()
    return Verdict(
        scenario=name,
        seed=seed,
        passed=all(c.passed for c in checks),
        checks=checks,
        sim_time_ms=network.now,
        trace_lines=len(network.trace),
        trace_digest=hash_data(text.encode()).hex()[:16],
    )


# --- reusable checks ----------------------------------------------------------


def check_chain_consistency(world: World) -> Check:
    """Every honest node's chain is a prefix of the longest honest chain."""
    honest = world.honest_rns()
    longest = max(honest, key=lambda rn: rn.ledger.height)
    for rn in honest:
        for height in range(rn.ledger.height + 1):
            a = block_bytes(rn.ledger.blocks[height])
            b = block_bytes(longest.ledger.blocks[height])
            if a != b:
                return Check(
                    "chain-consistency", False,
                    f"{rn.actor_id} diverges from {longest.actor_id}"
                    f" at height {height}",
                )
    return Check(
        "chain-consistency", True,
        f"{len(honest)} honest chains agree up to height {longest.ledger.height}",
    )


def check_equal_ledgers(rns: list[RegionalNode]) -> Check:
    """Byte-identical chains across the given nodes (run at a quiet horizon)."""
    first = rns[0]
    for rn in rns[1:]:
        if rn.ledger.height != first.ledger.height:
            return Check(
                "ledgers-identical", False,
                f"{rn.actor_id} at height {rn.ledger.height},"
                f" {first.actor_id} at {first.ledger.height}",
            )
        if rn.ledger.tip_hash != first.ledger.tip_hash:
            return Check(
                "ledgers-identical", False,
                f"{rn.actor_id} tip differs from {first.actor_id}",
            )
    return Check(
        "ledgers-identical", True,
        f"{len(rns)} nodes at height {first.ledger.height}, same tip",
    )


def check_audit_clean(world: World) -> Check:
    honest = world.honest_rns()
    longest = max(honest, key=lambda rn: rn.ledger.height)
    findings = audit_chain(longest.ledger, world.directory)
    if findings:
        return Check("audit-clean", False, "; ".join(findings[:3]))
    return Check(
        "audit-clean", True,
        f"all {sum(len(b.txs) for b in longest.ledger.blocks)} committed"
        " transactions re-validate",
    )


def check_registered(world: World, devices: list[Device] | None = None) -> Check:
    devices = world.devices if devices is None else devices
    missing = [d.actor_id for d in devices if not d.registered]
    if missing:
        return Check("devices-registered", False, f"unregistered: {missing}")
    return Check("devices-registered", True, f"{len(devices)} devices confirmed")


def check_progress(world: World, *, beyond: int = 0) -> Check:
    height = max(rn.ledger.height for rn in world.honest_rns())
    if height <= beyond:
        return Check("chain-progress", False, f"height stuck at {height}")
    return Check("chain-progress", True, f"height {height}")


def _device_by_id(world: World, device_id: int) -> Device:
    for device in world.devices:
        if device.device_id == device_id:
            return device
    raise KeyError(device_id)


def check_session_keys(world: World, pairs: list[tuple[int, int]]) -> Check:
    for a, b in pairs:
        dev_a = _device_by_id(world, a)
        dev_b = _device_by_id(world, b)
        key_a = dev_a.session_keys.get(b)
        key_b = dev_b.session_keys.get(a)
        if key_a is None or key_b is None:
            return Check("session-keys", False, f"pair ({a},{b}) missing a key")
        if key_a != key_b or len(key_a) != 16:
            return Check("session-keys", False, f"pair ({a},{b}) keys disagree")
    return Check("session-keys", True, f"{len(pairs)} pairs share 16-byte keys")


def check_storage_on_chain(world: World,
                           stores: list[tuple[int, int, bytes]]) -> Check:
    tables = max(world.honest_rns(), key=lambda rn: rn.ledger.height).tables
    for device_id, data_number, payload in stores:
        record = tables.storage_info.get((device_id, data_number))
        if record is None:
            return Check(
                "storage-on-chain", False,
                f"device {device_id} item {data_number} never committed",
            )
        if record.data_hash != hash_data(payload):
            return Check(
                "storage-on-chain", False,
                f"device {device_id} item {data_number} hash mismatch",
            )
    return Check("storage-on-chain", True, f"{len(stores)} stored hashes verified")


def _check_forgeries_absent(world: World, forged: set[bytes]) -> Check:
    leaked = [
        f"{rn.actor_id} height {block.height}"
        for rn in world.honest_rns()
        for block in rn.ledger.blocks
        if any(raw in forged for raw in block.txs)
    ]
    return Check(
        "forgery-never-committed", not leaked,
        "" if not leaked else f"forged tx found at {leaked}",
    )


def _check_views_advanced(world: World) -> Check:
    views = {rn.actor_id: rn.engine.active_view for rn in world.honest_rns()}
    return Check(
        "view-advanced", all(v >= 1 for v in views.values()),
        f"honest views: {views}",
    )


# --- shared workload ----------------------------------------------------------


@dataclass
class Workload:
    stores: list[tuple[int, int, bytes]] = field(default_factory=list)
    local_pairs: list[tuple[int, int]] = field(default_factory=list)
    cross_pairs: list[tuple[int, int]] = field(default_factory=list)

    @property
    def pairs(self) -> list[tuple[int, int]]:
        return self.local_pairs + self.cross_pairs


def _standard_traffic(world: World, *, stores: bool = True,
                      permissions: bool = True) -> Workload:
    """Registrations happen on their own; this adds stores and permissions."""
    net = world.network
    load = Workload()
    if stores:
        for index, device in enumerate(world.devices):
            payload = f"reading-{device.actor_id}-0".encode()
            net.schedule(6000 + 200 * index, device.actor_id, ScriptStore(payload))
            load.stores.append((device.device_id, 0, payload))
    if permissions and len(world.devices) >= 2:
        per_region = world.config.devices_per_region
        if per_region >= 2:
            granter, grantee = world.devices[0], world.devices[1]
            net.schedule(7000, granter.actor_id, ScriptGrant(grantee.device_id))
            net.schedule(12000, grantee.actor_id, ScriptRequest(granter.device_id))
            load.local_pairs.append((granter.device_id, grantee.device_id))
        if world.config.regions >= 2:
            owner = world.devices[per_region]  # first device of region 2
            asker = world.devices[0]
            net.schedule(7000, owner.actor_id, ScriptGrant(asker.device_id))
            net.schedule(12000, asker.actor_id, ScriptRequest(owner.device_id))
            load.cross_pairs.append((owner.device_id, asker.device_id))
    return load


def _region_stores(world: World, load: Workload,
                   exclude_rn: str) -> list[tuple[int, int, bytes]]:
    """The stores expected on-chain when one region's node serves nobody."""
    outside = {d.device_id for d in world.devices if d.home_rn != exclude_rn}
    return [s for s in load.stores if s[0] in outside]


# --- the scenarios -------------------------------------------------------------

# Horizons end in a quiet window between device polling waves, so scenarios
# may compare chains for equality rather than mere prefix consistency.


def _run_baseline(seed: int, horizon_ms: int | None = None) -> RunResult:
    world = build_world(WorldConfig(seed=seed))
    load = _standard_traffic(world)
    world.network.run(horizon_ms or 19500)
    checks = [
        check_registered(world),
        check_chain_consistency(world),
        check_equal_ledgers(world.honest_rns()),
        check_audit_clean(world),
        check_storage_on_chain(world, load.stores),
        check_session_keys(world, load.pairs),
        check_progress(world),
    ]
    return RunResult(_verdict("baseline", seed, world.network, checks),
                     world.network, world=world)


def _run_dos_attack(seed: int, horizon_ms: int | None = None) -> RunResult:
    """Flood one regional node; the rest keep serving, and the victim
    recovers once the flood lifts."""
    world = build_world(WorldConfig(seed=seed))
    load = _standard_traffic(world, permissions=False)
    victim = world.rns[-1].actor_id
    world.network.add_fault(Dos(victim, at=5000, duration=10000))
    world.network.run(horizon_ms or 29500)
    victim_rn = world.rn(victim)
    others = [rn for rn in world.rns if rn.actor_id != victim]
    progressed_during = any(
        5000 <= block.timestamp_ms < 15000
        for rn in others for block in rn.ledger.blocks
    )
    checks = [
        Check("progress-during-flood", progressed_during,
              "" if progressed_during else "no block minted while the victim was down"),
        Check(
            "victim-caught-up",
            victim_rn.ledger.tip_hash == others[0].ledger.tip_hash,
            f"victim at height {victim_rn.ledger.height},"
            f" others at {others[0].ledger.height}",
        ),
        check_registered(world),
        check_chain_consistency(world),
        check_audit_clean(world),
        # submissions from the victim's own region were eaten by the flood;
        # everyone else's must have landed
        check_storage_on_chain(world, _region_stores(world, load, victim)),
    ]
    return RunResult(_verdict("dos-attack", seed, world.network, checks),
                     world.network, world=world)


def _run_malicious_rn(seed: int, horizon_ms: int | None = None) -> RunResult:
    """A regional node goes rogue: it stonewalls its own clients and
    proposes a forged transaction. The honest quorum refuses the forgery,
    votes the rogue out of the primary seat, and — once enough stranded
    devices complain — the detection center revokes its registration."""
    rogue = "rn-1"
    world = build_world(WorldConfig(seed=seed, byzantine_rns=(rogue,),
                                    byzantine_mode="forge"))
    load = _standard_traffic(world, permissions=False)
    world.network.schedule(4000, rogue, ScriptForge("storage"))
    world.network.run(horizon_ms or 24500)
    forger = world.rn(rogue)
    tables = max(world.honest_rns(), key=lambda rn: rn.ledger.height).tables
    record = tables.entity(EntityClass.REGIONAL_NODE, forger.entity_id)
    refusals = [
        line
        for rn in world.honest_rns()
        for line in rn.engine.audit
        if "refused to prepare" in line or "dropped invalid tx" in line
    ]
    outside = [d for d in world.devices if d.home_rn != rogue]
    stranded = [d for d in world.devices if d.home_rn == rogue]
    checks = [
        _check_forgeries_absent(world, set(forger.forged)),
        Check("forgery-refused-in-audit", len(refusals) >= 1,
              "no honest node logged a refusal"),
        _check_views_advanced(world),
        Check("rogue-node-revoked",
              record is not None and not record.active,
              f"registry record active={record.active if record else '?'}"),
        Check("stranded-devices-reported",
              all(d.reported_home_rn for d in stranded),
              f"{sum(d.reported_home_rn for d in stranded)}"
              f" of {len(stranded)} reported"),
        check_registered(world, outside),
        check_chain_consistency(world),
        check_equal_ledgers(world.honest_rns()),
        check_audit_clean(world),
        check_storage_on_chain(world, _region_stores(world, load, rogue)),
    ]
    return RunResult(_verdict("malicious-rn", seed, world.network, checks),
                     world.network, world=world)


def _run_identity_forgery(seed: int, horizon_ms: int | None = None) -> RunResult:
    """An uncertified key tries to register and to file storage claims
    under a real device's identity."""
    world = build_world(WorldConfig(seed=seed, with_intruder=True))
    load = _standard_traffic(world, permissions=False)
    world.network.schedule(5000, "intruder", ScriptForge("registration"))
    world.network.schedule(6000, "intruder", ScriptForge("storage"))
    world.network.run(horizon_ms or 19500)
    intruder = world.intruder
    checks = [
        Check("forged-identity-rejected", len(intruder.rejections) >= 2,
              f"{len(intruder.rejections)} rejections for"
              f" {len(intruder.attempts)} attempts"),
        _check_forgeries_absent(world, set(intruder.attempts)),
        check_registered(world),
        check_chain_consistency(world),
        check_audit_clean(world),
        check_storage_on_chain(world, load.stores),
    ]
    return RunResult(_verdict("identity-forgery", seed, world.network, checks),
                     world.network, world=world)


def _run_malicious_cloud(seed: int, horizon_ms: int | None = None) -> RunResult:
    """The cloud provider corrupts what it stores; the on-chain hashes
    expose every tampered item under audit."""
    world = build_world(WorldConfig(seed=seed, tampering_clouds=(1,)))
    load = _standard_traffic(world, permissions=False)
    for index, (device_id, data_number, _) in enumerate(load.stores):
        world.network.schedule(
            14000 + 100 * index, "dc", ScriptAudit(device_id, data_number)
        )
    world.network.run(horizon_ms or 22000)
    results = world.dc.audit_results
    mismatches = [slot for slot, r in results.items() if not r["match"]]
    checks = [
        Check("audits-completed", len(results) == len(load.stores),
              f"{len(results)} of {len(load.stores)} audits answered"),
        Check("tampering-detected", len(mismatches) == len(load.stores),
              f"{len(mismatches)} mismatches for {len(load.stores)} tampered items"),
        Check("findings-recorded", len(world.dc.findings) >= len(load.stores),
              f"{len(world.dc.findings)} findings"),
        check_chain_consistency(world),
        check_audit_clean(world),
        check_storage_on_chain(world, load.stores),
    ]
    return RunResult(_verdict("malicious-cloud", seed, world.network, checks),
                     world.network, world=world)


def _run_malicious_manufacturer(seed: int,
                                horizon_ms: int | None = None) -> RunResult:
    """A manufacturer ships a recognizably bad update: devices refuse it,
    the detection center revokes the manufacturer, and its next release
    bounces."""
    world = build_world(WorldConfig(seed=seed, malicious_manufacturers=(1,)))
    man = world.manufacturers[0]
    world.network.schedule(6000, man.actor_id, ScriptRelease(1, b"firmware-v2"))
    world.network.schedule(18000, man.actor_id, ScriptRelease(1, b"firmware-v3"))
    world.network.run(horizon_ms or 26000)
    tables = max(world.honest_rns(), key=lambda rn: rn.ledger.height).tables
    record = tables.entity(EntityClass.MANUFACTURER, man.entity_id)
    bad_applied = [
        d.actor_id for d in world.devices
        if d.applied_update is not None
    ]
    reporters = sum(len(v) for v in world.dc.reports.values())
    checks = [
        Check("manufacturer-cancelled",
              record is not None and not record.active,
              f"registry record active={record.active if record else '?'}"),
        Check("bad-update-never-applied", not bad_applied,
              "" if not bad_applied else f"applied by {bad_applied}"),
        Check("detection-findings", len(world.dc.findings) >= 1,
              f"{len(world.dc.findings)} findings, {reporters} device reports"),
        Check("post-revocation-release-rejected",
              any("not registered" in r.reason for r in man.rejections),
              f"{len(man.rejections)} rejections: "
              + "; ".join(r.reason for r in man.rejections[:2])),
        check_chain_consistency(world),
        check_audit_clean(world),
    ]
    return RunResult(
        _verdict("malicious-manufacturer", seed, world.network, checks),
        world.network, world=world,
    )


def _run_pbft_crash(seed: int, horizon_ms: int | None = None) -> RunResult:
    """Crash the primary mid-run; the survivors change views and keep
    minting identical blocks."""
    world = build_world(WorldConfig(seed=seed))
    load = _standard_traffic(world, permissions=False)
    crashed = world.rns[0].actor_id  # the first view's primary
    world.network.add_fault(Crash(crashed, at=4000))
    world.network.run(horizon_ms or 29500)
    survivors = [rn for rn in world.rns if rn.actor_id != crashed]
    progressed = any(
        block.timestamp_ms > 4000
        for rn in survivors for block in rn.ledger.blocks
    )
    views = {rn.actor_id: rn.engine.active_view for rn in survivors}
    checks = [
        Check("progress-after-crash", progressed,
              "" if progressed else "no block minted after the crash"),
        Check("view-advanced", all(v >= 1 for v in views.values()),
              f"surviving views: {views}"),
        check_equal_ledgers(survivors),
        check_chain_consistency(world),
        check_audit_clean(world),
        check_registered(world),  # registrations complete before the crash
        check_storage_on_chain(world, _region_stores(world, load, crashed)),
    ]
    return RunResult(_verdict("pbft-crash-fault", seed, world.network, checks),
                     world.network, world=world)


def _run_pbft_byzantine(seed: int, horizon_ms: int | None = None) -> RunResult:
    """The first primary equivocates, showing different halves of the
    network different batches. No honest pair ever decides two ways, the
    rogue loses the seat, and every region keeps full service."""
    rogue = "rn-1"
    world = build_world(WorldConfig(seed=seed, byzantine_rns=(rogue,),
                                    byzantine_mode="equivocate"))
    load = _standard_traffic(world, permissions=False)
    world.network.run(horizon_ms or 29500)
    checks = [
        check_equal_ledgers(world.honest_rns()),
        check_chain_consistency(world),
        _check_views_advanced(world),
        check_registered(world),
        check_audit_clean(world),
        check_storage_on_chain(world, load.stores),
    ]
    return RunResult(_verdict("pbft-byzantine-fault", seed, world.network, checks),
                     world.network, world=world)


def _run_update_anti_dos(seed: int, horizon_ms: int | None = None) -> RunResult:
    """Devices learn of and fetch updates through the chain, so flooding
    the manufacturer after release changes nothing; fake direct pushes
    are ignored."""
    world = build_world(WorldConfig(seed=seed, with_intruder=True))
    man = world.manufacturers[0]
    payload = b"firmware-v2 stable"
    world.network.schedule(5000, man.actor_id, ScriptRelease(1, payload))
    world.network.add_fault(Dos(man.actor_id, at=6000, duration=20000))
    world.network.schedule(8000, "intruder", ScriptForge("push-update"))
    world.network.run(horizon_ms or 26000)
    expected = hash_data(payload)
    behind = [d.actor_id for d in world.devices if d.applied_update != expected]
    fake_applied = [
        d.actor_id for d in world.devices
        if d.applied_update is not None and d.applied_update != expected
    ]
    ignored = sum(d.ignored_pushes for d in world.devices)
    checks = [
        Check("all-devices-updated", not behind,
              "" if not behind else f"missing update: {behind}"),
        Check("no-fake-update-applied", not fake_applied,
              "" if not fake_applied else f"fake accepted by {fake_applied}"),
        Check("pushes-ignored", ignored >= 1, f"{ignored} unsolicited pushes ignored"),
        check_chain_consistency(world),
        check_audit_clean(world),
    ]
    return RunResult(_verdict("update-anti-dos", seed, world.network, checks),
                     world.network, world=world)


def _run_storage_integrity(seed: int, horizon_ms: int | None = None) -> RunResult:
    """Honest end-to-end storage: chained hashes match both what devices
    sent and what the provider holds."""
    world = build_world(WorldConfig(seed=seed))
    load = _standard_traffic(world, permissions=False)
    for index, (device_id, data_number, _) in enumerate(load.stores):
        world.network.schedule(
            14000 + 100 * index, "dc", ScriptAudit(device_id, data_number)
        )
    world.network.run(horizon_ms or 22000)
    results = world.dc.audit_results
    mismatched = [slot for slot, r in results.items() if not r["match"]]
    checks = [
        Check("audits-completed", len(results) == len(load.stores),
              f"{len(results)} of {len(load.stores)}"),
        Check("provider-copies-verified", not mismatched,
              "" if not mismatched else f"mismatched: {mismatched}"),
        Check("no-findings", not world.dc.findings,
              "; ".join(world.dc.findings[:2])),
        check_storage_on_chain(world, load.stores),
        check_chain_consistency(world),
        check_audit_clean(world),
    ]
    return RunResult(_verdict("storage-integrity", seed, world.network, checks),
                     world.network, world=world)


def _run_privacy_split(seed: int, horizon_ms: int | None = None) -> RunResult:
    """Region-local traffic leaves only roots on the shared chain: the
    batched transaction bytes never appear in any block."""
    world = build_world(WorldConfig(seed=seed))
    _standard_traffic(world)
    world.network.run(horizon_ms or 19500)
    chain = max(world.honest_rns(), key=lambda rn: rn.ledger.height)
    chain_bytes = b"".join(block_bytes(b) for b in chain.ledger.blocks)
    roots_on_chain = {rec.root for rec in chain.tables.batch_roots}
    retained = 0
    leaked: list[str] = []
    missing_roots: list[str] = []
    for rn in world.honest_rns():
        for root, txs in rn.retained_batches:
            if root not in roots_on_chain:
                missing_roots.append(f"{rn.actor_id}:{root.hex()[:12]}")
            for raw in txs:
                retained += 1
                if raw in chain_bytes:
                    leaked.append(f"{rn.actor_id}:{raw.hex()[:16]}")
    checks = [
        Check("batches-recorded", retained > 0 and not missing_roots,
              f"{retained} region-local txs under {len(roots_on_chain)} roots"
              + ("" if not missing_roots else f"; missing {missing_roots}")),
        Check("local-bytes-off-chain", not leaked,
              "" if not leaked else f"leaked: {leaked[:3]}"),
        check_chain_consistency(world),
        check_audit_clean(world),
    ]
    return RunResult(_verdict("privacy-split", seed, world.network, checks),
                     world.network, world=world)


def _run_lightweight_split(seed: int, horizon_ms: int | None = None) -> RunResult:
    """Devices never carry consensus traffic, yet still end up with
    verified membership proofs for their own transactions."""
    world = build_world(WorldConfig(seed=seed))
    _standard_traffic(world)
    world.network.run(horizon_ms or 19500)
    device_ids = {d.actor_id for d in world.devices}
    consensus_names = {t.__name__ for t in CONSENSUS_TYPES}
    offenders = []
    for index, line in enumerate(world.network.trace):
        parts = line.split("|")
        if len(parts) < 5 or parts[1] not in ("msg", "drop"):
            continue
        sender, target, type_name = parts[2], parts[3], parts[4]
        if type_name in consensus_names and (
            sender in device_ids or target in device_ids
        ):
            offenders.append(f"trace line {index}: {line.strip()}")
    with_proofs = [d for d in world.devices if d.receipts]
    checks = [
        Check("devices-outside-consensus", not offenders,
              "" if not offenders else offenders[0]),
        Check("devices-hold-verified-proofs",
              len(with_proofs) == len(world.devices),
              f"{len(with_proofs)} of {len(world.devices)} devices"
              " verified a membership proof"),
        check_registered(world),
        check_chain_consistency(world),
    ]
    return RunResult(_verdict("lightweight-split", seed, world.network, checks),
                     world.network, world=world)


SCENARIOS = {
    "baseline": ("Healthy full run: registrations, stores, permissions.",
                 _run_baseline),
    "dos-attack": ("Flood one regional node and watch recovery.",
                   _run_dos_attack),
    "malicious-rn": ("A consensus member forges, stonewalls, and is revoked.",
                     _run_malicious_rn),
    "identity-forgery": ("An uncertified key impersonates a device.",
                         _run_identity_forgery),
    "malicious-cloud": ("The storage provider tampers with stored data.",
                        _run_malicious_cloud),
    "malicious-manufacturer": ("A bad update gets detected and revoked.",
                               _run_malicious_manufacturer),
    "pbft-crash-fault": ("Primary crash; view change keeps ordering alive.",
                         _run_pbft_crash),
    "pbft-byzantine-fault": ("Equivocating primary; no divergent decisions.",
                             _run_pbft_byzantine),
    "update-anti-dos": ("Updates flow via the chain despite a flooded vendor.",
                        _run_update_anti_dos),
    "storage-integrity": ("Stored data matches chained hashes end to end.",
                          _run_storage_integrity),
    "privacy-split": ("Region-local bytes stay off the shared chain.",
                      _run_privacy_split),
    "lightweight-split": ("Devices stay out of consensus, proofs still verify.",
                          _run_lightweight_split),
}


def builtin_suite() -> list[str]:
    """Names of the shipped scenarios, in suite order."""
    return list(SCENARIOS)


def run_scenario(name: str, seed: int = 0,
                 horizon_ms: int | None = None) -> RunResult:
    try:
        _, runner = SCENARIOS[name]
    except KeyError:
        raise KeyError(
            f"unknown scenario {name!r}; know: {', '.join(sorted(SCENARIOS))}"
        ) from None
    return runner(seed, horizon_ms)


def run_suite(seed: int = 0) -> list[Verdict]:
    return [run_scenario(name, seed).verdict for name in SCENARIOS]


# --- JSON-defined scenarios -----------------------------------------------------

_SCRIPTS = {
    "store": lambda a: ScriptStore(a["payload"].encode(),
                                   a.get("processing_method", 0)),
    "grant": lambda a: ScriptGrant(a["peer_id"], a.get("operation", 0)),
    "request": lambda a: ScriptRequest(a["peer_id"], a.get("operation", 0)),
    "release": lambda a: ScriptRelease(a["model_id"], a["payload"].encode()),
    "audit": lambda a: ScriptAudit(a["device_id"], a["data_number"]),
    "forge": lambda a: ScriptForge(a["kind"]),
}

_NAMED_CHECKS = {
    "chain-consistency": check_chain_consistency,
    "audit-clean": check_audit_clean,
    "devices-registered": check_registered,
    "chain-progress": check_progress,
}

_FAULTS = {
    "crash": lambda a: Crash(a["actor"], a["at"]),
    "dos": lambda a: Dos(a["actor"], a["at"], a["duration"]),
    "partition": lambda a: Partition(
        a["at"], tuple(frozenset(g) for g in a["groups"])
    ),
    "heal": lambda a: Heal(a["at"]),
}


def run_scenario_file(path: str, seed: int | None = None,
                      horizon_ms: int | None = None) -> RunResult:
    """Run a scenario described by a JSON file.

    Shape::

        {
          "name": "my-scenario",
          "world": {"regions": 4, "devices_per_region": 2, "seed": 7},
          "faults": [{"kind": "dos", "actor": "rn-2", "at": 5000,
                      "duration": 5000}],
          "workload": [{"at": 6000, "target": "dev-1-1",
                        "action": "store", "payload": "hello"}],
          "run_until": 20000,
          "checks": ["chain-consistency", "audit-clean"]
        }

    ``seed`` and ``horizon_ms`` arguments override the file's values.
    """
    with open(path) as fh:
        plan = json.load(fh)
    world_args = dict(plan.get("world", {}))
    if seed is not None:
        world_args["seed"] = seed
    config = WorldConfig(**world_args)
    world = build_world(config)
    for fault in plan.get("faults", []):
        args = dict(fault)
        kind = args.pop("kind")
        world.network.add_fault(_FAULTS[kind](args))
    for step in plan.get("workload", []):
        args = dict(step)
        at = args.pop("at")
        target = args.pop("target")
        action = args.pop("action")
        world.network.schedule(at, target, _SCRIPTS[action](args))
    world.network.run(horizon_ms or plan.get("run_until", 20000))
    checks = [
        _NAMED_CHECKS[name](world) for name in plan.get(
            "checks", ["chain-consistency", "audit-clean"]
        )
    ]
    name = plan.get("name", "custom")
    return RunResult(_verdict(name, config.seed, world.network, checks),
                     world.network, world=world)
