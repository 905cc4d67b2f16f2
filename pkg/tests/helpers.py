"""Scenario builders and independent oracles shared by the test modules."""

import itertools
from ipaddress import IPv4Address, IPv4Network

from passivescope.synth import ScenarioSpec, SubnetSpec

SPECIAL_NETWORKS = [
    IPv4Network("10.0.0.0/8"),
    IPv4Network("172.16.0.0/12"),
    IPv4Network("192.168.0.0/16"),
    IPv4Network("169.254.0.0/16"),
]


def two_subnet_spec(seed, **overrides):
    params = dict(
        seed=seed,
        subnets=[
            SubnetSpec("10.0.1.0/24", 30, "10.0.1.1"),
            SubnetSpec("10.0.2.0/24", 60, "10.0.2.1"),
        ],
        duration=20.0,
        arp_request_rate=4.0,
        arp_reply_rate=0.5,
        ip_packet_rate=12.0,
        cross_subnet_fraction=0.3,
    )
    params.update(overrides)
    return ScenarioSpec(**params)


def interval_is_pure(lo, hi):
    """True when [lo, hi] lies inside one special network or touches none."""
    for net in SPECIAL_NETWORKS:
        first, last = int(net.network_address), int(net.broadcast_address)
        if hi < first or lo > last:
            continue
        if not (first <= lo and hi <= last):
            return False
    return True


def segment_ok(values, i, j, max_size):
    return values[j] - values[i] + 1 <= max_size and interval_is_pure(values[i], values[j])


def canonical_min_partition(addresses, max_size):
    """Exhaustive DP over all cut positions of the sorted addresses.

    Returns the minimum-cardinality partition into valid contiguous segments;
    ties go to the partition whose cut points come as late as possible.
    """
    values = sorted({int(IPv4Address(a)) for a in addresses})
    n = len(values)
    best = [0] * (n + 1)
    for i in range(n - 1, -1, -1):
        best[i] = 1 + min(best[j + 1] for j in range(i, n) if segment_ok(values, i, j, max_size))
    parts, i = [], 0
    while i < n:
        j = max(j for j in range(i, n) if segment_ok(values, i, j, max_size) and best[j + 1] == best[i] - 1)
        parts.append(values[i : j + 1])
        i = j + 1
    return parts


def enumerate_partitions(addresses, max_size):
    """All valid partitions by plain enumeration of the 2**(n-1) cut masks."""
    values = sorted({int(IPv4Address(a)) for a in addresses})
    n = len(values)
    for mask in itertools.product([False, True], repeat=n - 1):
        parts, current = [], [values[0]]
        for cut, value in zip(mask, values[1:]):
            if cut:
                parts.append(current)
                current = [value]
            else:
                current.append(value)
        parts.append(current)
        if all(segment_ok(p, 0, len(p) - 1, max_size) for p in parts):
            yield parts


def free_ip_by_enumeration(detected, cidr, reserved):
    """Walk every address of ``cidr`` and apply the selection rule literally."""
    cidr = IPv4Network(cidr)
    detected = {IPv4Address(d) for d in detected}
    reserved = {IPv4Address(r) for r in reserved}
    start, end = min(detected), max(detected)

    def eligible(a):
        return (a not in detected and a not in reserved
                and a != cidr.network_address and a != cidr.broadcast_address)

    everything = list(cidr)
    interior = [a for a in everything if start < a < end and eligible(a)]
    if interior:
        return interior[0]
    below = [a for a in everything if a < start and eligible(a)]
    if below:
        return below[-1]
    above = [a for a in everything if a > end and eligible(a)]
    if above:
        return above[0]
    return None


def plan_violations(plan):
    """Plan-validity invariants, checked without reusing planner internals."""
    problems = []
    obs = plan.source_observations
    own = plan.own_network
    if own not in plan.final_ranges:
        problems.append("own network missing from final ranges")
    for a, b in itertools.combinations(plan.final_ranges, 2):
        if a.overlaps(b):
            problems.append(f"{a} overlaps {b}")
    for ip in obs.hosts:
        covering = [b for b in plan.final_ranges if ip in b]
        if len(covering) != 1:
            problems.append(f"{ip} covered by {len(covering)} final blocks")
    cfg = plan.reconfiguration
    if cfg is not None:
        if cfg.ip in obs.hosts:
            problems.append("proposed ip is a detected host")
        if cfg.ip not in own or cfg.gateway not in own:
            problems.append("proposed ip or gateway outside own network")
        if cfg.ip == cfg.gateway:
            problems.append("proposed ip equals gateway")
        if cfg.ip in (own.network_address, own.broadcast_address):
            problems.append("proposed ip is network or broadcast address")
        if cfg.prefix_length != own.prefixlen:
            problems.append("proposed prefix differs from own network")
    return problems
