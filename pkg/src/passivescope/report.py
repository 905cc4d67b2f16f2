"""Plain-text run report, derived only from a scan plan and its observations."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .hints import dominant_ttl_hint
from .planner import ScanPlan


@dataclass
class RunReport:
    scan_plan: ScanPlan
    timings: dict = field(default_factory=dict)
    internal_gateway: Optional[str] = None
    warnings: list = field(default_factory=list)

    def all_warnings(self) -> list:
        return list(self.scan_plan.warnings) + list(self.warnings)

    def host_tables(self) -> dict:
        obs = self.scan_plan.source_observations
        tables = {block: [] for block in self.scan_plan.final_ranges}
        for ip in sorted(obs.hosts):
            block = self.scan_plan.target_for(ip)
            if block is not None:
                tables[block].append(obs.hosts[ip])
        return tables

    def render(self) -> str:
        plan = self.scan_plan
        obs = plan.source_observations
        lines = ["Passive reconnaissance report", "=" * 29, ""]
        reason = obs.termination_reason.value if obs.termination_reason else "n/a"
        lines.append(f"Passive phase: {obs.detected_count} detected hosts, "
                     f"{obs.frames_admitted}/{obs.frames_seen} frames admitted, stopped by {reason}")
        for phase, seconds in self.timings.items():
            lines.append(f"  {phase}: {seconds:.3f} s")
        lines.append("")
        lines.append(f"Own network: {plan.own_network}")
        cfg = plan.reconfiguration
        if cfg is None:
            iface = plan.interface
            lines.append(f"Current configuration {iface.ip}/{iface.prefix_length} fits; no reconfiguration needed")
        else:
            lines.append(f"Proposed address: {cfg.ip}/{cfg.prefix_length}")
            lines.append(f"Proposed gateway: {cfg.gateway} ({cfg.gateway_provenance.value})")
        if self.internal_gateway:
            lines.append(f"Internal gateway (hopcount analysis): {self.internal_gateway}")
        lines.append("")
        lines.append("Scan targets:")
        for block, hosts in self.host_tables().items():
            lines.append(f"  {block}  ({len(hosts)} detected)")
            lines.append(f"    {'address':<16}{'mac':<19}{'req':>5}{'rep':>5}{'tgt':>5}{'ip':>6}  ttl hint")
            for host in hosts:
                hint = dominant_ttl_hint(host.observed_ttls)
                hint_text = "-"
                if hint is not None:
                    hint_text = f"{hint.observed_ttl} -> {hint.os_family_hint.value}"
                    if hint.inferred_distance_hops:
                        hint_text += f", {hint.inferred_distance_hops} hops"
                mac = ",".join(sorted(host.macs)) or "-"
                lines.append(
                    f"    {str(host.ip):<16}{mac:<19}{host.arp_requests_sent:>5}{host.arp_replies_sent:>5}"
                    f"{host.arp_requests_targeting:>5}{host.ip_packets_sent:>6}  {hint_text}"
                )
        warnings = self.all_warnings()
        if warnings:
            lines.append("")
            lines.append("Warnings:")
            lines.extend(f"  - {w}" for w in warnings)
        return "\n".join(lines) + "\n"
