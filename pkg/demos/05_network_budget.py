"""Does the uplink carry the mission? Fluid-queue checks per network preset.

One UAV offers ~234 Mbit/s of raw imagery plus a 6 Mbit/s FPV feed; three
robot cameras add 25 Mbit/s each. The private 5G uplink carries the UAV
alone at 80% utilization but saturates once the robot streams join, and
public 4G drowns immediately. The projected 1:1 uplink split clears all
of it. Also computed: the latency slack for moving close-range detection
to the edge.
"""
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from rumexsim import TrafficSource, offload_slack, presets, simulate_link

uav = [TrafficSource("uav-camera", "up", rate_bps=192e6 / 0.82),
       TrafficSource("uav-fpv", "up", rate_bps=6e6)]
robots = [TrafficSource(f"robot-camera-{i}", "up", rate_bps=25e6)
          for i in range(3)]
offered = sum(s.rate_bps for s in uav + robots)
print(f"offered uplink load: {offered / 1e6:.1f} Mbit/s "
      f"(UAV {sum(s.rate_bps for s in uav) / 1e6:.1f} + robots 75.0)")

fig, ax = plt.subplots(figsize=(9, 5))
for preset in presets():
    trace = simulate_link(preset, uav + robots, duration_s=30.0)
    tag = "saturated" if trace.saturated else "fits"
    print(f"{preset.name:15s} uplink {preset.uplink_mbps:6.1f} Mbit/s  "
          f"util {trace.mean_utilization:5.2f}  "
          f"backlog {trace.backlog_growth_bps() / 1e6:+6.1f} Mbit/s  [{tag}]")
    ax.plot(trace.t_s, trace.backlog_bits / 1e6, label=preset.name)

ax.set_xlabel("time [s]")
ax.set_ylabel("uplink backlog [Mbit]")
ax.set_title("backlog growth under the full mission load")
ax.legend()
fig.tight_layout()
fig.savefig("demo_network_budget.png", dpi=120)
print("plot -> demo_network_budget.png")

print()
print("edge-offload slack for close-range detection (0.5 m lookahead, "
      "0.5 m/s, 50 ms inference):")
for preset in presets():
    slack = offload_slack(camera_lookahead_m=0.5, speed_mps=0.5,
                          rtt_s=preset.rtt_s, inference_s=0.050, lead_m=0.02)
    print(f"  {preset.name:15s} rtt {preset.latency_ms:4.0f} ms -> "
          f"slack {slack * 1000:5.0f} ms "
          f"({'feasible' if slack >= 0 else 'infeasible'})")
