"""Nearest-neighbor routes and what local search buys on top.

The robot drives an open tour: fixed start, free end. Greedy construction
is fast but leaves crossings; 2-opt/segment-relocation improvement removes
them. On instances small enough for the exhaustive oracle we can also see
how close to optimal the heuristics land.
"""
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from rumexsim import (LocalPoint, brute_force_optimal, improve,
                      nearest_neighbor)

start = LocalPoint(0.0, 0.0)
rng = np.random.default_rng(4)

# small instance with the oracle in reach
small = rng.uniform(0, 50, size=(9, 2))
nn = nearest_neighbor(start, small)
better = improve(nn, small)
optimal = brute_force_optimal(start, small)
print("9 targets:")
print(f"  nearest neighbor: {nn.length_m:8.2f} m")
print(f"  improved:         {better.length_m:8.2f} m")
print(f"  optimal:          {optimal.length_m:8.2f} m "
      f"(gap {better.length_m / optimal.length_m - 1:.2%})")

# field-sized instance
big = rng.uniform(0, 100, size=(120, 2))
nn_big = nearest_neighbor(start, big)
better_big = improve(nn_big, big)
print("120 targets:")
print(f"  nearest neighbor: {nn_big.length_m:8.2f} m")
print(f"  improved:         {better_big.length_m:8.2f} m "
      f"({1 - better_big.length_m / nn_big.length_m:.1%} shorter)")


def draw(ax, targets, tour, title):
    chain = np.vstack([np.array(start.xy), targets[list(tour.order)]])
    ax.plot(chain[:, 0], chain[:, 1], "-", color="tab:blue", lw=1)
    ax.scatter(targets[:, 0], targets[:, 1], s=12, color="tab:green")
    ax.plot(*start.xy, "ks", ms=8)
    ax.set_title(f"{title}: {tour.length_m:.0f} m")
    ax.set_aspect("equal")


fig, axes = plt.subplots(1, 2, figsize=(12, 6))
draw(axes[0], big, nn_big, "nearest neighbor")
draw(axes[1], big, better_big, "after improvement")
fig.tight_layout()
fig.savefig("demo_route_optimization.png", dpi=120)
print("plot -> demo_route_optimization.png")
