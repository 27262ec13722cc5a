"""Plan a one-hectare UAV survey and look at the numbers behind it.

The field is a 100 m square. Tracks are laid 3.93 m apart (the effective
width one track adds at 10% sidelap), captures repeat every 0.82 s at
3 m/s, and each uncompressed image weighs 192 Mbit.
"""
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from rumexsim import (DEFAULT_CAMERA, GeoPoint, capture_schedule, footprint,
                      plan_coverage, survey_estimate, wgs84_to_enu)
from rumexsim.engine import square_field

origin = GeoPoint(49.0, 8.0)
field = square_field(100.0)

plan = plan_coverage(field, spacing_m=3.93, altitude_m=10.0, speed_mps=3.0)
schedule = capture_schedule(plan, DEFAULT_CAMERA, overlap=0.1, origin=origin)
est = survey_estimate(plan, schedule)

print(f"tracks:             {len(plan.tracks)} x {plan.tracks[0].length_m:.0f} m")
print(f"total track length: {est.total_path_m:.0f} m")
print(f"survey duration:    {est.duration_s:.0f} s = {est.duration_s / 60:.1f} min")
print(f"images:             {est.image_count}")
print(f"capture rate:       {est.mean_capture_rate_bps / 1e6:.1f} Mbit/s "
      f"(+{est.fpv_rate_bps / 1e6:.0f} Mbit/s FPV)")
print(f"raw data volume:    {est.data_volume_bits / 8e9:.1f} GB")

fig, ax = plt.subplots(figsize=(7, 7))
xs = [p.east_m for p in field.vertices] + [field.vertices[0].east_m]
ys = [p.north_m for p in field.vertices] + [field.vertices[0].north_m]
ax.plot(xs, ys, "k-", lw=2, label="field boundary")
for t in plan.tracks:
    ax.annotate("", xy=t.end.xy, xytext=t.start.xy,
                arrowprops=dict(arrowstyle="->", color="tab:blue", lw=0.8))
# footprints of the first track show the 10% forward overlap
for event in schedule[:8]:
    corners = footprint(origin, event.pose, DEFAULT_CAMERA)
    fx = [c.east_m for c in corners] + [corners[0].east_m]
    fy = [c.north_m for c in corners] + [corners[0].north_m]
    ax.plot(fx, fy, color="tab:orange", lw=0.7, alpha=0.8)
ax.set_aspect("equal")
ax.set_xlabel("east [m]")
ax.set_ylabel("north [m]")
ax.set_title("serpentine coverage, 3.93 m spacing; first captures outlined")
ax.legend(loc="upper right")
fig.tight_layout()
fig.savefig("demo_survey_planning.png", dpi=120)
print("plot -> demo_survey_planning.png")
