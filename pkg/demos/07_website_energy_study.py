"""
A website energy study at desk scale
====================================

The website pipeline prefilters a URL catalog (denylist, duplicate
top-level domains, certificate/timeout/HTTP failures), then measures each
surviving page: a fresh browser per repetition, a fixed per-URL slot, one
continuous trace sliced per load window, medians over repetitions.
"""

from powerbench import wpm
from powerbench.controller import Controller
from powerbench.device import SimDevice
from powerbench.profiles import profile

# A synthetic catalog of 12 sites with injected failures, ordered by
# popularity; the .fr twin of the most popular site will be filtered.
catalog = wpm.synthesize_catalog(12, seed=5, cert_errors=1, timeouts=2,
                                 http_errors=1, duplicate_tlds=1)
urls = [e.url for e in catalog.entries]

result = wpm.prefilter(urls, catalog)
print("prefilter partitions:", result.counts())
print("  filtered:", result.filtered)

# Measure the survivors on a simulated phone, 2 repetitions each, with a
# page-load budget inside a fixed synchronization slot.
device = SimDevice("d1", profile("SMJ337A"), seed=9)
controller = Controller("node1", [device])
runner = wpm.WpmRunner(controller, catalog)
request = wpm.WpmRequest(
    url_list=result.active,
    device_id="d1",
    reps=2,
    automation="interact",       # scroll the page during the load
    per_page_budget_s=8.0,
    page_slot_s=12.0,
)
outcome = runner.run(request)

print(f"\npipeline: {' -> '.join(outcome.step_log)}")
print(f"trace {outcome.trace_id}: {outcome.total_energy_j:.1f} J total, "
      f"{outcome.idle_energy_j:.1f} J between loads\n")
print(f"{'url':38s} {'median J':>9s} {'KB':>7s}  cpu p25/p50/p75")
for u in outcome.urls:
    print(f"{u.url:38s} {u.energy_j_median:9.2f} {u.page_bytes_median / 1e3:7.0f}"
          f"  {u.cpu_p25:.2f}/{u.cpu_p50:.2f}/{u.cpu_p75:.2f}")

# The report document carries plot-ready series for the console.
doc = wpm.report(outcome)
print(f"\nreport series: {len(doc['series']['energy_per_url'])} energy bars, "
      f"{len(doc['series']['current_ma'])} current points at "
      f"{wpm.DISPLAY_DOWNSAMPLE_S} s spacing")
