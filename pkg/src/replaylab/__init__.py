"""replaylab: a replay-testing laboratory for a miniature smart-contract
platform.

The pieces, in pipeline order: record a "historic" chain from a scenario
(`chain`, `pipeline.record_scenario`), serve it through an explorer-shaped
HTTP API (`explorer`), fetch everything needed for replay (`explorer`),
translate history into an executable test plan (`scriptgen`), run the plan
under controlled block timestamps (`replayer`), and measure and draw the
results (`analytics`, `viz`).
"""

__version__ = "0.1.0"
