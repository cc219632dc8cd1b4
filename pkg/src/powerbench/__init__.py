"""powerbench: a remote power-measurement testbed with simulated hardware.

The package mirrors a real deployment: a central access server schedules
jobs onto vantage points, each vantage point runs a controller that owns a
relay bank, a high-frequency power monitor, and a set of test devices. All
hardware is simulated, so every protocol, state machine, and formula is
executable and testable on a laptop.
"""

__version__ = "0.1.0"
