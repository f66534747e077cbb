"""Air-combat maneuver-decision trainer.

Point-mass aircraft and missile simulation, proportional-navigation guidance,
a numpy actor-critic trained by clipped-surrogate PPO in self-play, and an
automatic curriculum over the initial angle/distance intervals.
"""

__version__ = "0.1.0"
