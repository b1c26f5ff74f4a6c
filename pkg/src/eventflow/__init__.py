"""Event-traffic engine.

Assigns baseline and event-perturbed vehicle demand to a road network under
habit, selfish, altruism, and mixed behavioral scenarios, and plans informed
mode-change demand reductions ranked by marginal path cost.
"""

__version__ = "0.1.0"
