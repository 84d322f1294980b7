"""sprout: a step-by-step programming tutorial authoring engine.

An LLM agent plans tutorials in observation/thought/action cycles over a
tree of thoughts; authors steer the result through grouping, splitting,
trimming, branch assembly and node-space refinement, while text-code
anchors keep every paragraph verifiably tied to source lines.
"""

__version__ = "0.1.0"
