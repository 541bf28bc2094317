"""Training-free prompt-synthesis and gated-memory engine over feature fixtures.

Subpackages by concern: maps (shared vector/grid math), scale (contextual
scale selection), prompts (auxiliary point synthesis), gate (memory write
policy), simulate (synthetic drift harness), metrics (mask quality),
tensorio/manifest (fixture formats), cli (command surface).
"""

__version__ = "0.1.0"
