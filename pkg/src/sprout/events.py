"""Session event kinds shared by the engine, the tree operations and the
HTTP event stream."""

from __future__ import annotations

from enum import Enum


class EventKind(str, Enum):
    STEP_STARTED = "StepStarted"
    OBSERVATION = "Observation"
    THOUGHTS_PROPOSED = "ThoughtsProposed"
    VOTES = "Votes"
    NODE_CREATED = "NodeCreated"
    ANCHOR_RESOLVED = "AnchorResolved"
    CHAIN_CHANGED = "ChainChanged"
    PAUSED = "Paused"
    FINISHED = "Finished"
    ERROR = "Error"
    # transport-level: sent once to each new subscriber, carrying full state
    SNAPSHOT = "Snapshot"
