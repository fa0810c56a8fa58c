"""Two-stage scheduling: a DQN assignment stage over OR rear-stage solvers."""
from .core import (
    Instance,
    Resource,
    Schedule,
    StructuralError,
    Task,
    TimeWindow,
    TransitionModel,
    Violation,
    evaluate_objective,
    load_instance,
    load_schedule,
    resource_usage,
    save_instance,
    save_schedule,
    transition_time,
    validate,
)

__version__ = "0.1.0"
