"""Bus timetable generation with a rule-constrained DQN dispatcher."""

__version__ = "0.4.0"
