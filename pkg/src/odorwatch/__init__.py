"""odorwatch: community odor reporting, smell-event prediction, and
interpretable pollution-pattern analysis."""

__version__ = "0.1.0"
