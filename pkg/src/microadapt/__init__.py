"""Adaptive microlearning remediation: prerequisite graphs, auto-graded quizzes,
targeted unit recommendations with reminders, and pseudonymized analytics."""

__version__ = "0.1.0"
