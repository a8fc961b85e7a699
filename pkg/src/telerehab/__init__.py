"""Telerehabilitation engine.

Skeleton-stream exercise recognition and scoring, protocol-driven exercise
recommendation, subjective assessments, progress analytics, a prioritized
adaptive streaming simulator, and a document-store HTTP service.
"""

__version__ = "0.1.0"
