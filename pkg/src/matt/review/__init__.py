from .store import ReviewDecision, ReviewQueueEntry, ReviewStats, ReviewStore

__all__ = ["ReviewDecision", "ReviewQueueEntry", "ReviewStats", "ReviewStore"]
