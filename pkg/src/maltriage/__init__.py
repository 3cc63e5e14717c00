"""Retrieval-augmented malware triage pipeline.

Core flow: encode a code sample, retrieve related attack-technique
documents, extract behavior keywords, drive a two-stage LLM prompt
(structured forensic report, then a closed-set verdict), and persist
everything for SIEM export and analyst review.
"""

__version__ = "0.1.0"


class MaltriageError(Exception):
    """Base class for errors raised by this package."""
