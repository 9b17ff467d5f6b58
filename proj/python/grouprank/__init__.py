"""Groupwise LLM reranking: metrics, fusion, rewards and orchestration."""

from ._grouprank import *  # noqa: F401,F403
from ._grouprank import __doc__  # noqa: F401

__version__ = "0.1.0"
