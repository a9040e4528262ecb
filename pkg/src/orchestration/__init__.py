"""
Case-study reproduction using LangGraph
"""

from src.orchestration.state import ReproductionState
from src.orchestration.workflow import ReproductionWorkflow

__all__ = [
    "ReproductionWorkflow",
    "ReproductionState"
]
