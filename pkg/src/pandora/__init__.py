"""Unified structured-knowledge reasoning over tables, databases, and graphs.

Sources are converted into a shared columnar box representation; questions
are answered by retrieving verified demonstrations from memory, prompting a
language model for step-wise reasoning plus an executable dataframe program,
and repairing the program with execution feedback until it yields a valid
answer.
"""

__version__ = "0.1.0"

from .boxes import Box, BoxSet, FieldName, ForeignKey, Value  # noqa: F401
from .sources import KnowledgeSource  # noqa: F401
