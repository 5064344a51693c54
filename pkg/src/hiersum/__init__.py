"""Hierarchical repository-level Java code summarization.

Segments Java files along their syntax tree, summarizes each segment with
role-specific prompts against any OpenAI-compatible backend, and folds the
results bottom-up into file, package and repository summaries grounded in a
business-domain context. Ships an evaluation harness (ROUGE-L, BLEU,
embedding similarity, LLM-as-judge, coverage audit) and a CLI.
"""

__version__ = "0.1.0"
