"""Hierarchical fashion query parser: word vectors, PoS tagging, transition
dependency labels and entity recognition, trained in sequence."""

from .corpus import AnnotatedSentence, generate_corpus, load_corpus, normalize_tokenize, save_corpus, split_dataset
from .pipeline import Bundle, PipelineConfig, QueryAnalysis, parse_query, train_pipeline

__version__ = "0.1.0"

__all__ = [
    "AnnotatedSentence", "Bundle", "PipelineConfig", "QueryAnalysis", "generate_corpus", "load_corpus",
    "normalize_tokenize", "parse_query", "save_corpus", "split_dataset", "train_pipeline",
]
