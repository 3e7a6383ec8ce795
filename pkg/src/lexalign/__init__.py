"""Discourse-dimension mining and LLM alignment measurement toolkit."""

__version__ = "0.1.0"

from lexalign.corpus import Corpus, Document, Subset, load_corpus, subset
from lexalign.factors import (
    DimensionDescriptor,
    DimensionScore,
    FactorModel,
    Pole,
    extract_factors,
    fit_factors,
    rotate_varimax,
    score_documents,
    select_exemplars,
)
from lexalign.lexstats import (
    CollocationPair,
    FeatureMatrix,
    KeywordEntry,
    build_matrix,
    collocations,
    keyness,
    log_dice,
    log_likelihood,
)
from lexalign.pipeline import RunConfig, run_pipeline
from lexalign.textprep import ContentStream, Token, filter_content, tag_and_lemmatize, tokenize

__all__ = [
    "Corpus",
    "Document",
    "Subset",
    "load_corpus",
    "subset",
    "Token",
    "ContentStream",
    "tokenize",
    "tag_and_lemmatize",
    "filter_content",
    "KeywordEntry",
    "CollocationPair",
    "FeatureMatrix",
    "keyness",
    "collocations",
    "build_matrix",
    "log_likelihood",
    "log_dice",
    "Pole",
    "FactorModel",
    "DimensionScore",
    "DimensionDescriptor",
    "extract_factors",
    "rotate_varimax",
    "fit_factors",
    "score_documents",
    "select_exemplars",
    "RunConfig",
    "run_pipeline",
]
