"""Acoustic features of sustained vowels and LDA screening for ALS-related dysarthria."""
from .dataset import VoiceRecording, decode_recording, load_corpus, resample, trim_silence
from .featureset import (FEATURE_NAMES, FEATURE_SET_VERSION, FeatureTable, analyze_vowel,
                         assemble, correlation_survey, extract_corpus, standardize)
from .model import (CrossValidator, LdaModel, load_model, loso_cv, save_model,
                    stratified_kfold_cv, train_lda)
from .pitch import segment_periods, track_f0
from .select import backward_stepwise, rank_features

__version__ = "0.1.0"

__all__ = [
    "FEATURE_NAMES", "FEATURE_SET_VERSION", "CrossValidator", "FeatureTable", "LdaModel",
    "VoiceRecording", "analyze_vowel", "assemble", "backward_stepwise", "correlation_survey",
    "decode_recording", "extract_corpus", "load_corpus", "load_model", "loso_cv",
    "rank_features", "resample", "save_model", "segment_periods", "standardize",
    "stratified_kfold_cv", "track_f0", "train_lda", "trim_silence",
]
