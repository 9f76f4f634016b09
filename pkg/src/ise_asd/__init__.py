"""Harmonic speech-intelligibility enhancement with HHT-Amp pitch tracking,
phase-compensated gammatone bands and ESTOI-based evaluation."""

from .audio import (
    FramePlan,
    MixSpec,
    VoicedMask,
    Waveform,
    detect_vuv,
    load_vuv_labels,
    load_wav,
    mix_at_snr,
    overlap_add,
    plan_frames,
    split_frames,
    write_wav,
)
from .emd import EemdConfig, ImfDecomposition, eemd, emd
from .enhance import (
    GTF_F0,
    ISE_ASD,
    EnhancementConfig,
    GainProfile,
    builtin_profiles,
    enhance_frame,
    enhance_utterance,
    run_pipeline,
    unit_profile,
)
from .gammatone import build_filter, cascade_filter
from .metrics import estoi, one_way_anova, sti_category, summarize
from .pitch import PitchConfig, PitchTrack, estimate_pitch_track

__all__ = [
    "build_filter",
    "builtin_profiles",
    "cascade_filter",
    "detect_vuv",
    "eemd",
    "EemdConfig",
    "emd",
    "enhance_frame",
    "enhance_utterance",
    "EnhancementConfig",
    "estimate_pitch_track",
    "estoi",
    "FramePlan",
    "GainProfile",
    "GTF_F0",
    "ImfDecomposition",
    "ISE_ASD",
    "load_vuv_labels",
    "load_wav",
    "mix_at_snr",
    "MixSpec",
    "one_way_anova",
    "overlap_add",
    "PitchConfig",
    "PitchTrack",
    "plan_frames",
    "run_pipeline",
    "split_frames",
    "sti_category",
    "summarize",
    "unit_profile",
    "VoicedMask",
    "Waveform",
    "write_wav",
]

__version__ = "0.1.0"
