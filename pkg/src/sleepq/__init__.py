"""EEG sleep-quality assessment toolkit.

Pipeline: ingest recordings -> condition signals -> extract band-power,
connectivity, and phase-amplitude-coupling features -> screen features by
group statistics -> classify good vs poor sleepers with leave-one-subject-out
cross-validation.
"""

from .errors import (
    AlignmentError,
    ConfigError,
    DomainError,
    EmptyRoi,
    EmptySelection,
    InsufficientChannels,
    InsufficientCoverage,
    InsufficientData,
    ParseError,
    SignalTooShort,
    SleepQError,
    UnsupportedFormat,
    UnsupportedRate,
)
from .ingest import (
    Group,
    Hypnogram,
    Recording,
    Sex,
    SleepStage,
    StateTag,
    SubjectMeta,
    assign_group,
    compute_retention,
    load_csv_recording,
    load_edf_recording,
    load_hypnogram,
    load_meta_table,
    select_stage_epochs,
    write_csv_recording,
)
from .preprocess import (
    PreprocessResult,
    average_reference,
    band_pass,
    decimate,
    detect_bad_channels,
    preprocess_recording,
    segment_epochs,
)
from .spectral import (
    BANDS,
    ROI_ORDER,
    analytic_signal,
    band_feature_names,
    band_power,
    band_power_features,
    power_spectral_density,
    roi_channel_indices,
)
from .connectivity import (
    ConnectivityMatrix,
    connection_names,
    sliding_ensemble,
    wpli_feature_names,
    wpli_features,
    wpli_matrix,
    wpli_pair,
)
from .coupling import (
    AmplitudeDistribution,
    Comodulogram,
    PhaseBinning,
    amplitude_distribution,
    comodulogram,
    delta_beta_pac_features,
    delta_beta_pair_mi,
    modulation_index,
    pac_pair_names,
    surrogate_mi,
)
from .stats import (
    StatResult,
    chi_square_independence,
    fdr_bh,
    format_z_p,
    groupwise_feature_screen,
    mann_whitney_u,
    partial_correlation,
    pearson_correlation,
    permutation_test,
    sobel_test,
)
from .classify import (
    ClassificationReport,
    DiagonalLDA,
    InverseDistanceKNN,
    LinearSVM,
    LogisticRegressionGD,
    Standardizer,
    SubjectFeatures,
    confusion_counts,
    loso_cv,
    metrics,
    standardize,
)
from .synth import (
    PacSignalSpec,
    SyntheticSubject,
    gen_cohort,
    gen_cohort_recordings,
    gen_common_source_pair,
    gen_pac_signal,
)

__version__ = "0.1.0"
