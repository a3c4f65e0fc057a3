"""Row/column flash speller: signal chain, decoder, composer, sessions.

The public surface, by layer:

* signals   — filtering, epoching, decimation into feature vectors
* swlda     — stepwise-selected linear discriminant training and scoring
* paradigm  — flash schedules, timing, score accumulation, recognition
* composer  — keyboard grid, key semantics, composed-text state
* suggestions — word prediction providers and the frozen-slot engine
* subject   — synthetic EEG operator and scripted intention policies
* metrics   — rate and keystroke-savings reports
* session   — scripted calibration/validation/online runs over a virtual
  clock, JSONL event logs, bit-exact replay
* service   — live WebSocket sessions speaking the wire protocol
* cli       — command-line entry point
"""

from .composer import (
    CompositionState,
    Key,
    KeyboardLayout,
    apply_key,
    display_text,
    last_word,
    parse_key_label,
)
from .errors import (
    DegenerateClassError,
    EmptySelectionError,
    InputError,
    ParameterError,
    PolicyExhaustedError,
    ProtocolError,
    ProviderError,
    RankError,
    ShapeError,
    SpellerError,
    UndefinedRateError,
)
from .metrics import (
    MetricsReport,
    SentenceRecord,
    average_report,
    compute_report,
    emit_report,
    itr_bits_per_selection,
    itr_star,
    keystroke_metrics,
    record_from_log_events,
    report_from_record,
)
from .paradigm import (
    FlashSchedule,
    SelectionTrial,
    TimingParams,
    accumulate,
    flash_events,
    make_schedule,
    recognize,
    schedule_duration,
    selection_duration_ms,
)
from .session import (
    SessionConfig,
    load_config,
    read_log,
    replay_log,
    run_calibration,
    run_online,
    run_session,
    run_validation,
)
from .signals import (
    EegEpoch,
    RawRecording,
    bandpass_filter,
    decimate_epoch,
    extract_epoch,
    load_recording,
    save_recording,
)
from .subject import CopySpellPolicy, ImprovisePolicy, SubjectParams, SyntheticSubject
from .suggestions import SuggestionEngine, SuggestionSet, make_provider
from .swlda import TrainedModel, TrainingSet, build_training_set, load_model, save_model, train

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
