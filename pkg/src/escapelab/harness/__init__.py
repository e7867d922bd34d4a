from .config import ExperimentConfig
from .records import RunRecord, load_record, persist_record
