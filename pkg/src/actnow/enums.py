from enum import Enum


class StreamFormat(Enum):
    CSV = "csv"
    RAW_F64 = "raw_f64"


class Phase(Enum):
    TRAIN = "train"
    VAL = "val"
    TEST = "test"


class SsbMode(Enum):
    INTERLEAVED = "interleaved"
    REPLICA = "replica"


class DriftKind(Enum):
    MEAN_SHIFT = "mean_shift"
    VARIANCE_SHIFT = "variance_shift"
    PERIOD_SHIFT = "period_shift"
    MIXED = "mixed"


class TailPolicy(Enum):
    DROP = "drop"      # floor partitions, remainder nodes never forecast
    APPEND = "append"  # one extra short partition holds the remainder


class Arm(Enum):
    FROZEN = "frozen"
    SSB = "ssb"
    SSB_FSB = "ssb+fsb"
    SSB_FSB_VAL = "ssb+fsb+val"

    @property
    def uses_ssb(self) -> bool:
        return self is not Arm.FROZEN

    @property
    def uses_fsb(self) -> bool:
        return self in (Arm.SSB_FSB, Arm.SSB_FSB_VAL)

    @property
    def uses_val(self) -> bool:
        return self is Arm.SSB_FSB_VAL
