from enum import Enum


class WindowType(str, Enum):
    """Analysis window used by the STFT front end."""

    HANN = "hann"


class AttackOp(str, Enum):
    """Audio editing operations applied between embedding and decoding.

    Values are the short operation names used in run configs and on the CLI.
    """

    NA = "NA"  # No editing
    UD = "UD"  # Up-down sampling (16 kHz -> 8 kHz -> 16 kHz)
    RN = "RN"  # Additive white Gaussian noise at a target SNR
    PN = "PN"  # Additive pink noise at a target SNR
    LF = "LF"  # Low-pass filter
    HF = "HF"  # High-pass filter
    BF = "BF"  # Band-pass filter
    BA = "BA"  # Boost audio (positive gain)
    DA = "DA"  # Duck audio (negative gain)
    SA = "SA"  # Shush attack (zero a contiguous span)


class RedundancySource(str, Enum):
    """Where the decoder takes the stand-in for the discarded redundancy from."""

    PREDICT = "predict"  # Predict Module estimate from the watermarked spectrogram
    GAUSSIAN = "gaussian"  # i.i.d. standard normal sample


class TrainingStrategy(str, Enum):
    """Per-step training strategy."""

    SINGLE = "single"  # One watermark, one key
    DOUBLE = "double"  # Two watermarks embedded sequentially under two keys


class PerceptualConstraint(str, Enum):
    """Which perceptual terms the training objective uses.

    - L2: time-domain L2 (plus the adversarial term)
    - L2_MEL: adds the multi-scale Mel term with a flat weight
    - L2_MEL_BROADWEIGHT: multi-scale Mel term on BroadWeight-scaled signals
    """

    L2 = "l2"
    L2_MEL = "l2_mel"
    L2_MEL_BROADWEIGHT = "l2_mel_broadweight"


class AdversarialForm(str, Enum):
    """Generator-side adversarial term."""

    PRINTED = "printed"  # w_p2 * log(1 - D(x_wm))
    NON_SATURATING = "non_saturating"  # -w_p2 * log(D(x_wm))


class CodecInit(str, Enum):
    """Initialisation of the bit-signal embedding and mapping matrices."""

    RANDOM = "random"
    ZERO = "zero"
