from .binarize import binarize, pixel_accuracy
from .double_pr import (
    CalibrationSet,
    TMEstimate,
    estimate_tm,
    gaussian_calibration_set,
    load_estimate,
    recover_signal,
    save_estimate,
)
from .sift import sift_dataset
