from .noise import NoiseModel, add_noise
from .slm import SignalVector, SLMMode, decode_slm, encode_slm
from .transmission import TransmissionMatrix, check_intensities, gen_real_frame, gen_transmission_matrix, measure
