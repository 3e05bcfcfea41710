from .formats import SpeckleSet, load_set, load_tm, save_set, save_tm
from .glyphs import GLYPHS, render_glyph
from .synth import DatasetSpec, ExperimentSpec, MediumSpec, gen_dataset, sample_images
