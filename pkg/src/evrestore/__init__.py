"""Joint motion deblurring and event super-resolution toolkit."""

from .events import (Event, EventStream, build_representation,
                     downsample_events, encode_voxel_grid, event_mask,
                     rescale_tensor, slice_window)
from .simulator import (FrameSequence, SimulatorConfig, make_blur_mask,
                        simulate_events, synthesize_blur)
from .dataset import DatasetSample, SceneSpec, generate_scene, read_sample, write_sample
from .model import (FusionNet, ModelOutput, NetworkConfig, forward,
                    load_checkpoint, predict_sequence, save_checkpoint)
from .train import TrainConfig, TrainReport, train
from .metrics import psnr, ssim
from .calibrate import (CalibrationResult, estimate_homography,
                        estimate_temporal_offset, gradient_map,
                        stack_event_frame)

__version__ = "0.1.0"
