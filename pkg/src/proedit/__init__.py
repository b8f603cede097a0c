"""Progressive Gaussian-splat scene editing.

Decomposes an edit into difficulty-bounded subtasks, then walks them with
iterative dataset updates over a differentiable splatting trainer, snapshots
every stage as a selectable aggressivity level, and exposes a control API
for steering live runs.
"""

from .adaptive import MaintenanceConfig, MaintenanceReport, Maintainer
from .buffer import EditBuffer
from .camera import Camera, orbit_cameras
from .checkpoint import load_cloud, save_cloud
from .config import RunConfig, load_config, save_config
from .difficulty import DifficultyCache, difficulty, image_distance, make_oracle
from .editor import (
    RemoteEditor,
    StrengthSchedule,
    SyntheticEditor,
    SyntheticEditorConfig,
)
from .embedding import Embedding, PromptPair, interpolate, load_embeddings, save_embeddings
from .errors import ProeditError
from .pipeline import PipelineConfig, ProgressiveRun, Snapshot, preview, select_aggressivity
from .scheduler import (
    LossWindow,
    Schedule,
    build_schedule,
    decompose,
    finalize,
    prune,
    update_convergence,
)
from .service import ControlService
from .splat import AdamState, Gaussian, GaussianCloud, render, train_step

__version__ = "0.1.0"
