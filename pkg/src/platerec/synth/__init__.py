from .deform import (
    DeformationConfig,
    SurfaceState,
    audit_isometry,
    cylindrical_bend,
    generate_states,
    rest_grid,
)
from .render import RenderConfig, RenderedFrame, render_state
from .textures import BACKGROUND_KINDS, make_background
from .masks import MaskConfig, MaskSample, build_mask_dataset, load_mask_set, save_mask_set
from .dataset import (
    Dataset,
    DatasetConfig,
    DatasetManifest,
    generate_dataset,
    load_dataset,
    save_dataset,
    split_dataset,
)
