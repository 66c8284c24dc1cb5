"""Neural view fields for 3D urban scenes.

A compact network maps viewpoints (x, y, z, yaw, pitch) to the
distribution of thematic content visible from them. The package covers
the full loop: procedural scenes, a rasterization oracle for ground
truth, training, direct and inverse queries, perception metrics,
evaluation protocols, and an HTTP service for the browser UI.
"""

from .field import (
    Normalizer,
    Plane,
    Sphere,
    Viewpoint,
    encode,
    encode_viewpoint,
    hemisphere,
    param_point,
)
from .scene import (
    Building,
    Scene,
    ThematicClass,
    facade_patches,
    generate_city,
    load_scene,
    save_scene,
)
from .raster import (
    Camera,
    CategoricalBins,
    ClassImage,
    ScalarBins,
    histogram,
    render,
    render_falsecolor,
)
from .dataset import (
    Dataset,
    FacadeMountedSampling,
    StreetLevelSampling,
    UniformSampling,
    build_dataset,
    load_views_csv,
    sample_viewpoints,
    save_views_csv,
    split,
    subset,
)
from .net import (
    ModelParams,
    backward_inputs,
    backward_params,
    forward,
    init,
    load_checkpoint,
    save_checkpoint,
)
from .train import TrainConfig, TrainReport, evaluate_rmse, train
from .percept import PerceptionMetric
from .query import (
    ExactVector,
    IntervalConstraints,
    InverseConfig,
    InverseResult,
    MetricTarget,
    direct_query,
    facade_summary,
    inverse_gradient,
    inverse_sweep,
    parse_target,
)
from .analysis import (
    KnnModel,
    compare_models,
    knn_predict,
    latent_codes,
    make_material_scene,
    project_2d,
    region_error,
)

__version__ = "0.1.0"
