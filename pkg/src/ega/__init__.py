"""Residual adapters over frozen unit embeddings, plus the harness around them:
deterministic training, inverted-file retrieval evaluation, and drift-bound
instrumentation."""

from .adapters import (
    AdapterConfig,
    EgaParams,
    LoraParams,
    adapter_backward,
    adapter_forward,
    adapter_forward_cached,
    adapter_input_jvp,
    adapter_input_vjp,
    ega_forward,
    ega_init,
    gate_forward,
    init_adapter,
    load_params,
    lora_forward,
    lora_init,
    save_params,
)
from .bound import (
    BoundEstimate,
    compute_bound,
    estimate_lipschitz,
    linear_illustration,
    measure_drift,
)
from .data import (
    EmbeddingSet,
    SplitSpec,
    gen_synthetic,
    load_embeddings,
    load_embeddings_csv,
    make_split,
    save_embeddings,
)
from .errors import (
    ConfigError,
    DataFormatError,
    DegenerateNormError,
    EgaError,
    NumericError,
    VariantMismatchError,
)
from .ivf import IvfIndex, SearchResult, brute_force_knn, build, kmeans, search
from .losses import LossOutput, TripletBatch, active_ratio, supcon_infonce_loss, triplet_loss
from .metrics import (
    MetricsReport,
    anns_recall,
    distance_histograms,
    evaluate_grid,
    label_precision,
    worst_case_lp,
)
from .training import AdamWState, TrainConfig, TrainTelemetry, adamw_step, cosine_lr, sample_triplets, train

__all__ = [name for name in dir() if not name.startswith("_")]
