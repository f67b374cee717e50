"""tilerank: multi-resolution visual page retrieval engine.

Pages are tiled at several grid granularities, encoded into per-token
embeddings, stacked into nested coarse-to-fine representations, scored
by MaxSim late interaction, and optionally distilled to a fixed token
budget by greedy agglomerative clustering.
"""

from ._kernels import BACKEND as KERNEL_BACKEND
from .compressor import (
    CompressedPage,
    CompressionConfig,
    compress_corpus,
    compress_page,
    hac_compress,
)
from .core import (
    GranularitySpec,
    NestedPageRep,
    PageImage,
    QueryEmbedding,
    TokenMatrix,
    l2_normalize,
    token_matrix,
    validate_token_matrix,
)
from .encoder import (
    EncoderBackend,
    ToyEncoder,
    ToyEncoderConfig,
    conformance_check,
    encode_page,
    ingest_external,
)
from .errors import TileRankError
from .evalkit import (
    OracleTable,
    RelevanceJudgments,
    budget_sweep,
    combined_selector,
    ndcg_at_k,
)
from .index import Index, IndexManifest, build_index, load_index, storage_report
from .mvtx import read_mvtx, write_mvtx
from .scorer import ScoredPage, contribution, maxsim, maxsim_at_level, search
from .synth import SynthConfig, gen_corpus, gen_images
from .tiler import SubImageBatch, TilerConfig, partition, resize, sample_multires
from .trainer import (
    ProjectionHead,
    TrainingConfig,
    grad_total_loss,
    level_loss,
    total_loss,
    train_toy,
)

__version__ = "0.1.0"
