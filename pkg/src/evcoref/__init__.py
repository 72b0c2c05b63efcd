"""End-to-end event coreference over frozen embeddings.

Pipeline: corpus parsing -> layered embeddings -> scalar mix + windowed
attention -> mention proposal -> type-informed pair/type scoring ->
type-refined rescoring -> type-guided chain decoding, with a full
MUC / B-cubed / CEAF-e / BLANC / typed-F1 evaluation suite.
"""
from .corpus import (
    Chain, ChainSet, CorpusError, Document, Mention, TypeInventory,
    gold_chains, parse_corpus, write_predictions,
)
from .embeddings import (
    DirectoryEmbeddings, EmbeddingFormatError, InMemoryEmbeddings,
    LayeredEmbeddings, SynthEmbeddings, load_embeddings, synth_embeddings,
    write_embeddings,
)
from .autograd import NumericError, Parameter, Tensor
from .nn import Adamax, FeedForward, FFNNConfig, dropout_mask, finite_difference_check
from .encoder import mask_attention, scalar_mix
from .model import (
    CorefModel, EmbeddingMismatchError, ForwardResult, ModelConfig,
    ModelConfigError, ScoreTable, select_top_l,
)
from .decode import decode, naive_decode, type_rule_decode
from .metrics import (
    MetricReport, PRF, avg_f, b_cubed, blanc, brute_force_ceaf, ceaf_e,
    evaluate_pairs, muc, type_f1,
)
from .training import (
    TrainConfig, TrainResult, evaluate_model, gold_antecedent_sets,
    predict_chains, run_training,
)
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint

__version__ = "0.1.0"
