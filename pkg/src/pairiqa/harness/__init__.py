from .cache import ScoreCache, purge
from .config import RunConfig, load_config, parse_config
from .evaluate import EvalReport, eval_dataset, make_image_scorer
from .manifest import DatasetManifest, ManifestRecord, ingest_manifest, parse_manifest, write_manifest
from .studies import abstract_pair_study, ablation_matrix, paired_benchmark_compare, rank_extremes
