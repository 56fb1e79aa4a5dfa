"""Zero-shot image quality and look assessment with antonym prompt pairs."""
from .metrics import level_correlation, pairwise_accuracy, plcc, srocc
from .prompts import PromptPair, PromptRegistry, get_pair, render
from .scoring import compare_images, cosine_similarity, pair_score, score_attributes, score_image

__version__ = "0.1.0"
