from .adapter import Backbone, BackboneConfig, load_backbone
from .mock import MockEncoder, TinyTextEncoder, brightness_mock
from .model import CLIPModel, ModelSpec
from .surgery import apply_positional_surgery, interpolate_positional_embedding
from .tokenizer import Tokenizer, tokenize
