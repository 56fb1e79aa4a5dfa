"""Convert a published CLIP release file (.pt) into the package's weight archive.

    python scripts/convert_checkpoint.py RN50.pt weights/RN50.npz --vocab bpe_simple_vocab_16e6.txt.gz
    python scripts/convert_checkpoint.py ViT-B-32.pt weights/ViT-B-32.npz

Writes ``OUT.npz`` and ``OUT.card.json`` (architecture hyper-parameters read
off the tensor shapes). Head counts assume 64-wide heads; override with
``--card-field text_heads=8`` etc. (values parsed as JSON). With ``--vocab``
the BPE merges are copied next to the archive.
"""
import argparse
import json

from pairiqa.backbone.archive import file_sha256
from pairiqa.backbone.convert import convert_state_dict, load_published_state_dict


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("checkpoint")
    ap.add_argument("out")
    ap.add_argument("--vocab")
    ap.add_argument("--name", help="model name recorded in the card")
    ap.add_argument("--card-field", action="append", default=[], metavar="KEY=VALUE")
    args = ap.parse_args()
    sd = load_published_state_dict(args.checkpoint)
    overrides = {"name": args.name} if args.name else {}
    for item in args.card_field:
        key, _, value = item.partition("=")
        overrides[key] = json.loads(value)
    archive, card = convert_state_dict(sd, args.out, overrides, args.vocab)
    print(f"{archive} sha256={file_sha256(archive)}")
    print(f"{card}")


if __name__ == "__main__":
    main()
