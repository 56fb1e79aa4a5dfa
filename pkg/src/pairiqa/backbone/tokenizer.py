"""Byte-level BPE tokenizer compatible with the published CLIP vocabulary.

Vocabulary asset: a (optionally gzipped) UTF-8 text file whose first line is a
header and whose remaining lines are ``left right`` merge rules, in priority
order. Token table = 256 byte symbols, the same 256 with a ``</w>`` suffix, one
token per merge, then ``<|startoftext|>`` and ``<|endoftext|>``. The published
file carries more merges than the model uses; ``n_merges`` selects the prefix
(48894 for the published models, giving a 49408-token table).
"""
from __future__ import annotations

import gzip
import html
import re as _re
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import regex

from ..errors import AssetError, InputError

SOT = "<|startoftext|>"
EOT = "<|endoftext|>"
CONTEXT_LENGTH = 77
PUBLISHED_MERGES = 49152 - 256 - 2

_PAT = regex.compile(
    r"""<\|startoftext\|>|<\|endoftext\|>|'s|'t|'re|'ve|'m|'ll|'d|[\p{L}]+|[\p{N}]|[^\s\p{L}\p{N}]+""",
    regex.IGNORECASE,
)


@lru_cache()
def bytes_to_unicode() -> dict[int, str]:
    """Reversible map from bytes to printable unicode characters."""
    bs = list(range(ord("!"), ord("~") + 1)) + list(range(ord("¡"), ord("¬") + 1)) + list(range(ord("®"), ord("ÿ") + 1))
    cs = bs[:]
    n = 0
    for b in range(256):
        if b not in bs:
            bs.append(b)
            cs.append(256 + n)
            n += 1
    return dict(zip(bs, map(chr, cs)))


def _pairs(word):
    return set(zip(word, word[1:]))


def _clean(text: str) -> str:
    try:
        import ftfy
        text = ftfy.fix_text(text)
    except ImportError:
        pass
    text = html.unescape(html.unescape(text)).strip()
    return _re.sub(r"\s+", " ", text).strip().lower()


@dataclass(frozen=True)
class TokenSequence:
    ids: tuple
    context_length: int = CONTEXT_LENGTH

    @property
    def length(self) -> int:
        """Number of non-pad tokens (including start and end)."""
        return self.eot_index + 1

    @property
    def eot_index(self) -> int:
        return int(max(range(len(self.ids)), key=lambda i: self.ids[i]))


class Tokenizer:
    def __init__(self, merges: list[tuple[str, str]], context_length: int = CONTEXT_LENGTH):
        b2u = bytes_to_unicode()
        self.byte_encoder = b2u
        vocab = list(b2u.values())
        vocab += [v + "</w>" for v in vocab]
        vocab += ["".join(m) for m in merges]
        vocab += [SOT, EOT]
        self.encoder = {v: i for i, v in enumerate(vocab)}
        self.decoder = {i: v for v, i in self.encoder.items()}
        self.bpe_ranks = {m: i for i, m in enumerate(merges)}
        self.context_length = context_length
        self.sot_id = self.encoder[SOT]
        self.eot_id = self.encoder[EOT]
        self.pad_id = 0
        self._cache = {SOT: SOT, EOT: EOT}

    @classmethod
    def from_file(cls, path, n_merges: int | None = PUBLISHED_MERGES, context_length: int = CONTEXT_LENGTH):
        path = Path(path)
        try:
            raw = path.read_bytes()
            if raw[:2] == b"\x1f\x8b":
                raw = gzip.decompress(raw)
            lines = raw.decode("utf-8").split("\n")
        except (OSError, UnicodeDecodeError, EOFError) as e:
            raise AssetError(f"cannot read vocabulary {path}: {e}") from e
        rules = [ln for ln in lines[1:] if ln.strip()]
        if n_merges is not None:
            rules = rules[:n_merges]
        merges = []
        for ln in rules:
            parts = ln.split()
            if len(parts) != 2:
                raise AssetError(f"malformed merge rule in {path}: {ln!r}")
            merges.append(tuple(parts))
        return cls(merges, context_length)

    @property
    def vocab_size(self) -> int:
        return len(self.encoder)

    def bpe(self, token: str) -> str:
        if token in self._cache:
            return self._cache[token]
        word = tuple(token[:-1]) + (token[-1] + "</w>",)
        pairs = _pairs(word)
        if not pairs:
            return token + "</w>"
        while True:
            bigram = min(pairs, key=lambda p: self.bpe_ranks.get(p, float("inf")))
            if bigram not in self.bpe_ranks:
                break
            first, second = bigram
            new_word = []
            i = 0
            while i < len(word):
                try:
                    j = word.index(first, i)
                except ValueError:
                    new_word.extend(word[i:])
                    break
                new_word.extend(word[i:j])
                i = j
                if word[i] == first and i < len(word) - 1 and word[i + 1] == second:
                    new_word.append(first + second)
                    i += 2
                else:
                    new_word.append(word[i])
                    i += 1
            word = tuple(new_word)
            if len(word) == 1:
                break
            pairs = _pairs(word)
        out = " ".join(word)
        self._cache[token] = out
        return out

    def encode(self, text: str) -> list[int]:
        """BPE ids for ``text`` without start/end tokens or padding."""
        ids = []
        for tok in regex.findall(_PAT, _clean(text)):
            tok = "".join(self.byte_encoder[b] for b in tok.encode("utf-8"))
            ids.extend(self.encoder[t] for t in self.bpe(tok).split(" "))
        return ids

    def decode(self, ids) -> str:
        text = "".join(self.decoder[i] for i in ids)
        inv = {v: k for k, v in self.byte_encoder.items()}
        return bytearray(inv[c] for c in text).decode("utf-8", errors="replace").replace("</w>", " ").strip()

    def __call__(self, text: str) -> TokenSequence:
        ids = [self.sot_id] + self.encode(text) + [self.eot_id]
        if len(ids) > self.context_length:
            raise InputError(
                f"prompt {text!r} needs {len(ids)} tokens, over the context limit of {self.context_length}")
        ids += [self.pad_id] * (self.context_length - len(ids))
        return TokenSequence(tuple(ids), self.context_length)


def tokenize(text: str, vocab) -> TokenSequence:
    """Tokenize with a :class:`Tokenizer` or a vocabulary file path."""
    tok = vocab if isinstance(vocab, Tokenizer) else Tokenizer.from_file(vocab)
    return tok(text)
