"""Clasificacion de idioma por n-gramas de caracteres.

Cada simbolo se rematerializa como im_map(simbolo) desde S; el n-grama en
la posicion i es XOR_j pi0^j(c_{i-j}) y el vector de frase es el bundle de
todos los n-gramas (los parciales del inicio incluidos, como hace la FIFO
del microcodigo, que arranca a ceros).
"""
import logging
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from app.core.errors import IllegalSymbolError, InsufficientDataError, SentenceTooShortError
from app.models.hypervector import HyperVector, hamming
from app.models.memory import SearchResult
from app.schemas.run_config import BundlingMode
from app.services.algos.bundling import Bundler
from app.services.encoder_service import EncoderContext

logger = logging.getLogger(__name__)

ALPHABET = "abcdefghijklmnopqrstuvwxyz "
SYMBOL_BITS = 5
DEFAULT_NGRAM = 5
MAX_SENTENCE_SYMBOLS = 1023

_SYMBOL_INDEX = {ch: i for i, ch in enumerate(ALPHABET)}


def symbols_of(sentence: Union[str, Sequence[int]]) -> np.ndarray:
    """Indices 0..26 de una frase; los enteros se validan tal cual."""
    if isinstance(sentence, str):
        try:
            return np.array([_SYMBOL_INDEX[ch] for ch in sentence], dtype=np.int64)
        except KeyError as exc:
            raise IllegalSymbolError(f"symbol {exc.args[0]!r} is outside the 27-symbol alphabet")
    symbols = np.asarray(sentence, dtype=np.int64).reshape(-1)
    bad = symbols[(symbols < 0) | (symbols >= len(ALPHABET))]
    if bad.size:
        raise IllegalSymbolError(f"symbol index {int(bad[0])} is outside [0, {len(ALPHABET) - 1}]")
    return symbols


def truncate_sentence(symbols: np.ndarray) -> np.ndarray:
    if symbols.size > MAX_SENTENCE_SYMBOLS:
        logger.warning(f"[LANG] Sentence of {symbols.size} symbols truncated to {MAX_SENTENCE_SYMBOLS}")
        return symbols[:MAX_SENTENCE_SYMBOLS]
    return symbols


def _power_gathers(base: np.ndarray, count: int) -> list[np.ndarray]:
    gathers = [np.arange(base.size)]
    for _ in range(1, count):
        gathers.append(gathers[-1][base])
    return gathers


def lang_ngrams(symbols: np.ndarray, ctx: EncoderContext, ngram: int = DEFAULT_NGRAM) -> np.ndarray:
    """Matriz (L, D) con el n-grama de cada posicion."""
    if ngram < 1:
        raise InsufficientDataError(f"ngram must be >= 1, got {ngram}")
    items = ctx.item_table(SYMBOL_BITS)[symbols]
    gathers = _power_gathers(ctx.folded_gather(ctx.mixer.pi0), ngram)
    ngrams = items.copy()
    for j in range(1, min(ngram, len(symbols))):
        ngrams[j:] ^= items[: len(symbols) - j][:, gathers[j]]
    return ngrams


def lang_encode_reference(
    sentence: Union[str, Sequence[int]],
    ctx: EncoderContext,
    ngram: int = DEFAULT_NGRAM,
    mode: Union[BundlingMode, str] = BundlingMode.EXACT,
) -> HyperVector:
    symbols = truncate_sentence(symbols_of(sentence))
    if symbols.size == 0:
        raise SentenceTooShortError("cannot encode an empty sentence")
    ngrams = lang_ngrams(symbols, ctx, ngram)
    if symbols.size < ngram:
        return HyperVector.from_bits(ngrams[-1])
    bundler = Bundler(ctx.geometry.d, mode)
    bundler.add_many(ngrams)
    return bundler.result()


def nearest_prototype(query: HyperVector, prototypes: Sequence[HyperVector]) -> SearchResult:
    """Minimo de Hamming sobre prototipos; empate al indice mas bajo."""
    if not prototypes:
        raise InsufficientDataError("no prototypes to search")
    distances = [hamming(query, p) for p in prototypes]
    index = int(np.argmin(distances))
    return SearchResult(index=index, distance=int(distances[index]))


@dataclass
class LangModel:
    labels: list[str]
    prototypes: list[HyperVector]
    ngram: int = DEFAULT_NGRAM
    alphabet: str = field(default=ALPHABET)

    def __post_init__(self):
        if len(self.labels) != len(self.prototypes):
            raise InsufficientDataError("one prototype per language is required")

    def classify(
        self,
        sentence: Union[str, Sequence[int]],
        ctx: EncoderContext,
        mode: Union[BundlingMode, str] = BundlingMode.EXACT,
    ) -> SearchResult:
        symbols = symbols_of(sentence)
        if symbols.size < self.ngram:
            raise SentenceTooShortError(f"sentence has {symbols.size} symbols, at least {self.ngram} are needed")
        return nearest_prototype(lang_encode_reference(symbols, ctx, self.ngram, mode), self.prototypes)
