"""
From audio to CTC targets with the word-rate heuristic
======================================================

There are no transcripts, so the target for an utterance is its dialect tag
repeated once per estimated word. The word count comes from how much speech
the energy VAD finds: five words per second, rounded half up, at least one.
"""

import numpy as np

from ctcdid.corpus import SynthSpec, synthesize_corpus
from ctcdid.labels import LAH, Exact, Vocabulary, build_target, estimate_word_count, lah_word_count
from ctcdid.vad import detect_speech

utts = synthesize_corpus(SynthSpec(["EGY", "MSA"], 2, seed=3))
vocab = Vocabulary.build(["EGY", "MSA"])
print("vocabulary:", vocab.tokens)

for u in utts:
    seg = detect_speech(u)
    w = estimate_word_count(u, LAH(5.0))
    print(f"\n{u.id}: {u.duration_s:.2f} s of audio, {seg.total_speech_s:.2f} s of detected speech")
    print("  speech segments:", [(round(a, 2), round(b, 2)) for a, b in seg.segments[:4]], "...")
    print("  LAH words:", w, " generator bursts:", u.word_count)
    print("  target:", build_target(u, w, vocab))

# The generator knows how many bursts it drew, which stands in for a word
# count from a transcript. Both providers plug into the same code path.
exact = Exact.from_utterances(utts)
print("\nexact counts:", [estimate_word_count(u, exact) for u in utts])

# Rounding is half up, so 3.7 s gives 19 words and 0.1 s still gives one.
print("w(3.7) =", lah_word_count(3.7), " w(0.1) =", lah_word_count(0.1))
