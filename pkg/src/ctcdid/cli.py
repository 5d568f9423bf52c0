"""Command-line entry point: synth -> prepare -> train -> eval / stream / sweep / compare-prep.

Every subcommand takes its settings from flags, optionally seeded from a
TOML file (``--config``); flags win. A table named after the subcommand
(``[train]``) or top-level keys supply defaults. Failures print one JSON
object on stderr: exit 2 for usage errors, 1 for pipeline errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .checkpoint import Checkpoint
from .corpus import (SynthSpec, load_manifest, load_wav, manifest_entries, save_corpus, split_corpus,
                     synthesize_corpus, write_manifest)
from .decode import UNKNOWN, majority_vote
from .ctc import collapse, greedy_decode
from .encoder import EncoderConfig
from .errors import CtcDidError
from .evaluation import (SWEEP_GRID, compare_label_prep, duration_bin_report, predict_all, run_sweep,
                         score)
from .labels import LAH, Exact, Vocabulary, prepare_targets, read_targets, write_targets
from .streaming import StreamConfig, StreamState
from .train import TrainConfig, train

log = logging.getLogger("ctcdid")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _floats(s):
    return [float(x) for x in s.split(",") if x.strip()]


def _tags(s):
    return [x.strip() for x in s.split(",") if x.strip()]


def _echo(args):
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("func",)}


def _write_run_config(path, args):
    with open(path, "w") as fh:
        json.dump(_echo(args), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _word_counts(path):
    if not path:
        return None
    with open(path) as fh:
        return {k: int(v) for k, v in json.load(fh).items()}


def _default_word_counts(manifest):
    path = os.path.join(os.path.dirname(os.path.abspath(manifest)), "word_counts.json")
    return path if os.path.exists(path) else None


def _vocab_for(utts, dialects=None, spaces=False):
    if dialects:
        tags = dialects
    else:
        tags = []
        for u in utts:
            if u.dialect not in tags:
                tags.append(u.dialect)
    return Vocabulary.build(tags, with_space=spaces)


def _train_config(args):
    return TrainConfig(learning_rate=args.lr, batch_size=args.batch_size, max_steps=args.steps,
                       grad_clip_norm=args.clip, seed=args.seed, checkpoint_every=args.checkpoint_every)


def cmd_synth(args):
    spec = SynthSpec(args.dialects, args.per_dialect, (args.min_dur, args.max_dur),
                     noise_level=args.noise_level, seed=args.seed,
                     tones_per_burst=args.tones_per_burst, shared_tones=args.shared_tones)
    utts = synthesize_corpus(spec)
    os.makedirs(args.out, exist_ok=True)
    manifest = save_corpus(utts, args.out)
    out = {"manifest": manifest, "utterances": len(utts)}
    if args.split:
        tr, te = split_corpus(utts, args.split, seed=args.seed)
        write_manifest(os.path.join(args.out, "train.jsonl"), manifest_entries(tr))
        write_manifest(os.path.join(args.out, "test.jsonl"), manifest_entries(te))
        out.update(train=len(tr), test=len(te))
    _write_run_config(os.path.join(args.out, "run_config.json"), args)
    print(json.dumps(out))


def cmd_prepare(args):
    counts_path = args.word_counts or _default_word_counts(args.manifest)
    utts = load_manifest(args.manifest, _word_counts(counts_path))
    vocab = _vocab_for(utts, args.dialects, args.spaces)
    if args.mode == "lah":
        provider = LAH(args.rate)
    else:
        if counts_path is None:
            raise CtcDidError("exact mode needs --word-counts")
        provider = Exact(_word_counts(counts_path))
    prepared, skipped = prepare_targets(utts, vocab, provider, insert_spaces=args.spaces)
    write_targets(args.out, prepared)
    _write_run_config(args.out + ".run.json", args)
    print(json.dumps({"targets": len(prepared), "skipped": skipped, "vocab": list(vocab.tokens)}))


def cmd_train(args):
    utts = load_manifest(args.manifest)
    targets = {t.id: t.target for t in read_targets(args.targets)}
    utts = [u for u in utts if u.id in targets]
    vocab = _vocab_for(utts, args.dialects, args.spaces)
    enc_cfg = EncoderConfig(n_out=len(vocab), hidden=args.hidden, conv_width=args.conv_width,
                            n_conv=args.n_conv)
    res = train(utts, [targets[u.id] for u in utts], vocab, _train_config(args),
                encoder_config=enc_cfg, out_dir=args.out)
    res.checkpoint.meta["run_config"] = _echo(args)
    res.checkpoint.save(os.path.join(args.out, "final.ckpt"))
    _write_run_config(os.path.join(args.out, "run_config.json"), args)
    print(json.dumps({"checkpoint": os.path.join(args.out, "final.ckpt"),
                      "final_loss": res.losses[-1][1], "dropped": res.n_dropped}))


def cmd_eval(args):
    ck = Checkpoint.load(args.checkpoint)
    utts = load_manifest(args.manifest)
    preds = predict_all(ck, utts, args.threads)
    f1, cm = score(utts, preds, ck.vocab.dialects)
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "predictions.csv"), "w") as fh:
        fh.write("id,reference,predicted,decoded_length\n")
        for u, p in zip(utts, preds):
            fh.write(f"{u.id},{u.dialect},{p.dialect},{p.decoded_length}\n")
    result = {"weighted_f1": f1, "n": cm.total, "labels": cm.labels + [UNKNOWN],
              "confusion": cm.counts.tolist()}
    if args.thresholds:
        thresholds = sorted(args.thresholds)
        longest = max(u.duration_s for u in utts)
        if thresholds[-1] < longest:
            thresholds.append(longest)
        rep = duration_bin_report(utts, ck, thresholds, out_dir=args.out, predictions=preds)
        result["duration_bins"] = [[b.threshold_s, b.n, b.f1, b.degradation] for b in rep.bins]
    with open(os.path.join(args.out, "metrics.json"), "w") as fh:
        json.dump(result, fh, indent=2)
    _write_run_config(os.path.join(args.out, "run_config.json"), args)
    print(json.dumps({"weighted_f1": f1, "n": cm.total}))


def cmd_stream(args):
    ck = Checkpoint.load(args.checkpoint)
    u = load_wav(args.wav)
    cfg = StreamConfig(args.chunk, args.context)
    state = StreamState(ck, cfg)
    decoded = []
    chunk_index = 0

    def report(frames, final=False):
        nonlocal chunk_index
        # collapse over the whole stream so far; a token split across chunks is not double counted
        decoded[:] = collapse(greedy_decode(state.emitted_frames), ck.vocab.blank_index) \
            if len(state.emitted_frames) else []
        pred = majority_vote(decoded, ck.vocab)
        rec = {"chunk": chunk_index, "end_s": state.consumed_samples / cfg.sample_rate,
               "frames": int(len(frames)), "prediction": pred.dialect,
               "histogram": pred.token_histogram}
        if final:
            rec["final"] = True
        print(json.dumps(rec), flush=True)
        chunk_index += 1

    for pos in range(0, len(u.samples), cfg.stride):
        for frames in state.feed(u.samples[pos:pos + cfg.stride]):
            report(frames)
    tail = state.finish()
    for frames in tail:
        report(frames)
    pred = majority_vote(decoded, ck.vocab)
    print(json.dumps({"final": True, "prediction": pred.dialect, "histogram": pred.token_histogram}))


def cmd_sweep(args):
    ck = Checkpoint.load(args.checkpoint)
    utts = load_manifest(args.manifest)
    batch_f1, _ = score(utts, predict_all(ck, utts, args.threads), ck.vocab.dialects)
    res = run_sweep(utts, ck, args.chunks, args.contexts, out_dir=args.out, threads=args.threads,
                    batch_f1=batch_f1)
    _write_run_config(os.path.join(args.out, "run_config.json"), args)
    print(json.dumps({"batch_f1": batch_f1,
                      "grid": [[c, l, f] for (c, l), f in sorted(res.grid.items())]}))


def cmd_compare_prep(args):
    counts_path = args.word_counts or _default_word_counts(args.manifest)
    if counts_path is None:
        raise CtcDidError("compare-prep needs --word-counts")
    counts = _word_counts(counts_path)
    train_utts = load_manifest(args.manifest, counts)
    test_utts = load_manifest(args.test_manifest)
    vocab = _vocab_for(train_utts, args.dialects)
    rep = compare_label_prep(train_utts, test_utts, vocab, _train_config(args), rate_wps=args.rate,
                             exact=Exact(counts), out_dir=args.out, threads=args.threads)
    _write_run_config(os.path.join(args.out, "run_config.json"), args)
    print(json.dumps({"rows": rep.rows, "abs_gap": rep.gap}))


def _add_train_flags(p):
    p.add_argument("--steps", type=int, default=1000)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--clip", type=float, default=5.0)
    p.add_argument("--checkpoint-every", type=int, default=0)


def build_parser():
    parser = _Parser(prog="ctcdid", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="TOML file with default flag values")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_)
        p.set_defaults(func=func)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--threads", type=int, default=1)
        return p

    p = add("synth", cmd_synth, "generate a synthetic multi-dialect corpus")
    p.add_argument("--dialects", type=_tags, required=True)
    p.add_argument("--per-dialect", type=int, default=200)
    p.add_argument("--min-dur", type=float, default=2.0)
    p.add_argument("--max-dur", type=float, default=8.0)
    p.add_argument("--noise-level", type=float, default=0.005)
    p.add_argument("--tones-per-burst", type=int, default=SynthSpec.tones_per_burst)
    p.add_argument("--shared-tones", type=int, default=SynthSpec.shared_tones)
    p.add_argument("--split", type=float, default=0.0, help="also write train/test manifests")
    p.add_argument("--out", required=True)

    p = add("prepare", cmd_prepare, "build repeated-tag CTC targets")
    p.add_argument("--manifest", required=True)
    p.add_argument("--mode", choices=["lah", "exact"], default="lah")
    p.add_argument("--rate", type=float, default=5.0, help="words per second of speech (lah)")
    p.add_argument("--word-counts", help="JSON id -> count (exact); default: next to manifest")
    p.add_argument("--dialects", type=_tags)
    p.add_argument("--spaces", action="store_true")
    p.add_argument("--out", required=True)

    p = add("train", cmd_train, "train the encoder with CTC loss")
    p.add_argument("--manifest", required=True)
    p.add_argument("--targets", required=True)
    p.add_argument("--dialects", type=_tags)
    p.add_argument("--spaces", action="store_true")
    p.add_argument("--hidden", type=int, default=128)
    p.add_argument("--conv-width", type=int, default=9)
    p.add_argument("--n-conv", type=int, default=2)
    _add_train_flags(p)
    p.add_argument("--out", required=True)

    p = add("eval", cmd_eval, "batch evaluation and duration-bin report")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--thresholds", type=_floats)
    p.add_argument("--out", required=True)

    p = add("stream", cmd_stream, "simulate streaming inference on one WAV")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--wav", required=True)
    p.add_argument("--chunk", type=float, default=1.0)
    p.add_argument("--context", type=float, default=4.0)

    p = add("sweep", cmd_sweep, "streaming F1 over a chunk x context grid")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--chunks", type=_floats, default=list(SWEEP_GRID))
    p.add_argument("--contexts", type=_floats, default=list(SWEEP_GRID))
    p.add_argument("--out", required=True)

    p = add("compare-prep", cmd_compare_prep, "LAH vs exact word-count targets")
    p.add_argument("--manifest", required=True, help="training manifest")
    p.add_argument("--test-manifest", required=True)
    p.add_argument("--word-counts")
    p.add_argument("--rate", type=float, default=5.0)
    p.add_argument("--dialects", type=_tags)
    _add_train_flags(p)
    p.add_argument("--out", required=True)
    return parser, sub


def _apply_config(parser, sub, argv):
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    with open(known.config, "rb") as fh:
        cfg = tomllib.load(fh)
    top = {k.replace("-", "_"): v for k, v in cfg.items() if not isinstance(v, dict)}
    for name, p in sub.choices.items():
        table = {k.replace("-", "_"): v for k, v in cfg.get(name, {}).items()}
        defaults = {**top, **table}
        known_dests = {a.dest for a in p._actions}
        p.set_defaults(**{k: v for k, v in defaults.items() if k in known_dests})
        # a required flag supplied by the config file is no longer required
        for a in p._actions:
            if a.dest in defaults:
                a.required = False


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, sub = build_parser()
    try:
        _apply_config(parser, sub, argv)
        args = parser.parse_args(argv)
        if not getattr(args, "func", None):
            raise UsageError("a subcommand is required: " + ", ".join(sub.choices))
    except UsageError as exc:
        print(json.dumps({"error": "UsageError", "message": str(exc)}), file=sys.stderr)
        return 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (CtcDidError, OSError, ValueError, KeyError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
