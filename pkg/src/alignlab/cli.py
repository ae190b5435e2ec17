"""``alignlab`` command line.

Every subcommand accepts ``--config FILE`` (``key = value`` lines, keys named
after the long flags) and ``--seed``; explicit flags override the file.
Exit codes: 0 success, 1 usage error, 2 data or format error.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import corpus as C
from .aet import AetModel, AetTrainConfig, induce_aet_batch, train_aet
from .checkpoint import load_checkpoint
from .config import read_config, write_manifest
from .errors import FormatError, UsageError
from .guided import (AetInducer, AttentionInducer, extract_constraints, guided_greedy_decode,
                     read_constraints, satisfaction_rate, write_constraints)
from .induction import METHODS, default_layer, induce, induce_all_layers
from .layer_select import select_layers
from .metrics import aer, bleu, corpus_counts, summary_line
from .probe import KINDS, MODES, ProbeConfig, identifiability_rate
from .symmetrize import grow_diag
from .training import TrainConfig, evaluate_loss, train
from .transformer import Transformer, TransformerConfig, attention_stacks, greedy_decode_batch

log = logging.getLogger("alignlab")

ALIGN_METHODS = ("naive", "shift", "naive-la", "shift-la", "aet")


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit with status 2
        raise UsageError(f"{self.prog}: {message}\n{self.format_usage()}")


# ------------------------------------------------------------------ helpers

def _need(args, *names: str) -> None:
    missing = [n for n in names if getattr(args, n) in (None, "")]
    if missing:
        raise UsageError("missing required option(s): " + ", ".join("--" + n.replace("_", "-") for n in missing))


def _checkpoints(model_dir: Path) -> list[Path]:
    return sorted(model_dir.glob("checkpoint_*.ckpt"))


def _resolve_checkpoint(path: str, epoch: int | None = None) -> tuple[Path, Path]:
    """(checkpoint file, directory holding the vocabularies) for a model dir or file."""
    p = Path(path)
    if p.is_dir():
        if epoch is not None:
            ck = p / f"checkpoint_{epoch:03d}.ckpt"
            if not ck.exists():
                raise UsageError(f"{p} has no checkpoint for epoch {epoch}")
            return ck, p
        cks = _checkpoints(p)
        if not cks:
            raise FormatError(f"{p} contains no checkpoint_NNN.ckpt files")
        return cks[-1], p
    if not p.exists():
        raise FormatError(f"no such model: {p}")
    return p, p.parent


def load_model(path: str, epoch: int | None = None) -> tuple[Transformer, C.Vocab, C.Vocab, dict[str, str]]:
    ck, d = _resolve_checkpoint(path, epoch)
    meta, arrays = load_checkpoint(ck)
    model = Transformer.from_arrays(meta, arrays)
    vs, vt = C.Vocab.load(d / "src.vocab"), C.Vocab.load(d / "tgt.vocab")
    if len(vs) != model.cfg.src_vocab or len(vt) != model.cfg.tgt_vocab:
        raise FormatError(f"vocabulary sizes in {d} do not match {ck}")
    return model, vs, vt, meta


def _pairs(args, vs: C.Vocab, vt: C.Vocab, src: str, tgt: str, gold: str | None = None) -> list[C.ParallelPair]:
    _, _, pairs = C.load_parallel(src, tgt, vocabs=(vs, vt), align_path=gold)
    return pairs


def _write_lines(path: str | Path, lines: Sequence[str]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.writelines(line + "\n" for line in lines)


def _manifest_for(out: str | Path, args, inputs: Sequence) -> None:
    out = Path(out)
    target = out / "run_manifest.json" if out.is_dir() else out.with_name(out.name + ".manifest.json")
    config = {k: v for k, v in vars(args).items() if k not in ("func", "config")}
    write_manifest(target, args.command, config, [i for i in inputs if i])


def _report(line: str, out: str | None) -> None:
    """Print a metrics line and, with ``--out``, also store it as a one-line file."""
    print(line)
    if out:
        _write_lines(out, [line])


def _read_selection(path: str) -> tuple[int, int]:
    with open(path, encoding="utf-8") as fh:
        first = fh.readline().strip()
    if not first.startswith("selected="):
        raise FormatError(f"{path}: first line must be 'selected=<i>,<j>'")
    try:
        i, j = (int(v) for v in first[len("selected="):].split(","))
    except ValueError as exc:
        raise FormatError(f"{path}: bad selection line {first!r}") from exc
    return i, j


def _layer(args, method: str, num_layers: int) -> int | None:
    """Resolve ``--layer k|auto`` (with ``--selection``/``--side``); None for averaged methods."""
    if method.endswith("-la"):
        return None
    if args.layer in (None, ""):
        return default_layer("shift" if method == "aet" else method, num_layers)
    if args.layer == "auto":
        _need(args, "selection")
        fwd, rev = _read_selection(args.selection)
        layer = fwd if args.side == "fwd" else rev
    else:
        try:
            layer = int(args.layer)
        except ValueError as exc:
            raise UsageError(f"--layer must be an integer or 'auto', got {args.layer!r}") from exc
    if not 1 <= layer <= num_layers:
        raise UsageError(f"layer {layer} out of range [1, {num_layers}]")
    return layer


# ------------------------------------------------------------------ subcommands

def cmd_gen_synth(args) -> None:
    _need(args, "out_dir")
    spec = C.SynthSpec(vocab_size=args.vocab, min_len=args.min_len, max_len=args.max_len,
                       p_swap=args.p_swap, window=args.window, p_split=args.p_split,
                       p_ins=args.p_ins, n_noise=args.n_noise, seed=args.seed)
    n = args.n_train + args.n_valid + args.n_test
    corpus = C.generate_synthetic(spec, n)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    a, b = args.n_train, args.n_train + args.n_valid
    C.write_corpus(corpus, out / "train", 0, a)
    C.write_corpus(corpus, out / "valid", a, b)
    C.write_corpus(corpus, out / "test", b, n)
    _write_lines(out / "lexicon.tsv", [f"{s}\t{t}" for s, t in corpus.lexicon.items()])
    _manifest_for(out, args, [])
    print(f"pairs={n} train={args.n_train} valid={args.n_valid} test={args.n_test}")


def cmd_train(args) -> None:
    _need(args, "src", "tgt", "out_dir")
    vs, vt, pairs = C.load_parallel(args.src, args.tgt, min_freq=args.min_freq, max_len=args.max_positions)
    valid = None
    if args.valid_src or args.valid_tgt:
        _need(args, "valid_src", "valid_tgt")
        _, _, valid = C.load_parallel(args.valid_src, args.valid_tgt, vocabs=(vs, vt))
    cfg = TransformerConfig(len(vs), len(vt), layers=args.layers, heads=args.heads, d_model=args.d_model,
                            d_ff=args.d_ff, dropout=args.dropout, max_positions=args.max_positions)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    vs.save(out / "src.vocab")
    vt.save(out / "tgt.vocab")
    model = Transformer(cfg, seed=args.seed)
    tcfg = TrainConfig(epochs=args.epochs, max_tokens=args.max_tokens, lr=args.lr, warmup=args.warmup,
                       label_smoothing=args.label_smoothing, seed=args.seed, max_steps=args.max_steps)
    log_path = out / "loss.log"
    log_path.write_text("")

    def on_epoch(epoch, train_loss, valid_loss):
        v = "nan" if valid_loss is None else f"{valid_loss:.6f}"
        with open(log_path, "a", encoding="utf-8") as fh:
            fh.write(f"epoch={epoch} train_loss={train_loss:.6f} valid_loss={v}\n")

    result = train(model, pairs, tcfg, valid=valid, out_dir=out, on_epoch=on_epoch)
    _manifest_for(out, args, [args.src, args.tgt, args.valid_src, args.valid_tgt])
    print(f"epochs={len(result.epoch_losses)} steps={result.steps} train_loss={result.epoch_losses[-1]:.6f}")


def cmd_align(args) -> None:
    _need(args, "model", "src", "tgt", "out")
    if args.method not in ALIGN_METHODS:
        raise UsageError(f"unknown method {args.method!r}; expected one of {ALIGN_METHODS}")
    model, vs, vt, _ = load_model(args.model, args.epoch)
    pairs = _pairs(args, vs, vt, args.src, args.tgt)
    raw = [(p.src, p.tgt) for p in pairs]
    if args.method == "aet":
        _need(args, "aet")
        m = AetModel.load(args.aet)
        links = induce_aet_batch(m, raw)
    else:
        layer = _layer(args, args.method, model.cfg.layers)
        links = [induce(st, args.method, layer) for st in attention_stacks(model, raw)]
    C.write_alignments(links, args.out)
    _manifest_for(args.out, args, [args.model, args.src, args.tgt, args.aet, args.selection])
    print(f"sentences={len(links)} links={sum(len(a) for a in links)}")


def cmd_symmetrize(args) -> None:
    _need(args, "fwd", "rev", "out")
    fwd, rev = C.read_alignments(args.fwd), C.read_alignments(args.rev)
    if len(fwd) != len(rev):
        raise FormatError(f"{args.fwd} has {len(fwd)} lines, {args.rev} has {len(rev)}")
    merged = [grow_diag(f, r.transposed()) for f, r in zip(fwd, rev)]
    C.write_alignments(merged, args.out)
    _manifest_for(args.out, args, [args.fwd, args.rev])
    print(f"sentences={len(merged)} links={sum(len(a) for a in merged)}")


def cmd_select_layer(args) -> None:
    _need(args, "fwd_model", "rev_model", "src", "tgt")
    mf, vs, vt, _ = load_model(args.fwd_model)
    mr, _, _, _ = load_model(args.rev_model)
    pairs = _pairs(args, vs, vt, args.src, args.tgt)
    sel = select_layers(mf, mr, pairs, method=args.method)
    text = sel.format()
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        _manifest_for(args.out, args, [args.fwd_model, args.rev_model, args.src, args.tgt])
    sys.stdout.write(text)


def cmd_train_aet(args) -> None:
    _need(args, "model", "src", "tgt", "labels", "out")
    model, vs, vt, meta = load_model(args.model, args.epoch)
    pairs = _pairs(args, vs, vt, args.src, args.tgt, gold=args.labels)
    layer = _layer(args, "aet", model.cfg.layers)
    steps = args.steps
    if steps is None:
        base_steps = int(meta.get("step", 0))
        if base_steps <= 0:
            raise UsageError("base checkpoint records no step count; pass --steps")
        steps = max(1, round(0.2 * base_steps))
    m = AetModel(model, layer, seed=args.seed, init=args.init)
    cfg = AetTrainConfig(steps=steps, lr=args.lr, batch_size=args.batch_size, seed=args.seed)
    result = train_aet(m, pairs, [p.gold for p in pairs], cfg)
    m.save(args.out)
    _manifest_for(args.out, args, [args.model, args.src, args.tgt, args.labels, args.selection])
    print(f"steps={steps} layer={layer} params={m.num_parameters()} loss={result.step_losses[-1]:.6f}")


def cmd_aer(args) -> None:
    _need(args, "hyp", "ref")
    hyp, ref = C.read_alignments(args.hyp), C.read_alignments(args.ref)
    if len(hyp) != len(ref):
        raise FormatError(f"{args.hyp} has {len(hyp)} lines, {args.ref} has {len(ref)}")
    _report(summary_line(corpus_counts(hyp, ref)), args.out)


def cmd_bleu(args) -> None:
    _need(args, "hyp", "ref")
    hyp, ref = C.read_lines(args.hyp), C.read_lines(args.ref)
    if len(hyp) != len(ref):
        raise FormatError(f"{args.hyp} has {len(hyp)} lines, {args.ref} has {len(ref)}")
    _report(f"BLEU={bleu(hyp, ref):.4f}", args.out)


def cmd_make_constraints(args) -> None:
    _need(args, "src", "tgt", "gold", "out")
    vs, vt, pairs = C.load_parallel(args.src, args.tgt, align_path=args.gold)
    stop: set[int] = set()
    if args.stop_words:
        stop = {vs.stoi[w] for line in C.read_lines(args.stop_words) for w in line if w in vs.stoi}
    rng = np.random.default_rng(args.seed)
    cons = [extract_constraints(p.src, p.tgt, p.gold, rng, args.max_constraints, stop_words=stop)
            for p in pairs]
    write_constraints(args.out, cons, vt)
    _manifest_for(args.out, args, [args.src, args.tgt, args.gold, args.stop_words])
    print(f"sentences={len(cons)} constraints={sum(len(c) for c in cons)}")


def cmd_guided_decode(args) -> None:
    _need(args, "model", "src", "constraints", "out")
    model, vs, vt, _ = load_model(args.model, args.epoch)
    srcs = [vs.encode(line) for line in C.read_lines(args.src)]
    cons = read_constraints(args.constraints, len(srcs), vt)
    if args.method == "aet":
        _need(args, "aet")
        m = AetModel.load(args.aet)
        model, inducer = m.base, AetInducer(m)
    elif args.method in ALIGN_METHODS:
        inducer = AttentionInducer(args.method, _layer(args, args.method, model.cfg.layers), model.cfg.layers)
    else:
        raise UsageError(f"unknown method {args.method!r}; expected one of {ALIGN_METHODS}")
    outs = [guided_greedy_decode(model, s, c, inducer, args.max_len) for s, c in zip(srcs, cons)]
    _write_lines(args.out, [" ".join(vt.decode(o)) for o in outs])
    _manifest_for(args.out, args, [args.model, args.src, args.constraints, args.aet, args.selection])
    print(f"satisfaction={satisfaction_rate(outs, cons):.4f}")
    if args.ref:
        refs = C.read_lines(args.ref)
        print(f"BLEU={bleu([vt.decode(o) for o in outs], refs):.4f}")


def cmd_probe(args) -> None:
    _need(args, "model", "src", "tgt")
    model, vs, vt, _ = load_model(args.model, args.epoch)
    pairs = [(p.src, p.tgt) for p in _pairs(args, vs, vt, args.src, args.tgt)]
    layers = range(1, model.cfg.layers + 1) if args.layer == "all" else [int(args.layer)]
    modes = MODES if args.mode == "all" else [args.mode]
    kinds = KINDS if args.kind == "all" else [args.kind]
    cfg = ProbeConfig(steps=args.steps, lr=args.lr, seed=args.seed)
    rows = []
    for l in layers:
        for mode in modes:
            for kind in kinds:
                r = identifiability_rate(model, pairs, l, mode, kind, cfg)
                rows.append((l, mode, kind, r))
                print(f"layer={l} mode={mode} kind={kind} rate={r:.4f}")
    if args.csv:
        with open(args.csv, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["layer", "mode", "kind", "rate"])
            w.writerows([(l, m, k, f"{r:.6f}") for l, m, k, r in rows])
        _manifest_for(args.csv, args, [args.model, args.src, args.tgt])


def cmd_sweep(args) -> None:
    _need(args, "fwd_model", "src", "tgt", "gold", "out")
    if args.method not in METHODS:
        raise UsageError(f"unknown method {args.method!r}; expected one of {METHODS}")
    fwd_dir = Path(args.fwd_model)
    epochs = [int(p.stem.split("_")[1]) for p in _checkpoints(fwd_dir)]
    if not epochs:
        raise FormatError(f"{fwd_dir} contains no checkpoints")
    rows = []
    for ep in epochs:
        mf, vs, vt, _ = load_model(args.fwd_model, ep)
        pairs = _pairs(args, vs, vt, args.src, args.tgt, gold=args.gold)
        gold = [p.gold for p in pairs]
        hyps = greedy_decode_batch(mf, [p.src for p in pairs], args.max_len)
        b = bleu(hyps, [p.tgt for p in pairs])
        fwd = induce_all_layers(attention_stacks(mf, [(p.src, p.tgt) for p in pairs]), args.method)
        rev = None
        if args.rev_model:
            mr, _, _, _ = load_model(args.rev_model, ep)
            rev = induce_all_layers(attention_stacks(mr, [(p.tgt, p.src) for p in pairs]), args.method)
        for l in range(mf.cfg.layers):
            a_f = aer(fwd[l], gold)
            row = [ep, l + 1, f"{b:.6f}", f"{a_f:.6f}"]
            if rev is not None:
                a_r = aer([a.transposed() for a in rev[l]], gold)
                a_b = aer([grow_diag(f, r.transposed()) for f, r in zip(fwd[l], rev[l])], gold)
                row += [f"{a_r:.6f}", f"{a_b:.6f}"]
            rows.append(row)
        log.info("epoch %d BLEU %.4f", ep, b)
    header = ["epoch", "layer", "bleu", "aer_fwd"] + (["aer_rev", "aer_bidir"] if args.rev_model else [])
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    _manifest_for(args.out, args, [args.fwd_model, args.rev_model, args.src, args.tgt, args.gold])
    print(f"checkpoints={len(epochs)} rows={len(rows)}")


# ------------------------------------------------------------------ parser

def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value file; flags given on the command line win")
    p.add_argument("--seed", type=int, default=1)


def _layer_opts(p: argparse.ArgumentParser) -> None:
    p.add_argument("--layer", help="layer number, or 'auto' to read it from --selection")
    p.add_argument("--selection", help="output of select-layer")
    p.add_argument("--side", choices=("fwd", "rev"), default="fwd",
                   help="which entry of the selection to use")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="alignlab", description="Neural word alignment toolkit.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    d = TransformerConfig(1, 1)
    t = TrainConfig()

    def add(name: str, func: Callable, help: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help, description=help)
        _common(p)
        p.set_defaults(func=func)
        return p

    p = add("gen-synth", cmd_gen_synth, "generate a synthetic parallel corpus with gold alignments")
    p.add_argument("--out-dir")
    p.add_argument("--vocab", type=int, default=50)
    p.add_argument("--min-len", type=int, default=3)
    p.add_argument("--max-len", type=int, default=10)
    p.add_argument("--p-swap", type=float, default=0.0)
    p.add_argument("--window", type=int, default=1)
    p.add_argument("--p-split", type=float, default=0.0)
    p.add_argument("--p-ins", type=float, default=0.0)
    p.add_argument("--n-noise", type=int, default=5)
    p.add_argument("--n-train", type=int, default=10000)
    p.add_argument("--n-valid", type=int, default=500)
    p.add_argument("--n-test", type=int, default=500)

    p = add("train", cmd_train, "train a translation model")
    for name in ("src", "tgt", "valid-src", "valid-tgt", "out-dir"):
        p.add_argument("--" + name)
    p.add_argument("--min-freq", type=int, default=1)
    p.add_argument("--layers", type=int, default=d.layers)
    p.add_argument("--heads", type=int, default=d.heads)
    p.add_argument("--d-model", type=int, default=d.d_model)
    p.add_argument("--d-ff", type=int, default=d.d_ff)
    p.add_argument("--dropout", type=float, default=d.dropout)
    p.add_argument("--max-positions", type=int, default=d.max_positions)
    p.add_argument("--epochs", type=int, default=t.epochs)
    p.add_argument("--max-tokens", type=int, default=t.max_tokens)
    p.add_argument("--lr", type=float, default=t.lr)
    p.add_argument("--warmup", type=int, default=t.warmup)
    p.add_argument("--label-smoothing", type=float, default=t.label_smoothing)
    p.add_argument("--max-steps", type=int)

    p = add("align", cmd_align, "induce word alignments from a trained model")
    for name in ("model", "src", "tgt", "out", "aet"):
        p.add_argument("--" + name)
    p.add_argument("--method", default="shift", help="|".join(ALIGN_METHODS))
    p.add_argument("--epoch", type=int, help="checkpoint epoch (default: last)")
    _layer_opts(p)

    p = add("symmetrize", cmd_symmetrize, "merge forward and reverse alignments with grow-diag")
    p.add_argument("--fwd", help="forward alignments (source-target orientation)")
    p.add_argument("--rev", help="reverse-model alignments in the reverse model's own orientation")
    p.add_argument("--out")

    p = add("select-layer", cmd_select_layer, "pick layers by forward/reverse agreement")
    for name in ("fwd-model", "rev-model", "src", "tgt", "out"):
        p.add_argument("--" + name)
    p.add_argument("--method", default="shift", choices=METHODS)

    p = add("train-aet", cmd_train_aet, "train the alignment module on a frozen model")
    for name in ("model", "src", "tgt", "labels", "out"):
        p.add_argument("--" + name)
    p.add_argument("--epoch", type=int)
    p.add_argument("--steps", type=int, help="default: 20%% of the base model's updates")
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--init", choices=("random", "cross"), default="random")
    _layer_opts(p)

    p = add("aer", cmd_aer, "score alignments against a gold file")
    p.add_argument("--hyp")
    p.add_argument("--ref")
    p.add_argument("--out", help="also write the metrics line here")

    p = add("bleu", cmd_bleu, "corpus BLEU-4 of a hypothesis file")
    p.add_argument("--hyp")
    p.add_argument("--ref")
    p.add_argument("--out", help="also write the metrics line here")

    p = add("make-constraints", cmd_make_constraints, "sample dictionary constraints from gold alignments")
    for name in ("src", "tgt", "gold", "out", "stop-words"):
        p.add_argument("--" + name)
    p.add_argument("--max-constraints", type=int, default=3)

    p = add("guided-decode", cmd_guided_decode, "greedy decoding with dictionary constraints")
    for name in ("model", "src", "constraints", "out", "aet", "ref"):
        p.add_argument("--" + name)
    p.add_argument("--method", default="shift", help="|".join(ALIGN_METHODS))
    p.add_argument("--epoch", type=int)
    p.add_argument("--max-len", type=int, default=100)
    _layer_opts(p)

    p = add("probe", cmd_probe, "identifiability of input/output tokens in decoder states")
    for name in ("model", "src", "tgt", "csv"):
        p.add_argument("--" + name)
    p.add_argument("--epoch", type=int)
    p.add_argument("--layer", default="all")
    p.add_argument("--mode", default="all", choices=MODES + ("all",))
    p.add_argument("--kind", default="all", choices=KINDS + ("all",))
    p.add_argument("--steps", type=int, default=ProbeConfig.steps)
    p.add_argument("--lr", type=float, default=ProbeConfig.lr)

    p = add("sweep-checkpoints", cmd_sweep, "AER and BLEU for every layer of every checkpoint, as CSV")
    for name in ("fwd-model", "rev-model", "src", "tgt", "gold", "out"):
        p.add_argument("--" + name)
    p.add_argument("--method", default="shift", choices=METHODS)
    p.add_argument("--max-len", type=int, default=100)
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> None:
    """Load ``--config`` values as subparser defaults so explicit flags still win."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("command", nargs="?")
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config or not known.command:
        return
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    if known.command not in sub.choices:
        return
    sp = sub.choices[known.command]
    valid = {a.dest for a in sp._actions}
    values = read_config(known.config)
    unknown = sorted(set(values) - valid - {"config", "help"})
    if unknown:
        raise UsageError(f"{known.config}: unknown key(s) for {known.command}: {', '.join(unknown)}")
    sp.set_defaults(**values)


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _apply_config(parser, argv)
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        if args.command is None:
            raise UsageError("no subcommand given\n" + parser.format_help())
        args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (FormatError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
