"""Command-line interface: ``phonelayer {train,recognize,coverage,evaluate,synth}``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import data, evaluation, inventory, model


def _hidden(text: str) -> tuple[int, ...]:
    try:
        sizes = tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"hidden sizes must be comma-separated integers: {text!r}") from None
    if not sizes or min(sizes) < 1:
        raise argparse.ArgumentTypeError("need at least one positive hidden size")
    return sizes


def _non_negative(text: str) -> float:
    value = float(text)
    if value < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return value


def _open_out(path):
    if path is None or path == "-":
        return sys.stdout
    return open(path, "w", encoding="utf-8", newline="\n")


def _write(path, text: str) -> None:
    fh = _open_out(path)
    try:
        fh.write(text)
    finally:
        if fh is not sys.stdout:
            fh.close()


def cmd_train(args) -> int:
    corpus = data.read_manifest(args.manifest)
    if not corpus:
        raise ValueError(f"{args.manifest}: no utterances")
    mappings = inventory.load_allophone_mappings(args.allophones)
    m = model.build_model(
        args.arch, mappings, corpus[0].utterance.feature_dim, args.hidden, args.alpha, args.seed
    )
    config = model.TrainConfig(epochs=args.epochs, lr=args.lr, batch_size=args.batch, seed=args.seed)
    m, losses = model.train(m, corpus, config)
    model.save_model(m, args.model)
    log = "epoch\tmean_ctc_loss\n" + "".join(f"{e + 1}\t{v!r}\n" for e, v in enumerate(losses))
    _write(args.out or f"{args.model}.losses.tsv", log)
    return 0


def cmd_recognize(args) -> int:
    m = model.load_model(args.model)
    corpus = data.read_manifest(args.manifest)
    restrict = inventory.load_phone_list(args.restrict) if args.restrict else None
    lines = []
    for item in corpus:
        if args.language:
            hyp = model.recognize_phonemes(m, args.language, item.utterance)
        elif restrict is not None:
            hyp = model.recognize_phones_for_language(m, item.utterance, restrict)
        else:
            hyp = model.recognize_phones(m, item.utterance)
        lines.append(f"{item.feature_file}\t{' '.join(hyp)}\n")
    _write(args.out, "".join(lines))
    return 0


def read_hypotheses(path) -> list[tuple[str, tuple[str, ...]]]:
    """``id<TAB>symbols`` lines as written by ``recognize``."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            uid, _, text = line.partition("\t")
            if not uid:
                raise ValueError(f"{path}:{lineno}: missing utterance id")
            out.append((uid, tuple(inventory.normalize_symbol(s) for s in text.split())))
    return out


def cmd_evaluate(args) -> int:
    refs = data.read_manifest(args.manifest)
    hyps = dict(read_hypotheses(args.hyp))
    ids, pairs = [], []
    for item in refs:
        if item.feature_file not in hyps:
            raise ValueError(f"{args.hyp}: no hypothesis for {item.feature_file}")
        ids.append(item.feature_file)
        pairs.append((hyps[item.feature_file], item.transcript))
    if not pairs:
        raise ValueError("nothing to evaluate")
    _write(args.out, evaluation.format_report(ids, pairs))
    return 0


def cmd_coverage(args) -> int:
    db = inventory.load_phoible(args.phoible)
    if args.inventory:
        phones = inventory.load_phone_list(args.inventory)
    elif args.model:
        phones = model.load_model(args.model).phones.phones
    elif args.allophones:
        phones = inventory.build_universal_inventory(inventory.load_allophone_mappings(args.allophones)).phones
    else:
        raise ValueError("coverage needs --inventory, --model or --allophones for the universal inventory")
    report = inventory.coverage_by_area(db, inventory.UniversalPhoneInventory(tuple(phones)))
    _write(args.out, inventory.format_coverage_report(report))
    return 0


def cmd_synth(args) -> int:
    spec = data.aspiration_contrast_spec(feature_dim=args.dim, noise=args.noise, seed=args.seed)
    corpus = data.generate_corpus(spec, args.n)
    data.write_corpus(args.out, corpus, spec)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="phonelayer", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a recognizer on a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--allophones", required=True, help="language/phoneme/phone TSV")
    p.add_argument("--model", required=True, help="output model file")
    p.add_argument("--arch", default=model.ALLOPHONE, choices=[*model.ARCHITECTURES, *model.ARCH_ALIASES])
    p.add_argument("--alpha", type=_non_negative, default=10.0)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--batch", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--hidden", type=_hidden, default=(32,), help="comma-separated hidden sizes")
    p.add_argument("--out", help="loss log (default: <model>.losses.tsv)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("recognize", help="decode every utterance of a manifest")
    p.add_argument("--model", required=True)
    p.add_argument("--manifest", required=True)
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--language", help="decode phonemes of this training language")
    mode.add_argument("--restrict", help="phone inventory file restricting universal decoding")
    p.add_argument("--out")
    p.set_defaults(func=cmd_recognize)

    p = sub.add_parser("evaluate", help="error rates of hypotheses against manifest transcriptions")
    p.add_argument("--manifest", required=True)
    p.add_argument("--hyp", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("coverage", help="phone coverage of PHOIBLE-style inventories by area")
    p.add_argument("--phoible", required=True)
    p.add_argument("--inventory", help="universal phone list file")
    p.add_argument("--model")
    p.add_argument("--allophones")
    p.add_argument("--out")
    p.set_defaults(func=cmd_coverage)

    p = sub.add_parser("synth", help="write a synthetic two-language aspiration corpus")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--n", type=int, default=500, help="utterances per language")
    p.add_argument("--noise", type=_non_negative, default=0.5)
    p.add_argument("--dim", type=int, default=12)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, KeyError) as exc:
        print(f"phonelayer {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
