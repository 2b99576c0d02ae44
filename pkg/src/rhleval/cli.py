"""Command-line driver.

``rhleval --theory T --facts F`` closes a facts file under a PHL theory;
``rhleval pt FACTS`` runs the points-to analyses and ``rhleval typer FILE``
infers types for one lambda term per line.

Exit codes: 0 fixpoint, 1 bottom relation inhabited, 2 step limit reached,
3 parse or validation error, 4 mismatch against the reference oracle.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass
from typing import Optional, Sequence

from .engine import CloseConfig, Mode, Outcome, close
from .facts import FactsError, dump_model, ingest_facts
from .oracles import StepLimitExceeded, oracle_quotient, quotient_of_structure
from .phl import PhlError, check_epic, lower_theory, parse_phl
from .structure import Structure
from .theory import validate_theory

EXIT_OK, EXIT_BOTTOM, EXIT_LIMIT, EXIT_INPUT, EXIT_ORACLE = 0, 1, 2, 3, 4


@dataclass
class CliConfig:
    theory: str
    facts: Optional[str] = None
    naive: bool = False
    symmetries: bool = True
    functional_projections: bool = True
    max_outer: int = 10000
    max_inner: int = 100000
    bottom: Optional[str] = None
    dump: Optional[str] = None
    stats: bool = False
    check_against_oracle: bool = False
    allow_non_epic: bool = False

    def close_config(self) -> CloseConfig:
        return CloseConfig(
            max_outer_steps=self.max_outer,
            max_inner_steps=self.max_inner,
            mode=Mode.NAIVE if self.naive else Mode.SEMI_NAIVE,
            symmetries=self.symmetries,
            functional_projections=self.functional_projections,
            bottom=self.bottom,
        )


def _read(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def _write(path: str, text: str) -> None:
    if path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def run(config: CliConfig) -> int:
    err = sys.stderr
    try:
        phl = parse_phl(_read(config.theory))
    except (OSError, PhlError) as exc:
        print(f"{config.theory}: {exc}", file=err)
        return EXIT_INPUT
    epic = check_epic(phl)
    if epic and not config.allow_non_epic:
        for d in epic:
            print(f"{config.theory}: {d.message}", file=err)
        return EXIT_INPUT
    theory, _ = lower_theory(phl)
    diags = validate_theory(theory)
    if diags:
        for d in diags:
            print(f"{config.theory}: {d.message}", file=err)
        return EXIT_INPUT
    if config.bottom is not None and config.bottom not in {r.name for r in theory.relations}:
        print(f"unknown bottom relation {config.bottom}", file=err)
        return EXIT_INPUT

    facts_text = ""
    if config.facts is not None:
        try:
            facts_text = _read(config.facts)
        except OSError as exc:
            print(f"{config.facts}: {exc}", file=err)
            return EXIT_INPUT
    structure = Structure(theory)
    try:
        ingest_facts(structure, facts_text)
    except FactsError as exc:
        print(f"{config.facts}: {exc}", file=err)
        return EXIT_INPUT

    expected = None
    if config.check_against_oracle:
        if not all(seq.surjective for seq in theory.sequents):
            print("the oracle only handles surjective theories", file=err)
            return EXIT_INPUT
        try:
            expected = oracle_quotient(structure)
        except StepLimitExceeded as exc:
            print(f"oracle: {exc}", file=err)
            return EXIT_LIMIT

    report = close(structure, theory, config.close_config())
    if config.dump is not None:
        _write(config.dump, dump_model(structure))
    if config.stats:
        print(report.stats(), file=sys.stdout)

    if report.outcome is not Outcome.FIXPOINT:
        print(f"stopped: {report.outcome.value}", file=err)
        return EXIT_LIMIT
    if expected is not None and quotient_of_structure(structure) != expected:
        print("model differs from the reference oracle", file=err)
        return EXIT_ORACLE
    if report.inconsistent:
        print(f"{config.bottom} is inhabited", file=err)
        return EXIT_BOTTOM
    return EXIT_OK


def _run_pt(args: argparse.Namespace) -> int:
    from .applications.points_to import ProgramFacts, andersen, format_points_to, steensgaard

    try:
        facts = ProgramFacts.from_text(_read(args.facts))
    except (OSError, FactsError) as exc:
        print(f"{args.facts}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    result = andersen(facts) if args.andersen else steensgaard(facts)
    sys.stdout.write(format_points_to(result))
    return EXIT_OK


def _run_typer(args: argparse.Namespace) -> int:
    from .applications.typeinfer import TermSyntaxError, infer_types

    try:
        lines = [ln.strip() for ln in _read(args.terms).splitlines()]
    except OSError as exc:
        print(f"{args.terms}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    code = EXIT_OK
    first = True
    for lineno, line in enumerate(lines, 1):
        if not line or line.startswith("#"):
            continue
        try:
            result = infer_types(line, CloseConfig(max_outer_steps=args.max_outer))
        except TermSyntaxError as exc:
            print(f"{args.terms}:{lineno}: {exc}", file=sys.stderr)
            return EXIT_INPUT
        if not first:
            sys.stdout.write("\n")
        first = False
        sys.stdout.write(result.format())
        if result.status == "inconsistent":
            code = max(code, EXIT_BOTTOM)
        elif result.status == "limit":
            code = max(code, EXIT_LIMIT)
    return code


def _run_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rhleval", description="Close a structure under a PHL theory.")
    p.add_argument("--theory", required=True, help="PHL theory file")
    p.add_argument("--facts", help="facts file ('-' for stdin)")
    p.add_argument("--naive", action="store_true", help="naive instead of semi-naive matching")
    p.add_argument("--no-symmetries", action="store_true")
    p.add_argument("--no-func-proj", action="store_true")
    p.add_argument("--max-outer", type=int, default=10000)
    p.add_argument("--max-inner", type=int, default=100000)
    p.add_argument("--bottom", help="relation whose inhabitation means inconsistency")
    p.add_argument("--dump", metavar="PATH", help="write the closed model ('-' for stdout)")
    p.add_argument("--stats", action="store_true", help="print counters to stdout")
    p.add_argument("--check-against-oracle", action="store_true")
    p.add_argument("--allow-non-epic", action="store_true")
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if argv and argv[0] in ("pt", "typer"):
        sub = argparse.ArgumentParser(prog=f"rhleval {argv[0]}")
        if argv[0] == "pt":
            sub.add_argument("facts", help="facts file with Alloc/Assign relations")
            sub.add_argument("--andersen", action="store_true", help="per-variable analysis")
            return _run_pt(sub.parse_args(argv[1:]))
        sub.add_argument("terms", help="file with one lambda term per line")
        sub.add_argument("--max-outer", type=int, default=200)
        return _run_typer(sub.parse_args(argv[1:]))
    if argv and argv[0] == "run":
        argv = argv[1:]
    args = _run_parser().parse_args(argv)
    config = CliConfig(
        theory=args.theory,
        facts=args.facts,
        naive=args.naive,
        symmetries=not args.no_symmetries,
        functional_projections=not args.no_func_proj,
        max_outer=args.max_outer,
        max_inner=args.max_inner,
        bottom=args.bottom,
        dump=args.dump,
        stats=args.stats,
        check_against_oracle=args.check_against_oracle,
        allow_non_epic=args.allow_non_epic,
    )
    try:
        return run(config)
    except ValueError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
