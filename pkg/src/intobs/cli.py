"""Command line entry point.

Subcommands: correlator (query one intersection number), check (run a
relation checker over parameter ranges and emit a JSON report), and
hierarchy (flux assembly and the worked demos).  Exit code 0 means every
requested check passed, 1 means a relation was violated, 2 means required
data was missing or malformed (including usage errors).  Reports go to
stdout or --out; stderr carries diagnostics only, so stdout is byte
identical for a fixed configuration regardless of worker count.

Table paths are resolved against the working directory first, then against
the directories listed in the COHFT_TABLE_PATH environment variable.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, fields as dc_fields

from .correlators import CorrelatorTable, TableRequired, load_table, psi_correlator
from .exactnum import rat_to_str
from .hierarchy import (
    HierarchyDataError,
    HierarchyError,
    HierarchySpec,
    build_flux_DR,
    build_flux_R,
    check_commutation,
    hodge_demo,
    kdv_demo,
    miura_O_to_DR,
    normal_miura,
)
from .piident import all_pass, verify_dilaton_identities
from .trees import PsiObservable, TableObservable, check_gmaster, check_lrt, check_master

PASS, VIOLATION, MISSING = 0, 1, 2


@dataclass
class RunConfig:
    """Resolved settings for one invocation.

    Flags win over the --config file, which wins over the defaults here.
    """

    command: str = ""
    eps_trunc: int = 4
    t_trunc: int | None = None
    p_max: int = 1
    cohft: str = "trivial"
    obs: str = "psi"
    dr_table: str | None = None
    a1_table: str | None = None
    out: str | None = None
    workers: int | None = None
    seed: int = 0

    def validate(self):
        if self.eps_trunc < 0 or self.eps_trunc % 2:
            raise ValueError("eps truncation must be even and nonnegative")
        if self.t_trunc is not None and self.t_trunc < 1:
            raise ValueError("time degree bound must be positive")
        if self.p_max < 0:
            raise ValueError("p_max must be nonnegative")
        if self.workers is not None and self.workers < 1:
            raise ValueError("worker count must be positive")


_CONFIG_KEYS = {f.name for f in dc_fields(RunConfig)} - {"command"}


def make_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig(command=args.command)
    file_values = {}
    if getattr(args, "config", None):
        with open(args.config, "r", encoding="utf-8") as fh:
            file_values = json.load(fh)
        bad = set(file_values) - _CONFIG_KEYS
        if bad:
            raise ValueError(f"unknown config keys: {sorted(bad)}")
    for name in _CONFIG_KEYS:
        flag = getattr(args, name, None)
        if flag is not None:
            setattr(cfg, name, flag)
        elif name in file_values:
            setattr(cfg, name, file_values[name])
    cfg.validate()
    return cfg


def resolve_table_path(path: str) -> str:
    if os.path.exists(path):
        return path
    for root in os.environ.get("COHFT_TABLE_PATH", "").split(os.pathsep):
        if root:
            cand = os.path.join(root, path)
            if os.path.exists(cand):
                return cand
    raise FileNotFoundError(f"table not found: {path}")


def _load_cohft(cfg: RunConfig) -> CorrelatorTable | None:
    if cfg.cohft == "trivial":
        return None
    return load_table(resolve_table_path(cfg.cohft), "cohft_psi")


def _load_obs(cfg: RunConfig):
    if cfg.obs == "psi":
        return PsiObservable()
    return TableObservable(load_table(resolve_table_path(cfg.obs), "obs_O"))


def _load_dr_tables(cfg: RunConfig):
    out = {}
    if cfg.dr_table:
        out["d"] = load_table(resolve_table_path(cfg.dr_table), "dr_D")
    if cfg.a1_table:
        out["a1"] = load_table(resolve_table_path(cfg.a1_table), "dr_D")
    return out or None


def parse_range(text: str | None, fallback: tuple[int, int]) -> range:
    """"A..B" or "A" to an inclusive range."""
    if text is None:
        lo, hi = fallback
    elif ".." in text:
        a, b = text.split("..", 1)
        lo, hi = int(a), int(b)
    else:
        lo = hi = int(text)
    if hi < lo:
        raise ValueError(f"empty range {lo}..{hi}")
    return range(lo, hi + 1)


def parse_pairs(text: str) -> list[tuple[tuple[int, int], tuple[int, int]]]:
    """"b,p:b,p[;b,p:b,p...]" to flow pairs."""
    out = []
    for chunk in text.split(";"):
        left, right = chunk.split(":", 1)
        b1, p1 = (int(v) for v in left.split(","))
        b2, p2 = (int(v) for v in right.split(","))
        out.append(((b1, p1), (b2, p2)))
    if not out:
        raise ValueError("no pairs given")
    return out


def emit(report: dict, cfg: RunConfig):
    text = json.dumps(report, indent=2, sort_keys=True)
    if cfg.out:
        with open(cfg.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_correlator(args, cfg: RunConfig) -> int:
    psi = [int(v) for v in args.psi.split(",")]
    n = len(psi)
    if 2 * args.g - 2 + n <= 0:
        raise ValueError(f"unstable space: g={args.g}, n={n}")
    if args.table:
        table = load_table(resolve_table_path(args.table), args.kind)
        fields = [int(v) for v in args.fields.split(",")] if args.fields else [1] * n
        value = table.value(args.g, fields, psi)
        print(f"provenance: table {table.provenance}", file=sys.stderr)
    else:
        value = psi_correlator(args.g, psi)
        print("provenance: builtin", file=sys.stderr)
    print(rat_to_str(value))
    return PASS


def cmd_check(args, cfg: RunConfig) -> int:
    print(f"seed: {cfg.seed}", file=sys.stderr)
    results = []
    if args.relation == "pi-dilaton":
        m_range = parse_range(args.m, (1, 8))
        g_range = parse_range(args.g, (0, 5))
        n_range = parse_range(args.n, (1, 6))
        for g in g_range:
            for n in n_range:
                if 2 * g - 2 + n <= 0:
                    continue
                report = verify_dilaton_identities(g, n, max(m_range))
                ok = all_pass(report)
                results.append(
                    {
                        "relation": "pi-dilaton",
                        "g": g,
                        "n": n,
                        "m": max(m_range),
                        "status": "PASS" if ok else "FAIL",
                        "violations": [e for e in report if e["status"] == "fail"],
                    }
                )
    else:
        cohft = _load_cohft(cfg)
        obs = _load_obs(cfg)
        dr = _load_dr_tables(cfg)
        g_range = parse_range(args.g, (0, 1))
        n_range = parse_range(args.n, (1, 3))

        def stable(g, n, m):
            return 2 * g - 2 + n + m > 0

        for g in g_range:
            for n in n_range:
                if args.relation == "lrt1":
                    if stable(g, n, 1):
                        results.append(check_lrt(1, g, n, obs, cohft, dr, workers=cfg.workers))
                elif args.relation == "lrt2":
                    if stable(g, n, 2):
                        results.append(
                            check_lrt(2, g, n, obs, cohft, dr, strict_b=args.strict_b, workers=cfg.workers)
                        )
                elif args.relation == "lrtm":
                    for m in parse_range(args.m, (3, 3)):
                        if stable(g, n, m):
                            results.append(check_lrt(m, g, n, obs, cohft, dr, workers=cfg.workers))
                elif args.relation == "master":
                    for m in parse_range(args.m, (1, 2)):
                        if stable(g, n, m):
                            results.append(check_master(m, g, n, obs, cohft, dr))
                else:
                    for m in parse_range(args.m, (1, 2)):
                        if stable(g, n, m):
                            results.append(check_gmaster(m, g, n, obs, cohft, dr))
    status = "PASS" if all(r["status"] == "PASS" for r in results) else "FAIL"
    emit(
        {
            "command": "check",
            "relation": args.relation,
            "seed": cfg.seed,
            "status": status,
            "results": results,
        },
        cfg,
    )
    return PASS if status == "PASS" else VIOLATION


def _hierarchy_spec(args, cfg: RunConfig) -> HierarchySpec:
    dr = _load_dr_tables(cfg) or {}
    return HierarchySpec(
        nfields=args.nfields,
        cohft=_load_cohft(cfg),
        observable=_load_obs(cfg),
        source=args.source,
        dr_table=dr.get("d"),
        eps_trunc=cfg.eps_trunc,
        t_trunc=cfg.t_trunc,
        n_cap=args.n_cap,
        workers=cfg.workers,
    )


def cmd_hierarchy(args, cfg: RunConfig) -> int:
    if args.task == "kdv":
        demo = kdv_demo()
        print(f"R[1,1] = {demo['flux_text']}")
        print(f"d/dt[1,1] w[1,0] = {demo['evolution_text']}")
        print(f"h[1,1] = {demo['hamiltonian_text']}")
        for name in sorted(demo["contributions"]):
            print(f"{name} contribution = {demo['contributions'][name]}")
        if cfg.out:
            emit({"command": "hierarchy", "task": "kdv", **demo}, cfg)
        return PASS

    if args.task == "hodge":
        if args.M is None:
            raise ValueError("hodge needs --M")
        demo = hodge_demo(args.M)
        print(demo["term_text"])
        if cfg.out:
            demo = {k: v for k, v in demo.items() if k != "generator"}
            emit({"command": "hierarchy", "task": "hodge", **demo}, cfg)
        return PASS

    if args.task == "commute":
        if not args.pairs:
            raise ValueError("commute needs --pairs")
        pairs = parse_pairs(args.pairs)
        spec = HierarchySpec(eps_trunc=args.eps if args.eps is not None else cfg.eps_trunc)
        p_top = max(max(p1, p2) for (_, p1), (_, p2) in pairs)
        flux = build_flux_R(spec, p_top)
        checks = check_commutation(flux, pairs)
        ok = all(c["commutes"] for c in checks)
        print(f"commute: {'true' if ok else 'false'}")
        if cfg.out:
            emit({"command": "hierarchy", "task": "commute", "checks": checks}, cfg)
        return PASS if ok else VIOLATION

    if args.task == "build":
        spec = _hierarchy_spec(args, cfg)
        if args.coords == "u":
            flux = build_flux_DR(spec, cfg.p_max)
        else:
            flux = build_flux_R(spec, cfg.p_max)
        report = {
            "command": "hierarchy",
            "task": "build",
            "coord": flux.coord,
            "eps_trunc": flux.eps_trunc,
            "fluxes": {
                f"{beta},{p}": [q.to_text() for q in qs]
                for (beta, p), qs in sorted(flux.fluxes.items())
            },
        }
        if flux.hams is not None:
            report["hamiltonians"] = {
                f"{beta},{p}": h.to_text() for (beta, p), h in sorted(flux.hams.items())
            }
        emit(report, cfg)
        return PASS

    # miura: report the chart maps as expression texts
    spec = _hierarchy_spec(args, cfg)
    normal = normal_miura(spec)
    chart = miura_O_to_DR(spec)
    emit(
        {
            "command": "hierarchy",
            "task": "miura",
            "normal": {str(a): p.to_text() for a, p in sorted(normal.exprs.items())},
            "chart": {str(a): p.to_text() for a, p in sorted(chart.exprs.items())},
        },
        cfg,
    )
    return PASS


# ---------------------------------------------------------------------------
# wiring
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="intobs", description="exact integrable observable computations")
    ap.add_argument("--config", help="JSON file with default settings")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--cohft", help="CohFT table path, or 'trivial'")
        p.add_argument("--obs", help="observable: 'psi' or an obs_O table path")
        p.add_argument("--dr-table", dest="dr_table", help="dr_D table path")
        p.add_argument("--a1-table", dest="a1_table", help="dr_D table with level one data")
        p.add_argument("--workers", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="write the JSON report here instead of stdout")

    c = sub.add_parser("correlator", help="one intersection number")
    c.add_argument("--g", type=int, required=True)
    c.add_argument("--psi", required=True, help="comma separated psi exponents")
    c.add_argument("--table", help="query this table instead of the builtin engine")
    c.add_argument("--kind", default="cohft_psi", help="table kind when --table is given")
    c.add_argument("--fields", help="comma separated field indices for table queries")
    common(c)

    k = sub.add_parser("check", help="relation checkers")
    k.add_argument("relation", choices=["lrt1", "lrt2", "lrtm", "master", "gmaster", "pi-dilaton"])
    k.add_argument("--g", help="genus or range A..B")
    k.add_argument("--n", help="marking count or range A..B")
    k.add_argument("--m", help="level or range A..B")
    k.add_argument("--strict-b", dest="strict_b", action="store_true")
    common(k)

    h = sub.add_parser("hierarchy", help="flux assembly and demos")
    h.add_argument("task", choices=["build", "kdv", "hodge", "miura", "commute"])
    h.add_argument("--M", type=int, help="marking count for the hodge demo")
    h.add_argument("--pairs", help="flow pairs b,p:b,p joined by ';'")
    h.add_argument("--eps", type=int, help="eps truncation for commute")
    h.add_argument("--coords", choices=["w", "u"], default="w")
    h.add_argument("--source", choices=["pcohft", "fcohft"], default="pcohft")
    h.add_argument("--nfields", type=int, default=1)
    h.add_argument("--n-cap", dest="n_cap", type=int)
    h.add_argument("--eps-trunc", dest="eps_trunc", type=int)
    h.add_argument("--t-trunc", dest="t_trunc", type=int)
    h.add_argument("--p-max", dest="p_max", type=int)
    common(h)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        cfg = make_config(args)
        if args.command == "correlator":
            return cmd_correlator(args, cfg)
        if args.command == "check":
            return cmd_check(args, cfg)
        return cmd_hierarchy(args, cfg)
    except (TableRequired, FileNotFoundError, HierarchyDataError) as exc:
        print(f"missing data: {exc}", file=sys.stderr)
        return MISSING
    except HierarchyError as exc:
        print(f"violated: {exc}", file=sys.stderr)
        return VIOLATION
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return MISSING


if __name__ == "__main__":
    sys.exit(main())
