"""The ``fpplab`` command line front door.

Every subcommand resolves a full configuration (config file merged with
flags), derives a deterministic per-block seed schedule from the master
seed, runs, and emits one JSON-lines run record.  Payloads are pure
functions of (configuration, artifact version): sampling subcommands split
their budget into fixed-size blocks with seeds derived only from the master
seed and the block index, and block results merge by summing counts, so the
worker count never changes the output.

Exit codes: 0 success, 2 configuration validation error, 3 conditioning too
rare, 4 exact-DP grid overflow.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from fractions import Fraction

from . import __version__
from .errors import ConfigValidationError, GridOverflowError, RareConditioningError
from .lattice import Box
from .report import wilson_interval
from .rng import generator, replica_seed

BLOCK = 4096


# ---------------------------------------------------------------------------
# config plumbing


def _frac(text):
    return Fraction(str(text))


def _frac_or_none(text):
    if text is None or text == "inf" or text == "":
        return None
    return Fraction(str(text))


def _pairs(value):
    """[(value, prob), ...] from JSON lists of rational strings."""
    return [(Fraction(str(v)), Fraction(str(p))) for v, p in value]


def _intlist(value):
    if isinstance(value, str):
        return [int(x) for x in value.split(",")]
    return [int(x) for x in value]


# name -> {key: (converter, default)}; _REQ marks required keys
_REQ = object()

SCHEMAS = {
    "fpp.sim": {"dist": (str, "bernoulli-half"), "n": (int, 16)},
    "fpp.decompose": {"dist": (str, "bernoulli-half"), "n": (int, 64), "R": (int, 2), "K": (int, 0)},
    "iic.estimate": {
        "dist": (str, "bernoulli-half"),
        "event": (str, _REQ),
        "n": (int, 16),
        "L": (_frac_or_none, Fraction(0)),
        "budget": (int, 20000),
    },
    "iic.sample": {"dist": (str, "bernoulli-half"), "proxy_n": (int, 16), "budget": (int, 200000)},
    "perc.crossing": {
        "p": (float, 0.5),
        "n0": (int, 16),
        "shape": (str, "rect"),
        "samples": (int, 20000),
    },
    "perc.corrlen": {
        "p": (float, _REQ),
        "epsilon": (float, 0.02),
        "nmax": (int, 64),
        "samples": (int, 2000),
    },
    "perc.fourarm": {"radius": (int, 8), "samples": (int, 2000)},
    "perc.ok-event": {
        "R": (int, 2),
        "k": (int, 1),
        "p_k": (lambda v: None if v is None else float(v), None),
        "samples": (int, 500),
        "epsilon1": (float, 0.02),
        "corr_samples": (int, 800),
    },
    "condsum.law": {"model": (dict, _REQ), "n": (int, _REQ), "L": (_frac, _REQ), "j": (int, 1)},
    "condsum.bound": {
        "model": (dict, _REQ),
        "n": (int, _REQ),
        "L": (_frac, _REQ),
        "delta": (_frac, _REQ),
        "delta_prime": (_frac, _REQ),
    },
    "condsum.parity": {"p": (_frac, Fraction(1, 2)), "L": (_frac, 3), "n": (int, 50)},
    "condsum.general-parity": {
        "x1": (_pairs, _REQ),
        "tail": (_pairs, _REQ),
        "L": (_frac, _REQ),
        "delta": (_frac, Fraction(1, 2)),
    },
    "condsum.oscillate": {
        "rblocks": (_intlist, _REQ),
        "L": (_frac, 4),
        "n_list": (_intlist, _REQ),
    },
    "partition.q": {"Lmax": (int, 50), "alpha": (str, "ones")},
    "partition.criteria": {"alpha": (str, "ones"), "N": (int, 60)},
}

COMMON_KEYS = {"seed", "out", "workers", "subcommand"}


def resolve_config(subcommand: str, file_config: dict, overrides: dict) -> dict:
    if subcommand not in SCHEMAS:
        raise ConfigValidationError(f"unknown subcommand {subcommand!r}")
    schema = SCHEMAS[subcommand]
    merged = dict(file_config or {})
    for k, v in overrides.items():
        if v is not None:
            merged[k] = v
    unknown = set(merged) - set(schema) - COMMON_KEYS
    if unknown:
        raise ConfigValidationError(f"unknown config keys {sorted(unknown)} for {subcommand}")
    out = {"subcommand": subcommand, "seed": int(merged.get("seed", 0))}
    if "workers" in merged:
        out["workers"] = int(merged["workers"])
    for key, (conv, default) in schema.items():
        if key in merged:
            try:
                out[key] = conv(merged[key])
            except (ValueError, TypeError) as exc:
                raise ConfigValidationError(f"bad value for {key!r}: {exc}") from exc
        elif default is _REQ:
            raise ConfigValidationError(f"missing required key {key!r} for {subcommand}")
        else:
            out[key] = default
    return out


def _canonical(obj):
    """JSON-safe deep copy with rationals as 'p/q' strings."""
    if isinstance(obj, Fraction):
        return f"{obj.numerator}/{obj.denominator}"
    if isinstance(obj, dict):
        return {str(k): _canonical(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_canonical(v) for v in obj]
    return obj


def config_checksum(config: dict) -> str:
    blob = json.dumps(_canonical(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


# ---------------------------------------------------------------------------
# block-parallel counting


def _block_seeds(master: int, total: int, block: int = BLOCK):
    blocks = []
    left = total
    i = 0
    while left > 0:
        m = min(block, left)
        blocks.append((replica_seed(master, i), m))
        left -= m
        i += 1
    return blocks


def _map_blocks(fn, blocks, workers: int):
    if workers <= 1 or len(blocks) <= 1:
        return [fn(b) for b in blocks]
    from concurrent.futures import ProcessPoolExecutor

    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, blocks))


def _crossing_block(args):
    cfg, seed, count = args
    from .percolation import crossing_prob

    rep = crossing_prob(cfg["p"], cfg["n0"], cfg["shape"], count, generator(seed))
    return (rep.successes, count)


def _fourarm_block(args):
    cfg, seed, count = args
    from .percolation import four_arm_prob

    rep = four_arm_prob(cfg["radius"], count, generator(seed))
    return (rep.successes, count)


def _iic_block(args):
    cfg, seed, count = args
    from .conditional import estimate_conditional, parse_event
    from .weights import preset

    est = estimate_conditional(
        preset(cfg["dist"]),
        parse_event(cfg["event"]),
        cfg["n"],
        cfg["L"],
        count,
        generator(seed),
        min_accepted=0,
    )
    return (est.extra["hits"], est.accepted_samples, count)


# ---------------------------------------------------------------------------
# handlers


def _run_fpp_sim(cfg, seed):
    from .passage import Boundary, passage_time
    from .weights import preset

    dist = preset(cfg["dist"])
    config = dist.sample_config(Box(cfg["n"]), generator(seed))
    value, geo = passage_time(config, (0, 0), Boundary(cfg["n"]))
    return {
        "n": cfg["n"],
        "t_boundary": _canonical(value),
        "geodesic_vertices": len(geo.vertices),
    }


def _run_fpp_decompose(cfg, seed):
    from .circuits import decompose
    from .passage import t_to_boundary
    from .weights import preset

    dist = preset(cfg["dist"])
    rng = generator(seed)
    try:
        config, _, _ = dist.sample_config_arrays(Box(cfg["n"]), rng)
    except TypeError:
        config = dist.sample_config(Box(cfg["n"]), rng)
    d = decompose(config, cfg["n"], cfg["R"], cfg["K"])
    total = d.total()
    t = t_to_boundary(config, cfg["n"])
    return {"decomposition": _canonical(d.to_json()), "T": _canonical(t), "identity_holds": total == t}


def _run_iic_estimate(cfg, seed, workers=1):
    blocks = [(cfg, s, m) for s, m in _block_seeds(seed, cfg["budget"])]
    parts = _map_blocks(_iic_block, blocks, workers)
    hits = sum(p[0] for p in parts)
    accepted = sum(p[1] for p in parts)
    total = sum(p[2] for p in parts)
    if accepted < 30:
        raise RareConditioningError(accepted, total)
    lo, hi = wilson_interval(hits, accepted)
    return {
        "event": cfg["event"],
        "n": cfg["n"],
        "L": _canonical(cfg["L"]) if cfg["L"] is not None else None,
        "estimate": hits / accepted,
        "ci_lo": lo,
        "ci_hi": hi,
        "accepted_samples": accepted,
        "total_samples": total,
        "acceptance_rate": accepted / total,
    }


def _run_iic_sample(cfg, seed):
    from .conditional import sample_nu_tilde
    from .passage import t_to_boundary
    from .weights import preset

    config = sample_nu_tilde(preset(cfg["dist"]), cfg["proxy_n"], generator(seed), cfg["budget"])
    return {
        "proxy_n": cfg["proxy_n"],
        "t_boundary": _canonical(t_to_boundary(config, cfg["proxy_n"])),
        "config": config.to_json(),
    }


def _run_perc_crossing(cfg, seed, workers=1):
    blocks = [(cfg, s, m) for s, m in _block_seeds(seed, cfg["samples"])]
    parts = _map_blocks(_crossing_block, blocks, workers)
    hits = sum(p[0] for p in parts)
    total = sum(p[1] for p in parts)
    lo, hi = wilson_interval(hits, total)
    return {
        "quantity": "crossing_prob",
        "params": {"p": cfg["p"], "n0": cfg["n0"], "shape": cfg["shape"]},
        "estimate": hits / total,
        "ci_lo": lo,
        "ci_hi": hi,
        "samples": total,
        "successes": hits,
    }


def _run_perc_corrlen(cfg, seed):
    from .percolation import correlation_length

    est = correlation_length(
        cfg["p"], cfg["epsilon"], cfg["nmax"], cfg["samples"], generator(seed)
    )
    return {
        "p": cfg["p"],
        "epsilon": cfg["epsilon"],
        "value": est.value,
        "exceeds_nmax": est.exceeds_nmax,
        "ambiguous": est.ambiguous,
        "diagnostics": est.diagnostics,
    }


def _run_perc_fourarm(cfg, seed, workers=1):
    blocks = [(cfg, s, m) for s, m in _block_seeds(seed, cfg["samples"])]
    parts = _map_blocks(_fourarm_block, blocks, workers)
    hits = sum(p[0] for p in parts)
    total = sum(p[1] for p in parts)
    lo, hi = wilson_interval(hits, total)
    return {
        "quantity": "four_arm_prob",
        "params": {"radius": cfg["radius"]},
        "estimate": hits / total,
        "ci_lo": lo,
        "ci_hi": hi,
        "samples": total,
        "successes": hits,
    }


def _run_perc_ok_event(cfg, seed):
    from .percolation import find_window_edges, p_k_solve, sample_uniform_config

    rng = generator(seed)
    R, k = cfg["R"], cfg["k"]
    p_k = cfg["p_k"]
    solved = None
    if p_k is None:
        solved = p_k_solve(R, k, cfg["epsilon1"], cfg["corr_samples"], rng)
        p_k = solved.p
    n = R ** (3 * k + 3)
    fired = 0
    multi = 0
    for _ in range(cfg["samples"]):
        ucfg = sample_uniform_config(Box(n), rng)
        edges = find_window_edges(ucfg, k, R, p_k)
        if edges:
            fired += 1
            if len(edges) > 1:
                multi += 1
    lo, hi = wilson_interval(fired, cfg["samples"])
    return {
        "quantity": "window_event_prob",
        "params": {"R": R, "k": k, "p_k": p_k, "solved": solved is not None},
        "estimate": fired / cfg["samples"],
        "ci_lo": lo,
        "ci_hi": hi,
        "samples": cfg["samples"],
        "successes": fired,
        "multi_edge_configs": multi,
    }


def _model_from_spec(spec):
    from .condsum import DiscreteVar, IIDTail, IndexedTail

    if isinstance(spec, str):
        if spec.startswith("parity"):
            from .condsum import parity_model

            p = Fraction(spec.split(":", 1)[1]) if ":" in spec else Fraction(1, 2)
            return parity_model(p)
        if spec == "partition":
            from .condsum import partition_model

            return partition_model()
        raise ConfigValidationError(f"unknown model preset {spec!r}")
    head = tuple(DiscreteVar.from_pairs(_pairs(h)) for h in spec.get("head", []))
    tail_spec = spec.get("tail")
    tail = None
    if tail_spec:
        kind = tail_spec.get("kind", "iid")
        if kind == "iid":
            tail = IIDTail(DiscreteVar.from_pairs(_pairs(tail_spec["var"])))
        elif kind == "linear":
            tail = IndexedTail("linear", zero_prob=Fraction(str(tail_spec.get("p", "1/2"))))
        elif kind == "blocks":
            tail = IndexedTail(
                "blocks",
                zero_prob=Fraction(str(tail_spec.get("p", "1/2"))),
                rblocks=tuple(tail_spec["rblocks"]),
            )
        else:
            raise ConfigValidationError(f"unknown tail kind {kind!r}")
    from .condsum import SumModel

    return SumModel(head=head, tail=tail)


def _run_condsum_law(cfg, seed):
    from .condsum import conditional_law

    law = conditional_law(_model_from_spec(cfg["model"]), cfg["n"], cfg["L"], cfg["j"])
    return law.to_json()


def _run_condsum_bound(cfg, seed):
    from .condsum import resampling_bound

    rb = resampling_bound(
        _model_from_spec(cfg["model"]), cfg["n"], cfg["L"], cfg["delta"], cfg["delta_prime"]
    )
    return rb.to_json()


def _run_condsum_parity(cfg, seed):
    from .condsum import parity_model, probe_first_variable

    value = probe_first_variable(parity_model(cfg["p"]), cfg["L"], Fraction(1, 2), [cfg["n"]])[0]
    return {
        "p": _canonical(cfg["p"]),
        "L": _canonical(cfg["L"]),
        "n": cfg["n"],
        "prob_x1_eq_1": _canonical(value),
        "float": float(value),
    }


def _run_condsum_general_parity(cfg, seed):
    from .condsum import DiscreteVar, general_parity_limit

    res = general_parity_limit(
        DiscreteVar.from_pairs(cfg["x1"]),
        DiscreteVar.from_pairs(cfg["tail"]),
        cfg["L"],
        cfg["delta"],
    )
    return {"kstar": res.kstar, "limit": _canonical(res.limit), "float": float(res.limit)}


def _run_condsum_oscillate(cfg, seed):
    from .condsum import oscillation_example

    vals = oscillation_example(cfg["rblocks"], cfg["n_list"], L=cfg["L"])
    return {
        "rblocks": list(cfg["rblocks"]),
        "n_list": list(cfg["n_list"]),
        "values": [_canonical(v) for v in vals],
        "floats": [float(v) for v in vals],
    }


def _run_partition_q(cfg, seed):
    from .partitions import alpha_rule, q_multiplicity

    table = q_multiplicity(cfg["Lmax"], alpha_rule(cfg["alpha"]))
    rows = list(table.csv_rows())
    csv = "L,q,Q\n" + "\n".join(f"{a},{b},{c}" for a, b, c in rows)
    return {"alpha": cfg["alpha"], "Lmax": cfg["Lmax"], "csv": csv}


def _run_partition_criteria(cfg, seed):
    from .partitions import alpha_rule, criteria_classify

    return criteria_classify(alpha_rule(cfg["alpha"]), cfg["N"]).to_json()


HANDLERS = {
    "fpp.sim": _run_fpp_sim,
    "fpp.decompose": _run_fpp_decompose,
    "iic.estimate": _run_iic_estimate,
    "iic.sample": _run_iic_sample,
    "perc.crossing": _run_perc_crossing,
    "perc.corrlen": _run_perc_corrlen,
    "perc.fourarm": _run_perc_fourarm,
    "perc.ok-event": _run_perc_ok_event,
    "condsum.law": _run_condsum_law,
    "condsum.bound": _run_condsum_bound,
    "condsum.parity": _run_condsum_parity,
    "condsum.general-parity": _run_condsum_general_parity,
    "condsum.oscillate": _run_condsum_oscillate,
    "partition.q": _run_partition_q,
    "partition.criteria": _run_partition_criteria,
}

_PARALLEL = {"perc.crossing", "perc.fourarm", "iic.estimate"}


def run(config: dict) -> dict:
    """Execute a resolved configuration and return its run record."""
    sub = config["subcommand"]
    handler = HANDLERS[sub]
    seed = config["seed"]
    workers = config.get("workers", 1)
    t0 = time.perf_counter()
    if sub in _PARALLEL:
        payload = handler(config, seed, workers=workers)
    else:
        payload = handler(config, seed)
    elapsed = time.perf_counter() - t0
    echo = {k: _canonical(v) for k, v in config.items() if k != "workers"}
    total = config.get("budget") or config.get("samples") or 1
    return {
        "subcommand": sub,
        "version": __version__,
        "config": echo,
        "config_sha256": config_checksum(echo),
        "seed_schedule": [s for s, _ in _block_seeds(seed, total)][:16],
        "payload": payload,
        "wall_time_s": elapsed,
    }


def replay(record: dict) -> dict:
    """Re-run a record's configuration; byte-identical payload required."""
    if record.get("version") != __version__:
        raise ConfigValidationError(
            f"record version {record.get('version')!r} does not match {__version__!r}"
        )
    echo = record["config"]
    if config_checksum(echo) != record.get("config_sha256"):
        raise ConfigValidationError("config echo fails its checksum (tampered record?)")
    sub = echo["subcommand"]
    schema_config = resolve_config(
        sub, {k: v for k, v in echo.items() if k not in ("subcommand",)}, {}
    )
    fresh = run(schema_config)
    old = json.dumps(record["payload"], sort_keys=True)
    new = json.dumps(fresh["payload"], sort_keys=True)
    if old != new:
        raise RuntimeError("replay produced a different payload")
    return fresh


# ---------------------------------------------------------------------------
# argument parsing


def _build_parser():
    parser = argparse.ArgumentParser(prog="fpplab", description=__doc__)
    parser.add_argument("--version", action="version", version=f"fpplab {__version__}")
    subs = parser.add_subparsers(dest="subcommand", required=True)
    for name, schema in SCHEMAS.items():
        sp = subs.add_parser(name)
        sp.add_argument("--config", default=None, help="JSON config file")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--out", default=None, help="append the run record here (JSON lines)")
        sp.add_argument("--workers", type=int, default=None)
        for key in schema:
            sp.add_argument(f"--{key.replace('_', '-')}", dest=key, default=None)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        file_config = {}
        if args.config:
            with open(args.config) as fh:
                file_config = json.load(fh)
        overrides = {
            k: v
            for k, v in vars(args).items()
            if k not in ("config", "subcommand", "out") and v is not None
        }
        config = resolve_config(args.subcommand, file_config, overrides)
        record = run(config)
    except ConfigValidationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except RareConditioningError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except GridOverflowError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    line = json.dumps(record, sort_keys=True)
    if args.out:
        if args.out.endswith(".csv") and "csv" in record["payload"]:
            with open(args.out, "w") as fh:
                fh.write(record["payload"]["csv"] + "\n")
        else:
            with open(args.out, "a") as fh:
                fh.write(line + "\n")
    else:
        print(line)
    return 0


if __name__ == "__main__":
    sys.exit(main())
