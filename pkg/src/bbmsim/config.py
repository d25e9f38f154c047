"""Flat INI experiment configs: strict keys, tiny value grammar, no surprises.

Sections and keys are whitelisted per command; an unknown section or key is
an error that names the offender (catching typos beats silently ignoring
them). Values are scalars, comma lists, or small structured tokens:

  numbers      0.5, 3, sqrt(2), sqrt(2)/2, 1/sqrt(2), -sqrt(2)
  booleans     true/false/yes/no/1/0
  f at time    one@2, indicator:-1:1@10          (function id, '@', time)
  b|f at time  0.5|indicator:-1:1@10             (beta, '|', function, '@', t)
  b|a at time  0|0.5@4                           (beta, '|', cut, '@', t)
  interval     1:2                               (pair of numbers)

Checks that need the genealogy (death functionals, overlaps) force
record_tree on; times referenced by any check are validated against — and
betas are merged into — the statistics grid, so the resolved ExperimentConfig
echoed into outputs is the complete truth about what ran.
"""

from __future__ import annotations

import configparser
import math

from .experiments import ExperimentConfig
from .sampling import OffspringDistribution

_SQRT2 = math.sqrt(2.0)


class ConfigError(ValueError):
    """Malformed or contradictory experiment configuration."""


# -- value parsers -----------------------------------------------------------


def _atom(tok: str) -> float:
    tok = tok.strip()
    if tok == "sqrt(2)":
        return _SQRT2
    try:
        return float(tok)
    except ValueError:
        raise ConfigError(f"cannot parse number {tok!r} (numbers or sqrt(2) forms only)") from None


def parse_number(tok: str) -> float:
    """A float literal, sqrt(2), or a single quotient of such atoms."""
    tok = tok.strip()
    neg = tok.startswith("-")
    if neg:
        tok = tok[1:].strip()
    if "/" in tok:
        num, den = tok.split("/", 1)
        val = _atom(num) / _atom(den)
    else:
        val = _atom(tok)
    return -val if neg else val


def _parse_int(tok: str) -> int:
    val = parse_number(tok)
    if val != int(val):
        raise ConfigError(f"expected an integer, got {tok!r}")
    return int(val)


def _parse_bool(tok: str) -> bool:
    low = tok.strip().lower()
    if low in ("true", "yes", "1"):
        return True
    if low in ("false", "no", "0"):
        return False
    raise ConfigError(f"expected a boolean, got {tok!r}")


def _parse_list(tok: str):
    return [part.strip() for part in tok.split(",") if part.strip()]


def _parse_numbers(tok: str):
    return tuple(parse_number(p) for p in _parse_list(tok))


def _parse_at(tok: str):
    """'payload@t' -> (payload, t)."""
    if "@" not in tok:
        raise ConfigError(f"expected 'value@time', got {tok!r}")
    payload, t = tok.rsplit("@", 1)
    return payload.strip(), parse_number(t)


def _parse_fid_at(tok: str):
    fid, t = _parse_at(tok)
    return fid, t


def _parse_beta_fid_at(tok: str):
    payload, t = _parse_at(tok)
    if "|" not in payload:
        raise ConfigError(f"expected 'beta|function@time', got {tok!r}")
    beta, fid = payload.split("|", 1)
    return parse_number(beta), fid.strip(), t


def _parse_beta_a_at(tok: str):
    payload, t = _parse_at(tok)
    if "|" not in payload:
        raise ConfigError(f"expected 'beta|a@time', got {tok!r}")
    beta, a = payload.split("|", 1)
    return parse_number(beta), parse_number(a), t


def _parse_beta_at(tok: str):
    beta, t = _parse_at(tok)
    return parse_number(beta), t


def _parse_interval(tok: str):
    if ":" not in tok:
        raise ConfigError(f"expected 's:t', got {tok!r}")
    s, t = tok.split(":", 1)
    return parse_number(s), parse_number(t)


# -- schema ------------------------------------------------------------------

_SCHEMA = {
    "experiment": {
        "name",
        "master_seed",
        "replications",
        "workers",
        "output_dir",
        "per_replication",
    },
    "simulation": {
        "horizon",
        "snapshot_times",
        "particle_cap",
        "barrier_slope",
        "barrier_offset",
        "record_tree",
    },
    "offspring": None,  # keys are offspring counts
    "statistics": {"betas", "a_values", "times", "collect"},
    "tests": {
        "se_multiplier",
        "p_threshold",
        "population",
        "geometric_times",
        "ever_alive",
        "martingale_means",
        "many_to_one",
        "death_functionals",
        "second_moments",
        "functional",
        "growth",
        "barrier_line",
        "extinction",
        "critical",
        "critical_times",
        "overlap_mean",
        "oracle_equivalence",
    },
    "fluctuation": {"regime", "beta", "t", "delta", "hill_tolerance"},
    "overlap": {"beta", "a", "slope_tolerance", "hill_tolerance"},
    "limits": {"alpha", "stable_draws", "gumbel_draws", "pareto_draws"},
}

_COLLECT_TOKENS = ("n", "W", "Z", "Zc", "M")


def read_raw(path: str) -> dict:
    """Parse the INI file and reject unknown sections/keys by name."""
    parser = configparser.ConfigParser(
        delimiters=("=",), interpolation=None, strict=True
    )
    parser.optionxform = str
    with open(path) as fh:
        parser.read_file(fh, source=path)
    raw = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(
                f"unknown section [{section}]; known sections: {', '.join(sorted(_SCHEMA))}"
            )
        allowed = _SCHEMA[section]
        entries = dict(parser.items(section))
        if allowed is not None:
            for key in entries:
                if key not in allowed:
                    raise ConfigError(
                        f"unknown key {key!r} in [{section}]; allowed: {', '.join(sorted(allowed))}"
                    )
        raw[section] = entries
    return raw


def _require(raw, section, key):
    try:
        return raw[section][key]
    except KeyError:
        raise ConfigError(f"missing required key {key!r} in [{section}]") from None


def _get(raw, section, key, default=None):
    return raw.get(section, {}).get(key, default)


def _offspring(raw) -> OffspringDistribution:
    entries = raw.get("offspring")
    if not entries:
        raise ConfigError("missing [offspring] section (e.g. '2 = 1.0')")
    weights = {}
    for key, val in entries.items():
        try:
            k = int(key)
        except ValueError:
            raise ConfigError(f"offspring keys must be integers, got {key!r}") from None
        weights[k] = parse_number(val)
    try:
        return OffspringDistribution(weights)
    except ValueError as exc:
        raise ConfigError(f"bad offspring distribution: {exc}") from None


def build_experiment(raw: dict, command: str, overrides=None) -> tuple:
    """Resolve (ExperimentConfig, extras) for one CLI command.

    overrides maps {"master_seed", "replications", "output_dir", "workers"}
    to values that win over the file. extras carries command-specific knobs
    (check lists, fluctuation regime parameters, ...) already validated
    against the simulation grid.
    """
    overrides = overrides or {}
    if "experiment" not in raw:
        raise ConfigError("missing [experiment] section")
    if command == "limits":
        # The limit-law selftests run no branching simulation; a minimal
        # config carries only [experiment] (plus optional [limits]/[tests]),
        # and any simulation fields present are resolved but unused.
        raw = dict(raw)
        raw.setdefault("simulation", {"horizon": "1", "snapshot_times": "1"})
        raw.setdefault("offspring", {"2": "1.0"})
    if "simulation" not in raw:
        raise ConfigError("missing [simulation] section")

    name = _get(raw, "experiment", "name", "experiment")
    master_seed = int(
        overrides.get("master_seed")
        if overrides.get("master_seed") is not None
        else _parse_int(_require(raw, "experiment", "master_seed"))
    )
    replications = int(
        overrides.get("replications")
        if overrides.get("replications") is not None
        else _parse_int(_get(raw, "experiment", "replications", "1"))
    )
    workers = int(
        overrides.get("workers")
        if overrides.get("workers") is not None
        else _parse_int(_get(raw, "experiment", "workers", "1"))
    )
    output_dir = (
        overrides.get("output_dir")
        if overrides.get("output_dir") is not None
        else _get(raw, "experiment", "output_dir", ".")
    )

    horizon = parse_number(_require(raw, "simulation", "horizon"))
    snapshot_times = set(_parse_numbers(_require(raw, "simulation", "snapshot_times")))
    snapshot_times.add(horizon)
    particle_cap = _parse_int(_get(raw, "simulation", "particle_cap", "5000000"))
    record_tree = _parse_bool(_get(raw, "simulation", "record_tree", "false"))
    barrier = None
    if _get(raw, "simulation", "barrier_offset") is not None:
        barrier = (
            parse_number(_get(raw, "simulation", "barrier_slope", "sqrt(2)")),
            parse_number(_get(raw, "simulation", "barrier_offset")),
        )
    elif _get(raw, "simulation", "barrier_slope") is not None:
        raise ConfigError("barrier_slope given without barrier_offset")

    offspring = _offspring(raw)

    betas = set(_parse_numbers(_get(raw, "statistics", "betas", "")))
    a_values = set(_parse_numbers(_get(raw, "statistics", "a_values", "")))
    times = set(_parse_numbers(_get(raw, "statistics", "times", "")))
    collect = set(_parse_list(_get(raw, "statistics", "collect", "n, W")))
    for tok in collect:
        if tok not in _COLLECT_TOKENS:
            raise ConfigError(
                f"unknown collect token {tok!r}; allowed: {', '.join(_COLLECT_TOKENS)}"
            )

    se_multiplier = parse_number(_get(raw, "tests", "se_multiplier", "4"))
    p_threshold = parse_number(_get(raw, "tests", "p_threshold", "0.01"))

    options = {}
    extras = {
        "per_replication": _parse_bool(_get(raw, "experiment", "per_replication", "false")),
    }

    def need_snapshot(t, what):
        if float(t) not in snapshot_times:
            raise ConfigError(
                f"{what} references time {t!r}, which is not in snapshot_times"
            )

    if command == "check":
        tests = raw.get("tests", {})
        extras["population"] = _parse_bool(tests.get("population", "true"))
        extras["martingale_means"] = _parse_bool(tests.get("martingale_means", "true"))
        extras["extinction"] = _parse_bool(tests.get("extinction", "false"))
        extras["critical"] = _parse_bool(tests.get("critical", "false"))
        extras["oracle_equivalence"] = _parse_bool(tests.get("oracle_equivalence", "false"))

        geometric_times = []
        for t in _parse_numbers(tests.get("geometric_times", "")):
            need_snapshot(t, "geometric_times")
            times.add(t)
            geometric_times.append(t)
        extras["geometric_times"] = tuple(geometric_times)

        ever = []
        for tok in _parse_list(tests.get("ever_alive", "")):
            s, t = _parse_interval(tok)
            if not (0.0 <= s < t):
                raise ConfigError(f"ever_alive interval {tok!r} needs 0 <= s < t")
            need_snapshot(t, "ever_alive")
            ever.append((s, t))
        if ever:
            options["ever_alive"] = tuple(ever)
            record_tree = True

        m2o = []
        for tok in _parse_list(tests.get("many_to_one", "")):
            fid, t = _parse_fid_at(tok)
            need_snapshot(t, "many_to_one")
            m2o.append((fid, t))
        if m2o:
            options["many_to_one"] = tuple(m2o)
        extras["many_to_one"] = tuple(m2o)

        death = []
        for tok in _parse_list(tests.get("death_functionals", "")):
            fid, t = _parse_fid_at(tok)
            need_snapshot(t, "death_functionals")
            death.append((fid, t))
        if death:
            options["death_functional"] = tuple(death)
            record_tree = True
        extras["death_functionals"] = tuple(death)

        second = []
        for tok in _parse_list(tests.get("second_moments", "")):
            beta, t = _parse_beta_at(tok)
            need_snapshot(t, "second_moments")
            betas.add(beta)
            times.add(t)
            second.append((beta, t))
        extras["second_moments"] = tuple(second)

        functional = []
        for tok in _parse_list(tests.get("functional", "")):
            beta, fid, t = _parse_beta_fid_at(tok)
            need_snapshot(t, "functional")
            functional.append((beta, fid, t))
        if functional:
            options["functional"] = tuple(functional)

        growth = []
        for tok in _parse_list(tests.get("growth", "")):
            beta, fid, t = _parse_beta_fid_at(tok)
            need_snapshot(t, "growth")
            growth.append((beta, fid, t))
        if growth:
            options["growth"] = tuple(growth)

        overlap_mean = []
        for tok in _parse_list(tests.get("overlap_mean", "")):
            beta, a, t = _parse_beta_a_at(tok)
            if not (0.0 < a < 1.0):
                raise ConfigError(f"overlap cut in {tok!r} must lie in (0, 1)")
            need_snapshot(t, "overlap_mean")
            need_snapshot(a * t, "overlap_mean (the a*t split time)")
            overlap_mean.append((beta, a, t))
        if overlap_mean:
            options["overlap"] = tuple(overlap_mean)
            record_tree = True
        extras["overlap_mean"] = tuple(overlap_mean)

        if tests.get("barrier_line") is not None:
            L = parse_number(tests["barrier_line"])
            options["exceed_line"] = L
            extras["barrier_line"] = L
        else:
            extras["barrier_line"] = None

        if extras["critical"]:
            critical_times = _parse_numbers(tests.get("critical_times", "4, 6, 8"))
            for t in critical_times:
                need_snapshot(t, "critical_times")
                times.add(t)
            times.add(horizon)
            betas.add(_SQRT2)
            collect.update(("W", "Zc", "M", "n"))
            extras["critical_times"] = tuple(sorted(critical_times))
        if extras["population"]:
            collect.add("n")
            if not times:
                times.add(horizon)
    elif command == "fluctuations":
        if "fluctuation" not in raw:
            raise ConfigError("missing [fluctuation] section")
        fl = raw["fluctuation"]
        extras["regime"] = fl.get("regime", "").strip()
        if not extras["regime"]:
            raise ConfigError("missing required key 'regime' in [fluctuation]")
        extras["beta"] = parse_number(_require(raw, "fluctuation", "beta"))
        extras["t"] = parse_number(_require(raw, "fluctuation", "t"))
        extras["delta"] = parse_number(_require(raw, "fluctuation", "delta"))
        extras["hill_tolerance"] = parse_number(fl.get("hill_tolerance", "0.25"))
        if extras["t"] + extras["delta"] != horizon:
            raise ConfigError(
                f"fluctuation needs horizon = t + delta "
                f"({extras['t']!r} + {extras['delta']!r} != {horizon!r})"
            )
        options.update(
            regime=extras["regime"],
            beta=extras["beta"],
            t=extras["t"],
            delta=extras["delta"],
            hill_tolerance=extras["hill_tolerance"],
        )
    elif command == "overlap":
        if "overlap" not in raw:
            raise ConfigError("missing [overlap] section")
        ov = raw["overlap"]
        extras["beta"] = parse_number(_require(raw, "overlap", "beta"))
        extras["a"] = parse_number(_require(raw, "overlap", "a"))
        if not (0.0 < extras["a"] < 1.0):
            raise ConfigError("overlap cut a must lie strictly inside (0, 1)")
        extras["slope_tolerance"] = parse_number(ov.get("slope_tolerance", "0.2"))
        extras["hill_tolerance"] = parse_number(ov.get("hill_tolerance", "0.25"))
        if len(times) < 2:
            raise ConfigError("[statistics] times needs at least two horizons for overlap decay")
        for t in times:
            need_snapshot(t, "overlap")
            need_snapshot(extras["a"] * t, "overlap (the a*t split time)")
        record_tree = True
        options.update(
            beta=extras["beta"],
            a=extras["a"],
            slope_tolerance=extras["slope_tolerance"],
            hill_tolerance=extras["hill_tolerance"],
        )
    elif command == "limits":
        lm = raw.get("limits", {})
        extras["alpha"] = parse_number(lm.get("alpha", "0.7"))
        extras["stable_draws"] = _parse_int(lm.get("stable_draws", "100000"))
        extras["gumbel_draws"] = _parse_int(lm.get("gumbel_draws", "1000000"))
        extras["pareto_draws"] = _parse_int(lm.get("pareto_draws", "100000"))
    elif command in ("simulate", "ensemble"):
        if command == "simulate":
            record_tree = True  # inspecting one realization is the whole point
    else:
        raise ConfigError(f"unknown command {command!r}")

    for t in times:
        need_snapshot(t, "[statistics] times")
    for a in a_values:
        if not (0.0 < a < 1.0):
            raise ConfigError(f"a_values entries must lie in (0, 1), got {a!r}")
        for t in times:
            need_snapshot(a * t, f"a_values ({a!r} with time {t!r})")
    if a_values and times:
        options.setdefault(
            "overlap",
            tuple((beta, a, t) for beta in sorted(betas) for a in sorted(a_values) for t in sorted(times)),
        )
        record_tree = True

    if command in ("ensemble", "check") and collect:
        options["collect"] = tuple(sorted(collect))

    cfg = ExperimentConfig(
        name=name,
        horizon=horizon,
        snapshot_times=tuple(sorted(snapshot_times)),
        offspring=offspring,
        replications=replications,
        master_seed=master_seed,
        betas=tuple(sorted(betas)),
        a_values=tuple(sorted(a_values)),
        times=tuple(sorted(times)),
        particle_cap=particle_cap,
        barrier=barrier,
        record_tree=record_tree,
        se_multiplier=se_multiplier,
        p_threshold=p_threshold,
        workers=workers,
        output_dir=output_dir,
        options=options,
    )
    return cfg, extras


def load(path: str, command: str, overrides=None) -> tuple:
    """read_raw + build_experiment in one step."""
    return build_experiment(read_raw(path), command, overrides)
