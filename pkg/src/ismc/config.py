"""Experiment configuration files (TOML) and their validation.

See the README for the full grammar. Validation errors carry the line of
the offending key whenever it can be located in the source text.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .ais import ALGORITHM_CONFIGS, AISConfig
from .errors import ConfigurationError, ISMCError
from .mis import MISScheme
from .proposals import ProposalParams, proposal_from_dict
from .targets import builtin_target, integrand

METHODS = ("is", "mis", "ais")
FORMATS = ("csv", "json")
_TOP_KEYS = {"seed", "trials", "method", "integrands", "target", "is", "mis", "ais", "output"}


class ConfigError(ConfigurationError):
    """Configuration problem with an optional source location."""

    def __init__(self, message, line=None, source=None):
        self.line = line
        self.source = source
        where = source or "<config>"
        if line is not None:
            where = f"{where}:{line}"
        super().__init__(f"{where}: {message}")


@dataclass(frozen=True)
class Experiment:
    """Validated, plain-data description of an experiment (picklable)."""

    master_seed: int
    trials: int
    method: str
    target: dict
    integrands: tuple
    is_cfg: dict = field(default_factory=dict)
    mis_cfg: dict = field(default_factory=dict)
    ais_cfg: dict = field(default_factory=dict)
    output_path: Optional[str] = None
    output_format: str = "csv"

    # -- builders used by the runner (cheap; called once per worker) --

    def build_target(self):
        return builtin_target(self.target["name"], self.target["dim"], self.target["params"])

    def build_integrands(self):
        return [integrand(n, self.target["dim"]) for n in self.integrands]

    def build_is_proposal(self):
        return proposal_from_dict(self.is_cfg["proposal"], self.target["dim"])

    def build_mis_proposals(self):
        return [proposal_from_dict(p, self.target["dim"]) for p in self.mis_cfg["proposals"]]

    def build_scheme(self, kind):
        return MISScheme(kind, self.mis_cfg.get("partition"), self.mis_cfg.get("counts"))

    def build_ais_config(self, rng):
        """AIS configuration; uniform initial locations are drawn from ``rng``."""
        a = self.ais_cfg
        dim = self.target["dim"]
        if "init_locations" in a:
            locs = a["init_locations"]
        else:
            lo, hi = a["init_uniform"]
            locs = rng.uniform(lo, hi, size=(a["n_proposals"], dim))
        params = [ProposalParams(loc, a.get("init_cov", 1.0)) for loc in locs]
        return AISConfig(
            n_proposals=a["n_proposals"],
            samples_per_proposal=a["samples_per_proposal"],
            iterations=a["iterations"],
            adapter=a["adapter"],
            weighting=a["weighting"],
            init_params=params,
            clip_tau=a.get("clip_tau"),
            family=a.get("family", "gaussian"),
            dof=a.get("dof"),
            step_scale=a.get("step_scale"),
        )


def locate(text, table, key):
    """1-based line of ``key`` inside ``[table]`` (``None`` = top level)."""
    if text is None:
        return None
    current = None
    key_re = re.compile(rf"^\s*{re.escape(key)}\s*=") if key else None
    for lineno, line in enumerate(text.splitlines(), 1):
        header = re.match(r"^\s*\[\s*([A-Za-z0-9_.\-]+)\s*\]", line)
        if header:
            current = header.group(1)
            if key is None and current == table:
                return lineno
            continue
        if key_re and current == table and key_re.match(line):
            return lineno
    if key is not None:
        return locate(text, table, None)
    return None


def load_config(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", source=str(path)) from None
    return parse_config(text, source=str(path))


def parse_config(text, source="<config>"):
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ConfigError(f"syntax error: {exc}", int(m.group(1)) if m else None, source) from None
    return validate_config(raw, text, source)


def _fail(text, source, table, key, message):
    raise ConfigError(message, locate(text, table, key), source)


def _require(d, key, text, source, table, kind=None):
    if key not in d:
        _fail(text, source, table, None, f"missing required key '{key}'" + (f" in [{table}]" if table else ""))
    value = d[key]
    if kind is not None and not isinstance(value, kind) or isinstance(value, bool) and kind is int:
        _fail(text, source, table, key, f"'{key}' has the wrong type")
    return value


def validate_config(raw, text=None, source="<config>"):
    """Check a parsed config dict and return an :class:`Experiment`."""
    unknown = set(raw) - _TOP_KEYS
    if unknown:
        k = sorted(unknown)[0]
        _fail(text, source, None, k, f"unknown key '{k}'")

    seed = _require(raw, "seed", text, source, None, int)
    if not 0 <= seed < 2**64:
        _fail(text, source, None, "seed", "seed must be a 64-bit unsigned integer")
    trials = raw.get("trials", 1)
    if not isinstance(trials, int) or isinstance(trials, bool) or trials < 1:
        _fail(text, source, None, "trials", "trials must be an integer >= 1")
    method = _require(raw, "method", text, source, None, str)
    if method not in METHODS:
        _fail(text, source, None, "method", f"method must be one of {', '.join(METHODS)}")

    tgt = _require(raw, "target", text, source, None, dict)
    name = _require(tgt, "name", text, source, "target", str)
    dim = _require(tgt, "dim", text, source, "target", int)
    params = tgt.get("params", {})
    extra = set(tgt) - {"name", "dim", "params"}
    if extra:
        k = sorted(extra)[0]
        _fail(text, source, "target", k, f"unknown key '{k}' in [target]")
    target = {"name": name, "dim": dim, "params": params}
    try:
        builtin_target(name, dim, params)
    except (ISMCError, ValueError, TypeError) as exc:
        _fail(text, source, "target", "params" if "params" in tgt else "name", str(exc))

    names = raw.get("integrands", ["x0"])
    if not isinstance(names, list) or not names or not all(isinstance(n, str) for n in names):
        _fail(text, source, None, "integrands", "integrands must be a nonempty list of names")
    if len(set(names)) != len(names):
        _fail(text, source, None, "integrands", "integrand names must be unique")
    for n in names:
        try:
            integrand(n, dim)
        except (ISMCError, ValueError, TypeError) as exc:
            _fail(text, source, None, "integrands", str(exc))

    out = raw.get("output", {})
    if not isinstance(out, dict):
        _fail(text, source, None, "output", "[output] must be a table")
    fmt = out.get("format", "csv")
    if fmt not in FORMATS:
        _fail(text, source, "output", "format", f"format must be one of {', '.join(FORMATS)}")
    path = out.get("path")
    if path is not None and not isinstance(path, str):
        _fail(text, source, "output", "path", "path must be a string")

    exp = Experiment(seed, trials, method, target, tuple(names), output_path=path, output_format=fmt)
    if method == "is":
        exp = replace(exp, is_cfg=_validate_is(raw, text, source, dim))
    elif method == "mis":
        exp = replace(exp, mis_cfg=_validate_mis(raw, text, source, dim))
    else:
        exp = replace(exp, ais_cfg=_validate_ais(raw, text, source, dim))
    return exp


def _validate_is(raw, text, source, dim):
    sec = _require(raw, "is", text, source, None, dict)
    samples = _require(sec, "samples", text, source, "is", int)
    if samples < 1:
        _fail(text, source, "is", "samples", "samples must be >= 1")
    prop = _require(sec, "proposal", text, source, "is", dict)
    try:
        proposal_from_dict(prop, dim)
    except (ISMCError, ValueError, TypeError) as exc:
        _fail(text, source, "is", "proposal", str(exc))
    extra = set(sec) - {"samples", "proposal"}
    if extra:
        k = sorted(extra)[0]
        _fail(text, source, "is", k, f"unknown key '{k}' in [is]")
    return {"samples": samples, "proposal": prop}


def _validate_mis(raw, text, source, dim):
    sec = _require(raw, "mis", text, source, None, dict)
    extra = set(sec) - {"scheme", "schemes", "partition", "counts", "proposals"}
    if extra:
        k = sorted(extra)[0]
        _fail(text, source, "mis", k, f"unknown key '{k}' in [mis]")
    props = _require(sec, "proposals", text, source, "mis", list)
    if not props:
        _fail(text, source, "mis", "proposals", "at least one proposal is required")
    for p in props:
        try:
            proposal_from_dict(p, dim)
        except (ISMCError, ValueError, TypeError) as exc:
            _fail(text, source, "mis", "proposals", f"bad proposal: {exc}")
    schemes = sec.get("schemes")
    scheme = sec.get("scheme")
    if scheme is None and not schemes:
        _fail(text, source, "mis", None, "[mis] needs 'scheme' or 'schemes'")
    kinds = list(schemes or []) + ([scheme] if scheme else [])
    key = "scheme" if scheme else "schemes"
    for kind in kinds:
        try:
            s = MISScheme(kind, sec.get("partition"), sec.get("counts"))
            s.check(len(props))
        except (ISMCError, ValueError, TypeError) as exc:
            _fail(text, source, "mis", key, str(exc))
    if schemes and len(set(schemes)) != len(schemes):
        _fail(text, source, "mis", "schemes", "schemes must be unique")
    return {
        "proposals": props,
        "scheme": scheme,
        "schemes": schemes,
        "partition": sec.get("partition"),
        "counts": sec.get("counts"),
    }


_AIS_KEYS = {
    "algorithm", "adapter", "weighting", "n_proposals", "samples_per_proposal",
    "iterations", "clip_tau", "family", "dof", "step_scale", "init_cov",
    "init_locations", "init_uniform",
}


def _validate_ais(raw, text, source, dim):
    sec = dict(_require(raw, "ais", text, source, None, dict))
    extra = set(sec) - _AIS_KEYS
    if extra:
        k = sorted(extra)[0]
        _fail(text, source, "ais", k, f"unknown key '{k}' in [ais]")
    if "algorithm" in sec:
        alg = sec.pop("algorithm")
        if alg not in ALGORITHM_CONFIGS:
            _fail(text, source, "ais", "algorithm",
                  f"algorithm must be one of {', '.join(ALGORITHM_CONFIGS)}")
        adapter, weighting, clip = ALGORITHM_CONFIGS[alg]
        sec.setdefault("adapter", adapter)
        sec.setdefault("weighting", weighting)
        if clip is not None:
            sec.setdefault("clip_tau", clip)
        if alg == "amis":
            sec.setdefault("n_proposals", 1)
    for k in ("n_proposals", "samples_per_proposal", "iterations"):
        _require(sec, k, text, source, "ais", int)
    for k in ("adapter", "weighting"):
        _require(sec, k, text, source, "ais", str)
    if ("init_locations" in sec) == ("init_uniform" in sec):
        _fail(text, source, "ais", None, "give exactly one of 'init_locations' or 'init_uniform'")
    if "init_uniform" in sec:
        u = sec["init_uniform"]
        if not (isinstance(u, list) and len(u) == 2 and u[0] < u[1]):
            _fail(text, source, "ais", "init_uniform", "init_uniform must be [low, high]")
        locs = [[0.5 * (u[0] + u[1])] * dim] * sec["n_proposals"]
        key = "init_uniform"
    else:
        locs = sec["init_locations"]
        key = "init_locations"
    try:
        params = [ProposalParams(loc, sec.get("init_cov", 1.0)) for loc in locs]
        if any(p.dim != dim for p in params):
            raise ConfigurationError(f"initial locations must have dimension {dim}")
    except (ISMCError, ValueError, TypeError) as exc:
        _fail(text, source, "ais", key, str(exc))
    try:
        AISConfig(
            sec["n_proposals"], sec["samples_per_proposal"], sec["iterations"],
            sec["adapter"], sec["weighting"], params, sec.get("clip_tau"),
            sec.get("family", "gaussian"), sec.get("dof"), sec.get("step_scale"),
        )
    except (ISMCError, ValueError, TypeError) as exc:
        msg = str(exc)
        guess = next((k for k in sorted(sec, key=len, reverse=True) if k in msg), None)
        _fail(text, source, "ais", guess, msg)
    return sec
