"""Config documents, experiment dispatch and report files."""
import csv
import io
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema
import numpy as np
import yaml

from ctcsim import gates
from ctcsim.equiv import (
    deutsch_output,
    equiv_circuit_contracted,
    lift_density_from_joint,
    lift_prepared,
)
from ctcsim.qstate import DensityMatrix, correlation_metrics, trace_distance
from ctcsim.scenarios import (
    EntangledSource,
    PreparedEnsemble,
    Scenario,
    fixed_point_survey,
    ordering_consistency_check,
    run_entangled_experiment,
    run_prepared_experiment,
    semantics_compare,
)

EXPERIMENTS = ("fixed-point", "equiv", "experiment", "compare-semantics", "ordering-check")
DEFAULT_N_LIST = (1, 2, 4, 8, 16, 32, 64)
EQUIV_COLUMNS = ("n", "dist_to_deutsch", "zz", "mutual_info_bits",
                 "p00", "p01", "p10", "p11", "oscillation_flag")
PROB_COLUMNS = ("p00", "p01", "p10", "p11")

SCHEMA = {
    "type": "object",
    "required": ["experiment", "unitary"],
    "additionalProperties": False,
    "properties": {
        "experiment": {"enum": list(EXPERIMENTS)},
        "unitary": {"type": "string", "minLength": 1},
        "system_state": {"type": "string"},
        "ensemble": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["p", "traveler"],
                "additionalProperties": False,
                "properties": {
                    "p": {"type": "number", "minimum": 0, "maximum": 1},
                    "traveler": {"type": "string"},
                    "reference": {"type": "string"},
                },
            },
        },
        "entangled": {"type": "string"},
        "lift": {"enum": ["prepared", "density", "both"]},
        "ordering": {"enum": ["before", "after", "both"]},
        "n_list": {"type": "array", "minItems": 1, "items": {"type": "integer", "minimum": 1}},
        "n_max": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer"},
        "outputs": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"csv": {"type": "string"}, "json": {"type": "string"}},
        },
    },
}


class ConfigError(ValueError):
    """Config failed validation; ``errors`` lists field-level messages."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass
class Result:
    experiment: str
    columns: tuple
    rows: list
    summary: dict = field(default_factory=dict)
    text: str = ""


def load_config(path):
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError:
        try:
            doc = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError([f"{path}: not valid JSON or YAML ({exc})"]) from None
    if not isinstance(doc, dict):
        raise ConfigError([f"{path}: top level must be a mapping"])
    return doc


def validate(config):
    validator = jsonschema.Draft7Validator(SCHEMA)
    errors = []
    for err in sorted(validator.iter_errors(config), key=lambda e: list(e.absolute_path)):
        where = "/".join(str(p) for p in err.absolute_path) or "<root>"
        errors.append(f"{where}: {err.message}")
    if errors:
        raise ConfigError(errors)
    n_list = config.get("n_list")
    if n_list and any(b < a for a, b in zip(n_list, n_list[1:])):
        raise ConfigError(["n_list: must be ascending"])
    sources = [k for k in ("system_state", "ensemble", "entangled") if k in config]
    if len(sources) > 1:
        raise ConfigError([f"<root>: give only one of system_state/ensemble/entangled, got {sources}"])
    if "ensemble" in config:
        total = sum(item["p"] for item in config["ensemble"])
        if abs(total - 1) > 1e-10:
            raise ConfigError([f"ensemble: probabilities sum to {total!r}, expected 1"])


def n_list_from_max(n_max):
    out, n = [], 1
    while n < n_max:
        out.append(n)
        n *= 2
    out.append(n_max)
    return out


def fmt(x):
    """12 significant digits; noise below 1e-12 prints as 0."""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    x = float(x)
    if abs(x) < 1e-12:
        x = 0.0
    s = format(x, ".12g")
    return "0" if s == "-0" else s


def _require(config, key, experiment):
    if key not in config:
        raise ConfigError([f"{key}: required for experiment {experiment!r}"])
    return config[key]


def _parse(fn, text, key):
    try:
        return fn(text)
    except ValueError as exc:
        raise ConfigError([f"{key}: {exc}"]) from None


def _gate(config):
    return _parse(lambda s: gates.build_gate(s, seed=config.get("seed", 0)), config["unitary"], "unitary")


def _state(text, key):
    return _parse(gates.parse_state, text, key)


def _ensemble(config):
    members = []
    for i, item in enumerate(config["ensemble"]):
        trav = _state(item["traveler"], f"ensemble/{i}/traveler")
        ref = _state(item["reference"], f"ensemble/{i}/reference") if "reference" in item else None
        members.append((float(item["p"]), trav, ref))
    return PreparedEnsemble(tuple(members))


def _n_list(config):
    if "n_list" in config:
        return tuple(config["n_list"])
    if "n_max" in config:
        return tuple(n_list_from_max(config["n_max"]))
    return DEFAULT_N_LIST


def _probs(report):
    return dict(zip(PROB_COLUMNS, report.joint_distribution))


def _scenario(config, source):
    try:
        return Scenario(
            interaction=config["unitary"],
            traveler_input=source,
            lift_rule=config.get("lift", "density" if isinstance(source, EntangledSource) else "prepared"),
            ordering=config.get("ordering", "both" if isinstance(source, EntangledSource) else "after"),
            n_list=_n_list(config),
            seed=config.get("seed", 0),
        )
    except ValueError as exc:
        raise ConfigError([f"<root>: {exc}"]) from None


def _run_fixed_point(config):
    state = _require(config, "system_state", "fixed-point")
    _gate(config)
    _state(state, "system_state")
    n = config.get("n_max", max(config.get("n_list", [64])))
    rep = fixed_point_survey(config["unitary"], state, n=n, seed=config.get("seed", 0))
    d = rep.canonical.side
    columns = ["dimension", "unique", "residual", "rank_warning", "cesaro_converged",
               "oscillation_flag", "period"]
    row = {
        "dimension": rep.dimension, "unique": rep.unique, "residual": rep.residual,
        "rank_warning": rep.rank_warning, "cesaro_converged": rep.cesaro_converged,
        "oscillation_flag": rep.oscillation_detected, "period": rep.period or 0,
    }
    for i in range(d):
        for j in range(d):
            for part, val in (("re", rep.canonical.matrix[i, j].real), ("im", rep.canonical.matrix[i, j].imag)):
                columns.append(f"canonical_{i}{j}_{part}")
                row[columns[-1]] = val
    summary = {
        "dimension": rep.dimension,
        "unique": rep.unique,
        "residual": rep.residual,
        "canonical": _matrix_json(rep.canonical.matrix),
        "basis": [_matrix_json(b) for b in rep.basis],
        "oscillation_detected": rep.oscillation_detected,
        "period": rep.period,
        "cesaro_iterations": rep.cesaro_iterations,
        "cesaro_converged": rep.cesaro_converged,
        "rank_warning": rep.rank_warning,
    }
    return Result("fixed-point", tuple(columns), [row], summary, rep.render())


def _equiv_lift(config):
    lift = config.get("lift")
    if lift == "both":
        raise ConfigError(["lift: experiment 'equiv' takes a single rule (prepared or density)"])
    if "entangled" in config:
        if lift == "prepared":
            raise ConfigError(["lift: an unmeasured entangled traveler can only be lifted with 'density'"])
        joint = _state(config["entangled"], "entangled").density()
        return lift_density_from_joint(joint)
    if "ensemble" in config:
        ens = _ensemble(config)
        if lift == "density":
            if not ens.has_reference:
                raise ConfigError(["ensemble: density lifting of an ensemble needs reference labels"])
            return lift_density_from_joint(ens.joint())
        try:
            return lift_prepared(ens.members)
        except ValueError as exc:
            raise ConfigError([f"ensemble: {exc}"]) from None
    state = _require(config, "system_state", "equiv")
    return lift_prepared([(1.0, _state(state, "system_state"), None)])


def _with_reference(out):
    # Reference-free runs report the output against a fixed |0> reference.
    if len(out.subsystem_dims) == 1:
        return DensityMatrix.trusted(np.kron(np.diag([1.0, 0.0]), out.matrix), (2,) + out.subsystem_dims)
    return out


def _run_equiv(config):
    u = _gate(config)
    lifted = _equiv_lift(config)
    try:
        target = deutsch_output(u, lifted)
    except ValueError as exc:
        raise ConfigError([f"unitary: {exc}"]) from None
    rows = []
    for n in _n_list(config):
        res = equiv_circuit_contracted(u, lifted, n)
        rep = _parse(lambda out: correlation_metrics(_with_reference(out)), res.output, "system_state")
        rows.append({"n": n, "dist_to_deutsch": trace_distance(res.output, target), "zz": rep.zz,
                     "mutual_info_bits": rep.mutual_information_bits, **_probs(rep),
                     "oscillation_flag": res.oscillation})
    text = "\n".join(
        f"n={r['n']:<5d} dist={fmt(r['dist_to_deutsch']):<16} zz={fmt(r['zz']):<16} "
        f"mi={fmt(r['mutual_info_bits'])}" for r in rows)
    return Result("equiv", EQUIV_COLUMNS, rows, {"rule": lifted.rule.value}, text)


def _run_experiment(config):
    if "ensemble" in config:
        reports = run_prepared_experiment(_scenario(config, _ensemble(config)))
    elif "entangled" in config:
        try:
            reports = run_entangled_experiment(
                _scenario(config, EntangledSource(_state(config["entangled"], "entangled"))))
        except ValueError as exc:
            raise ConfigError([f"lift: {exc}"]) from None
    else:
        raise ConfigError(["<root>: experiment 'experiment' needs 'ensemble' or 'entangled'"])
    columns = ("n", "lift", "ordering", "zz", "mutual_info_bits") + PROB_COLUMNS
    rows = []
    for rep in reports:
        prov = rep.provenance
        rows.append({"n": prov["n"], "lift": prov["lift"], "ordering": prov.get("ordering", "-"),
                     "zz": rep.zz, "mutual_info_bits": rep.mutual_information_bits, **_probs(rep)})
    text = "\n".join(
        f"n={r['n']:<5d} lift={r['lift']:<9} ordering={r['ordering']:<7} zz={fmt(r['zz']):<16} "
        f"mi={fmt(r['mutual_info_bits'])}" for r in rows)
    notes = sorted({rep.provenance["note"] for rep in reports if "note" in rep.provenance})
    return Result("experiment", columns, rows, {"notes": notes}, text)


def _run_compare(config):
    ens = _ensemble({"ensemble": _require(config, "ensemble", "compare-semantics")})
    if not ens.has_reference:
        raise ConfigError(["ensemble: every member needs a reference label"])
    cmp = semantics_compare(_gate(config), ens)
    columns = ("branch", "zz", "mutual_info_bits") + PROB_COLUMNS
    rows = [{"branch": name, "zz": rep.zz, "mutual_info_bits": rep.mutual_information_bits, **_probs(rep)}
            for name, rep in (("per-component", cmp.per_component), ("whole-ensemble", cmp.whole_ensemble))]
    text = "\n".join(f"{r['branch']:<15} zz={fmt(r['zz']):<16} mi={fmt(r['mutual_info_bits'])}" for r in rows)
    return Result("compare-semantics", columns, rows, {}, text)


def _run_ordering(config):
    src = EntangledSource(_state(_require(config, "entangled", "ordering-check"), "entangled"))
    _gate(config)
    base = _scenario(config, src)
    rows = []
    for n in base.n_list:
        sc = Scenario(base.interaction, src, "density", "both", (n,), base.seed)
        gap, contrast = ordering_consistency_check(sc)
        rows.append({"n": n, "max_discrepancy": gap, "contrast_discrepancy": contrast})
    summary = {"max_discrepancy": max(r["max_discrepancy"] for r in rows),
               "contrast_discrepancy": max(r["contrast_discrepancy"] for r in rows)}
    text = (f"max_discrepancy      {fmt(summary['max_discrepancy'])}  (density rule, measure before vs after)\n"
            f"contrast_discrepancy {fmt(summary['contrast_discrepancy'])}  (shot-by-shot lift of measured labels)")
    return Result("ordering-check", ("n", "max_discrepancy", "contrast_discrepancy"), rows, summary, text)


_DISPATCH = {
    "fixed-point": _run_fixed_point,
    "equiv": _run_equiv,
    "experiment": _run_experiment,
    "compare-semantics": _run_compare,
    "ordering-check": _run_ordering,
}


def execute(config) -> Result:
    """Validate ``config`` and run its experiment. Raises :class:`ConfigError`."""
    validate(config)
    return _DISPATCH[config["experiment"]](config)


def _matrix_json(m):
    m = np.asarray(m)
    return [[[float(fmt(z.real)), float(fmt(z.imag))] for z in row] for row in m]


def render_csv(result: Result):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(result.columns)
    for row in result.rows:
        writer.writerow([fmt(row[c]) for c in result.columns])
    return buf.getvalue()


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (bool, np.bool_)) or x is None or isinstance(x, str):
        return bool(x) if isinstance(x, np.bool_) else x
    if isinstance(x, (int, np.integer)):
        return int(x)
    return float(fmt(x))


def render_json(result: Result, config):
    doc = {
        "experiment": result.experiment,
        "config": config,
        "columns": list(result.columns),
        "rows": [{c: row[c] for c in result.columns} for row in result.rows],
        "summary": result.summary,
    }
    return json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n"


def write_reports(result: Result, config):
    """Write the CSV/JSON files named in ``config['outputs']``; return paths."""
    written = []
    outputs = config.get("outputs", {})
    for kind, render in (("csv", lambda: render_csv(result)), ("json", lambda: render_json(result, config))):
        if outputs.get(kind):
            path = Path(outputs[kind])
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(render())
            written.append(path)
    return written


def run_config(config, out=None, err=None):
    """Run a config document end to end.

    Returns ``(exit_status, written_paths)``; status 0 on success, 2 on a
    validation failure, 1 when a report file cannot be written.
    """
    out = out or sys.stdout
    err = err or sys.stderr
    try:
        result = execute(config)
    except ConfigError as exc:
        for msg in exc.errors:
            print(f"config error: {msg}", file=err)
        return 2, []
    try:
        written = write_reports(result, config)
    except OSError as exc:
        print(f"cannot write report: {exc}", file=err)
        return 1, []
    print(result.text, file=out)
    for path in written:
        print(f"wrote {path}", file=out)
    return 0, written
