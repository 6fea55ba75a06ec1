"""Flat, typed key-value experiment configuration.

The file format is one `dotted.key = value` pair per line, `#` comments,
no nesting beyond the dotted section prefix:

    problem.name = damped-oscillator
    model.kind = odenet
    method.tableau = euler
    method.h = 0.02
    method.s = 2
    net.widths = 2,64,2
    net.activation = sigmoid
    train.updates = 50000
    train.batch = 2000
    train.lr = exp-decay:1e-2,1e-5
    train.seed = 0
    data.kind = domain
    data.t = 0.04
    data.count = 10000
    data.seed = 1

Values parse to int, float, bare string, or comma list; `data.t = s * h`
consistency is enforced at load time.  Custom tableaus are accepted as
row-major arrays under method.a / method.b / method.order.
"""

from dataclasses import dataclass

from .errors import ConfigError
from .integrators import ButcherTableau, LMM_SCHEMES
from .nn import LrSchedule
from .discovery import TrainConfig
from .problems import problem

__all__ = ["parse_value", "format_value", "load_config", "dump_config",
           "ExperimentConfig"]


def parse_value(text):
    text = text.strip()
    if "," in text:
        return [parse_value(t) for t in text.split(",") if t.strip()]
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            continue
    return text


def format_value(v):
    if isinstance(v, (list, tuple)):
        return ",".join(format_value(x) for x in v)
    return repr(v) if isinstance(v, float) else str(v)


def load_config(path):
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, val = line.split("=", 1)
            out[key.strip()] = parse_value(val)
    return out


def dump_config(path, mapping):
    with open(path, "w") as fh:
        for key in sorted(mapping):
            fh.write(f"{key} = {format_value(mapping[key])}\n")


_MODEL_KINDS = ("odenet", "lmnet", "hnn-symplectic-euler", "hnn-explicit")


@dataclass
class ExperimentConfig:
    """Everything one training run needs, resolved and validated."""

    problem_name: str
    problem_params: dict
    model: str
    method: str                 # tableau name / "symplectic-euler" / lmm name
    h: float
    s: int
    widths: tuple
    activation: str
    schedule: LrSchedule
    updates: int
    batch: int
    seed: int
    data_kind: str
    data_step: float
    data_count: int
    data_seed: int
    data_box: str = ""          # "", "space1", "space2"
    mc_samples: int = 100000
    mesh_per_unit: int = 2000
    imde_k: int = 3
    scale: str = "desk"
    run_id: str = ""
    custom_tableau: ButcherTableau = None

    @classmethod
    def from_mapping(cls, m):
        def need(key):
            if key not in m:
                raise ConfigError(f"missing config key {key!r}")
            return m[key]

        model = need("model.kind")
        if model not in _MODEL_KINDS:
            raise ConfigError(f"model.kind must be one of {_MODEL_KINDS}")
        custom = None
        if model == "lmnet":
            method = str(need("method.lmm"))
            if method not in LMM_SCHEMES:
                raise ConfigError(f"unknown LMM scheme {method!r}")
        else:
            from .integrators import TABLEAUS
            method = str(m.get("method.tableau", "euler"))
            if method == "custom":
                b = [float(x) for x in need("method.b")]
                stages = len(b)
                a_flat = [float(x) for x in need("method.a")]
                if len(a_flat) != stages * stages:
                    raise ConfigError("method.a must be a row-major s*s array")
                a = tuple(tuple(a_flat[i * stages:(i + 1) * stages])
                          for i in range(stages))
                custom = ButcherTableau("custom", a=a, b=tuple(b),
                                        order=int(need("method.order")))
            elif method not in TABLEAUS and method != "symplectic-euler":
                raise ConfigError(f"unknown tableau {method!r}")
        h = float(need("method.h"))
        s = int(m.get("method.s", 1))
        step = float(m.get("data.t", s * h))
        if model in ("odenet", "hnn-explicit") and abs(step - s * h) > 1e-12:
            raise ConfigError(f"data.t = {step} inconsistent with s*h = {s * h}")
        if model in ("lmnet", "hnn-symplectic-euler") and abs(step - h) > 1e-12:
            raise ConfigError("residual models need data.t = method.h")

        widths = tuple(int(w) for w in need("net.widths"))
        lr = m.get("train.lr", "constant:1e-3")
        schedule = _parse_schedule(lr, int(need("train.updates")))

        pparams = {k.split(".", 1)[1]: m[k] for k in m
                   if k.startswith("problem.") and k != "problem.name"}
        return cls(
            problem_name=str(need("problem.name")),
            problem_params=pparams,
            model=model, method=method, h=h, s=s,
            widths=widths, activation=str(need("net.activation")),
            schedule=schedule,
            updates=int(need("train.updates")),
            batch=int(m.get("train.batch", 0)),
            seed=int(m.get("train.seed", 0)),
            data_kind=str(need("data.kind")),
            data_step=step,
            data_count=int(need("data.count")),
            data_seed=int(m.get("data.seed", 0)),
            data_box=str(m.get("data.box", "")),
            mc_samples=int(m.get("eval.mc_samples", 100000)),
            mesh_per_unit=int(m.get("eval.mesh_per_unit", 2000)),
            imde_k=int(m.get("eval.imde_k", 3)),
            scale=str(m.get("scale", "desk")),
            run_id=str(m.get("run_id", "")),
            custom_tableau=custom,
        )

    @classmethod
    def from_file(cls, path):
        return cls.from_mapping(load_config(path))

    @property
    def custom_field_text(self):
        return self.problem_params.get("field", "")

    def to_mapping(self):
        m = {
            "problem.name": self.problem_name,
            "model.kind": self.model,
            "method.h": self.h,
            "method.s": self.s,
            "net.widths": list(self.widths),
            "net.activation": self.activation,
            "train.updates": self.updates,
            "train.batch": self.batch,
            "train.seed": self.seed,
            "train.lr": _format_schedule(self.schedule),
            "data.kind": self.data_kind,
            "data.t": self.data_step,
            "data.count": self.data_count,
            "data.seed": self.data_seed,
            "eval.mc_samples": self.mc_samples,
            "eval.mesh_per_unit": self.mesh_per_unit,
            "eval.imde_k": self.imde_k,
            "scale": self.scale,
        }
        if self.model == "lmnet":
            m["method.lmm"] = self.method
        else:
            m["method.tableau"] = self.method
        if self.data_box:
            m["data.box"] = self.data_box
        if self.run_id:
            m["run_id"] = self.run_id
        for k, v in self.problem_params.items():
            m[f"problem.{k}"] = v
        return m

    def resolve_problem(self):
        """The named benchmark problem, or a copy carrying a custom field
        given in prefix notation under problem.field (components separated
        by ';', parameters bound from the base problem)."""
        params = {k: v for k, v in self.problem_params.items()
                  if k not in ("field", "x0")}
        prob = problem(self.problem_name, **params)
        if not self.custom_field_text:
            return prob
        from dataclasses import replace
        from .fields import parse_field
        text = self.custom_field_text
        if isinstance(text, list):
            text = ";".join(str(t) for t in text)
        fld = parse_field(text, params=prob.field.params, name="custom")
        x0 = self.problem_params.get("x0", list(prob.x0))
        if not isinstance(x0, list):
            x0 = [x0]
        return replace(prob, field=fld, x0=tuple(float(v) for v in x0))

    def train_config(self):
        kw = dict(model=self.model, widths=self.widths,
                  activation=self.activation, schedule=self.schedule,
                  updates=self.updates, batch=self.batch, seed=self.seed,
                  h=self.h, s=self.s)
        if self.model == "lmnet":
            kw["lmm"] = self.method
        else:
            kw["method"] = self.custom_tableau or self.method
        return TrainConfig(**kw)


def _parse_schedule(text, updates):
    if isinstance(text, (int, float)):
        return LrSchedule("constant", float(text), float(text), updates)
    if isinstance(text, list):  # "exp-decay:1e-2,1e-5" parses as a list
        text = ",".join(str(v) for v in text)
    kind, _, rest = str(text).partition(":")
    vals = [float(v) for v in rest.split(",")] if rest else []
    if kind == "constant":
        lr = vals[0] if vals else 1e-3
        return LrSchedule("constant", lr, lr, updates)
    if kind == "exp-decay":
        if len(vals) != 2:
            raise ConfigError("exp-decay needs 'exp-decay:start,end'")
        return LrSchedule("exp-decay", vals[0], vals[1], updates)
    raise ConfigError(f"unknown lr schedule {text!r}")


def _format_schedule(s):
    if s.kind == "constant":
        return f"constant:{s.start:g}"
    return f"{s.kind}:{s.start:g},{s.end:g}"
