"""问题文件（JSON）的读写

格式::

    {
      "name": "pitchfork",
      "field": "real",
      "n": 2, "m": 1,
      "order": null,
      "map": [[{"coefficient": "1", "exponent": [1, 1]}, {"coefficient": "-1", "exponent": [0, 3]}]],
      "curve": [["0", "1"], ["1", "0"]],
      "k_max": 16,
      "options": {"grid": {"eps_max": 0.1, "eps_min": 0.0001, "points": 25}, "p_samples": []}
    }

curve 给出普通 Taylor 系数 c₁, c₂, …（z₀(ε) = Σ c_i ε^i），内部换成 z̄_i = i!·c_i。
系数一律写成有理数字符串，复数域可用 sympy 语法（如 "1/2 + 3*I"）。
"""
import json
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

from core.errors import FineConeError, ProblemFileError
from core.logger import log
from core.multijet import CurveJet, MapJet, to_exact

# options 中允许覆盖的配置段
OPTION_KEYS = ("grid", "newton", "fit", "float", "threads", "p_samples")


@dataclass
class ProblemFile:
    """解析后的问题"""
    name: str
    jet: MapJet
    curve: CurveJet
    k_max: Optional[int] = None
    options: Dict[str, Any] = field(default_factory=dict)
    description: str = ""

    @property
    def config_overrides(self) -> Dict[str, Any]:
        return {key: value for key, value in self.options.items() if key != "p_samples"}

    @property
    def p_samples(self) -> List[List[str]]:
        return list(self.options.get("p_samples", []))

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {"name": self.name}
        if self.description:
            data["description"] = self.description
        data.update({
            "field": self.jet.field,
            "n": self.jet.n,
            "m": self.jet.m,
            "order": self.jet.order,
            "map": [[{"coefficient": coef, "exponent": alpha} for coef, alpha in comp]
                    for comp in self.jet.to_terms()],
            "curve": [[str(x) for x in c] for c in self.curve.taylor()],
        })
        if self.k_max is not None:
            data["k_max"] = self.k_max
        if self.options:
            data["options"] = self.options
        return data

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False) + "\n"


def _require(data: Dict[str, Any], key: str, kind, where: str):
    if key not in data:
        raise ProblemFileError(f"缺少字段 {key!r}", where)
    value = data[key]
    if kind is int and (isinstance(value, bool) or not isinstance(value, int)):
        raise ProblemFileError(f"字段 {key!r} 应为整数", f"{where}.{key}")
    if kind is not int and not isinstance(value, kind):
        raise ProblemFileError(f"字段 {key!r} 类型错误", f"{where}.{key}")
    return value


def _exact(text: Any, where: str):
    if not isinstance(text, (str, int)) or isinstance(text, bool):
        raise ProblemFileError("系数必须是有理数字符串", where)
    try:
        return to_exact(str(text))
    except (FineConeError, ValueError, TypeError, SyntaxError) as e:
        raise ProblemFileError(f"无法解析系数 {text!r}: {e}", where)


def from_dict(data: Any, source: str = "<problem>") -> ProblemFile:
    """由已解析的 JSON 对象构造 ProblemFile

    Raises:
        ProblemFileError: 字段缺失、类型错误或数据不合法，location 为 JSON 路径
    """
    if not isinstance(data, dict):
        raise ProblemFileError("顶层必须是 JSON 对象", source)
    n = _require(data, "n", int, "$")
    m = _require(data, "m", int, "$")
    if n < 1 or m < 1:
        raise ProblemFileError("n 与 m 必须为正整数", "$")
    field_name = data.get("field", "real")
    order = data.get("order")
    if order is not None and (isinstance(order, bool) or not isinstance(order, int)):
        raise ProblemFileError("order 应为整数或 null", "$.order")

    raw_map = _require(data, "map", list, "$")
    if len(raw_map) != m:
        raise ProblemFileError(f"map 有 {len(raw_map)} 个分量，期望 m={m}", "$.map")
    terms = []
    for j, comp in enumerate(raw_map):
        if not isinstance(comp, list):
            raise ProblemFileError("每个分量应为单项式列表", f"$.map[{j}]")
        comp_terms = []
        for t, term in enumerate(comp):
            where = f"$.map[{j}][{t}]"
            if not isinstance(term, dict):
                raise ProblemFileError("单项式应为对象", where)
            coef = _exact(term.get("coefficient"), f"{where}.coefficient")
            exponent = _require(term, "exponent", list, where)
            if len(exponent) != n or any(isinstance(e, bool) or not isinstance(e, int) or e < 0 for e in exponent):
                raise ProblemFileError(f"指数应为 {n} 个非负整数", f"{where}.exponent")
            if sum(exponent) == 0 and coef != 0:
                raise ProblemFileError("G 不能含常数项", where)
            comp_terms.append((coef, exponent))
        terms.append(comp_terms)

    raw_curve = _require(data, "curve", list, "$")
    taylor = []
    for i, coef in enumerate(raw_curve):
        if not isinstance(coef, list) or len(coef) != n:
            raise ProblemFileError(f"曲线系数应为 {n} 维向量", f"$.curve[{i}]")
        taylor.append([_exact(x, f"$.curve[{i}][{r}]") for r, x in enumerate(coef)])
    if not taylor:
        raise ProblemFileError("曲线至少需要一个系数", "$.curve")

    k_max = data.get("k_max")
    if k_max is not None and (isinstance(k_max, bool) or not isinstance(k_max, int) or k_max < 1):
        raise ProblemFileError("k_max 应为正整数", "$.k_max")
    options = data.get("options", {})
    if not isinstance(options, dict):
        raise ProblemFileError("options 应为对象", "$.options")
    unknown = [key for key in options if key not in OPTION_KEYS]
    if unknown:
        raise ProblemFileError(f"未知选项 {unknown}", "$.options")

    try:
        jet = MapJet.from_terms(n, m, terms, order=order, field=field_name)
        curve = CurveJet.from_taylor(taylor)
    except ProblemFileError:
        raise
    except FineConeError as e:
        raise ProblemFileError(str(e), source)
    return ProblemFile(name=str(data.get("name", source)), jet=jet, curve=curve, k_max=k_max,
                       options=options, description=str(data.get("description", "")))


def loads(text: str, source: str = "<problem>") -> ProblemFile:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ProblemFileError(e.msg, f"{source}:{e.lineno}:{e.colno}")
    return from_dict(data, source)


def load(path: str) -> ProblemFile:
    """读取问题文件

    Raises:
        ProblemFileError: 文件不存在、JSON 语法错误（带行列号）或字段不合法
    """
    try:
        with open(path, 'r', encoding='utf-8') as f:
            text = f.read()
    except OSError as e:
        raise ProblemFileError(f"无法读取文件: {e.strerror}", path)
    problem = loads(text, path)
    log.info(f"已读取问题 {problem.name}: n={problem.jet.n}, m={problem.jet.m}, 曲线长度 {problem.curve.length}")
    return problem
