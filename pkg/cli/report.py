"""报告文件（JSON）的组装与写出"""
import hashlib
import json
import math
import sys
from typing import Any, Dict, Optional

from cli.problem_file import ProblemFile
from core.dependency_checker import DependencyChecker
from core.logger import log

SCHEMA_VERSION = "finecone.report/1"
TOOL_NAME = "finecone"
TOOL_VERSION = "1.0.0"


def input_digest(problem: ProblemFile) -> str:
    """规范化问题文件（键排序、紧凑分隔符）的 SHA-256"""
    canonical = json.dumps(problem.to_dict(), sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    return "sha256:" + hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def tool_info() -> Dict[str, Any]:
    return {"name": TOOL_NAME, "version": TOOL_VERSION, "versions": DependencyChecker().runtime_versions()}


def tolerances(settings) -> Dict[str, Any]:
    """报告中数值所附的容差说明"""
    return {
        "exact": "有理数精确比较，零容差",
        "newton_tol": settings.tol,
        "slope_tol": settings.slope_tol,
        "fit_residual_bound": settings.residual_bound,
        "identity_coefficient_bound": 1e-8,
        "det_floor": settings.det_floor,
    }


def new_report(command: str, problem: Optional[ProblemFile] = None) -> Dict[str, Any]:
    report: Dict[str, Any] = {"schema_version": SCHEMA_VERSION, "command": command, "tool": tool_info()}
    if problem is not None:
        report["problem"] = {"name": problem.name, "digest": input_digest(problem)}
    return report


def _clean(value: Any) -> Any:
    """把 NaN/inf 换成 null，numpy 标量换成 Python 数"""
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if hasattr(value, "item") and not isinstance(value, (str, bytes)):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def dumps(report: Dict[str, Any]) -> str:
    return json.dumps(_clean(report), indent=2, ensure_ascii=False, default=str) + "\n"


def write(report: Dict[str, Any], path: Optional[str] = None):
    """写出报告；path 为空或 "-" 时写到标准输出"""
    text = dumps(report)
    if not path or path == "-":
        sys.stdout.write(text)
        return
    with open(path, 'w', encoding='utf-8') as f:
        f.write(text)
    log.info(f"报告已写入 {path}")
