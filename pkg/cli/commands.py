"""命令实现：analyze / verify / trace / example

每个命令返回进程退出码：0 正常，1 非横截，2 输入错误，3 数值失败。
"""
import functools
import os
import sys
from typing import Any, Dict, List, Optional, Tuple

from cli import report as reports
from cli.problem_file import ProblemFile, load
from cli.verify_suite import run_suite
from core.analysis import NotTransversal, arc_prefix, cone_report, degree_signs
from core.config_manager import ConfigManager
from core.continuation import ContinuationSettings, corollary_check, newton_continue, rate_trace
from core.dependency_checker import DependencyChecker
from core.errors import DimensionError, FineConeError, NotTransversalError, ProblemFileError
from core.logger import log, log_exception
from core.resolution import lemma_checks

PROBLEMS_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "problems")
EXAMPLES = ("primary", "secondary", "pitchfork", "regular", "node")


def catch_exceptions(func):
    """装饰器: 捕获命令中的异常，记录日志并换成退出码"""
    @functools.wraps(func)
    def wrapper(*args, **kwargs) -> int:
        try:
            return func(*args, **kwargs)
        except FineConeError as e:
            message = log_exception(e, f"{func.__name__}失败")
            print(message, file=sys.stderr)
            return e.exit_code
        except Exception as e:
            message = log_exception(e, f"{func.__name__}出现未预期的错误")
            print(message, file=sys.stderr)
            return FineConeError.exit_code
    return wrapper


def parse_grid(text: Optional[str], base: ContinuationSettings) -> Tuple[ContinuationSettings, bool]:
    """解析 ``a:b:points``；空串或 None 使用默认网格

    Returns:
        (设置, 是否使用了默认网格)
    """
    if not text:
        return base, True
    parts = text.split(":")
    if len(parts) != 3:
        raise DimensionError(f"网格应写成 eps_max:eps_min:points，收到 {text!r}")
    try:
        eps_max, eps_min, points = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise DimensionError(f"无法解析网格 {text!r}")
    return base.with_grid(eps_max, eps_min, points), False


def problem_settings(problem: ProblemFile, config: Optional[ConfigManager] = None) -> Tuple[ConfigManager, ContinuationSettings]:
    config = (config or ConfigManager()).with_overrides(problem.config_overrides)
    return config, ContinuationSettings.from_config(config)


def _analysis_k_max(problem: ProblemFile, config: ConfigManager, override: Optional[int]) -> int:
    if override is not None:
        return override
    if problem.k_max is not None:
        return problem.k_max
    return int(config.get("analysis.k_max", 16))


def _float_layer(problem: ProblemFile, res, settings: ContinuationSettings, approximation_holds: bool) -> Dict[str, Any]:
    """速率拟合、续算、半锥符号与推论校验；数值失败记录在报告中"""
    out: Dict[str, Any] = {"errors": []}
    try:
        out["trace"] = rate_trace(res, settings.grid(1), settings, with_solutions=False).to_dict()
    except FineConeError as e:
        out["errors"].append({"stage": "trace", "error": log_exception(e, "速率拟合失败")})
    try:
        corollary = corollary_check(res, settings.grid(1), settings)
        out["corollary"] = {
            "accept": corollary.accept,
            "inverse_norm": corollary.inverse_fit.to_dict(),
            "level_set_tangent": None if corollary.tangent_fit is None else corollary.tangent_fit.to_dict(),
        }
    except FineConeError as e:
        out["errors"].append({"stage": "corollary", "error": log_exception(e, "推论校验失败")})
    if not approximation_holds:
        log.warning("未达到 2k 阶逼近，跳过 Newton 续算")
        return out
    grid = [e for half in settings.signed_grids() for e in half]
    try:
        curve = newton_continue(res, grid, settings=settings, strict=False)
        out["newton"] = curve.to_dict()
        if problem.jet.field == "real" and settings.both_signs:
            signs = degree_signs(res, curve.samples(), settings.det_floor)
            out["degree_signs"] = {"positive": signs.positive, "negative": signs.negative,
                                   "constant": signs.constant, "differ": signs.differ}
        samples = []
        for p in problem.p_samples:
            samples.append({"p": p, **newton_continue(res, grid, p=p, settings=settings, strict=False).to_dict()})
        if samples:
            out["newton_p_samples"] = samples
    except FineConeError as e:
        out["errors"].append({"stage": "newton", "error": log_exception(e, "Newton 续算失败")})
    return out


@catch_exceptions
def cmd_analyze(path: str, output: Optional[str] = None, arc: Optional[int] = None,
                exact_only: bool = False, k_max: Optional[int] = None) -> int:
    """分析一个问题文件并写出报告"""
    problem = load(path)
    config, settings = problem_settings(problem)
    report = reports.new_report("analyze", problem)
    report["tolerances"] = reports.tolerances(settings)
    with log.stage("精确分析"):
        found = cone_report(problem.jet, problem.curve, _analysis_k_max(problem, config, k_max))
    if isinstance(found, NotTransversal):
        report["analysis"] = found.to_dict()
        reports.write(report, output)
        print(found.message, file=sys.stderr)
        return NotTransversalError.exit_code
    cone, res = found
    report["analysis"] = cone.to_dict()
    lemmas = lemma_checks(res)
    report["lemmas"] = {name: None if check is None else {"passed": check.passed, "where": check.where}
                        for name, check in lemmas.items()}
    if arc:
        report["arc_prefix"] = arc_prefix(problem.jet, problem.curve, res, arc).to_dict()
    if not exact_only and res.transversal:
        with log.stage("浮点校验"):
            report["float"] = _float_layer(problem, res, settings, cone.approximation.holds)
    reports.write(report, output)
    return 0


@catch_exceptions
def cmd_verify(k_max: Optional[int] = None, count: Optional[int] = None, seed: Optional[int] = None,
               output: Optional[str] = None, corrupt: Optional[str] = None) -> int:
    """在随机实例上运行精确恒等式套件；有失败时返回 3"""
    config = ConfigManager()
    corruption = None
    if corrupt:
        try:
            m, l, value = corrupt.split(",")
            corruption = (int(m), int(l), value.strip())
        except ValueError:
            raise DimensionError(f"--corrupt 应写成 m,l,value，收到 {corrupt!r}")
    result = run_suite(
        count=count if count is not None else int(config.get("verify.count", 100)),
        seed=seed if seed is not None else int(config.get("verify.seed", 0)),
        k_max=k_max if k_max is not None else int(config.get("verify.k_max", 3)),
        corrupt=corruption,
    )
    report = reports.new_report("verify")
    report["verify"] = result.to_dict()
    reports.write(report, output)
    return 0 if result.passed else FineConeError.exit_code


@catch_exceptions
def cmd_trace(path: str, grid: Optional[str] = None, csv_path: Optional[str] = None,
              k_max: Optional[int] = None) -> int:
    """写出 ε 网格上的速率表（CSV），拟合摘要写到标准错误"""
    problem = load(path)
    config, settings = problem_settings(problem)
    settings, defaulted = parse_grid(grid, settings)
    with log.stage("精确分析"):
        found = cone_report(problem.jet, problem.curve, _analysis_k_max(problem, config, k_max))
    if isinstance(found, NotTransversal):
        print(found.message, file=sys.stderr)
        return NotTransversalError.exit_code
    _, res = found
    result = rate_trace(res, settings.grid(1), settings)
    if defaulted:
        result.table.grid_note += " (default)"
    if not csv_path or csv_path == "-":
        result.table.write_csv(sys.stdout)
    else:
        with open(csv_path, 'w', encoding='utf-8', newline='') as f:
            result.table.write_csv(f)
        log.info(f"速率表已写入 {csv_path}")
    for name, fit in result.fits.items():
        slope = "exact-zero" if fit.exact_zero else f"{fit.slope:.4f}"
        print(f"{name}: slope={slope} expected={fit.expected} accept={fit.accept}", file=sys.stderr)
    return 0


def example_path(name: str) -> str:
    if name not in EXAMPLES:
        raise ProblemFileError(f"未知示例 {name!r}，可选 {', '.join(EXAMPLES)}")
    return os.path.join(PROBLEMS_DIR, f"{name}.json")


@catch_exceptions
def cmd_example(name: str, output: Optional[str] = None) -> int:
    """把内置问题写到标准输出或文件"""
    text = load(example_path(name)).dumps()
    if not output or output == "-":
        sys.stdout.write(text)
    else:
        with open(output, 'w', encoding='utf-8') as f:
            f.write(text)
    return 0


def versions() -> List[str]:
    lines = [f"{reports.TOOL_NAME} {reports.TOOL_VERSION}"]
    for name, info in DependencyChecker().check_packages_only().items():
        mark = "" if info["match"] else f"（requirements 钉住 {info['required']}）"
        lines.append(f"{name} {info['installed'] or '未安装'}{mark}")
    return lines
