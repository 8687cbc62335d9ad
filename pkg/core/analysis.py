"""判定层：最小横截阶 k、特征数 χ、逼近阶、分岔判定、Milnor 数与弧前缀"""
from dataclasses import dataclass, field as dc_field
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from sympy import ImmutableMatrix, Matrix

from core.coeffsys import partial_operator
from core.errors import (ApproximationError, DegenerateDeterminantError, IndexRangeError,
                         InconsistentSystemError, InvalidJetError, NotTransversalError)
from core.linalg import hstack
from core.logger import log
from core.multijet import CurveJet, MapJet, compose_curve, is_zero_vector, jacobian, to_exact, to_float_array
from core.resolution import ResolutionBuilder, ResolutionResult

EXACT_ZERO = "exact-zero"


class Verdict(Enum):
    """分岔判定结果"""
    BIFURCATION = "bifurcation"
    INCONCLUSIVE = "inconclusive"
    NOT_APPLICABLE = "not-applicable"


@dataclass(frozen=True)
class NotTransversal:
    """在 k_max 以内没有达到横截；作为返回值而非异常

    Attributes:
        k_max: 搜索上限
        l: 曲线首项指标
        range_sums: 每层 dim(R₁ ⊕ … ⊕ R_i)
        m: 值域维数
    """
    k_max: int
    l: int
    range_sums: Tuple[int, ...]
    m: int

    @property
    def message(self) -> str:
        return f"k ≤ {self.k_max} 内未达到横截，值域累计维数 {list(self.range_sums)}，目标 {self.m}"

    def to_dict(self) -> Dict[str, Any]:
        return {"transversal": False, "k_max": self.k_max, "l": self.l,
                "range_sums": list(self.range_sums), "m": self.m}


def find_minimal_k(jet: MapJet, curve: CurveJet, k_max: int) -> Union[Tuple[int, ResolutionResult], NotTransversal]:
    """寻找最小的 k ≤ k_max 使 R₁ ⊕ … ⊕ R_{k+1} = B̄

    逐层扩展同一个分解链；报告的 k 取 max(l, 填满层号 − 1)。

    Raises:
        IndexRangeError: k_max < l
        CurveDirectionExhausted: 来自分解链
    """
    l = curve.leading_index
    if k_max < l:
        raise IndexRangeError(f"k_max={k_max} 小于首项指标 l={l}")
    builder = ResolutionBuilder(jet, curve)
    fill_level = None
    while builder.depth < k_max + 1:
        record = builder.extend()
        if record.range_sum_dim == jet.m:
            fill_level = record.index
            break
    if fill_level is None:
        result = NotTransversal(k_max=k_max, l=l, range_sums=tuple(lv.range_sum_dim for lv in builder.levels), m=jet.m)
        log.info(result.message)
        return result
    k = max(l, fill_level - 1, 1)
    log.info(f"横截阶 k={k}（第 {fill_level} 层值域填满，l={l}）")
    return k, builder.result(k)


def chi(res: ResolutionResult) -> int:
    """χ = 1·dim N₂^c + … + k·dim N_{k+1}^c"""
    return sum(i * res.levels[i].kernel_complement.dim for i in range(1, res.k + 1))


@dataclass(frozen=True)
class ApproximationReport:
    """沿曲线的逼近阶报告

    Attributes:
        target: 目标阶 2k
        holds: T¹ = … = T^{target} = 0
        first_nonzero: 第一个非零的 T^i（在检查范围内）
        exact_zero: G[z₀(ε)] 恒为零
        vanishing_order: G[z₀(ε)] 的精确消失阶（多项式且曲线有限时）
        missing_tail: 视为零的曲线系数下标
    """
    target: int
    holds: bool
    first_nonzero: Optional[int]
    exact_zero: bool
    vanishing_order: Optional[int]
    missing_tail: Tuple[int, ...] = ()

    @property
    def order(self) -> Union[int, str, None]:
        """'exact-zero' 或 T¹…T^j 全为零的最大 j"""
        if self.exact_zero:
            return EXACT_ZERO
        if self.first_nonzero is not None:
            return self.first_nonzero - 1
        return None

    def to_dict(self) -> Dict[str, Any]:
        return {"target": self.target, "holds": self.holds, "order": self.order,
                "first_nonzero": self.first_nonzero, "vanishing_order": self.vanishing_order,
                "missing_tail": list(self.missing_tail)}


def approximation_order(jet: MapJet, curve: CurveJet, target: int) -> ApproximationReport:
    """精确检查 T¹ = … = T^{target} = 0

    多项式 G 与有限曲线时 G[z₀(ε)] 是 ε 的多项式，额外给出其精确消失阶。
    """
    missing = tuple(range(curve.length + 1, target + 1))
    if missing:
        log.info(f"曲线系数 z̄_{missing[0]}…z̄_{missing[-1]} 缺失，按零处理")
    if jet.order is None:
        horizon = max(target, jet.degree * curve.length)
    else:
        horizon = max(target, jet.order)
    values = compose_curve(jet, curve, horizon) if horizon else []
    first = next((i for i, t in enumerate(values, start=1) if not is_zero_vector(t)), None)
    polynomial = jet.order is None
    exact_zero = polynomial and first is None
    holds = first is None or first > target
    report = ApproximationReport(target=target, holds=holds, first_nonzero=first, exact_zero=exact_zero,
                                 vanishing_order=first if polynomial else None, missing_tail=missing)
    log.info(f"逼近阶检查: 目标 {target}, 结果 {report.order}")
    return report


def verdict_preconditions(res: ResolutionResult, approx: Optional[ApproximationReport], field: str) -> List[str]:
    """分岔判定的结构前提，返回不满足的条目（空表示全部满足）"""
    failed = []
    if field != "real":
        failed.append("数域不是实数")
    if not res.transversal:
        failed.append("分解不横截")
    if res.p_space.dim != 0:
        failed.append(f"P_{res.k + 1} ≠ {{0}}（dim={res.p_space.dim}）")
    if res.top_kernel.dim != 1:
        failed.append(f"dim N_{res.k + 1} = {res.top_kernel.dim} ≠ 1")
    if approx is not None and not approx.holds:
        failed.append(f"未达到 {approx.target} 阶逼近")
    return failed


def bifurcation_verdict(l: int, chi_value: int, field: str = "real",
                        preconditions: Optional[Sequence[str]] = None) -> Verdict:
    """l 与 χ 同为奇数时判定分岔，否则无法判定；前提不满足时不适用"""
    if field != "real" or preconditions:
        return Verdict.NOT_APPLICABLE
    if l % 2 == 1 and chi_value % 2 == 1:
        return Verdict.BIFURCATION
    return Verdict.INCONCLUSIVE


@dataclass(frozen=True)
class DegreeSigns:
    """两个半锥上 det G_{N^c} 的符号

    Attributes:
        positive: ε > 0 半锥的符号（+1/−1）
        negative: ε < 0 半锥的符号
        constant: 每个半锥内没有变号
        samples: (ε, det) 采样
    """
    positive: int
    negative: int
    constant: bool
    samples: Tuple[Tuple[float, float], ...] = ()

    @property
    def differ(self) -> bool:
        return self.positive != self.negative


def nc_determinant(res: ResolutionResult, point) -> float:
    """det(G′[z]|_{N^c})，在精确有理数下求值后转为浮点"""
    basis = hstack([lv.kernel_complement.basis for lv in res.levels if lv.kernel_complement.dim], res.n)
    if basis.cols != res.m:
        raise NotTransversalError(f"dim N^c = {basis.cols} ≠ m = {res.m}")
    exact = [to_exact(float(x)) for x in point]
    restricted = jacobian(res.jet, exact) * basis
    return float(np.linalg.det(to_float_array(restricted)))


def degree_signs(res: ResolutionResult, samples: Sequence[Tuple[float, Sequence[float]]],
                 det_floor: float = 1e-280) -> DegreeSigns:
    """沿解曲线（或 z₀(ε)）的采样点求两个半锥上的行列式符号

    Args:
        res: 横截分解
        samples: (ε, z) 列表，ε 的正负决定所属半锥
        det_floor: 低于该值的行列式不参与定号

    Raises:
        DegenerateDeterminantError: 某个半锥上全部低于 det_floor
    """
    if res.jet.field != "real":
        raise InvalidJetError("行列式符号只对实数域有意义")
    signs = {1: set(), -1: set()}
    table = []
    for eps, point in samples:
        det = nc_determinant(res, point)
        table.append((float(eps), det))
        if abs(det) > det_floor and eps != 0:
            signs[1 if eps > 0 else -1].add(int(np.sign(det)))
    for half, found in signs.items():
        if not found:
            raise DegenerateDeterminantError(f"{'正' if half > 0 else '负'}半锥上行列式全部低于 {det_floor:.1e}")
    constant = all(len(found) == 1 for found in signs.values())
    if not constant:
        log.warning("半锥内行列式变号")
    result = DegreeSigns(positive=min(signs[1]) if constant else 0, negative=min(signs[-1]) if constant else 0,
                         constant=constant, samples=tuple(table))
    log.info(f"半锥行列式符号: ε>0 为 {result.positive:+d}, ε<0 为 {result.negative:+d}")
    return result


def curve_samples(res: ResolutionResult, eps_values: Sequence[float]) -> List[Tuple[float, np.ndarray]]:
    """中心线 z₀(ε) 上的采样点"""
    return [(eps, np.array(res.curve.point(eps, "float"))) for eps in eps_values]


def milnor_from_branches(chis: Sequence[int], ord_g: int) -> int:
    """μ = χ₁ + … + χ_τ − ord(G) + 1

    适用条件（Newton 多边形完全分解、重数为 1）由调用者保证，这里只记录。
    """
    mu = sum(chis) - ord_g + 1
    log.info(f"Milnor 数: χ={list(chis)}, ord(G)={ord_g} → μ={mu}（适用条件由调用者保证）")
    return mu


@dataclass(frozen=True)
class ArcPrefix:
    """形式解的前缀 z̄_{k+1}…z̄_{k+L}

    每个系数分解为 N^c 分量与 N_{k+1} 分量：z̄_{k+j} = P_j + (given_j 的 N_{k+1} 分量 + q_j)。

    Attributes:
        k: 分解阶
        coefficients: z̄_{k+1}…z̄_{k+L}
        nc_parts: 各系数的 N^c 分量 P_j
        kernel_parts: 各系数的 N_{k+1} 分量
        curve: 基曲线 z̄₁…z̄_k 接上前缀后的曲线
    """
    k: int
    coefficients: Tuple[ImmutableMatrix, ...]
    nc_parts: Tuple[ImmutableMatrix, ...]
    kernel_parts: Tuple[ImmutableMatrix, ...]
    curve: CurveJet

    @property
    def length(self) -> int:
        return len(self.coefficients)

    def to_dict(self) -> Dict[str, Any]:
        return {"k": self.k, "L": self.length,
                "coefficients": [[str(x) for x in c] for c in self.coefficients],
                "taylor": [[str(x) for x in c] for c in self.curve.taylor()[self.k:]]}


class _AffineFamily:
    """未知量 z_{k+1}…z_{top} 的仿射族 a + K·t"""

    def __init__(self, jet: MapJet, first: int, top: int, start: List[ImmutableMatrix]):
        self.n = jet.n
        self.first = first
        self.top = top
        self.offset = Matrix.vstack(*start)
        self.directions = Matrix.eye(self.n * (top - first + 1))

    def rows(self, mu: int) -> slice:
        start = (mu - self.first) * self.n
        return slice(start, start + self.n)

    def value(self, mu: int) -> ImmutableMatrix:
        """参数取零时 z_μ 的值"""
        return ImmutableMatrix(self.offset[self.rows(mu), :])

    def block(self, mu: int) -> Matrix:
        return self.directions[self.rows(mu), :]

    def restrict(self, lhs: Matrix, rhs: Matrix, what: str):
        """把族限制到 lhs·t = rhs 上"""
        if lhs.rows == 0:
            return
        if self.directions.cols == 0:
            if any(x != 0 for x in rhs):
                raise InconsistentSystemError(f"{what} 不相容")
            return
        try:
            solution, params = lhs.gauss_jordan_solve(rhs)
        except ValueError as e:
            raise InconsistentSystemError(f"{what} 不相容") from e
        particular = solution.subs({p: 0 for p in params})
        null = lhs.nullspace()
        self.offset = self.offset + self.directions * particular
        self.directions = Matrix.hstack(*[self.directions * v for v in null]) if null else \
            Matrix.zeros(self.directions.rows, 0)


def arc_prefix(jet: MapJet, curve: CurveJet, res: ResolutionResult, length: int,
               q: Optional[Sequence[Sequence]] = None) -> ArcPrefix:
    """逐阶精确求解 T^{k+1} = … = T^{2k+L} = 0，得到 z̄_{k+1}…z̄_{k+L}

    处理 T^N 之前先冻结所有 2μ ≤ N 的 z_μ：其 N_{k+1} 分量取给定曲线系数的分量加 q，
    N^c 分量由此前的方程唯一确定。剩余未知量在 T^N 中只线性出现，系数由
    partial_operator 给出。

    Args:
        jet: 映射射
        curve: 曲线，使用 z̄₁…z̄_k 作为基，其余系数作为初值
        res: 横截分解
        length: 前缀长度 L
        q: N_{k+1} 中的参数 q₁…q_L，默认全零

    Raises:
        NotTransversalError: 分解不横截
        ApproximationError: T¹…T^k 不为零
        InconsistentSystemError: 某阶方程不相容
    """
    if not res.transversal:
        raise NotTransversalError(f"k={res.k} 的分解不横截，不能求弧前缀")
    if length < 1:
        raise IndexRangeError(f"前缀长度 L 必须 ≥ 1，收到 {length}")
    k, n = res.k, jet.n
    top = 2 * k + length
    jet.require_order(top)
    base = curve.bars(k)
    low = compose_curve(jet, CurveJet.from_bar(base), k)
    first_bad = next((i for i, t in enumerate(low, start=1) if not is_zero_vector(t)), None)
    if first_bad is not None:
        raise ApproximationError(first_bad, k)

    params = [ImmutableMatrix(q[j]) if q is not None and j < len(q) else ImmutableMatrix.zeros(n, 1)
              for j in range(length)]
    for j, value in enumerate(params, start=1):
        if not res.top_kernel.contains(value):
            raise IndexRangeError(f"q_{j} 不属于 N_{k + 1}")

    split = res.kernel_sum
    kernel_index = k + 1
    family = _AffineFamily(jet, k + 1, top, curve.bars(top)[k:])
    frozen: Dict[int, ImmutableMatrix] = {}

    def freeze(mu: int):
        j = mu - k
        target = split.coordinates(curve.bar(mu), kernel_index) + split.coordinates(params[j - 1], kernel_index)
        coords_now = split.coordinates(family.value(mu), kernel_index)
        coord_map = split.coordinates(family.block(mu), kernel_index)
        family.restrict(Matrix(coord_map), Matrix(target - coords_now), f"冻结 z̄_{mu}")
        if family.directions.cols and any(x != 0 for x in family.block(mu)):
            log.warning(f"z̄_{mu} 的 N^c 分量尚未被唯一确定，取特解")
            family.restrict(Matrix(family.block(mu)), Matrix.zeros(n, 1), f"固定 z̄_{mu}")
        frozen[mu] = family.value(mu)

    for order in range(k + 1, top + 1):
        for mu in range(k + 1, order // 2 + 1):
            if mu not in frozen:
                freeze(mu)
        zs = base + [family.value(mu) for mu in range(k + 1, top + 1)]
        value = compose_curve(jet, CurveJet.from_bar(zs[:order]), order)[order - 1]
        coef = Matrix.zeros(jet.m, family.directions.cols)
        for mu in range(order // 2 + 1, order + 1):
            if mu <= k:
                continue
            coef += partial_operator(jet, zs, order, mu) * family.block(mu)
        family.restrict(coef, Matrix(-value), f"T^{order}")
        log.debug(f"弧前缀: T^{order} 已处理，剩余自由度 {family.directions.cols}")

    for mu in range(k + 1, k + length + 1):
        if mu not in frozen:
            freeze(mu)

    coefficients = tuple(frozen[mu] for mu in range(k + 1, k + length + 1))
    nc_parts = tuple(ImmutableMatrix(c - split.projector(kernel_index) * c) for c in coefficients)
    kernel_parts = tuple(ImmutableMatrix(split.projector(kernel_index) * c) for c in coefficients)
    prefix_curve = CurveJet.from_bar(list(base) + list(coefficients))
    log.info(f"弧前缀 z̄_{k + 1}…z̄_{k + length} 求解完成")
    return ArcPrefix(k=k, coefficients=coefficients, nc_parts=nc_parts, kernel_parts=kernel_parts,
                     curve=prefix_curve)


@dataclass(frozen=True)
class ConeReport:
    """分析结果汇总"""
    k: int
    transversal: bool
    chi: int
    l: int
    field: str
    nc_dims: Tuple[int, ...]
    kernel_dim: int
    p_dim: int
    range_sums: Tuple[int, ...]
    approximation: ApproximationReport
    verdict: Verdict
    preconditions: Tuple[str, ...] = ()
    avoid_dropped: bool = False
    diagnostics: Tuple[str, ...] = dc_field(default=())

    def to_dict(self) -> Dict[str, Any]:
        return {
            "k": self.k,
            "transversal": self.transversal,
            "chi": self.chi,
            "l": self.l,
            "field": self.field,
            "nc_dims": list(self.nc_dims),
            "nc_dim": sum(self.nc_dims),
            "kernel_dim": self.kernel_dim,
            "p_dim": self.p_dim,
            "range_sums": list(self.range_sums),
            "approximation": self.approximation.to_dict(),
            "approximation_order": self.approximation.order,
            "verdict": self.verdict.value,
            "preconditions_failed": list(self.preconditions),
            "avoid_dropped": self.avoid_dropped,
            "diagnostics": list(self.diagnostics),
        }


def cone_report(jet: MapJet, curve: CurveJet, k_max: int) -> Union[Tuple[ConeReport, ResolutionResult], NotTransversal]:
    """find_minimal_k → approximation_order → 分岔判定"""
    found = find_minimal_k(jet, curve, k_max)
    if isinstance(found, NotTransversal):
        return found
    k, res = found
    approx = approximation_order(jet, curve, 2 * k)
    chi_value = chi(res)
    failed = verdict_preconditions(res, approx, jet.field)
    verdict = bifurcation_verdict(res.l, chi_value, jet.field, failed)
    diagnostics = []
    if res.avoid_dropped:
        diagnostics.append("核为零且值域已满的层放弃了 z̄_l 回避约束")
    if chi_value < k and any(lv.kernel_complement.dim for lv in res.levels[1:]):
        diagnostics.append(f"χ={chi_value} < k={k}")
    report = ConeReport(
        k=k, transversal=res.transversal, chi=chi_value, l=res.l, field=jet.field,
        nc_dims=tuple(lv.kernel_complement.dim for lv in res.levels),
        kernel_dim=res.top_kernel.dim, p_dim=res.p_space.dim,
        range_sums=tuple(lv.range_sum_dim for lv in res.levels),
        approximation=approx, verdict=verdict, preconditions=tuple(failed),
        avoid_dropped=res.avoid_dropped, diagnostics=tuple(diagnostics),
    )
    log.info(f"分析完成: k={k}, χ={chi_value}, l={res.l}, 判定={verdict.value}")
    return report, res


@dataclass(frozen=True)
class PerturbationOutcome:
    """加入高阶单项式前后的比较"""
    same_resolution: bool
    same_k_chi: bool
    same_verdict: bool
    same_approximation: bool


def perturbation_stable(jet: MapJet, curve: CurveJet, extra, k_max: int) -> PerturbationOutcome:
    """比较 G 与 G + extra 的分析结果

    Args:
        extra: 每个分量追加的 (系数, 指数) 列表
    """
    before = cone_report(jet, curve, k_max)
    after = cone_report(jet.add_terms(extra), curve, k_max)
    if isinstance(before, NotTransversal) or isinstance(after, NotTransversal):
        same = isinstance(before, NotTransversal) and isinstance(after, NotTransversal)
        return PerturbationOutcome(same, same, same, same)
    (rep_a, res_a), (rep_b, res_b) = before, after
    return PerturbationOutcome(
        same_resolution=res_a == res_b,
        same_k_chi=(rep_a.k, rep_a.chi) == (rep_b.k, rep_b.chi),
        same_verdict=rep_a.verdict == rep_b.verdict,
        same_approximation=rep_a.approximation.holds == rep_b.approximation.holds,
    )
