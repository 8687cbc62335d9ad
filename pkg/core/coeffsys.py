"""待定系数方程组的显式算子

T^N 中 z_μ（μ > N/2）只线性出现，其系数算子统一由 partial_operator 给出：

    ∂T^N/∂z_μ = (1/μ!) Σ N!/Π m_τ! · G₀^{|m|+1}[Π (z_τ/τ!)^{m_τ}, ·]，  Σ τ m_τ = N − μ

W 算子、Δ^k 的各块以及 Hurwitz 公式中的偏导都是它在不同指标范围下的特例。
所有结果都可以与 multijet.compose_curve 的系数逐项对照。
"""
from dataclasses import dataclass
from math import factorial
from typing import Iterator, List, Optional, Sequence, Tuple

from sympy import ImmutableMatrix, Matrix, Rational

from core.errors import IndexRangeError, JetOrderError
from core.linalg import Blocks, block_to_matrix
from core.multijet import CurveJet, MapJet, compose_curve, is_zero_vector
from core.schemes import D_matrix, d_coeff, gamma_diag, hurwitz_gamma


def weighted_multisets(total: int, max_index: int) -> Iterator[Tuple[int, ...]]:
    """字典序枚举 (m₁, …, m_max)，满足 1·m₁ + … + max·m_max = total"""

    def rec(index: int, remaining: int) -> Iterator[Tuple[int, ...]]:
        if index == 0:
            if remaining == 0:
                yield ()
            return
        for count in range(remaining // index, -1, -1):
            for rest in rec(index - 1, remaining - count * index):
                yield rest + (count,)

    if total < 0 or max_index < 0:
        return
    yield from rec(max_index, total)


def _groups(zs: Sequence[Matrix], multiset: Tuple[int, ...]) -> Optional[List[Tuple[Matrix, int]]]:
    """把 Π (z_τ/τ!)^{m_τ} 变成 (向量, 重数) 列表；含零向量时返回 None"""
    groups = []
    for tau, count in enumerate(multiset, start=1):
        if count == 0:
            continue
        if tau > len(zs) or is_zero_vector(zs[tau - 1]):
            return None
        groups.append((zs[tau - 1] / factorial(tau), count))
    return groups


def _multiset_weight(total: int, multiset: Tuple[int, ...]) -> int:
    weight = factorial(total)
    for count in multiset:
        weight //= factorial(count)
    return weight


def partial_operator(jet: MapJet, zs: Sequence[Matrix], total: int, mu: int,
                     max_index: Optional[int] = None) -> ImmutableMatrix:
    """T^{total} 对 z_μ 的线性响应（m×n 矩阵）

    Args:
        jet: 映射射
        zs: [z₁, z₂, …]，缺失的按零处理
        total: 阶 N
        mu: 自由槽位对应的下标 μ
        max_index: 其余因子 z_τ 允许的最大下标，默认 N − μ
    """
    rest = total - mu
    if rest < 0:
        raise IndexRangeError(f"μ={mu} 超过阶 {total}")
    if max_index is None:
        max_index = rest
    jet.require_order(rest + 1 if rest else 1)
    columns = [Matrix.zeros(jet.m, 1) for _ in range(jet.n)]
    basis = [Matrix.eye(jet.n)[:, j] for j in range(jet.n)]
    for multiset in weighted_multisets(rest, max_index):
        groups = _groups(zs, multiset)
        if groups is None:
            continue
        beta = sum(multiset) + 1
        form = jet.form(beta)
        if form.is_zero:
            continue
        scale = Rational(_multiset_weight(total, multiset), factorial(mu))
        for j, e in enumerate(basis):
            columns[j] += form.apply_grouped(groups + [(e, 1)]) * scale
    return ImmutableMatrix(Matrix.hstack(*columns))


def constrained_value(jet: MapJet, zs: Sequence[Matrix], total: int, max_index: int) -> ImmutableMatrix:
    """T^{total} 中只含 z₁…z_max 的部分 Σ N!/Π n_τ! · G₀^{|n|}[Π (z_τ/τ!)^{n_τ}]"""
    acc = Matrix.zeros(jet.m, 1)
    for multiset in weighted_multisets(total, max_index):
        groups = _groups(zs, multiset)
        if groups is None:
            continue
        beta = sum(multiset)
        jet.require_order(beta)
        form = jet.form(beta)
        if form.is_zero:
            continue
        acc += form.apply_grouped(groups) * _multiset_weight(total, multiset)
    return ImmutableMatrix(acc)


def _band(total: int) -> Tuple[int, int]:
    """W^{total}_μ 的合法 μ 范围 [⌈total/2⌉, total]"""
    return (total + 1) // 2, total


def w_operator(jet: MapJet, zs: Sequence[Matrix], total: int, mu: int) -> ImmutableMatrix:
    """W_μ^{total}

    total = 2k+1 时 μ ∈ [k+1, 2k+1]，其余因子取 z₁…z_k；
    total = 2k 时 μ ∈ [k, 2k]，其余因子只取 z₁…z_{k−1}（z_k 的二次项单列）。
    """
    low, high = _band(total)
    if not low <= mu <= high:
        raise IndexRangeError(f"W^{total}_{mu}: μ 必须在 [{low}, {high}] 内")
    jet.require_order(total)
    return partial_operator(jet, zs, total, mu, max_index=(total - 1) // 2)


def w_row(jet: MapJet, zs: Sequence[Matrix], total: int, mu_high: int, mu_low: int) -> List[ImmutableMatrix]:
    """[W_{mu_high}^{total}, …, W_{mu_low}^{total}]"""
    return [w_operator(jet, zs, total, mu) for mu in range(mu_high, mu_low - 1, -1)]


def r_inhomogeneity(jet: MapJet, zs: Sequence[Matrix], total: int) -> ImmutableMatrix:
    """R^{total}：只含 z₁…z_{⌊(total−1)/2⌋} 的部分

    奇数阶 2k+1 依赖 z₁…z_k，偶数阶 2k 依赖 z₁…z_{k−1}。
    """
    jet.require_order(total)
    return constrained_value(jet, zs, total, (total - 1) // 2)


@dataclass(frozen=True)
class CoeffSystem:
    """k 阶待定系数方程组

    Attributes:
        k: 阶
        delta: Δ^k 的 k×k 分块（行 r ↔ T^{2k+1−r}，列 c ↔ z_{2k+1−c}）
        inhomogeneity: I^k，按 (T^{2k}, …, T^{k+1}) 顺序
        w_odd: [W_{2k+1}^{2k+1}, …, W_{k+1}^{2k+1}]
        r_odd: R^{2k+1}
    """
    k: int
    delta: Blocks
    inhomogeneity: List[ImmutableMatrix]
    w_odd: List[ImmutableMatrix]
    r_odd: ImmutableMatrix

    def delta_matrix(self) -> ImmutableMatrix:
        return block_to_matrix(self.delta)

    def apply(self, unknowns: Sequence[Matrix]) -> List[ImmutableMatrix]:
        """Δ^k (z_{2k}, …, z_{k+1})ᵀ + I^k"""
        out = []
        for r, row in enumerate(self.delta):
            acc = Matrix(self.inhomogeneity[r])
            for blk, z in zip(row, unknowns):
                acc += blk * z
            out.append(ImmutableMatrix(acc))
        return out


def delta_blocks(jet: MapJet, zs: Sequence[Matrix], k: int) -> Blocks:
    """Δ^k(z_{k−1}, …, z₁)，块上三角、对角块为 G₀¹"""
    blocks = [[ImmutableMatrix.zeros(jet.m, jet.n) for _ in range(k)] for _ in range(k)]
    for r in range(k):
        for c in range(r, k):
            blocks[r][c] = partial_operator(jet, zs, 2 * k - r, 2 * k - c)
    return blocks


def delta_system(jet: MapJet, zs: Sequence[Matrix], k: int) -> CoeffSystem:
    """组装 Δ^k、I^k、W^{2k+1}、R^{2k+1}

    满足 (T^{2k}, …, T^{k+1})ᵀ = Δ^k (z_{2k}, …, z_{k+1})ᵀ + I^k(z_k, …, z₁)。
    """
    if k < 1:
        raise IndexRangeError(f"k 必须 ≥ 1，收到 {k}")
    jet.require_order(2 * k)
    base = list(zs[:k])
    inhomogeneity = [constrained_value(jet, base, 2 * k - r, k) for r in range(k)]
    # 截断射只给到 2k 阶时不组装奇数阶部分
    has_odd = jet.order is None or jet.order >= 2 * k + 1
    w_odd, r_odd = odd_system(jet, base, k) if has_odd else ([], ImmutableMatrix.zeros(jet.m, 1))
    return CoeffSystem(k=k, delta=delta_blocks(jet, base, k), inhomogeneity=inhomogeneity,
                       w_odd=w_odd, r_odd=r_odd)


@dataclass(frozen=True)
class IdentityCheck:
    """恒等式校验结果，可直接当布尔值使用"""
    passed: bool
    deviation: Rational = Rational(0)
    where: str = ""

    def __bool__(self) -> bool:
        return self.passed


def _max_abs(vectors: Sequence[Matrix]) -> Rational:
    return max((abs(x) for v in vectors for x in v), default=Rational(0))


def gamma_identity_check(jet: MapJet, zs: Sequence[Matrix], k: int) -> IdentityCheck:
    """(T^k, …, T¹)ᵀ = (Γ^k)^{-1}·Δ^k(z_{k−1}…z₁)·Γ^k·(z_k, …, z₁)ᵀ 是否精确成立"""
    base = list(zs[:k])
    oracle = compose_curve(jet, CurveJet.from_bar(base), k) if any(not is_zero_vector(z) for z in base) else \
        [ImmutableMatrix.zeros(jet.m, 1) for _ in range(k)]
    lhs = list(reversed(oracle))
    gamma = gamma_diag(k)
    blocks = delta_blocks(jet, base, k)
    scaled = [base[k - 1 - c] * gamma[c] for c in range(k)]
    rhs = []
    for r in range(k):
        acc = Matrix.zeros(jet.m, 1)
        for c in range(k):
            acc += blocks[r][c] * scaled[c]
        rhs.append(ImmutableMatrix(acc / gamma[r]))
    diff = [a - b for a, b in zip(lhs, rhs)]
    deviation = _max_abs(diff)
    return IdentityCheck(deviation == 0, deviation, "" if deviation == 0 else "Γ 恒等式")


def hurwitz_high_order(jet: MapJet, curve: CurveJet, k: int, l: int) -> ImmutableMatrix:
    """用 Hurwitz 型公式计算 T^{2k+1+l}

    T^{2k+1+l} = Σ_{t=0}^{k} γ_t^{2k+l}·T^{2t}_{z_t}·z_{2k+1+l−t} + R_{2k+1+l}(z_{k+l}, …, z₁)，
    其中 T^0_{z_0} = G₀¹，T^{2t}_{z_t} 为 T^{2t} 对 z_t 的偏导。
    """
    total = 2 * k + 1 + l
    if k < 0 or l < 0:
        raise IndexRangeError(f"Hurwitz 公式要求 k, l ≥ 0，收到 k={k}, l={l}")
    jet.require_order(total)
    zs = curve.bars(total)
    acc = Matrix.zeros(jet.m, 1)
    for t in range(0, k + 1):
        if t == 0:
            derivative = jet.linear_part()
        else:
            derivative = partial_operator(jet, zs, 2 * t, t, max_index=t)
        acc += derivative * zs[total - t - 1] * hurwitz_gamma(t, k, l)
    acc += constrained_value(jet, zs, total, k + l)
    return ImmutableMatrix(acc)


def hurwitz_check(jet: MapJet, curve: CurveJet, k: int, l: int) -> IdentityCheck:
    """Hurwitz 公式与预言机的双向比较"""
    total = 2 * k + 1 + l
    formula = hurwitz_high_order(jet, curve, k, l)
    oracle = compose_curve(jet, curve, total)[total - 1]
    deviation = _max_abs([formula - oracle])
    return IdentityCheck(deviation == 0, deviation, "" if deviation == 0 else f"T^{total}")


def ladder_checks(jet: MapJet, zs: Sequence[Matrix], m: int) -> IdentityCheck:
    """W 阶梯恒等式

    [W_{2m+1}^{2m+1}, …, W_{m+2}^{2m+1}] = [W_{2m}^{2m}, …, W_{m+1}^{2m}]·D^{2m}，
    W_{m+1}^{2m+1} = [W_m^{2m} + (2m)!/(m!)²·G₀² z_m]·d_{2m,m+1}，
    [W_{2m}^{2m}, …, W_{m+1}^{2m}] = [W_{2m−1}^{2m−1}, …, W_m^{2m−1}]·D^{2m−1}。
    """
    if m < 1:
        raise IndexRangeError(f"阶梯恒等式要求 m ≥ 1，收到 {m}")
    odd = w_row(jet, zs, 2 * m + 1, 2 * m + 1, m + 2)
    even = w_row(jet, zs, 2 * m, 2 * m, m + 1)
    d_even = D_matrix(2 * m)
    for idx, (lhs, rhs) in enumerate(zip(odd, even)):
        if lhs != rhs * d_even[idx]:
            return IdentityCheck(False, _max_abs([lhs - rhs * d_even[idx]]), f"阶梯(2m+1) 第 {idx + 1} 块")

    lhs = w_operator(jet, zs, 2 * m + 1, m + 1)
    quad = Matrix.zeros(jet.m, jet.n)
    if m <= len(zs) and not is_zero_vector(zs[m - 1]):
        quad = partial_operator(jet, [ImmutableMatrix.zeros(jet.n, 1)] * (m - 1) + [zs[m - 1]], 2 * m, m, max_index=m)
    rhs = (w_operator(jet, zs, 2 * m, m) + quad) * d_coeff(2 * m, m + 1)
    if lhs != rhs:
        return IdentityCheck(False, _max_abs([lhs - rhs]), "阶梯中间块 W_{m+1}^{2m+1}")

    lower = w_row(jet, zs, 2 * m - 1, 2 * m - 1, m)
    d_odd = D_matrix(2 * m - 1)
    for idx, (lhs_blk, rhs_blk) in enumerate(zip(even, lower)):
        if lhs_blk != rhs_blk * d_odd[idx]:
            return IdentityCheck(False, _max_abs([lhs_blk - rhs_blk * d_odd[idx]]), f"阶梯(2m) 第 {idx + 1} 块")
    return IdentityCheck(True)


def odd_system(jet: MapJet, zs: Sequence[Matrix], k: int) -> Tuple[List[ImmutableMatrix], ImmutableMatrix]:
    """奇数阶方程 T^{2k+1} = W^{2k+1}(z_{2k+1}, …, z_{k+1}) + R^{2k+1} 的两部分"""
    return w_row(jet, zs, 2 * k + 1, 2 * k + 1, k + 1), r_inhomogeneity(jet, zs, 2 * k + 1)
