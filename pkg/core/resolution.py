"""精细分解：子空间链、S 算子、E/α/A/M 矩阵以及锥的结构算子

    B  = N₁^c ⊕ N₂^c ⊕ … ⊕ N_{k+1}^c ⊕ N_{k+1}
    B̄  = R₁ ⊕ R₂ ⊕ … ⊕ R_{k+1} ⊕ R_{k+1}^c

S̄₁ = G₀¹，S̄₂ = 2G₀² z̄₁，之后
S̄_{j+1} = [W_{2j−1}^{2j} … W_j^{2j}]·(ᾱ^{2j−1}; M^{2j−1}Ā^{2j−1}) + (2j)!/(j!)²·G₀² z̄_j，
S_i = P_{R_{i−1}^c} S̄_i 限制在 N_{i−1} 上。全部计算使用精确有理数。
"""
from dataclasses import dataclass, field as dc_field
from math import factorial
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from sympy import ImmutableMatrix, Matrix, Rational

from core.coeffsys import IdentityCheck, delta_blocks, partial_operator
from core.errors import CurveDirectionExhausted, IndexRangeError
from core.linalg import (Blocks, DirectSum, Subspace, block_conjugate, block_diag_subspaces,
                         block_equal, block_matmul, block_to_matrix, complement, hstack,
                         image, kernel)
from core.logger import log
from core.multijet import EXACT, FLOAT, CurveJet, MapJet, compose_curve, is_zero_vector, to_exact, to_float_array
from core.schemes import C_matrix, d_coeff


@dataclass(frozen=True)
class LevelRecord:
    """第 i 层的分解数据

    Attributes:
        index: 层号 i
        sbar: S̄_i（m×n）
        s_op: S_i = P_{R_{i−1}^c}·S̄_i，只在 N_{i−1} 上有意义
        kernel: N_i
        kernel_complement: N_i^c（在 N_{i−1} 中）
        range: R_i = S_i(N_i^c)，基向量为 S_i 作用在 N_i^c 基上的像
        range_complement: R_i^c（在 R_{i−1}^c 中）
        range_sum_dim: dim(R₁ ⊕ … ⊕ R_i)
        avoid_dropped: 核为零且值域已满，放弃了 z̄_l ∉ N_i^c 的约束
    """
    index: int
    sbar: ImmutableMatrix
    s_op: ImmutableMatrix
    kernel: Subspace
    kernel_complement: Subspace
    range: Subspace
    range_complement: Subspace
    range_sum_dim: int
    avoid_dropped: bool = False

    def dims(self) -> Dict[str, int]:
        return {
            "level": self.index,
            "N": self.kernel.dim,
            "Nc": self.kernel_complement.dim,
            "R": self.range.dim,
            "Rc": self.range_complement.dim,
            "range_sum": self.range_sum_dim,
        }


def _quadratic_operator(jet: MapJet, z: Matrix) -> ImmutableMatrix:
    """v ↦ G₀²[z, v]"""
    if is_zero_vector(z):
        return ImmutableMatrix.zeros(jet.m, jet.n)
    form = jet.form(2)
    columns = [form.apply_grouped([(z, 1), (Matrix.eye(jet.n)[:, j], 1)]) for j in range(jet.n)]
    return ImmutableMatrix(Matrix.hstack(*columns))


class ResolutionBuilder:
    """逐层构造分解链

    每一层只依赖前面的层，find_minimal_k 借此逐层试探而不必重算。
    """

    def __init__(self, jet: MapJet, curve: CurveJet):
        self.jet = jet
        self.curve = curve
        self.l = curve.leading_index
        self.levels: List[LevelRecord] = []
        self._e_columns: Dict[int, List[ImmutableMatrix]] = {}
        self._m_chain: Dict[int, Blocks] = {}
        self._range_sums: Dict[int, DirectSum] = {}
        self._kernel_sums: Dict[int, DirectSum] = {}

    @property
    def depth(self) -> int:
        return len(self.levels)

    # ------------------------------------------------------------------
    # 直和分解与 S_i^{-1} P_{R_i}
    # ------------------------------------------------------------------

    def range_sum(self, depth: int) -> DirectSum:
        """B̄ = R₁ ⊕ … ⊕ R_depth ⊕ R_depth^c"""
        if depth not in self._range_sums:
            if depth == 0:
                parts = (Subspace.whole(self.jet.m),)
            else:
                parts = tuple(lv.range for lv in self.levels[:depth]) + (self.levels[depth - 1].range_complement,)
            self._range_sums[depth] = DirectSum(self.jet.m, parts)
        return self._range_sums[depth]

    def kernel_sum(self, depth: int) -> DirectSum:
        """B = N₁^c ⊕ … ⊕ N_depth^c ⊕ N_depth"""
        if depth not in self._kernel_sums:
            if depth == 0:
                parts = (Subspace.whole(self.jet.n),)
            else:
                parts = tuple(lv.kernel_complement for lv in self.levels[:depth]) + (self.levels[depth - 1].kernel,)
            self._kernel_sums[depth] = DirectSum(self.jet.n, parts)
        return self._kernel_sums[depth]

    def s_inverse_project(self, a: int, values: Matrix) -> ImmutableMatrix:
        """S_a^{-1} P_{R_a} 作用在 values 的每一列上（a 从 1 开始）

        R_a 与其余部分的直和在后续层中保持不变，所以用当前深度的分解即可。
        """
        level = self.levels[a - 1]
        if level.kernel_complement.dim == 0:
            return ImmutableMatrix.zeros(self.jet.n, values.cols)
        coords = self.range_sum(self.depth).coordinates(values, a - 1)
        return ImmutableMatrix(level.kernel_complement.basis * coords)

    # ------------------------------------------------------------------
    # E、α/A、M
    # ------------------------------------------------------------------

    def e_column(self, b: int) -> List[ImmutableMatrix]:
        """E 的第 b 列（b 从 1 开始），行 1…b

        E_{b,b} = I，E_{a,b} = −S_a^{-1} P_{R_a} Σ_{v=a+1}^{b} S̄_v E_{v,b}。
        """
        if b > self.depth:
            raise IndexRangeError(f"E 的第 {b} 列需要前 {b} 层，当前只有 {self.depth} 层")
        if b not in self._e_columns:
            n = self.jet.n
            column: List[Optional[ImmutableMatrix]] = [None] * b
            column[b - 1] = ImmutableMatrix.eye(n)
            for a in range(b - 1, 0, -1):
                acc = Matrix.zeros(self.jet.m, n)
                for v in range(a + 1, b + 1):
                    acc += self.levels[v - 1].sbar * column[v - 1]
                column[a - 1] = ImmutableMatrix(-self.s_inverse_project(a, acc))
            self._e_columns[b] = column
        return self._e_columns[b]

    def e_matrix(self, j: int) -> Blocks:
        """E^j（j×j 块上三角）"""
        n = self.jet.n
        blocks = [[ImmutableMatrix.zeros(n, n) for _ in range(j)] for _ in range(j)]
        for b in range(1, j + 1):
            for a, blk in enumerate(self.e_column(b)):
                blocks[a][b - 1] = blk
        return blocks

    def conjugated(self, s: int) -> Blocks:
        """(C^s)^{-1}·E^j·C^s，j = ⌈s/2⌉"""
        j = (s + 1) // 2
        return block_conjugate(self.e_matrix(j), C_matrix(s))

    def m_matrix(self, j: int) -> Blocks:
        """M^{2j+1}（j×j 块）"""
        if j < 1:
            raise IndexRangeError(f"M^{{2j+1}} 要求 j ≥ 1，收到 {j}")
        if j not in self._m_chain:
            n = self.jet.n
            if j == 1:
                self._m_chain[j] = [[ImmutableMatrix.eye(n)]]
            else:
                even = self.conjugated(2 * j)
                odd = self.conjugated(2 * j - 1)
                previous = self.m_matrix(j - 1)
                a_odd = [row[:j - 1] for row in odd[1:]]
                lower_left = [odd[0][:j - 1]] + block_matmul(previous, a_odd)
                right = even[1:]
                product = block_matmul(lower_left, right)
                # 去掉 (j+1)×j 矩阵的最后一行
                self._m_chain[j] = [list(even[0])] + product[:j - 1]
        return self._m_chain[j]

    # ------------------------------------------------------------------
    # 逐层扩展
    # ------------------------------------------------------------------

    def _next_sbar(self, i: int) -> ImmutableMatrix:
        jet = self.jet
        if i == 1:
            return jet.linear_part()
        kk = i - 1
        jet.require_order(i)
        zs = self.curve.bars(kk)
        quad = _quadratic_operator(jet, zs[kk - 1]) * Rational(factorial(2 * kk), factorial(kk) ** 2)
        if kk == 1:
            return ImmutableMatrix(quad)
        odd = self.conjugated(2 * kk - 1)
        abar = odd[0][kk - 1]
        a_bar_column = [[row[kk - 1]] for row in odd[1:]]
        stacked = [abar] + [blk[0] for blk in block_matmul(self.m_matrix(kk - 1), a_bar_column)]
        acc = Matrix(quad)
        for t, mu in enumerate(range(2 * kk - 1, kk - 1, -1)):
            acc += partial_operator(jet, zs, 2 * kk, mu, max_index=kk - 1) * stacked[t]
        return ImmutableMatrix(acc)

    def _avoid_vector(self) -> ImmutableMatrix:
        """z̄_l 在 N_{depth} 上的分量（沿 N₁^c … N_depth^c 投影）"""
        z_l = self.curve.bar(self.l)
        if self.depth == 0:
            return z_l
        return ImmutableMatrix(self.kernel_sum(self.depth).projector(self.depth) * z_l)

    def extend(self) -> LevelRecord:
        """构造下一层 i = depth + 1"""
        i = self.depth + 1
        jet = self.jet
        sbar = self._next_sbar(i)
        previous_sum = self.range_sum(self.depth)
        s_op = ImmutableMatrix(previous_sum.projector(self.depth) * sbar)

        within = self.levels[-1].kernel if self.levels else Subspace.whole(jet.n)
        outer_range = self.levels[-1].range_complement if self.levels else Subspace.whole(jet.m)
        filled = self.levels[-1].range_sum_dim if self.levels else 0

        ker = kernel(s_op, within)
        avoid = self._avoid_vector()
        dropped = False
        try:
            nc = complement(ker, within, avoid=avoid, level=i)
        except CurveDirectionExhausted:
            nc = complement(ker, within)
            if filled + image(s_op, nc).dim != jet.m:
                raise
            dropped = True
            log.warning(f"第 {i} 层核为零且值域已满，放弃 z̄_l 的回避约束")

        rng = Subspace(jet.m, ImmutableMatrix(s_op * nc.basis)) if nc.dim else Subspace.zero(jet.m)
        rc = complement(rng, outer_range)
        record = LevelRecord(index=i, sbar=sbar, s_op=s_op, kernel=ker, kernel_complement=nc,
                             range=rng, range_complement=rc, range_sum_dim=filled + rng.dim,
                             avoid_dropped=dropped)
        self.levels.append(record)
        log.debug(f"分解第 {i} 层: dim N={ker.dim}, dim N^c={nc.dim}, dim R={rng.dim}, "
                  f"值域累计 {record.range_sum_dim}/{jet.m}")
        return record

    def extend_to(self, levels: int):
        while self.depth < levels:
            self.extend()

    def result(self, k: int) -> 'ResolutionResult':
        """冻结前 k+1 层得到 k 阶分解"""
        if k < 1:
            raise IndexRangeError(f"k 必须 ≥ 1，收到 {k}")
        if self.l > k:
            raise IndexRangeError(f"首项指标 l={self.l} 超过 k={k}")
        self.extend_to(k + 1)
        jet = self.jet
        levels = tuple(self.levels[:k + 1])
        n_sum = DirectSum(jet.n, tuple(lv.kernel_complement for lv in levels) + (levels[-1].kernel,))
        r_sum = DirectSum(jet.m, tuple(lv.range for lv in levels) + (levels[-1].range_complement,))

        m_top = self.m_matrix(k)
        m_hat = [[ImmutableMatrix.eye(jet.n)] + [ImmutableMatrix.zeros(jet.n, jet.n)] * k]
        m_hat += [[ImmutableMatrix.zeros(jet.n, jet.n)] + list(row) for row in m_top]

        sbar_row = hstack([lv.sbar for lv in levels], jet.m)
        c_odd = C_matrix(2 * k + 1)
        scaled = hstack([lv.sbar * c_odd[t] for t, lv in enumerate(levels)], jet.m)
        l_hat = ImmutableMatrix(scaled / factorial(2 * k + 1))

        z_l = self.curve.bar(self.l)
        z_proj = ImmutableMatrix(n_sum.projector(k + 1) * z_l)
        kernel_top = levels[-1].kernel
        if is_zero_vector(z_proj):
            p_space = kernel_top
        else:
            p_space = complement(Subspace.span(jet.n, [z_proj]), kernel_top)

        return ResolutionResult(
            k=k, l=self.l, levels=levels,
            e_blocks=self.e_matrix(k + 1),
            m_chain=tuple(self.m_matrix(j) for j in range(1, k + 1)),
            m_hat=m_hat, sbar_row=sbar_row, l_hat=l_hat,
            z_l_projection=z_proj, p_space=p_space,
            kernel_sum=n_sum, range_sum=r_sum,
            jet=jet, curve=self.curve, builder=self,
        )


@dataclass(frozen=True)
class ResolutionResult:
    """k 阶精细分解

    只依赖 z̄₁…z̄_k 和 G₀¹…G₀^{k+1}；jet、curve 等引用不参与相等比较。

    Attributes:
        k: 阶
        l: 曲线首项指标
        levels: 第 1…k+1 层
        e_blocks: E^{k+1}
        m_chain: (M³, M⁵, …, M^{2k+1})
        m_hat: M̂_{k+1} = diag(I_B, M^{2k+1})，(k+1)×(k+1) 块
        sbar_row: [S̄₁|…|S̄_{k+1}]
        l_hat: L̂_{k+1} = [S̄₁|…|S̄_{k+1}]·C^{2k+1} / (2k+1)!
        z_l_projection: z̄_{l,k+1}，z̄_l 在 N_{k+1} 上的分量
        p_space: P_{k+1}，N_{k+1} = P_{k+1} ⊕ span{z̄_{l,k+1}}
    """
    k: int
    l: int
    levels: Tuple[LevelRecord, ...]
    e_blocks: Blocks
    m_chain: Tuple[Blocks, ...]
    m_hat: Blocks
    sbar_row: ImmutableMatrix
    l_hat: ImmutableMatrix
    z_l_projection: ImmutableMatrix
    p_space: Subspace
    kernel_sum: DirectSum = dc_field(compare=False, repr=False)
    range_sum: DirectSum = dc_field(compare=False, repr=False)
    jet: MapJet = dc_field(compare=False, repr=False)
    curve: CurveJet = dc_field(compare=False, repr=False)
    builder: ResolutionBuilder = dc_field(compare=False, repr=False)

    @property
    def n(self) -> int:
        return self.jet.n

    @property
    def m(self) -> int:
        return self.jet.m

    @property
    def transversal(self) -> bool:
        """R₁ ⊕ … ⊕ R_{k+1} = B̄"""
        return self.levels[-1].range_complement.dim == 0

    @property
    def top_kernel(self) -> Subspace:
        return self.levels[-1].kernel

    @property
    def nc_dim(self) -> int:
        return sum(lv.kernel_complement.dim for lv in self.levels)

    @property
    def avoid_dropped(self) -> bool:
        return any(lv.avoid_dropped for lv in self.levels)

    @property
    def m_top(self) -> Blocks:
        """M^{2k+1}"""
        return self.m_chain[-1]

    def level(self, i: int) -> LevelRecord:
        return self.levels[i - 1]

    def blocks(self, s: int) -> Tuple[Blocks, Blocks, Blocks, Blocks]:
        """(α^s, ᾱ^s, A^s, Ā^s)，s ∈ [1, 2k+2]"""
        if not 1 <= s <= 2 * self.k + 2:
            raise IndexRangeError(f"α/A 块要求 1 ≤ s ≤ {2 * self.k + 2}，收到 {s}")
        conj = self.builder.conjugated(s)
        j = len(conj)
        alpha = [conj[0][:j - 1]]
        alpha_bar = [[conj[0][j - 1]]]
        big_a = [row[:j - 1] for row in conj[1:]]
        big_a_bar = [[row[j - 1]] for row in conj[1:]]
        return alpha, alpha_bar, big_a, big_a_bar

    def nc_basis(self) -> ImmutableMatrix:
        """N₁^c × … × N_{k+1}^c 在 B^{k+1} 中的基"""
        return block_diag_subspaces([lv.kernel_complement for lv in self.levels])

    def dims(self) -> List[Dict[str, int]]:
        return [lv.dims() for lv in self.levels]


def build_resolution(jet: MapJet, curve: CurveJet, k: int) -> ResolutionResult:
    """构造 k 阶精细分解

    Raises:
        CurveDirectionExhausted: 某层核为零而值域未满，z̄_l 无法避开 N_i^c
        JetOrderError: 射阶不足 k+1
    """
    jet.require_order(k + 1)
    result = ResolutionBuilder(jet, curve).result(k)
    log.info(f"k={k} 的分解完成: 横截={result.transversal}, dim N^c={result.nc_dim}")
    return result


@dataclass(frozen=True)
class ConeOperators:
    """锥的结构算子

    Attributes:
        m_hat: M̂_{k+1}
        l_hat: L̂_{k+1}
        bijective: L̂_{k+1} 在 N^c 上是否为到 R₁⊕…⊕R_{k+1} 的双射（精确判断）
    """
    k: int
    m_hat: Blocks
    l_hat: ImmutableMatrix
    bijective: bool

    def weights(self, eps, mode: str = EXACT) -> List:
        """[ε^{2k+1}/(2k+1)!, …, ε^{k+1}/(k+1)!]"""
        k = self.k
        if mode == FLOAT:
            e = float(eps)
            return [e ** (2 * k + 1 - r) / factorial(2 * k + 1 - r) for r in range(k + 1)]
        e = to_exact(eps)
        return [e ** (2 * k + 1 - r) / factorial(2 * k + 1 - r) for r in range(k + 1)]

    def a_eps(self, eps, mode: str = EXACT):
        """A_ε = [ε^{2k+1}/(2k+1)! … ε^{k+1}/(k+1)!]·M̂_{k+1}，n×(k+1)n"""
        w = self.weights(eps, mode)
        size = len(self.m_hat)
        n = self.m_hat[0][0].rows
        if mode == FLOAT:
            hat = to_float_array(block_to_matrix(self.m_hat))
            row = np.hstack([np.eye(n) * w[r] for r in range(size)])
            return row @ hat
        columns = []
        for c in range(size):
            acc = Matrix.zeros(n, n)
            for r in range(size):
                acc += self.m_hat[r][c] * w[r]
            columns.append(acc)
        return ImmutableMatrix(Matrix.hstack(*columns))


def cone_operators(res: ResolutionResult) -> ConeOperators:
    """M̂_{k+1}、L̂_{k+1} 与 A_ε 工厂"""
    basis = res.nc_basis()
    target = hstack([lv.range.basis for lv in res.levels if lv.range.dim], res.m)
    if basis.cols == 0:
        bijective = target.cols == 0
    else:
        mapped = res.l_hat * basis
        bijective = mapped.rank() == basis.cols == target.cols and \
            Matrix.hstack(mapped, target).rank() == target.cols
    if not bijective:
        log.warning(f"L̂_{res.k + 1} 在 N^c 上不是到 R₁⊕…⊕R_{res.k + 1} 的双射")
    return ConeOperators(k=res.k, m_hat=res.m_hat, l_hat=res.l_hat, bijective=bijective)


# ---------------------------------------------------------------------------
# 精确校验
# ---------------------------------------------------------------------------

def explicit_e_column(res: ResolutionResult, b: int) -> List[ImmutableMatrix]:
    """用显式乘积公式计算 E 的第 b 列

    E_{i,b} = −S_i^{-1}P_{R_i}(I + Σ_v (−1)^v Σ_{i<n₁<…<n_v<b} Π S̄_{n_τ} S_{n_τ}^{-1} P_{R_{n_τ}}) S̄_b
    """
    builder = res.builder
    n, m = res.n, res.m
    column = [ImmutableMatrix.zeros(n, n) for _ in range(b)]
    column[b - 1] = ImmutableMatrix.eye(n)
    sbar_b = res.level(b).sbar
    memo: Dict[int, Matrix] = {}

    def chain_sum(start: int) -> Matrix:
        # 所有链 start ≤ n₁ < … < n_v < b 上 (−1)^v Π S̄_{n_τ} S_{n_τ}^{-1} P_{R_{n_τ}} 之和
        if start not in memo:
            total = Matrix.zeros(m, m)
            for first in range(start, b):
                head = -(res.level(first).sbar * builder.s_inverse_project(first, Matrix.eye(m)))
                total += head + head * chain_sum(first + 1)
            memo[start] = total
        return memo[start]

    for i in range(b - 1, 0, -1):
        inner = (Matrix.eye(m) + chain_sum(i + 1)) * sbar_b
        column[i - 1] = ImmutableMatrix(-builder.s_inverse_project(i, inner))
    return column


@dataclass(frozen=True)
class LemmaReport:
    """分解的精确恒等式校验结果；kernel_identity 等字段对应五条结论"""
    kernel_identity: IdentityCheck
    linearization: IdentityCheck
    solution_space: IdentityCheck
    scheme_shift: IdentityCheck
    curve_in_kernel: Optional[IdentityCheck]
    triangular: IdentityCheck
    invertible: IdentityCheck
    bijection: IdentityCheck
    explicit_e: IdentityCheck

    def items(self) -> List[Tuple[str, Optional[IdentityCheck]]]:
        return [
            ("lemma_i", self.kernel_identity),
            ("lemma_ii", self.linearization),
            ("lemma_iii", self.solution_space),
            ("lemma_iv", self.scheme_shift),
            ("lemma_v", self.curve_in_kernel),
            ("triangular", self.triangular),
            ("invertible", self.invertible),
            ("bijection", self.bijection),
            ("explicit_e", self.explicit_e),
        ]

    @property
    def passed(self) -> bool:
        return all(check is None or check.passed for _, check in self.items())


def _check_kernel_identity(res: ResolutionResult) -> IdentityCheck:
    """M^{2k+1}(N₁×…×N_k) = N[Δ^k(z̄_{k−1}…z̄₁)]"""
    k, n = res.k, res.n
    delta = block_to_matrix(delta_blocks(res.jet, res.curve.bars(k), k))
    ker = kernel(delta, Subspace.whole(k * n))
    domain = block_diag_subspaces([lv.kernel for lv in res.levels[:k]])
    span = Subspace.span(k * n, [block_to_matrix(res.m_top) * v for v in Subspace(k * n, domain).vectors()])
    if span.same_as(ker):
        return IdentityCheck(True)
    return IdentityCheck(False, Rational(abs(span.dim - ker.dim)), f"dim M(N)={span.dim}, dim N[Δ]={ker.dim}")


def _check_linearization(res: ResolutionResult) -> IdentityCheck:
    """W^{2k+1}·M̂_{k+1} = [S̄₁|…|S̄_{k+1}]·C^{2k+1}"""
    k = res.k
    zs = res.curve.bars(k)
    w = [partial_operator(res.jet, zs, 2 * k + 1, mu, max_index=k) for mu in range(2 * k + 1, k, -1)]
    lhs = block_matmul([w], res.m_hat)[0]
    c_odd = C_matrix(2 * k + 1)
    for t, lv in enumerate(res.levels):
        rhs = lv.sbar * c_odd[t]
        if lhs[t] != rhs:
            deviation = max(abs(x) for x in (lhs[t] - rhs))
            return IdentityCheck(False, deviation, f"第 {t + 1} 列块")
    return IdentityCheck(True)


def _check_solution_space(res: ResolutionResult) -> IdentityCheck:
    """[S̄₁|…|S̄_{k+1}] 在 N₀×…×N_k 上的核 = E^{k+1}(N₁×…×N_{k+1})"""
    n, size = res.n, res.k + 1
    domain = Subspace(size * n, block_diag_subspaces([Subspace.whole(n)] + [lv.kernel for lv in res.levels[:-1]]))
    ker = kernel(res.sbar_row, domain)
    top = Subspace(size * n, block_diag_subspaces([lv.kernel for lv in res.levels]))
    spanned = image(block_to_matrix(res.e_blocks), top)
    if spanned.same_as(ker):
        return IdentityCheck(True)
    return IdentityCheck(False, Rational(abs(spanned.dim - ker.dim)), f"dim E(N)={spanned.dim}, dim 核={ker.dim}")


def _check_scheme_shift(res: ResolutionResult) -> IdentityCheck:
    """M^{2k+1}·D' = D'·(α^{2k+1}; M^{2k+1}·A^{2k+1}) 去掉最后一行，D' = Diag[d_{2k+1,2}…d_{2k+1,k+1}]"""
    k = res.k
    diag = [d_coeff(2 * k + 1, l) for l in range(2, k + 2)]
    alpha, _, big_a, _ = res.blocks(2 * k + 1)
    stacked = alpha + block_matmul(res.m_top, big_a)
    stacked = stacked[:k]
    lhs = [[blk * diag[b] for b, blk in enumerate(row)] for row in res.m_top]
    rhs = [[blk * diag[a] for blk in row] for a, row in enumerate(stacked)]
    where = block_equal(lhs, rhs)
    if where is None:
        return IdentityCheck(True)
    a, b = where
    deviation = max(abs(x) for x in (lhs[a][b] - rhs[a][b]))
    return IdentityCheck(False, deviation, f"M^{2 * k + 1} 块 ({a + 1}, {b + 1})")


def _check_curve_in_kernel(res: ResolutionResult) -> Optional[IdentityCheck]:
    """逼近成立时 z̄_l ∈ N_{k+1}；逼近不成立返回 None"""
    k = res.k
    values = compose_curve(res.jet, res.curve, 2 * k) if res.jet.order is None or res.jet.order >= 2 * k else None
    if values is None or any(not is_zero_vector(t) for t in values):
        return None
    z_l = res.curve.bar(res.l)
    if res.top_kernel.contains(z_l):
        return IdentityCheck(True)
    return IdentityCheck(False, Rational(1), f"z̄_{res.l} ∉ N_{k + 1}")


def _check_triangular(res: ResolutionResult) -> IdentityCheck:
    n = res.n
    for a, row in enumerate(res.m_top):
        for b, blk in enumerate(row):
            if a == b and blk != ImmutableMatrix.eye(n):
                return IdentityCheck(False, Rational(1), f"对角块 ({a + 1}, {b + 1}) 不是 I")
            if a > b and any(x != 0 for x in blk):
                return IdentityCheck(False, max(abs(x) for x in blk), f"下三角块 ({a + 1}, {b + 1}) 非零")
    return IdentityCheck(True)


def _check_invertible(res: ResolutionResult) -> IdentityCheck:
    full = block_to_matrix(res.m_top)
    if full.rank() == full.rows:
        return IdentityCheck(True)
    return IdentityCheck(False, Rational(full.rows - full.rank()), "M^{2k+1} 奇异")


def _check_bijection(res: ResolutionResult) -> IdentityCheck:
    """S_i^{-1}P_{R_i}·S_i 在 N_i^c 上为恒等"""
    builder = res.builder
    for lv in res.levels:
        if lv.kernel_complement.dim == 0:
            continue
        basis = lv.kernel_complement.basis
        back = builder.s_inverse_project(lv.index, lv.s_op * basis)
        if back != basis:
            return IdentityCheck(False, max(abs(x) for x in (back - basis)), f"第 {lv.index} 层")
    return IdentityCheck(True)


def _check_explicit_e(res: ResolutionResult) -> IdentityCheck:
    size = res.k + 1
    for b in range(2, size + 1):
        explicit = explicit_e_column(res, b)
        for a in range(b):
            if explicit[a] != res.e_blocks[a][b - 1]:
                deviation = max(abs(x) for x in (explicit[a] - res.e_blocks[a][b - 1]))
                return IdentityCheck(False, deviation, f"E 块 ({a + 1}, {b})")
    return IdentityCheck(True)


def lemma_checks(res: ResolutionResult) -> LemmaReport:
    """分解的全部精确恒等式"""
    report = LemmaReport(
        kernel_identity=_check_kernel_identity(res),
        linearization=_check_linearization(res),
        solution_space=_check_solution_space(res),
        scheme_shift=_check_scheme_shift(res),
        curve_in_kernel=_check_curve_in_kernel(res),
        triangular=_check_triangular(res),
        invertible=_check_invertible(res),
        bijection=_check_bijection(res),
        explicit_e=_check_explicit_e(res),
    )
    for name, check in report.items():
        if check is not None and not check.passed:
            log.warning(f"k={res.k} 恒等式 {name} 不成立: {check.where}")
    return report
