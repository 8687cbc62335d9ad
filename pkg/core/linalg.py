"""精确有理线性代数：子空间、直和分解与分块算子

核、像与补空间都由 sympy 的行最简形给出，维数判断没有任何容差。
"""
from dataclasses import dataclass, field as dc_field
from typing import Dict, List, Optional, Sequence

from sympy import ImmutableMatrix, Matrix

from core.errors import CurveDirectionExhausted, DimensionError

Blocks = List[List[ImmutableMatrix]]


def hstack(columns: Sequence[Matrix], rows: int) -> ImmutableMatrix:
    """按列拼接，允许空列表（得到 rows×0 矩阵）"""
    if not columns:
        return ImmutableMatrix.zeros(rows, 0)
    return ImmutableMatrix(Matrix.hstack(*columns))


@dataclass(frozen=True)
class Subspace:
    """K^ambient 的子空间，basis 的列线性无关"""
    ambient: int
    basis: ImmutableMatrix

    def __post_init__(self):
        if self.basis.rows != self.ambient:
            raise DimensionError(f"基矩阵行数 {self.basis.rows} 不等于环境维数 {self.ambient}")

    @classmethod
    def whole(cls, n: int) -> 'Subspace':
        return cls(n, ImmutableMatrix.eye(n))

    @classmethod
    def zero(cls, n: int) -> 'Subspace':
        return cls(n, ImmutableMatrix.zeros(n, 0))

    @classmethod
    def span(cls, n: int, vectors: Sequence[Matrix]) -> 'Subspace':
        """若干向量张成的子空间（自动去掉相关向量）"""
        mat = hstack(list(vectors), n)
        if mat.cols == 0:
            return cls.zero(n)
        return cls(n, hstack(mat.columnspace(), n))

    @property
    def dim(self) -> int:
        return self.basis.cols

    def vectors(self) -> List[ImmutableMatrix]:
        return [ImmutableMatrix(self.basis[:, j]) for j in range(self.dim)]

    def contains(self, vec: Matrix) -> bool:
        if all(x == 0 for x in vec):
            return True
        if self.dim == 0:
            return False
        return Matrix.hstack(self.basis, vec).rank() == self.dim

    def contains_subspace(self, other: 'Subspace') -> bool:
        if other.dim == 0:
            return True
        if self.dim == 0:
            return False
        return Matrix.hstack(self.basis, other.basis).rank() == self.dim

    def same_as(self, other: 'Subspace') -> bool:
        return self.dim == other.dim and self.contains_subspace(other)

    def coordinates(self, vec: Matrix) -> ImmutableMatrix:
        """vec 在本基下的坐标（vec 必须属于本子空间）"""
        if self.dim == 0:
            return ImmutableMatrix.zeros(0, 1)
        solution, params = Matrix(self.basis).gauss_jordan_solve(Matrix(vec))
        if params.shape[0]:
            raise DimensionError("基矩阵列相关，坐标不唯一")
        return ImmutableMatrix(solution)


def kernel(op: Matrix, within: Subspace) -> Subspace:
    """op 限制在 within 上的核"""
    if op.cols != within.ambient:
        raise DimensionError(f"算子列数 {op.cols} 与子空间环境维数 {within.ambient} 不一致")
    if within.dim == 0:
        return Subspace.zero(within.ambient)
    local = Matrix(op) * within.basis
    null = local.nullspace()
    return Subspace(within.ambient, hstack([within.basis * v for v in null], within.ambient))


def image(op: Matrix, on: Subspace) -> Subspace:
    """op 在子空间 on 上的像 R[op|_on]"""
    if op.cols != on.ambient:
        raise DimensionError(f"算子列数 {op.cols} 与子空间环境维数 {on.ambient} 不一致")
    if on.dim == 0:
        return Subspace.zero(op.rows)
    local = Matrix(op) * on.basis
    return Subspace(op.rows, hstack(local.columnspace(), op.rows))


def complement(sub: Subspace, within: Subspace, avoid: Optional[Matrix] = None,
               level: int = 0) -> Subspace:
    """sub 在 within 中的补空间

    由 [X | I] 的行最简形主元列选取单位坐标向量；若给定的 avoid 向量落在
    补空间里，就把某个基向量 b_j 换成 b_j + u/a_j（u ∈ sub 非零，a_j 为
    avoid 在补空间基下的第 j 个坐标），这样 avoid 在 sub 上的分量为 −u ≠ 0。

    Args:
        sub: 被补的子空间（须含于 within）
        within: 外层子空间
        avoid: 需要避开的向量（须属于 within）
        level: 仅用于诊断信息的层号

    Raises:
        CurveDirectionExhausted: sub = {0} 而 avoid ≠ 0，无法避开
    """
    if within.dim == 0 or sub.dim == within.dim:
        return Subspace.zero(within.ambient)
    coords = hstack([within.coordinates(v) for v in sub.vectors()], within.dim)
    augmented = Matrix.hstack(coords, Matrix.eye(within.dim))
    _, pivots = augmented.rref()
    chosen = [p - coords.cols for p in pivots if p >= coords.cols]
    local_basis = [Matrix.eye(within.dim)[:, j] for j in chosen]
    basis = [within.basis * e for e in local_basis]
    result = Subspace(within.ambient, hstack(basis, within.ambient))

    if avoid is None or all(x == 0 for x in avoid) or not result.contains(avoid):
        return result
    if sub.dim == 0:
        raise CurveDirectionExhausted(level)
    weights = result.coordinates(avoid)
    j = next(idx for idx, a in enumerate(weights) if a != 0)
    shift = sub.vectors()[0] / weights[j]
    tilted = list(result.vectors())
    tilted[j] = ImmutableMatrix(tilted[j] + shift)
    return Subspace(within.ambient, hstack(tilted, within.ambient))


@dataclass(frozen=True)
class DirectSum:
    """K^ambient = parts[0] ⊕ … ⊕ parts[-1] 的直和分解及其投影"""
    ambient: int
    parts: tuple
    _inverse: Dict[str, ImmutableMatrix] = dc_field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        total = sum(p.dim for p in self.parts)
        if total != self.ambient:
            raise DimensionError(f"直和各部分维数之和 {total} 不等于 {self.ambient}")
        if self.ambient and self.matrix.rank() != self.ambient:
            raise DimensionError("给定子空间之和不是直和")

    @property
    def matrix(self) -> ImmutableMatrix:
        return hstack([p.basis for p in self.parts if p.dim], self.ambient) if self.ambient else ImmutableMatrix.zeros(0, 0)

    def _inv(self) -> ImmutableMatrix:
        if "q" not in self._inverse:
            self._inverse["q"] = ImmutableMatrix(self.matrix.inv()) if self.ambient else ImmutableMatrix.zeros(0, 0)
        return self._inverse["q"]

    def _offsets(self) -> List[int]:
        offsets, acc = [], 0
        for p in self.parts:
            offsets.append(acc)
            acc += p.dim
        return offsets

    def coordinates(self, vec: Matrix, index: int) -> ImmutableMatrix:
        """vec 的第 index 个分量在该部分基下的坐标"""
        start = self._offsets()[index]
        dim = self.parts[index].dim
        if dim == 0:
            return ImmutableMatrix.zeros(0, 1)
        full = self._inv() * Matrix(vec)
        return ImmutableMatrix(full[start:start + dim, :])

    def projector(self, index: int) -> ImmutableMatrix:
        """沿其余部分投影到第 index 部分的矩阵"""
        start = self._offsets()[index]
        dim = self.parts[index].dim
        if dim == 0:
            return ImmutableMatrix.zeros(self.ambient, self.ambient)
        q = self.matrix
        return ImmutableMatrix(q[:, start:start + dim] * self._inv()[start:start + dim, :])


# ---------------------------------------------------------------------------
# 分块算子：List[List[矩阵]]，块的行列数由使用处保证一致
# ---------------------------------------------------------------------------

def block_identity(size: int, n: int) -> Blocks:
    return [[ImmutableMatrix.eye(n) if a == b else ImmutableMatrix.zeros(n, n)
             for b in range(size)] for a in range(size)]


def block_matmul(left: Blocks, right: Blocks) -> Blocks:
    if not left or not right:
        return []
    inner = len(right)
    if len(left[0]) != inner:
        raise DimensionError(f"分块乘法维数不匹配: {len(left[0])} vs {inner}")
    out = []
    for row in left:
        new_row = []
        for b in range(len(right[0])):
            acc = Matrix.zeros(row[0].rows, right[0][b].cols)
            for t in range(inner):
                acc += row[t] * right[t][b]
            new_row.append(ImmutableMatrix(acc))
        out.append(new_row)
    return out


def block_conjugate(blocks: Blocks, diag: Sequence) -> Blocks:
    """(Diag)^{-1}·E·Diag：块 (a, b) 乘以 diag[b]/diag[a]"""
    return [[ImmutableMatrix(blk * (diag[b] / diag[a])) for b, blk in enumerate(row)]
            for a, row in enumerate(blocks)]


def block_to_matrix(blocks: Blocks) -> ImmutableMatrix:
    """拼成普通矩阵"""
    if not blocks or not blocks[0]:
        return ImmutableMatrix.zeros(0, 0)
    return ImmutableMatrix(Matrix.vstack(*[Matrix.hstack(*row) for row in blocks]))


def block_equal(left: Blocks, right: Blocks) -> Optional[tuple]:
    """逐块比较，返回第一个不相等的块下标；全部相等返回 None"""
    if len(left) != len(right):
        return (len(left), len(right))
    for a, (row_l, row_r) in enumerate(zip(left, right)):
        for b, (x, y) in enumerate(zip(row_l, row_r)):
            if x != y:
                return (a, b)
    return None


def block_diag_subspaces(parts: Sequence[Subspace]) -> ImmutableMatrix:
    """N₁ × … × N_j 在 B^j 中的基（块对角拼接）"""
    total_rows = sum(p.ambient for p in parts)
    columns = []
    offset = 0
    for p in parts:
        for v in p.vectors():
            col = Matrix.zeros(total_rows, 1)
            col[offset:offset + p.ambient, 0] = v
            columns.append(col)
        offset += p.ambient
    return hstack(columns, total_rows)
