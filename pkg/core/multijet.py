"""映射的精确射表示与幂级数复合预言机

G 以齐次多项式片 P_β 存储，满足 G₀^β[v,…,v] = β!·P_β(v)。
多重线性值通过对 P_β 做方向展开提取系数得到，同一种存储同时服务
于求值 eval_map 与 G₀^β 的作用 apply_form。
"""
from dataclasses import dataclass, field as dc_field
from math import factorial
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import sympy
from sympy import ImmutableMatrix, Matrix, Rational

from core.errors import DimensionError, InvalidJetError, JetOrderError

Exponent = Tuple[int, ...]
Terms = Dict[Exponent, sympy.Expr]
VectorLike = Union[Matrix, ImmutableMatrix, Sequence]

EXACT = "exact"
FLOAT = "float"
FIELDS = ("real", "complex")


def to_exact(value) -> sympy.Expr:
    """把输入（字符串、整数、Fraction、float）转成精确 sympy 数

    float 按其二进制值精确转换，不做十进制舍入。
    """
    if isinstance(value, sympy.Basic):
        return value
    if isinstance(value, (float, np.floating)):
        return Rational(float(value))
    if isinstance(value, str):
        try:
            return Rational(value.strip())
        except (TypeError, ValueError, SyntaxError):
            # 复数系数使用 sympy 语法，例如 "1/2 + 3*I"
            parsed = sympy.sympify(value)
            if not parsed.is_number:
                raise InvalidJetError(f"系数 {value!r} 不是数")
            return sympy.expand(sympy.nsimplify(parsed, rational=True))
    return sympy.sympify(value)


def as_vector(values: VectorLike, n: Optional[int] = None) -> ImmutableMatrix:
    """转成精确列向量，可选校验维数"""
    if isinstance(values, (Matrix, ImmutableMatrix)):
        vec = ImmutableMatrix(values.reshape(len(values), 1)) if values.cols != 1 else ImmutableMatrix(values)
    else:
        vec = ImmutableMatrix([to_exact(v) for v in values])
    if n is not None and vec.rows != n:
        raise DimensionError(f"向量维数 {vec.rows} 与期望 {n} 不一致")
    return vec


def to_float_array(mat) -> np.ndarray:
    """精确矩阵转为 numpy 浮点数组（复数域时为 complex）"""
    rows = mat.tolist() if hasattr(mat, "tolist") else mat
    try:
        return np.array(rows, dtype=float)
    except TypeError:
        return np.array(rows, dtype=complex)


def zero_vector(n: int) -> ImmutableMatrix:
    return ImmutableMatrix.zeros(n, 1)


def is_zero_vector(vec: VectorLike) -> bool:
    return all(entry == 0 for entry in vec)


def _multinomial(total: int, parts: Sequence[int]) -> int:
    result = factorial(total)
    for p in parts:
        result //= factorial(p)
    return result


def _compositions(total: int, bounds: Sequence[int]) -> Iterable[Tuple[int, ...]]:
    """枚举和为 total、第 j 个分量不超过 bounds[j] 的非负整数组（字典序）"""
    if not bounds:
        if total == 0:
            yield ()
        return
    head, rest = bounds[0], bounds[1:]
    for first in range(min(head, total), -1, -1):
        for tail in _compositions(total - first, rest):
            yield (first,) + tail


@dataclass(frozen=True)
class SymForm:
    """β 阶对称多重线性形式 G₀^β

    Attributes:
        order: 阶数 β
        n: 定义域维数
        m: 值域维数
        pieces: 每个输出分量的齐次多项式 P_β，{指数: 系数}
    """
    order: int
    n: int
    m: int
    pieces: Tuple[Terms, ...]

    @property
    def is_zero(self) -> bool:
        return all(not piece for piece in self.pieces)

    def apply_grouped(self, groups: Sequence[Tuple[VectorLike, int]]) -> ImmutableMatrix:
        """带重数的多重线性求值 G₀^β[v₁^{n₁}, …, v_r^{n_r}]

        利用 P_β(Σ s_j v_j) 中 Π s_j^{n_j} 的系数乘以 Π n_j! 得到结果。

        Args:
            groups: (向量, 重数) 列表，重数之和必须等于 β

        Returns:
            ImmutableMatrix: K^m 中的列向量
        """
        mults = [int(mult) for _, mult in groups]
        if sum(mults) != self.order:
            raise DimensionError(f"{self.order} 阶形式需要 {self.order} 个参数，实际 {sum(mults)}")
        vectors = [as_vector(vec, self.n) for vec, _ in groups]
        if self.is_zero or any(is_zero_vector(vec) for vec in vectors):
            return zero_vector(self.m)

        target = tuple(mults)
        scale = 1
        for mult in mults:
            scale *= factorial(mult)

        # 每个坐标 x_i 的幂 (Σ_j s_j v_j[i])^e，按需缓存
        power_cache: Dict[Tuple[int, int], Dict[Exponent, sympy.Expr]] = {}

        def coordinate_power(i: int, e: int) -> Dict[Exponent, sympy.Expr]:
            key = (i, e)
            if key not in power_cache:
                poly: Dict[Exponent, sympy.Expr] = {}
                for parts in _compositions(e, target):
                    coef = sympy.Integer(_multinomial(e, parts))
                    for vec, p in zip(vectors, parts):
                        if p:
                            coef *= vec[i] ** p
                    if coef != 0:
                        poly[parts] = coef
                power_cache[key] = poly
            return power_cache[key]

        values = []
        for piece in self.pieces:
            total = sympy.Integer(0)
            for alpha, coef in piece.items():
                acc: Dict[Exponent, sympy.Expr] = {tuple(0 for _ in target): sympy.Integer(1)}
                for i, e in enumerate(alpha):
                    if e == 0:
                        continue
                    acc = _truncated_product(acc, coordinate_power(i, e), target)
                    if not acc:
                        break
                total += coef * acc.get(target, 0)
            values.append(total * scale)
        return ImmutableMatrix(values)


def _truncated_product(left: Dict[Exponent, sympy.Expr], right: Dict[Exponent, sympy.Expr],
                       bound: Exponent) -> Dict[Exponent, sympy.Expr]:
    """s 变量多项式乘法，丢弃任一指数超过 bound 的项"""
    result: Dict[Exponent, sympy.Expr] = {}
    for ea, ca in left.items():
        for eb, cb in right.items():
            exp = tuple(a + b for a, b in zip(ea, eb))
            if any(x > y for x, y in zip(exp, bound)):
                continue
            result[exp] = result.get(exp, 0) + ca * cb
    return {e: c for e, c in result.items() if c != 0}


def apply_form(form: SymForm, args: Sequence[VectorLike]) -> ImmutableMatrix:
    """对 β 个参数求对称多重线性值 G₀^β[v₁, …, v_β]

    Args:
        form: 对称形式
        args: 恰好 β 个 n 维向量

    Returns:
        ImmutableMatrix: K^m 中的值，有理模式下精确
    """
    if len(args) != form.order:
        raise DimensionError(f"{form.order} 阶形式需要 {form.order} 个参数，实际 {len(args)}")
    groups: List[Tuple[ImmutableMatrix, int]] = []
    for arg in args:
        vec = as_vector(arg, form.n)
        for idx, (existing, mult) in enumerate(groups):
            if existing == vec:
                groups[idx] = (existing, mult + 1)
                break
        else:
            groups.append((vec, 1))
    return form.apply_grouped(groups)


@dataclass(frozen=True)
class MapJet:
    """映射 G 在 0 处的射

    Attributes:
        n: 定义域维数
        m: 值域维数
        components: 每个输出分量的多项式项 {指数: 系数}
        order: 声明的射阶 q；None 表示给出的是精确多项式
        field: 数域标记 real / complex
    """
    n: int
    m: int
    components: Tuple[Terms, ...]
    order: Optional[int] = None
    field: str = "real"
    _forms: Dict[int, SymForm] = dc_field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if self.field not in FIELDS:
            raise InvalidJetError(f"未知数域 {self.field}")
        if len(self.components) != self.m:
            raise DimensionError(f"给出 {len(self.components)} 个分量，期望 m={self.m}")
        for j, comp in enumerate(self.components):
            for alpha, coef in comp.items():
                if len(alpha) != self.n:
                    raise DimensionError(f"分量 {j} 的指数 {alpha} 长度不是 n={self.n}")
                if sum(alpha) == 0 and coef != 0:
                    raise InvalidJetError(f"分量 {j} 含常数项，违反 G[0] = 0")
                if self.order is not None and sum(alpha) > self.order:
                    raise InvalidJetError(f"分量 {j} 的项 {alpha} 超过声明的射阶 {self.order}")

    @classmethod
    def from_terms(cls, n: int, m: int, terms: Sequence[Sequence[Tuple[object, Sequence[int]]]],
                   order: Optional[int] = None, field: str = "real") -> 'MapJet':
        """由 (系数, 指数) 单项式列表构造

        Args:
            terms: 长度为 m 的列表，每项是该分量的 (系数, 指数向量) 序列
        """
        components = []
        for comp_terms in terms:
            comp: Terms = {}
            for coef, alpha in comp_terms:
                key = tuple(int(a) for a in alpha)
                comp[key] = comp.get(key, 0) + to_exact(coef)
            components.append({k: v for k, v in comp.items() if v != 0})
        return cls(n=n, m=m, components=tuple(components), order=order, field=field)

    def add_terms(self, extra: Sequence[Sequence[Tuple[object, Sequence[int]]]]) -> 'MapJet':
        """返回叠加了额外单项式的新射（扰动契约用）"""
        merged = []
        for comp, more in zip(self.components, extra):
            new = dict(comp)
            for coef, alpha in more:
                key = tuple(int(a) for a in alpha)
                new[key] = new.get(key, 0) + to_exact(coef)
            merged.append({k: v for k, v in new.items() if v != 0})
        order = self.order
        if order is not None:
            order = max([order] + [sum(a) for comp in merged for a in comp])
        return MapJet(n=self.n, m=self.m, components=tuple(merged), order=order, field=self.field)

    @property
    def degree(self) -> int:
        return max((sum(alpha) for comp in self.components for alpha in comp), default=0)

    @property
    def lowest_order(self) -> int:
        """ord(G)：最低非零齐次片的阶"""
        return min((sum(alpha) for comp in self.components for alpha in comp), default=0)

    def require_order(self, needed: int):
        """校验射阶足够，不足时抛出 JetOrderError"""
        if self.order is not None and needed > self.order:
            raise JetOrderError(f"需要 {needed} 阶射，只给出 {self.order} 阶")

    def form(self, beta: int) -> SymForm:
        """返回 G₀^β（缓存）"""
        if beta not in self._forms:
            pieces = tuple({alpha: coef for alpha, coef in comp.items() if sum(alpha) == beta}
                           for comp in self.components)
            self._forms[beta] = SymForm(order=beta, n=self.n, m=self.m, pieces=pieces)
        return self._forms[beta]

    def linear_part(self) -> ImmutableMatrix:
        """G₀¹ 的矩阵"""
        rows = []
        for comp in self.components:
            row = []
            for i in range(self.n):
                alpha = tuple(1 if j == i else 0 for j in range(self.n))
                row.append(comp.get(alpha, sympy.Integer(0)))
            rows.append(row)
        return ImmutableMatrix(self.m, self.n, [x for row in rows for x in row])

    def to_terms(self) -> List[List[Tuple[str, List[int]]]]:
        """序列化为 (有理数字符串, 指数) 列表"""
        return [[(str(coef), list(alpha)) for alpha, coef in sorted(comp.items())]
                for comp in self.components]


@dataclass(frozen=True)
class CurveJet:
    """曲线系数 z̄₁…z̄_M，采用阶乘约定 z₀(ε) = Σ ε^i z̄_i / i!"""
    n: int
    coefficients: Tuple[ImmutableMatrix, ...]

    def __post_init__(self):
        for i, coef in enumerate(self.coefficients, start=1):
            if coef.rows != self.n:
                raise DimensionError(f"曲线系数 z̄_{i} 维数 {coef.rows} 不是 n={self.n}")
        if self.leading_index is None:
            raise InvalidJetError("曲线系数全为零，没有首项指标 l")

    @classmethod
    def from_bar(cls, coefficients: Sequence[VectorLike]) -> 'CurveJet':
        """由阶乘约定的系数 z̄_i 构造"""
        vectors = tuple(as_vector(c) for c in coefficients)
        return cls(n=vectors[0].rows, coefficients=vectors)

    @classmethod
    def from_taylor(cls, coefficients: Sequence[VectorLike]) -> 'CurveJet':
        """由普通 Taylor 系数 c_i 构造，内部换算 z̄_i = i!·c_i"""
        vectors = tuple(ImmutableMatrix(as_vector(c) * factorial(i))
                        for i, c in enumerate(coefficients, start=1))
        return cls(n=vectors[0].rows, coefficients=vectors)

    @property
    def length(self) -> int:
        return len(self.coefficients)

    @property
    def leading_index(self) -> Optional[int]:
        for i, coef in enumerate(self.coefficients, start=1):
            if not is_zero_vector(coef):
                return i
        return None

    def bar(self, i: int) -> ImmutableMatrix:
        """z̄_i；超出给定长度时视为零"""
        if i < 1:
            raise DimensionError(f"曲线系数下标从 1 开始，收到 {i}")
        if i > self.length:
            return zero_vector(self.n)
        return self.coefficients[i - 1]

    def bars(self, upto: int) -> List[ImmutableMatrix]:
        """[z̄₁, …, z̄_upto]"""
        return [self.bar(i) for i in range(1, upto + 1)]

    def taylor(self) -> List[ImmutableMatrix]:
        """普通 Taylor 系数 c_i = z̄_i / i!"""
        return [ImmutableMatrix(coef / factorial(i)) for i, coef in enumerate(self.coefficients, start=1)]

    def point(self, eps, mode: str = EXACT):
        """曲线上的点 z₀(ε)"""
        if mode == FLOAT:
            eps_f = float(eps)
            return sum((to_float_array(c).reshape(-1) * eps_f ** i
                        for i, c in enumerate(self.taylor(), start=1)), np.zeros(self.n))
        e = to_exact(eps)
        total = Matrix.zeros(self.n, 1)
        for i, c in enumerate(self.taylor(), start=1):
            total += c * e ** i
        return ImmutableMatrix(total)


def _series_mul(a: List, b: List, order: int) -> List:
    out = [sympy.Integer(0)] * (order + 1)
    for i, x in enumerate(a):
        if x == 0:
            continue
        for j in range(0, order + 1 - i):
            y = b[j]
            if y != 0:
                out[i + j] += x * y
    return out


def compose_curve(jet: MapJet, curve: CurveJet, order: int) -> List[ImmutableMatrix]:
    """幂级数复合预言机：T^i = dⁱ/dεⁱ G[z₀(ε)]|_{ε=0}, i = 1…order

    对 ε 做截断幂级数的乘加，不依赖任何显式的 Faà di Bruno 求和，
    因此可作为 coeffsys 中各公式的独立对照。缺失的曲线系数按零处理。

    Args:
        jet: 映射射
        curve: 曲线射
        order: 截断阶 M

    Returns:
        List[ImmutableMatrix]: [T¹, …, T^M]
    """
    if curve.n != jet.n:
        raise DimensionError(f"曲线维数 {curve.n} 与映射定义域维数 {jet.n} 不一致")
    jet.require_order(order)
    taylor = [curve.bar(i) / factorial(i) for i in range(1, order + 1)]
    coordinate_series = [[sympy.Integer(0)] + [taylor[i - 1][idx] for i in range(1, order + 1)]
                         for idx in range(jet.n)]

    power_cache: Dict[Tuple[int, int], List] = {}

    def coordinate_power(idx: int, e: int) -> List:
        key = (idx, e)
        if key not in power_cache:
            if e == 0:
                power_cache[key] = [sympy.Integer(1)] + [sympy.Integer(0)] * order
            else:
                power_cache[key] = _series_mul(coordinate_power(idx, e - 1), coordinate_series[idx], order)
        return power_cache[key]

    result_series = []
    for comp in jet.components:
        acc = [sympy.Integer(0)] * (order + 1)
        for alpha, coef in comp.items():
            # 每个坐标级数从 ε¹ 开始，总次数超过 order 的单项式没有贡献
            if sum(alpha) > order:
                continue
            term = [sympy.Integer(1)] + [sympy.Integer(0)] * order
            for idx, e in enumerate(alpha):
                if e:
                    term = _series_mul(term, coordinate_power(idx, e), order)
            for i in range(order + 1):
                if term[i] != 0:
                    acc[i] += coef * term[i]
        result_series.append(acc)

    return [ImmutableMatrix([result_series[j][i] * factorial(i) for j in range(jet.m)])
            for i in range(1, order + 1)]


def eval_map(jet: MapJet, point, mode: str = EXACT):
    """求 G[z]

    exact 模式对多项式逐项精确求值（float 输入按二进制值精确转换）；
    float 模式用 numpy 双精度求值。截断射（声明了 order）按射阶截断求值。

    Args:
        jet: 映射射
        point: n 维点
        mode: "exact" 或 "float"
    """
    if len(point) != jet.n:
        raise DimensionError(f"点的维数 {len(point)} 与 n={jet.n} 不一致")
    if mode == FLOAT:
        x = np.asarray([complex(v) if jet.field == "complex" else float(v) for v in point])
        out = np.zeros(jet.m, dtype=x.dtype)
        for j, comp in enumerate(jet.components):
            if not comp:
                continue
            exps = np.array(list(comp.keys()), dtype=int)
            coefs = np.array([complex(c) if jet.field == "complex" else float(c) for c in comp.values()])
            out[j] = coefs @ np.prod(x[None, :] ** exps, axis=1)
        return out
    x = [to_exact(v) for v in point]
    values = []
    for comp in jet.components:
        total = sympy.Integer(0)
        for alpha, coef in comp.items():
            term = coef
            for xi, e in zip(x, alpha):
                if e:
                    term *= xi ** e
            total += term
        values.append(sympy.expand(total) if jet.field == "complex" else total)
    return ImmutableMatrix(values)


def jacobian(jet: MapJet, point, mode: str = EXACT):
    """G′[z] 的 m×n 矩阵"""
    if len(point) != jet.n:
        raise DimensionError(f"点的维数 {len(point)} 与 n={jet.n} 不一致")
    if mode == FLOAT:
        x = np.asarray([float(v) for v in point])
        out = np.zeros((jet.m, jet.n))
        for j, comp in enumerate(jet.components):
            for alpha, coef in comp.items():
                for i, e in enumerate(alpha):
                    if e == 0:
                        continue
                    reduced = list(alpha)
                    reduced[i] -= 1
                    out[j, i] += float(coef) * e * np.prod(x ** np.array(reduced))
        return out
    x = [to_exact(v) for v in point]
    entries = [[sympy.Integer(0)] * jet.n for _ in range(jet.m)]
    for j, comp in enumerate(jet.components):
        for alpha, coef in comp.items():
            for i, e in enumerate(alpha):
                if e == 0:
                    continue
                term = coef * e
                for idx, (xi, power) in enumerate(zip(x, alpha)):
                    power = power - 1 if idx == i else power
                    if power:
                        term *= xi ** power
                entries[j][i] += term
    return ImmutableMatrix(entries)
