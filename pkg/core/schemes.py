"""d/c 三角格式、对角矩阵 D^m、C^m、Γ^k 以及 Hurwitz 系数 γ

所有表项均为精确有理数并按列递推生成、缓存。标量对角阵只以列表形式
返回，在使用处再按 K^n 展开成块对角。
"""
import threading
from contextlib import contextmanager
from typing import Dict, Iterator, List, Tuple

from sympy import Rational, binomial

from core.errors import IndexRangeError
from core.logger import log


class SchemeTable:
    """d 格式与 c 格式的缓存表

    d_{2l−2,l} = (2l−1)/l，c_{2l−2,l} = 1；对 n ≥ l：
    d_{2n−1,l} = 2n/(2n+1−l)，d_{2n,l} = (2n+1)/(2n+2−l)，
    c_{2n−1,l} = c_{2n−2,l}·d_{2n−2,l}，c_{2n,l} = c_{2n−1,l}·d_{2n−1,l}。
    """

    def __init__(self):
        self._d: Dict[Tuple[int, int], Rational] = {}
        self._c: Dict[Tuple[int, int], Rational] = {}
        self._overrides: Dict[Tuple[int, int], Rational] = {}
        self.lock = threading.RLock()

    @staticmethod
    def _check(m: int, l: int):
        if l < 1 or m < 2 * l - 2:
            raise IndexRangeError(f"格式下标越界: m={m}, l={l}（要求 l ≥ 1, m ≥ 2l−2）")

    def d(self, m: int, l: int) -> Rational:
        self._check(m, l)
        key = (m, l)
        with self.lock:
            if key in self._overrides:
                return self._overrides[key]
            if key not in self._d:
                if m == 2 * l - 2:
                    value = Rational(2 * l - 1, l)
                elif m % 2 == 1:
                    n = (m + 1) // 2
                    value = Rational(2 * n, 2 * n + 1 - l)
                else:
                    n = m // 2
                    value = Rational(2 * n + 1, 2 * n + 2 - l)
                self._d[key] = value
            return self._d[key]

    def c(self, m: int, l: int) -> Rational:
        self._check(m, l)
        key = (m, l)
        with self.lock:
            if key not in self._c:
                if m == 2 * l - 2:
                    value = Rational(1)
                else:
                    value = self.c(m - 1, l) * self.d(m - 1, l)
                self._c[key] = value
            return self._c[key]

    @contextmanager
    def corrupted(self, m: int, l: int, value) -> Iterator[None]:
        """测试钩子：临时篡改 d_{m,l}，退出时恢复

        c 格式依赖 d，进入与退出时都清空 c 的缓存。
        """
        self._check(m, l)
        with self.lock:
            self._overrides[(m, l)] = Rational(value)
            self._c.clear()
            log.warning(f"格式表项 d_{{{m},{l}}} 被临时改为 {value}")
        try:
            yield
        finally:
            with self.lock:
                self._overrides.pop((m, l), None)
                self._c.clear()


SCHEMES = SchemeTable()


def d_coeff(m: int, l: int) -> Rational:
    """d_{m,l}"""
    return SCHEMES.d(m, l)


def c_coeff(m: int, l: int) -> Rational:
    """c_{m,l}"""
    return SCHEMES.c(m, l)


def _diag_width(order: int) -> int:
    if order < 1:
        raise IndexRangeError(f"对角阵阶数必须 ≥ 1，收到 {order}")
    return (order + 1) // 2


def D_matrix(order: int) -> List[Rational]:
    """D^order = Diag[d_{order,1}, …, d_{order,⌈order/2⌉}]（标量对角）"""
    return [d_coeff(order, l) for l in range(1, _diag_width(order) + 1)]


def C_matrix(order: int) -> List[Rational]:
    """C^order = Diag[c_{order,1}, …, c_{order,⌈order/2⌉}]（标量对角）"""
    return [c_coeff(order, l) for l in range(1, _diag_width(order) + 1)]


def c_closed_form(m: int, l: int) -> Rational:
    """c 格式的二项式闭式 C(m, l−1) / C(2(l−1), l−1)"""
    return Rational(binomial(m, l - 1), binomial(2 * (l - 1), l - 1))


def gamma_diag(k: int) -> List[Rational]:
    """Γ^k = Diag[Γ_k^k, …, Γ_1^k]，Γ_i^k = C(k+i, i−1)"""
    if k < 1:
        raise IndexRangeError(f"Γ^k 要求 k ≥ 1，收到 {k}")
    return [Rational(binomial(k + i, i - 1)) for i in range(k, 0, -1)]


def hurwitz_gamma(t: int, k: int, l: int) -> Rational:
    """γ_t^{2k+l} = C(2k+1+l, t) / C(2t, t)"""
    if not 0 <= t <= k or l < 0:
        raise IndexRangeError(f"γ 下标越界: t={t}, k={k}, l={l}")
    return Rational(binomial(2 * k + 1 + l, t), binomial(2 * t, t))
