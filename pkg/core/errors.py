"""finecone 异常体系

每个异常类带有 ``exit_code``，CLI 据此决定进程退出码：
0 正常，1 非横截，2 输入错误，3 数值失败。
"""
from typing import Any, List, Optional


class FineConeError(Exception):
    """所有 finecone 异常的基类"""
    exit_code = 3


class DimensionError(FineConeError):
    """维度或参数个数不匹配"""
    exit_code = 2


class JetOrderError(FineConeError):
    """射的阶数不足"""
    exit_code = 2


class IndexRangeError(FineConeError):
    """格式表或算子带的下标越界"""
    exit_code = 2


class ProblemFileError(FineConeError):
    """问题文件解析错误

    Args:
        message: 错误说明
        location: 出错位置（JSON 路径或行号）
    """
    exit_code = 2

    def __init__(self, message: str, location: Optional[str] = None):
        self.location = location
        super().__init__(f"{location}: {message}" if location else message)


class CurveDirectionExhausted(FineConeError):
    """曲线方向无法避开补空间（核为零空间）"""
    exit_code = 3

    def __init__(self, level: int):
        self.level = level
        super().__init__(f"第 {level} 层的核为零空间，z̄_l 无法避开补空间 (curve direction exhausted)")


class NotTransversalError(FineConeError):
    """需要横截分解却得到非横截分解"""
    exit_code = 1


class ApproximationError(FineConeError):
    """曲线不满足 2k 阶近似"""
    exit_code = 3

    def __init__(self, first_nonzero: int, target: int):
        self.first_nonzero = first_nonzero
        self.target = target
        super().__init__(f"T^{first_nonzero} ≠ 0，未达到 {target} 阶近似")


class NewtonDivergence(FineConeError):
    """Newton 迭代不收敛，携带最后一次迭代值"""
    exit_code = 3

    def __init__(self, eps: float, last_iterate: List[float], residual: float):
        self.eps = eps
        self.last_iterate = last_iterate
        self.residual = residual
        super().__init__(f"ε={eps:.6g} 处 Newton 不收敛，残差 {residual:.3e}")


class ConeExitError(FineConeError):
    """解离开了配置的锥盒 U"""
    exit_code = 3

    def __init__(self, eps: float, norm: Any, bound: float):
        self.eps = eps
        self.size = float(norm)
        super().__init__(f"ε={eps:.6g} 处锥盒度量 {float(norm):.3e} 超出上界 {bound:.3e}")


class InvalidJetError(FineConeError):
    """射数据不合法（例如含常数项，违反 G[0] = 0）"""
    exit_code = 2


class DegenerateDeterminantError(FineConeError):
    """所有采样点上的行列式都低于浮点下限，无法确定符号"""
    exit_code = 3


class InconsistentSystemError(FineConeError):
    """待定系数方程组不相容"""
    exit_code = 3
