"""浮点校验层：锥映射求值、爆破余项的 Newton 续算、斜率拟合与水平集

爆破余项 H(ε, n^c, p) = ε^{−(2k+1)}·G[Z_k(ε, n^c, p)] 的求值采用混合精度：
Newton 迭代本身用 numpy 双精度，但 G、Z、Jacobian 和 A_ε 都把浮点参数精确转成
有理数后求值，再转回浮点，避免 ε^{−(2k+1)} 放大抵消误差。
"""
import threading
from dataclasses import dataclass, field, replace
from enum import Enum
from math import factorial
from queue import Empty, Queue
from typing import Callable, Dict, List, Optional, Sequence, TextIO, Tuple

import numpy as np
from sympy import ImmutableMatrix, Matrix, Rational

from core.analysis import chi
from core.config_manager import ConfigManager
from core.errors import (ApproximationError, ConeExitError, DimensionError, FineConeError,
                         NewtonDivergence, NotTransversalError)
from core.linalg import block_to_matrix, hstack
from core.logger import log
from core.multijet import (EXACT, FLOAT, CurveJet, compose_curve, eval_map, is_zero_vector, jacobian, to_exact,
                           to_float_array)
from core.resolution import ResolutionResult, cone_operators


@dataclass(frozen=True)
class ContinuationSettings:
    """续算与拟合参数，默认值与 config/default_config.json 一致"""
    eps_max: float = 0.1
    eps_min: float = 1e-4
    points: int = 25
    both_signs: bool = True
    max_iter: int = 50
    max_halvings: int = 8
    tol: float = 1e-12
    cone_box: float = 1e6
    slope_tol: float = 0.1
    residual_bound: float = 0.05
    rel_tol: float = 1e-12
    det_floor: float = 1e-280
    threads: int = 1

    @classmethod
    def from_config(cls, config: Optional[ConfigManager] = None) -> 'ContinuationSettings':
        config = config or ConfigManager()
        return cls(
            eps_max=float(config.get("grid.eps_max", cls.eps_max)),
            eps_min=float(config.get("grid.eps_min", cls.eps_min)),
            points=int(config.get("grid.points", cls.points)),
            both_signs=bool(config.get("grid.both_signs", cls.both_signs)),
            max_iter=int(config.get("newton.max_iter", cls.max_iter)),
            max_halvings=int(config.get("newton.max_halvings", cls.max_halvings)),
            tol=float(config.get("newton.tol", cls.tol)),
            cone_box=float(config.get("newton.cone_box", cls.cone_box)),
            slope_tol=float(config.get("fit.slope_tol", cls.slope_tol)),
            residual_bound=float(config.get("fit.residual_bound", cls.residual_bound)),
            rel_tol=float(config.get("float.rel_tol", cls.rel_tol)),
            det_floor=float(config.get("float.det_floor", cls.det_floor)),
            threads=config.threads(),
        )

    def with_grid(self, eps_max: float, eps_min: float, points: int) -> 'ContinuationSettings':
        if not (eps_max > eps_min > 0) or points < 2:
            raise DimensionError(f"ε 网格不合法: {eps_max}:{eps_min}:{points}")
        return replace(self, eps_max=eps_max, eps_min=eps_min, points=points)

    def grid(self, sign: int = 1) -> List[float]:
        """严格递减的几何网格 eps_max → eps_min（sign = −1 时取负）"""
        return [sign * float(e) for e in np.geomspace(self.eps_max, self.eps_min, self.points)]

    def signed_grids(self) -> List[List[float]]:
        return [self.grid(1), self.grid(-1)] if self.both_signs else [self.grid(1)]


def _as_exact_vector(values, n: int) -> ImmutableMatrix:
    if isinstance(values, (Matrix, ImmutableMatrix)):
        vec = ImmutableMatrix(values)
    else:
        vec = ImmutableMatrix([to_exact(float(v)) if isinstance(v, (float, np.floating)) else to_exact(v)
                               for v in np.asarray(values, dtype=object).reshape(-1)])
    if vec.rows != n:
        raise DimensionError(f"向量维数 {vec.rows} 与期望 {n} 不一致")
    return vec


class BlownUpMap:
    """以 N^c 坐标 c 为未知量的爆破余项 H(ε, c, p)

    Args:
        res: 横截分解
        check_approximation: 是否要求 T¹ = … = T^{2k} = 0
        relative: True 时求 ε^{−(2k+1)}(G[Z] − G[z₀(ε)])（水平集用）
    """

    def __init__(self, res: ResolutionResult, check_approximation: bool = True, relative: bool = False):
        if not res.transversal:
            raise NotTransversalError(f"k={res.k} 的分解不横截")
        self.res = res
        self.jet = res.jet
        self.k = res.k
        self.order = 2 * res.k + 1
        self.relative = relative
        self.ops = cone_operators(res)
        self.basis = res.nc_basis()
        self.dim = self.basis.cols
        if check_approximation:
            low = compose_curve(self.jet, res.curve, 2 * self.k)
            first = next((i for i, t in enumerate(low, start=1) if not is_zero_vector(t)), None)
            if first is not None:
                raise ApproximationError(first, 2 * self.k)
        if self.jet.order is None or self.jet.order >= self.order:
            self._t_odd = compose_curve(self.jet, res.curve, self.order)[self.order - 1]
        else:
            self._t_odd = ImmutableMatrix.zeros(self.jet.m, 1)
            log.warning(f"射阶不足 {self.order}，ε=0 极限中略去 T^{self.order}")
        self._limit_jac = ImmutableMatrix(self.ops.l_hat * self.basis)
        self._hat_float = to_float_array(block_to_matrix(self.ops.m_hat))
        self._basis_float = to_float_array(self.basis) if self.dim else np.zeros(((self.k + 1) * self.jet.n, 0))

    def stack(self, coords, p=None) -> ImmutableMatrix:
        """(n₁^c, …, n_{k+1}^c + p) ∈ B^{k+1}"""
        n = self.jet.n
        c = _as_exact_vector(coords, self.dim) if self.dim else ImmutableMatrix.zeros(0, 1)
        vec = Matrix(self.basis * c) if self.dim else Matrix.zeros((self.k + 1) * n, 1)
        if p is not None:
            vec[self.k * n:, 0] = vec[self.k * n:, 0] + _as_exact_vector(p, n)
        return ImmutableMatrix(vec)

    def correction(self, eps, coords, p=None) -> ImmutableMatrix:
        """A_ε·stack，精确"""
        return ImmutableMatrix(self.ops.a_eps(to_exact(eps)) * self.stack(coords, p))

    def point(self, eps, coords, p=None) -> ImmutableMatrix:
        return ImmutableMatrix(self.res.curve.point(to_exact(eps)) + self.correction(eps, coords, p))

    def scaled_displacement(self, eps, coords, p=None) -> float:
        """锥盒度量 ‖ε^{−(k+1)}·A_ε·stack‖（ε = 0 处取极限），与 N^c 坐标里的阶乘因子无关"""
        k, n = self.k, self.jet.n
        e = float(eps)
        if e == 0:
            weights = [0.0] * k + [1.0 / factorial(k + 1)]
        else:
            weights = [np.sign(e) ** (2 * k + 1 - r) * abs(e) ** (k - r) / factorial(2 * k + 1 - r)
                       for r in range(k + 1)]
        row = np.hstack([np.eye(n) * w for w in weights]) @ self._hat_float
        stack = self._basis_float @ np.asarray(coords, dtype=float).reshape(-1)
        if p is not None:
            stack[k * n:] += to_float_array(_as_exact_vector(p, n)).reshape(-1)
        return float(np.linalg.norm(row @ stack))

    def value(self, eps, coords, p=None) -> np.ndarray:
        e = to_exact(eps)
        if e == 0:
            if self.relative:
                limit = self.ops.l_hat * self.stack(coords, p)
            else:
                limit = self._t_odd / factorial(self.order) + self.ops.l_hat * self.stack(coords, p)
            return to_float_array(limit).reshape(-1)
        g = eval_map(self.jet, self.point(e, coords, p))
        if self.relative:
            g = g - eval_map(self.jet, self.res.curve.point(e))
        return to_float_array(g / e ** self.order).reshape(-1)

    def jac_coords(self, eps, coords, p=None) -> np.ndarray:
        """∂H/∂c（m×dim N^c）"""
        e = to_exact(eps)
        if e == 0:
            return to_float_array(self._limit_jac)
        full = jacobian(self.jet, self.point(e, coords, p)) * self.ops.a_eps(e) * self.basis
        return to_float_array(full / e ** self.order)

    def jac_param(self, eps, coords, p=None) -> np.ndarray:
        """∂H/∂p（m×n），p 加在最后一块上"""
        n = self.jet.n
        e = to_exact(eps)
        if e == 0:
            return to_float_array(self.ops.l_hat[:, self.k * n:])
        full = jacobian(self.jet, self.point(e, coords, p)) * self.ops.a_eps(e)[:, self.k * n:]
        return to_float_array(full / e ** self.order)

    def base_solution(self, p=None) -> np.ndarray:
        """ε = 0 处精确求解 L̂·stack = −T^{2k+1}/(2k+1)!"""
        if self.dim == 0:
            return np.zeros(0)
        rhs = -(self._t_odd / factorial(self.order))
        if p is not None:
            rhs = rhs - self.ops.l_hat * self.stack(np.zeros(self.dim), p)
        solution = Matrix(self._limit_jac).solve(Matrix(rhs))
        return to_float_array(solution).reshape(-1)


class PointStatus(Enum):
    """网格点求解状态"""
    PENDING = "pending"
    CONVERGED = "converged"
    DIVERGED = "diverged"
    EXITED = "exited"


@dataclass
class NewtonResult:
    coords: np.ndarray
    residual: float
    iterations: int


def newton_solve(fun: Callable[[np.ndarray], np.ndarray], jac: Callable[[np.ndarray], np.ndarray],
                 start: np.ndarray, settings: ContinuationSettings, eps: float = 0.0,
                 box: Optional[Callable[[np.ndarray], float]] = None) -> NewtonResult:
    """带步长减半的 Newton 迭代

    收敛判据 ‖F‖ < tol·max(1, ‖F′‖·‖x‖)。

    Args:
        box: 锥盒度量，默认 ‖x‖；超过 settings.cone_box 视为离开锥

    Raises:
        NewtonDivergence: 迭代次数用尽或减半后残差仍不下降
        ConeExitError: 迭代点超出锥盒
    """
    measure = box or (lambda v: float(np.linalg.norm(v)))
    x = np.array(start, dtype=float)
    f = fun(x)
    norm = float(np.linalg.norm(f))
    for iteration in range(settings.max_iter + 1):
        j = jac(x)
        scale = max(1.0, float(np.linalg.norm(j, 2)) * float(np.linalg.norm(x))) if j.size else 1.0
        if norm < settings.tol * scale:
            return NewtonResult(x, norm, iteration)
        if iteration == settings.max_iter:
            break
        step = np.linalg.lstsq(j, -f, rcond=None)[0]
        t = 1.0
        for _ in range(settings.max_halvings + 1):
            trial = x + t * step
            f_trial = fun(trial)
            trial_norm = float(np.linalg.norm(f_trial))
            if trial_norm < norm:
                break
            t /= 2
        else:
            raise NewtonDivergence(eps, x.tolist(), norm)
        x, f, norm = trial, f_trial, trial_norm
        size = measure(x)
        if size > settings.cone_box:
            raise ConeExitError(eps, size, settings.cone_box)
    raise NewtonDivergence(eps, x.tolist(), norm)


@dataclass
class GridPoint:
    """一个 ε 网格点上的解"""
    eps: float
    status: PointStatus = PointStatus.PENDING
    coords: Optional[np.ndarray] = None
    point: Optional[np.ndarray] = None
    residual_h: float = float("nan")
    residual_g: float = float("nan")
    iterations: int = 0
    error: Optional[FineConeError] = None


@dataclass(frozen=True)
class IdentityFit:
    """z(ε) − z₀(ε) 的 Laurent 最小二乘拟合

    Attributes:
        coefficients: ε⁰…ε^k 的系数（(k+1)×n）
        max_abs: 系数绝对值的最大值
        noise: 各系数由数据舍入误差传播来的上界
        accept: 每个系数都满足 |a_j| < threshold + noise_j
    """
    coefficients: np.ndarray
    max_abs: float
    accept: bool
    threshold: float = 1e-8
    noise: Optional[np.ndarray] = None


def identity_order_check(eps_values: Sequence[float], displacements: Sequence[np.ndarray], k: int,
                         threshold: float = 1e-8, tail: int = 3,
                         noise: Optional[Sequence[float]] = None) -> IdentityFit:
    """拟合 (z − z₀)/ε^{k+1} = Σ_{j≤k} a_j ε^{j−k−1} + Σ_t b_t ε^t，a_j 即 z − z₀ 中 ε^j 的系数

    Args:
        noise: 每个样本位移的绝对误差界；给出时按伪逆逐项传播到 a_j
    """
    eps = np.asarray(eps_values, dtype=float)
    data = np.asarray([np.asarray(d, dtype=float).reshape(-1) for d in displacements])
    tail = max(0, min(tail, len(eps) - (k + 1) - 1))
    powers = [j - k - 1 for j in range(k + 1)] + list(range(tail + 1))
    design = np.column_stack([eps ** float(p) for p in powers])
    norms = np.linalg.norm(design, axis=0)
    pinv = np.linalg.pinv(design / norms) / norms[:, None]
    scale = np.abs(eps) ** float(k + 1)
    coefficients = (pinv @ (data / scale[:, None]))[:k + 1]
    if noise is None:
        bound = np.zeros(k + 1)
    else:
        bound = np.abs(pinv[:k + 1]) @ (np.asarray(noise, dtype=float) / scale)
    max_abs = float(np.max(np.abs(coefficients))) if coefficients.size else 0.0
    accept = bool(np.all(np.abs(coefficients) < threshold + bound[:, None]))
    return IdentityFit(coefficients=coefficients, max_abs=max_abs, accept=accept, threshold=threshold, noise=bound)


@dataclass
class SolutionCurve:
    """newton_continue 的结果"""
    k: int
    p: Optional[Sequence]
    points: List[GridPoint]
    identity: Optional[IdentityFit] = None

    @property
    def converged(self) -> List[GridPoint]:
        return [pt for pt in self.points if pt.status == PointStatus.CONVERGED]

    @property
    def failures(self) -> List[GridPoint]:
        return [pt for pt in self.points if pt.status != PointStatus.CONVERGED]

    def samples(self) -> List[Tuple[float, np.ndarray]]:
        return [(pt.eps, pt.point) for pt in self.converged]

    def identity_fit(self, base: CurveJet) -> Optional[IdentityFit]:
        """用收敛点本身检验 z(ε) − z₀(ε) 在 ε^k 之前消失

        位移由浮点解点精确减去 z₀(ε) 得到，误差界取解点各分量的舍入间隔。
        两个半锥分别拟合，返回较差的一个；样本不足时返回 None。
        """
        fits = []
        for sign in (1, -1):
            half = [pt for pt in self.converged if np.sign(pt.eps) == sign]
            if len(half) < self.k + 3:
                continue
            displacements, noise = [], []
            for pt in half:
                exact = _as_exact_vector(pt.point, len(pt.point)) - base.point(to_exact(pt.eps))
                displacement = to_float_array(exact).reshape(-1)
                displacements.append(displacement)
                noise.append(float(np.sum(np.spacing(np.abs(pt.point)) + np.spacing(np.abs(displacement)))))
            fits.append(identity_order_check([pt.eps for pt in half], displacements, self.k, noise=noise))
        if not fits:
            return None
        worst = max(fits, key=lambda f: 0 if f.accept else f.max_abs)
        if not worst.accept:
            log.warning(f"z(ε) − z₀(ε) 的低阶系数未消失: max={worst.max_abs:.2e}")
        return worst

    def to_dict(self) -> Dict:
        return {
            "k": self.k,
            "points": len(self.points),
            "converged": len(self.converged),
            "max_residual_g": max((pt.residual_g for pt in self.converged), default=None),
            "max_iterations": max((pt.iterations for pt in self.points), default=0),
            "failures": [{"eps": pt.eps, "status": pt.status.value, "error": str(pt.error)} for pt in self.failures],
            "identity_max_coefficient": None if self.identity is None else self.identity.max_abs,
            "identity_accept": None if self.identity is None else self.identity.accept,
        }


class _RefineWorkers:
    """把预测好的网格点交给若干工作线程细化，结果按网格顺序写回"""

    def __init__(self, threads: int):
        self.threads = max(1, threads)
        self.queue: Queue = Queue()

    def run(self, points: List[GridPoint], guesses: List[np.ndarray], refine: Callable[[GridPoint, np.ndarray], None]):
        for item in zip(points, guesses):
            self.queue.put(item)

        def work():
            while True:
                try:
                    point, guess = self.queue.get_nowait()
                except Empty:
                    return
                try:
                    refine(point, guess)
                finally:
                    self.queue.task_done()

        workers = [threading.Thread(target=work, daemon=True) for _ in range(self.threads)]
        for worker in workers:
            worker.start()
        for worker in workers:
            worker.join()


def newton_continue(res: ResolutionResult, grid: Optional[Sequence[float]] = None, p=None,
                    settings: Optional[ContinuationSettings] = None, strict: bool = True) -> SolutionCurve:
    """在 ε 网格上续算 H(ε, ·, p) = 0 的解 z(ε, p)

    从 ε = 0 的精确基解出发按 |ε| 递增做顺序预测，再由工作线程把每个点细化到收敛。
    锥盒按 ``BlownUpMap.scaled_displacement`` 度量。

    Args:
        res: 横截分解
        grid: ε 值；默认取配置网格（两侧）
        p: P_{k+1} 中的参数
        settings: 续算参数
        strict: True 时任一网格点失败即抛出该点的异常

    Raises:
        NotTransversalError, ApproximationError, NewtonDivergence, ConeExitError
    """
    settings = settings or ContinuationSettings.from_config()
    blown = BlownUpMap(res)
    if p is not None and not res.p_space.contains(_as_exact_vector(p, res.n)):
        raise DimensionError(f"p 不属于 P_{res.k + 1}")
    values = list(grid) if grid is not None else [e for g in settings.signed_grids() for e in g]
    points = [GridPoint(eps=float(e)) for e in values]
    base = blown.base_solution(p)
    predictor_settings = replace(settings, tol=max(settings.tol, 1e-8))

    def solve(eps: float, start: np.ndarray, conf: ContinuationSettings) -> NewtonResult:
        return newton_solve(lambda c: blown.value(eps, c, p), lambda c: blown.jac_coords(eps, c, p), start, conf, eps,
                            box=lambda c: blown.scaled_displacement(eps, c, p))

    # 顺序预测：每个半锥按 |ε| 递增
    guesses: Dict[int, np.ndarray] = {}
    for sign in (1, -1):
        order = sorted((i for i, pt in enumerate(points) if np.sign(pt.eps) == sign or (sign == 1 and pt.eps == 0)),
                       key=lambda i: abs(points[i].eps))
        guess = base
        for i in order:
            guesses[i] = guess
            try:
                guess = solve(points[i].eps, guess, predictor_settings).coords
            except FineConeError as e:
                log.debug(f"ε={points[i].eps:.3e} 预测失败: {e}")

    def refine(point: GridPoint, guess: np.ndarray):
        try:
            result = solve(point.eps, guess, settings)
            exact_point = blown.point(point.eps, result.coords, p)
            point.coords = result.coords
            point.point = to_float_array(exact_point).reshape(-1)
            point.residual_h = result.residual
            point.residual_g = float(np.linalg.norm(to_float_array(eval_map(res.jet, exact_point))))
            point.iterations = result.iterations
            point.status = PointStatus.CONVERGED
            log.debug(f"ε={point.eps:.3e}: {result.iterations} 次迭代收敛，‖H‖={result.residual:.2e}")
        except ConeExitError as e:
            point.status, point.error = PointStatus.EXITED, e
            log.warning(f"ε={point.eps:.3e}: {e}")
        except NewtonDivergence as e:
            point.status, point.error = PointStatus.DIVERGED, e
            point.coords = np.asarray(e.last_iterate)
            log.warning(f"ε={point.eps:.3e}: {e}")
        except Exception as e:
            # 数值库内部错误（奇异矩阵、NaN 迭代点等）按发散处理，原始异常挂在 __cause__ 上
            wrapped = NewtonDivergence(point.eps, np.asarray(guess, dtype=float).tolist(), float("nan"))
            wrapped.__cause__ = e
            point.status, point.error = PointStatus.DIVERGED, wrapped
            point.coords = np.asarray(guess, dtype=float)
            log.warning(f"ε={point.eps:.3e}: 细化出错 {type(e).__name__}: {e}")

    _RefineWorkers(settings.threads).run(points, [guesses[i] for i in range(len(points))], refine)

    curve = SolutionCurve(k=res.k, p=p, points=points)
    if strict and curve.failures:
        raise curve.failures[0].error
    curve.identity = curve.identity_fit(res.curve)
    log.info(f"续算完成: {len(curve.converged)}/{len(points)} 个网格点收敛")
    return curve


def cone_point(res: ResolutionResult, eps, nc_blocks: Sequence, p=None, mode: str = FLOAT):
    """Z_k(ε, n₁^c, …, n_{k+1}^c, p) = z₀(ε) + A_ε·(n₁^c, …, n_{k+1}^c + p)

    Raises:
        DimensionError: 块的个数或维数不对，或者块不在对应子空间中
    """
    blown_coords = nc_coordinates(res, nc_blocks, mode)
    if p is not None:
        _check_member(res.p_space, p, f"P_{res.k + 1}", mode)
    ops = cone_operators(res)
    stack_exact = _stack(res, blown_coords, p)
    if mode == FLOAT:
        z0 = res.curve.point(eps, FLOAT)
        return z0 + ops.a_eps(eps, FLOAT) @ to_float_array(stack_exact).reshape(-1)
    return ImmutableMatrix(res.curve.point(to_exact(eps)) + ops.a_eps(to_exact(eps)) * stack_exact)


def _stack(res: ResolutionResult, coords, p=None) -> ImmutableMatrix:
    n, k = res.n, res.k
    basis = res.nc_basis()
    vec = Matrix(basis * coords) if basis.cols else Matrix.zeros((k + 1) * n, 1)
    if p is not None:
        vec[k * n:, 0] = vec[k * n:, 0] + _as_exact_vector(p, n)
    return ImmutableMatrix(vec)


def _check_member(space, vec, name: str, mode: str):
    if mode == FLOAT:
        v = np.asarray(vec, dtype=float).reshape(-1)
        if space.dim == 0:
            ok = np.linalg.norm(v) == 0
        else:
            basis = to_float_array(space.basis)
            fit = basis @ np.linalg.lstsq(basis, v, rcond=None)[0]
            ok = np.linalg.norm(fit - v) <= 1e-12 * max(1.0, np.linalg.norm(v))
    else:
        ok = space.contains(_as_exact_vector(vec, space.ambient))
    if not ok:
        raise DimensionError(f"向量不属于 {name}")


def nc_coordinates(res: ResolutionResult, nc_blocks: Sequence, mode: str = FLOAT) -> ImmutableMatrix:
    """把 (n₁^c, …, n_{k+1}^c) 换成 N^c 基下的精确坐标"""
    if len(nc_blocks) != res.k + 1:
        raise DimensionError(f"需要 {res.k + 1} 个 n^c 块，收到 {len(nc_blocks)}")
    coords = []
    for lv, block in zip(res.levels, nc_blocks):
        _check_member(lv.kernel_complement, block, f"N_{lv.index}^c", mode)
        sub = lv.kernel_complement
        if sub.dim == 0:
            continue
        vec = _as_exact_vector(block, res.n)
        if mode == FLOAT:
            local = np.linalg.lstsq(to_float_array(sub.basis), to_float_array(vec).reshape(-1), rcond=None)[0]
            coords.extend(to_exact(float(x)) for x in local)
        else:
            coords.extend(sub.coordinates(vec))
    return ImmutableMatrix(coords) if coords else ImmutableMatrix.zeros(0, 1)


def remainder_H(res: ResolutionResult, eps, nc_blocks: Sequence, p=None, mode: str = EXACT) -> np.ndarray:
    """爆破余项 H(ε, n^c, p)；ε = 0 时为 T^{2k+1}/(2k+1)! + L̂·stack

    mode 只决定 n^c 块与 p 的成员检查方式（精确或带容差），求值总是混合精度。

    Raises:
        ApproximationError: 未达到 2k 阶逼近
    """
    blown = BlownUpMap(res)
    coords = nc_coordinates(res, nc_blocks, mode)
    if p is not None:
        _check_member(res.p_space, p, f"P_{res.k + 1}", mode)
    return blown.value(eps, coords, p)


# ---------------------------------------------------------------------------
# 斜率拟合与速率表
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SlopeFit:
    """log10|量| 对 log10|ε| 的最小二乘斜率

    Attributes:
        name: 量的名称
        slope: 拟合斜率
        residual: 拟合残差（均方根，log10 单位）
        nearest: 最近的整数
        accept: |slope − nearest| < slope_tol 且 residual < residual_bound；
            at_least 型拟合改为 slope ≥ expected − slope_tol
        expected: 期望指数
        at_least: 期望是下界
        exact_zero: 量在所有网格点上精确为零
    """
    name: str
    slope: float
    residual: float
    nearest: int
    accept: bool
    expected: Optional[int] = None
    at_least: bool = False
    exact_zero: bool = False
    points: int = 0

    @property
    def matches_expected(self) -> bool:
        if self.expected is None:
            return self.accept
        if self.exact_zero:
            return self.at_least
        if self.at_least:
            return self.accept
        return self.accept and self.nearest == self.expected

    def to_dict(self) -> Dict:
        return {"name": self.name, "slope": None if self.exact_zero else round(self.slope, 6),
                "residual": None if self.exact_zero else round(self.residual, 6), "nearest": self.nearest,
                "expected": self.expected, "at_least": self.at_least, "accept": self.accept,
                "exact_zero": self.exact_zero, "matches_expected": self.matches_expected}


def fit_slope(name: str, eps_values: Sequence[float], values: Sequence[float], settings: ContinuationSettings,
              expected: Optional[int] = None, at_least: bool = False) -> SlopeFit:
    eps = np.abs(np.asarray(eps_values, dtype=float))
    vals = np.abs(np.asarray(values, dtype=float))
    if len(vals) and np.all(vals == 0):
        return SlopeFit(name, float("inf"), 0.0, 0, at_least, expected, at_least, True, len(vals))
    mask = np.isfinite(vals) & (vals > 0)
    if mask.sum() < 3:
        log.warning(f"{name}: 有效点不足 3 个，无法拟合")
        return SlopeFit(name, float("nan"), float("inf"), 0, False, expected, at_least, False, int(mask.sum()))
    x, y = np.log10(eps[mask]), np.log10(vals[mask])
    slope, intercept = np.polyfit(x, y, 1)
    residual = float(np.sqrt(np.mean((y - (slope * x + intercept)) ** 2)))
    nearest = int(round(slope))
    if at_least and expected is not None:
        accept = slope >= expected - settings.slope_tol and residual < settings.residual_bound
    else:
        accept = abs(slope - nearest) < settings.slope_tol and residual < settings.residual_bound
    if not accept:
        log.warning(f"{name}: 斜率 {slope:.3f} 拟合未通过（残差 {residual:.3f}）")
    return SlopeFit(name, float(slope), residual, nearest, bool(accept), expected, at_least, False, int(mask.sum()))


@dataclass
class TraceRow:
    eps: float
    residual: float
    abs_det: float
    inv_norm: float
    dnorms: Tuple[float, ...]
    lin_residual: float


@dataclass
class TraceTable:
    """ε 网格上的测量值"""
    k: int
    rows: List[TraceRow] = field(default_factory=list)
    grid_note: str = ""

    @property
    def columns(self) -> List[str]:
        return ["eps", "residual", "abs_det", "inv_norm"] + [f"dnorm_{i}" for i in range(1, self.k + 2)] + ["lin_residual"]

    def as_array(self) -> np.ndarray:
        return np.array([[r.eps, r.residual, r.abs_det, r.inv_norm, *r.dnorms, r.lin_residual] for r in self.rows],
                        dtype=float).reshape(len(self.rows), len(self.columns))

    def column(self, name: str) -> np.ndarray:
        return self.as_array()[:, self.columns.index(name)]

    def write_csv(self, stream: TextIO):
        """表头注释行 + 列名行 + 17 位有效数字的数据"""
        if self.grid_note:
            stream.write(f"# {self.grid_note}\n")
        stream.write(",".join(self.columns) + "\n")
        if self.rows:
            np.savetxt(stream, self.as_array(), fmt="%.17g", delimiter=",")


@dataclass
class TraceResult:
    table: TraceTable
    fits: Dict[str, SlopeFit]
    curve: Optional[SolutionCurve] = None

    def to_dict(self) -> Dict:
        return {"fits": {name: fit.to_dict() for name, fit in self.fits.items()},
                "newton": None if self.curve is None else self.curve.to_dict()}


def _nc_restricted(res: ResolutionResult, point: ImmutableMatrix) -> ImmutableMatrix:
    basis = hstack([lv.kernel_complement.basis for lv in res.levels if lv.kernel_complement.dim], res.n)
    return ImmutableMatrix(jacobian(res.jet, point) * basis)


def _test_coords(dim: int) -> ImmutableMatrix:
    return ImmutableMatrix([Rational(1, dim)] * dim) if dim else ImmutableMatrix.zeros(0, 1)


def rate_trace(res: ResolutionResult, grid: Optional[Sequence[float]] = None,
               settings: Optional[ContinuationSettings] = None, with_solutions: bool = True) -> TraceResult:
    """测量各速率律并拟合斜率

    列：ε、解曲线残差 ‖G[z(ε)]‖、|det G_{N^c}[z₀(ε)]|、‖G_{N^c}[z₀(ε)]⁻¹‖、
    ‖G′[z₀(ε)]∘A_ε^i‖/‖A_ε^i‖（i = 1…k+1）、线性化残差。
    """
    settings = settings or ContinuationSettings.from_config()
    if not res.transversal:
        raise NotTransversalError(f"k={res.k} 的分解不横截")
    eps_values = list(grid) if grid is not None else settings.grid(1)
    eps_values = sorted({abs(float(e)) for e in eps_values if e != 0}, reverse=True)
    k, order = res.k, 2 * res.k + 1
    ops = cone_operators(res)
    blown = BlownUpMap(res, check_approximation=False)
    test_stack = blown.stack(_test_coords(blown.dim))

    curve = None
    residuals = {e: float("nan") for e in eps_values}
    if with_solutions:
        try:
            curve = newton_continue(res, eps_values, settings=settings, strict=False)
            for pt in curve.converged:
                residuals[abs(pt.eps)] = pt.residual_g
        except ApproximationError as e:
            log.warning(f"未达到 2k 阶逼近，残差列留空: {e}")

    table = TraceTable(k=k, grid_note=f"grid {eps_values[0]:.6g}:{eps_values[-1]:.6g}:{len(eps_values)}")
    for eps in eps_values:
        e = to_exact(eps)
        z0 = res.curve.point(e)
        restricted = _nc_restricted(res, z0)
        det = restricted.det()
        abs_det = abs(complex(det))
        inv_norm = float(np.linalg.norm(to_float_array(restricted.inv()), 2)) if det != 0 else float("inf")
        a_eps = ops.a_eps(e)
        g_prime = jacobian(res.jet, z0)
        dnorms = []
        for i, lv in enumerate(res.levels):
            if lv.kernel_complement.dim == 0:
                dnorms.append(float("nan"))
                continue
            directions = a_eps[:, i * res.n:(i + 1) * res.n] * lv.kernel_complement.basis
            numerator = float(np.linalg.norm(to_float_array(g_prime * directions), 2))
            denominator = float(np.linalg.norm(to_float_array(directions), 2))
            dnorms.append(numerator / denominator if denominator else float("nan"))
        z_test = z0 + a_eps * test_stack
        lin = eval_map(res.jet, z_test) - eval_map(res.jet, z0) - e ** order * (ops.l_hat * test_stack)
        lin_residual = float(np.linalg.norm(to_float_array(lin)))
        table.rows.append(TraceRow(eps, residuals[eps], abs_det, inv_norm, tuple(dnorms), lin_residual))

    chi_value = chi(res)
    fits = {
        "abs_det": fit_slope("abs_det", eps_values, table.column("abs_det"), settings, expected=chi_value),
        "inv_norm": fit_slope("inv_norm", eps_values, table.column("inv_norm"), settings, expected=-k),
        "lin_residual": fit_slope("lin_residual", eps_values, table.column("lin_residual"), settings,
                                  expected=2 * k + 2, at_least=True),
    }
    for i in range(1, k + 2):
        column = table.column(f"dnorm_{i}")
        if np.all(np.isnan(column)):
            continue
        fits[f"dnorm_{i}"] = fit_slope(f"dnorm_{i}", eps_values, column, settings, expected=i - 1)
    log.info("速率拟合: " + ", ".join(f"{name}={fit.slope:.3f}" for name, fit in fits.items() if not fit.exact_zero))
    return TraceResult(table=table, fits=fits, curve=curve)


# ---------------------------------------------------------------------------
# 水平集、推论校验与空锥探测
# ---------------------------------------------------------------------------

def level_set(res: ResolutionResult, eps: float, n_top, settings: Optional[ContinuationSettings] = None,
              start: Optional[np.ndarray] = None) -> np.ndarray:
    """解 G[Z_k(ε, n^c, n_{k+1})] = G[z₀(ε)]，返回 n̄^c(ε, n_{k+1}) 的 N^c 坐标

    Raises:
        NewtonDivergence: Newton 不收敛
    """
    settings = settings or ContinuationSettings.from_config()
    if eps == 0:
        raise DimensionError("水平集要求 ε ≠ 0")
    if not res.top_kernel.contains(_as_exact_vector(n_top, res.n)):
        raise DimensionError(f"n_{res.k + 1} 不属于 N_{res.k + 1}")
    blown = BlownUpMap(res, check_approximation=False, relative=True)
    guess = np.zeros(blown.dim) if start is None else np.asarray(start, dtype=float)
    result = newton_solve(lambda c: blown.value(eps, c, n_top), lambda c: blown.jac_coords(eps, c, n_top),
                          guess, settings, eps,
                          box=lambda c: blown.scaled_displacement(eps, c, n_top))
    return result.coords


def level_set_point(res: ResolutionResult, eps: float, coords: np.ndarray, n_top) -> np.ndarray:
    """水平集坐标对应的 B 中的点"""
    blown = BlownUpMap(res, check_approximation=False, relative=True)
    return to_float_array(blown.point(eps, coords, n_top)).reshape(-1)


@dataclass(frozen=True)
class CorollaryReport:
    """给定 U = N^c、V = N_{k+1} 时的校验

    Attributes:
        inverse_fit: ‖G_{N^c}[z₀(ε)]⁻¹‖ 的斜率（期望 −k）
        tangent_fit: 水平集切向偏离 N_{k+1} 的程度（期望斜率 ≥ 1）；N_{k+1} = {0} 时为 None
    """
    inverse_fit: SlopeFit
    tangent_fit: Optional[SlopeFit]

    @property
    def accept(self) -> bool:
        return self.inverse_fit.matches_expected and (self.tangent_fit is None or self.tangent_fit.matches_expected)


def corollary_check(res: ResolutionResult, grid: Optional[Sequence[float]] = None,
                    settings: Optional[ContinuationSettings] = None) -> CorollaryReport:
    """逆范数律与水平集切向律

    切向由隐函数求导得到：dc = −(∂H/∂c)⁻¹·(∂H/∂p)·v，切向量 A_ε(B·dc + v)。
    """
    settings = settings or ContinuationSettings.from_config()
    trace = rate_trace(res, grid, settings, with_solutions=False)
    eps_values = list(trace.table.column("eps"))
    tangent_fit = None
    if res.top_kernel.dim:
        blown = BlownUpMap(res, check_approximation=False, relative=True)
        v = res.top_kernel.vectors()[0]
        v_float = to_float_array(v).reshape(-1)
        n, k = res.n, res.k
        kernel_projector = to_float_array(res.kernel_sum.projector(k + 1))
        zeros = np.zeros(blown.dim)
        deviations = []
        for eps in eps_values:
            j_c = blown.jac_coords(eps, zeros)
            j_p = blown.jac_param(eps, zeros)
            dc = -np.linalg.lstsq(j_c, j_p @ v_float, rcond=None)[0] if blown.dim else zeros
            direction = to_float_array(blown.basis).dot(dc) if blown.dim else np.zeros((k + 1) * n)
            direction[k * n:] += v_float
            tangent = blown.ops.a_eps(eps, FLOAT) @ direction
            off = tangent - kernel_projector @ tangent
            deviations.append(float(np.linalg.norm(off) / np.linalg.norm(tangent)))
        tangent_fit = fit_slope("level_set_tangent", eps_values, deviations, settings, expected=1, at_least=True)
    report = CorollaryReport(inverse_fit=trace.fits["inv_norm"], tangent_fit=tangent_fit)
    log.info(f"推论校验: 逆范数斜率 {report.inverse_fit.slope:.3f}, 通过={report.accept}")
    return report


@dataclass(frozen=True)
class ProbeReport:
    """空锥探测：各网格点上 Newton 的结果与解范数的增长"""
    eps: Tuple[float, ...]
    converged: Tuple[bool, ...]
    norms: Tuple[float, ...]
    norm_fit: Optional[SlopeFit]
    empty: bool


def empty_cone_probe(res: ResolutionResult, grid: Optional[Sequence[float]] = None,
                     settings: Optional[ContinuationSettings] = None) -> ProbeReport:
    """在每个网格点从 n^c = 0 出发独立求解 H = 0

    若全部失败，或收敛解的 ‖n^c‖ 随 ε → 0 至少按 1/|ε| 增长（离开任何固定的锥盒），
    则判定锥内无解。
    """
    settings = settings or ContinuationSettings.from_config()
    blown = BlownUpMap(res, check_approximation=False)
    eps_values = list(grid) if grid is not None else settings.grid(1)
    converged, norms = [], []
    for eps in eps_values:
        try:
            result = newton_solve(lambda c: blown.value(eps, c), lambda c: blown.jac_coords(eps, c),
                                  np.zeros(blown.dim), settings, eps,
                                  box=lambda c: blown.scaled_displacement(eps, c))
            converged.append(True)
            norms.append(float(np.linalg.norm(result.coords)))
        except (NewtonDivergence, ConeExitError) as e:
            log.debug(f"空锥探测 ε={eps:.3e}: {e}")
            converged.append(False)
            norms.append(float("nan"))
    usable = [(e, nrm) for e, ok, nrm in zip(eps_values, converged, norms) if ok and nrm > 0]
    norm_fit = None
    if len(usable) >= 3:
        norm_fit = fit_slope("probe_norm", [u[0] for u in usable], [u[1] for u in usable], settings)
    if not any(converged):
        empty = True
    else:
        empty = norm_fit is not None and norm_fit.slope <= -(1 - settings.slope_tol)
    log.info(f"空锥探测: 收敛 {sum(converged)}/{len(eps_values)}，判定空={empty}")
    return ProbeReport(eps=tuple(eps_values), converged=tuple(converged), norms=tuple(norms),
                       norm_fit=norm_fit, empty=empty)
