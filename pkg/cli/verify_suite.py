"""精确恒等式校验套件

在带种子的随机有理实例上逐项运行：分解的各条引理、Γ 恒等式、Hurwitz 公式、
W 阶梯恒等式、Δ/I/W/R 组装与复合预言机的一致性，以及格式表恒等式。
所有比较都是有理数精确比较。
"""
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from sympy import ImmutableMatrix, Matrix, Rational

from core.coeffsys import (IdentityCheck, delta_system, gamma_identity_check, hurwitz_check, ladder_checks)
from core.errors import CurveDirectionExhausted
from core.linalg import kernel, Subspace
from core.logger import log
from core.multijet import CurveJet, MapJet, compose_curve
from core.resolution import build_resolution, lemma_checks
from core.schemes import SCHEMES, c_closed_form, c_coeff, d_coeff

SUITES = ("lemma", "gamma", "hurwitz", "ladder", "oracle", "schemes")


@dataclass
class Instance:
    index: int
    k: int
    jet: MapJet
    curve: CurveJet

    def describe(self) -> Dict[str, Any]:
        return {"index": self.index, "k": self.k, "n": self.jet.n, "m": self.jet.m,
                "map": self.jet.to_terms(), "curve": [[str(x) for x in c] for c in self.curve.taylor()]}


@dataclass
class SuiteOutcome:
    """一个恒等式族的统计"""
    name: str
    passed: int = 0
    failed: int = 0
    skipped: int = 0
    first_failure: Optional[Dict[str, Any]] = None

    def record(self, check: Optional[IdentityCheck], label: str, instance: Optional[Instance] = None):
        if check is None:
            self.skipped += 1
            return
        if check:
            self.passed += 1
            return
        self.failed += 1
        if self.first_failure is None:
            self.first_failure = {"identity": label, "where": check.where, "deviation": str(check.deviation),
                                  "instance": None if instance is None else instance.describe()}
            log.error(f"{self.name}: {label} 失败 ({check.where})")

    @property
    def ok(self) -> bool:
        return self.failed == 0

    def to_dict(self) -> Dict[str, Any]:
        return {"passed": self.passed, "failed": self.failed, "skipped": self.skipped, "ok": self.ok,
                "first_failure": self.first_failure}


@dataclass
class VerifyReport:
    seed: int
    count: int
    k_max: int
    outcomes: Dict[str, SuiteOutcome] = field(default_factory=dict)
    skipped_instances: int = 0
    corruption: Optional[Tuple[int, int, str]] = None

    @property
    def passed(self) -> bool:
        return all(outcome.ok for outcome in self.outcomes.values())

    def to_dict(self) -> Dict[str, Any]:
        return {
            "seed": self.seed, "count": self.count, "k_max": self.k_max,
            "skipped_instances": self.skipped_instances,
            "corruption": None if self.corruption is None else
            {"m": self.corruption[0], "l": self.corruption[1], "value": self.corruption[2]},
            "passed": self.passed,
            "suites": {name: outcome.to_dict() for name, outcome in self.outcomes.items()},
        }


def _rational(rng: np.random.Generator, low: int = -3, high: int = 3) -> Rational:
    return Rational(int(rng.integers(low, high + 1)), int(rng.integers(1, 4)))


def _random_linear(rng: np.random.Generator, n: int, m: int) -> Matrix:
    """秩亏的 G₀¹ = A·B"""
    rank = int(rng.integers(0, min(n, m)))
    if rank == 0:
        return Matrix.zeros(m, n)
    left = Matrix(m, rank, [int(x) for x in rng.integers(-2, 3, size=m * rank)])
    right = Matrix(rank, n, [int(x) for x in rng.integers(-2, 3, size=rank * n)])
    return left * right


def _exponents(rng: np.random.Generator, n: int, degree: int) -> List[int]:
    cuts = sorted(int(x) for x in rng.integers(0, degree + 1, size=n - 1))
    bounds = [0] + cuts + [degree]
    return [bounds[i + 1] - bounds[i] for i in range(n)]


def random_instance(rng: np.random.Generator, index: int, k_max: int) -> Instance:
    """n, m ∈ {2,3,4}、k ≤ k_max 的随机有理实例；G₀¹ 秩亏，曲线首项指标 l ∈ {1,2,3}"""
    n, m = int(rng.integers(2, 5)), int(rng.integers(2, 5))
    k = int(rng.integers(1, k_max + 1))
    linear = _random_linear(rng, n, m)
    terms: List[List[Tuple[Rational, List[int]]]] = []
    for j in range(m):
        comp = [(linear[j, i], [1 if r == i else 0 for r in range(n)]) for i in range(n) if linear[j, i] != 0]
        for _ in range(int(rng.integers(1, 4))):
            comp.append((_rational(rng), _exponents(rng, n, int(rng.integers(2, 5)))))
        terms.append(comp)
    jet = MapJet.from_terms(n, m, terms)

    length = 2 * k + 5
    lead = int(rng.integers(1, 4))
    null = kernel(ImmutableMatrix(linear), Subspace.whole(n))
    coefficients = []
    for i in range(1, length + 1):
        if i < lead:
            coefficients.append([0] * n)
        elif i == lead and null.dim and rng.random() < 0.5:
            weights = [int(x) for x in rng.integers(-2, 3, size=null.dim)]
            if not any(weights):
                weights[0] = 1
            coefficients.append(list(null.basis * Matrix(weights)))
        else:
            vec = [int(x) for x in rng.integers(-2, 3, size=n)]
            if i == lead and not any(vec):
                vec[0] = 1
            coefficients.append(vec)
    return Instance(index=index, k=k, jet=jet, curve=CurveJet.from_bar(coefficients))


def oracle_check(jet: MapJet, zs, k: int) -> IdentityCheck:
    """(T^{2k}, …, T^{k+1}) = Δ^k·(z_{2k}, …, z_{k+1}) + I^k 以及 T^{2k+1} = W^{2k+1}·z + R^{2k+1}"""
    system = delta_system(jet, zs, k)
    values = compose_curve(jet, CurveJet.from_bar(list(zs[:2 * k + 1])), 2 * k + 1)
    assembled = system.apply([zs[2 * k - 1 - c] for c in range(k)])
    for r, vec in enumerate(assembled):
        if vec != values[2 * k - r - 1]:
            return IdentityCheck(False, max(abs(x) for x in vec - values[2 * k - r - 1]), f"T^{2 * k - r}")
    odd = Matrix(system.r_odd)
    for j, block in enumerate(system.w_odd):
        odd += block * zs[2 * k - j]
    if odd != values[2 * k]:
        return IdentityCheck(False, max(abs(x) for x in odd - values[2 * k]), f"T^{2 * k + 1}")
    return IdentityCheck(True)


def _ratio_check(label: str, lhs, rhs, where: str) -> Tuple[str, IdentityCheck]:
    return label, IdentityCheck(lhs == rhs, abs(lhs - rhs), "" if lhs == rhs else where)


def d_scheme_checks(k_max: int) -> List[Tuple[str, IdentityCheck]]:
    """d 格式的首列与列间比值

    d_{m,1} = 1；d_{2m,2+j}/d_{2m−1,1+j} = d_{2m,2}，d_{2m+1,2+j}/d_{2m,1+j} = d_{2m+1,2}（0 ≤ j ≤ m−1）；
    d_{2m+1,3+j}/d_{2m−1,1+j} = d_{2m,2}·d_{2m+1,2}（m ≥ 2，0 ≤ j ≤ m−2）。
    """
    checks = [_ratio_check(f"d_{{{mm},1}} = 1", d_coeff(mm, 1), 1, f"d_{{{mm},1}}") for mm in range(0, 2 * k_max + 4)]
    for m in range(1, k_max + 2):
        for j in range(m):
            checks.append(_ratio_check(f"d_{{{2 * m},{2 + j}}}/d_{{{2 * m - 1},{1 + j}}}",
                                       d_coeff(2 * m, 2 + j) / d_coeff(2 * m - 1, 1 + j), d_coeff(2 * m, 2),
                                       f"d_{{{2 * m},{2 + j}}}"))
            checks.append(_ratio_check(f"d_{{{2 * m + 1},{2 + j}}}/d_{{{2 * m},{1 + j}}}",
                                       d_coeff(2 * m + 1, 2 + j) / d_coeff(2 * m, 1 + j), d_coeff(2 * m + 1, 2),
                                       f"d_{{{2 * m + 1},{2 + j}}}"))
        for j in range(m - 1):
            checks.append(_ratio_check(f"d_{{{2 * m + 1},{3 + j}}}/d_{{{2 * m - 1},{1 + j}}}",
                                       d_coeff(2 * m + 1, 3 + j) / d_coeff(2 * m - 1, 1 + j),
                                       d_coeff(2 * m, 2) * d_coeff(2 * m + 1, 2), f"d_{{{2 * m + 1},{3 + j}}}"))
    return checks


def scheme_checks(k_max: int) -> List[Tuple[str, IdentityCheck]]:
    """c 格式的二项式闭式、c_{m+1,l} = c_{m,l}·d_{m,l} 的递推，以及 d 格式的恒等式"""
    checks = []
    for l in range(1, k_max + 3):
        for mm in range(2 * l - 2, 2 * k_max + 4):
            closed = c_closed_form(mm, l)
            value = c_coeff(mm, l)
            checks.append((f"c_{{{mm},{l}}} 闭式", IdentityCheck(value == closed, abs(value - closed),
                                                               "" if value == closed else f"c_{{{mm},{l}}}")))
            step = c_coeff(mm, l) * d_coeff(mm, l)
            nxt = c_coeff(mm + 1, l)
            checks.append((f"c_{{{mm + 1},{l}}} 递推", IdentityCheck(step == nxt, abs(step - nxt),
                                                                   "" if step == nxt else f"d_{{{mm},{l}}}")))
    return checks + d_scheme_checks(k_max)


def _run_instance(instance: Instance, outcomes: Dict[str, SuiteOutcome]) -> bool:
    jet, curve, k = instance.jet, instance.curve, instance.k
    zs = curve.bars(2 * k + 5)
    try:
        res = build_resolution(jet, curve, k)
    except CurveDirectionExhausted as e:
        log.debug(f"实例 {instance.index} 跳过: {e}")
        return False
    for name, check in lemma_checks(res).items():
        outcomes["lemma"].record(check, name, instance)
    for kk in range(1, k + 1):
        outcomes["gamma"].record(gamma_identity_check(jet, zs, kk), f"Γ^{kk}", instance)
        outcomes["ladder"].record(ladder_checks(jet, zs, kk), f"阶梯 m={kk}", instance)
        outcomes["oracle"].record(oracle_check(jet, zs, kk), f"Δ^{kk}/W^{2 * kk + 1}", instance)
        for offset in range(0, 4):
            outcomes["hurwitz"].record(hurwitz_check(jet, curve, kk, offset), f"T^{2 * kk + 1 + offset}", instance)
    return True


def run_suite(count: int = 100, seed: int = 0, k_max: int = 3,
              corrupt: Optional[Tuple[int, int, Any]] = None) -> VerifyReport:
    """运行全部恒等式套件

    Args:
        count: 随机实例个数
        seed: 随机种子，结果对固定种子确定
        k_max: k 的上限
        corrupt: 测试钩子 (m, l, value)，运行期间把 d_{m,l} 改成 value
    """
    report = VerifyReport(seed=seed, count=count, k_max=k_max,
                          corruption=None if corrupt is None else (corrupt[0], corrupt[1], str(corrupt[2])))
    report.outcomes = {name: SuiteOutcome(name) for name in SUITES}
    rng = np.random.default_rng(seed)
    instances = [random_instance(rng, i, k_max) for i in range(count)]

    def body():
        for instance in instances:
            if not _run_instance(instance, report.outcomes):
                report.skipped_instances += 1
        for label, check in scheme_checks(k_max):
            report.outcomes["schemes"].record(check, label)

    if corrupt is None:
        body()
    else:
        with SCHEMES.corrupted(corrupt[0], corrupt[1], corrupt[2]):
            body()
    log.info(f"校验完成: {count} 个实例（跳过 {report.skipped_instances}），通过={report.passed}")
    return report
