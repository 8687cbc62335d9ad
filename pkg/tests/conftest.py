import os

import pytest
from hypothesis import HealthCheck, settings

from cli.problem_file import load
from core.analysis import cone_report
from core.continuation import ContinuationSettings

PROBLEMS_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "problems")

# 自动使用的配置隔离夹具是函数级的，对 @given 测试无副作用
settings.register_profile("finecone", deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
settings.load_profile("finecone")


def problem_path(name: str) -> str:
    return os.path.join(PROBLEMS_DIR, f"{name}.json")


@pytest.fixture(autouse=True)
def isolated_config(tmp_path, monkeypatch):
    """每个测试使用空的用户配置，只读默认配置"""
    monkeypatch.setenv("FINECONE_CONFIG", str(tmp_path / "config.json"))
    monkeypatch.delenv("FINECONE_THREADS", raising=False)


@pytest.fixture(scope="session")
def problems():
    return {name: load(problem_path(name)) for name in ("primary", "secondary", "pitchfork", "regular", "node")}


@pytest.fixture(scope="session")
def analyzed(problems):
    """(ConeReport, ResolutionResult)，按名字缓存"""
    cache = {}

    def get(name: str):
        if name not in cache:
            problem = problems[name]
            cache[name] = cone_report(problem.jet, problem.curve, problem.k_max or 16)
        return cache[name]
    return get


@pytest.fixture
def fast_settings():
    return ContinuationSettings(points=9, threads=2)
