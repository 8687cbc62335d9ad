import json
import logging

import pytest

from core.config_manager import ConfigManager
from core.continuation import ContinuationSettings
from core.dependency_checker import DependencyChecker
from core.errors import ProblemFileError
from core.logger import Logger, log, log_exception


def test_defaults_and_dotted_keys():
    config = ConfigManager()
    assert config.get("newton.max_iter") == 50
    assert config.get("grid.points") == 25
    assert config.get("grid.nothing", "x") == "x"
    assert config.get("newton.max_iter.deeper", 1) == 1


def test_user_file_overrides_defaults(tmp_path):
    path = tmp_path / "user.json"
    path.write_text(json.dumps({"grid": {"points": 7}}), encoding="utf-8")
    config = ConfigManager(str(path))
    assert config.get("grid.points") == 7
    assert config.get("grid.eps_max") == 0.1


def test_with_overrides_leaves_original_untouched(tmp_path):
    config = ConfigManager(str(tmp_path / "none.json"))
    clone = config.with_overrides({"newton": {"tol": 1e-9}})
    assert clone.get("newton.tol") == 1e-9
    assert clone.get("newton.max_iter") == 50
    assert config.get("newton.tol") == 1e-12
    assert not (tmp_path / "none.json").exists()


def test_set_writes_user_file(tmp_path):
    path = tmp_path / "cfg" / "user.json"
    config = ConfigManager(str(path))
    assert config.set("fit.slope_tol", 0.2)
    assert json.loads(path.read_text(encoding="utf-8"))["fit"]["slope_tol"] == 0.2
    assert ConfigManager(str(path)).get("fit.slope_tol") == 0.2


def test_threads_environment_wins(monkeypatch):
    config = ConfigManager()
    assert config.threads() == 1
    monkeypatch.setenv("FINECONE_THREADS", "4")
    assert config.threads() == 4
    monkeypatch.setenv("FINECONE_THREADS", "many")
    assert config.threads() == 1


def test_settings_from_config():
    config = ConfigManager().with_overrides({"grid": {"eps_max": 0.3, "points": 5}, "fit": {"slope_tol": 0.05}})
    conf = ContinuationSettings.from_config(config)
    assert (conf.eps_max, conf.eps_min, conf.points) == (0.3, 1e-4, 5)
    assert conf.slope_tol == 0.05
    assert ContinuationSettings.from_config() == ContinuationSettings()


def test_logger_is_a_singleton():
    assert Logger.get_instance() is log
    assert log.logger.name == "finecone"


def test_log_exception_returns_message():
    message = log_exception(ValueError("bad"), "读取失败")
    assert message.startswith("读取失败: ")
    assert "ValueError" in message and "bad" in message


def test_log_exception_appends_exit_code():
    message = log_exception(ProblemFileError("缺少字段 'n'", "$"))
    assert message.endswith("(退出码 2)")


class _Collect(logging.Handler):
    def __init__(self):
        super().__init__(logging.DEBUG)
        self.messages = []

    def emit(self, record):
        self.messages.append(record.getMessage())


def test_stage_logs_duration_and_reraises():
    previous = logging.getLevelName(log.log_level).lower()
    collector = _Collect()
    log.logger.addHandler(collector)
    try:
        log.set_level("info")
        with log.stage("精确分析"):
            pass
        with pytest.raises(ValueError):
            with log.stage("浮点校验"):
                raise ValueError("boom")
    finally:
        log.logger.removeHandler(collector)
        log.set_level(previous)
    assert [m.split("，")[0] for m in collector.messages] == ["阶段 精确分析 结束", "阶段 浮点校验 结束"]


def test_set_level():
    previous = logging.getLevelName(log.log_level).lower()
    try:
        log.set_level("debug")
        assert log.logger.level == logging.DEBUG
        assert all(h.level == logging.DEBUG for h in log.logger.handlers)
    finally:
        log.set_level(previous)


def test_pinned_versions():
    pins = DependencyChecker().pinned_versions()
    assert set(pins) == {"numpy", "sympy", "pytest", "hypothesis"}
    assert set(DependencyChecker().runtime_versions()) == {"numpy", "sympy"}
    assert DependencyChecker("missing.txt").pinned_versions() == {}


@pytest.mark.parametrize("name", ["numpy", "sympy"])
def test_runtime_packages_are_installed(name):
    assert DependencyChecker.installed_version(name) is not None


def test_config_failures_go_to_the_log(tmp_path, capsys):
    path = tmp_path / "broken.json"
    path.write_text("{", encoding="utf-8")
    collector = _Collect()
    log.logger.addHandler(collector)
    try:
        config = ConfigManager(str(path))
        assert config.get("grid.points") == 25
        unwritable = ConfigManager(str(tmp_path))
        assert not unwritable.save_config()
    finally:
        log.logger.removeHandler(collector)
    assert capsys.readouterr().out == ""
    assert any(m.startswith("加载配置文件失败") for m in collector.messages)
    assert any(m.startswith("保存配置文件失败") for m in collector.messages)
