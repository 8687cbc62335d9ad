import os
import sys
import time
import logging
import traceback
from contextlib import contextmanager
from datetime import datetime
from typing import Iterator, Optional


class Logger:
    """finecone 日志管理器（单例）

    控制台输出走标准错误流，标准输出只留给报告和 CSV。
    """

    LEVELS = {
        "debug": logging.DEBUG,
        "info": logging.INFO,
        "warning": logging.WARNING,
        "error": logging.ERROR,
    }

    # 文件里带源码位置，控制台只留时间
    FORMATS = {
        "file": ("[%(asctime)s] [%(levelname)s] [%(filename)s:%(lineno)d] - %(message)s", "%Y-%m-%d %H:%M:%S"),
        "console": ("[%(asctime)s] [%(levelname)s] - %(message)s", "%H:%M:%S"),
    }

    _instance = None

    @classmethod
    def get_instance(cls, log_dir: Optional[str] = None, log_level: Optional[str] = None,
                     log_to_file: Optional[bool] = None) -> 'Logger':
        if cls._instance is None:
            cls._instance = cls(log_dir, log_level, log_to_file)
        return cls._instance

    def __init__(self, log_dir: Optional[str] = None, log_level: Optional[str] = None,
                 log_to_file: Optional[bool] = None):
        """初始化日志

        未显式给出的参数从配置读取，环境变量 FINECONE_LOG_LEVEL 优先于一切。

        Args:
            log_dir: 日志目录，默认是项目根目录下配置项 log_dir 指定的文件夹
            log_level: debug / info / warning / error
            log_to_file: 是否写按天滚动的日志文件
        """
        # 延迟导入：config_manager 不依赖日志，但日志需要配置
        from core.config_manager import ConfigManager
        config = ConfigManager()

        level_name = os.environ.get("FINECONE_LOG_LEVEL") or log_level or config.get("log_level", "warning")
        self.log_level = self.LEVELS.get(str(level_name).lower(), logging.WARNING)
        self.log_to_file = bool(config.get("log_to_file", False)) if log_to_file is None else log_to_file
        if log_dir is None:
            app_root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
            log_dir = os.path.join(app_root, config.get("log_dir", "logs"))
        self.log_dir = log_dir

        self.logger = logging.getLogger("finecone")
        self.logger.setLevel(self.log_level)
        self.logger.propagate = False
        for handler in self.logger.handlers[:]:
            self.logger.removeHandler(handler)

        if self.log_to_file:
            os.makedirs(self.log_dir, exist_ok=True)
            log_file = os.path.join(self.log_dir, f"finecone_{datetime.now():%Y%m%d}.log")
            self._attach(logging.FileHandler(log_file, encoding="utf-8"), "file")
        self._attach(logging.StreamHandler(sys.stderr), "console")

        self.logger.debug(f"日志初始化完成，级别 {level_name}，写文件 {self.log_to_file}")

    def _attach(self, handler: logging.Handler, kind: str):
        fmt, datefmt = self.FORMATS[kind]
        handler.setLevel(self.log_level)
        handler.setFormatter(logging.Formatter(fmt, datefmt=datefmt))
        self.logger.addHandler(handler)

    def set_level(self, level_name: str):
        """运行时调整级别（-v / -vv）"""
        self.log_level = self.LEVELS.get(level_name.lower(), self.log_level)
        self.logger.setLevel(self.log_level)
        for handler in self.logger.handlers:
            handler.setLevel(self.log_level)

    def debug(self, message: str, *args, **kwargs):
        self.logger.debug(message, *args, **kwargs)

    def info(self, message: str, *args, **kwargs):
        self.logger.info(message, *args, **kwargs)

    def warning(self, message: str, *args, **kwargs):
        self.logger.warning(message, *args, **kwargs)

    def error(self, message: str, *args, **kwargs):
        self.logger.error(message, *args, **kwargs)

    @contextmanager
    def stage(self, name: str) -> Iterator[None]:
        """记录一个计算阶段的耗时；阶段抛出的异常照常向外传播"""
        start = time.perf_counter()
        self.logger.debug(f"阶段 {name} 开始")
        try:
            yield
        finally:
            self.logger.info(f"阶段 {name} 结束，用时 {time.perf_counter() - start:.3f}s")

    def log_exception(self, e: Exception, message: Optional[str] = None) -> str:
        """记录异常并返回给用户看的一行信息

        带 ``exit_code`` 的 finecone 异常会把退出码一并写入信息。
        """
        error_msg = f"{message + ': ' if message else ''}异常类型: {type(e).__name__}, 异常信息: {e}"
        exit_code = getattr(e, "exit_code", None)
        if exit_code is not None:
            error_msg += f" (退出码 {exit_code})"
        self.logger.error(error_msg)
        self.logger.debug(f"异常堆栈: \n{traceback.format_exc()}")
        return error_msg


log = Logger.get_instance()


def log_exception(e: Exception, message: Optional[str] = None) -> str:
    return log.log_exception(e, message)
