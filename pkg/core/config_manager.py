import os
import copy
import json
import logging
from typing import Dict, Any, Optional

# 与 core.logger.log 包装的是同一个 logger；core.logger 初始化时要读配置，这里不能反向导入它
_logger = logging.getLogger("finecone")


class ConfigManager:
    """配置管理器

    默认值来自 config/default_config.json，用户覆盖来自 config/config.json
    （或环境变量 FINECONE_CONFIG 指定的文件）。键支持点号路径，例如
    ``newton.max_iter``。
    """

    def __init__(self, config_file: Optional[str] = None):
        self.config_dir = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "config")
        self.default_config_file = os.path.join(self.config_dir, "default_config.json")
        self.config_file = config_file or os.environ.get("FINECONE_CONFIG") or os.path.join(self.config_dir, "config.json")
        self.config = self.load_config()

    @staticmethod
    def _read_json(path: str) -> Dict[str, Any]:
        if not os.path.exists(path):
            return {}
        try:
            with open(path, 'r', encoding='utf-8') as f:
                return json.load(f)
        except Exception as e:
            _logger.warning(f"加载配置文件失败: {path}: {e}")
            return {}

    @staticmethod
    def _merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
        """递归合并两层配置，override 优先"""
        merged = copy.deepcopy(base)
        for key, value in override.items():
            if isinstance(value, dict) and isinstance(merged.get(key), dict):
                merged[key] = ConfigManager._merge(merged[key], value)
            else:
                merged[key] = value
        return merged

    def load_config(self) -> Dict[str, Any]:
        """加载配置（默认配置 + 用户配置）"""
        defaults = self._read_json(self.default_config_file)
        user = self._read_json(self.config_file)
        return self._merge(defaults, user)

    def save_config(self) -> bool:
        """保存配置到用户配置文件"""
        try:
            os.makedirs(os.path.dirname(self.config_file) or ".", exist_ok=True)
            with open(self.config_file, 'w', encoding='utf-8') as f:
                json.dump(self.config, f, indent=4, ensure_ascii=False)
            return True
        except Exception as e:
            _logger.warning(f"保存配置文件失败: {self.config_file}: {e}")
            return False

    def get(self, key: str, default: Any = None) -> Any:
        """获取配置项，支持点号路径"""
        node: Any = self.config
        for part in key.split("."):
            if not isinstance(node, dict) or part not in node:
                return default
            node = node[part]
        return node

    def set(self, key: str, value: Any) -> bool:
        """设置配置项并保存"""
        parts = key.split(".")
        node = self.config
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = value
        return self.save_config()

    def update(self, config_dict: Dict[str, Any]) -> bool:
        """批量更新配置"""
        self.config = self._merge(self.config, config_dict)
        return self.save_config()

    def with_overrides(self, overrides: Optional[Dict[str, Any]]) -> 'ConfigManager':
        """返回叠加了问题文件 options 的只读副本（不写盘）"""
        clone = copy.copy(self)
        clone.config = self._merge(self.config, overrides or {})
        return clone

    def threads(self) -> int:
        """续算线程数，环境变量 FINECONE_THREADS 优先"""
        env_value = os.environ.get("FINECONE_THREADS")
        if env_value:
            try:
                return max(1, int(env_value))
            except ValueError:
                pass
        return max(1, int(self.get("threads", 1)))
