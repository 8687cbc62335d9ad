import os
import re
from importlib import metadata
from typing import Dict, List, Optional

from core.logger import log


class DependencyChecker:
    """
    依赖检查器，对比当前环境与 requirements.txt 中钉住的版本

    报告文件里的工具版本和 ``--versions`` 输出都来自这里。
    """
    # 运行时真正用到的包；测试工具只在 --versions 中列出
    RUNTIME_PACKAGES = ("numpy", "sympy")

    def __init__(self, requirements_file: str = 'requirements.txt'):
        """
        Args:
            requirements_file: requirements.txt 文件路径（相对应用根目录）
        """
        self.requirements_file = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))),
                                              requirements_file)

    def pinned_versions(self) -> Dict[str, str]:
        """读取 requirements.txt 中 ``包==版本`` 形式的条目"""
        pins: Dict[str, str] = {}
        if not os.path.exists(self.requirements_file):
            log.warning(f"requirements.txt 文件不存在: {self.requirements_file}")
            return pins
        try:
            with open(self.requirements_file, 'r', encoding='utf-8') as f:
                for line in f:
                    line = line.split('#', 1)[0].strip()
                    match = re.match(r'^([A-Za-z0-9_.\-]+)\s*==\s*([^\s;]+)', line)
                    if match:
                        pins[match.group(1).lower()] = match.group(2)
        except OSError as e:
            log.warning(f"读取 requirements.txt 失败: {str(e)}")
        return pins

    @staticmethod
    def installed_version(package_name: str) -> Optional[str]:
        try:
            return metadata.version(package_name)
        except metadata.PackageNotFoundError:
            return None

    def check_packages_only(self, packages: Optional[List[str]] = None) -> Dict[str, Dict]:
        """
        只检查不更新

        Args:
            packages: 包名列表，默认为 requirements.txt 中的全部条目

        Returns:
            {包名: {"installed": 版本, "required": 版本, "match": bool}}
        """
        pins = self.pinned_versions()
        names = packages if packages is not None else sorted(pins)
        results = {}
        for package in names:
            current_version = self.installed_version(package)
            required_version = pins.get(package.lower())
            results[package] = {
                "installed": current_version,
                "required": required_version,
                "match": current_version is not None and current_version == required_version,
            }
        return results

    def runtime_versions(self) -> Dict[str, Optional[str]]:
        """报告文件中记录的工具版本"""
        return {name: self.installed_version(name) for name in self.RUNTIME_PACKAGES}
