"""
工具模块 - 负责通用工具函数
包含国际化与日志、配置、数据读写和环境检查
"""
