"""
核心模块 - 负责模型与训练逻辑
包含自动微分、后验估计、CIPAE、训练循环、检查点与可视化导出
"""
