"""
CIPNN
连续不确定概率神经网络：分类、CIPAE 自编码与潜空间可视化
"""

__version__ = "1.0.0"
