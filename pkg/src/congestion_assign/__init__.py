"""
渋滞リンク対応交通量配分ツール（Congestion Assign）

非渋滞・渋滞の2分岐をもつリンク旅行時間関数のもとで、システム最適配分（凸2次計画）と
利用者均衡配分（非凸、分枝限定法）を解き、配分を繰り返して渋滞域の段階的な進展を追跡する。
"""

__version__ = "0.1.0"
__author__ = "Your Name"
