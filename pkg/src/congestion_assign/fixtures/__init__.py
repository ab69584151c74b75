"""
同梱フィクスチャ

10ノード網・7ノード網の係数・需要・状態と、参照用の流量・目的関数値を収める。
"""
