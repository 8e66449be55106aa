"""
正則化 VQE の実験用ライブラリ
パウリ和・状態ベクトル・アンザッツ・目的関数・最適化器・実験ハーネス・統計
"""

__version__ = "0.1.0"
