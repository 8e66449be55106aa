"""
例外クラス定義
ライブラリ全体で送出する例外の階層
"""


class RegVQEError(Exception):
    """regvqe 関連の基底例外"""

    pass


class PauliFormatError(RegVQEError):
    """.psum テキストの書式エラー(行番号付き)"""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class QubitMismatchError(RegVQEError):
    """量子ビット数の不一致"""

    pass


class NonHermitianError(RegVQEError):
    """期待値に無視できない虚部が残った(非エルミート入力)"""

    pass


class GateError(RegVQEError):
    """ゲート定義・適用のエラー"""

    pass


class GroundEnergyError(RegVQEError):
    """厳密基底エネルギーが計算できない"""

    pass


class ConfigError(RegVQEError):
    """設定ファイル・環境変数のエラー(行番号付き)"""

    def __init__(self, message: str, line: int | None = None, path: str | None = None):
        self.line = line
        self.path = path
        prefix = ""
        if path is not None:
            prefix = f"{path}:{line}: " if line is not None else f"{path}: "
        elif line is not None:
            prefix = f"line {line}: "
        super().__init__(prefix + message)


class BudgetExhaustedError(RegVQEError):
    """関数評価回数の上限に到達"""

    pass


class NonFiniteError(RegVQEError):
    """目的関数または勾配が有限でない"""

    pass


class StoreError(RegVQEError):
    """結果ストアの読み書きエラー"""

    pass


class StatsError(RegVQEError):
    """集計の前提条件違反"""

    pass


class WindowUndefinedError(StatsError):
    """最大成功率が 0 のため λ_opt ウィンドウが定義できない"""

    pass
