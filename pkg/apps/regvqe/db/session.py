"""
データベース接続設定
軌跡ストア (SQLite + SQLAlchemy) のエンジンとセッション
"""

from collections.abc import Iterator
from contextlib import contextmanager
from pathlib import Path

from sqlalchemy import Engine, create_engine, event
from sqlalchemy.orm import Session, sessionmaker

TRAJECTORY_DB_NAME = "trajectories.db"


def create_store_engine(db_path: str | Path) -> Engine:
    """出力ディレクトリ内の SQLite ファイルに接続するエンジン"""
    db_path = Path(db_path)
    db_path.parent.mkdir(parents=True, exist_ok=True)
    engine = create_engine(
        f"sqlite:///{db_path}",
        connect_args={"timeout": 20},  # デッドロック回避
        echo=False,
    )

    # SQLiteでForeign KeyとWALを有効化
    @event.listens_for(engine, "connect")
    def set_sqlite_pragma(dbapi_connection, connection_record):
        cursor = dbapi_connection.cursor()
        cursor.execute("PRAGMA foreign_keys=ON")
        cursor.execute("PRAGMA journal_mode=WAL")
        cursor.execute("PRAGMA synchronous=NORMAL")
        cursor.close()

    return engine


def init_db(engine: Engine) -> sessionmaker:
    """
    データベースの初期化
    テーブルを作成してセッションファクトリを返す
    """
    from .models import Base

    Base.metadata.create_all(bind=engine)
    return sessionmaker(autocommit=False, autoflush=False, bind=engine)


@contextmanager
def session_scope(factory: sessionmaker) -> Iterator[Session]:
    """コミット/ロールバックを伴うセッション"""
    db = factory()
    try:
        yield db
        db.commit()
    except Exception:
        db.rollback()
        raise
    finally:
        db.close()
