"""
SQLAlchemyモデル定義
最適化軌跡(反復ごとのエネルギー・目的関数・‖θ‖₂・λ)
"""

from sqlalchemy import Column, Float, ForeignKey, Index, Integer, String
from sqlalchemy.orm import declarative_base, relationship

Base = declarative_base()


class TrajectoryRun(Base):
    """軌跡を保存した実行 (キーは "<lambda0>/<seed>")"""

    __tablename__ = "trajectory_runs"

    run_key = Column(String, primary_key=True)
    lambda0 = Column(Float, nullable=False)
    seed = Column(Integer, nullable=False)
    status = Column(String, nullable=False)

    # リレーションシップ
    points = relationship(
        "TrajectoryPointRow", back_populates="run", cascade="all, delete-orphan", order_by="TrajectoryPointRow.id"
    )


class TrajectoryPointRow(Base):
    """1 反復分の記録"""

    __tablename__ = "trajectory_points"

    id = Column(Integer, primary_key=True, autoincrement=True)
    run_key = Column(String, ForeignKey("trajectory_runs.run_key", ondelete="CASCADE"), nullable=False)
    stage = Column(String, nullable=False)  # A | B
    iteration = Column(Integer, nullable=False)
    energy = Column(Float, nullable=False)
    objective = Column(Float, nullable=False)
    norm = Column(Float, nullable=False)
    lam = Column(Float, nullable=False)

    run = relationship("TrajectoryRun", back_populates="points")

    __table_args__ = (Index("ix_trajectory_points_run_stage_iter", "run_key", "stage", "iteration", unique=True),)
