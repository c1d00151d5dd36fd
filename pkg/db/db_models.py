from sqlalchemy.sql import func
from sqlalchemy.orm import declarative_base, relationship
from sqlalchemy import Column, String, Integer, Float, DateTime, ForeignKey, Index

Base = declarative_base()


class RunRecord(Base):
    __tablename__ = "runs"

    run_id = Column(Integer, primary_key=True, autoincrement=True)
    command = Column(String, nullable=False)
    input_digest = Column(String, nullable=False)
    status = Column(String, nullable=False, default="running")
    exit_code = Column(Integer, nullable=True)
    wall_time = Column(Float, nullable=True)
    created_at = Column(DateTime(timezone=True), nullable=False, server_default=func.now())

    # Relationships
    events = relationship("EventRecord", back_populates="run", cascade="all, delete-orphan")

    # Indexes
    __table_args__ = (Index("idx_runs_command_created_at", "command", "created_at"),)

    def __repr__(self):
        return (
            f"<RunRecord(run_id={self.run_id}, command='{self.command}', status='{self.status}', "
            f"exit_code={self.exit_code}, wall_time={self.wall_time})>"
        )


class EventRecord(Base):
    __tablename__ = "events"

    event_id = Column(Integer, primary_key=True, autoincrement=True)
    run_id = Column(Integer, ForeignKey("runs.run_id"), nullable=True)
    command = Column(String, nullable=False)
    event_type = Column(String, nullable=False)
    component = Column(String, nullable=False)
    event_description = Column(String, nullable=False)
    created_at = Column(DateTime(timezone=True), nullable=False, server_default=func.now())

    # Relationships
    run = relationship("RunRecord", back_populates="events")

    # Indexes
    __table_args__ = (Index("idx_events_run_created_at", "run_id", "created_at"),)

    def __repr__(self):
        return (
            f"<EventRecord(event_id={self.event_id}, run_id={self.run_id}, "
            f"event_type='{self.event_type}', event_description='{self.event_description}', created_at={self.created_at})>"
        )
