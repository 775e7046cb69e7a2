"""Add experiment ledger

Revision ID: 3f1c2a7d9e40
Revises:
Create Date: 2026-10-17 11:20:04.118230

"""
from alembic import op
import sqlalchemy as sa


# revision identifiers, used by Alembic.
revision = '3f1c2a7d9e40'
down_revision = None
branch_labels = None
depends_on = None


def upgrade():
    op.create_table(
        'experiment_run',
        sa.Column('id', sa.Integer(), nullable=False),
        sa.Column('command', sa.Text(), nullable=False),
        sa.Column('seed', sa.Integer(), nullable=True),
        sa.Column('argv', sa.Text(), server_default='[]', nullable=False),
        sa.Column('exit_code', sa.Integer(), server_default='0', nullable=False),
        sa.Column('created_at', sa.DateTime(timezone=True), nullable=False),
        sa.PrimaryKeyConstraint('id')
    )
    op.create_index(
        op.f('ix_experiment_run_command'), 'experiment_run', ['command'], unique=False)
    op.create_table(
        'run_metric',
        sa.Column('id', sa.Integer(), nullable=False),
        sa.Column('run_id', sa.Integer(), nullable=False),
        sa.Column('index', sa.Integer(), nullable=False),
        sa.Column('name', sa.Text(), nullable=False),
        sa.Column('value', sa.Float(), nullable=False),
        sa.ForeignKeyConstraint(['run_id'], ['experiment_run.id'], ),
        sa.PrimaryKeyConstraint('id')
    )


def downgrade():
    op.drop_table('run_metric')
    op.drop_index(op.f('ix_experiment_run_command'), table_name='experiment_run')
    op.drop_table('experiment_run')
