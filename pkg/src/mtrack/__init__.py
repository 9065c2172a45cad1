"""Physics-aware motion processing and adaptive motion-tracking rewards."""

from .adaptive import TrackingFactorState, update_error_ema, update_sigma
from .bilevel import BiLevelInstance, optimal_sigma, stationary_branch
from .contact import ContactAnnotation, correct_floating, ema_smooth, estimate_contact
from .curriculum import CurriculumSchedule, penalty_curriculum, termination_curriculum, value_after
from .filtering import StabilityReport, accept_motion
from .ik import KinematicChain, RetargetMap, ik_solve, retarget_sequence
from .metrics import MetricsReport, compute_metrics
from .motion import MotionFrame, MotionSequence, SkeletonSpec, load_motion, save_motion
from .rewards import RewardWeights, TrackingFactors, exp_reward, soft_limits
from .toy_env import ToyEnv, ToyEnvConfig, rollout, rsi_reset
from .training import OptimizerConfig, train_adaptive

__version__ = "0.1.0"
