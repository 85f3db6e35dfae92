"""Simulator and planners for homogeneous microtasking (HomT) versus
heterogeneous macrotasking (HeMT) on heterogeneous clusters."""

from .cluster import (CreditState, NodeSpec, WorkFunction, advance_credits,
                      build_work_function, effective_speed)
from .engine import (ClusterState, SimConfig, StageMetrics, TaskRecord, run_job, run_stage,
                     run_workload, verify_claim1)
from .scenario import (Scenario, ScenarioError, list_scenarios, load_scenario, parse_scenario,
                       run_experiment)
from .scheduler import (CreditPlanInput, ExecutorPool, HeMTCredit, HeMTStatic, HomT, OAHeMT,
                        SpeedEstimate, calibrate_fudge, cold_start, plan_adaptive,
                        plan_credit_based, pull_next, superpose_and_invert, update_speed)
from .storage import (StorageConfig, estimate_collisions_mc, place_block, prob_diff_block,
                      prob_same_block, select_read_node, uplink_rate)
from .workload import (Job, PartitionPlan, Stage, Task, build_jobs, partition_even,
                       partition_proportional, skewed_bucket)

__version__ = "0.1.0"
