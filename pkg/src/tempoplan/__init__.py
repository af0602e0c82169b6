"""tempoplan: learn symbolic and subsymbolic temporal task constraints from
two-hand demonstrations and derive fully timed plans.

The pipeline has three stages: assess pairwise temporal relationships
(fuzzy Allen-relation scores plus Gaussian-mixture timing models in a
shift-invariant 3-D timing space), infer constraints (exhaustive search for
all contradiction-free relation assignments, then per-pair target timings
by density maximization over the assigned relation's region), and plan
(symbolic grid plan, then constrained least-squares timing optimization).
"""

__version__ = "0.1.0"

from .allen import (AllenRegion, RelationSet, compose, inverse,
                    region_contains, region_project)
from .assessment import (RelationScoreTable, assess_all, collect_timings,
                         score_relation)
from .dataset import Dataset, load_dataset, parse_dataset
from .errors import (ActionSetMismatch, BenchTimeout, DatasetFormatError,
                     EmptyDataset, InfeasibleConstraints, InfeasibleRegion,
                     NoFeasibleAssignment, NoSymbolicSolution,
                     PairNeverCoOccurs, SolverStall, SpecInfeasible,
                     TempoplanError)
from .evaluation import (BenchTrace, EvalReport, bench_assignments,
                         incremental_eval, most_characteristic,
                         plan_demo_distance)
from .gmm import (GaussianComponent, TimingModel, conditioned_argmax, fit_gmm,
                  pdf)
from .inference import (Binding, ConstraintGraph, PartialTaskAssignment,
                        SubtaskPartition, TaskAssignment, assign_next,
                        find_assignments, infer_constraints, is_feasible,
                        pre_assign, score_assignment, segment_subtasks)
from .model import (Action, ActionSequence, AllenRelation, Demonstration,
                    RELATIONS, TemporalPlan, TimeEnrichedAction,
                    classify_relation, validate_demonstration)
from .planner import (ParametrizedPlan, SymbolicPlan, assign_hands,
                      parametrize, plan_pipeline, symbolic_plan)
from .synth import (GroundTruthSpec, ModeSpec, builtin_spec, generate,
                    load_spec, random_ground_truth)
from .timing import Timing3, Timing4, distance, embed, embed_pair, lift
