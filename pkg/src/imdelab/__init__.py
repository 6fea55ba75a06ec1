"""imdelab: a laboratory for inverse modified differential equations.

Compute the perturbed vector fields that numerical integrators implicitly
target, train ODE-net / LMNet / HNN models on benchmark systems, and
verify that learned dynamics approximate the truncated IMDE rather than
the true field.
"""

from .jets import Jet, fresh_var, variable
from .fields import FieldExpr, parse_field, eval_field
from .flows import flow_taylor, flow_taylor_coeffs, lie_derivative
from .integrators import (ButcherTableau, LmmScheme, SolverSpec, TABLEAUS,
                          LMM_SCHEMES, rk_step, ode_solve,
                          symplectic_euler_step, lmm_trajectory,
                          reference_flow, reference_trajectory, order_estimate)
from .imde import (ImdeField, imde_coefficient, imde_truncated_eval,
                   lmm_imde_coefficient, closed_form_imde, closed_form_field,
                   composition_invariance_defect, hamiltonicity_defect,
                   truncation_diagnostics)
from .autodiff import Tensor, grad
from .nn import (Mlp, AdamState, LrSchedule, mlp_forward, grad_params,
                 adam_step, hamiltonian_field_from_net, save_checkpoint,
                 load_checkpoint)
from .discovery import (Dataset, TrainConfig, ErrorReport, make_dataset,
                        odenet_loss, lmnet_loss, hnn_symplectic_euler_loss,
                        train, error_metric, convergence_order,
                        FlowProbe, DomainProbe)
from .problems import problem, list_problems

__version__ = "0.1.0"
