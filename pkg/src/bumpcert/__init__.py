"""Numerical certification of two-weight bump inequalities on finite
martingale lattices: gauges, distribution functionals, Haar shifts,
paraproducts, Bellman functionals and embedding sums, plus a CLI harness."""

from .gauge import (BumpGauge, LogGauge, ParametricGauge, T_scalar,
                    YoungFunction, gauge_from_config, head_tail_constant,
                    make_log_gauge, orlicz_norm, psi_from_young)
from .dyadic import (CarlesonSeq, CellDists, DistFn, Lattice, Weight,
                     a2_constant, all_dist_fns, apply_Delta, apply_Delta_n,
                     apply_E, average, bump_constant, carleson_load,
                     compute_loads, dist_fn, mix, n_psi, orlicz_bump_constant)
from .bellman import (balanced_signs, check_dB_dM, check_drop,
                      check_multi_point, check_two_point, directional_derivs,
                      u_of_MN, u_of_N)
from .operators import (HaarShift, Paraproduct, decompose_complexity,
                        domination_form_para, domination_form_shift,
                        random_paraproduct, random_shift, two_weight_norm,
                        worst_kernel)
from .embedding import (adversarial_ratio, embed_sum_25, embed_sum_26,
                        telescope_audit_25, telescope_audit_26)

__version__ = "0.1.0"
