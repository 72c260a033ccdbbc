#pragma once

#include "otkd/autodiff.hpp"
#include "otkd/solvers.hpp"

namespace otkd {

// Mean over the batch of -log softmax(logits)[true class]. Labels must be
// one-hot rows (InvalidParams otherwise).
Var cross_entropy_loss(Var logits, Var labels);

// T^2 * KL(softmax(teacher/T) || softmax(student/T)), averaged over rows.
// No gradient ever flows into teacher_logits.
Var kd_loss(Var student_logits, Var teacher_logits, double temperature);

// OT loss between two feature sets under the cosine cost. The forward value
// is exactly ot_loss() on detached copies. Backward holds the returned plan
// (REMD: its active relaxed assignment) fixed and differentiates
// sum_ij W_ij C_ij through the cosine cost; both sides receive gradient if
// they require it. `solution`, when given, receives the solver output.
Var ot_loss_node(Var teacher_feats, Var student_feats, const OtParams& params,
                 OtLossResult* solution = nullptr);

// FitNets-style stage matching: mean over all b*d entries of (s - t)^2.
Var fitnets_l2_loss(Var teacher_feats, Var student_feats);

}  // namespace otkd
