#include "otkd/losses.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "otkd/errors.hpp"

namespace otkd {

namespace {

// Row-wise log-softmax of `values` (m x n) scaled by 1/temperature.
std::vector<double> log_softmax_rows(const std::vector<double>& values, std::size_t m,
                                     std::size_t n, double inv_temperature) {
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    double mx = values[i * n] * inv_temperature;
    for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, values[i * n + j] * inv_temperature);
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += std::exp(values[i * n + j] * inv_temperature - mx);
    const double lse = mx + std::log(s);
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = values[i * n + j] * inv_temperature - lse;
  }
  return out;
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape != b.shape) {
    throw Error(ErrorCode::kShapeMismatch,
                std::string(op) + ": " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                    " vs " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  }
}

}  // namespace

Var cross_entropy_loss(Var logits, Var labels) {
  const Tensor& z = logits.value();
  const Tensor& y = labels.value();
  require_same_shape("cross_entropy_loss", z, y);
  const std::size_t m = z.rows(), n = z.cols();
  if (m == 0 || n == 0) throw Error(ErrorCode::kShapeMismatch, "cross_entropy_loss: empty logits");
  std::vector<std::size_t> target(m);
  for (std::size_t i = 0; i < m; ++i) {
    std::size_t ones = 0;
    for (std::size_t j = 0; j < n; ++j) {
      const double v = y.values[i * n + j];
      if (v == 1.0) {
        target[i] = j;
        ++ones;
      } else if (v != 0.0) {
        ones = 2;
      }
    }
    if (ones != 1) throw Error(ErrorCode::kInvalidParams, "label row is not one-hot", i);
  }
  const auto logp = log_softmax_rows(z.values, m, n, 1.0);
  double total = 0.0;
  for (std::size_t i = 0; i < m; ++i) total -= logp[i * n + target[i]];
  const double inv_m = 1.0 / static_cast<double>(m);

  return logits.tape->record(Tensor::scalar(total * inv_m), {logits},
                             [logits, logp, target = std::move(target), m, n, inv_m](Tape& t, const std::vector<double>& g) {
    std::vector<double> gz(m * n);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        const double p = std::exp(logp[i * n + j]);
        gz[i * n + j] = g[0] * inv_m * (p - (j == target[i] ? 1.0 : 0.0));
      }
    t.accumulate(logits, gz);
  });
}

Var kd_loss(Var student_logits, Var teacher_logits, double temperature) {
  if (!(temperature > 0.0)) throw Error(ErrorCode::kInvalidParams, "KD temperature must be > 0");
  const Tensor& s = student_logits.value();
  const Tensor& te = teacher_logits.value();
  require_same_shape("kd_loss", s, te);
  const std::size_t m = s.rows(), n = s.cols();
  const double inv_t = 1.0 / temperature;
  const auto log_q = log_softmax_rows(s.values, m, n, inv_t);
  const auto log_p = log_softmax_rows(te.values, m, n, inv_t);
  double total = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    double kl = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double lp = log_p[i * n + j];
      kl += std::exp(lp) * (lp - log_q[i * n + j]);
    }
    total += kl;
  }
  const double scale = temperature * temperature / static_cast<double>(m);
  // Only the student input is wired in, so the teacher never gets gradient.
  return student_logits.tape->record(
      Tensor::scalar(scale * total), {student_logits},
      [student_logits, log_q, log_p, m, n, temperature](Tape& t, const std::vector<double>& g) {
        // d/ds_ij = (T / m) (q_ij - p_ij)
        const double k = g[0] * temperature / static_cast<double>(m);
        std::vector<double> gs(m * n);
        for (std::size_t idx = 0; idx < m * n; ++idx) gs[idx] = k * (std::exp(log_q[idx]) - std::exp(log_p[idx]));
        t.accumulate(student_logits, gs);
      });
}

Var ot_loss_node(Var teacher_feats, Var student_feats, const OtParams& params,
                 OtLossResult* solution) {
  const FeatureBatch teacher(teacher_feats.value().to_matrix());
  const FeatureBatch student(student_feats.value().to_matrix());
  OtLossResult result = ot_loss(teacher, student, params);
  const double loss = result.loss;

  Tape& tape = *student_feats.tape;
  const bool any_grad = tape.requires_grad(teacher_feats) || tape.requires_grad(student_feats);
  Tape::BackwardFn rule;
  if (any_grad) {
    Matrix weights = gradient_weights(result, params.method);
    rule = [teacher_feats, student_feats, weights = std::move(weights)](Tape& t, const std::vector<double>& g) {
      const Tensor& X = t.value(teacher_feats);
      const Tensor& Y = t.value(student_feats);
      const std::size_t b = X.rows(), d = X.cols();
      std::vector<double> xn(b), yn(b);
      for (std::size_t i = 0; i < b; ++i) {
        double sx = 0.0, sy = 0.0;
        for (std::size_t k = 0; k < d; ++k) {
          sx += X.values[i * d + k] * X.values[i * d + k];
          sy += Y.values[i * d + k] * Y.values[i * d + k];
        }
        xn[i] = std::sqrt(sx);
        yn[i] = std::sqrt(sy);
      }
      const bool want_x = t.requires_grad(teacher_feats);
      const bool want_y = t.requires_grad(student_feats);
      std::vector<double> gx(want_x ? b * d : 0, 0.0), gy(want_y ? b * d : 0, 0.0);
      for (std::size_t i = 0; i < b; ++i) {
        for (std::size_t j = 0; j < b; ++j) {
          const double w = weights(i, j);
          if (w == 0.0) continue;
          double dot = 0.0;
          for (std::size_t k = 0; k < d; ++k) dot += X.values[i * d + k] * Y.values[j * d + k];
          const double cosv = dot / (xn[i] * yn[j]);
          // dC/dy_j = -(x_i/|x_i| - cos * y_j/|y_j|) / |y_j|, symmetric for x_i.
          for (std::size_t k = 0; k < d; ++k) {
            const double xh = X.values[i * d + k] / xn[i];
            const double yh = Y.values[j * d + k] / yn[j];
            if (want_y) gy[j * d + k] -= g[0] * w * (xh - cosv * yh) / yn[j];
            if (want_x) gx[i * d + k] -= g[0] * w * (yh - cosv * xh) / xn[i];
          }
        }
      }
      if (want_x) t.accumulate(teacher_feats, gx);
      if (want_y) t.accumulate(student_feats, gy);
    };
  }
  if (solution != nullptr) *solution = std::move(result);
  return tape.record(Tensor::scalar(loss), {teacher_feats, student_feats}, std::move(rule));
}

Var fitnets_l2_loss(Var teacher_feats, Var student_feats) {
  const Var diff = sub(student_feats, teacher_feats);
  return reduce_mean(mul(diff, diff));
}

}  // namespace otkd
