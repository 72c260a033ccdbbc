#include "otkd/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "otkd/losses.hpp"
#include "otkd/rng.hpp"

namespace otkd {

GradCheckReport grad_check(const ScalarFn& f, const Tensor& point, double h, double tol,
                           double rel_floor) {
  GradCheckReport report;
  std::vector<double> analytic;
  {
    Tape tape;
    Var x = tape.leaf(point, true);
    Var y = f(tape, x);
    tape.backward(y);
    analytic = tape.grad(x);
    if (analytic.empty()) analytic.assign(point.numel(), 0.0);
  }
  auto eval = [&](const std::vector<double>& values) {
    Tape tape;
    Var x = tape.leaf(Tensor(point.rows(), point.cols(), values), false);
    return f(tape, x).item();
  };
  std::vector<double> probe = point.values;
  for (std::size_t k = 0; k < probe.size(); ++k) {
    const double orig = probe[k];
    probe[k] = orig + h;
    const double up = eval(probe);
    probe[k] = orig - h;
    const double down = eval(probe);
    probe[k] = orig;
    const double numeric = (up - down) / (2.0 * h);
    const double abs_err = std::abs(analytic[k] - numeric);
    const double denom = std::max({std::abs(analytic[k]), std::abs(numeric), rel_floor});
    const double rel = abs_err / denom;
    report.max_abs_error = std::max(report.max_abs_error, abs_err);
    report.max_rel_error = std::max(report.max_rel_error, rel);
    if (!(rel <= tol)) report.failing.push_back(k);
    ++report.checked;
  }
  report.passed = report.failing.empty();
  return report;
}

namespace {

Tensor random_tensor(std::size_t rows, std::size_t cols, SplitMix64& rng, double lo = -1.0,
                     double hi = 1.0) {
  Tensor t(rows, cols);
  for (double& x : t.values) x = rng.uniform(lo, hi);
  return t;
}

// Entries bounded away from zero so relu's kink is never straddled.
Tensor kink_free_tensor(std::size_t rows, std::size_t cols, SplitMix64& rng) {
  Tensor t(rows, cols);
  for (double& x : t.values) {
    const double mag = rng.uniform(0.1, 1.0);
    x = rng.uniform() < 0.5 ? -mag : mag;
  }
  return t;
}

Tensor one_hot_rows(std::size_t rows, std::size_t classes, SplitMix64& rng) {
  Tensor t(rows, classes);
  for (std::size_t i = 0; i < rows; ++i) t.values[i * classes + rng.below(classes)] = 1.0;
  return t;
}

// Smallest cost gap between the best assignment and any other permutation,
// by enumeration. Used to keep exact-OT probes away from plan switches.
double assignment_gap(const Matrix& c) {
  const std::size_t n = c.rows();
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  double second = best;
  do {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += c(i, perm[i]);
    if (s < best) {
      second = best;
      best = s;
    } else if (s < second) {
      second = s;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return (second - best) / static_cast<double>(n);
}

// Margin between the winning REMD side and the loser, and between every
// row/column minimum and its runner-up.
double remd_margin(const Matrix& c) {
  const std::size_t n = c.rows();
  double margin = std::numeric_limits<double>::infinity();
  double row_side = 0.0, col_side = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> r(c.row(i).begin(), c.row(i).end());
    std::vector<double> col(n);
    for (std::size_t k = 0; k < n; ++k) col[k] = c(k, i);
    std::sort(r.begin(), r.end());
    std::sort(col.begin(), col.end());
    margin = std::min({margin, r[1] - r[0], col[1] - col[0]});
    row_side += r[0];
    col_side += col[0];
  }
  return std::min(margin, std::abs(row_side - col_side) / static_cast<double>(n));
}

Tensor ot_instance(std::size_t b, std::size_t d, SplitMix64& rng, OtMethod method, Tensor& teacher) {
  for (;;) {
    teacher = random_tensor(b, d, rng);
    Tensor student = random_tensor(b, d, rng);
    const auto cost = cosine_cost(FeatureBatch(teacher.to_matrix()), FeatureBatch(student.to_matrix()));
    const double margin = method == OtMethod::kRemd ? remd_margin(cost.entries)
                                                    : assignment_gap(cost.entries);
    if (margin > 0.05) return student;
  }
}

}  // namespace

std::vector<OpCheck> run_gradcheck_suite(std::uint64_t seed, std::size_t points) {
  struct Case {
    std::string name;
    double h;
    double tol;
    std::function<std::pair<ScalarFn, Tensor>(SplitMix64&)> make;
  };
  // A fixed random weighting turns every op output into a scalar without
  // symmetric cancellations.
  auto weighted = [](Var v, const Tensor& w) {
    Var wv = v.tape->constant(w);
    return reduce_sum(mul(v, wv));
  };

  std::vector<Case> cases;
  cases.push_back({"matmul", 1e-5, 1e-6, [&](SplitMix64& rng) {
    Tensor b = random_tensor(4, 2, rng);
    Tensor w = random_tensor(3, 2, rng);
    ScalarFn f = [b, w, weighted](Tape& t, Var x) { return weighted(matmul(x, t.constant(b)), w); };
    return std::make_pair(f, random_tensor(3, 4, rng));
  }});
  cases.push_back({"matmul_rhs", 1e-5, 1e-6, [&](SplitMix64& rng) {
    Tensor a = random_tensor(3, 4, rng);
    Tensor w = random_tensor(3, 2, rng);
    ScalarFn f = [a, w, weighted](Tape& t, Var x) { return weighted(matmul(t.constant(a), x), w); };
    return std::make_pair(f, random_tensor(4, 2, rng));
  }});
  cases.push_back({"add_broadcast", 1e-5, 1e-6, [&](SplitMix64& rng) {
    Tensor a = random_tensor(3, 4, rng);
    Tensor w = random_tensor(3, 4, rng);
    ScalarFn f = [a, w, weighted](Tape& t, Var x) { return weighted(add(t.constant(a), x), w); };
    return std::make_pair(f, random_tensor(1, 4, rng));
  }});
  cases.push_back({"sub", 1e-5, 1e-6, [&](SplitMix64& rng) {
    Tensor a = random_tensor(3, 4, rng);
    Tensor w = random_tensor(3, 4, rng);
    ScalarFn f = [a, w, weighted](Tape& t, Var x) { return weighted(sub(t.constant(a), x), w); };
    return std::make_pair(f, random_tensor(3, 4, rng));
  }});
  cases.push_back({"mul", 1e-5, 1e-6, [&](SplitMix64& rng) {
    Tensor w = random_tensor(3, 4, rng);
    ScalarFn f = [w, weighted](Tape&, Var x) { return weighted(mul(x, x), w); };
    return std::make_pair(f, random_tensor(3, 4, rng));
  }});
  cases.push_back({"relu", 1e-5, 1e-6, [&](SplitMix64& rng) {
    Tensor w = random_tensor(3, 4, rng);
    ScalarFn f = [w, weighted](Tape&, Var x) { return weighted(relu(x), w); };
    return std::make_pair(f, kink_free_tensor(3, 4, rng));
  }});
  cases.push_back({"leaky_relu", 1e-5, 1e-6, [&](SplitMix64& rng) {
    Tensor w = random_tensor(3, 4, rng);
    const double slope = rng.uniform(0.01, 0.3);
    ScalarFn f = [w, slope, weighted](Tape&, Var x) { return weighted(leaky_relu(x, slope), w); };
    return std::make_pair(f, kink_free_tensor(3, 4, rng));
  }});
  cases.push_back({"row_softmax", 1e-5, 1e-6, [&](SplitMix64& rng) {
    Tensor w = random_tensor(3, 4, rng);
    ScalarFn f = [w, weighted](Tape&, Var x) { return weighted(row_softmax(x), w); };
    return std::make_pair(f, random_tensor(3, 4, rng, -2.0, 2.0));
  }});
  cases.push_back({"log", 1e-5, 1e-6, [&](SplitMix64& rng) {
    Tensor w = random_tensor(3, 4, rng);
    ScalarFn f = [w, weighted](Tape&, Var x) { return weighted(log(x), w); };
    return std::make_pair(f, random_tensor(3, 4, rng, 0.5, 2.0));
  }});
  cases.push_back({"scalar_mul", 1e-5, 1e-6, [&](SplitMix64& rng) {
    Tensor w = random_tensor(3, 4, rng);
    const double s = rng.uniform(-2.0, 2.0);
    ScalarFn f = [w, s, weighted](Tape&, Var x) { return weighted(scalar_mul(x, s), w); };
    return std::make_pair(f, random_tensor(3, 4, rng));
  }});
  cases.push_back({"reduce_mean", 1e-5, 1e-6, [&](SplitMix64& rng) {
    ScalarFn f = [](Tape&, Var x) { return reduce_mean(mul(x, x)); };
    return std::make_pair(f, random_tensor(3, 4, rng));
  }});
  cases.push_back({"l2_normalize_rows", 1e-5, 1e-6, [&](SplitMix64& rng) {
    Tensor w = random_tensor(3, 4, rng);
    ScalarFn f = [w, weighted](Tape&, Var x) { return weighted(l2_normalize_rows(x), w); };
    return std::make_pair(f, random_tensor(3, 4, rng));
  }});
  cases.push_back({"cross_entropy", 1e-5, 1e-6, [&](SplitMix64& rng) {
    Tensor labels = one_hot_rows(5, 3, rng);
    ScalarFn f = [labels](Tape& t, Var x) { return cross_entropy_loss(x, t.constant(labels)); };
    return std::make_pair(f, random_tensor(5, 3, rng, -2.0, 2.0));
  }});
  cases.push_back({"kd_loss", 1e-5, 1e-6, [&](SplitMix64& rng) {
    Tensor teacher = random_tensor(5, 3, rng, -3.0, 3.0);
    ScalarFn f = [teacher](Tape& t, Var x) { return kd_loss(x, t.constant(teacher), 4.0); };
    return std::make_pair(f, random_tensor(5, 3, rng, -3.0, 3.0));
  }});
  cases.push_back({"fitnets_l2", 1e-5, 1e-6, [&](SplitMix64& rng) {
    Tensor teacher = random_tensor(4, 3, rng);
    ScalarFn f = [teacher](Tape& t, Var x) { return fitnets_l2_loss(t.constant(teacher), x); };
    return std::make_pair(f, random_tensor(4, 3, rng));
  }});
  cases.push_back({"ot_exact", 1e-5, 1e-4, [&](SplitMix64& rng) {
    Tensor teacher;
    Tensor student = ot_instance(3, 4, rng, OtMethod::kExact, teacher);
    OtParams params;
    params.method = OtMethod::kExact;
    ScalarFn f = [teacher, params](Tape& t, Var x) { return ot_loss_node(t.constant(teacher), x, params); };
    return std::make_pair(f, student);
  }});
  cases.push_back({"ot_exact_teacher_side", 1e-5, 1e-4, [&](SplitMix64& rng) {
    Tensor teacher;
    Tensor student = ot_instance(3, 4, rng, OtMethod::kExact, teacher);
    OtParams params;
    params.method = OtMethod::kExact;
    ScalarFn f = [student, params](Tape& t, Var x) { return ot_loss_node(x, t.constant(student), params); };
    return std::make_pair(f, teacher);
  }});
  cases.push_back({"ot_remd", 1e-5, 1e-4, [&](SplitMix64& rng) {
    Tensor teacher;
    Tensor student = ot_instance(3, 4, rng, OtMethod::kRemd, teacher);
    OtParams params;
    params.method = OtMethod::kRemd;
    ScalarFn f = [teacher, params](Tape& t, Var x) { return ot_loss_node(t.constant(teacher), x, params); };
    return std::make_pair(f, student);
  }});
  cases.push_back({"ot_ipot", 1e-4, 1e-3, [&](SplitMix64& rng) {
    Tensor teacher;
    Tensor student = ot_instance(3, 4, rng, OtMethod::kExact, teacher);
    OtParams params;
    params.method = OtMethod::kIpot;
    params.ipot.num_iters = 5000;
    ScalarFn f = [teacher, params](Tape& t, Var x) { return ot_loss_node(t.constant(teacher), x, params); };
    return std::make_pair(f, student);
  }});

  std::vector<OpCheck> results;
  for (std::size_t c = 0; c < cases.size(); ++c) {
    SplitMix64 rng = SplitMix64::derive(seed, c);
    OpCheck check{cases[c].name, 0.0, cases[c].tol, cases[c].h, points, true};
    for (std::size_t p = 0; p < points; ++p) {
      auto [f, point] = cases[c].make(rng);
      const auto report = grad_check(f, point, cases[c].h, cases[c].tol);
      check.worst_rel_error = std::max(check.worst_rel_error, report.max_rel_error);
      check.passed = check.passed && report.passed;
    }
    results.push_back(check);
  }
  return results;
}

}  // namespace otkd
