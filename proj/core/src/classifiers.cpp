#include "plcml/classifiers.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "plcml/csv.hpp"
#include "plcml/rng.hpp"

namespace plcml {

double kernel_eval(const SvmKernel& k, std::span<const double> x,
                   std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("kernel: dim mismatch");
  if (k.kind == KernelKind::Linear) {
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) acc += x[i] * y[i];
    return acc;
  }
  if (k.sigma <= 0.0) throw std::invalid_argument("rbf kernel: sigma must be > 0");
  return std::exp(-squared_distance(x, y) / (k.sigma * k.sigma));
}

double median_pairwise_distance(const Tensor2& points) {
  const std::size_t n = points.rows;
  if (n < 2) throw std::invalid_argument("median distance: need >= 2 points");
  std::vector<double> d;
  d.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      d.push_back(euclidean_distance(points.row(i), points.row(j)));
  std::sort(d.begin(), d.end());
  const std::size_t m = d.size();
  const double med = (m % 2 == 1) ? d[m / 2] : 0.5 * (d[m / 2 - 1] + d[m / 2]);
  return med > 0.0 ? med : 1.0;
}

namespace {

double dual_objective(const std::vector<double>& alpha, const std::vector<double>& y,
                      const Tensor2& gram) {
  const std::size_t n = alpha.size();
  double sum_a = 0.0;
  double quad = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (alpha[i] == 0.0) continue;
    sum_a += alpha[i];
    const double ayi = alpha[i] * y[i];
    for (std::size_t j = 0; j < n; ++j) {
      if (alpha[j] == 0.0) continue;
      quad += ayi * alpha[j] * y[j] * gram(i, j);
    }
  }
  return sum_a - 0.5 * quad;
}

}  // namespace

SvmTrainResult svm_train(const Tensor2& x, const std::vector<double>& y,
                         const SvmKernel& kernel, const SvmTrainOptions& opts) {
  const std::size_t n = x.rows;
  if (n < 2 || y.size() != n)
    throw std::invalid_argument("svm_train: bad dataset shape");
  bool has_pos = false;
  bool has_neg = false;
  for (const double v : y) {
    if (v == 1.0)
      has_pos = true;
    else if (v == -1.0)
      has_neg = true;
    else
      throw std::invalid_argument("svm_train: labels must be exactly +1 or -1");
  }
  if (!has_pos || !has_neg)
    throw std::invalid_argument("svm_train: need both classes present");
  if (opts.c <= 0.0) throw std::invalid_argument("svm_train: C must be > 0");

  Tensor2 gram(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      const double k = kernel_eval(kernel, x.row(i), x.row(j));
      gram(i, j) = k;
      gram(j, i) = k;
    }
  }

  std::vector<double> alpha(n, 0.0);
  double b = 0.0;
  Rng rng(opts.seed);
  const double C = opts.c;
  const double tol = opts.tol;

  auto f_of = [&](std::size_t i) {
    double acc = b;
    for (std::size_t j = 0; j < n; ++j)
      if (alpha[j] != 0.0) acc += alpha[j] * y[j] * gram(i, j);
    return acc;
  };

  SvmTrainResult result;
  const std::size_t max_sweeps = std::max<std::size_t>(1, opts.max_sweep_factor * n);
  bool converged = false;

  while (result.sweeps < max_sweeps) {
    ++result.sweeps;
    std::size_t violations = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double ei = f_of(i) - y[i];
      const bool violates = (y[i] * ei < -tol && alpha[i] < C) ||
                            (y[i] * ei > tol && alpha[i] > 0.0);
      if (!violates) continue;
      ++violations;

      std::size_t j = static_cast<std::size_t>(rng.below(n - 1));
      if (j >= i) ++j;
      const double ej = f_of(j) - y[j];

      const double ai_old = alpha[i];
      const double aj_old = alpha[j];
      double lo, hi;
      if (y[i] != y[j]) {
        lo = std::max(0.0, aj_old - ai_old);
        hi = std::min(C, C + aj_old - ai_old);
      } else {
        lo = std::max(0.0, ai_old + aj_old - C);
        hi = std::min(C, ai_old + aj_old);
      }
      if (lo >= hi) continue;
      const double eta = 2.0 * gram(i, j) - gram(i, i) - gram(j, j);
      if (eta >= 0.0) continue;

      double aj_new = aj_old - y[j] * (ei - ej) / eta;
      aj_new = std::clamp(aj_new, lo, hi);
      if (std::abs(aj_new - aj_old) < 1e-7) continue;
      const double ai_new =
          std::clamp(ai_old + y[i] * y[j] * (aj_old - aj_new), 0.0, C);

      const double b1 = b - ei - y[i] * (ai_new - ai_old) * gram(i, i) -
                        y[j] * (aj_new - aj_old) * gram(i, j);
      const double b2 = b - ej - y[i] * (ai_new - ai_old) * gram(i, j) -
                        y[j] * (aj_new - aj_old) * gram(j, j);
      if (ai_new > 0.0 && ai_new < C)
        b = b1;
      else if (aj_new > 0.0 && aj_new < C)
        b = b2;
      else
        b = 0.5 * (b1 + b2);

      alpha[i] = ai_new;
      alpha[j] = aj_new;
    }
    result.dual_history.push_back(dual_objective(alpha, y, gram));
    if (violations == 0) {
      converged = true;
      break;
    }
  }
  result.converged = converged;

  double say = 0.0;
  for (std::size_t i = 0; i < n; ++i) say += alpha[i] * y[i];
  result.sum_alpha_y = say;

  SvmModel& m = result.model;
  m.kernel = kernel;
  m.c = C;
  m.bias = b;
  std::vector<std::size_t> sv;
  for (std::size_t i = 0; i < n; ++i)
    if (alpha[i] > 1e-12) sv.push_back(i);
  m.support_vectors = take_rows(x, sv);
  m.alphas.reserve(sv.size());
  m.labels.reserve(sv.size());
  for (const std::size_t i : sv) {
    m.alphas.push_back(alpha[i]);
    m.labels.push_back(y[i]);
  }
  return result;
}

double svm_decision(const SvmModel& m, std::span<const double> x) {
  double acc = m.bias;
  for (std::size_t i = 0; i < m.alphas.size(); ++i)
    acc += m.alphas[i] * m.labels[i] * kernel_eval(m.kernel, m.support_vectors.row(i), x);
  return acc;
}

double svm_predict(const SvmModel& m, std::span<const double> x) {
  return svm_decision(m, x) < 0.0 ? -1.0 : 1.0;
}

SvmOvrModel svm_ovr_train(const Tensor2& x, const std::vector<int>& labels,
                          const SvmKernel& kernel, const SvmTrainOptions& opts) {
  if (labels.size() != x.rows)
    throw std::invalid_argument("svm_ovr_train: label count mismatch");
  const std::set<int> ids(labels.begin(), labels.end());
  if (ids.size() < 2) throw std::invalid_argument("svm_ovr_train: need >= 2 classes");

  SvmOvrModel m;
  m.class_ids.assign(ids.begin(), ids.end());
  SvmTrainOptions per = opts;
  for (const int cls : m.class_ids) {
    std::vector<double> y(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i)
      y[i] = labels[i] == cls ? 1.0 : -1.0;
    per.seed = Rng(opts.seed).split(static_cast<std::uint64_t>(cls)).seed();
    m.machines.push_back(svm_train(x, y, kernel, per).model);
  }
  return m;
}

int svm_ovr_predict(const SvmOvrModel& m, std::span<const double> x) {
  if (m.machines.empty()) throw std::invalid_argument("svm_ovr_predict: empty model");
  int best = m.class_ids[0];
  double best_val = -HUGE_VAL;
  for (std::size_t i = 0; i < m.machines.size(); ++i) {
    const double v = svm_decision(m.machines[i], x);
    if (v > best_val) {
      best_val = v;
      best = m.class_ids[i];
    }
  }
  return best;
}

std::string svm_to_json(const SvmModel& m) {
  std::ostringstream out;
  out << "{\"kernel\":\"" << (m.kernel.kind == KernelKind::Rbf ? "rbf" : "linear")
      << "\",\"sigma\":" << format_double(m.kernel.sigma)
      << ",\"c\":" << format_double(m.c) << ",\"bias\":" << format_double(m.bias)
      << ",\"rows\":" << m.support_vectors.rows << ",\"cols\":" << m.support_vectors.cols
      << ",\"support_vectors\":[";
  for (std::size_t i = 0; i < m.support_vectors.data.size(); ++i) {
    if (i) out << ',';
    out << format_double(m.support_vectors.data[i]);
  }
  out << "],\"alphas\":[";
  for (std::size_t i = 0; i < m.alphas.size(); ++i) {
    if (i) out << ',';
    out << format_double(m.alphas[i]);
  }
  out << "],\"labels\":[";
  for (std::size_t i = 0; i < m.labels.size(); ++i) {
    if (i) out << ',';
    out << format_double(m.labels[i]);
  }
  out << "]}";
  return out.str();
}

SvmModel svm_from_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  SvmModel m;
  const std::string kind = j.at("kernel").get<std::string>();
  if (kind == "rbf")
    m.kernel.kind = KernelKind::Rbf;
  else if (kind == "linear")
    m.kernel.kind = KernelKind::Linear;
  else
    throw std::invalid_argument("svm json: unknown kernel " + kind);
  m.kernel.sigma = j.at("sigma").get<double>();
  m.c = j.at("c").get<double>();
  m.bias = j.at("bias").get<double>();
  const std::size_t rows = j.at("rows").get<std::size_t>();
  const std::size_t cols = j.at("cols").get<std::size_t>();
  m.support_vectors = Tensor2(rows, cols);
  const auto& sv = j.at("support_vectors");
  if (sv.size() != rows * cols)
    throw std::invalid_argument("svm json: support vector count mismatch");
  for (std::size_t i = 0; i < rows * cols; ++i)
    m.support_vectors.data[i] = sv[i].get<double>();
  for (const auto& a : j.at("alphas")) m.alphas.push_back(a.get<double>());
  for (const auto& l : j.at("labels")) m.labels.push_back(l.get<double>());
  if (m.alphas.size() != rows || m.labels.size() != rows)
    throw std::invalid_argument("svm json: alpha/label count mismatch");
  return m;
}

void save_svm(const SvmModel& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_svm: cannot open " + path);
  out << svm_to_json(m) << '\n';
}

SvmModel load_svm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_svm: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return svm_from_json(buf.str());
}

int knn_predict(const KnnModel& m, std::span<const double> x) {
  const std::size_t n = m.points.rows;
  if (n == 0 || m.labels.size() != n)
    throw std::invalid_argument("knn: bad model");
  if (m.k == 0 || m.k > n || m.k % 2 == 0)
    throw std::invalid_argument("knn: k must be odd and in [1, N]");

  std::vector<std::pair<double, std::size_t>> dist(n);
  for (std::size_t i = 0; i < n; ++i)
    dist[i] = {squared_distance(m.points.row(i), x), i};
  std::partial_sort(dist.begin(), dist.begin() + static_cast<long>(m.k), dist.end());

  std::map<int, std::size_t> votes;
  for (std::size_t i = 0; i < m.k; ++i) votes[m.labels[dist[i].second]] += 1;
  int best = votes.begin()->first;
  std::size_t best_count = votes.begin()->second;
  for (const auto& [label, count] : votes) {
    if (count > best_count) {
      best = label;
      best_count = count;
    }
  }
  return best;
}

std::vector<int> knn_predict_batch(const KnnModel& m, const Tensor2& xs) {
  std::vector<int> out(xs.rows);
  for (std::size_t i = 0; i < xs.rows; ++i) out[i] = knn_predict(m, xs.row(i));
  return out;
}

}  // namespace plcml
