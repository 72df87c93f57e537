#include "baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "errors.hpp"

namespace ampsize {

namespace {

void record(SearchResult& res, std::span<const double> x, const EvalOutcome& out) {
  res.trace.push_back(out.d);
  ++res.evaluations;
  if (res.evaluations == 1 || out.d > res.best_d) {
    res.best_d = out.d;
    res.best.assign(x.begin(), x.end());
  }
}

double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }
double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

constexpr int kPrimes[] = {2,   3,   5,   7,   11,  13,  17,  19,  23,  29,  31,  37,  41,  43,  47,
                           53,  59,  61,  67,  71,  73,  79,  83,  89,  97,  101, 103, 107, 109, 113,
                           127, 131, 137, 139, 149, 151, 157, 163, 167, 173, 179, 181, 191, 193, 197};

double radical_inverse(std::uint64_t i, int base) {
  double inv = 1.0 / base, f = inv, r = 0.0;
  while (i > 0) {
    r += f * static_cast<double>(i % base);
    i /= base;
    f *= inv;
  }
  return r;
}

}  // namespace

SearchResult random_search(const Objective& objective, std::size_t dim, long budget, std::uint64_t seed) {
  if (budget < 1) throw ConfigError("random search budget must be >= 1");
  Rng rng = make_rng(seed, "optimizer");
  SearchResult res;
  std::vector<double> x(dim);
  for (long i = 0; i < budget; ++i) {
    for (auto& v : x) v = uniform(rng, -1.0, 1.0);
    record(res, x, objective(x));
  }
  return res;
}

std::vector<int> grid_counts_for_budget(std::size_t dim, long budget) {
  if (budget < 1 || dim == 0) throw ConfigError("grid search needs a positive budget and dimension");
  std::vector<int> counts(dim, 1);
  // Grow dimensions round-robin while the product stays within budget.
  bool grew = true;
  while (grew) {
    grew = false;
    for (std::size_t j = 0; j < dim; ++j) {
      long product = 1;
      for (std::size_t k = 0; k < dim; ++k) product *= (k == j ? counts[k] + 1 : counts[k]);
      if (product <= budget) {
        ++counts[j];
        grew = true;
      }
    }
  }
  return counts;
}

SearchResult grid_search(const Objective& objective, const std::vector<int>& counts) {
  if (counts.empty() || std::any_of(counts.begin(), counts.end(), [](int c) { return c < 1; })) {
    throw ConfigError("grid counts must all be >= 1");
  }
  SearchResult res;
  std::vector<int> idx(counts.size(), 0);
  std::vector<double> x(counts.size());
  while (true) {
    for (std::size_t j = 0; j < counts.size(); ++j) {
      x[j] = counts[j] == 1 ? 0.0 : -1.0 + 2.0 * idx[j] / (counts[j] - 1);
    }
    record(res, x, objective(x));
    std::size_t j = counts.size();
    while (j > 0) {
      --j;
      if (++idx[j] < counts[j]) break;
      idx[j] = 0;
      if (j == 0) return res;
    }
  }
}

double rbf_kernel(std::span<const double> a, std::span<const double> b, const GpHyper& h) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double d = (a[j] - b[j]) / h.lengthscales[j];
    s += d * d;
  }
  return h.signal_variance * std::exp(-0.5 * s);
}

namespace {

Matrix scaled_rows(const Matrix& x, const GpHyper& h) {
  Matrix s = x;
  for (Eigen::Index j = 0; j < x.cols(); ++j) s.col(j) /= h.lengthscales[j];
  return s;
}

// Squared-exponential cross covariance between the rows of a and b.
Matrix cross_kernel(const Matrix& a, const Matrix& b, const GpHyper& h) {
  const Matrix sa = scaled_rows(a, h), sb = scaled_rows(b, h);
  const Vector na = sa.rowwise().squaredNorm(), nb = sb.rowwise().squaredNorm();
  Matrix d2 = -2.0 * sa * sb.transpose();
  d2.colwise() += na;
  d2.rowwise() += nb.transpose();
  return h.signal_variance * (-0.5 * d2.cwiseMax(0.0)).array().exp().matrix();
}

}  // namespace

GPModel GPModel::fit_with(const Matrix& inputs, const Vector& targets, const GpHyper& hyper) {
  if (inputs.rows() != targets.size() || inputs.rows() < 1) throw ShapeError("GP inputs/targets mismatch");
  if (static_cast<Eigen::Index>(hyper.lengthscales.size()) != inputs.cols()) {
    throw ShapeError("GP lengthscale count does not match input dimension");
  }
  GPModel m;
  m.x_ = inputs;
  m.hyper_ = hyper;
  const double n = static_cast<double>(targets.size());
  m.y_mean_ = targets.mean();
  const double var = (targets.array() - m.y_mean_).square().sum() / n;
  m.y_std_ = std::sqrt(var);
  if (!(m.y_std_ > 1e-12 * std::max(1.0, std::abs(m.y_mean_)))) {
    // All targets identical: prior with zero signal variance around the mean.
    m.degenerate_ = true;
    m.y_std_ = 1.0;
    m.hyper_.signal_variance = 0.0;
    m.y_ = Vector::Zero(targets.size());
    m.alpha_ = Vector::Zero(targets.size());
    return m;
  }
  m.y_ = (targets.array() - m.y_mean_) / m.y_std_;

  const Matrix k = cross_kernel(inputs, inputs, hyper);
  double jitter = std::max(hyper.noise_variance, 1e-8);
  for (;;) {
    Matrix kn = k;
    kn.diagonal().array() += jitter;
    m.chol_.compute(kn);
    if (m.chol_.info() == Eigen::Success && m.chol_.matrixLLT().diagonal().minCoeff() > 0.0) break;
    jitter *= 10.0;
    if (jitter > 1e-4 * (1.0 + 1e-9)) throw std::runtime_error("GP covariance is not positive definite");
  }
  m.hyper_.noise_variance = jitter;
  m.alpha_ = m.chol_.solve(m.y_);
  const double logdet = 2.0 * m.chol_.matrixLLT().diagonal().array().log().sum();
  m.lml_ = -0.5 * m.y_.dot(m.alpha_) - 0.5 * logdet - 0.5 * n * std::log(2.0 * std::numbers::pi);
  return m;
}

void GPModel::predict(const Matrix& x, Vector& mean, Vector& variance) const {
  if (degenerate_) {
    mean = Vector::Zero(x.rows());
    variance = Vector::Zero(x.rows());
    return;
  }
  const Matrix ks = cross_kernel(x_, x, hyper_);  // N x M
  mean = ks.transpose() * alpha_;
  const Matrix v = chol_.matrixL().solve(ks);
  variance = (hyper_.signal_variance - v.colwise().squaredNorm().array()).cwiseMax(0.0).matrix().transpose();
}

GPModel gp_fit(const Matrix& inputs, const Vector& targets, Rng& rng, int candidates,
               const std::optional<GpHyper>& warm) {
  if (inputs.rows() < 2) throw ShapeError("gp_fit needs at least two points");
  const auto dim = static_cast<std::size_t>(inputs.cols());
  std::optional<GPModel> best;
  auto consider = [&](const GpHyper& h) {
    try {
      GPModel m = GPModel::fit_with(inputs, targets, h);
      if (m.degenerate()) {
        best = std::move(m);
        return true;
      }
      if (!best || m.log_marginal_likelihood() > best->log_marginal_likelihood()) best = std::move(m);
    } catch (const std::runtime_error&) {
      // Candidate rejected: covariance not factorizable even with maximal jitter.
    }
    return false;
  };
  if (warm && warm->lengthscales.size() == dim && warm->signal_variance > 0.0) {
    if (consider(*warm)) return *best;
  }
  for (int c = 0; c < candidates; ++c) {
    GpHyper h;
    h.lengthscales.resize(dim);
    for (auto& l : h.lengthscales) l = std::exp(uniform(rng, std::log(1e-2), std::log(10.0)));
    h.signal_variance = std::exp(uniform(rng, std::log(1e-2), std::log(1e2)));
    if (consider(h)) return *best;
  }
  if (!best) throw std::runtime_error("no GP hyperparameter candidate produced a valid model");
  return *best;
}

double expected_improvement(double mu, double sigma, double best) {
  if (!(sigma > 0.0)) return std::max(mu - best, 0.0);
  const double z = (mu - best) / sigma;
  return std::max((mu - best) * normal_cdf(z) + sigma * normal_pdf(z), 0.0);
}

std::size_t ei_acquire(const GPModel& model, double best, const Matrix& candidates) {
  if (candidates.rows() < 1) throw ShapeError("ei_acquire needs at least one candidate");
  Vector mean, var;
  model.predict(candidates, mean, var);
  std::size_t arg = 0;
  double top = -1.0;
  for (Eigen::Index i = 0; i < candidates.rows(); ++i) {
    const double ei = expected_improvement(mean[i], std::sqrt(var[i]), best);
    if (ei > top) {
      top = ei;
      arg = static_cast<std::size_t>(i);
    }
  }
  return arg;
}

Matrix shifted_halton(std::size_t count, std::size_t dim, Rng& rng) {
  if (dim > std::size(kPrimes)) throw ConfigError("Halton candidates support at most 45 dimensions");
  std::vector<double> shift(dim);
  for (auto& s : shift) s = uniform01(rng);
  Matrix out(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t j = 0; j < dim; ++j) {
      double v = radical_inverse(i + 1, kPrimes[j]) + shift[j];
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v - std::floor(v);
    }
  }
  return out;
}

SearchResult bo_loop(const Objective& objective, std::size_t dim, long budget, std::uint64_t seed,
                     const BoConfig& config) {
  if (config.init_count < 2 || budget <= config.init_count) {
    throw ConfigError("BO needs budget > init_count >= 2");
  }
  Rng init_rng = make_rng(seed, "init");
  Rng rng = make_rng(seed, "optimizer");
  SearchResult res;
  Matrix inputs(budget, static_cast<Eigen::Index>(dim));  // [0,1]^n
  Vector targets(budget);
  std::vector<double> x(dim);
  auto evaluate = [&](long i) {
    for (std::size_t j = 0; j < dim; ++j) x[j] = 2.0 * inputs(i, static_cast<Eigen::Index>(j)) - 1.0;
    const EvalOutcome out = objective(x);
    targets[i] = out.d;
    record(res, x, out);
  };
  for (long i = 0; i < config.init_count; ++i) {
    for (std::size_t j = 0; j < dim; ++j) inputs(i, static_cast<Eigen::Index>(j)) = uniform01(init_rng);
    evaluate(i);
  }
  std::optional<GpHyper> hyper;
  for (long i = config.init_count; i < budget; ++i) {
    const Matrix seen = inputs.topRows(i);
    const Vector y = targets.head(i);
    GPModel model = (!hyper || (i - config.init_count) % config.refit_every == 0)
                        ? gp_fit(seen, y, rng, config.hyper_candidates, hyper)
                        : GPModel::fit_with(seen, y, *hyper);
    if (!model.degenerate()) hyper = model.hyper();
    const Matrix cand = shifted_halton(static_cast<std::size_t>(config.candidates), dim, rng);
    const double best = model.standardize(y.maxCoeff());
    const std::size_t pick = ei_acquire(model, best, cand);
    inputs.row(i) = cand.row(static_cast<Eigen::Index>(pick));
    evaluate(i);
  }
  return res;
}

}  // namespace ampsize
