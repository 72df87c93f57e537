#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "neural.hpp"
#include "random.hpp"

namespace ampsize {

struct EvalOutcome {
  double d = 0.0;
  bool satisfied = false;
};

// Every optimizer sees the same callback over normalized actions in [-1, 1]^n.
using Objective = std::function<EvalOutcome(std::span<const double> normalized)>;

struct SearchResult {
  std::vector<double> best;    // normalized
  double best_d = 0.0;
  std::vector<double> trace;   // d per evaluation, in order
  long evaluations = 0;
};

SearchResult random_search(const Objective& objective, std::size_t dim, long budget, std::uint64_t seed);

// Near-equal per-dimension counts whose product does not exceed budget.
std::vector<int> grid_counts_for_budget(std::size_t dim, long budget);

// Enumerates Π counts[j] points, first dimension slowest. Dimension j takes
// counts[j] evenly spaced values over [-1, 1] (the midpoint 0 when counts[j] == 1).
SearchResult grid_search(const Objective& objective, const std::vector<int>& counts);

struct GpHyper {
  std::vector<double> lengthscales;
  double signal_variance = 1.0;
  double noise_variance = 1e-8;
};

class GPModel {
 public:
  // inputs: one point per row in [0,1]^n. Targets are standardized internally.
  static GPModel fit_with(const Matrix& inputs, const Vector& targets, const GpHyper& hyper);

  double log_marginal_likelihood() const { return lml_; }
  const GpHyper& hyper() const { return hyper_; }
  bool degenerate() const { return degenerate_; }

  // Posterior mean and variance in standardized units, one row of x per query.
  void predict(const Matrix& x, Vector& mean, Vector& variance) const;
  double standardize(double y) const { return degenerate_ ? 0.0 : (y - y_mean_) / y_std_; }
  double unstandardize(double z) const { return degenerate_ ? y_mean_ : y_mean_ + z * y_std_; }
  const Vector& standardized_targets() const { return y_; }

 private:
  Matrix x_;
  Vector y_;
  double y_mean_ = 0.0, y_std_ = 1.0;
  GpHyper hyper_;
  Eigen::LLT<Matrix> chol_;
  Vector alpha_;
  double lml_ = 0.0;
  bool degenerate_ = false;
};

double rbf_kernel(std::span<const double> a, std::span<const double> b, const GpHyper& h);

// Picks hyperparameters by log marginal likelihood over `candidates` seeded
// random draws (lengthscales log-uniform in [1e-2, 10], signal variance
// log-uniform in [1e-2, 1e2]); `warm` is scored as an extra candidate.
GPModel gp_fit(const Matrix& inputs, const Vector& targets, Rng& rng, int candidates = 200,
               const std::optional<GpHyper>& warm = std::nullopt);

// EI for maximization. sigma == 0 gives max(mu - best, 0).
double expected_improvement(double mu, double sigma, double best);

// Index of the candidate row (in [0,1]^n) with the largest EI; best is in
// standardized units.
std::size_t ei_acquire(const GPModel& model, double best, const Matrix& candidates);

// Halton points in [0,1]^dim with a random Cranley-Patterson shift.
Matrix shifted_halton(std::size_t count, std::size_t dim, Rng& rng);

struct BoConfig {
  int init_count = 50;
  int candidates = 4096;
  int hyper_candidates = 200;
  int refit_every = 10;  // hyperparameter search cadence, in evaluations
};

SearchResult bo_loop(const Objective& objective, std::size_t dim, long budget, std::uint64_t seed,
                     const BoConfig& config = {});

}  // namespace ampsize
