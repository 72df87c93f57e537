#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "neural.hpp"
#include "random.hpp"
#include "rlenv.hpp"

namespace ampsize {

// Encoder-decoder actor. The encoder GRU reads one position per ordered
// component (its local features plus a tanh projection of the global
// observation); the decoder GRU starts from the final encoder state, takes the
// previous position's emitted group as input, and a per-position dense+tanh
// head emits that component's parameters.
class ActorNet {
 public:
  struct Cache {
    bool valid = false;
    Matrix global, g;
    std::vector<GruCache> enc, dec;
    std::vector<Matrix> s_next, y;
  };

  ActorNet() = default;
  ActorNet(const ObservationLayout& layout, Eigen::Index hidden, Eigen::Index global_proj);

  // obs: one observation per column. Returns normalized actions, one per column.
  Matrix forward(const Matrix& obs, Cache* cache = nullptr) const;
  // Parameter gradients of a loss whose gradient w.r.t. the action batch is d_action.
  ParameterSet backward(const Cache& cache, const Matrix& d_action) const;

  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }
  const ObservationLayout& layout() const { return layout_; }

 private:
  ObservationLayout layout_;
  ParameterSet params_;
  GruParams enc_, dec_;
  std::size_t wg_ = 0, bg_ = 0;
  std::vector<std::size_t> wo_, bo_;
  Eigen::Index group_max_ = 0;
};

// MLP over (flattened observation, normalized action) -> Q.
class CriticNet {
 public:
  struct Cache {
    bool valid = false;
    std::vector<Matrix> inputs;   // input to each layer
    std::vector<Matrix> outputs;  // output of each layer
  };

  CriticNet() = default;
  CriticNet(std::size_t obs_dim, std::size_t action_dim, const std::vector<Eigen::Index>& hidden);

  Matrix forward(const Matrix& obs, const Matrix& action, Cache* cache = nullptr) const;
  // dq: dL/dQ (1 x batch). Fills grads (if non-null) and dL/daction (if non-null).
  void backward(const Cache& cache, const Matrix& dq, ParameterSet* grads, Matrix* d_action) const;

  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }

 private:
  std::size_t obs_dim_ = 0, action_dim_ = 0;
  ParameterSet params_;
  std::vector<std::size_t> w_, b_;
};

class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 50000);

  void push(Transition t);
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  // Oldest-first view index i (0 = oldest surviving).
  const Transition& at(std::size_t i) const;
  std::vector<std::size_t> sample(std::size_t batch, Rng& rng) const;  // raw slots
  const Transition& slot(std::size_t i) const { return items_[i]; }
  std::size_t head() const { return head_; }
  void restore(std::vector<Transition> items, std::size_t head);

 private:
  std::size_t capacity_;
  std::vector<Transition> items_;
  std::size_t head_ = 0;  // next slot to overwrite once full
};

struct NoiseConfig {
  double sigma_start = 1.0;
  double sigma_end = 0.05;
  long decay_steps = 6000;
  bool param_noise = false;
  double param_noise_scale = 0.05;
  double param_noise_target = 0.1;  // δ
  double param_noise_factor = 1.01;
};

struct AgentConfig {
  double gamma = 0.99;
  double tau = 0.005;
  double actor_lr = 1e-4;
  double critic_lr = 1e-3;
  std::size_t batch_size = 64;
  std::size_t buffer_capacity = 50000;
  std::size_t warmup = 1000;
  Eigen::Index gru_hidden = 64;
  Eigen::Index global_proj = 32;
  std::vector<Eigen::Index> critic_hidden = {128, 128};
  NoiseConfig noise;
};

// ã_j ~ U(max(a_j - σ, -1), min(a_j + σ, 1)).
std::vector<double> truncated_uniform_noise(const std::vector<double>& action, double sigma, Rng& rng);

double decayed_sigma(const NoiseConfig& noise, long step);

// Scale ×factor when distance < δ, ÷factor otherwise (ties shrink).
double adapt_parameter_noise(const NoiseConfig& noise, double scale, double distance);

struct TrainStats {
  double critic_loss = 0.0;
  double actor_objective = 0.0;
};

struct Batch {
  Matrix obs, action, reward, next_obs, done;  // columns are samples
};

class DdpgAgent {
 public:
  DdpgAgent(const ObservationLayout& layout, AgentConfig config, std::uint64_t seed);

  std::vector<double> act(const Observation& obs, bool explore);
  void remember(Transition t);
  bool ready() const { return buffer_.size() >= std::max(config_.warmup, config_.batch_size); }

  TrainStats train_step();
  // One update on a fixed batch. Actor and target updates are optional so the
  // critic can be exercised alone.
  TrainStats train_on_batch(const Batch& batch, bool update_actor = true, bool update_targets = true);
  Batch sample_batch();
  Batch make_batch(const std::vector<std::size_t>& slots) const;

  void begin_episode();
  void end_episode();

  double sigma() const { return decayed_sigma(config_.noise, steps_); }
  double param_noise_scale() const { return param_scale_; }
  long steps() const { return steps_; }

  ActorNet& actor() { return actor_; }
  CriticNet& critic() { return critic_; }
  ActorNet& target_actor() { return actor_target_; }
  CriticNet& target_critic() { return critic_target_; }
  const ReplayBuffer& buffer() const { return buffer_; }
  const AgentConfig& config() const { return config_; }

  void save(const std::string& path, bool include_buffer) const;
  void load(const std::string& path);

 private:
  ObservationLayout layout_;
  AgentConfig config_;
  Rng rng_;
  ActorNet actor_, actor_target_, actor_perturbed_;
  CriticNet critic_, critic_target_;
  Adam actor_opt_, critic_opt_;
  ReplayBuffer buffer_;
  long steps_ = 0;
  double param_scale_ = 0.0;
};

// θ' <- τ θ + (1 - τ) θ'
void soft_update(ParameterSet& target, const ParameterSet& online, double tau);

}  // namespace ampsize
