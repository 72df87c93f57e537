#include "agent.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "errors.hpp"

namespace ampsize {

ActorNet::ActorNet(const ObservationLayout& layout, Eigen::Index hidden, Eigen::Index global_proj)
    : layout_(layout) {
  if (layout.positions == 0) throw ShapeError("actor needs at least one sequence position");
  for (const auto& g : layout.group_params) group_max_ = std::max<Eigen::Index>(group_max_, g.size());
  const auto gdim = static_cast<Eigen::Index>(layout.global_dim);
  const auto ldim = static_cast<Eigen::Index>(layout.local_dim);
  wg_ = params_.add("global.W", global_proj, gdim, gdim);
  bg_ = params_.add("global.b", global_proj, 1, gdim);
  enc_ = GruParams::add_to(params_, "encoder", ldim + global_proj, hidden);
  dec_ = GruParams::add_to(params_, "decoder", group_max_, hidden);
  for (std::size_t h = 0; h < layout.positions; ++h) {
    const auto out = static_cast<Eigen::Index>(layout.group_params[h].size());
    wo_.push_back(params_.add("head" + std::to_string(h) + ".W", out, hidden, hidden));
    bo_.push_back(params_.add("head" + std::to_string(h) + ".b", out, 1, hidden));
  }
}

Matrix ActorNet::forward(const Matrix& obs, Cache* cache) const {
  if (obs.rows() != static_cast<Eigen::Index>(layout_.total())) {
    throw ShapeError("actor input has " + std::to_string(obs.rows()) + " rows, expected " +
                     std::to_string(layout_.total()));
  }
  const Eigen::Index batch = obs.cols();
  const auto gdim = static_cast<Eigen::Index>(layout_.global_dim);
  const auto ldim = static_cast<Eigen::Index>(layout_.local_dim);
  const std::size_t positions = layout_.positions;

  Matrix global = obs.topRows(gdim);
  Matrix g = dense_forward(params_[wg_], params_[bg_].col(0), global, Activation::Tanh);

  if (cache) {
    cache->enc.assign(positions, {});
    cache->dec.assign(positions, {});
    cache->s_next.assign(positions, {});
    cache->y.assign(positions, {});
  }
  Matrix h = Matrix::Zero(enc_.hidden, batch);
  Matrix e(ldim + g.rows(), batch);
  for (std::size_t t = 0; t < positions; ++t) {
    e.topRows(ldim) = obs.middleRows(gdim + static_cast<Eigen::Index>(t) * ldim, ldim);
    e.bottomRows(g.rows()) = g;
    h = gru_step(params_, enc_, h, e, cache ? &cache->enc[t] : nullptr);
  }

  Matrix action = Matrix::Zero(static_cast<Eigen::Index>(layout_.action_dim), batch);
  Matrix s = h;
  Matrix d = Matrix::Zero(group_max_, batch);
  for (std::size_t t = 0; t < positions; ++t) {
    s = gru_step(params_, dec_, s, d, cache ? &cache->dec[t] : nullptr);
    Matrix y = dense_forward(params_[wo_[t]], params_[bo_[t]].col(0), s, Activation::Tanh);
    const auto& group = layout_.group_params[t];
    for (std::size_t k = 0; k < group.size(); ++k) action.row(static_cast<Eigen::Index>(group[k])) = y.row(k);
    d.setZero();
    d.topRows(y.rows()) = y;
    if (cache) {
      cache->s_next[t] = s;
      cache->y[t] = std::move(y);
    }
  }
  if (cache) {
    cache->global = std::move(global);
    cache->g = std::move(g);
    cache->valid = true;
  }
  return action;
}

ParameterSet ActorNet::backward(const Cache& cache, const Matrix& d_action) const {
  if (!cache.valid) throw ContractError("actor backward() without a recorded forward pass");
  const Eigen::Index batch = cache.g.cols();
  if (d_action.rows() != static_cast<Eigen::Index>(layout_.action_dim) || d_action.cols() != batch) {
    throw ShapeError("actor backward gradient has the wrong shape");
  }
  const std::size_t positions = layout_.positions;
  ParameterSet grads = params_.zeros_like();

  Matrix ds = Matrix::Zero(dec_.hidden, batch);
  Matrix dd_next = Matrix::Zero(group_max_, batch);  // gradient w.r.t. decoder input of position t+1
  Matrix dh_prev, dx;
  for (std::size_t t = positions; t-- > 0;) {
    const auto& group = layout_.group_params[t];
    const auto out = static_cast<Eigen::Index>(group.size());
    Matrix dy(out, batch);
    for (std::size_t k = 0; k < group.size(); ++k) dy.row(k) = d_action.row(static_cast<Eigen::Index>(group[k]));
    dy += dd_next.topRows(out);
    const Matrix da = activation_backward(dy, cache.y[t], Activation::Tanh);
    grads[wo_[t]].noalias() += da * cache.s_next[t].transpose();
    grads[bo_[t]] += da.rowwise().sum();
    ds.noalias() += params_[wo_[t]].transpose() * da;
    gru_backward(params_, dec_, cache.dec[t], ds, grads, dh_prev, dx);
    ds = dh_prev;
    dd_next = dx;
  }
  Matrix dh = ds;
  Matrix dg = Matrix::Zero(cache.g.rows(), batch);
  for (std::size_t t = positions; t-- > 0;) {
    gru_backward(params_, enc_, cache.enc[t], dh, grads, dh_prev, dx);
    dh = dh_prev;
    dg += dx.bottomRows(cache.g.rows());
  }
  const Matrix dpre = activation_backward(dg, cache.g, Activation::Tanh);
  grads[wg_].noalias() += dpre * cache.global.transpose();
  grads[bg_] += dpre.rowwise().sum();
  return grads;
}

CriticNet::CriticNet(std::size_t obs_dim, std::size_t action_dim, const std::vector<Eigen::Index>& hidden)
    : obs_dim_(obs_dim), action_dim_(action_dim) {
  Eigen::Index in = static_cast<Eigen::Index>(obs_dim + action_dim);
  std::size_t layer = 0;
  for (Eigen::Index width : hidden) {
    w_.push_back(params_.add("fc" + std::to_string(layer) + ".W", width, in, in));
    b_.push_back(params_.add("fc" + std::to_string(layer) + ".b", width, 1, in));
    in = width;
    ++layer;
  }
  w_.push_back(params_.add("out.W", 1, in, in));
  b_.push_back(params_.add("out.b", 1, 1, in));
}

Matrix CriticNet::forward(const Matrix& obs, const Matrix& action, Cache* cache) const {
  if (obs.rows() != static_cast<Eigen::Index>(obs_dim_) || action.rows() != static_cast<Eigen::Index>(action_dim_) ||
      obs.cols() != action.cols()) {
    throw ShapeError("critic input shape mismatch");
  }
  Matrix x(obs.rows() + action.rows(), obs.cols());
  x.topRows(obs.rows()) = obs;
  x.bottomRows(action.rows()) = action;
  if (cache) {
    cache->inputs.clear();
    cache->outputs.clear();
  }
  for (std::size_t l = 0; l < w_.size(); ++l) {
    const Activation act = l + 1 == w_.size() ? Activation::Identity : Activation::Relu;
    Matrix y = dense_forward(params_[w_[l]], params_[b_[l]].col(0), x, act);
    if (cache) {
      cache->inputs.push_back(std::move(x));
      cache->outputs.push_back(y);
    }
    x = std::move(y);
  }
  if (cache) cache->valid = true;
  return x;
}

void CriticNet::backward(const Cache& cache, const Matrix& dq, ParameterSet* grads, Matrix* d_action) const {
  if (!cache.valid) throw ContractError("critic backward() without a recorded forward pass");
  Matrix up = dq;
  for (std::size_t l = w_.size(); l-- > 0;) {
    const Activation act = l + 1 == w_.size() ? Activation::Identity : Activation::Relu;
    const Matrix da = activation_backward(up, cache.outputs[l], act);
    if (grads) {
      (*grads)[w_[l]].noalias() += da * cache.inputs[l].transpose();
      (*grads)[b_[l]] += da.rowwise().sum();
    }
    if (l > 0 || d_action) up = params_[w_[l]].transpose() * da;
  }
  if (d_action) *d_action = up.bottomRows(static_cast<Eigen::Index>(action_dim_));
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ConfigError("replay buffer capacity must be positive");
}

void ReplayBuffer::push(Transition t) {
  if (items_.size() < capacity_) {
    items_.push_back(std::move(t));
  } else {
    items_[head_] = std::move(t);
    head_ = (head_ + 1) % capacity_;
  }
}

const Transition& ReplayBuffer::at(std::size_t i) const {
  if (i >= items_.size()) throw std::out_of_range("replay buffer index");
  return items_.size() < capacity_ ? items_[i] : items_[(head_ + i) % capacity_];
}

std::vector<std::size_t> ReplayBuffer::sample(std::size_t batch, Rng& rng) const {
  if (items_.size() < batch || batch == 0) {
    throw ContractError("replay buffer holds " + std::to_string(items_.size()) + " transitions, batch needs " +
                        std::to_string(batch));
  }
  std::vector<std::size_t> out(batch);
  for (auto& s : out) s = uniform_index(rng, items_.size());
  return out;
}

void ReplayBuffer::restore(std::vector<Transition> items, std::size_t head) {
  if (items.size() > capacity_) throw ShapeError("restored buffer exceeds capacity");
  items_ = std::move(items);
  head_ = head;
}

std::vector<double> truncated_uniform_noise(const std::vector<double>& action, double sigma, Rng& rng) {
  std::vector<double> out(action.size());
  for (std::size_t j = 0; j < action.size(); ++j) {
    const double lo = std::max(action[j] - sigma, -1.0);
    const double hi = std::min(action[j] + sigma, 1.0);
    out[j] = sigma == 0.0 ? action[j] : uniform(rng, lo, hi);
  }
  return out;
}

double decayed_sigma(const NoiseConfig& noise, long step) {
  if (noise.decay_steps <= 0 || step >= noise.decay_steps) return std::clamp(noise.sigma_end, 0.0, 1.0);
  const double t = static_cast<double>(step) / static_cast<double>(noise.decay_steps);
  return std::clamp(noise.sigma_start + t * (noise.sigma_end - noise.sigma_start), 0.0, 1.0);
}

double adapt_parameter_noise(const NoiseConfig& noise, double scale, double distance) {
  return distance < noise.param_noise_target ? scale * noise.param_noise_factor : scale / noise.param_noise_factor;
}

void soft_update(ParameterSet& target, const ParameterSet& online, double tau) { target.blend_towards(online, tau); }

namespace {

Matrix column_of(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

DdpgAgent::DdpgAgent(const ObservationLayout& layout, AgentConfig config, std::uint64_t seed)
    : layout_(layout),
      config_(std::move(config)),
      rng_(make_rng(seed, "agent")),
      actor_(layout, config_.gru_hidden, config_.global_proj),
      critic_(layout.total(), layout.action_dim, config_.critic_hidden),
      buffer_(config_.buffer_capacity) {
  actor_.params().init_uniform(rng_);
  critic_.params().init_uniform(rng_);
  actor_target_ = actor_;
  critic_target_ = critic_;
  actor_perturbed_ = actor_;
  actor_opt_ = Adam(actor_.params(), {config_.actor_lr});
  critic_opt_ = Adam(critic_.params(), {config_.critic_lr});
  param_scale_ = config_.noise.param_noise_scale;
}

std::vector<double> DdpgAgent::act(const Observation& obs, bool explore) {
  const ActorNet& net = explore && config_.noise.param_noise ? actor_perturbed_ : actor_;
  const Matrix a = net.forward(column_of(obs));
  std::vector<double> action(a.data(), a.data() + a.size());
  if (!explore) return action;
  return truncated_uniform_noise(action, sigma(), rng_);
}

void DdpgAgent::remember(Transition t) {
  buffer_.push(std::move(t));
  ++steps_;
}

Batch DdpgAgent::make_batch(const std::vector<std::size_t>& slots) const {
  const auto b = static_cast<Eigen::Index>(slots.size());
  const auto od = static_cast<Eigen::Index>(layout_.total());
  const auto ad = static_cast<Eigen::Index>(layout_.action_dim);
  Batch batch{Matrix(od, b), Matrix(ad, b), Matrix(1, b), Matrix(od, b), Matrix(1, b)};
  for (Eigen::Index i = 0; i < b; ++i) {
    const Transition& t = buffer_.slot(slots[i]);
    batch.obs.col(i) = column_of(t.observation);
    batch.action.col(i) = column_of(t.action);
    batch.reward(0, i) = t.reward;
    batch.next_obs.col(i) = column_of(t.next_observation);
    batch.done(0, i) = t.done ? 1.0 : 0.0;
  }
  return batch;
}

Batch DdpgAgent::sample_batch() { return make_batch(buffer_.sample(config_.batch_size, rng_)); }

TrainStats DdpgAgent::train_step() {
  if (buffer_.size() < config_.batch_size) {
    throw ContractError("train_step needs at least " + std::to_string(config_.batch_size) + " transitions");
  }
  return train_on_batch(sample_batch());
}

TrainStats DdpgAgent::train_on_batch(const Batch& batch, bool update_actor, bool update_targets) {
  const double n = static_cast<double>(batch.obs.cols());
  TrainStats stats;

  const Matrix next_action = actor_target_.forward(batch.next_obs);
  const Matrix next_q = critic_target_.forward(batch.next_obs, next_action);
  const Matrix target =
      batch.reward.array() + config_.gamma * (1.0 - batch.done.array()) * next_q.array();

  CriticNet::Cache ccache;
  const Matrix q = critic_.forward(batch.obs, batch.action, &ccache);
  const Matrix err = q - target;
  stats.critic_loss = err.squaredNorm() / n;
  ParameterSet cgrads = critic_.params().zeros_like();
  critic_.backward(ccache, (2.0 / n) * err, &cgrads, nullptr);
  critic_opt_.step(critic_.params(), cgrads);

  if (update_actor) {
    ActorNet::Cache acache;
    const Matrix a = actor_.forward(batch.obs, &acache);
    CriticNet::Cache pcache;
    const Matrix qp = critic_.forward(batch.obs, a, &pcache);
    stats.actor_objective = qp.sum() / n;
    Matrix d_action;
    critic_.backward(pcache, Matrix::Constant(1, qp.cols(), -1.0 / n), nullptr, &d_action);
    actor_opt_.step(actor_.params(), actor_.backward(acache, d_action));
  }
  if (update_targets) {
    soft_update(actor_target_.params(), actor_.params(), config_.tau);
    soft_update(critic_target_.params(), critic_.params(), config_.tau);
  }
  return stats;
}

void DdpgAgent::begin_episode() {
  if (!config_.noise.param_noise) return;
  actor_perturbed_ = actor_;
  auto& p = actor_perturbed_.params();
  for (std::size_t i = 0; i < p.size(); ++i) {
    for (Eigen::Index r = 0; r < p[i].rows(); ++r) {
      for (Eigen::Index c = 0; c < p[i].cols(); ++c) p[i](r, c) += param_scale_ * standard_normal(rng_);
    }
  }
}

void DdpgAgent::end_episode() {
  if (!config_.noise.param_noise || buffer_.size() < config_.batch_size) return;
  const Batch probe = sample_batch();
  const Matrix clean = actor_.forward(probe.obs);
  const Matrix noisy = actor_perturbed_.forward(probe.obs);
  const double distance = (clean - noisy).cwiseAbs().mean();
  param_scale_ = adapt_parameter_noise(config_.noise, param_scale_, distance);
}

void DdpgAgent::save(const std::string& path, bool include_buffer) const {
  TensorArchive ar;
  ar.put_set("actor", actor_.params());
  ar.put_set("actor_target", actor_target_.params());
  ar.put_set("actor_perturbed", actor_perturbed_.params());
  ar.put_set("critic", critic_.params());
  ar.put_set("critic_target", critic_target_.params());
  auto put_adam = [&](const std::string& name, const Adam& opt) {
    ar.put_set(name + "/m", opt.first_moment());
    ar.put_set(name + "/v", opt.second_moment());
    ar.put_scalar(name + "/t", static_cast<double>(opt.t()));
  };
  put_adam("adam_actor", actor_opt_);
  put_adam("adam_critic", critic_opt_);
  ar.put_scalar("state/steps", static_cast<double>(steps_));
  ar.put_scalar("state/param_noise_scale", param_scale_);
  std::ostringstream rng_state;
  rng_state << rng_;
  ar.put_blob("state/rng", rng_state.str());
  ar.put_scalar("buffer/included", include_buffer ? 1.0 : 0.0);
  if (include_buffer) {
    const auto n = static_cast<Eigen::Index>(buffer_.size());
    const auto od = static_cast<Eigen::Index>(layout_.total());
    const auto ad = static_cast<Eigen::Index>(layout_.action_dim);
    Matrix obs(n, od), act(n, ad), rew(n, 1), next(n, od), done(n, 1);
    for (Eigen::Index i = 0; i < n; ++i) {
      const Transition& t = buffer_.slot(static_cast<std::size_t>(i));
      obs.row(i) = column_of(t.observation).transpose();
      act.row(i) = column_of(t.action).transpose();
      rew(i, 0) = t.reward;
      next.row(i) = column_of(t.next_observation).transpose();
      done(i, 0) = t.done ? 1.0 : 0.0;
    }
    ar.put("buffer/obs", obs);
    ar.put("buffer/action", act);
    ar.put("buffer/reward", rew);
    ar.put("buffer/next_obs", next);
    ar.put("buffer/done", done);
    ar.put_scalar("buffer/head", static_cast<double>(buffer_.head()));
  }
  ar.write(path);
}

void DdpgAgent::load(const std::string& path) {
  const TensorArchive ar = TensorArchive::read(path);
  ar.get_set("actor", actor_.params());
  ar.get_set("actor_target", actor_target_.params());
  ar.get_set("actor_perturbed", actor_perturbed_.params());
  ar.get_set("critic", critic_.params());
  ar.get_set("critic_target", critic_target_.params());
  auto get_adam = [&](const std::string& name, Adam& opt) {
    ar.get_set(name + "/m", opt.first_moment());
    ar.get_set(name + "/v", opt.second_moment());
    opt.set_t(static_cast<long>(ar.get_scalar(name + "/t")));
  };
  get_adam("adam_actor", actor_opt_);
  get_adam("adam_critic", critic_opt_);
  steps_ = static_cast<long>(ar.get_scalar("state/steps"));
  param_scale_ = ar.get_scalar("state/param_noise_scale");
  std::istringstream rng_state(ar.get_blob("state/rng"));
  rng_state >> rng_;
  if (ar.get_scalar("buffer/included") != 0.0) {
    const Matrix& obs = ar.get("buffer/obs");
    const Matrix& act = ar.get("buffer/action");
    const Matrix& rew = ar.get("buffer/reward");
    const Matrix& next = ar.get("buffer/next_obs");
    const Matrix& done = ar.get("buffer/done");
    std::vector<Transition> items(static_cast<std::size_t>(obs.rows()));
    for (Eigen::Index i = 0; i < obs.rows(); ++i) {
      auto& t = items[static_cast<std::size_t>(i)];
      t.observation.resize(static_cast<std::size_t>(obs.cols()));
      for (Eigen::Index c = 0; c < obs.cols(); ++c) t.observation[c] = obs(i, c);
      t.action.resize(static_cast<std::size_t>(act.cols()));
      for (Eigen::Index c = 0; c < act.cols(); ++c) t.action[c] = act(i, c);
      t.reward = rew(i, 0);
      t.next_observation.resize(static_cast<std::size_t>(next.cols()));
      for (Eigen::Index c = 0; c < next.cols(); ++c) t.next_observation[c] = next(i, c);
      t.done = done(i, 0) != 0.0;
    }
    buffer_.restore(std::move(items), static_cast<std::size_t>(ar.get_scalar("buffer/head")));
  }
}

}  // namespace ampsize
