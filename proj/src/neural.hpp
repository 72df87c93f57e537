#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "random.hpp"

namespace ampsize {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Ordered named tensors. Shapes are fixed once added.
class ParameterSet {
 public:
  // fan_in sets the init range uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)).
  std::size_t add(std::string name, Eigen::Index rows, Eigen::Index cols, Eigen::Index fan_in);

  std::size_t size() const { return tensors_.size(); }
  Matrix& operator[](std::size_t i) { return tensors_[i]; }
  const Matrix& operator[](std::size_t i) const { return tensors_[i]; }
  const std::string& name(std::size_t i) const { return names_[i]; }
  std::size_t index_of(const std::string& name) const;  // throws if absent
  std::size_t scalar_count() const;

  void init_uniform(Rng& rng);
  void set_zero();
  ParameterSet zeros_like() const;
  bool same_shapes(const ParameterSet& other) const;
  bool all_finite() const;

  // this <- tau * online + (1 - tau) * this
  void blend_towards(const ParameterSet& online, double tau);

 private:
  std::vector<std::string> names_;
  std::vector<Matrix> tensors_;
  std::vector<Eigen::Index> fan_in_;
};

enum class Activation { Identity, Tanh, Relu };

// act(W x + b), x holds one sample per column.
Matrix dense_forward(const Matrix& w, const Vector& b, const Matrix& x, Activation act);

// Multiplies an upstream gradient by act'(.) given the layer output y.
Matrix activation_backward(const Matrix& upstream, const Matrix& y, Activation act);

// Indices of one gated recurrent cell inside a ParameterSet.
struct GruParams {
  std::size_t wz, uz, bz, wr, ur, br, wh, uh, bh;
  Eigen::Index input = 0, hidden = 0;

  static GruParams add_to(ParameterSet& set, const std::string& prefix, Eigen::Index input, Eigen::Index hidden);
};

struct GruCache {
  Matrix x, h_prev, z, r, rh, h_cand;
};

Matrix gru_step(const ParameterSet& p, const GruParams& g, const Matrix& h_prev, const Matrix& x,
                GruCache* cache = nullptr);

// Accumulates parameter gradients into grads; writes dL/dh_prev and dL/dx.
void gru_backward(const ParameterSet& p, const GruParams& g, const GruCache& cache, const Matrix& dh_next,
                  ParameterSet& grads, Matrix& dh_prev, Matrix& dx);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  Adam() = default;
  Adam(const ParameterSet& shape, AdamConfig config);

  void step(ParameterSet& weights, const ParameterSet& grads);

  long t() const { return t_; }
  const AdamConfig& config() const { return config_; }
  ParameterSet& first_moment() { return m_; }
  ParameterSet& second_moment() { return v_; }
  const ParameterSet& first_moment() const { return m_; }
  const ParameterSet& second_moment() const { return v_; }
  void set_t(long t) { t_ = t; }

 private:
  AdamConfig config_;
  ParameterSet m_, v_;
  long t_ = 0;
};

// Binary named-tensor container: a versioned magic line, a record count, then
// per record a name, a kind tag, a rows x cols header and a row-major payload
// of little-endian float64 (or raw bytes for kind "blob").
class TensorArchive {
 public:
  static constexpr const char* kMagic = "AMPSIZE-TENSORS v1\n";

  void put(const std::string& name, const Matrix& m);
  void put_scalar(const std::string& name, double v);
  void put_blob(const std::string& name, std::string bytes);
  void put_set(const std::string& prefix, const ParameterSet& set);

  const Matrix& get(const std::string& name) const;
  double get_scalar(const std::string& name) const;
  const std::string& get_blob(const std::string& name) const;
  void get_set(const std::string& prefix, ParameterSet& set) const;  // shapes must match
  bool has(const std::string& name) const;

  void write(const std::string& path) const;
  static TensorArchive read(const std::string& path);

 private:
  std::vector<std::string> order_;
  std::map<std::string, Matrix> tensors_;
  std::map<std::string, std::string> blobs_;
};

}  // namespace ampsize
