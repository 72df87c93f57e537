#include "neural.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "errors.hpp"

namespace ampsize {

std::size_t ParameterSet::add(std::string name, Eigen::Index rows, Eigen::Index cols, Eigen::Index fan_in) {
  names_.push_back(std::move(name));
  tensors_.push_back(Matrix::Zero(rows, cols));
  fan_in_.push_back(fan_in);
  return tensors_.size() - 1;
}

std::size_t ParameterSet::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return i;
  }
  throw ShapeError("no tensor named '" + name + "'");
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += static_cast<std::size_t>(t.size());
  return n;
}

void ParameterSet::init_uniform(Rng& rng) {
  for (std::size_t i = 0; i < tensors_.size(); ++i) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<Eigen::Index>(fan_in_[i], 1)));
    // Row-major fill so the draw order does not depend on Eigen's storage order.
    for (Eigen::Index r = 0; r < tensors_[i].rows(); ++r) {
      for (Eigen::Index c = 0; c < tensors_[i].cols(); ++c) tensors_[i](r, c) = uniform(rng, -bound, bound);
    }
  }
}

void ParameterSet::set_zero() {
  for (auto& t : tensors_) t.setZero();
}

ParameterSet ParameterSet::zeros_like() const {
  ParameterSet out = *this;
  out.set_zero();
  return out;
}

bool ParameterSet::same_shapes(const ParameterSet& other) const {
  if (other.size() != size()) return false;
  for (std::size_t i = 0; i < size(); ++i) {
    if (tensors_[i].rows() != other[i].rows() || tensors_[i].cols() != other[i].cols()) return false;
  }
  return true;
}

bool ParameterSet::all_finite() const {
  for (const auto& t : tensors_) {
    if (!t.allFinite()) return false;
  }
  return true;
}

void ParameterSet::blend_towards(const ParameterSet& online, double tau) {
  if (!same_shapes(online)) throw ShapeError("soft update between differently shaped networks");
  for (std::size_t i = 0; i < size(); ++i) tensors_[i] = tau * online[i] + (1.0 - tau) * tensors_[i];
}

Matrix dense_forward(const Matrix& w, const Vector& b, const Matrix& x, Activation act) {
  if (w.cols() != x.rows() || w.rows() != b.size()) {
    throw ShapeError("dense layer shape mismatch: W is " + std::to_string(w.rows()) + "x" +
                     std::to_string(w.cols()) + ", input has " + std::to_string(x.rows()) + " rows");
  }
  Matrix y = w * x;
  y.colwise() += b;
  switch (act) {
    case Activation::Identity: break;
    case Activation::Tanh: y = y.array().tanh().matrix(); break;
    case Activation::Relu: y = y.cwiseMax(0.0); break;
  }
  return y;
}

Matrix activation_backward(const Matrix& upstream, const Matrix& y, Activation act) {
  switch (act) {
    case Activation::Identity: return upstream;
    case Activation::Tanh: return (upstream.array() * (1.0 - y.array().square())).matrix();
    case Activation::Relu: return (upstream.array() * (y.array() > 0.0).cast<double>()).matrix();
  }
  return upstream;
}

GruParams GruParams::add_to(ParameterSet& set, const std::string& prefix, Eigen::Index input, Eigen::Index hidden) {
  GruParams g;
  g.input = input;
  g.hidden = hidden;
  const Eigen::Index fan = input + hidden;
  g.wz = set.add(prefix + ".Wz", hidden, input, fan);
  g.uz = set.add(prefix + ".Uz", hidden, hidden, fan);
  g.bz = set.add(prefix + ".bz", hidden, 1, fan);
  g.wr = set.add(prefix + ".Wr", hidden, input, fan);
  g.ur = set.add(prefix + ".Ur", hidden, hidden, fan);
  g.br = set.add(prefix + ".br", hidden, 1, fan);
  g.wh = set.add(prefix + ".Wh", hidden, input, fan);
  g.uh = set.add(prefix + ".Uh", hidden, hidden, fan);
  g.bh = set.add(prefix + ".bh", hidden, 1, fan);
  return g;
}

namespace {

Matrix sigmoid(const Matrix& a) { return (1.0 / (1.0 + (-a.array()).exp())).matrix(); }

Matrix affine(const Matrix& w, const Matrix& x, const Matrix& u, const Matrix& h, const Matrix& b) {
  Matrix a = w * x + u * h;
  a.colwise() += b.col(0);
  return a;
}

}  // namespace

Matrix gru_step(const ParameterSet& p, const GruParams& g, const Matrix& h_prev, const Matrix& x, GruCache* cache) {
  if (x.rows() != g.input || h_prev.rows() != g.hidden || x.cols() != h_prev.cols()) {
    throw ShapeError("GRU step shape mismatch");
  }
  const Matrix z = sigmoid(affine(p[g.wz], x, p[g.uz], h_prev, p[g.bz]));
  const Matrix r = sigmoid(affine(p[g.wr], x, p[g.ur], h_prev, p[g.br]));
  const Matrix rh = r.cwiseProduct(h_prev);
  const Matrix h_cand = affine(p[g.wh], x, p[g.uh], rh, p[g.bh]).array().tanh().matrix();
  Matrix h_next = h_prev + z.cwiseProduct(h_cand - h_prev);
  if (cache) *cache = {x, h_prev, z, r, rh, h_cand};
  return h_next;
}

void gru_backward(const ParameterSet& p, const GruParams& g, const GruCache& c, const Matrix& dh_next,
                  ParameterSet& grads, Matrix& dh_prev, Matrix& dx) {
  const Matrix dz = dh_next.cwiseProduct(c.h_cand - c.h_prev);
  const Matrix da_z = (dz.array() * c.z.array() * (1.0 - c.z.array())).matrix();
  const Matrix dh_cand = dh_next.cwiseProduct(c.z);
  const Matrix da_h = (dh_cand.array() * (1.0 - c.h_cand.array().square())).matrix();
  const Matrix drh = p[g.uh].transpose() * da_h;
  const Matrix da_r = (drh.array() * c.h_prev.array() * c.r.array() * (1.0 - c.r.array())).matrix();

  grads[g.wz].noalias() += da_z * c.x.transpose();
  grads[g.uz].noalias() += da_z * c.h_prev.transpose();
  grads[g.bz] += da_z.rowwise().sum();
  grads[g.wr].noalias() += da_r * c.x.transpose();
  grads[g.ur].noalias() += da_r * c.h_prev.transpose();
  grads[g.br] += da_r.rowwise().sum();
  grads[g.wh].noalias() += da_h * c.x.transpose();
  grads[g.uh].noalias() += da_h * c.rh.transpose();
  grads[g.bh] += da_h.rowwise().sum();

  dh_prev = dh_next.cwiseProduct((1.0 - c.z.array()).matrix()) + drh.cwiseProduct(c.r) +
            p[g.uz].transpose() * da_z + p[g.ur].transpose() * da_r;
  dx = p[g.wz].transpose() * da_z + p[g.wr].transpose() * da_r + p[g.wh].transpose() * da_h;
}

Adam::Adam(const ParameterSet& shape, AdamConfig config)
    : config_(config), m_(shape.zeros_like()), v_(shape.zeros_like()) {}

void Adam::step(ParameterSet& weights, const ParameterSet& grads) {
  if (!weights.same_shapes(grads) || !weights.same_shapes(m_)) throw ShapeError("Adam step shape mismatch");
  ++t_;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < weights.size(); ++i) {
    m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * grads[i];
    v_[i] = config_.beta2 * v_[i] + (1.0 - config_.beta2) * grads[i].cwiseProduct(grads[i]);
    weights[i].array() -=
        config_.lr * (m_[i].array() / bc1) / ((v_[i].array() / bc2).sqrt() + config_.eps);
  }
}

void TensorArchive::put(const std::string& name, const Matrix& m) {
  if (!tensors_.count(name) && !blobs_.count(name)) order_.push_back(name);
  tensors_[name] = m;
}

void TensorArchive::put_scalar(const std::string& name, double v) { put(name, Matrix::Constant(1, 1, v)); }

void TensorArchive::put_blob(const std::string& name, std::string bytes) {
  if (!tensors_.count(name) && !blobs_.count(name)) order_.push_back(name);
  blobs_[name] = std::move(bytes);
}

void TensorArchive::put_set(const std::string& prefix, const ParameterSet& set) {
  for (std::size_t i = 0; i < set.size(); ++i) put(prefix + "/" + set.name(i), set[i]);
}

bool TensorArchive::has(const std::string& name) const { return tensors_.count(name) || blobs_.count(name); }

const Matrix& TensorArchive::get(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw ShapeError("archive has no tensor '" + name + "'");
  return it->second;
}

double TensorArchive::get_scalar(const std::string& name) const { return get(name)(0, 0); }

const std::string& TensorArchive::get_blob(const std::string& name) const {
  auto it = blobs_.find(name);
  if (it == blobs_.end()) throw ShapeError("archive has no blob '" + name + "'");
  return it->second;
}

void TensorArchive::get_set(const std::string& prefix, ParameterSet& set) const {
  for (std::size_t i = 0; i < set.size(); ++i) {
    const Matrix& m = get(prefix + "/" + set.name(i));
    if (m.rows() != set[i].rows() || m.cols() != set[i].cols()) {
      throw ShapeError("tensor '" + prefix + "/" + set.name(i) + "' has the wrong shape");
    }
    set[i] = m;
  }
}

namespace {

template <typename T>
void write_pod(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw std::runtime_error("truncated tensor archive");
  return v;
}

}  // namespace

void TensorArchive::write(const std::string& path) const {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  os.write(kMagic, static_cast<std::streamsize>(std::strlen(kMagic)));
  write_pod<std::uint64_t>(os, order_.size());
  for (const auto& name : order_) {
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    if (auto it = tensors_.find(name); it != tensors_.end()) {
      const Matrix& m = it->second;
      write_pod<std::uint8_t>(os, 0);
      write_pod<std::uint64_t>(os, static_cast<std::uint64_t>(m.rows()));
      write_pod<std::uint64_t>(os, static_cast<std::uint64_t>(m.cols()));
      for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) write_pod<double>(os, m(r, c));
      }
    } else {
      const std::string& b = blobs_.at(name);
      write_pod<std::uint8_t>(os, 1);
      write_pod<std::uint64_t>(os, b.size());
      write_pod<std::uint64_t>(os, 1);
      os.write(b.data(), static_cast<std::streamsize>(b.size()));
    }
  }
  if (!os) throw std::runtime_error("failed writing '" + path + "'");
}

TensorArchive TensorArchive::read(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open '" + path + "'");
  std::string magic(std::strlen(kMagic), '\0');
  is.read(magic.data(), static_cast<std::streamsize>(magic.size()));
  if (magic != kMagic) throw std::runtime_error("'" + path + "' is not a tensor archive (bad magic)");
  TensorArchive ar;
  const auto count = read_pod<std::uint64_t>(is);
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto len = read_pod<std::uint32_t>(is);
    std::string name(len, '\0');
    is.read(name.data(), len);
    const auto kind = read_pod<std::uint8_t>(is);
    const auto rows = read_pod<std::uint64_t>(is);
    const auto cols = read_pod<std::uint64_t>(is);
    if (kind == 0) {
      Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
      for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = read_pod<double>(is);
      }
      ar.put(name, m);
    } else if (kind == 1) {
      std::string bytes(rows, '\0');
      is.read(bytes.data(), static_cast<std::streamsize>(rows));
      if (!is) throw std::runtime_error("truncated tensor archive");
      ar.put_blob(name, std::move(bytes));
    } else {
      throw std::runtime_error("unknown record kind in tensor archive");
    }
  }
  return ar;
}

}  // namespace ampsize
