#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "owcsim/assoc.hpp"
#include "owcsim/common.hpp"

namespace owc::nn {

struct NanLossError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TrainReport {
  std::vector<double> train_mse;
  std::vector<double> val_mse;
  int epochs = 0;
  std::size_t dataset_size = 0;
  double train_fraction = 0.9;
};

struct Hyper {
  int epochs = 60;
  double learning_rate = 1e-2;
  double momentum = 0.9;
  int batch_size = 32;
  double train_fraction = 0.9;
  std::uint64_t seed = 1;
  int hidden_width = 0;  // 0 -> architecture default from (K, L)
  bool conv_front = false;
  int conv_filters = 16;
  int window = 4;  // predictor history length
};

namespace detail {

inline double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

inline double glorot_bound(int fan_in, int fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

inline void init_uniform(double* data, Eigen::Index n, double bound, Rng& rng) {
  for (Eigen::Index i = 0; i < n; ++i) data[i] = rng.uniform(-bound, bound);
}

}  // namespace detail

/// Row-major flattening of a K x L score/assignment matrix; the layout every
/// model input and output uses.
inline Vector flatten_scores(const Matrix& m) {
  Vector v(m.rows() * m.cols());
  for (Eigen::Index k = 0; k < m.rows(); ++k) {
    for (Eigen::Index l = 0; l < m.cols(); ++l) v[k * m.cols() + l] = m(k, l);
  }
  return v;
}

inline Matrix unflatten_scores(const Vector& v, int k_users, int n_aps) {
  Matrix m(k_users, n_aps);
  for (int k = 0; k < k_users; ++k) {
    for (int l = 0; l < n_aps; ++l) m(k, l) = v[k * n_aps + l];
  }
  return m;
}

/// Row-wise argmax of a score matrix, ties to the lowest AP index. Always a
/// valid one-AP-per-user assignment.
inline assoc::AssignmentMatrix round_to_assignment(const Matrix& scores) {
  if (!scores.allFinite()) {
    throw std::domain_error("round_to_assignment: scores must be finite");
  }
  std::vector<int> ap(static_cast<std::size_t>(scores.rows()));
  for (Eigen::Index k = 0; k < scores.rows(); ++k) {
    int best = 0;
    for (Eigen::Index l = 1; l < scores.cols(); ++l) {
      if (scores(k, l) > scores(k, best)) best = static_cast<int>(l);
    }
    ap[static_cast<std::size_t>(k)] = best;
  }
  return assoc::AssignmentMatrix(std::move(ap), static_cast<int>(scores.cols()));
}

/// Feedforward score estimator: K per-user feature blocks in, K x L scores
/// out. Two tanh hidden layers; optionally a width-3 convolution over the
/// user axis in front, sharing weights across users.
class EstimatorModel {
 public:
  EstimatorModel() = default;

  static EstimatorModel create(int k_users, int n_aps, int block_len,
                               const Hyper& hyper, Rng& rng) {
    EstimatorModel m;
    m.k_users_ = k_users;
    m.n_aps_ = n_aps;
    m.block_len_ = block_len;
    m.conv_front_ = hyper.conv_front;
    m.conv_filters_ = hyper.conv_front ? hyper.conv_filters : 0;
    m.hidden_ = hyper.hidden_width > 0 ? hyper.hidden_width : 4 * k_users * n_aps;
    m.seed_ = hyper.seed;

    const int d_in = m.dense_input_dim();
    const int h = m.hidden_;
    const int d_out = k_users * n_aps;
    int total = h * d_in + h + h * h + h + d_out * h + d_out;
    if (m.conv_front_) total += m.conv_filters_ * (3 * block_len) + m.conv_filters_;
    m.theta_ = Vector::Zero(total);

    double* p = m.theta_.data();
    if (m.conv_front_) {
      detail::init_uniform(p, m.conv_filters_ * 3 * block_len,
                           detail::glorot_bound(3 * block_len, m.conv_filters_), rng);
      p += m.conv_filters_ * 3 * block_len + m.conv_filters_;  // biases stay 0
    }
    detail::init_uniform(p, h * d_in, detail::glorot_bound(d_in, h), rng);
    p += h * d_in + h;
    detail::init_uniform(p, h * h, detail::glorot_bound(h, h), rng);
    p += h * h + h;
    detail::init_uniform(p, d_out * h, detail::glorot_bound(h, d_out), rng);
    return m;
  }

  int input_dim() const { return k_users_ * block_len_; }
  int output_dim() const { return k_users_ * n_aps_; }
  int k_users() const { return k_users_; }
  int n_aps() const { return n_aps_; }
  int block_len() const { return block_len_; }
  int hidden_width() const { return hidden_; }
  bool conv_front() const { return conv_front_; }
  int conv_filters() const { return conv_filters_; }
  std::uint64_t seed() const { return seed_; }

  Vector& params() { return theta_; }
  const Vector& params() const { return theta_; }

  /// Restore a model with explicit dimensions (deserialization path).
  static EstimatorModel restore(int k_users, int n_aps, int block_len,
                                int hidden, bool conv_front, int conv_filters,
                                std::uint64_t seed, Vector theta) {
    EstimatorModel m;
    m.k_users_ = k_users;
    m.n_aps_ = n_aps;
    m.block_len_ = block_len;
    m.hidden_ = hidden;
    m.conv_front_ = conv_front;
    m.conv_filters_ = conv_front ? conv_filters : 0;
    m.seed_ = seed;
    m.theta_ = std::move(theta);
    int total = m.hidden_ * m.dense_input_dim() + m.hidden_ + m.hidden_ * m.hidden_ +
                m.hidden_ + m.output_dim() * m.hidden_ + m.output_dim();
    if (m.conv_front_) total += m.conv_filters_ * (3 * block_len) + m.conv_filters_;
    if (m.theta_.size() != total) {
      throw ShapeError("EstimatorModel: parameter count mismatch");
    }
    return m;
  }

  Vector forward(const Vector& features) const {
    Workspace ws;
    return forward_internal(features, ws);
  }

  double loss(const Vector& features, const Vector& target) const {
    const Vector out = forward(features);
    return (out - target).squaredNorm() / static_cast<double>(out.size());
  }

  /// Adds d(loss)/d(theta) for one sample into `grad` (same size as params).
  void accumulate_grad(const Vector& features, const Vector& target,
                       Vector& grad) const {
    Workspace ws;
    const Vector out = forward_internal(features, ws);
    const Vector dout =
        2.0 / static_cast<double>(out.size()) * (out - target);
    backward_internal(features, dout, ws, grad);
  }

 private:
  struct Spans {
    Eigen::Map<const Matrix> wc, w1, w2, w3;
    Eigen::Map<const Vector> bc, b1, b2, b3;
  };
  struct MutSpans {
    Eigen::Map<Matrix> wc, w1, w2, w3;
    Eigen::Map<Vector> bc, b1, b2, b3;
  };
  struct Workspace {
    Vector conv_out;  // pre-activation copies for backprop
    Vector conv_act;
    Vector z1, a1, z2, a2;
  };

  int dense_input_dim() const {
    return conv_front_ ? k_users_ * conv_filters_ : k_users_ * block_len_;
  }

  Spans spans() const {
    const double* p = theta_.data();
    const int cw = conv_front_ ? conv_filters_ * 3 * block_len_ : 0;
    const int cb = conv_front_ ? conv_filters_ : 0;
    Eigen::Map<const Matrix> wc(p, conv_front_ ? conv_filters_ : 0,
                                conv_front_ ? 3 * block_len_ : 0);
    Eigen::Map<const Vector> bc(p + cw, cb);
    p += cw + cb;
    const int d_in = dense_input_dim();
    Eigen::Map<const Matrix> w1(p, hidden_, d_in);
    Eigen::Map<const Vector> b1(p + hidden_ * d_in, hidden_);
    p += hidden_ * d_in + hidden_;
    Eigen::Map<const Matrix> w2(p, hidden_, hidden_);
    Eigen::Map<const Vector> b2(p + hidden_ * hidden_, hidden_);
    p += hidden_ * hidden_ + hidden_;
    Eigen::Map<const Matrix> w3(p, output_dim(), hidden_);
    Eigen::Map<const Vector> b3(p + output_dim() * hidden_, output_dim());
    return Spans{wc, w1, w2, w3, bc, b1, b2, b3};
  }

  Vector conv_input_window(const Vector& features, int t) const {
    Vector win = Vector::Zero(3 * block_len_);
    for (int dt = -1; dt <= 1; ++dt) {
      const int u = t + dt;
      if (u < 0 || u >= k_users_) continue;
      win.segment((dt + 1) * block_len_, block_len_) =
          features.segment(u * block_len_, block_len_);
    }
    return win;
  }

  Vector forward_internal(const Vector& features, Workspace& ws) const {
    if (features.size() != input_dim()) {
      throw ShapeError("estimate: feature dimension mismatch");
    }
    const Spans s = spans();
    Vector dense_in;
    if (conv_front_) {
      ws.conv_out.resize(k_users_ * conv_filters_);
      for (int t = 0; t < k_users_; ++t) {
        const Vector win = conv_input_window(features, t);
        ws.conv_out.segment(t * conv_filters_, conv_filters_) = s.wc * win + s.bc;
      }
      ws.conv_act = ws.conv_out.array().tanh();
      dense_in = ws.conv_act;
    } else {
      dense_in = features;
    }
    ws.z1 = s.w1 * dense_in + s.b1;
    ws.a1 = ws.z1.array().tanh();
    ws.z2 = s.w2 * ws.a1 + s.b2;
    ws.a2 = ws.z2.array().tanh();
    return s.w3 * ws.a2 + s.b3;
  }

  void backward_internal(const Vector& features, const Vector& dout,
                         const Workspace& ws, Vector& grad) const {
    if (grad.size() != theta_.size()) grad = Vector::Zero(theta_.size());
    const Spans s = spans();

    double* p = grad.data();
    const int cw = conv_front_ ? conv_filters_ * 3 * block_len_ : 0;
    const int cb = conv_front_ ? conv_filters_ : 0;
    Eigen::Map<Matrix> gwc(p, conv_front_ ? conv_filters_ : 0,
                           conv_front_ ? 3 * block_len_ : 0);
    Eigen::Map<Vector> gbc(p + cw, cb);
    p += cw + cb;
    const int d_in = dense_input_dim();
    Eigen::Map<Matrix> gw1(p, hidden_, d_in);
    Eigen::Map<Vector> gb1(p + hidden_ * d_in, hidden_);
    p += hidden_ * d_in + hidden_;
    Eigen::Map<Matrix> gw2(p, hidden_, hidden_);
    Eigen::Map<Vector> gb2(p + hidden_ * hidden_, hidden_);
    p += hidden_ * hidden_ + hidden_;
    Eigen::Map<Matrix> gw3(p, output_dim(), hidden_);
    Eigen::Map<Vector> gb3(p + output_dim() * hidden_, output_dim());

    const Vector dense_in = conv_front_ ? ws.conv_act : features;

    gw3.noalias() += dout * ws.a2.transpose();
    gb3 += dout;
    Vector da2 = s.w3.transpose() * dout;
    Vector dz2 = da2.array() * (1.0 - ws.a2.array().square());
    gw2.noalias() += dz2 * ws.a1.transpose();
    gb2 += dz2;
    Vector da1 = s.w2.transpose() * dz2;
    Vector dz1 = da1.array() * (1.0 - ws.a1.array().square());
    gw1.noalias() += dz1 * dense_in.transpose();
    gb1 += dz1;

    if (conv_front_) {
      const Vector dconv_act = s.w1.transpose() * dz1;
      const Vector dconv_pre =
          dconv_act.array() * (1.0 - ws.conv_act.array().square());
      for (int t = 0; t < k_users_; ++t) {
        const Vector win = conv_input_window(features, t);
        const Vector dpre_t = dconv_pre.segment(t * conv_filters_, conv_filters_);
        gwc.noalias() += dpre_t * win.transpose();
        gbc += dpre_t;
      }
    }
  }

  int k_users_ = 0;
  int n_aps_ = 0;
  int block_len_ = 0;
  int hidden_ = 0;
  bool conv_front_ = false;
  int conv_filters_ = 0;
  std::uint64_t seed_ = 0;
  Vector theta_;
};

/// Gated recurrent predictor: an LSTM cell unrolled over the history window
/// with a linear projection of the final hidden state to K x L scores.
class PredictorModel {
 public:
  PredictorModel() = default;

  static PredictorModel create(int k_users, int n_aps, const Hyper& hyper,
                               Rng& rng) {
    PredictorModel m;
    m.k_users_ = k_users;
    m.n_aps_ = n_aps;
    m.window_ = hyper.window;
    m.hidden_ = hyper.hidden_width > 0 ? hyper.hidden_width : 2 * k_users * n_aps;
    m.seed_ = hyper.seed;
    const int in = k_users * n_aps;
    const int h = m.hidden_;
    const int out = k_users * n_aps;
    m.theta_ = Vector::Zero(4 * h * (in + h) + 4 * h + out * h + out);
    double* p = m.theta_.data();
    detail::init_uniform(p, 4 * h * (in + h), detail::glorot_bound(in + h, 4 * h),
                         rng);
    p += 4 * h * (in + h) + 4 * h;  // gate biases stay 0
    detail::init_uniform(p, out * h, detail::glorot_bound(h, out), rng);
    return m;
  }

  static PredictorModel restore(int k_users, int n_aps, int window, int hidden,
                                std::uint64_t seed, Vector theta) {
    PredictorModel m;
    m.k_users_ = k_users;
    m.n_aps_ = n_aps;
    m.window_ = window;
    m.hidden_ = hidden;
    m.seed_ = seed;
    m.theta_ = std::move(theta);
    const int in = k_users * n_aps;
    const int expected = 4 * hidden * (in + hidden) + 4 * hidden +
                         in * hidden + in;
    if (m.theta_.size() != expected) {
      throw ShapeError("PredictorModel: parameter count mismatch");
    }
    return m;
  }

  int k_users() const { return k_users_; }
  int n_aps() const { return n_aps_; }
  int window() const { return window_; }
  int hidden_width() const { return hidden_; }
  std::uint64_t seed() const { return seed_; }
  int step_dim() const { return k_users_ * n_aps_; }

  Vector& params() { return theta_; }
  const Vector& params() const { return theta_; }

  Vector forward(std::span<const Vector> history) const {
    Trace tr;
    return forward_internal(history, tr);
  }

  double loss(std::span<const Vector> history, const Vector& target) const {
    const Vector out = forward(history);
    return (out - target).squaredNorm() / static_cast<double>(out.size());
  }

  void accumulate_grad(std::span<const Vector> history, const Vector& target,
                       Vector& grad) const {
    Trace tr;
    const Vector out = forward_internal(history, tr);
    const Vector dout = 2.0 / static_cast<double>(out.size()) * (out - target);
    backward_internal(history, dout, tr, grad);
  }

 private:
  struct Trace {
    std::vector<Vector> u;      // concatenated [x; h_prev] per step
    std::vector<Vector> i, f, o, g, c, tanh_c;
  };

  struct Gates {
    Eigen::Map<const Matrix> w;   // 4H x (in+H), rows [i; f; o; g]
    Eigen::Map<const Vector> b;   // 4H
    Eigen::Map<const Matrix> wy;  // out x H
    Eigen::Map<const Vector> by;  // out
  };

  Gates gates() const {
    const int in = step_dim();
    const int h = hidden_;
    const int out = step_dim();
    const double* p = theta_.data();
    Eigen::Map<const Matrix> w(p, 4 * h, in + h);
    Eigen::Map<const Vector> b(p + 4 * h * (in + h), 4 * h);
    p += 4 * h * (in + h) + 4 * h;
    Eigen::Map<const Matrix> wy(p, out, h);
    Eigen::Map<const Vector> by(p + out * h, out);
    return Gates{w, b, wy, by};
  }

  Vector forward_internal(std::span<const Vector> history, Trace& tr) const {
    if (static_cast<int>(history.size()) != window_) {
      throw ShapeError("predict_next: history length must equal the window");
    }
    for (const auto& x : history) {
      if (x.size() != step_dim()) {
        throw ShapeError("predict_next: step dimension mismatch");
      }
    }
    const Gates gp = gates();
    const int h = hidden_;
    Vector hprev = Vector::Zero(h);
    Vector cprev = Vector::Zero(h);
    tr.u.clear();
    for (int t = 0; t < window_; ++t) {
      Vector u(step_dim() + h);
      u << history[static_cast<std::size_t>(t)], hprev;
      const Vector a = gp.w * u + gp.b;
      Vector ig(h), fg(h), og(h), gg(h);
      for (int j = 0; j < h; ++j) {
        ig[j] = detail::sigmoid(a[j]);
        fg[j] = detail::sigmoid(a[h + j]);
        og[j] = detail::sigmoid(a[2 * h + j]);
        gg[j] = std::tanh(a[3 * h + j]);
      }
      const Vector c = fg.array() * cprev.array() + ig.array() * gg.array();
      const Vector tc = c.array().tanh();
      const Vector hnew = og.array() * tc.array();
      tr.u.push_back(std::move(u));
      tr.i.push_back(std::move(ig));
      tr.f.push_back(std::move(fg));
      tr.o.push_back(std::move(og));
      tr.g.push_back(std::move(gg));
      tr.c.push_back(c);
      tr.tanh_c.push_back(tc);
      cprev = c;
      hprev = hnew;
    }
    return gp.wy * hprev + gp.by;
  }

  void backward_internal(std::span<const Vector> /*history*/, const Vector& dout,
                         const Trace& tr, Vector& grad) const {
    if (grad.size() != theta_.size()) grad = Vector::Zero(theta_.size());
    const Gates gp = gates();
    const int in = step_dim();
    const int h = hidden_;
    const int out = step_dim();

    double* p = grad.data();
    Eigen::Map<Matrix> gw(p, 4 * h, in + h);
    Eigen::Map<Vector> gb(p + 4 * h * (in + h), 4 * h);
    p += 4 * h * (in + h) + 4 * h;
    Eigen::Map<Matrix> gwy(p, out, h);
    Eigen::Map<Vector> gby(p + out * h, out);

    const int last = window_ - 1;
    const Vector h_last = tr.o[static_cast<std::size_t>(last)].array() *
                          tr.tanh_c[static_cast<std::size_t>(last)].array();
    gwy.noalias() += dout * h_last.transpose();
    gby += dout;

    Vector dh = gp.wy.transpose() * dout;
    Vector dc = Vector::Zero(h);
    for (int t = last; t >= 0; --t) {
      const auto st = static_cast<std::size_t>(t);
      const Vector& ig = tr.i[st];
      const Vector& fg = tr.f[st];
      const Vector& og = tr.o[st];
      const Vector& gg = tr.g[st];
      const Vector& tc = tr.tanh_c[st];
      const Vector cprev = t > 0 ? tr.c[st - 1] : Vector::Zero(h);

      const Vector do_ = dh.array() * tc.array();
      dc.array() += dh.array() * og.array() * (1.0 - tc.array().square());
      const Vector di = dc.array() * gg.array();
      const Vector dg = dc.array() * ig.array();
      const Vector df = dc.array() * cprev.array();

      Vector da(4 * h);
      da.segment(0, h) = di.array() * ig.array() * (1.0 - ig.array());
      da.segment(h, h) = df.array() * fg.array() * (1.0 - fg.array());
      da.segment(2 * h, h) = do_.array() * og.array() * (1.0 - og.array());
      da.segment(3 * h, h) = dg.array() * (1.0 - gg.array().square());

      gw.noalias() += da * tr.u[st].transpose();
      gb += da;
      const Vector du = gp.w.transpose() * da;
      dh = du.segment(in, h);
      dc = dc.array() * fg.array();
    }
  }

  int k_users_ = 0;
  int n_aps_ = 0;
  int window_ = 4;
  int hidden_ = 0;
  std::uint64_t seed_ = 0;
  Vector theta_;
};

inline Matrix estimate(const EstimatorModel& model, const Vector& features) {
  return unflatten_scores(model.forward(features), model.k_users(), model.n_aps());
}

inline Matrix predict_next(const PredictorModel& model,
                           std::span<const Matrix> history) {
  std::vector<Vector> flat;
  flat.reserve(history.size());
  for (const auto& m : history) flat.push_back(flatten_scores(m));
  return unflatten_scores(
      model.forward(std::span<const Vector>(flat.data(), flat.size())),
      model.k_users(), model.n_aps());
}

/// Supervised rows with a group id per row; the train/validation split is
/// group-disjoint so no scenario leaks across the boundary.
struct SupervisedSet {
  Matrix inputs;    // N x D
  Matrix targets;   // N x output_dim
  std::vector<int> group_of_row;
};

namespace detail {

struct SplitIdx {
  std::vector<int> train;
  std::vector<int> val;
};

inline SplitIdx group_disjoint_split(const std::vector<int>& groups,
                                     double train_fraction) {
  const int n = static_cast<int>(groups.size());
  std::vector<int> unique = groups;
  std::sort(unique.begin(), unique.end());
  unique.erase(std::unique(unique.begin(), unique.end()), unique.end());

  SplitIdx idx;
  if (unique.size() < 2) {
    // Single group: fall back to a row split at the boundary.
    const int cut = std::max(1, static_cast<int>(std::floor(
                                    train_fraction * static_cast<double>(n))));
    for (int i = 0; i < n; ++i) (i < cut ? idx.train : idx.val).push_back(i);
    return idx;
  }
  const auto target =
      static_cast<std::size_t>(train_fraction * static_cast<double>(n));
  std::vector<int> counts(unique.size(), 0);
  for (int g : groups) {
    const auto it = std::lower_bound(unique.begin(), unique.end(), g);
    ++counts[static_cast<std::size_t>(it - unique.begin())];
  }
  std::size_t cum = 0;
  std::size_t cut_group = unique.size() - 1;  // at least one group in val
  for (std::size_t gi = 0; gi + 1 < unique.size(); ++gi) {
    cum += static_cast<std::size_t>(counts[gi]);
    if (cum >= target) {
      cut_group = gi + 1;
      break;
    }
  }
  for (int i = 0; i < n; ++i) {
    const auto it = std::lower_bound(unique.begin(), unique.end(),
                                     groups[static_cast<std::size_t>(i)]);
    const auto gi = static_cast<std::size_t>(it - unique.begin());
    (gi < cut_group ? idx.train : idx.val).push_back(i);
  }
  if (idx.val.empty()) {
    // Guarantee a nonempty validation side.
    idx.val.push_back(idx.train.back());
    idx.train.pop_back();
  }
  return idx;
}

template <typename LossFn, typename GradFn>
TrainReport sgd_train(Vector& theta, const std::vector<int>& train_idx,
                      const std::vector<int>& val_idx, LossFn&& sample_loss,
                      GradFn&& sample_grad, const Hyper& hyper, Rng& rng,
                      std::size_t dataset_size) {
  TrainReport report;
  report.epochs = hyper.epochs;
  report.dataset_size = dataset_size;
  report.train_fraction = hyper.train_fraction;

  Vector velocity = Vector::Zero(theta.size());
  Vector grad = Vector::Zero(theta.size());
  std::vector<int> order = train_idx;

  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    // Seeded Fisher-Yates shuffle.
    for (std::size_t i = order.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(rng.uniform_int(i));
      std::swap(order[i - 1], order[j]);
    }
    double epoch_loss = 0.0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(hyper.batch_size)) {
      const std::size_t end = std::min(
          order.size(), start + static_cast<std::size_t>(hyper.batch_size));
      grad.setZero();
      double batch_loss = 0.0;
      for (std::size_t i = start; i < end; ++i) {
        batch_loss += sample_loss(order[i]);
        sample_grad(order[i], grad);
      }
      const auto bsz = static_cast<double>(end - start);
      if (!std::isfinite(batch_loss)) {
        throw NanLossError("training diverged: non-finite loss at epoch " +
                           std::to_string(epoch));
      }
      epoch_loss += batch_loss;
      seen += end - start;
      velocity = hyper.momentum * velocity - (hyper.learning_rate / bsz) * grad;
      theta += velocity;
    }
    report.train_mse.push_back(epoch_loss / static_cast<double>(seen));

    double val_loss = 0.0;
    for (int i : val_idx) val_loss += sample_loss(i);
    report.val_mse.push_back(
        val_idx.empty() ? 0.0 : val_loss / static_cast<double>(val_idx.size()));
  }
  return report;
}

}  // namespace detail

inline std::pair<EstimatorModel, TrainReport> train_estimator(
    const SupervisedSet& data, int k_users, int n_aps, int block_len,
    const Hyper& hyper) {
  if (data.inputs.rows() == 0) {
    throw ShapeError("train_estimator: empty dataset");
  }
  if (data.inputs.rows() != data.targets.rows() ||
      static_cast<int>(data.group_of_row.size()) != data.inputs.rows()) {
    throw ShapeError("train_estimator: inconsistent dataset");
  }
  Rng rng(hyper.seed);
  EstimatorModel model = EstimatorModel::create(k_users, n_aps, block_len, hyper, rng);
  if (data.inputs.cols() != model.input_dim() ||
      data.targets.cols() != model.output_dim()) {
    throw ShapeError("train_estimator: dataset dimension mismatch");
  }
  const auto idx = detail::group_disjoint_split(data.group_of_row, hyper.train_fraction);
  auto loss = [&](int i) {
    return model.loss(data.inputs.row(i).transpose(), data.targets.row(i).transpose());
  };
  auto gradf = [&](int i, Vector& g) {
    model.accumulate_grad(data.inputs.row(i).transpose(),
                          data.targets.row(i).transpose(), g);
  };
  TrainReport report = detail::sgd_train(
      model.params(), idx.train, idx.val, loss, gradf, hyper, rng,
      static_cast<std::size_t>(data.inputs.rows()));
  return {std::move(model), std::move(report)};
}

/// Sequence rows: each sample is a window of flattened assignment matrices
/// and the next period's flattened one-hot assignment.
struct SequenceSet {
  std::vector<std::vector<Vector>> histories;
  std::vector<Vector> targets;
  std::vector<int> group_of_row;
};

inline std::pair<PredictorModel, TrainReport> train_predictor(
    const SequenceSet& data, int k_users, int n_aps, const Hyper& hyper) {
  if (data.histories.empty()) {
    throw ShapeError("train_predictor: empty dataset");
  }
  if (data.histories.size() != data.targets.size() ||
      data.group_of_row.size() != data.histories.size()) {
    throw ShapeError("train_predictor: inconsistent dataset");
  }
  Rng rng(hyper.seed);
  PredictorModel model = PredictorModel::create(k_users, n_aps, hyper, rng);
  for (const auto& hist : data.histories) {
    if (static_cast<int>(hist.size()) != model.window()) {
      throw ShapeError("train_predictor: history length mismatch");
    }
  }
  const auto idx = detail::group_disjoint_split(data.group_of_row, hyper.train_fraction);
  auto loss = [&](int i) {
    const auto& h = data.histories[static_cast<std::size_t>(i)];
    return model.loss(std::span<const Vector>(h.data(), h.size()),
                      data.targets[static_cast<std::size_t>(i)]);
  };
  auto gradf = [&](int i, Vector& g) {
    const auto& h = data.histories[static_cast<std::size_t>(i)];
    model.accumulate_grad(std::span<const Vector>(h.data(), h.size()),
                          data.targets[static_cast<std::size_t>(i)], g);
  };
  TrainReport report =
      detail::sgd_train(model.params(), idx.train, idx.val, loss, gradf, hyper,
                        rng, data.histories.size());
  return {std::move(model), std::move(report)};
}

}  // namespace owc::nn
