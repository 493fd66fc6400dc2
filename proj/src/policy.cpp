#include "atpg/policy.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <random>
#include <tuple>

namespace atpg {
namespace {

using RowMajorMap = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using RowMajorMutMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

constexpr double kMaskedLogit = -1e30;

struct Dense {
  RowMajorMap W;
  Eigen::Map<const Eigen::VectorXd> b;

  Dense(const Eigen::VectorXd& theta, const LayerShape& s)
      : W(theta.data() + s.weight_offset, s.out, s.in), b(theta.data() + s.bias_offset, s.out) {}
};

struct DenseGrad {
  RowMajorMutMap W;
  Eigen::Map<Eigen::VectorXd> b;

  DenseGrad(Eigen::Ref<Eigen::VectorXd> grad, const LayerShape& s)
      : W(grad.data() + s.weight_offset, s.out, s.in), b(grad.data() + s.bias_offset, s.out) {}
};

Eigen::VectorXd relu(const Eigen::VectorXd& z) { return z.cwiseMax(0.0); }

Eigen::VectorXd reluMask(const Eigen::VectorXd& z) {
  return (z.array() > 0.0).cast<double>().matrix();
}

double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

enum LayerId { kAp1 = 0, kAp2, kLi1, kLi2, kOut1, kOut2 };

/// Reverse pass for one scalar output seed on the raw network outputs.
void backward(const PolicyCache& c, const PolicyParams& params, const Eigen::Vector2d& seed,
              Eigen::Ref<Eigen::VectorXd> dtheta, Eigen::Ref<Eigen::VectorXd> dinput) {
  const auto& L = params.layout.layers;
  const auto& theta = params.theta;
  const Dense ap1(theta, L[kAp1]), ap2(theta, L[kAp2]), li1(theta, L[kLi1]), li2(theta, L[kLi2]),
      out1(theta, L[kOut1]), out2(theta, L[kOut2]);
  DenseGrad g_ap1(dtheta, L[kAp1]), g_ap2(dtheta, L[kAp2]), g_li1(dtheta, L[kLi1]), g_li2(dtheta, L[kLi2]),
      g_out1(dtheta, L[kOut1]), g_out2(dtheta, L[kOut2]);
  dtheta.setZero();
  dinput.setZero();

  g_out2.W = seed * c.r1.transpose();
  g_out2.b = seed;
  const Eigen::VectorXd d_o1 = (out2.W.transpose() * seed).cwiseProduct(reluMask(c.o1));
  g_out1.W = d_o1 * c.joint.transpose();
  g_out1.b = d_o1;
  const Eigen::VectorXd d_joint = out1.W.transpose() * d_o1;

  const Eigen::Index E = c.emb_agent.size();
  Eigen::VectorXd d_agent = d_joint.head(E);
  const Eigen::VectorXd d_context = d_joint.tail(E);

  const Eigen::Index rows = c.emb_targets.rows();
  // context = sum_j a_j e_j ; a = softmax(ea . e_j / alpha)
  const Eigen::VectorXd d_attn = c.emb_targets * d_context;
  const double mean_d = c.attention.dot(d_attn);
  const Eigen::VectorXd d_logit = c.attention.cwiseProduct(d_attn.array().matrix() - Eigen::VectorXd::Constant(rows, mean_d));

  const int feat = params.layout.targetFeatureDim();
  for (Eigen::Index j = 0; j < rows; ++j) {
    if (c.attention(j) == 0.0) continue;
    const Eigen::VectorXd e_j = c.emb_targets.row(j).transpose();
    d_agent += d_logit(j) / params.alpha * e_j;
    const Eigen::VectorXd d_emb = c.attention(j) * d_context + d_logit(j) / params.alpha * c.emb_agent;
    const Eigen::VectorXd d_g2 = d_emb.cwiseProduct(reluMask(c.g2.row(j).transpose()));
    g_li2.W.noalias() += d_g2 * c.l1.row(j);
    g_li2.b += d_g2;
    const Eigen::VectorXd d_g1 = (li2.W.transpose() * d_g2).cwiseProduct(reluMask(c.g1.row(j).transpose()));
    g_li1.W.noalias() += d_g1 * c.target_in.row(j);
    g_li1.b += d_g1;
    dinput.segment(6 + j * feat, feat) = li1.W.transpose() * d_g1;
  }

  const Eigen::VectorXd d_z2 = d_agent.cwiseProduct(reluMask(c.z2));
  g_ap2.W = d_z2 * c.h1.transpose();
  g_ap2.b = d_z2;
  const Eigen::VectorXd d_z1 = (ap2.W.transpose() * d_z2).cwiseProduct(reluMask(c.z1));
  g_ap1.W = d_z1 * c.pose_in.transpose();
  g_ap1.b = d_z1;
  dinput.head(6) = ap1.W.transpose() * d_z1;
}

}  // namespace

PolicyLayout PolicyLayout::make(int state_dim, int max_targets, const PolicyWidths& widths) {
  if (state_dim < 2) throw std::invalid_argument("policy layout: state_dim must be >= 2");
  if (max_targets < 1) throw std::invalid_argument("policy layout: max_targets must be >= 1");
  if (widths.pose_hidden < 1 || widths.embedding < 1 || widths.target_hidden < 1 || widths.output_hidden < 1)
    throw std::invalid_argument("policy layout: layer widths must be positive");
  PolicyLayout layout;
  layout.state_dim = state_dim;
  layout.max_targets = max_targets;
  layout.widths = widths;
  const int feat = layout.targetFeatureDim();
  const std::vector<std::tuple<const char*, int, int>> shapes = {
      {"AP_FC1", 6, widths.pose_hidden},
      {"AP_FC2", widths.pose_hidden, widths.embedding},
      {"LI_FC1", feat, widths.target_hidden},
      {"LI_FC2", widths.target_hidden, widths.embedding},
      {"Out_FC1", 2 * widths.embedding, widths.output_hidden},
      {"Out_FC2", widths.output_hidden, 2},
  };
  Eigen::Index offset = 0;
  for (const auto& [name, in, out] : shapes) {
    LayerShape s{name, in, out, offset, offset + Eigen::Index(in) * out};
    offset = s.bias_offset + out;
    layout.layers.push_back(s);
  }
  layout.num_params = offset;
  return layout;
}

const LayerShape& PolicyLayout::layer(const std::string& name) const {
  for (const auto& l : layers)
    if (l.name == name) return l;
  throw std::out_of_range("unknown layer " + name);
}

PolicyParams PolicyParams::initialize(const PolicyLayout& layout, double alpha, std::uint64_t seed) {
  if (!(alpha > 0.0)) throw std::invalid_argument("attention temperature alpha must be positive");
  PolicyParams p;
  p.layout = layout;
  p.alpha = alpha;
  p.theta = Eigen::VectorXd::Zero(layout.num_params);
  std::mt19937_64 rng(seed);
  for (const auto& l : layout.layers) {
    const double limit = std::sqrt(6.0 / (l.in + l.out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (Eigen::Index k = 0; k < Eigen::Index(l.in) * l.out; ++k) p.theta(l.weight_offset + k) = dist(rng);
  }
  return p;
}

std::uint64_t PolicyParams::fingerprint() const {
  // FNV-1a style mix over the 64-bit words of theta and alpha.
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](double x) {
    std::uint64_t bits;
    std::memcpy(&bits, &x, sizeof bits);
    h = (h ^ bits) * 1099511628211ull;
  };
  for (Eigen::Index i = 0; i < theta.size(); ++i) mix(theta(i));
  mix(alpha);
  return h;
}

Eigen::VectorXd vech(const Eigen::MatrixXd& P) {
  const int n = static_cast<int>(P.rows());
  Eigen::VectorXd v(n * (n + 1) / 2);
  int k = 0;
  for (int r = 0; r < n; ++r)
    for (int c = r; c < n; ++c) v(k++) = P(r, c);
  return v;
}

int vechIndex(int n, int r, int c) {
  // rows before r contribute n + (n-1) + ... + (n-r+1) entries
  return r * n - r * (r - 1) / 2 + (c - r);
}

Eigen::VectorXd PolicyInput::flatten() const {
  const Eigen::Index n = target_means.rows();
  const Eigen::Index feat = target_means.cols() + target_infos.cols();
  Eigen::VectorXd s(6 + n * feat);
  s.head(6) = pose_log;
  for (Eigen::Index j = 0; j < n; ++j) {
    s.segment(6 + j * feat, target_means.cols()) = target_means.row(j).transpose();
    s.segment(6 + j * feat + target_means.cols(), target_infos.cols()) = target_infos.row(j).transpose();
  }
  return s;
}

PolicyInput buildInput(const Pose<double>& T, std::span<const TargetBelief<double>> priors, int max_targets) {
  if (priors.empty()) throw std::invalid_argument("buildInput: at least one target is required");
  if (static_cast<int>(priors.size()) > max_targets)
    throw TooManyTargets("buildInput: " + std::to_string(priors.size()) + " targets exceed the padded capacity " +
                         std::to_string(max_targets));
  const int ny = static_cast<int>(priors.front().mean.size());
  PolicyInput in;
  in.pose_log = logmapNearest(T);
  in.target_means = Eigen::MatrixXd::Zero(max_targets, ny);
  in.target_infos = Eigen::MatrixXd::Zero(max_targets, ny * (ny + 1) / 2);
  in.mask = Eigen::VectorXd::Zero(max_targets);
  in.num_targets = static_cast<int>(priors.size());
  for (int j = 0; j < in.num_targets; ++j) {
    in.target_means.row(j) = priors[j].mean.transpose();
    in.target_infos.row(j) = vech(priors[j].info).transpose();
    in.mask(j) = 1.0;
  }
  return in;
}

PolicyOutput forward(const PolicyInput& input, const PolicyParams& params, const ControlBounds& bounds) {
  const auto& L = params.layout.layers;
  const auto& theta = params.theta;
  if (theta.size() != params.layout.num_params) throw std::invalid_argument("forward: theta size does not match layout");
  if (input.target_means.rows() != params.layout.max_targets)
    throw std::invalid_argument("forward: input padding does not match the layout");
  if (input.target_means.cols() != params.layout.state_dim)
    throw std::invalid_argument("forward: target state dimension does not match the layout");
  const Dense ap1(theta, L[kAp1]), ap2(theta, L[kAp2]), li1(theta, L[kLi1]), li2(theta, L[kLi2]),
      out1(theta, L[kOut1]), out2(theta, L[kOut2]);

  PolicyOutput out;
  PolicyCache& c = out.cache;
  c.fingerprint = params.fingerprint();
  c.bounds = bounds;

  c.pose_in = input.pose_log;
  c.z1 = ap1.W * c.pose_in + ap1.b;
  c.h1 = relu(c.z1);
  c.z2 = ap2.W * c.h1 + ap2.b;
  c.emb_agent = relu(c.z2);

  const Eigen::Index rows = input.target_means.rows();
  c.target_in.resize(rows, params.layout.targetFeatureDim());
  c.target_in << input.target_means, input.target_infos;
  c.g1 = (c.target_in * li1.W.transpose()).rowwise() + li1.b.transpose();
  c.l1 = c.g1.cwiseMax(0.0);
  c.g2 = (c.l1 * li2.W.transpose()).rowwise() + li2.b.transpose();
  c.emb_targets = c.g2.cwiseMax(0.0);

  Eigen::VectorXd logits = c.emb_targets * c.emb_agent / params.alpha;
  for (Eigen::Index j = 0; j < rows; ++j)
    if (input.mask(j) == 0.0) logits(j) = kMaskedLogit;
  const double top = logits.maxCoeff();
  c.attention = (logits.array() - top).exp().matrix();
  // vectorized exp clamps its argument, so masked slots would keep a denormal weight
  c.attention = c.attention.cwiseProduct(input.mask);
  c.attention /= c.attention.sum();

  c.context = c.emb_targets.transpose() * c.attention;
  c.joint.resize(2 * c.emb_agent.size());
  c.joint << c.emb_agent, c.context;
  c.o1 = out1.W * c.joint + out1.b;
  c.r1 = relu(c.o1);
  c.raw = out2.W * c.r1 + out2.b;

  const double sv = logistic(c.raw(0));
  const double sw = logistic(c.raw(1));
  const double v_span = bounds.v_max - bounds.v_min;
  const double w_span = bounds.omega_max - bounds.omega_min;
  c.squash_slope << v_span * sv * (1.0 - sv), w_span * sw * (1.0 - sw);

  out.u.setZero();
  out.u(kForwardSpeedIndex) = bounds.v_min + v_span * sv;
  out.u(kYawRateIndex) = bounds.omega_min + w_span * sw;
  return out;
}

PolicyJacobians jacobians(const PolicyCache& cache, const PolicyParams& params) {
  if (cache.fingerprint != params.fingerprint())
    throw StaleCache("policy cache was produced with different parameters");
  PolicyJacobians J;
  J.params = Eigen::MatrixXd::Zero(6, params.layout.num_params);
  J.input = Eigen::MatrixXd::Zero(6, params.layout.inputDim());
  Eigen::VectorXd dtheta(params.layout.num_params);
  Eigen::VectorXd dinput(params.layout.inputDim());
  const std::pair<int, Eigen::Vector2d> rows[] = {
      {kForwardSpeedIndex, Eigen::Vector2d(cache.squash_slope(0), 0.0)},
      {kYawRateIndex, Eigen::Vector2d(0.0, cache.squash_slope(1))},
  };
  for (const auto& [row, seed] : rows) {
    backward(cache, params, seed, dtheta, dinput);
    J.params.row(row) = dtheta.transpose();
    J.input.row(row) = dinput.transpose();
  }
  return J;
}

}  // namespace atpg
