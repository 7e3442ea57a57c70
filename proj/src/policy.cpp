#include "epic/policy.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <stdexcept>

namespace epic {

double softplus(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

double softplus_inverse(double y) {
  if (y <= 0.0) throw std::domain_error("softplus_inverse: argument must be positive");
  // ln(exp(y) - 1) = y + ln(1 - exp(-y))
  return y + std::log(-std::expm1(-y));
}

GaussianPolicyDistribution::GaussianPolicyDistribution(Eigen::VectorXd mean, Eigen::VectorXd std)
    : mu(std::move(mean)), sigma(std::move(std)) {
  if (mu.size() != sigma.size())
    throw std::invalid_argument("GaussianPolicyDistribution: mu and sigma length mismatch");
  for (int i = 0; i < sigma.size(); ++i)
    if (!(sigma[i] > 0.0))
      throw std::domain_error("GaussianPolicyDistribution: sigma must be strictly positive");
}

Eigen::VectorXd sample_theta(const GaussianPolicyDistribution& dist, const NoiseDraw& noise) {
  if (noise.epsilon.size() != dist.mu.size())
    throw std::invalid_argument("sample_theta: noise dimension mismatch");
  return dist.mu + dist.sigma.cwiseProduct(noise.epsilon);
}

double kl_diag_gaussian(const GaussianPolicyDistribution& p, const GaussianPolicyDistribution& q) {
  if (p.dim() != q.dim()) throw std::invalid_argument("kl_diag_gaussian: dimension mismatch");
  double kl = 0.0;
  for (int i = 0; i < p.dim(); ++i) {
    const double sp = p.sigma[i];
    const double sq = q.sigma[i];
    if (!(sp > 0.0) || !(sq > 0.0))
      throw std::domain_error("kl_diag_gaussian: sigma must be strictly positive");
    const double dm = p.mu[i] - q.mu[i];
    kl += std::log(sq / sp) + (sp * sp + dm * dm) / (2.0 * sq * sq) - 0.5;
  }
  return kl;
}

nlohmann::json gaussian_to_json(const GaussianPolicyDistribution& dist) {
  nlohmann::json j;
  j["d"] = dist.dim();
  j["mu"] = std::vector<double>(dist.mu.data(), dist.mu.data() + dist.mu.size());
  j["sigma"] = std::vector<double>(dist.sigma.data(), dist.sigma.data() + dist.sigma.size());
  return j;
}

GaussianPolicyDistribution gaussian_from_json(const nlohmann::json& j) {
  const auto mu = j.at("mu").get<std::vector<double>>();
  const auto sigma = j.at("sigma").get<std::vector<double>>();
  const auto d = j.at("d").get<std::size_t>();
  if (mu.size() != d || sigma.size() != d)
    throw std::invalid_argument("gaussian_from_json: inconsistent dimensions");
  return GaussianPolicyDistribution(
      Eigen::Map<const Eigen::VectorXd>(mu.data(), static_cast<Eigen::Index>(mu.size())),
      Eigen::Map<const Eigen::VectorXd>(sigma.data(), static_cast<Eigen::Index>(sigma.size())));
}

namespace {

std::vector<std::vector<double>> matrix_to_rows(const Eigen::MatrixXd& m) {
  std::vector<std::vector<double>> rows(m.rows());
  for (int i = 0; i < m.rows(); ++i) {
    rows[i].resize(m.cols());
    for (int j = 0; j < m.cols(); ++j) rows[i][j] = m(i, j);
  }
  return rows;
}

Eigen::MatrixXd rows_to_matrix(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) throw std::invalid_argument("layered_from_json: empty matrix");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()),
                    static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows.front().size())
      throw std::invalid_argument("layered_from_json: ragged matrix rows");
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  }
  return m;
}

}  // namespace

nlohmann::json layered_to_json(const LayeredGaussianPolicy& policy) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& layer : policy.layers) {
    nlohmann::json l;
    l["mu_w"] = matrix_to_rows(layer.mu_w);
    l["delta_w"] = matrix_to_rows(layer.delta_w);
    l["mu_b"] = std::vector<double>(layer.mu_b.data(), layer.mu_b.data() + layer.mu_b.size());
    l["delta_b"] =
        std::vector<double>(layer.delta_b.data(), layer.delta_b.data() + layer.delta_b.size());
    l["activation"] = layer.activation == Activation::kTanh ? "tanh" : "relu";
    layers.push_back(std::move(l));
  }
  return nlohmann::json{{"layers", std::move(layers)}};
}

LayeredGaussianPolicy layered_from_json(const nlohmann::json& j) {
  std::vector<GaussianLayer> layers;
  for (const auto& l : j.at("layers")) {
    GaussianLayer layer;
    layer.mu_w = rows_to_matrix(l.at("mu_w").get<std::vector<std::vector<double>>>());
    layer.delta_w = rows_to_matrix(l.at("delta_w").get<std::vector<std::vector<double>>>());
    const auto mu_b = l.at("mu_b").get<std::vector<double>>();
    const auto delta_b = l.at("delta_b").get<std::vector<double>>();
    layer.mu_b = Eigen::Map<const Eigen::VectorXd>(mu_b.data(),
                                                   static_cast<Eigen::Index>(mu_b.size()));
    layer.delta_b = Eigen::Map<const Eigen::VectorXd>(delta_b.data(),
                                                      static_cast<Eigen::Index>(delta_b.size()));
    const auto activation = l.at("activation").get<std::string>();
    if (activation == "tanh") layer.activation = Activation::kTanh;
    else if (activation == "relu") layer.activation = Activation::kRelu;
    else throw std::invalid_argument("layered_from_json: unknown activation " + activation);
    layers.push_back(std::move(layer));
  }
  return LayeredGaussianPolicy(std::move(layers));
}

// --------------------------------------------------------------------------
// Feature maps
// --------------------------------------------------------------------------

BlockStateFeatures::BlockStateFeatures(int state_dim, int num_actions)
    : state_dim_(state_dim), num_actions_(num_actions),
      scale_(Eigen::VectorXd::Ones(state_dim > 0 ? state_dim : 1)) {
  if (state_dim <= 0 || num_actions <= 0)
    throw std::invalid_argument("BlockStateFeatures: dimensions must be positive");
}

BlockStateFeatures::BlockStateFeatures(Eigen::VectorXd scale, int num_actions)
    : state_dim_(static_cast<int>(scale.size())), num_actions_(num_actions),
      scale_(std::move(scale)) {
  if (state_dim_ <= 0 || num_actions <= 0)
    throw std::invalid_argument("BlockStateFeatures: dimensions must be positive");
}

Eigen::VectorXd BlockStateFeatures::features(const Eigen::VectorXd& state, int action) const {
  if (state.size() != state_dim_) throw std::invalid_argument("BlockStateFeatures: bad state size");
  if (action < 0 || action >= num_actions_)
    throw std::invalid_argument("BlockStateFeatures: action out of range");
  Eigen::VectorXd psi = Eigen::VectorXd::Zero(dim());
  const int base = action * (state_dim_ + 1);
  psi.segment(base, state_dim_) = state.cwiseProduct(scale_);
  psi[base + state_dim_] = 1.0;
  return psi;
}

TabularFeatures::TabularFeatures(int num_states, int num_actions)
    : num_states_(num_states), num_actions_(num_actions) {
  if (num_states <= 0 || num_actions <= 0)
    throw std::invalid_argument("TabularFeatures: dimensions must be positive");
}

Eigen::VectorXd TabularFeatures::features(const Eigen::VectorXd& state, int action) const {
  const int s = static_cast<int>(std::lround(state[0]));
  if (s < 0 || s >= num_states_) throw std::invalid_argument("TabularFeatures: state out of range");
  if (action < 0 || action >= num_actions_)
    throw std::invalid_argument("TabularFeatures: action out of range");
  Eigen::VectorXd psi = Eigen::VectorXd::Zero(dim());
  psi[s * num_actions_ + action] = 1.0;
  return psi;
}

ScalarDirectionFeatures::ScalarDirectionFeatures(std::vector<double> state_values)
    : state_values_(std::move(state_values)) {
  if (state_values_.empty())
    throw std::invalid_argument("ScalarDirectionFeatures: empty state values");
}

Eigen::VectorXd ScalarDirectionFeatures::features(const Eigen::VectorXd& state, int action) const {
  const int s = static_cast<int>(std::lround(state[0]));
  if (s < 0 || s >= static_cast<int>(state_values_.size()))
    throw std::invalid_argument("ScalarDirectionFeatures: state out of range");
  if (action < 0 || action > 1)
    throw std::invalid_argument("ScalarDirectionFeatures: action out of range");
  Eigen::VectorXd psi(1);
  psi[0] = state_values_[s] * (action == 1 ? 0.5 : -0.5);
  return psi;
}

// --------------------------------------------------------------------------
// Gibbs linear policy
// --------------------------------------------------------------------------

GibbsLinearPolicy::GibbsLinearPolicy(Eigen::VectorXd theta,
                                     std::shared_ptr<const FeatureMap> features)
    : theta_(std::move(theta)), features_(std::move(features)) {
  if (!features_) throw std::invalid_argument("GibbsLinearPolicy: null feature map");
  if (theta_.size() != features_->dim())
    throw std::invalid_argument("GibbsLinearPolicy: theta size does not match feature dim");
}

Eigen::VectorXd GibbsLinearPolicy::action_probs(const Eigen::VectorXd& state) const {
  const int num_actions = features_->num_actions();
  Eigen::VectorXd scores(num_actions);
  for (int a = 0; a < num_actions; ++a) {
    scores[a] = theta_.dot(features_->features(state, a));
    if (!std::isfinite(scores[a]))
      throw std::domain_error("GibbsLinearPolicy: non-finite action score");
  }
  const double shift = scores.maxCoeff();
  Eigen::VectorXd probs = (scores.array() - shift).exp();
  probs /= probs.sum();
  return probs;
}

Eigen::VectorXd GibbsLinearPolicy::grad_log_prob(const Eigen::VectorXd& state, int action) const {
  const Eigen::VectorXd probs = action_probs(state);
  if (action < 0 || action >= probs.size())
    throw std::invalid_argument("GibbsLinearPolicy: action out of range");
  Eigen::VectorXd grad = features_->features(state, action);
  for (int a = 0; a < probs.size(); ++a) grad -= probs[a] * features_->features(state, a);
  return grad;
}

int GibbsLinearPolicy::sample_action(const Eigen::VectorXd& state, Rng& rng) const {
  const Eigen::VectorXd probs = action_probs(state);
  return rng.categorical(std::span<const double>(probs.data(), probs.size()));
}

// --------------------------------------------------------------------------
// Layered Gaussian MLP
// --------------------------------------------------------------------------

LayeredGaussianPolicy::LayeredGaussianPolicy(std::vector<GaussianLayer> ls) : layers(std::move(ls)) {
  if (layers.empty()) throw std::invalid_argument("LayeredGaussianPolicy: no layers");
  for (std::size_t r = 0; r < layers.size(); ++r) {
    const auto& l = layers[r];
    if (l.mu_w.rows() != l.delta_w.rows() || l.mu_w.cols() != l.delta_w.cols() ||
        l.mu_b.size() != l.delta_b.size() || l.mu_b.size() != l.mu_w.rows())
      throw std::invalid_argument("LayeredGaussianPolicy: inconsistent layer shapes");
    if (r + 1 < layers.size() && layers[r + 1].mu_w.cols() != l.mu_w.rows())
      throw std::invalid_argument("LayeredGaussianPolicy: layer shapes do not compose");
  }
}

LayeredGaussianPolicy make_layered_policy(const std::vector<int>& dims, Activation hidden,
                                          std::uint64_t seed) {
  if (dims.size() < 2) throw std::invalid_argument("make_layered_policy: need at least 2 dims");
  Rng rng(derive_seed(seed, 0x6c617965ULL));
  std::vector<GaussianLayer> layers;
  for (std::size_t r = 0; r + 1 < dims.size(); ++r) {
    GaussianLayer layer;
    const int in = dims[r];
    const int out = dims[r + 1];
    const double std = std::sqrt(2.0 / in);
    layer.mu_w.resize(out, in);
    for (int i = 0; i < out; ++i)
      for (int j = 0; j < in; ++j) layer.mu_w(i, j) = rng.normal(0.0, std);
    layer.delta_w = Eigen::MatrixXd::Constant(out, in, -2.0);
    layer.mu_b.resize(out);
    for (int i = 0; i < out; ++i) layer.mu_b[i] = rng.normal(0.0, std);
    layer.delta_b = Eigen::VectorXd::Constant(out, -2.0);
    layer.activation = (r + 2 < dims.size()) ? hidden : Activation::kTanh;
    layers.push_back(std::move(layer));
  }
  return LayeredGaussianPolicy(std::move(layers));
}

std::vector<LayerNoise> make_layer_noise(const LayeredGaussianPolicy& policy, std::uint64_t seed,
                                         std::uint64_t index) {
  std::vector<LayerNoise> noise;
  Rng rng(derive_seed(seed, 0x6c6e6f69ULL, index));
  for (const auto& layer : policy.layers) {
    LayerNoise n;
    n.eps_w.resize(layer.mu_w.rows(), layer.mu_w.cols());
    for (int i = 0; i < n.eps_w.rows(); ++i)
      for (int j = 0; j < n.eps_w.cols(); ++j) n.eps_w(i, j) = rng.normal();
    n.eps_b.resize(layer.mu_b.size());
    for (int i = 0; i < n.eps_b.size(); ++i) n.eps_b[i] = rng.normal();
    noise.push_back(std::move(n));
  }
  return noise;
}

Eigen::VectorXd MlpWeights::forward(const Eigen::VectorXd& input) const {
  Eigen::VectorXd x = input;
  for (std::size_t r = 0; r < layers.size(); ++r) {
    x = layers[r].w * x + layers[r].b;
    if (r + 1 == layers.size()) break;  // scores from the last layer, no activation
    if (layers[r].activation == Activation::kTanh)
      x = x.array().tanh();
    else
      x = x.cwiseMax(0.0);
  }
  return x;
}

MlpWeights sample_layered(const LayeredGaussianPolicy& policy,
                          const std::vector<LayerNoise>& noise) {
  if (noise.size() != policy.layers.size())
    throw std::invalid_argument("sample_layered: noise layer count mismatch");
  MlpWeights weights;
  for (std::size_t r = 0; r < policy.layers.size(); ++r) {
    const auto& layer = policy.layers[r];
    const auto& n = noise[r];
    if (n.eps_w.rows() != layer.mu_w.rows() || n.eps_w.cols() != layer.mu_w.cols() ||
        n.eps_b.size() != layer.mu_b.size())
      throw std::invalid_argument("sample_layered: noise shape mismatch");
    MlpWeights::Layer out;
    const Eigen::MatrixXd gamma_w = layer.delta_w.unaryExpr([](double d) { return softplus(d); });
    const Eigen::VectorXd gamma_b = layer.delta_b.unaryExpr([](double d) { return softplus(d); });
    out.w = layer.mu_w.cwiseProduct((gamma_w.cwiseProduct(n.eps_w).array() + 1.0).matrix());
    out.b = layer.mu_b.cwiseProduct((gamma_b.cwiseProduct(n.eps_b).array() + 1.0).matrix());
    out.activation = layer.activation;
    weights.layers.push_back(std::move(out));
  }
  return weights;
}

LayeredGradient layered_param_gradient(const LayeredGaussianPolicy& policy,
                                       const std::vector<LayerNoise>& noise,
                                       const WeightGradient& weight_grad) {
  if (noise.size() != policy.layers.size() || weight_grad.w.size() != policy.layers.size())
    throw std::invalid_argument("layered_param_gradient: layer count mismatch");
  LayeredGradient grad;
  for (std::size_t r = 0; r < policy.layers.size(); ++r) {
    const auto& layer = policy.layers[r];
    const auto& n = noise[r];
    const auto& gw = weight_grad.w[r];
    const auto& gb = weight_grad.b[r];
    // w = mu (1 + softplus(delta) eps):
    //   dw/dmu = 1 + softplus(delta) eps
    //   dw/ddelta = mu eps sigmoid(delta)
    const Eigen::MatrixXd sp_w = layer.delta_w.unaryExpr([](double d) { return softplus(d); });
    const Eigen::MatrixXd sig_w =
        layer.delta_w.unaryExpr([](double d) { return 1.0 / (1.0 + std::exp(-d)); });
    grad.mu_w.push_back(gw.cwiseProduct((sp_w.cwiseProduct(n.eps_w).array() + 1.0).matrix()));
    grad.delta_w.push_back(gw.cwiseProduct(layer.mu_w).cwiseProduct(n.eps_w).cwiseProduct(sig_w));
    const Eigen::VectorXd sp_b = layer.delta_b.unaryExpr([](double d) { return softplus(d); });
    const Eigen::VectorXd sig_b =
        layer.delta_b.unaryExpr([](double d) { return 1.0 / (1.0 + std::exp(-d)); });
    grad.mu_b.push_back(gb.cwiseProduct((sp_b.cwiseProduct(n.eps_b).array() + 1.0).matrix()));
    grad.delta_b.push_back(gb.cwiseProduct(layer.mu_b).cwiseProduct(n.eps_b).cwiseProduct(sig_b));
  }
  return grad;
}

// --------------------------------------------------------------------------
// MLP Gibbs policy over a packed flat parameter vector
// --------------------------------------------------------------------------

MlpGibbsPolicy::MlpGibbsPolicy(std::vector<int> dims, Activation hidden)
    : dims_(std::move(dims)), hidden_(hidden) {
  if (dims_.size() < 2) throw std::invalid_argument("MlpGibbsPolicy: need at least 2 dims");
  param_dim_ = 0;
  for (std::size_t r = 0; r + 1 < dims_.size(); ++r)
    param_dim_ += dims_[r + 1] * dims_[r] + dims_[r + 1];
}

MlpWeights MlpGibbsPolicy::unpack(const Eigen::VectorXd& theta) const {
  if (theta.size() != param_dim_) throw std::invalid_argument("MlpGibbsPolicy: bad theta size");
  MlpWeights weights;
  int offset = 0;
  for (std::size_t r = 0; r + 1 < dims_.size(); ++r) {
    const int in = dims_[r];
    const int out = dims_[r + 1];
    MlpWeights::Layer layer;
    layer.w = Eigen::Map<const Eigen::MatrixXd>(theta.data() + offset, out, in);
    offset += out * in;
    layer.b = theta.segment(offset, out);
    offset += out;
    layer.activation = hidden_;
    weights.layers.push_back(std::move(layer));
  }
  return weights;
}

Eigen::VectorXd MlpGibbsPolicy::pack(const MlpWeights& weights) const {
  Eigen::VectorXd theta(param_dim_);
  int offset = 0;
  for (const auto& layer : weights.layers) {
    Eigen::Map<Eigen::MatrixXd>(theta.data() + offset, layer.w.rows(), layer.w.cols()) = layer.w;
    offset += static_cast<int>(layer.w.size());
    theta.segment(offset, layer.b.size()) = layer.b;
    offset += static_cast<int>(layer.b.size());
  }
  return theta;
}

Eigen::VectorXd MlpGibbsPolicy::action_probs(const Eigen::VectorXd& theta,
                                             const Eigen::VectorXd& state) const {
  const Eigen::VectorXd scores = unpack(theta).forward(state);
  for (int a = 0; a < scores.size(); ++a)
    if (!std::isfinite(scores[a])) throw std::domain_error("MlpGibbsPolicy: non-finite score");
  Eigen::VectorXd probs = (scores.array() - scores.maxCoeff()).exp();
  probs /= probs.sum();
  return probs;
}

Eigen::VectorXd MlpGibbsPolicy::grad_log_prob(const Eigen::VectorXd& theta,
                                              const Eigen::VectorXd& state, int action) const {
  const MlpWeights weights = unpack(theta);
  // Forward pass keeping pre- and post-activation values.
  std::vector<Eigen::VectorXd> acts;  // layer inputs
  acts.push_back(state);
  Eigen::VectorXd x = state;
  std::vector<Eigen::VectorXd> pre;
  for (std::size_t r = 0; r < weights.layers.size(); ++r) {
    Eigen::VectorXd z = weights.layers[r].w * x + weights.layers[r].b;
    pre.push_back(z);
    if (r + 1 == weights.layers.size()) {
      x = z;
    } else if (weights.layers[r].activation == Activation::kTanh) {
      x = z.array().tanh().matrix();
    } else {
      x = z.cwiseMax(0.0);
    }
    acts.push_back(x);
  }
  Eigen::VectorXd probs = (x.array() - x.maxCoeff()).exp();
  probs /= probs.sum();
  if (action < 0 || action >= probs.size())
    throw std::invalid_argument("MlpGibbsPolicy: action out of range");

  // d log pi(a|s) / d scores = e_a - probs; backpropagate.
  Eigen::VectorXd delta = -probs;
  delta[action] += 1.0;
  WeightGradient grad;
  grad.w.resize(weights.layers.size());
  grad.b.resize(weights.layers.size());
  for (int r = static_cast<int>(weights.layers.size()) - 1; r >= 0; --r) {
    grad.w[r] = delta * acts[r].transpose();
    grad.b[r] = delta;
    if (r == 0) break;
    Eigen::VectorXd back = weights.layers[r].w.transpose() * delta;
    const Eigen::VectorXd& z = pre[r - 1];
    if (weights.layers[r - 1].activation == Activation::kTanh) {
      const Eigen::VectorXd t = z.array().tanh();
      delta = back.cwiseProduct((1.0 - t.array().square()).matrix());
    } else {
      delta = back.cwiseProduct((z.array() > 0.0).cast<double>().matrix());
    }
  }
  MlpWeights as_weights;
  for (std::size_t r = 0; r < grad.w.size(); ++r)
    as_weights.layers.push_back({grad.w[r], grad.b[r], hidden_});
  return pack(as_weights);
}

}  // namespace epic
