#include "romforge/mlp.hpp"

#include <cmath>
#include <fstream>
#include <random>

#include <json.hpp>

namespace romforge::ann {

namespace {

void check_dims(const std::vector<int>& dims) {
  if (dims.size() < 2) throw ConfigError("mlp needs at least input and output dims");
  for (int d : dims)
    if (d < 1) throw ConfigError("mlp layer dims must be positive");
}

void check_input(const MlpModel& net, const Vec& q) {
  if (q.size() != net.input_dim()) throw ConfigError("mlp input dimension mismatch");
}

}  // namespace

std::size_t MlpModel::parameter_count() const {
  std::size_t p = 0;
  for (const auto& w : weights) p += static_cast<std::size_t>(w.size());
  return p;
}

MlpModel init_mlp(const std::vector<int>& layer_dims, std::uint64_t seed) {
  check_dims(layer_dims);
  MlpModel net;
  net.layer_dims = layer_dims;
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
    const int fan_in = layer_dims[l];
    const int fan_out = layer_dims[l + 1];
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    Mat w(fan_out, fan_in);
    for (int r = 0; r < fan_out; ++r)
      for (int c = 0; c < fan_in; ++c) w(r, c) = dist(rng);
    net.weights.push_back(std::move(w));
  }
  return net;
}

Vec forward(const MlpModel& net, const Vec& q) {
  check_input(net, q);
  Vec z = q;
  for (int l = 0; l < net.layer_count(); ++l) {
    Vec a = net.weights[static_cast<std::size_t>(l)] * z;
    if (l + 1 < net.layer_count())
      for (Eigen::Index i = 0; i < a.size(); ++i) a[i] = elu(a[i]);
    z = std::move(a);
  }
  return z;
}

Mat input_jacobian(const MlpModel& net, const Vec& q) {
  check_input(net, q);
  Vec z = q;
  Mat jac = Mat::Identity(net.input_dim(), net.input_dim());
  for (int l = 0; l < net.layer_count(); ++l) {
    const Mat& w = net.weights[static_cast<std::size_t>(l)];
    Vec a = w * z;
    jac = (w * jac).eval();
    if (l + 1 < net.layer_count()) {
      for (Eigen::Index i = 0; i < a.size(); ++i) {
        jac.row(i) *= elu_deriv(a[i]);
        a[i] = elu(a[i]);
      }
    }
    z = std::move(a);
  }
  return jac;
}

MlpGradient zero_gradient(const MlpModel& net) {
  MlpGradient g;
  g.dW.reserve(net.weights.size());
  for (const auto& w : net.weights) g.dW.push_back(Mat::Zero(w.rows(), w.cols()));
  return g;
}

MlpGradient grad_from_cotangents(const MlpModel& net, const std::vector<Vec>& inputs,
                                 const std::vector<Vec>& cotangents) {
  if (inputs.size() != cotangents.size())
    throw ConfigError("inputs and cotangents must pair up");
  MlpGradient grad = zero_gradient(net);
  const int layers = net.layer_count();
  std::vector<Vec> act(static_cast<std::size_t>(layers) + 1);  // post-activation
  std::vector<Vec> pre(static_cast<std::size_t>(layers));      // pre-activation

  for (std::size_t s = 0; s < inputs.size(); ++s) {
    check_input(net, inputs[s]);
    if (cotangents[s].size() != net.output_dim())
      throw ConfigError("cotangent dimension mismatch");

    act[0] = inputs[s];
    for (int l = 0; l < layers; ++l) {
      pre[static_cast<std::size_t>(l)] = net.weights[static_cast<std::size_t>(l)] * act[static_cast<std::size_t>(l)];
      Vec z = pre[static_cast<std::size_t>(l)];
      if (l + 1 < layers)
        for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = elu(z[i]);
      act[static_cast<std::size_t>(l) + 1] = std::move(z);
    }

    Vec delta = cotangents[s];  // identity output layer
    for (int l = layers - 1; l >= 0; --l) {
      grad.dW[static_cast<std::size_t>(l)].noalias() +=
          delta * act[static_cast<std::size_t>(l)].transpose();
      if (l > 0) {
        Vec back = net.weights[static_cast<std::size_t>(l)].transpose() * delta;
        const Vec& a = pre[static_cast<std::size_t>(l) - 1];
        for (Eigen::Index i = 0; i < back.size(); ++i) back[i] *= elu_deriv(a[i]);
        delta = std::move(back);
      }
    }
  }
  return grad;
}

OptimizerState make_optimizer(const MlpModel& net, const AdamWConfig& cfg,
                              double base_lr) {
  OptimizerState st;
  st.cfg = cfg;
  st.base_lr = base_lr;
  for (const auto& w : net.weights) {
    st.m.push_back(Mat::Zero(w.rows(), w.cols()));
    st.v.push_back(Mat::Zero(w.rows(), w.cols()));
  }
  return st;
}

void adamw_step(OptimizerState& state, MlpModel& net, const MlpGradient& grad,
                double lr) {
  if (state.m.size() != net.weights.size() || grad.dW.size() != net.weights.size())
    throw ConfigError("optimizer/model/gradient layer counts disagree");
  ++state.step;
  const double b1 = state.cfg.beta1;
  const double b2 = state.cfg.beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    Mat& m = state.m[l];
    Mat& v = state.v[l];
    const Mat& g = grad.dW[l];
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
    const Mat mhat = m / bc1;
    const Mat vhat = v / bc2;
    const Mat update = (mhat.array() / (vhat.array().sqrt() + state.cfg.epsilon)).matrix();
    net.weights[l] -= lr * update + (lr * state.cfg.weight_decay) * net.weights[l];
  }
}

double lr_at_epoch(const CosineSchedule& s, int epoch) {
  if (s.total_epochs < 1) throw ConfigError("schedule needs total_epochs >= 1");
  if (epoch < 0 || epoch > s.total_epochs)
    throw ConfigError("epoch outside [0, total_epochs]");
  const double phase = static_cast<double>(epoch) / s.total_epochs;
  return s.lr_min + (s.lr0 - s.lr_min) * 0.5 * (1.0 + std::cos(M_PI * phase));
}

void save_weights_json(const WeightsFile& wf, const std::string& path) {
  nlohmann::json j;
  j["layer_dims"] = wf.net.layer_dims;
  j["activation"] = "elu";
  j["seed"] = wf.seed;
  j["optimizer"] = {{"beta1", wf.optimizer.beta1},
                    {"beta2", wf.optimizer.beta2},
                    {"epsilon", wf.optimizer.epsilon},
                    {"weight_decay", wf.optimizer.weight_decay},
                    {"base_lr", wf.base_lr}};
  auto& weights = j["weights"];
  weights = nlohmann::json::array();
  for (const auto& w : wf.net.weights) {
    std::vector<double> flat;
    flat.reserve(static_cast<std::size_t>(w.size()));
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) flat.push_back(w(r, c));
    weights.push_back(std::move(flat));
  }
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open for writing: " + path);
  os << j.dump(2) << "\n";
  if (!os) throw IoError("write failed: " + path);
}

WeightsFile load_weights_json(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open weights file: " + path);
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed weights json: " + std::string(e.what()));
  }
  WeightsFile wf;
  try {
    if (j.at("activation").get<std::string>() != "elu")
      throw IoError("unsupported activation tag in " + path);
    wf.net.layer_dims = j.at("layer_dims").get<std::vector<int>>();
    check_dims(wf.net.layer_dims);
    wf.seed = j.at("seed").get<std::uint64_t>();
    const auto& opt = j.at("optimizer");
    wf.optimizer.beta1 = opt.at("beta1").get<double>();
    wf.optimizer.beta2 = opt.at("beta2").get<double>();
    wf.optimizer.epsilon = opt.at("epsilon").get<double>();
    wf.optimizer.weight_decay = opt.at("weight_decay").get<double>();
    wf.base_lr = opt.at("base_lr").get<double>();
    const auto& weights = j.at("weights");
    if (weights.size() + 1 != wf.net.layer_dims.size())
      throw IoError("weight array count does not match layer dims in " + path);
    for (std::size_t l = 0; l < weights.size(); ++l) {
      const int rows = wf.net.layer_dims[l + 1];
      const int cols = wf.net.layer_dims[l];
      const auto flat = weights[l].get<std::vector<double>>();
      if (static_cast<int>(flat.size()) != rows * cols)
        throw IoError("weight matrix " + std::to_string(l) + " has wrong size in " + path);
      Mat w(rows, cols);
      for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
          w(r, c) = flat[static_cast<std::size_t>(r * cols + c)];
      wf.net.weights.push_back(std::move(w));
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError("weights json missing fields: " + std::string(e.what()));
  }
  return wf;
}

}  // namespace romforge::ann
