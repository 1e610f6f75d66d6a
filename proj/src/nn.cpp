#include "pev/nn.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace pev {

namespace {

constexpr std::uint32_t kCheckpointMagic = 0x5056454eu;  // "NEVP" bytes
constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
void write_pod(std::ostream& os, const T& value) {
  os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
  T value{};
  is.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!is) throw std::runtime_error("checkpoint: truncated stream");
  return value;
}

/// Orthogonal matrix via QR of a Gaussian sample, sign-fixed so the
/// decomposition is unique.
MatX orthogonal_matrix(int rows, int cols, Rng& rng) {
  const int n = std::max(rows, cols);
  MatX a(n, n);
  for (int c = 0; c < n; ++c)
    for (int r = 0; r < n; ++r) a(r, c) = rng.normal();
  Eigen::HouseholderQR<MatX> qr(a);
  MatX q = qr.householderQ();
  const MatX r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int i = 0; i < n; ++i) {
    if (r(i, i) < 0.0) q.col(i) *= -1.0;
  }
  return q.topLeftCorner(rows, cols);
}

}  // namespace

MlpSpec MlpParams::spec() const {
  MlpSpec s;
  s.input_dim = input_dim();
  for (std::size_t l = 0; l + 1 < W.size(); ++l)
    s.hidden.push_back(static_cast<int>(W[l].rows()));
  s.output_dim = output_dim();
  return s;
}

std::size_t MlpParams::num_params() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < W.size(); ++l)
    n += static_cast<std::size_t>(W[l].size()) + b[l].size();
  return n;
}

void MlpParams::to_flat(VecX& out) const {
  out.resize(static_cast<Eigen::Index>(num_params()));
  Eigen::Index k = 0;
  for (std::size_t l = 0; l < W.size(); ++l) {
    for (Eigen::Index r = 0; r < W[l].rows(); ++r)
      for (Eigen::Index c = 0; c < W[l].cols(); ++c) out[k++] = W[l](r, c);
    for (Eigen::Index i = 0; i < b[l].size(); ++i) out[k++] = b[l][i];
  }
}

void MlpParams::from_flat(const VecX& flat) {
  Eigen::Index k = 0;
  for (std::size_t l = 0; l < W.size(); ++l) {
    for (Eigen::Index r = 0; r < W[l].rows(); ++r)
      for (Eigen::Index c = 0; c < W[l].cols(); ++c) W[l](r, c) = flat[k++];
    for (Eigen::Index i = 0; i < b[l].size(); ++i) b[l][i] = flat[k++];
  }
  PEV_ASSERT(k == flat.size(), "from_flat: size mismatch");
}

MlpGrads zeros_like(const MlpParams& params) {
  MlpGrads g;
  g.W.reserve(params.W.size());
  g.b.reserve(params.b.size());
  for (std::size_t l = 0; l < params.W.size(); ++l) {
    g.W.push_back(MatX::Zero(params.W[l].rows(), params.W[l].cols()));
    g.b.push_back(VecX::Zero(params.b[l].size()));
  }
  return g;
}

MlpParams init_mlp(const MlpSpec& spec, Rng& rng, double hidden_gain,
                   double output_scale) {
  const std::vector<int> dims = spec.layer_dims();
  MlpParams p;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const bool last = (l + 2 == dims.size());
    const double gain = last ? output_scale : hidden_gain;
    p.W.push_back(gain * orthogonal_matrix(dims[l + 1], dims[l], rng));
    p.b.push_back(VecX::Zero(dims[l + 1]));
  }
  return p;
}

MatX mlp_forward(const MlpParams& params, const MatX& input, MlpWorkspace* ws) {
  PEV_ASSERT(input.rows() == params.input_dim(),
             "mlp_forward: input dimension mismatch");
  const int n_layers = params.num_layers();
  if (ws) {
    ws->acts.assign(1, input);
    ws->preacts.clear();
  }
  MatX h = input;
  for (int l = 0; l < n_layers; ++l) {
    MatX z = (params.W[l] * h).colwise() + params.b[l];
    if (l + 1 < n_layers) {
      if (ws) ws->preacts.push_back(z);
      h = z.cwiseMax(0.0);
      if (ws) ws->acts.push_back(h);
    } else {
      h = std::move(z);
    }
  }
  return h;
}

void mlp_backward(const MlpParams& params, const MlpWorkspace& ws,
                  const MatX& output_grad, MlpGrads& grads) {
  const int n_layers = params.num_layers();
  PEV_ASSERT(static_cast<int>(ws.acts.size()) == n_layers,
             "mlp_backward: workspace mismatch");
  MatX g = output_grad;
  for (int l = n_layers - 1; l >= 0; --l) {
    grads.W[l].noalias() += g * ws.acts[l].transpose();
    grads.b[l] += g.rowwise().sum();
    if (l > 0) {
      MatX gin = params.W[l].transpose() * g;
      g = gin.cwiseProduct(
          (ws.preacts[l - 1].array() > 0.0).cast<double>().matrix());
    }
  }
}

SquashedGaussian SquashedGaussian::from_head(const VecX& head) {
  PEV_ASSERT(head.size() % 2 == 0, "policy head must stack [mean, log_std]");
  const Eigen::Index n = head.size() / 2;
  SquashedGaussian d;
  d.mean = head.head(n);
  d.log_std.resize(n);
  for (Eigen::Index i = 0; i < n; ++i)
    d.log_std[i] = clamp(head[n + i], kLogStdMin, kLogStdMax);
  return d;
}

void SquashedGaussian::sample(Rng& rng, VecX* u, VecX* action) const {
  const Eigen::Index n = mean.size();
  u->resize(n);
  action->resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double eps = rng.normal();
    (*u)[i] = mean[i] + std::exp(log_std[i]) * eps;
    double a = std::tanh((*u)[i]);
    // tanh rounds to +-1 for |u| above ~19; keep the open interval.
    if (a >= 1.0) a = std::nextafter(1.0, 0.0);
    if (a <= -1.0) a = std::nextafter(-1.0, 0.0);
    (*action)[i] = a;
  }
}

double squashed_log_prob(double mean, double log_std, double u) {
  const double inv_std = std::exp(-log_std);
  const double z = (u - mean) * inv_std;
  const double a = std::tanh(u);
  return -0.5 * z * z - log_std - 0.5 * std::log(2.0 * M_PI) -
         std::log(1.0 - a * a + kTanhJacobianEps);
}

double SquashedGaussian::log_prob_presquash(const VecX& u) const {
  double lp = 0.0;
  for (Eigen::Index i = 0; i < mean.size(); ++i)
    lp += squashed_log_prob(mean[i], log_std[i], u[i]);
  return lp;
}

double SquashedGaussian::entropy() const {
  double h = 0.0;
  for (Eigen::Index i = 0; i < log_std.size(); ++i)
    h += log_std[i] + 0.5 * std::log(2.0 * M_PI * M_E);
  return h;
}

AdamState AdamState::init(const MlpParams& params) {
  AdamState s;
  s.m = zeros_like(params);
  s.v = zeros_like(params);
  s.step = 0;
  return s;
}

void adam_update(MlpParams& params, const MlpGrads& grads, AdamState& state,
                 const AdamConfig& cfg) {
  state.step += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t l = 0; l < params.W.size(); ++l) {
    auto update = [&](auto& p, const auto& g, auto& m, auto& v) {
      m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
      v = cfg.beta2 * v.array().matrix() +
          (1.0 - cfg.beta2) * g.array().square().matrix();
      p.array() -= cfg.lr * (m.array() / bc1) /
                   ((v.array() / bc2).sqrt() + cfg.eps);
    };
    update(params.W[l], grads.W[l], state.m.W[l], state.v.W[l]);
    update(params.b[l], grads.b[l], state.m.b[l], state.v.b[l]);
  }
}

double grad_global_norm(const std::vector<const MlpGrads*>& grads) {
  double sq = 0.0;
  for (const MlpGrads* g : grads) {
    for (std::size_t l = 0; l < g->W.size(); ++l) {
      sq += g->W[l].squaredNorm();
      sq += g->b[l].squaredNorm();
    }
  }
  return std::sqrt(sq);
}

void clip_grad_norm(std::vector<MlpGrads*> grads, double max_norm) {
  std::vector<const MlpGrads*> view(grads.begin(), grads.end());
  const double norm = grad_global_norm(view);
  if (norm <= max_norm || norm == 0.0) return;
  const double scale = max_norm / norm;
  for (MlpGrads* g : grads) {
    for (std::size_t l = 0; l < g->W.size(); ++l) {
      g->W[l] *= scale;
      g->b[l] *= scale;
    }
  }
}

void save_mlp(std::ostream& os, const MlpParams& params) {
  write_pod(os, kCheckpointMagic);
  write_pod(os, kCheckpointVersion);
  write_pod(os, static_cast<std::uint32_t>(params.num_layers()));
  for (int l = 0; l < params.num_layers(); ++l) {
    write_pod(os, static_cast<std::uint32_t>(params.W[l].rows()));
    write_pod(os, static_cast<std::uint32_t>(params.W[l].cols()));
  }
  for (int l = 0; l < params.num_layers(); ++l) {
    for (Eigen::Index r = 0; r < params.W[l].rows(); ++r)
      for (Eigen::Index c = 0; c < params.W[l].cols(); ++c)
        write_pod(os, params.W[l](r, c));
    for (Eigen::Index i = 0; i < params.b[l].size(); ++i)
      write_pod(os, params.b[l][i]);
  }
}

MlpParams load_mlp(std::istream& is) {
  if (read_pod<std::uint32_t>(is) != kCheckpointMagic)
    throw std::runtime_error("checkpoint: bad magic");
  if (read_pod<std::uint32_t>(is) != kCheckpointVersion)
    throw std::runtime_error("checkpoint: unsupported version");
  const auto n_layers = read_pod<std::uint32_t>(is);
  std::vector<std::pair<std::uint32_t, std::uint32_t>> shapes;
  for (std::uint32_t l = 0; l < n_layers; ++l) {
    const auto rows = read_pod<std::uint32_t>(is);
    const auto cols = read_pod<std::uint32_t>(is);
    shapes.emplace_back(rows, cols);
  }
  MlpParams p;
  for (auto [rows, cols] : shapes) {
    MatX w(rows, cols);
    for (std::uint32_t r = 0; r < rows; ++r)
      for (std::uint32_t c = 0; c < cols; ++c) w(r, c) = read_pod<double>(is);
    VecX b(rows);
    for (std::uint32_t i = 0; i < rows; ++i) b[i] = read_pod<double>(is);
    p.W.push_back(std::move(w));
    p.b.push_back(std::move(b));
  }
  return p;
}

void save_mlp_file(const std::string& path, const MlpParams& params) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write checkpoint: " + path);
  save_mlp(os, params);
}

MlpParams load_mlp_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read checkpoint: " + path);
  return load_mlp(is);
}

}  // namespace pev
