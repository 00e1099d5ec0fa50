#include "nfcs/unfolded.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>

#include "nfcs/binary_io.hpp"
#include "nfcs/parallel.hpp"

namespace nfcs {

namespace {

TensorView view_of(const std::string& name, CMat& m) {
  return {name, reinterpret_cast<double*>(m.data()), static_cast<std::size_t>(m.size()) * 2, false};
}

TensorView view_of(const std::string& name, std::vector<double>& v, bool nonnegative) {
  return {name, v.data(), v.size(), nonnegative};
}

void check_tape(bool ok, const std::string& what) {
  if (!ok) throw TapeMismatch(what);
}

}  // namespace

const char* to_string(ModelKind kind) { return kind == ModelKind::kLista ? "lista" : "sdl-lista"; }

ModelKind parse_model_kind(const std::string& name) {
  if (name == "lista") return ModelKind::kLista;
  if (name == "sdl-lista" || name == "sdl") return ModelKind::kSdlLista;
  throw ConfigError("unknown model kind '" + name + "'");
}

DatasetKind dataset_kind_for(ModelKind kind) {
  return kind == ModelKind::kLista ? DatasetKind::kLista : DatasetKind::kSdl;
}

std::vector<TensorView> ListaParams::tensors() {
  std::vector<TensorView> out;
  for (std::size_t l = 0; l < va.size(); ++l) out.push_back(view_of("va" + std::to_string(l), va[l]));
  for (std::size_t l = 0; l < vb.size(); ++l) out.push_back(view_of("vb" + std::to_string(l), vb[l]));
  out.push_back(view_of("eta", eta, true));
  return out;
}

ListaParams ListaParams::zeros_like(const ListaParams& other) {
  ListaParams z;
  for (const auto& m : other.va) z.va.push_back(CMat::Zero(m.rows(), m.cols()));
  for (const auto& m : other.vb) z.vb.push_back(CMat::Zero(m.rows(), m.cols()));
  z.eta.assign(other.eta.size(), 0.0);
  return z;
}

std::vector<TensorView> SdlListaParams::tensors() {
  return {view_of("v", v), view_of("va", va), view_of("eta", eta, true), view_of("kappa", kappa, false)};
}

SdlListaParams SdlListaParams::zeros_like(const SdlListaParams& other) {
  SdlListaParams z;
  z.v = CMat::Zero(other.v.rows(), other.v.cols());
  z.va = CMat::Zero(other.va.rows(), other.va.cols());
  z.eta.assign(other.eta.size(), 0.0);
  z.kappa.assign(other.kappa.size(), 0.0);
  return z;
}

std::vector<TensorView> tensors_of(UnfoldedParams& params) {
  return std::visit([](auto& p) { return p.tensors(); }, params);
}

ModelKind kind_of(const UnfoldedParams& params) {
  return std::holds_alternative<ListaParams>(params) ? ModelKind::kLista : ModelKind::kSdlLista;
}

int layers_of(const UnfoldedParams& params) {
  return std::visit([](const auto& p) { return p.layers(); }, params);
}

CBatch soft_threshold_batch(const CBatch& z, double eta) {
  CBatch out(z.rows(), z.cols());
  const Eigen::Index n = z.size();
  const cplx* zi = z.data();
  cplx* oi = out.data();
  for (Eigen::Index k = 0; k < n; ++k) {
    const double mag = std::abs(zi[k]);
    oi[k] = mag > eta ? zi[k] * (1.0 - eta / mag) : cplx(0.0, 0.0);
  }
  return out;
}

CBatch soft_threshold_backward(const CBatch& z, double eta, const CBatch& out_grad, double* eta_grad) {
  // Active branch: out = z - eta z/|z|. With g = dL/dRe(out) + j dL/dIm(out):
  //   g_z = g (1 - eta/(2|z|)) + conj(g) (eta/2) z^2/|z|^3
  //   dL/deta = -Re(conj(g) z/|z|)
  CBatch gz(z.rows(), z.cols());
  const Eigen::Index n = z.size();
  const cplx* zi = z.data();
  const cplx* gi = out_grad.data();
  cplx* oi = gz.data();
  double de = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) {
    const double mag = std::abs(zi[k]);
    if (mag > eta) {
      const cplx unit = zi[k] / mag;
      oi[k] = gi[k] * (1.0 - eta / (2.0 * mag)) + std::conj(gi[k]) * (eta / (2.0 * mag)) * unit * unit;
      de -= (std::conj(gi[k]) * unit).real();
    } else {
      oi[k] = cplx(0.0, 0.0);
    }
  }
  if (eta_grad != nullptr) *eta_grad += de;
  return gz;
}

CBatch lista_forward(const ListaParams& p, const CBatch& y, ListaTape* tape) {
  const int layers = p.layers();
  const int g = p.atoms();
  if (layers < 1) throw ConfigError("LISTA needs at least one layer");
  if (y.rows() != p.n_rf()) throw DimensionMismatch("LISTA input length != V_b columns");
  if (tape != nullptr) {
    tape->layers = layers;
    tape->atoms = g;
    tape->y = y;
    tape->inputs.clear();
    tape->pre.clear();
  }
  CBatch alpha = CBatch::Zero(g, y.cols());
  for (int l = 0; l < layers; ++l) {
    CBatch pre = p.vb[l] * y;
    if (l > 0) pre.noalias() += p.va[l] * alpha;
    if (tape != nullptr) {
      tape->inputs.push_back(alpha);
      tape->pre.push_back(pre);
    }
    alpha = soft_threshold_batch(pre, p.eta[l]);
  }
  return alpha;
}

CVec lista_forward(const ListaParams& p, const CVec& y) {
  const CBatch out = lista_forward(p, CBatch(y), nullptr);
  return out.col(0);
}

CBatch sdl_lista_forward(const SdlListaParams& p, const CBatch& y, const CMat& w, SdlListaTape* tape) {
  const int layers = p.layers();
  const int n = p.n_antennas();
  if (layers < 1) throw ConfigError("SDL-LISTA needs at least one layer");
  if (w.rows() != p.n_rf() || w.cols() != n || y.rows() != p.n_rf()) {
    throw DimensionMismatch("SDL-LISTA combiner/input dimensions");
  }
  if (tape != nullptr) {
    tape->layers = layers;
    tape->atoms = p.atoms();
    tape->y = y;
    tape->h.clear();
    tape->r.clear();
    tape->u.clear();
    tape->pre.clear();
    tape->act.clear();
  }
  CBatch h = CBatch::Zero(n, y.cols());
  for (int l = 0; l < layers; ++l) {
    CBatch r = -y;
    if (l > 0) r.noalias() += w * h;
    CBatch u = h;
    u.noalias() -= p.kappa[l] * (p.v * r);
    CBatch pre = p.va * u;
    CBatch act = soft_threshold_batch(pre, p.eta[l]);
    CBatch next = p.va.adjoint() * act;
    if (tape != nullptr) {
      tape->h.push_back(std::move(h));
      tape->r.push_back(std::move(r));
      tape->u.push_back(std::move(u));
      tape->pre.push_back(std::move(pre));
      tape->act.push_back(std::move(act));
    }
    h = std::move(next);
  }
  return h;
}

CVec sdl_lista_forward(const SdlListaParams& p, const CVec& y, const CMat& w) {
  const CBatch out = sdl_lista_forward(p, CBatch(y), w, nullptr);
  return out.col(0);
}

LossResult l2_loss(const CBatch& out, const CBatch& target) {
  if (out.rows() != target.rows() || out.cols() != target.cols()) {
    throw DimensionMismatch("loss: output and target shapes differ");
  }
  LossResult res;
  res.grad = out - target;
  for (Eigen::Index c = 0; c < res.grad.cols(); ++c) {
    const double n = res.grad.col(c).norm();
    res.value += n;
    if (n > 0.0) {
      res.grad.col(c) /= n;
    } else {
      res.grad.col(c).setZero();
    }
  }
  return res;
}

double loss_lista(const ListaParams& p, const CBatch& y, const CBatch& alpha_star) {
  return l2_loss(lista_forward(p, y), alpha_star).value;
}

double loss_sdl(const SdlListaParams& p, const CBatch& y, const CBatch& h_star, const CMat& w) {
  return l2_loss(sdl_lista_forward(p, y, w), h_star).value;
}

ListaParams lista_backward(const ListaParams& p, const ListaTape& tape, const CBatch& out_grad) {
  const int layers = p.layers();
  check_tape(tape.layers == layers && tape.atoms == p.atoms() &&
                 static_cast<int>(tape.pre.size()) == layers &&
                 static_cast<int>(tape.inputs.size()) == layers,
             "LISTA tape does not match the parameters");
  check_tape(out_grad.rows() == p.atoms() && out_grad.cols() == tape.y.cols(),
             "LISTA output gradient shape does not match the tape");

  ListaParams grads = ListaParams::zeros_like(p);
  CBatch g = out_grad;
  for (int l = layers - 1; l >= 0; --l) {
    const CBatch gz = soft_threshold_backward(tape.pre[l], p.eta[l], g, &grads.eta[l]);
    grads.vb[l].noalias() = gz * tape.y.adjoint();
    if (l > 0) {
      grads.va[l].noalias() = gz * tape.inputs[l].adjoint();
      g.noalias() = p.va[l].adjoint() * gz;
    }
  }
  return grads;
}

SdlListaParams sdl_lista_backward(const SdlListaParams& p, const SdlListaTape& tape, const CMat& w,
                                  const CBatch& out_grad) {
  const int layers = p.layers();
  check_tape(tape.layers == layers && tape.atoms == p.atoms() &&
                 static_cast<int>(tape.pre.size()) == layers,
             "SDL-LISTA tape does not match the parameters");
  check_tape(out_grad.rows() == p.n_antennas() && out_grad.cols() == tape.y.cols(),
             "SDL-LISTA output gradient shape does not match the tape");

  SdlListaParams grads = SdlListaParams::zeros_like(p);
  CBatch g = out_grad;
  for (int l = layers - 1; l >= 0; --l) {
    // h^{l+1} = V_A^H act
    const CBatch g_act = p.va * g;
    grads.va.noalias() += tape.act[l] * g.adjoint();
    // act = soft(V_A u)
    const CBatch g_pre = soft_threshold_backward(tape.pre[l], p.eta[l], g_act, &grads.eta[l]);
    grads.va.noalias() += g_pre * tape.u[l].adjoint();
    const CBatch g_u = p.va.adjoint() * g_pre;
    // u = h - kappa V r
    const CBatch vr = p.v * tape.r[l];
    grads.kappa[l] -= (g_u.conjugate().cwiseProduct(vr)).sum().real();
    grads.v.noalias() -= p.kappa[l] * (g_u * tape.r[l].adjoint());
    const CBatch g_r = -p.kappa[l] * (p.v.adjoint() * g_u);
    // r = W h - y
    if (l > 0) {
      g = g_u;
      g.noalias() += w.adjoint() * g_r;
    }
  }
  return grads;
}

InitScheme parse_init_scheme(const std::string& name) {
  if (name == "literal") return InitScheme::kLiteral;
  if (name == "scaled") return InitScheme::kScaled;
  if (name == "centered") return InitScheme::kCentered;
  if (name == "model") return InitScheme::kModel;
  throw ConfigError("unknown init scheme '" + name + "'");
}

LrSchedule parse_lr_schedule(const std::string& name) {
  if (name == "constant") return LrSchedule::kConstant;
  if (name == "cosine") return LrSchedule::kCosine;
  throw ConfigError("unknown learning-rate schedule '" + name + "'");
}

const char* to_string(LrSchedule schedule) {
  return schedule == LrSchedule::kCosine ? "cosine" : "constant";
}

const char* to_string(InitScheme scheme) {
  switch (scheme) {
    case InitScheme::kLiteral: return "literal";
    case InitScheme::kScaled: return "scaled";
    case InitScheme::kCentered: return "centered";
    case InitScheme::kModel: return "model";
  }
  return "?";
}

namespace {

CMat random_matrix(Eigen::Index rows, Eigen::Index cols, InitScheme scheme, Rng& rng) {
  CMat m(rows, cols);
  const double shift = scheme == InitScheme::kCentered ? 0.5 : 0.0;
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      const double re = rng.uniform() - shift;
      const double im = rng.uniform() - shift;
      m(r, c) = cplx(re, im);
    }
  }
  if (scheme != InitScheme::kLiteral) m /= std::sqrt(static_cast<double>(cols));
  return m;
}

}  // namespace

ListaParams lista_from_ista(const SensingOperator& op, double eta, int layers) {
  const double inv = 1.0 / op.lambda_max();
  const CMat va = CMat::Identity(op.cols(), op.cols()) - inv * (op.psi_h() * op.psi());
  const CMat vb = inv * op.psi_h();
  ListaParams p;
  p.va.assign(layers, va);
  p.vb.assign(layers, vb);
  p.eta.assign(layers, eta);
  return p;
}

UnfoldedParams init_params(ModelKind kind, const ModelDims& dims, InitScheme scheme, Rng& rng,
                           const InitContext& ctx) {
  if (dims.layers < 1) throw ConfigError("model needs at least one layer");
  if (kind == ModelKind::kLista) {
    if (scheme == InitScheme::kModel) {
      if (ctx.op == nullptr) throw ConfigError("model init for LISTA needs the sensing operator");
      if (ctx.op->cols() != dims.atoms || ctx.op->rows() != dims.n_rf) {
        throw DimensionMismatch("sensing operator does not match the LISTA dimensions");
      }
      return lista_from_ista(*ctx.op, kInitialThreshold, dims.layers);
    }
    ListaParams p;
    for (int l = 0; l < dims.layers; ++l) {
      p.va.push_back(random_matrix(dims.atoms, dims.atoms, scheme, rng));
      p.vb.push_back(random_matrix(dims.atoms, dims.n_rf, scheme, rng));
    }
    p.eta.assign(dims.layers, kInitialThreshold);
    return p;
  }

  SdlListaParams p;
  p.eta.assign(dims.layers, kInitialThreshold);
  p.kappa.assign(dims.layers, 1.0);
  if (scheme == InitScheme::kModel) {
    if (ctx.array == nullptr || ctx.combiner == nullptr) {
      throw ConfigError("model init for SDL-LISTA needs the array and the combiner");
    }
    const CMat& w = *ctx.combiner;
    if (w.rows() != dims.n_rf || w.cols() != dims.n_antennas) {
      throw DimensionMismatch("combiner does not match the SDL-LISTA dimensions");
    }
    // Gradient step on ||W h - y||^2 with step 1/lambda_max(W W^H).
    const double lmax = max_eigenvalue(CMat(w * w.adjoint()), 1e-12, 100000);
    p.v = w.adjoint() / lmax;
    // Far-field atoms evenly spaced over phi in [-1, 1); a tight frame
    // (V_A^H V_A = I) whenever G' >= N at half-wavelength spacing.
    p.va.resize(dims.atoms, dims.n_antennas);
    const double scale = 1.0 / std::sqrt(static_cast<double>(dims.atoms));
    for (int g = 0; g < dims.atoms; ++g) {
      const double phi = -1.0 + 2.0 * g / dims.atoms;
      for (int n = 0; n < dims.n_antennas; ++n) {
        const double x = n * ctx.array->spacing;
        p.va(g, n) = std::polar(scale, -ctx.array->wavenumber * x * phi);
      }
    }
    return p;
  }
  p.v = random_matrix(dims.n_antennas, dims.n_rf, scheme, rng);
  p.va = random_matrix(dims.atoms, dims.n_antennas, scheme, rng);
  return p;
}

template <typename Params>
void adam_step(Params& params, Params& grads, AdamState& state, const AdamConfig& cfg) {
  auto pt = params.tensors();
  auto gt = grads.tensors();
  if (pt.size() != gt.size()) throw DimensionMismatch("adam: gradient layout differs from params");
  std::size_t total = 0;
  for (std::size_t i = 0; i < pt.size(); ++i) {
    if (pt[i].count != gt[i].count) throw DimensionMismatch("adam: tensor " + pt[i].name + " size");
    total += pt[i].count;
  }
  if (state.m.empty()) {
    state.m.assign(total, 0.0);
    state.v.assign(total, 0.0);
  }
  if (state.m.size() != total) throw DimensionMismatch("adam: state size differs from params");

  ++state.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  std::size_t off = 0;
  for (std::size_t i = 0; i < pt.size(); ++i) {
    double* p = pt[i].data;
    const double* g = gt[i].data;
    for (std::size_t k = 0; k < pt[i].count; ++k, ++off) {
      double& m = state.m[off];
      double& v = state.v[off];
      m = cfg.beta1 * m + (1.0 - cfg.beta1) * g[k];
      v = cfg.beta2 * v + (1.0 - cfg.beta2) * g[k] * g[k];
      const double m_hat = m / bc1;
      const double v_hat = v / bc2;
      p[k] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
      if (pt[i].nonnegative && p[k] < 0.0) p[k] = 0.0;
    }
  }
}

template void adam_step<ListaParams>(ListaParams&, ListaParams&, AdamState&, const AdamConfig&);
template void adam_step<SdlListaParams>(SdlListaParams&, SdlListaParams&, AdamState&, const AdamConfig&);

namespace {

constexpr std::string_view kCheckpointMagic = "NFCSCKPT";
constexpr std::uint32_t kCheckpointVersion = 1;
constexpr std::size_t kGradChunk = 128;

// Per-column scale ||y|| / sqrt(N_RF); 1 for an all-zero column.
Eigen::VectorXd column_scales(const CBatch& y) {
  Eigen::VectorXd s(y.cols());
  const double root = std::sqrt(static_cast<double>(y.rows()));
  for (Eigen::Index c = 0; c < y.cols(); ++c) {
    const double n = y.col(c).norm() / root;
    s[c] = n > 0.0 ? n : 1.0;
  }
  return s;
}

void divide_columns(CBatch& m, const Eigen::VectorXd& s) {
  for (Eigen::Index c = 0; c < m.cols(); ++c) m.col(c) /= s[c];
}

void multiply_columns(CBatch& m, const Eigen::VectorXd& s) {
  for (Eigen::Index c = 0; c < m.cols(); ++c) m.col(c) *= s[c];
}

const CMat& require_combiner(const ModelContext& ctx) {
  if (ctx.combiner == nullptr) throw ConfigError("unfolded model needs the combiner");
  return *ctx.combiner;
}

void add_into(ListaParams& acc, const ListaParams& g) {
  for (std::size_t l = 0; l < acc.va.size(); ++l) {
    acc.va[l] += g.va[l];
    acc.vb[l] += g.vb[l];
    acc.eta[l] += g.eta[l];
  }
}

void add_into(SdlListaParams& acc, const SdlListaParams& g) {
  acc.v += g.v;
  acc.va += g.va;
  for (std::size_t l = 0; l < acc.eta.size(); ++l) {
    acc.eta[l] += g.eta[l];
    acc.kappa[l] += g.kappa[l];
  }
}

double chunk_gradient(const ListaParams& p, const ModelContext&, const CBatch& y, const CBatch& target,
                      ListaParams& grad) {
  ListaTape tape;
  const CBatch out = lista_forward(p, y, &tape);
  const LossResult loss = l2_loss(out, target);
  grad = lista_backward(p, tape, loss.grad);
  return loss.value;
}

double chunk_gradient(const SdlListaParams& p, const ModelContext& ctx, const CBatch& y,
                      const CBatch& target, SdlListaParams& grad) {
  const CMat& w = require_combiner(ctx);
  SdlListaTape tape;
  const CBatch out = sdl_lista_forward(p, y, w, &tape);
  const LossResult loss = l2_loss(out, target);
  grad = sdl_lista_backward(p, tape, w, loss.grad);
  return loss.value;
}

double chunk_gradient_for(const auto& p, const ModelContext& ctx, const std::vector<Sample>& samples,
                          const std::vector<std::size_t>& idx, std::size_t begin, std::size_t end,
                          auto& grad) {
  const auto b = static_cast<Eigen::Index>(end - begin);
  const Sample& first = samples.at(idx[begin]);
  CBatch y(first.y.size(), b);
  CBatch target(first.label.size(), b);
  for (Eigen::Index c = 0; c < b; ++c) {
    const Sample& s = samples.at(idx[begin + c]);
    if (s.y.size() != y.rows() || s.label.size() != target.rows()) {
      throw DimensionMismatch("samples in one batch differ in shape");
    }
    y.col(c) = s.y;
    target.col(c) = s.label;
  }
  const Eigen::VectorXd scale = column_scales(y);
  divide_columns(y, scale);
  divide_columns(target, scale);
  return chunk_gradient(p, ctx, y, target, grad);
}

std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

}  // namespace

CBatch estimate_channels(const UnfoldedParams& params, const ModelContext& ctx, const CBatch& y) {
  const Eigen::VectorXd scale = column_scales(y);
  CBatch yn = y;
  divide_columns(yn, scale);
  CBatch h;
  if (const auto* lp = std::get_if<ListaParams>(&params)) {
    if (ctx.dictionary == nullptr) throw ConfigError("LISTA estimates need the dictionary");
    if (ctx.dictionary->size() != lp->atoms()) {
      throw DimensionMismatch("LISTA atoms do not match the dictionary size");
    }
    h = ctx.dictionary->atoms * lista_forward(*lp, yn);
  } else {
    h = sdl_lista_forward(std::get<SdlListaParams>(params), yn, require_combiner(ctx));
  }
  multiply_columns(h, scale);
  return h;
}

TestScore evaluate_test(const UnfoldedParams& params, const ModelContext& ctx,
                        const std::vector<Sample>& samples, int threads) {
  if (samples.empty()) throw ConfigError("test scores over an empty sample set");
  const std::size_t chunks = (samples.size() + kGradChunk - 1) / kGradChunk;
  std::vector<TestScore> parts(chunks);
  parallel_for(chunks, threads, [&](std::size_t k) {
    const std::size_t begin = k * kGradChunk;
    const std::size_t end = std::min(samples.size(), begin + kGradChunk);
    CBatch y(samples[begin].y.size(), static_cast<Eigen::Index>(end - begin));
    for (std::size_t i = begin; i < end; ++i) y.col(static_cast<Eigen::Index>(i - begin)) = samples[i].y;
    const Eigen::VectorXd scale = column_scales(y);
    const CBatch h = estimate_channels(params, ctx, y);
    TestScore acc;
    for (std::size_t i = begin; i < end; ++i) {
      const auto c = static_cast<Eigen::Index>(i - begin);
      const CVec& ref = samples[i].h_true;
      const double den = ref.squaredNorm();
      if (den == 0.0) throw ZeroReference("sample with an all-zero reference channel");
      const double err = (h.col(c) - ref).squaredNorm();
      acc.nmse += err / den;
      acc.loss += std::sqrt(err) / scale[c];
    }
    parts[k] = acc;
  });
  TestScore total;
  for (const auto& p : parts) {
    total.nmse += p.nmse;
    total.loss += p.loss;
  }
  total.nmse /= static_cast<double>(samples.size());
  total.loss /= static_cast<double>(samples.size());
  return total;
}

double evaluate_nmse(const UnfoldedParams& params, const ModelContext& ctx,
                     const std::vector<Sample>& samples, int threads) {
  return evaluate_test(params, ctx, samples, threads).nmse;
}

template <typename Params>
double batch_gradient(const Params& p, const ModelContext& ctx, const std::vector<Sample>& samples,
                      const std::vector<std::size_t>& idx, Params& grad, int threads) {
  grad = Params::zeros_like(p);
  if (idx.empty()) return 0.0;
  const std::size_t chunks = (idx.size() + kGradChunk - 1) / kGradChunk;
  double loss = 0.0;
  if (threads <= 1 || chunks == 1) {
    for (std::size_t k = 0; k < chunks; ++k) {
      Params g;
      loss += chunk_gradient_for(p, ctx, samples, idx, k * kGradChunk,
                                 std::min(idx.size(), (k + 1) * kGradChunk), g);
      add_into(grad, g);
    }
    return loss;
  }
  std::vector<Params> parts(chunks);
  std::vector<double> losses(chunks, 0.0);
  parallel_for(chunks, threads, [&](std::size_t k) {
    losses[k] = chunk_gradient_for(p, ctx, samples, idx, k * kGradChunk,
                                   std::min(idx.size(), (k + 1) * kGradChunk), parts[k]);
  });
  // Same summation order as the serial path.
  for (std::size_t k = 0; k < chunks; ++k) {
    loss += losses[k];
    add_into(grad, parts[k]);
  }
  return loss;
}

template double batch_gradient<ListaParams>(const ListaParams&, const ModelContext&,
                                            const std::vector<Sample>&, const std::vector<std::size_t>&,
                                            ListaParams&, int);
template double batch_gradient<SdlListaParams>(const SdlListaParams&, const ModelContext&,
                                               const std::vector<Sample>&,
                                               const std::vector<std::size_t>&, SdlListaParams&, int);

void TrainHistory::write_csv(std::ostream& out, bool include_wall) const {
  out << "epoch,train_loss,test_nmse_db,wall_seconds\n";
  for (const auto& e : epochs) {
    out << e.epoch << ',' << format_double(e.train_loss) << ',' << format_double(e.test_nmse_db) << ',';
    if (include_wall) {
      out << std::fixed << std::setprecision(3) << e.wall_seconds << std::defaultfloat;
    } else {
      out << 0;
    }
    out << "\n";
  }
}

TrainResult train(UnfoldedParams init, const Dataset& train_set, const std::vector<Sample>& test_set,
                  const TrainConfig& cfg, const std::function<void(const EpochRecord&)>& on_epoch) {
  if (train_set.samples.empty()) throw ConfigError("empty training set");
  if (cfg.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (cfg.max_epochs < 0) throw ConfigError("max_epochs must be >= 0");
  if (train_set.kind != dataset_kind_for(kind_of(init))) {
    throw ConfigError(std::string("a ") + to_string(kind_of(init)) + " model cannot train on a " +
                      to_string(train_set.kind) + " dataset");
  }
  const ModelContext ctx{train_set.combiner ? &train_set.combiner->w : nullptr,
                         train_set.dictionary.get()};

  TrainResult result;
  result.params = init;
  const TestScore initial = evaluate_test(init, ctx, test_set, cfg.threads);
  result.history.initial_test_nmse_db = 10.0 * std::log10(initial.nmse);
  result.history.initial_test_loss = initial.loss;
  result.history.best_test_nmse_db = result.history.initial_test_nmse_db;
  result.history.best_test_loss = initial.loss;
  result.history.best_epoch = 0;

  UnfoldedParams current = std::move(init);
  Rng shuffle_rng(cfg.seed);
  std::vector<std::size_t> order(train_set.samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  int stale = 0;
  const auto start = std::chrono::steady_clock::now();

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[shuffle_rng.uniform_index(i)]);
    }
    AdamConfig adam = cfg.adam;
    if (cfg.schedule == LrSchedule::kCosine) {
      adam.learning_rate *= 0.5 * (1.0 + std::cos(kPi * (epoch - 1) / cfg.max_epochs));
    }
    double loss_sum = 0.0;
    for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(cfg.batch_size)) {
      const std::vector<std::size_t> idx(
          order.begin() + static_cast<std::ptrdiff_t>(b),
          order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), b + cfg.batch_size)));
      std::visit(
          [&](auto& p) {
            using P = std::decay_t<decltype(p)>;
            P grad;
            loss_sum += batch_gradient(p, ctx, train_set.samples, idx, grad, cfg.threads);
            // Mean over the batch.
            const double inv = 1.0 / static_cast<double>(idx.size());
            for (auto& t : grad.tensors()) {
              for (std::size_t k = 0; k < t.count; ++k) t.data[k] *= inv;
            }
            adam_step(p, grad, result.adam, adam);
          },
          current);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(order.size());
    const TestScore score = evaluate_test(current, ctx, test_set, cfg.threads);
    rec.test_nmse_db = 10.0 * std::log10(score.nmse);
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!std::isfinite(rec.train_loss) || !std::isfinite(rec.test_nmse_db)) {
      throw NonConvergence("training diverged at epoch " + std::to_string(epoch));
    }
    result.history.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);

    if (score.loss < result.history.best_test_loss) {
      result.history.best_test_loss = score.loss;
      result.history.best_test_nmse_db = rec.test_nmse_db;
      result.history.best_epoch = epoch;
      result.params = current;
      stale = 0;
    } else if (cfg.patience > 0 && ++stale >= cfg.patience) {
      break;
    }
  }
  return result;
}

void save_checkpoint(const UnfoldedParams& params, const AdamState& adam, const std::string& path) {
  using namespace binio;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw MissingArtifact("cannot write " + path);
  put_magic(out, kCheckpointMagic);
  put_u32(out, kCheckpointVersion);
  put_u8(out, static_cast<std::uint8_t>(kind_of(params)));
  put_u32(out, static_cast<std::uint32_t>(layers_of(params)));
  if (const auto* lp = std::get_if<ListaParams>(&params)) {
    put_u32(out, static_cast<std::uint32_t>(lp->atoms()));
    put_u32(out, static_cast<std::uint32_t>(lp->n_rf()));
  } else {
    const auto& sp = std::get<SdlListaParams>(params);
    put_u32(out, static_cast<std::uint32_t>(sp.n_antennas()));
    put_u32(out, static_cast<std::uint32_t>(sp.n_rf()));
    put_u32(out, static_cast<std::uint32_t>(sp.atoms()));
  }
  UnfoldedParams copy = params;
  std::size_t total = 0;
  for (const auto& t : tensors_of(copy)) {
    for (std::size_t k = 0; k < t.count; ++k) put_f64(out, t.data[k]);
    total += t.count;
  }
  put_u64(out, adam.step);
  const bool has_moments = adam.m.size() == total && adam.v.size() == total;
  put_u8(out, has_moments ? 1 : 0);
  if (has_moments) {
    for (double m : adam.m) put_f64(out, m);
    for (double v : adam.v) put_f64(out, v);
  }
  if (!out) throw MissingArtifact("failed writing " + path);
}

UnfoldedParams load_checkpoint(const std::string& path, AdamState* adam) {
  using namespace binio;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingCheckpoint("cannot open " + path);
  expect_magic(in, kCheckpointMagic);
  const std::uint32_t version = get_u32(in);
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  const std::uint8_t kind = get_u8(in);
  const std::uint32_t layers = get_u32(in);
  if (layers < 1 || layers > 4096) throw FormatError("implausible layer count in " + path);
  UnfoldedParams params;
  if (kind == static_cast<std::uint8_t>(ModelKind::kLista)) {
    const std::uint32_t g = get_u32(in);
    const std::uint32_t n_rf = get_u32(in);
    ListaParams p;
    p.va.assign(layers, CMat(g, g));
    p.vb.assign(layers, CMat(g, n_rf));
    p.eta.assign(layers, 0.0);
    params = std::move(p);
  } else if (kind == static_cast<std::uint8_t>(ModelKind::kSdlLista)) {
    const std::uint32_t n = get_u32(in);
    const std::uint32_t n_rf = get_u32(in);
    const std::uint32_t g = get_u32(in);
    SdlListaParams p;
    p.v.resize(n, n_rf);
    p.va.resize(g, n);
    p.eta.assign(layers, 0.0);
    p.kappa.assign(layers, 0.0);
    params = std::move(p);
  } else {
    throw FormatError("unknown model kind " + std::to_string(kind) + " in " + path);
  }
  std::size_t total = 0;
  for (const auto& t : tensors_of(params)) {
    for (std::size_t k = 0; k < t.count; ++k) t.data[k] = get_f64(in);
    total += t.count;
  }
  AdamState state;
  state.step = get_u64(in);
  if (get_u8(in) != 0) {
    state.m.resize(total);
    state.v.resize(total);
    for (double& m : state.m) m = get_f64(in);
    for (double& v : state.v) v = get_f64(in);
  }
  if (adam != nullptr) *adam = std::move(state);
  return params;
}

}  // namespace nfcs
