#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

#include "nfcs/classic_solvers.hpp"
#include "nfcs/measurement.hpp"
#include "nfcs/numerics.hpp"

namespace nfcs {

// Batches are column-major N x B: one sample per column.
using CBatch = Eigen::MatrixXcd;

enum class ModelKind : std::uint8_t { kLista = 0, kSdlLista = 1 };

const char* to_string(ModelKind kind);
ModelKind parse_model_kind(const std::string& name);
DatasetKind dataset_kind_for(ModelKind kind);

// View of one learnable tensor as a flat run of doubles. Complex entries are
// stored (re, im) interleaved, which is how Adam and the checkpoint see them.
struct TensorView {
  std::string name;
  double* data = nullptr;
  std::size_t count = 0;
  bool nonnegative = false;  // clamp after optimizer steps (thresholds)
};

// alpha^{l+1} = soft(V_a^l alpha^l + V_b^l y, eta^l), alpha^0 = 0.
struct ListaParams {
  std::vector<CMat> va;  // G x G
  std::vector<CMat> vb;  // G x N_RF
  std::vector<double> eta;

  int layers() const { return static_cast<int>(eta.size()); }
  int atoms() const { return va.empty() ? 0 : static_cast<int>(va.front().rows()); }
  int n_rf() const { return vb.empty() ? 0 : static_cast<int>(vb.front().cols()); }
  std::vector<TensorView> tensors();
  static ListaParams zeros_like(const ListaParams& other);
};

// h^{l+1} = V_A^H soft(V_A (h^l - kappa^l V (W h^l - y)), eta^l), h^0 = 0.
// V is shared by all layers; V_A is G' x N.
struct SdlListaParams {
  CMat v;   // N x N_RF
  CMat va;  // G' x N
  std::vector<double> eta;
  std::vector<double> kappa;

  int layers() const { return static_cast<int>(eta.size()); }
  int atoms() const { return static_cast<int>(va.rows()); }
  int n_antennas() const { return static_cast<int>(v.rows()); }
  int n_rf() const { return static_cast<int>(v.cols()); }
  std::vector<TensorView> tensors();
  static SdlListaParams zeros_like(const SdlListaParams& other);
};

using UnfoldedParams = std::variant<ListaParams, SdlListaParams>;

std::vector<TensorView> tensors_of(UnfoldedParams& params);
ModelKind kind_of(const UnfoldedParams& params);
int layers_of(const UnfoldedParams& params);

// Forward intermediates, enough to replay the reverse pass.
struct ListaTape {
  int layers = 0;
  int atoms = 0;
  CBatch y;
  std::vector<CBatch> inputs;  // alpha^l, l = 0..L-1
  std::vector<CBatch> pre;     // V_a alpha^l + V_b y
};

struct SdlListaTape {
  int layers = 0;
  int atoms = 0;
  CBatch y;
  std::vector<CBatch> h;    // h^l, l = 0..L-1
  std::vector<CBatch> r;    // W h^l - y
  std::vector<CBatch> u;    // h^l - kappa V r
  std::vector<CBatch> pre;  // V_A u
  std::vector<CBatch> act;  // soft(pre)
};

CBatch lista_forward(const ListaParams& p, const CBatch& y, ListaTape* tape = nullptr);
CVec lista_forward(const ListaParams& p, const CVec& y);

CBatch sdl_lista_forward(const SdlListaParams& p, const CBatch& y, const CMat& w,
                         SdlListaTape* tape = nullptr);
CVec sdl_lista_forward(const SdlListaParams& p, const CVec& y, const CMat& w);

// Sum over columns of ||out - target||_2 and its gradient w.r.t. out. The
// subgradient at a zero residual is 0.
struct LossResult {
  double value = 0.0;
  CBatch grad;
};
LossResult l2_loss(const CBatch& out, const CBatch& target);

double loss_lista(const ListaParams& p, const CBatch& y, const CBatch& alpha_star);
double loss_sdl(const SdlListaParams& p, const CBatch& y, const CBatch& h_star, const CMat& w);

// Reverse pass. Complex gradients follow dL/dRe + j dL/dIm (twice the
// Wirtinger derivative dL/dconj(z)), i.e. the steepest-ascent direction in
// the (re, im) plane. The shrinkage subgradient at |z| = eta is 0.
ListaParams lista_backward(const ListaParams& p, const ListaTape& tape, const CBatch& out_grad);
SdlListaParams sdl_lista_backward(const SdlListaParams& p, const SdlListaTape& tape, const CMat& w,
                                  const CBatch& out_grad);

// Soft threshold and its reverse pass, exposed for tests.
CBatch soft_threshold_batch(const CBatch& z, double eta);
// Returns dL/dz given dL/d(out); accumulates dL/deta into *eta_grad.
CBatch soft_threshold_backward(const CBatch& z, double eta, const CBatch& out_grad, double* eta_grad);

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::uint64_t step = 0;
  std::vector<double> m;
  std::vector<double> v;
};

// One Adam update over every tensor of params, component-wise on (re, im).
// Thresholds are clamped to >= 0 afterwards.
template <typename Params>
void adam_step(Params& params, Params& grads, AdamState& state, const AdamConfig& cfg);

enum class InitScheme {
  kLiteral,   // U(0,1) re/im entries, unscaled
  kScaled,    // U(0,1) re/im entries times 1/sqrt(fan_in)
  kCentered,  // U(-1/2,1/2) re/im entries times 1/sqrt(fan_in)
  kModel,     // LISTA: ISTA weights; SDL-LISTA: gradient-step V and a tight-frame V_A
};

InitScheme parse_init_scheme(const std::string& name);
const char* to_string(InitScheme scheme);

struct ModelDims {
  int n_antennas = 0;
  int n_rf = 0;
  int atoms = 0;  // G for LISTA, G' for SDL-LISTA
  int layers = 1;
};

inline constexpr double kInitialThreshold = 1e-4;

// The model scheme needs the sensing operator (LISTA) or the array and
// combiner (SDL-LISTA); the random schemes ignore them.
struct InitContext {
  const SensingOperator* op = nullptr;
  const ArrayConfig* array = nullptr;
  const CMat* combiner = nullptr;
};

UnfoldedParams init_params(ModelKind kind, const ModelDims& dims, InitScheme scheme, Rng& rng,
                           const InitContext& ctx = {});

// LISTA weights that reproduce ISTA on op with threshold eta.
ListaParams lista_from_ista(const SensingOperator& op, double eta, int layers);

enum class LrSchedule : std::uint8_t {
  kConstant,
  kCosine,  // lr * (1 + cos(pi (epoch - 1) / max_epochs)) / 2
};

LrSchedule parse_lr_schedule(const std::string& name);
const char* to_string(LrSchedule schedule);

struct TrainConfig {
  AdamConfig adam;
  LrSchedule schedule = LrSchedule::kConstant;
  int batch_size = 256;
  int max_epochs = 200;
  int patience = 10;  // epochs without test improvement; 0 disables
  InitScheme init = InitScheme::kModel;
  std::uint64_t seed = 0;
  int threads = 1;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;    // mean per-sample loss over the epoch
  double test_nmse_db = 0.0;
  double wall_seconds = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  // Selection and patience follow the test loss.
  int best_epoch = 0;  // 0 = initial parameters
  double best_test_loss = 0.0;
  double best_test_nmse_db = 0.0;  // at best_epoch
  double initial_test_loss = 0.0;
  double initial_test_nmse_db = 0.0;

  // With include_wall false every wall_seconds entry is written as 0 so
  // reruns compare byte-for-byte.
  void write_csv(std::ostream& out, bool include_wall = true) const;
};

struct TrainResult {
  UnfoldedParams params;
  TrainHistory history;
  AdamState adam;
};

// Everything an unfolded estimator needs besides its parameters.
struct ModelContext {
  const CMat* combiner = nullptr;
  const Dictionary* dictionary = nullptr;
};

// Channel estimates for a batch of raw observations. Each column of y is
// scaled to unit mean power per RF chain before the network and the output
// is scaled back.
CBatch estimate_channels(const UnfoldedParams& params, const ModelContext& ctx, const CBatch& y);

struct TestScore {
  double nmse = 0.0;  // mean linear NMSE against h_true
  double loss = 0.0;  // mean ||h_hat - h_true||_2 / s, s the per-sample input scale
};

// Channel-domain scores on scored samples. For SDL-LISTA the loss is the
// training loss; LISTA is scored through its dictionary.
TestScore evaluate_test(const UnfoldedParams& params, const ModelContext& ctx,
                        const std::vector<Sample>& samples, int threads = 1);
double evaluate_nmse(const UnfoldedParams& params, const ModelContext& ctx,
                     const std::vector<Sample>& samples, int threads = 1);

// Sum of per-sample losses and gradients over samples[idx...] on normalized
// data; reduction order is fixed so the result does not depend on threads.
template <typename Params>
double batch_gradient(const Params& p, const ModelContext& ctx, const std::vector<Sample>& samples,
                      const std::vector<std::size_t>& idx, Params& grad, int threads);

// Algorithm: epochs of seeded shuffles, Adam on each batch, test NMSE after
// every epoch; returns the parameters with the best test NMSE.
TrainResult train(UnfoldedParams init, const Dataset& train_set, const std::vector<Sample>& test_set,
                  const TrainConfig& cfg,
                  const std::function<void(const EpochRecord&)>& on_epoch = {});

// Checkpoint file ("NFCSCKPT").
void save_checkpoint(const UnfoldedParams& params, const AdamState& adam, const std::string& path);
UnfoldedParams load_checkpoint(const std::string& path, AdamState* adam = nullptr);

}  // namespace nfcs
