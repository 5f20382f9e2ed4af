#include "isac/radar_receiver.hpp"

#include <array>
#include <string>

namespace isac {

using ad::Activation;

DetectorParams DetectorParams::make(const SystemConfig& cfg, Rng& rng) {
  const int N = cfg.N;
  const int Nr = cfg.Nr;
  return {Mlp::make("detector", {2 * N * Nr + 2, N * Nr, N, Nr, 1},
                    {Activation::Relu, Activation::Relu, Activation::Relu, Activation::Sigmoid}, rng)};
}

LstmParams LstmParams::make(const SystemConfig& cfg, Rng& rng) {
  const int H = cfg.hidden;
  const int in = cfg.N + H;
  LstmParams p;
  p.Wi = ad::leaf(glorot_uniform(H, in, rng), "lstm.Wi");
  p.Wf = ad::leaf(glorot_uniform(H, in, rng), "lstm.Wf");
  p.Wo = ad::leaf(glorot_uniform(H, in, rng), "lstm.Wo");
  p.Wg = ad::leaf(glorot_uniform(H, in, rng), "lstm.Wg");
  p.bi = ad::leaf(Grid::Zero(H, 1), "lstm.bi");
  p.bf = ad::leaf(Grid::Zero(H, 1), "lstm.bf");
  p.bo = ad::leaf(Grid::Zero(H, 1), "lstm.bo");
  p.bg = ad::leaf(Grid::Zero(H, 1), "lstm.bg");
  p.head = {ad::leaf(glorot_uniform(1, H, rng), "lstm.head.W"), ad::leaf(Grid::Zero(1, 1), "lstm.head.b"),
            Activation::Linear};
  return p;
}

std::vector<ad::NodePtr> LstmParams::params() const {
  return {Wi, bi, Wf, bf, Wo, bo, Wg, bg, head.W, head.b};
}

MlpEstimatorParams MlpEstimatorParams::make(const SystemConfig& cfg, Rng& rng) {
  const int N = cfg.N;
  const int Nr = cfg.Nr;
  return {Mlp::make("mlp_estimator", {2 * N * Nr, N * Nr, N, Nr, 1},
                    {Activation::Relu, Activation::Relu, Activation::Relu, Activation::Tanh}, rng)};
}

namespace {

void check_echo(const char* who, const CTensor& Y, int Nr, int N) {
  if (Y.rows() != Nr || Y.cols() != N)
    throw DimensionError(std::string(who) + ": echo is " + std::to_string(Y.rows()) + "x" +
                         std::to_string(Y.cols()) + ", expected " + std::to_string(Nr) + "x" + std::to_string(N));
}

void check_batched_echo(const char* who, const CNode& Y, int Nr, int N) {
  if (Y.re->rows() != Nr || Y.re->cols() % N != 0)
    throw DimensionError(std::string(who) + ": batched echo is " + std::to_string(Y.re->rows()) + "x" +
                         std::to_string(Y.re->cols()) + ", expected " + std::to_string(Nr) + " rows and a multiple of " +
                         std::to_string(N) + " columns");
}

// Row-major flattening of every Nr x N block: output row i*N + n of column b reads Y(i, b*N + n).
std::vector<Index> flatten_indices(int Nr, int N, Index B) {
  std::vector<Index> src(static_cast<std::size_t>(Nr * N * B));
  std::size_t k = 0;
  for (Index b = 0; b < B; ++b)
    for (int i = 0; i < Nr; ++i)
      for (int n = 0; n < N; ++n) src[k++] = (b * N + n) * Nr + i;
  return src;
}

}  // namespace

Eigen::VectorXd detector_input(const CTensor& Y, const AngleInterval& theta, int Nr, int N) {
  check_echo("detector_input", Y, Nr, N);
  return detector_input(CNode::constant(Y), theta, Nr, N)->value.col(0);
}

ad::NodePtr flatten_echo(const CNode& Y, int Nr, int N) {
  check_batched_echo("flatten_echo", Y, Nr, N);
  const Index B = Y.re->cols() / N;
  const std::array<ad::NodePtr, 2> parts{ad::gather(Y.re, Nr * N, B, flatten_indices(Nr, N, B)),
                                         ad::gather(Y.im, Nr * N, B, flatten_indices(Nr, N, B))};
  return ad::concat_rows(parts);
}

ad::NodePtr detector_input(const CNode& Y, const AngleInterval& theta, int Nr, int N) {
  const auto flat = flatten_echo(Y, Nr, N);
  Grid pri(2, flat->cols());
  pri.row(0).setConstant(theta.lo / 90.0);
  pri.row(1).setConstant(theta.hi / 90.0);
  const std::array<ad::NodePtr, 2> parts{flat, ad::constant(std::move(pri))};
  return ad::concat_rows(parts);
}

ad::NodePtr detector_probability(const ad::NodePtr& input, const DetectorParams& params) {
  return params.net.forward(input);
}

bool threshold(double q, double q_bar) { return q >= q_bar; }

Detection detect(const Eigen::VectorXd& v, const DetectorParams& params, double q_bar) {
  const double q = detector_probability(ad::constant(v), params)->value(0, 0);
  return {q, threshold(q, q_bar)};
}

Grid estimator_input(const CTensor& Y) {
  Grid seq(2 * Y.rows(), Y.cols());
  seq.topRows(Y.rows()) = Y.re;
  seq.bottomRows(Y.rows()) = Y.im;
  return seq;
}

CTensor echo_from_sequence(const Grid& seq) {
  if (seq.rows() % 2 != 0) throw DimensionError("echo_from_sequence: odd number of steps");
  const Index Nr = seq.rows() / 2;
  return {seq.topRows(Nr), seq.bottomRows(Nr)};
}

LstmState lstm_cell(const ad::NodePtr& x_t, const LstmState& state, const LstmParams& p) {
  const Index H = p.hidden();
  if (x_t->rows() != p.input_width())
    throw DimensionError("lstm_cell: input width " + std::to_string(x_t->rows()) + " != " +
                         std::to_string(p.input_width()));
  if (state.h->rows() != H || state.c->rows() != H || state.h->cols() != x_t->cols() ||
      state.c->cols() != x_t->cols())
    throw DimensionError("lstm_cell: state shape does not match hidden width " + std::to_string(H) +
                         " and batch " + std::to_string(x_t->cols()));
  using namespace ad;
  const std::array<NodePtr, 2> xh_parts{x_t, state.h};
  const auto xh = concat_rows(xh_parts);
  const auto i = activation(Activation::Sigmoid, linear(p.Wi, p.bi, xh));
  const auto f = activation(Activation::Sigmoid, linear(p.Wf, p.bf, xh));
  const auto o = activation(Activation::Sigmoid, linear(p.Wo, p.bo, xh));
  const auto g = activation(Activation::Tanh, linear(p.Wg, p.bg, xh));
  const auto c = add(mul(f, state.c), mul(i, g));
  const auto h = mul(o, activation(Activation::Tanh, c));
  return {h, c};
}

ad::NodePtr estimate_angle(const CNode& Y, int Nr, int N, const LstmParams& params, double scale_deg) {
  check_batched_echo("estimate_angle", Y, Nr, N);
  if (params.input_width() != N)
    throw DimensionError("estimate_angle: LSTM input width " + std::to_string(params.input_width()) +
                         " != N=" + std::to_string(N));
  const Index B = Y.re->cols() / N;
  const Index H = params.hidden();
  LstmState st{ad::constant(Grid::Zero(H, B)), ad::constant(Grid::Zero(H, B))};
  for (int step = 0; step < 2 * Nr; ++step) {
    const int antenna = step % Nr;
    const auto& part = step < Nr ? Y.re : Y.im;
    std::vector<Index> src(static_cast<std::size_t>(N * B));
    std::size_t k = 0;
    for (Index b = 0; b < B; ++b)
      for (int n = 0; n < N; ++n) src[k++] = (b * N + n) * Nr + antenna;
    st = lstm_cell(ad::gather(part, N, B, std::move(src)), st, params);
  }
  const auto z = ad::linear(params.head.W, params.head.b, st.h);
  return ad::scale(ad::activation(Activation::Tanh, z), scale_deg);
}

double estimate_angle(const Grid& seq, const LstmParams& params, double scale_deg) {
  const CTensor Y = echo_from_sequence(seq);
  return estimate_angle(CNode::constant(Y), static_cast<int>(Y.rows()), static_cast<int>(Y.cols()), params,
                        scale_deg)
      ->value(0, 0);
}

ad::NodePtr mlp_estimate_angle(const ad::NodePtr& flat, const MlpEstimatorParams& params, double scale_deg) {
  return ad::scale(params.net.forward(flat), scale_deg);
}

double mlp_estimate_angle(const Eigen::VectorXd& flat, const MlpEstimatorParams& params, double scale_deg) {
  return mlp_estimate_angle(ad::constant(flat), params, scale_deg)->value(0, 0);
}

}  // namespace isac
