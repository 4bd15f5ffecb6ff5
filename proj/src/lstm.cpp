#include "cftc/lstm.hpp"

#include "cftc/errors.hpp"
#include "cftc/nnmath.hpp"

namespace cftc {

std::vector<Mat> lstm_forward(const LstmParams& params,
                              const std::vector<Mat>& inputs, LstmCache* cache) {
  const Index four_h = params.W.rows();
  const Index hidden = four_h / 4;
  const std::size_t steps = inputs.size();
  if (steps == 0) throw ContractViolation("lstm_forward on empty sequence");
  const Index batch = inputs[0].cols();

  if (cache != nullptr) {
    cache->x.resize(steps);
    cache->gates.resize(steps);
    cache->c.resize(steps);
    cache->h.resize(steps);
  }

  Mat h = Mat::Zero(hidden, batch);
  Mat c = Mat::Zero(hidden, batch);
  std::vector<Mat> states(steps);
  Mat a(four_h, batch);
  for (std::size_t t = 0; t < steps; ++t) {
    a.noalias() = params.W * inputs[t];
    a.noalias() += params.U * h;
    a.colwise() += params.b;

    auto ai = a.topRows(hidden);
    auto af = a.middleRows(hidden, hidden);
    auto ag = a.middleRows(2 * hidden, hidden);
    auto ao = a.bottomRows(hidden);
    Mat gates(four_h, batch);
    gates.topRows(hidden) = sigmoid(ai);
    gates.middleRows(hidden, hidden) = sigmoid(af);
    gates.middleRows(2 * hidden, hidden) = ag.array().tanh();
    gates.bottomRows(hidden) = sigmoid(ao);

    Mat c_next = gates.middleRows(hidden, hidden).cwiseProduct(c) +
                 gates.topRows(hidden).cwiseProduct(gates.middleRows(2 * hidden, hidden));
    Mat h_next = gates.bottomRows(hidden).cwiseProduct(c_next.array().tanh().matrix());

    if (cache != nullptr) {
      cache->x[t] = inputs[t];
      cache->gates[t] = gates;
      cache->c[t] = c_next;
      cache->h[t] = h_next;
    }
    c = std::move(c_next);
    h = h_next;
    states[t] = std::move(h_next);
  }
  return states;
}

std::vector<Mat> lstm_backward(const LstmParams& params, const LstmCache& cache,
                               const std::vector<Mat>& dh_out, LstmParams& grads) {
  const Index four_h = params.W.rows();
  const Index hidden = four_h / 4;
  const std::size_t steps = cache.gates.size();
  if (dh_out.size() != steps) {
    throw ContractViolation("lstm_backward: gradient/step count mismatch");
  }
  const Index batch = cache.gates[0].cols();

  Mat dh = Mat::Zero(hidden, batch);
  Mat dc = Mat::Zero(hidden, batch);
  Mat da(four_h, batch);
  std::vector<Mat> dx(steps);
  for (std::size_t t = steps; t-- > 0;) {
    dh += dh_out[t];

    const Mat& gates = cache.gates[t];
    auto gi = gates.topRows(hidden);
    auto gf = gates.middleRows(hidden, hidden);
    auto gg = gates.middleRows(2 * hidden, hidden);
    auto go = gates.bottomRows(hidden);
    const Mat& c_t = cache.c[t];
    const Mat c_prev = t > 0 ? cache.c[t - 1] : Mat::Zero(hidden, batch);
    const Mat h_prev = t > 0 ? cache.h[t - 1] : Mat::Zero(hidden, batch);

    Mat tanh_c = c_t.array().tanh();
    dc.array() += dh.array() * go.array() * (1.0 - tanh_c.array().square());

    // d(pre-activation) per gate block.
    da.topRows(hidden).array() =
        dc.array() * gg.array() * gi.array() * (1.0 - gi.array());
    da.middleRows(hidden, hidden).array() =
        dc.array() * c_prev.array() * gf.array() * (1.0 - gf.array());
    da.middleRows(2 * hidden, hidden).array() =
        dc.array() * gi.array() * (1.0 - gg.array().square());
    da.bottomRows(hidden).array() =
        dh.array() * tanh_c.array() * go.array() * (1.0 - go.array());

    grads.W.noalias() += da * cache.x[t].transpose();
    grads.U.noalias() += da * h_prev.transpose();
    grads.b += da.rowwise().sum();

    dx[t].noalias() = params.W.transpose() * da;
    dh.noalias() = params.U.transpose() * da;
    dc = dc.cwiseProduct(gf);
  }
  return dx;
}

}  // namespace cftc
