#include <doctest.h>

#include "gradcheck.hpp"

using namespace cftc;
using gradcheck::Instance;
using gradcheck::Term;

TEST_CASE("analytic gradients match central differences for every term") {
  for (std::uint64_t seed : {11ull, 22ull}) {
    Instance inst = gradcheck::make_instance(seed);
    for (Term term :
         {Term::text, Term::fused, Term::counterfactual, Term::debiased}) {
      auto result = gradcheck::check_term(inst, term);
      INFO("seed ", seed, " term ", gradcheck::term_name(term), " worst ",
           result.worst);
      CHECK(result.routing_ok);
      CHECK(result.entries_checked > 0);
      CHECK(result.max_rel_error < 1e-4);
    }
  }
}

TEST_CASE("zero text weight yields exactly-zero encoder gradients") {
  Instance inst = gradcheck::make_instance(7);
  NetworkParameters grads = NetworkParameters::zeros(inst.params.dims);
  Rng rng(inst.noise_seed);
  auto ptrs = inst.ptrs();
  batch_gradients(ptrs, inst.params, inst.adjacency, inst.cfg, inst.mu,
                  LossWeights{0.0, 0.5, 0.5, 1.0}, rng, grads);
  bool decoder_nonzero = false;
  for (const auto& view : tensor_views(grads)) {
    if (view.group == ParamGroup::encoder) {
      for (Index i = 0; i < view.size(); ++i) CHECK(view.data[i] == 0.0);
    } else {
      for (Index i = 0; i < view.size(); ++i) {
        if (view.data[i] != 0.0) decoder_nonzero = true;
      }
    }
  }
  CHECK(decoder_nonzero);
}

TEST_CASE("zero decoder weights yield exactly-zero decoder gradients") {
  Instance inst = gradcheck::make_instance(13);
  NetworkParameters grads = NetworkParameters::zeros(inst.params.dims);
  Rng rng(inst.noise_seed);
  auto ptrs = inst.ptrs();
  batch_gradients(ptrs, inst.params, inst.adjacency, inst.cfg, inst.mu,
                  LossWeights{1.0, 0.0, 0.0, 0.0}, rng, grads);
  bool encoder_nonzero = false;
  for (const auto& view : tensor_views(grads)) {
    if (view.group == ParamGroup::decoder) {
      for (Index i = 0; i < view.size(); ++i) CHECK(view.data[i] == 0.0);
    } else {
      for (Index i = 0; i < view.size(); ++i) {
        if (view.data[i] != 0.0) encoder_nonzero = true;
      }
    }
  }
  CHECK(encoder_nonzero);
}

TEST_CASE("the recurrent cell alone passes a direct difference check") {
  // Isolates the encoder backward path with gradients injected at every step.
  Rng rng(31);
  const Index in_dim = 4, hidden = 5, batch = 3, steps = 6;
  LstmParams cell;
  cell.W = Mat::Random(4 * hidden, in_dim) * 0.4;
  cell.U = Mat::Random(4 * hidden, hidden) * 0.4;
  cell.b = Vec::Random(4 * hidden) * 0.1;

  std::vector<Mat> inputs(steps);
  std::vector<Mat> dh(steps);
  for (auto& x : inputs) x = Mat::Random(in_dim, batch);
  for (auto& g : dh) g = Mat::Random(hidden, batch);

  auto objective = [&](const LstmParams& p) {
    auto states = lstm_forward(p, inputs, nullptr);
    Scalar acc = 0.0;
    for (Index t = 0; t < steps; ++t) {
      acc += (states[static_cast<std::size_t>(t)].array() *
              dh[static_cast<std::size_t>(t)].array())
                 .sum();
    }
    return acc;
  };

  LstmCache cache;
  lstm_forward(cell, inputs, &cache);
  LstmParams grads;
  grads.W = Mat::Zero(4 * hidden, in_dim);
  grads.U = Mat::Zero(4 * hidden, hidden);
  grads.b = Vec::Zero(4 * hidden);
  auto dx = lstm_backward(cell, cache, dh, grads);

  const Scalar h = 1e-6;
  auto check_block = [&](Mat& target, const Mat& grad) {
    for (Index i = 0; i < std::min<Index>(target.size(), 40); ++i) {
      Scalar* cell_ptr = target.data() + i;
      const Scalar saved = *cell_ptr;
      *cell_ptr = saved + h;
      const Scalar up = objective(cell);
      *cell_ptr = saved - h;
      const Scalar down = objective(cell);
      *cell_ptr = saved;
      const Scalar fd = (up - down) / (2.0 * h);
      CHECK(std::abs(fd - grad.data()[i]) <
            1e-5 * std::max(1.0, std::abs(fd)));
    }
  };
  check_block(cell.W, grads.W);
  check_block(cell.U, grads.U);
  for (Index i = 0; i < cell.b.size(); i += 3) {
    const Scalar saved = cell.b[i];
    cell.b[i] = saved + h;
    const Scalar up = objective(cell);
    cell.b[i] = saved - h;
    const Scalar down = objective(cell);
    cell.b[i] = saved;
    const Scalar fd = (up - down) / (2.0 * h);
    CHECK(std::abs(fd - grads.b[i]) < 1e-5 * std::max(1.0, std::abs(fd)));
  }

  // Input gradients.
  for (Index t = 0; t < steps; t += 2) {
    auto& x = inputs[static_cast<std::size_t>(t)];
    for (Index i = 0; i < std::min<Index>(x.size(), 8); ++i) {
      const Scalar saved = x.data()[i];
      x.data()[i] = saved + h;
      const Scalar up = objective(cell);
      x.data()[i] = saved - h;
      const Scalar down = objective(cell);
      x.data()[i] = saved;
      const Scalar fd = (up - down) / (2.0 * h);
      CHECK(std::abs(fd - dx[static_cast<std::size_t>(t)].data()[i]) <
            1e-5 * std::max(1.0, std::abs(fd)));
    }
  }
}
