#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "moemo/autodiff.hpp"
#include "moemo/motion.hpp"
#include "moemo/rng.hpp"
#include "moemo/tensor.hpp"

namespace moemo::test {

inline Tensor random_tensor(Rng& rng, Shape shape, double scale = 1.0, bool requires_grad = false) {
  std::vector<double> v(shape_size(shape));
  for (auto& x : v) x = scale * rng.normal();
  return Tensor(std::move(shape), std::move(v), requires_grad);
}

inline PersonTrack random_track(Rng& rng, std::size_t frames, int person_id = 0) {
  PersonTrack t;
  t.person_id = person_id;
  t.frames = frames;
  t.joints.resize(frames * kJoints * kCoords);
  for (auto& x : t.joints) x = rng.uniform(-2.0, 2.0);
  return t;
}

/// ||a - b|| / max(||a||, ||b||), or 0 when both are (numerically) zero.
inline double relative_error(std::span<const double> a, std::span<const double> b) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double denom = std::sqrt(std::max(na, nb));
  return denom < 1e-12 ? std::sqrt(diff) : std::sqrt(diff) / denom;
}

using ScalarFn = std::function<ad::Var(ad::Tape&, const std::vector<ad::Var>&)>;

/// Worst relative error between tape gradients and central differences, over all inputs.
inline double gradcheck(const ScalarFn& f, const std::vector<Tensor>& inputs, double h = 1e-6) {
  ad::Tape tape;
  std::vector<ad::Var> vars;
  for (const auto& t : inputs) vars.push_back(tape.leaf(t.with_requires_grad(true)));
  ad::Var loss = f(tape, vars);
  tape.backward(loss);

  auto eval = [&](std::size_t which, std::size_t idx, double delta) {
    ad::Tape t2;
    std::vector<ad::Var> vs;
    for (std::size_t k = 0; k < inputs.size(); ++k) {
      if (k != which) {
        vs.push_back(t2.constant(inputs[k]));
        continue;
      }
      std::vector<double> d(inputs[k].data().begin(), inputs[k].data().end());
      d[idx] += delta;
      vs.push_back(t2.constant(Tensor(inputs[k].shape(), std::move(d))));
    }
    return f(t2, vs).value().item();
  };

  double worst = 0.0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const Tensor analytic = tape.grad(vars[k]);
    std::vector<double> numeric(inputs[k].size());
    for (std::size_t i = 0; i < numeric.size(); ++i) numeric[i] = (eval(k, i, h) - eval(k, i, -h)) / (2 * h);
    worst = std::max(worst, relative_error(analytic.data(), numeric));
  }
  return worst;
}

}  // namespace moemo::test
